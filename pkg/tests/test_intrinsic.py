import numpy as np
import pytest

from homoglab import intrinsic as intr
from homoglab.intrinsic import build_instance, _evaluate_instance, _solve_simplex
from homoglab.modulus import PowerModulus, ScaledModulus
from homoglab.space import MetricMeasureSpace, euclidean_grid
from .conftest import random_space


def two_point_space():
    return MetricMeasureSpace(coords=[[0.0], [1.0]], mass=[1.0, 1.0])


def pick_ball(space, rng, lo=2, hi=6, kappa=2.0):
    """Random (x, k) whose ball size falls in [lo, hi], or None."""
    options = []
    for x in range(space.n):
        for k in range(-2, 4):
            nb = space.ball_members(x, kappa**k).size
            if lo <= nb <= hi:
                options.append((x, k))
    if not options:
        return None
    return options[int(rng.integers(len(options)))]


class TestClosedFormExamples:
    def test_two_point_value(self):
        val, phi = intr.evaluate(two_point_space(), np.array([1.0, -1.0]),
                                 0, 1, PowerModulus(1.0), 1.0, kappa=2.0)
        assert val == pytest.approx(0.25, abs=1e-9)
        assert phi == pytest.approx([0.125, -0.125], abs=1e-9)

    def test_two_point_cap_binds(self):
        val, _ = intr.evaluate(two_point_space(), np.array([1.0, -1.0]),
                               0, 1, PowerModulus(1.0), 0.05, kappa=2.0)
        assert val == pytest.approx(0.05, abs=1e-12)

    def test_constant_gives_zero(self, rng):
        spc = random_space(rng, 2, 8)
        val, phi = intr.evaluate(spc, np.full(spc.n, 2.7), 0, 1,
                                 PowerModulus(0.5), 1.0)
        assert val == 0.0
        assert np.all(phi == 0.0)

    def test_singleton_ball_gives_zero(self):
        g = euclidean_grid(1, 8, 1.0)
        val, _ = intr.evaluate(g, np.arange(8.0), 3, 0, PowerModulus(1.0), 1.0)
        assert val == 0.0


class TestInvariants:
    def test_sublinear_and_homogeneous(self, rng):
        om = PowerModulus(0.6)
        for _ in range(60):
            spc = random_space(rng, 3, 8)
            picked = pick_ball(spc, rng)
            if picked is None:
                continue
            x, k = picked
            f = rng.normal(size=spc.n)
            g = rng.normal(size=spc.n)
            af, _ = intr.evaluate(spc, f, x, k, om, 1.0)
            ag, _ = intr.evaluate(spc, g, x, k, om, 1.0)
            asum, _ = intr.evaluate(spc, f + g, x, k, om, 1.0)
            assert asum <= af + ag + 1e-9
            c = float(rng.normal())
            ac, _ = intr.evaluate(spc, c * f, x, k, om, 1.0)
            assert ac == pytest.approx(abs(c) * af, abs=1e-9)

    def test_constant_shift_invariance(self, rng):
        om = PowerModulus(1.0)
        for _ in range(30):
            spc = random_space(rng, 3, 8)
            picked = pick_ball(spc, rng)
            if picked is None:
                continue
            x, k = picked
            f = rng.normal(size=spc.n)
            a0, _ = intr.evaluate(spc, f, x, k, om, 1.0)
            a1, _ = intr.evaluate(spc, f + 17.3, x, k, om, 1.0)
            assert a1 == pytest.approx(a0, abs=1e-9)

    def test_locality(self, rng):
        om = PowerModulus(0.8)
        for _ in range(30):
            spc = random_space(rng, 4, 9)
            picked = pick_ball(spc, rng, lo=2, hi=spc.n - 1)
            if picked is None:
                continue
            x, k = picked
            members = spc.ball_members(x, 2.0**k)
            f = rng.normal(size=spc.n)
            a0, _ = intr.evaluate(spc, f, x, k, om, 1.0)
            g = f.copy()
            outside = np.setdiff1d(np.arange(spc.n), members)
            g[outside] += rng.normal(size=outside.size) * 10
            a1, _ = intr.evaluate(spc, g, x, k, om, 1.0)
            assert a1 == pytest.approx(a0, abs=1e-12)

    def test_monotone_in_class(self, rng):
        base = PowerModulus(0.7)
        bigger = ScaledModulus(base, 1.8)
        for _ in range(30):
            spc = random_space(rng, 3, 8)
            picked = pick_ball(spc, rng)
            if picked is None:
                continue
            x, k = picked
            f = rng.normal(size=spc.n)
            small, _ = intr.evaluate(spc, f, x, k, base, 0.7)
            large, _ = intr.evaluate(spc, f, x, k, bigger, 1.4)
            assert small <= large + 1e-9

    def test_mean_zero_support_decay(self, rng):
        # zero-mean f supported in a far cluster: the functional vanishes
        # on balls missing the cluster
        coords = np.concatenate([np.arange(4.0), [50.0, 51.0]])[:, None]
        mass = np.ones(6)
        spc = MetricMeasureSpace(coords=coords, mass=mass)
        f = np.zeros(6)
        f[4], f[5] = 1.0, -1.0
        for x in range(4):
            for k in (0, 1, 2):
                val, _ = intr.evaluate(spc, f, x, k, PowerModulus(1.0), 1.0)
                assert val == 0.0


class TestRouteAgreement:
    def test_spike_matches_simplex(self, rng):
        for _ in range(120):
            spc = random_space(rng, 3, 11)
            om = PowerModulus(float(rng.uniform(0.3, 1.0)))
            Phi = float(rng.uniform(0.2, 2.0))
            picked = pick_ball(spc, rng, lo=3, hi=11)
            if picked is None:
                continue
            x, k = picked
            inst = build_instance(spc, x, k, om, Phi)
            f = np.full(spc.n, float(rng.normal()))
            z = int(rng.choice(inst.members))
            f[z] += float(rng.normal()) * 2 + 0.1
            v_fast, phi_fast = _evaluate_instance(inst, om, f, True)
            fb = f[inst.members]
            m = spc.mass[inst.members]
            g = (fb - float(np.median(fb))) * m
            v_lp, _ = _solve_simplex(inst, om, g)
            assert v_fast == pytest.approx(v_lp, abs=1e-10, rel=1e-9)
            # the reported optimizer must be feasible and attain the value
            phi = phi_fast[inst.members]
            assert abs(float(phi @ m)) < 1e-10
            assert np.all(np.abs(phi) <= inst.caps + 1e-10)
            assert abs(float(g @ phi)) == pytest.approx(v_fast, abs=1e-9)

    def test_field_matches_pointwise_evaluate(self, rng):
        spc = random_space(rng, 5, 9)
        om = PowerModulus(0.5)
        f = rng.normal(size=spc.n)
        fld = intr.field(spc, f, om, 1.0, -1, 2)
        for k in range(-1, 3):
            for x in range(spc.n):
                val, _ = intr.evaluate(spc, f, x, k, om, 1.0)
                assert fld.at(k)[x] == pytest.approx(val, abs=1e-10)

    def test_field_homogeneity(self, rng):
        spc = random_space(rng, 4, 8)
        f = rng.normal(size=spc.n)
        f0 = intr.field(spc, f, PowerModulus(1.0), 1.0, 0, 2)
        f3 = intr.field(spc, -3.0 * f, PowerModulus(1.0), 1.0, 0, 2)
        assert np.allclose(f3.values, 3.0 * f0.values, atol=1e-9)

    def test_zero_field(self, rng):
        spc = random_space(rng, 3, 6)
        fld = intr.field(spc, np.zeros(spc.n), PowerModulus(1.0), 1.0, 0, 2)
        assert np.all(fld.values == 0.0)


class TestOracle:
    def test_two_point_interval(self):
        lo, hi = intr.oracle(two_point_space(), np.array([1.0, -1.0]),
                             0, 1, PowerModulus(1.0), 1.0, 1e-3, kappa=2.0)
        assert lo <= 0.25 <= hi
        assert hi - lo <= 2e-3

    def test_constant_interval(self):
        lo, hi = intr.oracle(two_point_space(), np.array([4.0, 4.0]),
                             0, 1, PowerModulus(1.0), 1.0, 1e-3)
        assert lo <= 0.0 <= hi
        assert hi <= 1e-2

    def test_degenerate_cap(self):
        lo, hi = intr.oracle(two_point_space(), np.array([1.0, -1.0]),
                             0, 1, PowerModulus(1.0), 0.0, 1e-3)
        assert lo <= 0.0 <= hi
        assert hi <= 1e-9 + 1e-12

    def test_rejects_large_ball(self):
        g = euclidean_grid(1, 8, 1.0)
        with pytest.raises(ValueError):
            intr.oracle(g, np.zeros(8), 4, 3, PowerModulus(1.0), 1.0, 1e-3)

    def test_lp_in_interval(self, rng):
        om_pool = [PowerModulus(0.4), PowerModulus(0.75), PowerModulus(1.0)]
        checked = 0
        while checked < 40:
            spc = random_space(rng, 2, 6)
            picked = pick_ball(spc, rng, lo=2, hi=3)
            if picked is None:
                continue
            x, k = picked
            om = om_pool[int(rng.integers(3))]
            f = rng.normal(size=spc.n)
            val, _ = intr.evaluate(spc, f, x, k, om, 1.0)
            lo, hi = intr.oracle(spc, f, x, k, om, 1.0, 1e-3)
            assert lo <= val <= hi
            checked += 1


class TestBoundaryReading:
    def test_pinned_no_larger_than_lax(self, rng):
        for _ in range(20):
            spc = random_space(rng, 4, 9)
            picked = pick_ball(spc, rng, lo=2, hi=spc.n - 1)
            if picked is None:
                continue
            x, k = picked
            f = rng.normal(size=spc.n)
            pin, _ = intr.evaluate(spc, f, x, k, PowerModulus(0.6), 1.0,
                                   boundary_pinned=True)
            lax, _ = intr.evaluate(spc, f, x, k, PowerModulus(0.6), 1.0,
                                   boundary_pinned=False)
            assert pin <= lax + 1e-9

    def test_full_space_ball_readings_agree(self, rng):
        spc = random_space(rng, 3, 6, spread=1.0)
        k = 3  # ball covers everything
        f = rng.normal(size=spc.n)
        pin, _ = intr.evaluate(spc, f, 0, k, PowerModulus(1.0), 1.0,
                               boundary_pinned=True)
        lax, _ = intr.evaluate(spc, f, 0, k, PowerModulus(1.0), 1.0,
                               boundary_pinned=False)
        assert pin == pytest.approx(lax, abs=1e-12)
