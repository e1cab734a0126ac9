"""Exact evaluation of the test-class supremum as a linear program.

For a center x and scale exponent k, the test class at scale s = kappa**k
consists of functions phi vanishing outside the open ball B = B(x, s),
with zero mean against the point masses, sup bound Phi/mu(B), and
increments |phi(y) - phi(y')| <= omega(dist(y,y')/s)/mu(B) for *all*
pairs of points.  Pinning phi to zero outside B turns the out-of-ball
pair constraints into per-point caps

    |phi(y)| <= min(Phi, min_{y' not in B} omega(dist(y,y')/s)) / mu(B),

the faithful reading of the class; the laxer within-ball-only reading is
available via ``boundary_pinned=False``.

The supremum of |sum f phi mass| over the class is a linear program whose
feasible set is symmetric, so the signed maximum already equals the
supremum of the absolute value.  Three exact routes are used:

* a closed form for two-point balls,
* a closed form when f is constant on B except at a single point,
  valid for provably subadditive moduli (the extremal phi is a capped
  cone around the exceptional point, extended by convex interpolation
  between the McShane envelopes to restore the zero mean),
* the bounded-variable simplex otherwise, after dropping pair
  constraints dominated by the caps and, on 1-d spaces, pair constraints
  already implied by chaining consecutive points.

An independent brute-force oracle for tiny balls brackets the optimum by
grid search; it shares nothing with the LP path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simplex
from .modulus import Modulus
from .space import MetricMeasureSpace

__all__ = ["TestClassInstance", "FunctionalField", "build_instance",
           "evaluate", "field", "oracle"]


@dataclass
class TestClassInstance:
    """Geometry of one test class: ball, caps, and scale."""

    space: MetricMeasureSpace
    x: int
    k: int
    scale: float
    members: np.ndarray
    mu_ball: float
    caps: np.ndarray  # per-member sup bound, boundary decay folded in
    boundary_pinned: bool


@dataclass
class FunctionalField:
    """Values of the functional on points x scale exponents."""

    k_min: int
    k_max: int
    kappa: float
    values: np.ndarray  # shape (k_max - k_min + 1, n_points)
    optimizers: dict | None = None

    def at(self, k: int) -> np.ndarray:
        if not self.k_min <= k <= self.k_max:
            raise KeyError(f"scale exponent {k} outside [{self.k_min}, {self.k_max}]")
        return self.values[k - self.k_min]


def _sorted_axis(space):
    if getattr(space, "_axis_cache", None) is None:
        c = space.coords[:, 0]
        order = np.argsort(c, kind="stable")
        space._axis_cache = (order, c[order])
    return space._axis_cache


def _boundary_caps(space, x, s, members, omega, Phi, mu):
    """min(Phi, omega(nearest out-of-ball distance / s)) / mu per member."""
    n = space.n
    if members.size == n:
        return np.full(members.size, Phi / mu)
    if space.coords is not None and space.coords.shape[1] == 1:
        _, cs = _sorted_axis(space)
        cx = space.coords[x, 0]
        lo = np.searchsorted(cs, cx - s, side="right")
        hi = np.searchsorted(cs, cx + s, side="left")
        cm = space.coords[members, 0]
        dmin = np.full(members.size, np.inf)
        if lo > 0:
            dmin = np.minimum(dmin, cm - cs[lo - 1])
        if hi < n:
            dmin = np.minimum(dmin, cs[hi] - cm)
    else:
        out = np.setdiff1d(np.arange(n), members, assume_unique=True)
        dmin = space.dist[np.ix_(members, out)].min(axis=1)
    return np.minimum(Phi, omega(dmin / s)) / mu


def build_instance(space, x, k, omega, Phi, *, kappa=2.0,
                   boundary_pinned=True) -> TestClassInstance:
    if Phi < 0:
        raise ValueError("Phi must be nonnegative")
    if kappa <= 1:
        raise ValueError("kappa must be > 1")
    s = float(kappa) ** k
    members = space.ball_members(x, s)
    mu = float(space.mass[members].sum())
    if boundary_pinned:
        caps = _boundary_caps(space, x, s, members, omega, Phi, mu)
    else:
        caps = np.full(members.size, Phi / mu)
    return TestClassInstance(space=space, x=int(x), k=int(k), scale=s,
                             members=members, mu_ball=mu, caps=caps,
                             boundary_pinned=boundary_pinned)


def _pair_constraints(inst, omega):
    """Pair rows after cap-dominance and 1-d chain pruning."""
    space = inst.space
    members = inst.members
    nm = members.size
    s, mu, caps = inst.scale, inst.mu_ball, inst.caps
    oneD = space.coords is not None and space.coords.shape[1] == 1
    if oneD:
        order = np.argsort(space.coords[members, 0], kind="stable")
    else:
        order = np.arange(nm)
    om = members[order]
    ai, aj = np.triu_indices(nm, 1)
    d = space.dist[om[ai], om[aj]]
    L = omega(d / s) / mu
    keep = L < caps[order][ai] + caps[order][aj] - 1e-15
    if oneD and nm > 2:
        # consecutive-point increments chain to a bound on every pair;
        # drop pairs whose direct bound is no tighter than the chain
        adj = omega(np.diff(space.coords[om, 0]) / s) / mu
        pref = np.concatenate([[0.0], np.cumsum(adj)])
        implied = pref[aj] - pref[ai] <= L * (1 + 1e-12)
        keep &= ~implied
        keep |= aj == ai + 1  # consecutive pairs anchor the chain
    ai, aj, L = ai[keep], aj[keep], L[keep]
    return order[ai], order[aj], L


def _solve_two_point(g, m, caps, L01):
    """Closed form for |B| = 2: the mean-zero line cut by box and increment."""
    gap = g[0] / m[0] - g[1] / m[1]  # objective slope along the line, per phi0
    slope = abs(gap) * m[0]
    limit = min(caps[0], caps[1] * m[1] / m[0], L01 * m[1] / (m[0] + m[1]))
    phi0 = np.sign(gap) * limit if gap != 0 else 0.0
    phi = np.array([phi0, -m[0] * phi0 / m[1]])
    return slope * limit, phi


def _solve_spike(inst, omega, z_local, weight):
    """Closed form when f is constant on B off a single point.

    With phi(z) frozen at a, the pointwise-extreme feasible extensions are
    the McShane envelopes  max(-cap, a - L(.,z))  and  min(cap, a + L(.,z))
    (feasible because the modulus is subadditive), so a is attainable
    exactly when zero lies between their mass means.  The objective pushes
    a to the largest root of the lower-envelope mean, capped at cap(z).
    """
    space, members = inst.space, inst.members
    m = space.mass[members]
    caps = inst.caps
    q = omega(space.dist[members, members[z_local]] / inst.scale) / inst.mu_ball
    cap_z = caps[z_local]

    # mean of the lower envelope as a function of a, piecewise linear and
    # nondecreasing with breakpoints at b_j = q_j - cap_j
    b = q - caps
    order = np.argsort(b, kind="stable")
    bs = b[order]
    prefix_m = np.concatenate([[0.0], np.cumsum(m[order])])
    prefix_qm = np.concatenate([[0.0], np.cumsum((q * m)[order])])
    capm_tail = np.concatenate([np.cumsum((caps * m)[order][::-1])[::-1], [0.0]])

    def mean_lo(a):
        t = int(np.searchsorted(bs, a, side="right"))
        return a * prefix_m[t] - prefix_qm[t] - capm_tail[t]

    if mean_lo(cap_z) <= 0:
        a_star = cap_z
    else:
        ubs = np.unique(bs)
        right = np.searchsorted(bs, ubs, side="right")
        vals = ubs * prefix_m[right] - prefix_qm[right] - capm_tail[right]
        above = np.flatnonzero(vals > 0)
        if above.size == 0:
            slope = prefix_m[-1]
            a_star = ubs[-1] - vals[-1] / slope
        else:
            i = int(above[0])  # vals[0] = -sum(cap*m) < 0, so i >= 1
            t = right[i - 1]
            slope = prefix_m[t]
            if slope > 0:
                a_star = (prefix_qm[t] + capm_tail[t]) / slope
            else:
                a_star = ubs[i]
        a_star = min(max(a_star, 0.0), cap_z)

    value = abs(weight) * a_star
    lo_env = np.maximum(-caps, a_star - q)
    hi_env = np.minimum(caps, a_star + q)
    mlo = float(np.sum(lo_env * m))
    mhi = float(np.sum(hi_env * m))
    if mhi - mlo > 0:
        theta = mhi / (mhi - mlo)
        theta = min(max(theta, 0.0), 1.0)
        phi = theta * lo_env + (1 - theta) * hi_env
    else:
        phi = lo_env
    return value, np.sign(weight) * phi


def _solve_simplex(inst, omega, g):
    members = inst.members
    nm = members.size
    ai, aj, L = _pair_constraints(inst, omega)
    rows = len(ai) + 1
    A = np.zeros((rows, nm))
    A[np.arange(len(ai)), ai] = 1.0
    A[np.arange(len(ai)), aj] = -1.0
    A[-1] = inst.space.mass[members]
    row_lo = np.concatenate([-L, [0.0]])
    row_hi = np.concatenate([L, [0.0]])
    res = simplex.maximize(g, A, row_lo, row_hi, -inst.caps, inst.caps)
    if res.status != "optimal":
        raise RuntimeError(f"internal error: test-class LP came back {res.status}")
    phi = res.x
    scale = 1.0 + float(np.max(np.abs(phi), initial=0.0))
    if abs(float(A[-1] @ phi)) > 1e-9 * (1.0 + inst.mu_ball) * scale:
        raise RuntimeError("internal error: optimizer violates the zero-mean row")
    if len(ai) and np.any(np.abs(phi[ai] - phi[aj]) > L + 1e-9 * scale):
        raise RuntimeError("internal error: optimizer violates an increment row")
    return max(res.value, 0.0), phi


def _spike_index(fb):
    """Local index of the single member where f deviates, else None/-1."""
    uniq, counts = np.unique(fb, return_counts=True)
    if uniq.size == 1:
        return None
    if uniq.size != 2 or counts.min() != 1:
        return -1
    minority = uniq[int(np.argmin(counts))]
    return int(np.flatnonzero(fb == minority)[0])


def _evaluate_instance(inst, omega, f, want_phi):
    space, members = inst.space, inst.members
    nm = members.size
    phi_full = np.zeros(space.n) if want_phi else None
    if nm <= 1 or float(np.max(inst.caps, initial=0.0)) <= 0.0:
        return 0.0, phi_full
    fb = f[members]
    m = space.mass[members]
    if float(fb.max()) == float(fb.min()):
        return 0.0, phi_full
    if nm == 2:
        d01 = space.dist[members[0], members[1]]
        L01 = omega(d01 / inst.scale) / inst.mu_ball
        value, phi = _solve_two_point(fb * m, m, inst.caps, L01)
    else:
        value = phi = None
        if inst.boundary_pinned and omega.provably_subadditive:
            z = _spike_index(fb)
            if z is not None and z >= 0:
                base = fb[1] if z == 0 else fb[0]
                value, phi = _solve_spike(inst, omega, z, (fb[z] - base) * m[z])
        if value is None:
            # shift by a constant: the zero-mean row makes this free and
            # keeps objective magnitudes small
            g = (fb - float(np.median(fb))) * m
            value, phi = _solve_simplex(inst, omega, g)
    if want_phi:
        phi_full[members] = phi
    return float(value), phi_full


def evaluate(space, f, x, k, omega: Modulus, Phi, *, kappa=2.0,
             boundary_pinned=True, want_phi=True):
    """Supremum of |sum f phi mass| over the test class at (x, k).

    Returns (value, phi) with phi an optimizer embedded on the full
    point set (zeros outside the ball), or (value, None) when
    ``want_phi=False``.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (space.n,):
        raise ValueError("grid function length mismatch")
    inst = build_instance(space, x, k, omega, Phi, kappa=kappa,
                          boundary_pinned=boundary_pinned)
    return _evaluate_instance(inst, omega, f, want_phi)


def field(space, f, omega: Modulus, Phi, k_min, k_max, *, kappa=2.0,
          boundary_pinned=True, keep_optimizers=False) -> FunctionalField:
    """Evaluate the functional at every (point, scale exponent).

    Entries sharing the same ball at the same scale are solved once; on a
    grid the saturated top scales collapse to one program per level.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (space.n,):
        raise ValueError("grid function length mismatch")
    if k_min > k_max:
        raise ValueError("empty scale range")
    nk = k_max - k_min + 1
    values = np.zeros((nk, space.n))
    optim = {} if keep_optimizers else None
    cache = {}
    for ki, k in enumerate(range(k_min, k_max + 1)):
        for x in range(space.n):
            inst = build_instance(space, x, k, omega, Phi, kappa=kappa,
                                  boundary_pinned=boundary_pinned)
            key = (k, inst.members.tobytes())
            if key in cache and not keep_optimizers:
                values[ki, x] = cache[key]
                continue
            val, phi = _evaluate_instance(inst, omega, f, keep_optimizers)
            values[ki, x] = val
            cache[key] = val
            if keep_optimizers:
                optim[(x, k)] = phi
    return FunctionalField(k_min=k_min, k_max=k_max, kappa=float(kappa),
                           values=values, optimizers=optim)


def oracle(space, f, x, k, omega: Modulus, Phi, delta, *, kappa=2.0):
    """Bracket the supremum on a ball of at most three points.

    Grid search with step ``delta`` over the first |B|-1 coordinates, the
    last coordinate solved from the exact zero-mean equation.  ``lo`` is
    the best objective among strictly feasible grid points; ``hi`` adds
    the worst-case objective movement of rounding the true optimizer to
    the grid, with constraint slack widened to absorb that rounding.  The
    construction is independent of the LP path.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    f = np.asarray(f, dtype=float)
    s = float(kappa) ** k
    members = space.ball_members(x, s)
    nm = members.size
    if nm > 3:
        raise ValueError("oracle requires a ball with at most 3 points")
    if nm <= 1:
        return 0.0, 0.0
    m = space.mass[members]
    g = f[members] * m
    out = np.setdiff1d(np.arange(space.n), members, assume_unique=True)
    caps = np.full(nm, float(Phi))
    if out.size:
        dmin = space.dist[np.ix_(members, out)].min(axis=1)
        caps = np.minimum(caps, omega(dmin / s))
    caps = caps / float(m.sum())
    ii, jj = np.triu_indices(nm, 1)
    L = omega(space.dist[members[ii], members[jj]] / s) / float(m.sum())

    axes = []
    for i in range(nm - 1):
        ax = np.arange(-caps[i], caps[i] + delta / 2, delta)
        axes.append(np.union1d(ax, [0.0, -caps[i], caps[i]]))

    # worst-case movement of each coordinate when the true optimizer is
    # rounded to the grid; a zero cap pins the coordinate entirely
    moves = np.minimum(np.full(nm, delta / 2), caps)
    moves[-1] = min(float(m[:-1] @ moves[:-1] / m[-1]), 2 * caps[-1])
    relax = float(2 * moves.max()) + 1e-9
    obj_slack = float(np.abs(g) @ moves)

    def best(pts, slack):
        ok = np.ones(pts.shape[0], dtype=bool)
        for a, bnd in zip(range(nm), caps):
            ok &= np.abs(pts[:, a]) <= bnd + slack
        for a, b2, bound in zip(ii, jj, L):
            ok &= np.abs(pts[:, a] - pts[:, b2]) <= bound + slack
        if not ok.any():
            return 0.0
        return max(0.0, float(np.max(pts[ok] @ g)))

    lo = 0.0
    hi_base = 0.0
    chunk = max(1, 2_000_000 // max(1, len(axes[-1]) if nm == 3 else 1))
    first_axis = axes[0]
    for start in range(0, len(first_axis), chunk):
        part = first_axis[start:start + chunk]
        if nm == 2:
            grid = part[:, None]
        else:
            g0, g1 = np.meshgrid(part, axes[1], indexing="ij")
            grid = np.column_stack([g0.ravel(), g1.ravel()])
        last = -(grid @ m[:-1]) / m[-1]
        pts = np.column_stack([grid, last])
        lo = max(lo, best(pts, 1e-9))
        hi_base = max(hi_base, best(pts, relax))
    hi = max(lo, hi_base) + obj_slack
    return lo - 1e-12, hi
