"""The intrinsic square function with aperture and its norm probes.

G(x)^2 sums, over a finite window of scale exponents k, the averages of
the squared test-class functional over the dilated balls B(x, beta *
kappa**k).  The window replaces the bi-infinite scale sum: below the
minimal point spacing the functional vanishes on singleton balls, and
above the diameter every level contributes the same saturated term, so
defaults that touch both ends capture everything that moves.

The dilation parameter beta stays an arbitrary real >= 1 here; rounding
beta to a power of kappa happens only in the sparse-domination module.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import intrinsic
from .modulus import Modulus, dini_sum, log_dini_sum
from .space import MetricMeasureSpace, aperture_gamma, ball_sums, uncentered_maximal

__all__ = [
    "SquareFunctionResult",
    "default_scale_window",
    "intrinsic_square",
    "l2_norm_probe",
    "weighted_l2_ratio",
    "weak11_ratio",
]


@dataclass
class SquareFunctionResult:
    G: np.ndarray
    beta: float
    gamma: float
    k_min: int
    k_max: int
    field: intrinsic.FunctionalField


def default_scale_window(space: MetricMeasureSpace, kappa: float = 2.0):
    """Smallest window saturating both ends: kappa**k_min at or below the
    minimal spacing, kappa**k_max above the diameter."""
    radii = space.realized_radii()
    if radii.size == 0:
        return 0, 0
    spacing = float(radii[0])
    k_min = int(np.floor(np.log(spacing) / np.log(kappa)))
    k_max = int(np.ceil(np.log(space.diameter) / np.log(kappa))) + 1
    return k_min, k_max


def intrinsic_square(space, f, omega: Modulus, Phi, beta, k_min, k_max, *,
                     kappa=2.0, boundary_pinned=True,
                     field: intrinsic.FunctionalField | None = None
                     ) -> SquareFunctionResult:
    """G(x) = sqrt(sum_k average over B(x, beta kappa^k) of A(., k)^2)."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    f = np.asarray(f, dtype=float)
    if field is None:
        field = intrinsic.field(space, f, omega, Phi, k_min, k_max,
                                kappa=kappa, boundary_pinned=boundary_pinned)
    if field.k_min > k_min or field.k_max < k_max:
        raise ValueError("supplied field does not cover the scale window")
    Gsq = np.zeros(space.n)
    for k in range(k_min, k_max + 1):
        w = field.at(k) ** 2 * space.mass
        sums, masses = ball_sums(space, w, beta * kappa ** k)
        Gsq += sums / masses
    radii = kappa ** np.arange(k_min, k_max + 1, dtype=float)
    gamma = aperture_gamma(space, beta, radii)
    return SquareFunctionResult(G=np.sqrt(Gsq), beta=float(beta), gamma=gamma,
                                k_min=k_min, k_max=k_max, field=field)


def l2_norm_probe(space, omega: Modulus, Phi, k_min, k_max, *, trials, seed,
                  kappa=2.0) -> float:
    """Largest ratio of the point-by-scale square sum of the functional
    against Phi times the scale-sum norm, over random unit-mass-L2 inputs.

    A lower bound on the squared operator norm of the functional map,
    used as a sanity ceiling in experiments.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    denom = Phi * dini_sum(omega, kappa)
    best = 0.0
    for _ in range(trials):
        f = rng.uniform(-1, 1, space.n)
        norm = np.sqrt(float(f**2 @ space.mass))
        if norm == 0:
            continue
        f = f / norm
        fld = intrinsic.field(space, f, omega, Phi, k_min, k_max, kappa=kappa)
        total = float((fld.values**2 * space.mass[None, :]).sum())
        if denom > 0:
            best = max(best, np.sqrt(total / denom))
        else:
            best = max(best, np.sqrt(total))
    return best


def weighted_l2_ratio(space, f, v, omega: Modulus, Phi, beta, k_min, k_max, *,
                      kappa=2.0, field=None, Mv=None) -> float:
    """sum G^2 v mass over Phi * scale-sum * sum |f|^2 Mv mass.

    The quantity bounded by an absolute constant uniformly in beta.
    """
    f = np.asarray(f, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or not np.any(v > 0):
        raise ValueError("weight must be nonnegative and not identically zero")
    res = intrinsic_square(space, f, omega, Phi, beta, k_min, k_max,
                           kappa=kappa, field=field)
    if Mv is None:
        Mv = uncentered_maximal(space, v)
    denom = Phi * dini_sum(omega, kappa) * float((np.abs(f) ** 2 * Mv) @ space.mass)
    if denom == 0:
        return 0.0
    return float((res.G**2 * v) @ space.mass) / denom


def weak11_ratio(space, f, v, omega: Modulus, Phi, beta, k_min, k_max, *,
                 kappa=2.0, field=None, Mv=None, normalization="log_dini") -> float:
    """Weak-type ratio: sup over realized lambda of lambda v{G > lambda},
    against gamma^(1/2) times the (log-)scale-sum times sum |f| Mv mass.

    The lambda grid walks the positive quantiles of G, where every jump of
    the distribution function is realized.
    """
    f = np.asarray(f, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or not np.any(v > 0):
        raise ValueError("weight must be nonnegative and not identically zero")
    res = intrinsic_square(space, f, omega, Phi, beta, k_min, k_max,
                           kappa=kappa, field=field)
    if Mv is None:
        Mv = uncentered_maximal(space, v)
    if normalization == "log_dini":
        norm = log_dini_sum(omega, kappa)
    elif normalization == "dini":
        norm = dini_sum(omega, kappa)
    else:
        raise ValueError("normalization must be 'dini' or 'log_dini'")
    denom = np.sqrt(res.gamma) * norm * float((np.abs(f) * Mv) @ space.mass)
    if denom == 0:
        return 0.0
    levels = np.unique(res.G[res.G > 0])
    best = 0.0
    vm = v * space.mass
    for lam in levels * (1 - 1e-12):
        best = max(best, lam * float(vm[res.G > lam].sum()))
    return best / denom
