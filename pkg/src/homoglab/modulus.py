"""Moduli of continuity with Dini and log-Dini functionals.

A modulus is a nondecreasing function on [0, inf) vanishing at zero.
Subadditivity (omega(u) <= omega(t) + omega(s) whenever u <= t + s) is
certified on a grid rather than assumed: user-supplied tables can violate
it, and none of the evaluation machinery requires it, so the certificate
is advisory.  Power moduli t**alpha with alpha in (0, 1] are concave with
omega(0) = 0 and therefore subadditive exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Modulus",
    "PowerModulus",
    "TableModulus",
    "ScaledModulus",
    "parse_modulus",
    "certify_subadditive",
    "SubadditivityCertificate",
    "dini_norm",
    "log_dini_norm",
    "dini_sum",
    "log_dini_sum",
]

_QUAD_BLOCKS = 60  # geometric-dyadic quadrature over [2**-60, 1]


class Modulus:
    """Base class; subclasses implement vectorized evaluation."""

    #: True only when subadditivity holds by a proof, not a grid check.
    provably_subadditive = False

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        if np.any(arr < 0):
            raise ValueError("modulus arguments must be nonnegative")
        out = self._eval(arr)
        return float(out[0]) if scalar else out

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class PowerModulus(Modulus):
    """omega(t) = t**alpha for 0 < alpha <= 1."""

    provably_subadditive = True

    def __init__(self, alpha: float):
        if not 0 < alpha <= 1:
            raise ValueError("power modulus requires 0 < alpha <= 1")
        self.alpha = float(alpha)

    def _eval(self, t):
        return t ** self.alpha

    def __repr__(self):
        return f"PowerModulus({self.alpha})"


class TableModulus(Modulus):
    """Piecewise-linear modulus through (knot, value) pairs.

    Linear interpolation between knots, constant beyond the last knot,
    and linear from (0, 0) up to the first knot.  Values must be
    nondecreasing and nonnegative.
    """

    def __init__(self, knots, values):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or knots.size == 0:
            raise ValueError("knots/values must be matching nonempty 1-d arrays")
        if np.any(np.diff(knots) <= 0) or np.any(knots < 0):
            raise ValueError("knots must be strictly increasing and nonnegative")
        if np.any(np.diff(values) < 0) or np.any(values < 0):
            raise ValueError("table values must be nondecreasing and nonnegative")
        if knots[0] == 0.0:
            if values[0] != 0.0:
                raise ValueError("a table with knot 0 must have value 0 there")
        else:
            knots = np.concatenate([[0.0], knots])
            values = np.concatenate([[0.0], values])
        self.knots = knots
        self.values = values

    def _eval(self, t):
        return np.interp(t, self.knots, self.values)

    def __repr__(self):
        return f"TableModulus({self.knots.tolist()}, {self.values.tolist()})"


class ScaledModulus(Modulus):
    """factor * base for a positive factor."""

    def __init__(self, base: Modulus, factor: float):
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        self.base = base
        self.factor = float(factor)
        self.provably_subadditive = base.provably_subadditive

    def _eval(self, t):
        return self.factor * self.base._eval(t)

    def __repr__(self):
        return f"ScaledModulus({self.base!r}, {self.factor})"


def parse_modulus(spec: str) -> Modulus:
    """Parse CLI modulus strings: "power:0.5", "table:path.json",
    optionally prefixed by "scale:<c>:"."""
    if spec.startswith("scale:"):
        _, factor, rest = spec.split(":", 2)
        return ScaledModulus(parse_modulus(rest), float(factor))
    kind, _, arg = spec.partition(":")
    if kind == "power":
        return PowerModulus(float(arg))
    if kind == "table":
        with open(arg) as fh:
            payload = json.load(fh)
        return TableModulus(payload["knots"], payload["values"])
    raise ValueError(f"unknown modulus spec {spec!r}")


@dataclass(frozen=True)
class SubadditivityCertificate:
    ok: bool
    witness: tuple | None  # (u, t, s) with omega(u) > omega(t) + omega(s)


def certify_subadditive(m: Modulus, grid_size: int) -> SubadditivityCertificate:
    """Check omega(u) <= omega(t) + omega(s) over grid triples with u <= t+s.

    Since omega is nondecreasing it suffices to test, for each grid pair
    (t, s), the largest grid point u below t + s.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    grid = np.linspace(0.0, 2.0, grid_size)
    w = m(grid)
    total = grid[:, None] + grid[None, :]
    idx = np.searchsorted(grid, total * (1 + 1e-12), side="right") - 1
    lhs = w[idx]
    rhs = w[:, None] + w[None, :]
    tol = 1e-12 * (1.0 + float(np.max(w)))
    bad = lhs > rhs + tol
    if not bad.any():
        return SubadditivityCertificate(ok=True, witness=None)
    i, j = np.unravel_index(int(np.argmax(lhs - rhs)), bad.shape)
    return SubadditivityCertificate(ok=False,
                                    witness=(float(grid[idx[i, j]]), float(grid[i]), float(grid[j])))


def _dyadic_quadrature(m: Modulus, quadrature_points: int, log_weight: bool) -> float:
    if quadrature_points < 16:
        raise ValueError("quadrature_points must be >= 16")
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_points)
    total = 0.0
    blocks = []
    for j in range(_QUAD_BLOCKS):
        a = 2.0 ** -(j + 1)
        b = 2.0 ** -j
        t = a + (b - a) * (nodes + 1.0) / 2.0
        w = weights * (b - a) / 2.0
        integrand = m(t) / t
        if log_weight:
            integrand = integrand * np.abs(np.log(t))
        block = float(np.dot(w, integrand))
        blocks.append(block)
        total += block
    # divergence: block contributions must decay toward t = 0
    if total > 0:
        tail = blocks[-8:]
        decaying = any(tail[i + 1] < 0.999 * tail[i] for i in range(len(tail) - 1))
        if not decaying and tail[-1] > 1e-13 * total:
            return math.inf
    return total


def dini_norm(m: Modulus, quadrature_points: int = 64) -> float:
    """Numerical value of the integral of omega(t)/t over (0, 1]."""
    return _dyadic_quadrature(m, quadrature_points, log_weight=False)


def log_dini_norm(m: Modulus, quadrature_points: int = 64) -> float:
    """Numerical value of the integral of omega(t)|log t|/t over (0, 1]."""
    return _dyadic_quadrature(m, quadrature_points, log_weight=True)


def _scale_sum(m: Modulus, kappa: float, log_weight: bool) -> float:
    if kappa <= 1:
        raise ValueError("kappa must be > 1")
    total = 0.0
    for k in range(100_000):
        term = m(kappa ** -k)
        if log_weight:
            term *= k + 1
        total += term
        if term == 0.0 or (k > 0 and term < 1e-15 * total):
            return total
    return math.inf


def dini_sum(m: Modulus, kappa: float) -> float:
    """Sum of omega(kappa**-k) over k >= 0, truncated at relative 1e-15."""
    return _scale_sum(m, kappa, log_weight=False)


def log_dini_sum(m: Modulus, kappa: float) -> float:
    """Sum of (k+1) omega(kappa**-k) over k >= 0."""
    return _scale_sum(m, kappa, log_weight=True)
