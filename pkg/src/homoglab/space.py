"""Finite metric measure spaces with atomic masses.

A space is a finite point set together with a metric and a positive mass
per point; every integral in this package is a mass-weighted sum.  Balls
are open throughout: ``ball(x, r)`` contains exactly the points at
distance strictly less than ``r`` from ``x``.

Suprema over a continuum of radii are replaced by enumeration over the
*realized* radii: on a finite space, ball membership only changes when the
radius crosses a pairwise distance, so the set of all pairwise distances
(plus a relative bump to realize closed-ball memberships) is exhaustive.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricMeasureSpace",
    "Ball",
    "euclidean_grid",
    "doubling_constant",
    "aperture_gamma",
    "reverse_doubling_epsilon",
    "uncentered_maximal",
    "ball_sums",
    "save_space",
    "load_space",
    "save_grid_function",
    "load_grid_function",
]

# relative bump used to turn a realized distance into a radius that
# includes the points sitting exactly at that distance
RADIUS_BUMP = 1.0 + 1e-9


@dataclass(frozen=True)
class Ball:
    """Open metric ball: members are the points at distance < radius."""

    center: int
    radius: float
    members: np.ndarray
    measure: float


class MetricMeasureSpace:
    """Finite point set with a metric and positive point masses.

    Exactly one of ``coords`` / ``dist`` must be supplied.  Coordinates
    give Euclidean distances and the triangle inequality holds by
    construction; an explicit distance matrix is audited exhaustively
    (symmetry, zero diagonal, triangle inequality over all triples).

    Duplicate points (distance zero, both with positive mass) are allowed;
    they are metrically indistinguishable but kept as distinct atoms.
    """

    def __init__(self, *, coords=None, dist=None, mass, dim_hint=None, grid_meta=None):
        if (coords is None) == (dist is None):
            raise ValueError("exactly one of coords/dist must be given")
        self.mass = np.asarray(mass, dtype=float)
        if self.mass.ndim != 1 or self.mass.size == 0:
            raise ValueError("mass must be a nonempty 1-d array")
        if not np.all(np.isfinite(self.mass)) or np.any(self.mass <= 0):
            raise ValueError("point masses must be positive and finite")
        n = self.mass.size

        if coords is not None:
            coords = np.asarray(coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != n:
                raise ValueError("coords/mass length mismatch")
            if not np.all(np.isfinite(coords)):
                raise ValueError("coords must be finite")
            diff = coords[:, None, :] - coords[None, :, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            # exact zero diagonal regardless of rounding
            np.fill_diagonal(dist, 0.0)
            self.coords = coords
            self.dist = dist
        else:
            dist = np.asarray(dist, dtype=float)
            if dist.shape != (n, n):
                raise ValueError("dist must be an NxN matrix matching mass")
            self.coords = None
            self.dist = dist
            self._audit_metric(dist)

        self.dim_hint = dim_hint if dim_hint is not None else (
            self.coords.shape[1] if self.coords is not None else None
        )
        self.grid_meta = grid_meta  # (d, n, h) when built by euclidean_grid
        self._realized_radii = None

    @staticmethod
    def _audit_metric(dist):
        if not np.all(np.isfinite(dist)) or np.any(dist < 0):
            raise ValueError("distances must be finite and nonnegative")
        if np.any(np.abs(np.diag(dist)) > 0):
            raise ValueError("dist diagonal must be zero")
        if not np.allclose(dist, dist.T, rtol=0, atol=0):
            raise ValueError("dist must be symmetric")
        tol = 1e-12 * max(1.0, float(dist.max()))
        for j in range(dist.shape[0]):
            slack = dist[:, j][:, None] + dist[j, :][None, :] - dist + tol
            if np.any(slack < 0):
                i, k = np.unravel_index(int(np.argmin(slack)), slack.shape)
                raise ValueError(
                    f"triangle inequality fails for triple ({i},{j},{k}): "
                    f"d(i,k)={dist[i, k]} > d(i,j)+d(j,k)={dist[i, j] + dist[j, k]}"
                )

    @property
    def n(self) -> int:
        return self.mass.size

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def ball_members(self, x: int, r: float) -> np.ndarray:
        if r <= 0:
            raise ValueError("ball radius must be positive")
        return np.flatnonzero(self.dist[x] < r)

    def ball(self, x: int, r: float) -> Ball:
        members = self.ball_members(x, r)
        return Ball(center=int(x), radius=float(r), members=members,
                    measure=float(self.mass[members].sum()))

    def measure(self, members) -> float:
        return float(self.mass[np.asarray(members, dtype=int)].sum())

    def realized_radii(self) -> np.ndarray:
        """Distinct positive pairwise distances plus their bumped versions."""
        if self._realized_radii is None:
            d = np.unique(self.dist)
            d = d[d > 0]
            self._realized_radii = np.unique(np.concatenate([d, d * RADIUS_BUMP]))
        return self._realized_radii


def euclidean_grid(d: int, n: int, h: float) -> MetricMeasureSpace:
    """Regular grid of n**d points with spacing h and cell mass h**d."""
    if d not in (1, 2):
        raise ValueError("grid dimension must be 1 or 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not np.isfinite(n * h) or h <= 0:
        raise ValueError("invalid spacing")
    axis = h * np.arange(n, dtype=float)
    if d == 1:
        coords = axis[:, None]
    else:
        ii, jj = np.meshgrid(axis, axis, indexing="ij")
        coords = np.column_stack([ii.ravel(), jj.ravel()])
    mass = np.full(coords.shape[0], float(h) ** d)
    return MetricMeasureSpace(coords=coords, mass=mass, dim_hint=d, grid_meta=(d, n, float(h)))


def _ball_mass_profile(space, x):
    """Sorted distances from x and cumulative masses along that order."""
    order = np.argsort(space.dist[x], kind="stable")
    d = space.dist[x][order]
    cm = np.cumsum(space.mass[order])
    return d, cm


def _ball_mass_at(d_sorted, cm, radii):
    counts = np.searchsorted(d_sorted, radii, side="left")
    out = np.zeros(len(radii))
    pos = counts > 0
    out[pos] = cm[counts[pos] - 1]
    return out


def doubling_constant(space: MetricMeasureSpace, extra_radii=()) -> float:
    """Worst ratio mu(B(x,2r))/mu(B(x,r)) over realized radii.

    The enumeration covers all pairwise distances, their bumped versions,
    and any extra radii supplied (for example the scale set kappa**k).
    """
    radii = np.unique(np.concatenate([space.realized_radii(),
                                      np.asarray(extra_radii, dtype=float)]))
    radii = radii[radii > 0]
    if radii.size == 0:
        return 1.0
    worst = 1.0
    for x in range(space.n):
        d, cm = _ball_mass_profile(space, x)
        m1 = _ball_mass_at(d, cm, radii)
        m2 = _ball_mass_at(d, cm, 2.0 * radii)
        worst = max(worst, float(np.max(m2 / m1)))
    return worst


def aperture_gamma(space: MetricMeasureSpace, beta: float, radii) -> float:
    """Worst ratio mu(B(x,beta*r))/mu(B(x,r)) over the supplied radii."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise ValueError("radii must be nonempty")
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    worst = 1.0
    for x in range(space.n):
        d, cm = _ball_mass_profile(space, x)
        m1 = _ball_mass_at(d, cm, radii)
        m2 = _ball_mass_at(d, cm, beta * radii)
        worst = max(worst, float(np.max(m2 / m1)))
    return worst


def reverse_doubling_epsilon(space: MetricMeasureSpace, C: float, radii) -> float:
    """Largest eps >= 0 with mu(B(x,C r)) >= (1+eps) mu(B(x,r)).

    Pairs whose dilated ball already exhausts the whole space are skipped;
    returns 0 when the property fails or no pair qualifies.
    """
    if C <= 1:
        raise ValueError("C must be > 1")
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise ValueError("radii must be nonempty")
    best = np.inf
    for x in range(space.n):
        d, cm = _ball_mass_profile(space, x)
        counts2 = np.searchsorted(d, C * radii, side="left")
        keep = counts2 < space.n
        if not np.any(keep):
            continue
        m1 = _ball_mass_at(d, cm, radii[keep])
        m2 = cm[counts2[keep] - 1]
        best = min(best, float(np.min(m2 / m1)))
    if not np.isfinite(best):
        return 0.0
    return max(0.0, best - 1.0)


def uncentered_maximal(space: MetricMeasureSpace, v) -> np.ndarray:
    """Uncentered maximal function over all realized balls.

    Mv(x) is the maximum of the ball averages of v over every ball
    B(z, r) containing x, with z any point and r any realized radius.
    Exact enumeration; no approximation.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (space.n,):
        raise ValueError("grid function length mismatch")
    if np.any(v < 0):
        raise ValueError("uncentered_maximal requires a nonnegative function")
    out = np.zeros(space.n)
    vm = v * space.mass
    for z in range(space.n):
        order = np.argsort(space.dist[z], kind="stable")
        d = space.dist[z][order]
        cw = np.cumsum(vm[order])
        cm = np.cumsum(space.mass[order])
        # distance-level blocks: a prefix of the sorted order is a realized
        # ball exactly when it ends where the distance strictly increases
        ends = np.flatnonzero(np.diff(d) > 0)
        ends = np.append(ends, space.n - 1)
        avg = cw[ends] / cm[ends]
        best = np.maximum.accumulate(avg[::-1])[::-1]
        gid = np.searchsorted(ends, np.arange(space.n), side="left")
        cand = best[gid]
        cur = out[order]
        out[order] = np.where(cand > cur, cand, cur)
    return out


def ball_sums(space: MetricMeasureSpace, values, radius: float):
    """Per-center sums of ``values`` and of mass over B(x, radius).

    Returns (sums, masses) arrays indexed by center.  Uses a sliding
    window on sorted coordinates for 1-d spaces, dense masks otherwise.
    """
    values = np.asarray(values, dtype=float)
    if space.coords is not None and space.coords.shape[1] == 1:
        c = space.coords[:, 0]
        order = np.argsort(c, kind="stable")
        cs = c[order]
        pv = np.concatenate([[0.0], np.cumsum(values[order])])
        pm = np.concatenate([[0.0], np.cumsum(space.mass[order])])
        lo = np.searchsorted(cs, c - radius, side="right")
        hi = np.searchsorted(cs, c + radius, side="left")
        return pv[hi] - pv[lo], pm[hi] - pm[lo]
    inside = space.dist < radius
    return inside @ values, inside @ space.mass


# --- JSON interfaces ------------------------------------------------------

def save_space(space: MetricMeasureSpace, path) -> None:
    payload = {
        "coords": space.coords.tolist() if space.coords is not None else None,
        "dist": space.dist.tolist() if space.coords is None else None,
        "mass": space.mass.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_space(path) -> MetricMeasureSpace:
    with open(path) as fh:
        payload = json.load(fh)
    coords = payload.get("coords")
    dist = payload.get("dist")
    if (coords is None) == (dist is None):
        raise ValueError("space file must carry exactly one of coords/dist")
    return MetricMeasureSpace(coords=coords, dist=dist, mass=payload["mass"])


def save_grid_function(values, path) -> None:
    with open(path, "w") as fh:
        json.dump(np.asarray(values, dtype=float).tolist(), fh)


def load_grid_function(path, space: MetricMeasureSpace | None = None) -> np.ndarray:
    with open(path) as fh:
        values = np.asarray(json.load(fh), dtype=float)
    if values.ndim != 1:
        raise ValueError("grid function file must hold a flat array")
    if space is not None and values.shape != (space.n,):
        raise ValueError("grid function length does not match the space")
    return values
