"""Systems of dyadic cubes on finite spaces.

A system is a family of leveled partitions: every point lies in exactly
one cube per level, cubes at different levels are nested or disjoint,
each cube has a unique ancestor per level, and each cube is sandwiched
between an inner and an outer ball around its center.  The first three
axioms hold by construction for both builders here; the fourth is audited
and its constants are *measured*, not guaranteed, because adversarial
finite configurations can make the inner-ball constant tiny.

Cubes are keyed on (level, center): the same point set appearing at two
levels gives two distinct cubes, each remembering its scale.  On finite
spaces every point set is clopen, so the openness the axioms ask of cubes
is vacuous here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .space import MetricMeasureSpace

__all__ = [
    "Cube",
    "DyadicSystem",
    "SparseCollection",
    "AxiomReport",
    "AdjacencyReport",
    "build_system",
    "standard_euclidean_system",
    "audit_axioms",
    "build_adjacent_family",
    "audit_adjacency",
    "carleson_constant",
    "certify_sparse",
    "save_system",
    "load_system",
]


@dataclass
class Cube:
    id: int
    level: int
    center: int
    members: np.ndarray  # sorted point ids
    parent: int | None = None
    children: list = field(default_factory=list)

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=int)
        if self.members.size == 0:
            raise ValueError("cube must have members")


class DyadicSystem:
    """Container of leveled cubes with tree links and containment tables.

    Construction is permissive: audits are explicit operations, so invalid
    hand-built systems can be represented and then rejected by the audit.
    """

    def __init__(self, space: MetricMeasureSpace, kappa: float, cubes: list[Cube],
                 k_min: int, k_max: int):
        self.space = space
        self.kappa = float(kappa)
        self.cubes = cubes
        self.k_min = int(k_min)
        self.k_max = int(k_max)
        self.levels: dict[int, list[int]] = {k: [] for k in range(k_min, k_max + 1)}
        for c in cubes:
            self.levels[c.level].append(c.id)
        self.measured_a0 = None
        self.measured_C1 = None
        self._masks = None
        self._measures = None
        self._point_cube = None
        self._diams = None

    # --- derived tables ---------------------------------------------------

    def measure(self, cube_id: int) -> float:
        if self._measures is None:
            self._measures = np.array(
                [self.space.mass[c.members].sum() for c in self.cubes])
        return float(self._measures[cube_id])

    def mask(self, cube_id: int) -> int:
        """Member set as a python integer bitmask; subset checks are fast."""
        if self._masks is None:
            masks = []
            for c in self.cubes:
                m = 0
                for p in c.members:
                    m |= 1 << int(p)
                masks.append(m)
            self._masks = masks
        return self._masks[cube_id]

    def point_cube(self, level: int) -> np.ndarray:
        """Cube id containing each point at the given level (-1 if none)."""
        if self._point_cube is None:
            tab = np.full((self.k_max - self.k_min + 1, self.space.n), -1, dtype=int)
            for c in self.cubes:
                tab[c.level - self.k_min, c.members] = c.id
            self._point_cube = tab
        return self._point_cube[level - self.k_min]

    def diam(self, cube_id: int) -> float:
        if self._diams is None:
            self._diams = np.full(len(self.cubes), -1.0)
        if self._diams[cube_id] < 0:
            mem = self.cubes[cube_id].members
            self._diams[cube_id] = float(self.space.dist[np.ix_(mem, mem)].max())
        return float(self._diams[cube_id])

    def scale_radii(self) -> np.ndarray:
        return self.kappa ** np.arange(self.k_min, self.k_max + 1, dtype=float)

    def tower(self, x: int) -> list[int]:
        """Cube ids containing x, from k_min up to k_max."""
        return [int(self.point_cube(k)[x]) for k in range(self.k_min, self.k_max + 1)]


@dataclass
class SparseCollection:
    system: DyadicSystem
    ids: list[int]
    eta: float
    certificate: dict[int, np.ndarray] | None  # cube id -> E(Q) point ids


def _greedy_net(space, seed_order, start, radius):
    """Maximal radius-separated subset scanned in seed order from a seed net."""
    net = list(start)
    for p in seed_order:
        p = int(p)
        if p in set(net):
            continue
        if all(space.dist[p, q] >= radius for q in net):
            net.append(p)
    return net


def build_system(space: MetricMeasureSpace, kappa: float, k_min: int, k_max: int,
                 seed_order=None) -> DyadicSystem:
    """Nested greedy nets with nearest-parent assignment.

    The level-k net starts from the level-(k+1) net and adds points in
    seed order at mutual distance >= kappa**k, so nets are nested and
    every point is within kappa**k of its level-k net.  Each net point is
    assigned to the nearest coarser net point (ties to the smaller point
    index), and cubes are the assignment-descendant sets.  The outer
    containment constant is then below kappa/(kappa-1).
    """
    if kappa <= 1:
        raise ValueError("kappa must be > 1")
    if k_min > k_max:
        raise ValueError("empty level range")
    if kappa ** k_max <= space.diameter:
        raise ValueError("kappa**k_max must exceed the diameter so one cube covers the space")
    if seed_order is None:
        seed_order = np.arange(space.n)
    seed_order = np.asarray(seed_order, dtype=int)
    if sorted(seed_order.tolist()) != list(range(space.n)):
        raise ValueError("seed_order must be a permutation of the points")

    nets: dict[int, list[int]] = {}
    upper = []
    for k in range(k_max, k_min - 1, -1):
        nets[k] = _greedy_net(space, seed_order, upper, kappa ** k)
        upper = nets[k]

    def nearest(p, candidates):
        cand = np.asarray(candidates, dtype=int)
        d = space.dist[p, cand]
        best = d.min()
        return int(cand[np.flatnonzero(d == best).min()])

    # leaf membership: every point attaches to the nearest finest net point
    groups = {c: [] for c in nets[k_min]}
    for p in range(space.n):
        groups[nearest(p, nets[k_min])].append(p)

    cubes: list[Cube] = []
    prev: dict[int, Cube] = {}
    for c in nets[k_min]:
        cube = Cube(id=len(cubes), level=k_min, center=c, members=sorted(groups[c]))
        cubes.append(cube)
        prev[c] = cube
    for k in range(k_min + 1, k_max + 1):
        assign = {c: nearest(c, nets[k]) for c in nets[k - 1]}
        nxt: dict[int, Cube] = {}
        for c in nets[k]:
            child_cubes = [prev[cc] for cc in nets[k - 1] if assign[cc] == c]
            members = np.sort(np.concatenate([cc.members for cc in child_cubes]))
            cube = Cube(id=len(cubes), level=k, center=c, members=members)
            cubes.append(cube)
            for cc in child_cubes:
                cc.parent = cube.id
                cube.children.append(cc.id)
            nxt[c] = cube
        prev = nxt

    system = DyadicSystem(space, kappa, cubes, k_min, k_max)
    report = audit_axioms(system)
    system.measured_a0 = report.measured_a0
    system.measured_C1 = report.measured_C1
    return system


def standard_euclidean_system(space: MetricMeasureSpace, k_min: int, k_max: int
                              ) -> DyadicSystem:
    """Half-open dyadic boxes [m 2^k, (m+1) 2^k)^d intersected with a grid.

    Requires a space built by ``euclidean_grid``; serves as the exact
    cross-check for the net construction.  kappa = 2 and the outer
    containment constant is at most sqrt(d).
    """
    if space.grid_meta is None:
        raise ValueError("standard system requires a euclidean_grid space")
    if k_min > k_max:
        raise ValueError("empty level range")
    d = space.coords.shape[1]
    cubes: list[Cube] = []
    prev_box_of_point = None
    prev_cubes: dict[tuple, Cube] = {}
    for k in range(k_min, k_max + 1):
        side = 2.0 ** k
        box = np.floor(space.coords / side).astype(int)
        table: dict[tuple, list[int]] = {}
        for p in range(space.n):
            table.setdefault(tuple(box[p]), []).append(p)
        cur: dict[tuple, Cube] = {}
        for key, members in sorted(table.items()):
            members = np.asarray(members, dtype=int)
            box_center = (np.asarray(key, dtype=float) + 0.5) * side
            offset = np.linalg.norm(space.coords[members] - box_center, axis=1)
            center = int(members[np.flatnonzero(offset == offset.min()).min()])
            cube = Cube(id=len(cubes), level=k, center=center, members=members)
            cubes.append(cube)
            cur[key] = cube
        if prev_box_of_point is not None:
            for key, child in prev_cubes.items():
                parent = cur[tuple(box[child.members[0]])]
                child.parent = parent.id
                parent.children.append(child.id)
        prev_box_of_point = box
        prev_cubes = cur
    system = DyadicSystem(space, 2.0, cubes, k_min, k_max)
    report = audit_axioms(system)
    system.measured_a0 = report.measured_a0
    system.measured_C1 = report.measured_C1
    return system


@dataclass
class AxiomReport:
    cover_ok: bool
    nesting_ok: bool
    ancestor_ok: bool
    measured_a0: float
    measured_C1: float
    violations: list

    @property
    def ok(self) -> bool:
        return self.cover_ok and self.nesting_ok and self.ancestor_ok


def audit_axioms(system: DyadicSystem) -> AxiomReport:
    """Recheck the partition, nesting and ancestor axioms from the raw
    member sets, and measure the inner/outer ball constants."""
    space = system.space
    violations = []
    nlev = system.k_max - system.k_min + 1
    containing = np.full((nlev, space.n), -1, dtype=int)
    cover_ok = True
    for k in range(system.k_min, system.k_max + 1):
        row = containing[k - system.k_min]
        for cid in system.levels[k]:
            for p in system.cubes[cid].members:
                if row[p] != -1:
                    cover_ok = False
                    violations.append(("cover", k, int(p), "point in two cubes"))
                row[p] = cid
        missing = np.flatnonzero(row == -1)
        if missing.size:
            cover_ok = False
            violations.append(("cover", k, int(missing[0]), "point uncovered"))

    nesting_ok = ancestor_ok = True
    for k in range(system.k_min, system.k_max + 1):
        for cid in system.levels[k]:
            mem = system.cubes[cid].members
            for l in range(k + 1, system.k_max + 1):
                owners = np.unique(containing[l - system.k_min][mem])
                owners = owners[owners >= 0]
                if owners.size > 1:
                    nesting_ok = False
                    ancestor_ok = False
                    violations.append(("nesting", cid, l, [int(o) for o in owners]))
                elif owners.size == 0:
                    ancestor_ok = False
                    violations.append(("ancestor", cid, l, "no ancestor"))

    measured_C1 = 0.0
    measured_a0 = np.inf
    for c in system.cubes:
        scale = system.kappa ** c.level
        reach = float(space.dist[c.center, c.members].max())
        measured_C1 = max(measured_C1, reach / scale)
        outside = np.setdiff1d(np.arange(space.n), c.members, assume_unique=True)
        if outside.size:
            inner = float(space.dist[c.center, outside].min())
            measured_a0 = min(measured_a0, inner / scale)
        if c.center not in c.members:
            violations.append(("center", c.id, c.center, "center not a member"))
    return AxiomReport(cover_ok=cover_ok, nesting_ok=nesting_ok,
                       ancestor_ok=ancestor_ok,
                       measured_a0=float(measured_a0), measured_C1=measured_C1,
                       violations=violations)


def build_adjacent_family(space: MetricMeasureSpace, k_min: int, k_max: int
                          ) -> list[DyadicSystem]:
    """3^d shifted copies of the standard grid (the one-third trick).

    Level-k boxes of copy t are [2^k (m + (-1)^k t), 2^k (m + 1 + (-1)^k t));
    the alternating sign keeps every copy nested because 3t is an integer.
    """
    if space.grid_meta is None:
        raise ValueError("adjacent family requires a euclidean_grid space")
    d = space.coords.shape[1]
    shifts_1d = (0.0, 1.0 / 3.0, 2.0 / 3.0)
    if d == 1:
        shift_vectors = [(s,) for s in shifts_1d]
    else:
        shift_vectors = [(a, b) for a in shifts_1d for b in shifts_1d]
    family = []
    for t in shift_vectors:
        t = np.asarray(t)
        cubes: list[Cube] = []
        prev_cubes: dict[tuple, Cube] = {}
        boxes_prev = None
        for k in range(k_min, k_max + 1):
            side = 2.0 ** k
            offset = ((-1) ** k) * t * side
            box = np.floor((space.coords - offset) / side).astype(int)
            table: dict[tuple, list[int]] = {}
            for p in range(space.n):
                table.setdefault(tuple(box[p]), []).append(p)
            cur: dict[tuple, Cube] = {}
            for key, members in sorted(table.items()):
                members = np.asarray(members, dtype=int)
                box_center = (np.asarray(key, dtype=float) + 0.5) * side + offset
                off = np.linalg.norm(space.coords[members] - box_center, axis=1)
                center = int(members[np.flatnonzero(off == off.min()).min()])
                cube = Cube(id=len(cubes), level=k, center=center, members=members)
                cubes.append(cube)
                cur[key] = cube
            if boxes_prev is not None:
                for key, child in prev_cubes.items():
                    parent = cur[tuple(box[child.members[0]])]
                    child.parent = parent.id
                    parent.children.append(child.id)
            boxes_prev = box
            prev_cubes = cur
        family.append(DyadicSystem(space, 2.0, cubes, k_min, k_max))
    return family


@dataclass
class AdjacencyReport:
    ok: bool
    smallest_C: float
    worst_ball: tuple | None


def audit_adjacency(family: list[DyadicSystem], C: float | None = None
                    ) -> AdjacencyReport:
    """For every realized ball find a cube squeezed between the ball and a
    dilate; report the smallest dilation constant that works everywhere."""
    space = family[0].space
    worst = 0.0
    worst_ball = None
    for x in range(space.n):
        row = space.dist[x]
        for r in space.realized_radii():
            members = np.flatnonzero(row < r)
            target = frozenset(members.tolist())
            best = np.inf
            for system in family:
                for cid in system.tower(x):
                    cube = system.cubes[cid]
                    if target <= frozenset(cube.members.tolist()):
                        need = float(row[cube.members].max()) / r
                        best = min(best, need)
                        break  # higher cubes only get larger
            if best > worst:
                worst = best
                worst_ball = (int(x), float(r))
    # tiny headroom so strict-inequality membership of the dilate holds
    smallest = worst * (1 + 1e-9)
    return AdjacencyReport(ok=(C is None or smallest <= C),
                           smallest_C=smallest, worst_ball=worst_ball)


def carleson_constant(system: DyadicSystem, S) -> float:
    """max over cubes Q of sum of mu(Q') over Q' in S with Q' inside Q."""
    S = list(S)
    if not S:
        return 0.0
    smasks = [(system.mask(q), system.measure(q)) for q in S]
    worst = 0.0
    for c in system.cubes:
        qmask = system.mask(c.id)
        total = 0.0
        for m, mu in smasks:
            if m & ~qmask == 0:
                total += mu
        worst = max(worst, total / system.measure(c.id))
    return worst


def certify_sparse(system: DyadicSystem, S, eta: float):
    """Greedy disjoint-major-subset certificate.

    E(Q) removes from Q every strictly smaller member of S (and earlier
    duplicates of the same point set, so the E(Q) stay disjoint).  Returns
    a certified SparseCollection, or the (cube id, achieved fraction)
    witness of the first failure.
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    S = list(S)
    order = sorted(S, key=lambda q: (system.measure(q), system.cubes[q].level, q))
    certificate = {}
    for pos, q in enumerate(order):
        qmask = system.mask(q)
        removed = 0
        for other in order[:pos]:
            om = system.mask(other)
            if om & ~qmask == 0:
                removed |= om
        emask = qmask & ~removed
        members = np.array([p for p in system.cubes[q].members
                            if emask >> int(p) & 1], dtype=int)
        emass = float(system.space.mass[members].sum()) if members.size else 0.0
        if emass < eta * system.measure(q) - 1e-12:
            return None, (q, emass / system.measure(q))
        certificate[q] = members
    return SparseCollection(system=system, ids=S, eta=eta,
                            certificate=certificate), None


# --- JSON interface --------------------------------------------------------

def save_system(system: DyadicSystem, path) -> None:
    payload = {
        "kappa": system.kappa,
        "k_min": system.k_min,
        "k_max": system.k_max,
        "levels": {
            str(k): [
                {
                    "id": system.cubes[cid].id,
                    "level": k,
                    "center": int(system.cubes[cid].center),
                    "members": system.cubes[cid].members.tolist(),
                    "parent": system.cubes[cid].parent,
                }
                for cid in system.levels[k]
            ]
            for k in range(system.k_min, system.k_max + 1)
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_system(path, space: MetricMeasureSpace) -> DyadicSystem:
    with open(path) as fh:
        payload = json.load(fh)
    records = [rec for k in payload["levels"] for rec in payload["levels"][k]]
    records.sort(key=lambda r: r["id"])
    cubes = [Cube(id=r["id"], level=r["level"], center=r["center"],
                  members=np.asarray(r["members"], dtype=int), parent=r["parent"])
             for r in records]
    for c in cubes:
        if c.parent is not None:
            cubes[c.parent].children.append(c.id)
    return DyadicSystem(space, payload["kappa"], cubes,
                        payload["k_min"], payload["k_max"])
