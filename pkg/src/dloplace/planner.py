"""Three-stage placement planner.

Stage I searches a lattice over the free-space configuration
(x(0), y(0), phi(0), k, s0, Ltilde) until the rod tip touches the surface at
an inflection. Stage II rolls the tip down to the surface tangent; stage III
lays the rod down by growing the contact segment. Stages II and III pick
(k, Ltilde) among the 3x3 grid neighbours of the previous node.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .elastica import (
    DEFAULT_SAMPLES,
    DEGENERATE_K,
    DLOShape,
    ElasticaParams,
    Pose,
    StiffnessSpec,
    bending_energy,
    eval_shape,
    wrap_angle,
)
from .placement import (
    RollDirection,
    StageIConfig,
    StageIIConfig,
    StageIIIConfig,
    SurfaceSpec,
    friction_check,
    grasp_pose,
    penetration_check,
    self_intersection_check,
    stage2_shape,
    stage3_shape,
)

K_MAX = 0.95
LTILDE_MAX_FACTOR = 8.0
MAX_EXPANSIONS = 1_000_000
_EPS = 1e-9


class Stage(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"


class PlanningError(RuntimeError):
    """Planning failure; names the stage, the node index and the binding constraint."""

    def __init__(self, stage, node, constraint, message, diagnostics=None):
        self.stage = Stage(stage)
        self.node = node
        self.constraint = constraint
        self.diagnostics = diagnostics or {}
        super().__init__(f"stage {self.stage.value} failed at node {node} ({constraint}): {message}")


@dataclass(frozen=True)
class GridSpec:
    """Planner resolutions (absolute units). ``dphase`` is the s0 step as a fraction of Ltilde."""

    dx: float
    dy: float
    dz: float
    dphi: float
    dtheta: float
    dLtilde: float
    dk: float
    dl: float
    dphase: float = 0.005
    max_expansions: int = MAX_EXPANSIONS

    def __post_init__(self):
        for name in ("dx", "dy", "dz", "dphi", "dtheta", "dLtilde", "dk", "dl", "dphase"):
            v = getattr(self, name)
            if not (float(v) > 0.0 and math.isfinite(v)):
                raise ValueError(f"grid resolution {name} must be positive, got {v!r}")
            object.__setattr__(self, name, float(v))
        if int(self.max_expansions) <= 0:
            raise ValueError("max_expansions must be positive")

    @classmethod
    def default(cls, L: float, **overrides) -> "GridSpec":
        d = dict(
            dx=0.01 * L,
            dy=0.01 * L,
            dz=0.01 * L,
            dphi=math.radians(2.0),
            dtheta=math.radians(2.0),
            dLtilde=0.02 * L,
            dk=0.005,
            dl=0.05 * L,
        )
        d.update(overrides)
        return cls(**d)

    def to_dict(self):
        return {
            "dx": self.dx, "dy": self.dy, "dz": self.dz, "dphi": self.dphi,
            "dtheta": self.dtheta, "dLtilde": self.dLtilde, "dk": self.dk,
            "dl": self.dl, "dphase": self.dphase, "max_expansions": int(self.max_expansions),
        }

    def step_bounds(self, L: float, kmax: float | None = None) -> tuple[float, float]:
        """(position, angle) bounds on grasp motion between consecutive nodes.

        Steps that grow the contact segment by dl also carry the grasp along
        the surface and rotate the free portion by up to dl times its peak
        curvature ``kmax``; pass ``kmax`` for those steps.
        """
        pos, ang = math.hypot(self.dx, self.dy) + L * self.dphi, self.dphi + self.dtheta
        if kmax is not None:
            pos += self.dl * (1.0 + L * kmax)
            ang += self.dl * kmax
        return pos, ang


@dataclass(frozen=True)
class PlanNode:
    """One configuration of the plan.

    ``base`` is the rod tip pose for stages I and II and the contact anchor
    for stage III.
    """

    stage: Stage
    grasp: Pose
    params: ElasticaParams
    base: Pose
    l: float = 0.0
    direction: RollDirection | None = None
    friction_margin: float | None = None
    penetration_margin: float = 0.0

    @property
    def margins(self):
        return {"friction": self.friction_margin, "penetration": self.penetration_margin}

    def shape(self, stiffness: StiffnessSpec, n: int = DEFAULT_SAMPLES) -> DLOShape:
        if self.stage is Stage.I:
            shape = eval_shape(self.base, self.params, stiffness, n)
            shape.meta.update(stage="I")
            return shape
        if self.stage is Stage.II:
            cfg = StageIIConfig(self.base.phi0_base, self.params.k, self.params.Ltilde)
            return stage2_shape(cfg, self.base, self.direction, stiffness, n)
        cfg = StageIIIConfig(self.l, self.params.k, self.params.Ltilde)
        return stage3_shape(cfg, self.base, self.direction, stiffness, n)

    def to_dict(self):
        return {
            "stage": self.stage.value,
            "grasp": self.grasp.to_dict(),
            "base": self.base.to_dict(),
            "k": self.params.k,
            "s0": self.params.s0,
            "Ltilde": self.params.Ltilde,
            "l": self.l,
            "direction": None if self.direction is None else self.direction.value,
            "margins": self.margins,
        }

    @classmethod
    def from_dict(cls, d):
        m = d.get("margins", {})
        return cls(
            stage=Stage(d["stage"]),
            grasp=Pose.from_dict(d["grasp"]),
            params=ElasticaParams(d["k"], d["s0"], d["Ltilde"]),
            base=Pose.from_dict(d["base"]),
            l=float(d.get("l", 0.0)),
            direction=None if d.get("direction") is None else RollDirection(d["direction"]),
            friction_margin=m.get("friction"),
            penetration_margin=float(m.get("penetration", 0.0)),
        )


@dataclass
class PlanPath:
    nodes: list
    stiffness: StiffnessSpec
    surface: SurfaceSpec
    grid: GridSpec
    direction: RollDirection
    n_samples: int = DEFAULT_SAMPLES

    def __len__(self):
        return len(self.nodes)

    @property
    def stage_counts(self) -> dict:
        counts = {s.value: 0 for s in Stage}
        for node in self.nodes:
            counts[node.stage.value] += 1
        return counts

    @property
    def boundaries(self) -> dict:
        """Stage -> (first, last + 1) node index ranges."""
        out = {}
        for i, node in enumerate(self.nodes):
            a, _ = out.get(node.stage.value, (i, i))
            out[node.stage.value] = (a, i + 1)
        return out

    def shapes(self, n: int | None = None):
        return [nd.shape(self.stiffness, n or self.n_samples) for nd in self.nodes]

    def to_dict(self):
        return {
            "header": {
                "grid": self.grid.to_dict(),
                "surface": self.surface.to_dict(),
                "stiffness": {"EI": self.stiffness.EI, "L": self.stiffness.L},
                "direction": self.direction.value,
                "n_samples": self.n_samples,
                "stage_counts": self.stage_counts,
            },
            "nodes": [nd.to_dict() for nd in self.nodes],
        }

    @classmethod
    def from_dict(cls, d):
        h = d["header"]
        return cls(
            nodes=[PlanNode.from_dict(nd) for nd in d["nodes"]],
            stiffness=StiffnessSpec(**h["stiffness"]),
            surface=SurfaceSpec(**h["surface"]),
            grid=GridSpec(**h["grid"]),
            direction=RollDirection(h["direction"]),
            n_samples=int(h.get("n_samples", DEFAULT_SAMPLES)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps() + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ----------------------------------------------------------------------------
# shared checks


def _shape_checks(shape: DLOShape, surface: SurfaceSpec):
    """(ok, penetration margin, failing constraint or None)."""
    pen = penetration_check(shape, surface)
    if not pen.feasible:
        return False, pen.margin, "penetration"
    if not self_intersection_check(shape).feasible:
        return False, pen.margin, "self_intersection"
    return True, pen.margin, None


def friction_ok(k, phi_contact, direction: RollDirection, surface: SurfaceSpec):
    """Vectorised friction_check verdict over an array of moduli."""
    k = np.asarray(k, dtype=float)
    axis = phi_contact + direction.branch * np.arccos(np.clip(1.0 - 2.0 * k * k, -1.0, 1.0))
    dev = np.abs(wrap_angle(axis - surface.alpha))
    return (dev < math.atan(surface.mu)) & (k >= DEGENERATE_K)


def _interval(mask, offset):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    return int(idx[0]) + offset, int(idx[-1]) + offset


def _meet(a, b):
    if a is None or b is None:
        return None
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi) if lo <= hi else None


def _dilate(a):
    return None if a is None else (a[0] - 1, a[1] + 1)


class _KLattice:
    """Moduli k = k_ref + i dk restricted to [0, K_MAX]."""

    def __init__(self, k_ref, dk):
        self.k_ref, self.dk = float(k_ref), float(dk)
        self.lo = -int(math.floor(self.k_ref / dk + _EPS))
        self.hi = int(math.floor((K_MAX - self.k_ref) / dk + _EPS))
        self.values = self.k_ref + dk * np.arange(self.lo, self.hi + 1)
        self.values[self.values < 0.0] = 0.0

    def k(self, i):
        return max(0.0, self.k_ref + i * self.dk)

    def valid(self, i):
        return self.lo <= i <= self.hi

    def friction_interval(self, phi_contact, direction, surface):
        return _interval(friction_ok(self.values, phi_contact, direction, surface), self.lo)


def rolling_layers(r0: float, dphi: float) -> list:
    """Remaining rolling angles of the stage II nodes after an entry at r0 (> 0)."""
    m = max(1, math.ceil(r0 / dphi - _EPS))
    return [max(0.0, r0 - j * dphi) if j < m else 0.0 for j in range(1, m + 1)]


def stage2_entry_window(r0, klat: _KLattice, direction, surface, dphi):
    """Interval of k indices from which stage II (and stage III entry) is friction-completable."""
    if r0 < -_EPS or r0 >= math.pi:
        return None
    f0 = klat.friction_interval(direction.contact_angle, direction, surface)
    if r0 <= _EPS:
        return f0
    layers = rolling_layers(r0, dphi)
    b = f0
    for r in reversed(layers[:-1]):
        b = _meet(klat.friction_interval(direction.tip_angle(r), direction, surface), _dilate(b))
    return _dilate(b)


# ----------------------------------------------------------------------------
# stage I


@dataclass
class _Stage1Lattice:
    start: StageIConfig
    surface: SurfaceSpec
    grid: GridSpec
    stiffness: StiffnessSpec
    targets: tuple
    n: int
    cache: dict = field(default_factory=dict)

    def __post_init__(self):
        b, p = self.start.base, self.start.params
        g = self.grid
        L = self.stiffness.L
        gap = b.y0 - self.surface.y0
        self.iy_min = -math.ceil(gap / g.dy - _EPS) if gap > 0 else 0
        self.iy_max = math.ceil(L / g.dy)
        self.ix_max = math.ceil(2.0 * L / g.dx)
        self.ip_max = math.ceil(math.pi / g.dphi)
        self.klat = _KLattice(p.k, g.dk)
        self.lt_lo = L * (1.0 - 1e-12)
        self.lt_hi = LTILDE_MAX_FACTOR * L * (1.0 + 1e-12)
        self.nq = max(1, round(1.0 / g.dphase))
        self.q0 = p.phase

    def pose(self, ix, iy, ip):
        b, g = self.start.base, self.grid
        y = self.surface.y0 if iy == self.iy_min else b.y0 + iy * g.dy
        return Pose(b.x0 + ix * g.dx, y, b.phi0_base + ip * g.dphi, b.z0, b.theta0)

    def ltilde(self, il):
        return self.start.params.Ltilde + il * self.grid.dLtilde

    def phase(self, iq):
        return (self.q0 + iq / self.nq) % 1.0

    def params(self, ik, il, iq, phase=None):
        lt = self.ltilde(il)
        return ElasticaParams(self.klat.k(ik), (self.phase(iq) if phase is None else phase) * lt, lt)

    def in_bounds(self, key):
        ix, iy, ip, ik, il, _ = key
        if abs(ix) > self.ix_max or iy < self.iy_min or iy > self.iy_max or abs(ip) > self.ip_max:
            return False
        if not self.klat.valid(ik):
            return False
        lt = self.ltilde(il)
        return self.lt_lo <= lt <= self.lt_hi

    def phase_steps(self, iq):
        q = self.phase(iq)
        best = math.inf
        for t in self.targets:
            d = abs(q - t) % 1.0
            d = min(d, 1.0 - d) * self.nq
            best = min(best, max(0, math.ceil(d - 0.5 - 1e-6)))
        return best

    def snapped_phase(self, iq):
        q = self.phase(iq)
        for t in self.targets:
            d = abs(q - t) % 1.0
            if min(d, 1.0 - d) * self.nq <= 0.5 + 1e-6:
                return t
        return None

    def check(self, key, phase=None):
        ck = key if phase is None else key + (phase,)
        hit = self.cache.get(ck)
        if hit is None:
            ix, iy, ip, ik, il, iq = key
            shape = eval_shape(self.pose(ix, iy, ip), self.params(ik, il, iq, phase), self.stiffness, self.n)
            hit = _shape_checks(shape, self.surface)
            self.cache[ck] = hit
        return hit

    def node(self, key, phase=None):
        ix, iy, ip, ik, il, iq = key
        base = self.pose(ix, iy, ip)
        params = self.params(ik, il, iq, phase)
        shape = eval_shape(base, params, self.stiffness, self.n)
        return PlanNode(
            Stage.I, grasp_pose(shape), params, base,
            penetration_margin=penetration_check(shape, self.surface).margin,
        )


_MOVES = tuple(
    tuple(d if j == i else 0 for j in range(6)) for i in range(6) for d in (-1, 1)
)


def plan_stage1(
    start: StageIConfig,
    surface: SurfaceSpec,
    grid: GridSpec,
    stiffness: StiffnessSpec,
    direction: RollDirection | None = None,
    n: int = DEFAULT_SAMPLES,
) -> list:
    """Unit-cost shortest path over the stage I lattice (A* with a consistent heuristic).

    Downward y steps that would cross the surface land exactly on it. The goal
    is a tip on the surface with s0 at an inflection phase (the one fixed by
    ``direction`` if given). With a direction, goal configurations must also
    admit a friction-feasible stage II roll-down, unless no modulus satisfies
    friction at the final contact angle, in which case stage II reports it.
    Returns the node list including the start.
    """
    targets = (direction.phase,) if direction is not None else (0.25, 0.75)
    lat = _Stage1Lattice(start, surface, grid, stiffness, targets, n)
    start_key = (0, 0, 0, 0, 0, 0)
    ok, _, why = lat.check(start_key)
    if not ok:
        raise PlanningError(Stage.I, 0, why, "start configuration infeasible")

    window = None
    if direction is not None and lat.klat.friction_interval(direction.contact_angle, direction, surface):
        window = {}
        for ip in range(-lat.ip_max, lat.ip_max + 1):
            r0 = direction.rolling_angle(start.base.phi0_base + ip * grid.dphi)
            window[ip] = stage2_entry_window(r0, lat.klat, direction, surface, grid.dphi)
        ips = np.array(sorted(window))
        los = np.array([window[i][0] if window[i] else 0 for i in ips])
        his = np.array([window[i][1] if window[i] else -1 for i in ips])
        has = his >= los
        if not has.any():
            raise PlanningError(Stage.I, 0, "friction", "no tip angle admits a friction-feasible roll-down")
        fk_cache = {}

        def h_fk(ip, ik):
            v = fk_cache.get((ip, ik))
            if v is None:
                dk_ = np.maximum(0, np.maximum(los - ik, ik - his))
                v = int(np.min(np.where(has, np.abs(ips - ip) + dk_, np.iinfo(np.int64).max)))
                fk_cache[(ip, ik)] = v
            return v
    else:
        def h_fk(ip, ik):
            return 0

    def h(key):
        return (key[1] - lat.iy_min) + lat.phase_steps(key[5]) + h_fk(key[2], key[3])

    def is_goal(key):
        if key[1] != lat.iy_min or lat.phase_steps(key[5]) != 0:
            return False
        if window is not None:
            w = window[key[2]]
            if w is None or not (w[0] <= key[3] <= w[1]):
                return False
        return True

    g = {start_key: 0}
    parent = {start_key: None}
    heap = [(h(start_key), 0, start_key)]
    expansions = 0
    while heap:
        f, neg_g, key = heapq.heappop(heap)
        cost = -neg_g
        if cost > g[key]:
            continue
        if is_goal(key):
            phase = lat.snapped_phase(key[5])
            ok, _, _ = lat.check(key, phase)
            if ok:
                keys = []
                while key is not None:
                    keys.append(key)
                    key = parent[key]
                keys.reverse()
                nodes = [lat.node(k) for k in keys[:-1]] + [lat.node(keys[-1], phase)]
                return nodes
        expansions += 1
        if expansions > grid.max_expansions:
            raise PlanningError(
                Stage.I, expansions, "budget",
                f"node budget of {grid.max_expansions} expansions exhausted",
                {"expansions": expansions},
            )
        for mv in _MOVES:
            nk = tuple(a + b for a, b in zip(key, mv))
            if not lat.in_bounds(nk):
                continue
            nk = nk[:5] + (nk[5] % lat.nq,)
            ng = cost + 1
            if ng >= g.get(nk, math.inf):
                continue
            if not lat.check(nk)[0]:
                continue
            g[nk] = ng
            parent[nk] = key
            heapq.heappush(heap, (ng + h(nk), -ng, nk))
    raise PlanningError(Stage.I, expansions, "unreachable", "search space exhausted without reaching the surface")


# ----------------------------------------------------------------------------
# stages II and III


def _ltilde_ok(lt, L):
    return L * (1.0 - 1e-12) <= lt <= LTILDE_MAX_FACTOR * L * (1.0 + 1e-12)


def plan_stage2(
    touch: Pose,
    entry: StageIIConfig,
    direction: RollDirection,
    surface: SurfaceSpec,
    grid: GridSpec,
    stiffness: StiffnessSpec,
    n: int = DEFAULT_SAMPLES,
) -> list:
    """Roll the tip tangent down to the surface in steps of dphi.

    Each node takes the 3x3 (k, Ltilde) neighbour of its predecessor with the
    smallest elastic-energy change among those that keep a friction-feasible
    continuation. Returns the nodes after the entry (empty when the tip
    tangent already lies on the surface).
    """
    L = stiffness.L
    r0 = direction.rolling_angle(entry.phi_tip)
    if r0 < -_EPS or r0 >= math.pi:
        raise PlanningError(Stage.II, 0, "geometry", f"tip angle {entry.phi_tip:.6g} cannot roll {direction.value}")
    if r0 <= _EPS:
        return []
    layers = rolling_layers(r0, grid.dphi)
    klat = _KLattice(entry.k, grid.dk)
    fric = [klat.friction_interval(direction.tip_angle(r), direction, surface) for r in layers]

    reach = [(0, 0)]
    for j, fj in enumerate(fric):
        rj = _meet(_dilate(reach[-1]), fj)
        if rj is None:
            phi_tip = direction.tip_angle(layers[j])
            klo, khi = klat.k(reach[-1][0] - 1), klat.k(reach[-1][1] + 1)
            raise PlanningError(
                Stage.II, j + 1, "friction",
                f"no reachable modulus in [{klo:.4g}, {khi:.4g}] is friction-feasible at phi_tip={phi_tip:.6g} rad",
                {"phi_tip": phi_tip, "k_range": [klo, khi], "mu": surface.mu},
            )
        reach.append(rj)
    back = [None] * len(layers)
    back[-1] = fric[-1]
    for j in range(len(layers) - 2, -1, -1):
        back[j] = _meet(fric[j], _dilate(back[j + 1]))
    allowed = [_meet(reach[j + 1], back[j]) for j in range(len(layers))]

    ik, lt = 0, entry.Ltilde
    e_prev = bending_energy(direction.params(max(entry.k, 0.0), entry.Ltilde), stiffness.EI, L)
    nodes = []
    for j, r in enumerate(layers):
        phi_tip = direction.tip_angle(r)
        pose = Pose(touch.x0, touch.y0, phi_tip)
        cands = []
        for dik in (-1, 0, 1):
            nik = ik + dik
            a = allowed[j]
            if a is None or not (a[0] <= nik <= a[1]):
                continue
            for dl in (-1, 0, 1):
                nlt = lt + dl * grid.dLtilde
                if not _ltilde_ok(nlt, L):
                    continue
                p = direction.params(klat.k(nik), nlt)
                de = abs(bending_energy(p, stiffness.EI, L) - e_prev)
                cands.append((de, p.k, nlt, nik, p))
        cands.sort(key=lambda c: c[:3])
        chosen, why = None, "friction"
        for de, _, nlt, nik, p in cands:
            shape = stage2_shape(StageIIConfig(phi_tip, p.k, nlt), pose, direction, stiffness, n)
            ok, pen, fail = _shape_checks(shape, surface)
            if ok:
                chosen = (nik, nlt, p, shape, pen)
                break
            why = fail if why == "friction" else why
        if chosen is None:
            raise PlanningError(
                Stage.II, j + 1, why,
                f"no grid neighbour of (k={klat.k(ik):.4g}, Ltilde={lt:.4g}) is feasible at phi_tip={phi_tip:.6g} rad",
                {"phi_tip": phi_tip, "candidates": len(cands)},
            )
        ik, lt, p, shape, pen = chosen
        fv = friction_check(p, phi_tip, direction, surface)
        e_prev = bending_energy(p, stiffness.EI, L)
        nodes.append(PlanNode(Stage.II, grasp_pose(shape), p, pose, 0.0, direction, fv.margin, pen))
    return nodes


def _stage3_node(l, p, anchor, direction, surface, stiffness, n):
    shape = stage3_shape(StageIIIConfig(l, p.k, p.Ltilde), anchor, direction, stiffness, n)
    fv = friction_check(p, direction.contact_angle, direction, surface)
    if not fv.feasible:
        return None, "friction"
    ok, pen, fail = _shape_checks(shape, surface)
    if not ok:
        return None, fail
    return PlanNode(Stage.III, grasp_pose(shape), p, anchor, l, direction, fv.margin, pen), None


def plan_stage3(
    anchor: Pose,
    entry: StageIIIConfig,
    direction: RollDirection,
    surface: SurfaceSpec,
    grid: GridSpec,
    stiffness: StiffnessSpec,
    n: int = DEFAULT_SAMPLES,
) -> list:
    """Grow the contact segment by dl per node up to l = L.

    At each l the free portion takes the minimum-energy feasible 3x3
    (k, Ltilde) neighbour of the previous node (ties: smaller k, then smaller
    Ltilde). Returns all nodes including the entry.
    """
    L = stiffness.L
    anchor = Pose(anchor.x0, anchor.y0, direction.contact_angle, anchor.z0, anchor.theta0)
    klat = _KLattice(entry.k, grid.dk)
    steps = max(1, math.ceil((L - entry.l) / grid.dl - _EPS))
    ls = [min(L, entry.l + i * grid.dl) for i in range(steps + 1)]
    ls[-1] = L
    p0 = direction.params(entry.k, entry.Ltilde)
    if p0.degenerate:
        raise PlanningError(Stage.III, 0, "friction", "contact force undefined for a straight free portion")
    node, why = _stage3_node(ls[0], p0, anchor, direction, surface, stiffness, n)
    if node is None:
        raise PlanningError(Stage.III, 0, why, "entry configuration infeasible")
    nodes = [node]
    ik, lt = 0, entry.Ltilde
    for i, l in enumerate(ls[1:], start=1):
        cands = []
        for dik in (-1, 0, 1):
            nik = ik + dik
            if not klat.valid(nik) or klat.k(nik) < DEGENERATE_K:
                continue
            for dl in (-1, 0, 1):
                nlt = lt + dl * grid.dLtilde
                if not _ltilde_ok(nlt, L):
                    continue
                p = direction.params(klat.k(nik), nlt)
                cands.append((bending_energy(p, stiffness.EI, L - l), p.k, nlt, nik, p))
        cands.sort(key=lambda c: c[:3])
        chosen, reasons = None, []
        for _, _, nlt, nik, p in cands:
            node, why = _stage3_node(l, p, anchor, direction, surface, stiffness, n)
            if node is not None:
                chosen = (nik, nlt, node)
                break
            reasons.append(why)
        if chosen is None:
            why = max(set(reasons), key=reasons.count) if reasons else "bounds"
            raise PlanningError(
                Stage.III, i, why,
                f"no grid neighbour of (k={klat.k(ik):.4g}, Ltilde={lt:.4g}) is feasible at l={l:.6g} m",
                {"l": l},
            )
        ik, lt, node = chosen
        nodes.append(node)
    return nodes


# ----------------------------------------------------------------------------
# full plans


def is_fully_placed(start: StageIConfig, surface: SurfaceSpec, direction: RollDirection, L: float) -> bool:
    b = start.base
    return (
        abs(b.y0 - surface.y0) <= 1e-12 * max(L, 1.0)
        and start.params.degenerate
        and abs(wrap_angle(b.phi0_base - direction.contact_angle)) <= 1e-12
    )


def _finish(touch_node: PlanNode, surface, direction, grid, stiffness, n):
    """Stages II and III from a tip-on-surface node; returns (stage II, stage III) lists."""
    tip = touch_node.base
    p = touch_node.params
    entry2 = StageIIConfig(tip.phi0_base, p.k, p.Ltilde)
    s2 = plan_stage2(tip, entry2, direction, surface, grid, stiffness, n)
    last = s2[-1].params if s2 else p
    anchor = Pose(tip.x0, tip.y0, direction.contact_angle, tip.z0, tip.theta0)
    s3 = plan_stage3(anchor, StageIIIConfig(0.0, last.k, last.Ltilde), direction, surface, grid, stiffness, n)
    return s2, s3


def plan_full(
    start: StageIConfig,
    surface: SurfaceSpec,
    direction: RollDirection,
    grid: GridSpec,
    stiffness: StiffnessSpec,
    n: int = DEFAULT_SAMPLES,
) -> PlanPath:
    """Plan all three stages. The stage III entry duplicates the last
    stage I/II node and is dropped from the concatenation."""
    L = stiffness.L
    if is_fully_placed(start, surface, direction, L):
        shape = stage3_shape(StageIIIConfig(L, start.params.k, start.params.Ltilde), start.base, direction, stiffness, n)
        node = PlanNode(
            Stage.III, grasp_pose(shape), start.params, start.base, L, direction, None,
            penetration_check(shape, surface).margin,
        )
        return PlanPath([node], stiffness, surface, grid, direction, n)
    s1 = plan_stage1(start, surface, grid, stiffness, direction, n)
    s2, s3 = _finish(s1[-1], surface, direction, grid, stiffness, n)
    return PlanPath(s1 + s2 + s3[1:], stiffness, surface, grid, direction, n)


def plan_from_state(
    node: PlanNode,
    surface: SurfaceSpec,
    direction: RollDirection,
    grid: GridSpec,
    stiffness: StiffnessSpec,
    n: int = DEFAULT_SAMPLES,
) -> PlanPath:
    """Replan from an arbitrary current state, dispatching on its stage.

    A stage I state replans all three stages; a stage II state (tip on the
    surface) resumes with the tip roll; a stage III state keeps its contact
    length and continues laying down.
    """
    if node.stage is Stage.I:
        return plan_full(StageIConfig(node.base, node.params), surface, direction, grid, stiffness, n)
    if abs(node.base.y0 - surface.y0) > 1e-9 * stiffness.L:
        raise PlanningError(node.stage, 0, "geometry", "tip is not on the surface")
    if node.stage is Stage.II:
        shape = node.shape(stiffness, n)
        ok, pen, why = _shape_checks(shape, surface)
        if not ok:
            raise PlanningError(Stage.II, 0, why, "current state infeasible")
        fv = friction_check(node.params, node.base.phi0_base, direction, surface)
        if not fv.feasible:
            raise PlanningError(Stage.II, 0, "friction", "current state outside the friction cone")
        head = replace(node, friction_margin=fv.margin, penetration_margin=pen)
        s2, s3 = _finish(head, surface, direction, grid, stiffness, n)
        return PlanPath([head] + s2 + s3[1:], stiffness, surface, grid, direction, n)
    s3 = plan_stage3(
        node.base, StageIIIConfig(node.l, node.params.k, node.params.Ltilde),
        direction, surface, grid, stiffness, n,
    )
    return PlanPath(s3, stiffness, surface, grid, direction, n)


def revalidate(path: PlanPath, n: int | None = None) -> list:
    """Re-run every placement predicate on each node; returns failure strings."""
    bad = []
    for i, node in enumerate(path.nodes):
        shape = node.shape(path.stiffness, n or path.n_samples)
        if not penetration_check(shape, path.surface).feasible:
            bad.append(f"node {i}: penetration")
        if not self_intersection_check(shape).feasible:
            bad.append(f"node {i}: self_intersection")
        if node.stage is not Stage.I and not node.params.degenerate:
            phi_c = node.base.phi0_base if node.stage is Stage.II else path.direction.contact_angle
            if not friction_check(node.params, phi_c, path.direction, path.surface).feasible:
                bad.append(f"node {i}: friction")
    return bad
