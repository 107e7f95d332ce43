"""Surface-contact shapes and feasibility predicates for DLO placement."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .elastica import (
    DLOShape,
    ElasticaParams,
    Pose,
    ShapeError,
    StiffnessSpec,
    elastica_axis_angle,
    eval_shape,
    free_states,
    wrap_angle,
    DEFAULT_SAMPLES,
)

PENETRATION_TOL = 1e-9  # in units of L
SURFACE_TOL = 1e-12  # in units of L


class RollDirection(enum.Enum):
    """Placement rolling direction.

    Rightward places the rod along +x (contact tangent 0) with the tip at the
    inflection s0 = Ltilde/4; leftward is its mirror image (tangent pi,
    s0 = 3 Ltilde/4).
    """

    RIGHTWARD = "rightward"
    LEFTWARD = "leftward"

    @property
    def phase(self) -> float:
        return 0.25 if self is RollDirection.RIGHTWARD else 0.75

    @property
    def branch(self) -> int:
        return 1 if self is RollDirection.RIGHTWARD else -1

    @property
    def sign(self) -> float:
        """+1 when the placed rod extends along +x."""
        return 1.0 if self is RollDirection.RIGHTWARD else -1.0

    @property
    def contact_angle(self) -> float:
        return 0.0 if self is RollDirection.RIGHTWARD else math.pi

    def rolling_angle(self, phi_tip: float) -> float:
        """Remaining tip rotation before the tip tangent lies on the surface."""
        return self.sign * wrap_angle(phi_tip - self.contact_angle)

    def tip_angle(self, rolling: float) -> float:
        return wrap_angle(self.contact_angle + self.sign * rolling)

    def params(self, k: float, Ltilde: float) -> ElasticaParams:
        return ElasticaParams(k, self.phase * Ltilde, Ltilde)


@dataclass(frozen=True)
class SurfaceSpec:
    y0: float = 0.0
    alpha: float = math.pi / 2
    mu1: float = 0.5
    mu2: float = 0.5

    def __post_init__(self):
        if self.mu1 < 0 or self.mu2 < 0:
            raise ShapeError("friction coefficients must be nonnegative")

    @property
    def mu(self) -> float:
        return min(self.mu1, self.mu2)

    def to_dict(self):
        return {"y0": self.y0, "alpha": self.alpha, "mu1": self.mu1, "mu2": self.mu2}


@dataclass(frozen=True)
class StageIConfig:
    base: Pose
    params: ElasticaParams


@dataclass(frozen=True)
class StageIIConfig:
    phi_tip: float
    k: float
    Ltilde: float


@dataclass(frozen=True)
class StageIIIConfig:
    l: float
    k: float
    Ltilde: float


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    margin: float
    constraint: str
    detail: str = ""

    def __bool__(self):
        return self.feasible


@dataclass(frozen=True)
class FrictionVerdict(Verdict):
    phi_axis: float = 0.0
    mu: float = 0.0


def _check_on_surface(pose: Pose, surface: SurfaceSpec | None, L: float):
    if surface is not None and abs(pose.y0 - surface.y0) > SURFACE_TOL * max(L, 1.0):
        raise ShapeError(f"pose y={pose.y0} is not on the surface y0={surface.y0}")


def stage2_shape(
    cfg: StageIIConfig,
    tip: Pose,
    direction: RollDirection,
    stiffness: StiffnessSpec,
    n: int = DEFAULT_SAMPLES,
    surface: SurfaceSpec | None = None,
) -> DLOShape:
    """Free elastica hinged at a surface tip with zero tip curvature."""
    params = direction.params(cfg.k, cfg.Ltilde)
    if params.degenerate:
        raise ShapeError("stage II requires a curved elastica (k > 0)")
    _check_on_surface(tip, surface, stiffness.L)
    shape = eval_shape(Pose(tip.x0, tip.y0, cfg.phi_tip), params, stiffness, n)
    shape.meta.update(stage="II", direction=direction.value)
    return shape


def composite_shape(
    anchor: Pose,
    l: float,
    params: ElasticaParams,
    stiffness: StiffnessSpec,
    n: int = DEFAULT_SAMPLES,
) -> DLOShape:
    """Straight segment of length l along the anchor tangent, then a free elastica.

    The free portion starts at the junction with the same tangent and with
    the phase ``params.s0``. The junction s = l is always a sample.
    """
    L = stiffness.L
    l = float(l)
    if l < 0.0 or l > L * (1.0 + 1e-12):
        raise ShapeError(f"contact length {l} outside [0, L={L}]")
    l = min(l, L)
    s = np.linspace(0.0, L, int(n))
    if l > 0.0 and np.min(np.abs(s - l)) > 1e-12 * L:
        s = np.sort(np.append(s, l))
    if l <= 0.0:
        return eval_shape(anchor, params, stiffness, n)
    c, sn = math.cos(anchor.phi0_base), math.sin(anchor.phi0_base)
    contact = s <= l
    x = anchor.x0 + c * s
    y = anchor.y0 + sn * s
    phi = np.full_like(s, anchor.phi0_base)
    kap = np.zeros_like(s)
    free = ~contact
    if free.any():
        jb = Pose(anchor.x0 + c * l, anchor.y0 + sn * l, anchor.phi0_base)
        x[free], y[free], phi[free], kap[free] = free_states(jb, params, s[free] - l)
    if abs(sn) < 1e-15:
        y[contact] = anchor.y0  # exactly on a horizontal surface
    return DLOShape(s, x, y, phi, kap, params, anchor, stiffness, contact_length=l)


def stage3_shape(
    cfg: StageIIIConfig,
    anchor: Pose,
    direction: RollDirection,
    stiffness: StiffnessSpec,
    n: int = DEFAULT_SAMPLES,
    surface: SurfaceSpec | None = None,
) -> DLOShape:
    """Composite shape: contact segment of length l on the surface, then a free
    elastica starting at an inflection (zero curvature) at the junction."""
    _check_on_surface(anchor, surface, stiffness.L)
    if cfg.l < 0.0 or cfg.l > stiffness.L * (1.0 + 1e-12):
        raise ShapeError(f"contact length {cfg.l} outside [0, L={stiffness.L}]")
    params = direction.params(cfg.k, cfg.Ltilde)
    base = Pose(anchor.x0, anchor.y0, direction.contact_angle, anchor.z0, anchor.theta0)
    shape = composite_shape(base, cfg.l, params, stiffness, n)
    shape.meta.update(stage="III", direction=direction.value)
    return shape


def friction_check(
    params: ElasticaParams,
    phi_contact: float,
    direction: RollDirection,
    surface: SurfaceSpec,
) -> FrictionVerdict:
    """Coulomb cone test on the tip contact force (directed along the axis).

    Feasible iff |phi_axis - alpha| < atan(min(mu1, mu2)), angle difference wrapped.
    """
    phi_axis = elastica_axis_angle(params, phi_contact, direction.branch)
    mu = surface.mu
    half_cone = math.atan(mu)
    deviation = abs(wrap_angle(phi_axis - surface.alpha))
    margin = half_cone - deviation
    return FrictionVerdict(
        feasible=margin > 0.0,
        margin=margin,
        constraint="friction",
        detail=f"|phi_axis - alpha| = {deviation:.6g} rad vs atan(mu) = {half_cone:.6g} rad",
        phi_axis=phi_axis,
        mu=mu,
    )


def penetration_check(shape: DLOShape, surface: SurfaceSpec) -> Verdict:
    """Non-penetration of the placement half-plane y >= y0."""
    margin = float(np.min(shape.y - surface.y0))
    ok = margin >= -PENETRATION_TOL * shape.L
    return Verdict(ok, margin, "penetration", "" if ok else f"min y - y0 = {margin:.3g} m")


def self_intersection_check(shape: DLOShape) -> Verdict:
    """Segment-segment test between non-adjacent sample segments."""
    if shape.n < 3:
        raise ShapeError("need at least 3 samples")
    i, j = kernels.first_crossing(shape.x, shape.y)
    if i < 0:
        return Verdict(True, 0.0, "self_intersection")
    return Verdict(False, 0.0, "self_intersection", f"segments {i} and {j} cross")


def grasp_pose(shape: DLOShape) -> Pose:
    """Gripper pose at the distal end s = L."""
    return Pose(shape.x[-1], shape.y[-1], shape.phi[-1])
