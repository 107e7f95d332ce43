"""Free-space inflectional elastica shapes of a deformable linear object.

Sign convention: curvature kappa(s) = -2 k w cn(w (s + s0), k) with the
angular frequency w = 4 K(k) / Ltilde, and tangent

    phi(s) = phi_axis - 2 asin(k sn(w (s + s0), k)),

where phi_axis is the direction of the elastica axis. With this convention
the phase s0 = Ltilde/4 starts the rod at an inflection point from which it
turns counter-clockwise, and the axis lies at +acos(1 - 2k^2) from the
inflection tangent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
from scipy.integrate import simpson

from . import kernels
from .elliptic import DomainError, check_modulus, complete_K

DEGENERATE_K = 1e-6
DEFAULT_SAMPLES = 200
ODE_MIN_STEPS = 10_000


class ShapeError(ValueError):
    """Invalid shape, parameters or sampling request."""


class DegenerateError(ShapeError):
    """Operation undefined for the straight-line (k ~ 0) limit."""


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w <= -np.pi, w + 2.0 * np.pi, w)
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(a) == 0 else w


@dataclass(frozen=True)
class ElasticaParams:
    """Shape parameters (k, s0, Ltilde); s0 is kept modulo Ltilde."""

    k: float
    s0: float
    Ltilde: float

    def __post_init__(self):
        try:
            k = check_modulus(self.k)
        except DomainError as exc:
            raise ShapeError(str(exc)) from exc
        lt = float(self.Ltilde)
        if not np.isfinite(lt) or lt <= 0.0:
            raise ShapeError(f"Ltilde must be positive, got {self.Ltilde!r}")
        s0 = float(self.s0) % lt
        if s0 >= lt:
            s0 = 0.0
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "Ltilde", lt)
        object.__setattr__(self, "s0", s0)

    @property
    def degenerate(self) -> bool:
        return self.k < DEGENERATE_K

    @property
    def phase(self) -> float:
        """s0 as a fraction of the period."""
        return self.s0 / self.Ltilde

    def as_tuple(self):
        return (self.k, self.s0, self.Ltilde)


@dataclass(frozen=True)
class Pose:
    """Base-frame pose; z0/theta0 are carried for the semi-spatial case."""

    x0: float = 0.0
    y0: float = 0.0
    phi0_base: float = 0.0
    z0: float | None = None
    theta0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "y0", float(self.y0))
        object.__setattr__(self, "phi0_base", wrap_angle(float(self.phi0_base)))
        if self.theta0 is not None:
            object.__setattr__(self, "theta0", wrap_angle(float(self.theta0)))
        if self.z0 is not None:
            object.__setattr__(self, "z0", float(self.z0))

    def to_dict(self):
        d = {"x0": self.x0, "y0": self.y0, "phi0_base": self.phi0_base}
        if self.z0 is not None:
            d["z0"] = self.z0
        if self.theta0 is not None:
            d["theta0"] = self.theta0
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class StiffnessSpec:
    EI: float
    L: float

    def __post_init__(self):
        if not (self.EI > 0.0):
            raise ShapeError("EI must be positive")
        if not (self.L > 0.0):
            raise ShapeError("L must be positive")
        object.__setattr__(self, "EI", float(self.EI))
        object.__setattr__(self, "L", float(self.L))


@dataclass(frozen=True)
class DLOState:
    s: float
    x: float
    y: float
    phi: float
    kappa: float


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DLOShape:
    """Arclength-sampled shape.

    ``contact_length`` is the length of a leading segment lying on a
    surface (stage III composites); the free elastica described by ``params``
    starts at ``s = contact_length``.
    """

    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    phi: np.ndarray
    kappa: np.ndarray
    params: ElasticaParams
    base: Pose
    stiffness: StiffnessSpec
    contact_length: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = [_frozen(getattr(self, f)) for f in ("s", "x", "y", "phi", "kappa")]
        n = len(arrays[0])
        if any(len(a) != n for a in arrays):
            raise ShapeError("sample arrays differ in length")
        if n >= 2 and np.any(np.diff(arrays[0]) <= 0.0):
            raise ShapeError("arclength samples must be strictly increasing")
        for name, a in zip(("s", "x", "y", "phi", "kappa"), arrays):
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.s)

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def L(self) -> float:
        return self.stiffness.L

    @property
    def samples(self) -> list[DLOState]:
        return list(self.states())

    def states(self) -> Iterator[DLOState]:
        for row in zip(self.s, self.x, self.y, self.phi, self.kappa):
            yield DLOState(*map(float, row))

    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @property
    def junction_index(self) -> int:
        """Index of the sample where the free elastica begins."""
        if self.contact_length <= 0.0:
            return 0
        return int(np.argmin(np.abs(self.s - self.contact_length)))

    def free_base(self) -> Pose:
        j = self.junction_index
        return Pose(self.x[j], self.y[j], self.phi[j])

    def evaluate(self, s):
        """Exact (x, y, phi, kappa) at arclengths ``s`` from the generating parameters.

        The leading contact segment, if any, is straight along the base tangent.
        """
        s = np.asarray(s, dtype=float)
        b, l = self.base, self.contact_length
        c, sn = math.cos(b.phi0_base), math.sin(b.phi0_base)
        if l <= 0.0:
            return free_states(b, self.params, s)
        x = b.x0 + c * s
        y = b.y0 + sn * s
        phi = np.full_like(s, b.phi0_base)
        kap = np.zeros_like(s)
        free = s > l
        if free.any():
            jb = Pose(b.x0 + c * l, b.y0 + sn * l, b.phi0_base)
            x[free], y[free], phi[free], kap[free] = free_states(jb, self.params, s[free] - l)
        return x, y, phi, kap

    def resample(self, n: int) -> "DLOShape":
        """Exact shape on ``n`` uniform arclength samples over the same span."""
        if n < 2:
            raise ShapeError("need at least 2 samples")
        s = np.linspace(self.s[0], self.s[-1], int(n))
        return replace(self, s=s, **dict(zip(("x", "y", "phi", "kappa"), self.evaluate(s))))

    def translated(self, dx=0.0, dy=0.0) -> "DLOShape":
        b = self.base
        return replace(
            self,
            x=self.x + dx,
            y=self.y + dy,
            base=Pose(b.x0 + dx, b.y0 + dy, b.phi0_base, b.z0, b.theta0),
        )


@dataclass(frozen=True)
class CostateRecord:
    s: np.ndarray
    lambda_x: np.ndarray
    lambda_y: np.ndarray
    lambda_phi: np.ndarray


def angular_frequency(params: ElasticaParams) -> float:
    """w = 4 K(k) / Ltilde, so the curvature runs one cn period over Ltilde."""
    return 4.0 * complete_K(params.k) / params.Ltilde


def curvature_at(params: ElasticaParams, s):
    """Curvature of the inflectional elastica at arclength ``s``."""
    if params.degenerate:
        return 0.0 if np.ndim(s) == 0 else np.zeros(np.shape(s))
    w = angular_frequency(params)
    am, _ = kernels.am_zeta(w * (np.asarray(s, dtype=float) + params.s0), params.k)
    kap = -2.0 * params.k * w * np.cos(am)
    return float(kap) if np.ndim(s) == 0 else kap


def axis_angle_from_base(params: ElasticaParams, base: Pose) -> float:
    """Direction of the elastica axis for a shape anchored at ``base``."""
    w = angular_frequency(params)
    am0, _ = kernels.am_zeta(np.array([w * params.s0]), params.k)
    return base.phi0_base + 2.0 * math.asin(params.k * math.sin(am0[0]))


def free_states(base: Pose, params: ElasticaParams, s, method="closed"):
    """Raw (x, y, phi, kappa) arrays of a free elastica at arclengths ``s``."""
    s = np.asarray(s, dtype=float)
    if params.degenerate:
        c, sn = math.cos(base.phi0_base), math.sin(base.phi0_base)
        return (
            base.x0 + c * s,
            base.y0 + sn * s,
            np.full_like(s, base.phi0_base),
            np.zeros_like(s),
        )
    args = (params.k, params.s0, params.Ltilde, base.x0, base.y0, base.phi0_base)
    if method == "closed":
        return kernels.elastica_states(s, *args)
    if method == "ode":
        sub = max(1, math.ceil(ODE_MIN_STEPS / max(1, len(s) - 1)))
        x, y, phi = kernels.rk4_states(s, *args, sub)
        return x, y, phi, curvature_at(params, s)
    raise ShapeError(f"unknown evaluation method {method!r}")


def eval_shape(
    base: Pose,
    params: ElasticaParams,
    stiffness: StiffnessSpec,
    n: int = DEFAULT_SAMPLES,
    method: str = "closed",
) -> DLOShape:
    """Sample a free elastica shape uniformly over [0, L].

    Args:
        base: pose at s = 0 (position and tangent).
        params: elastica parameters.
        stiffness: EI and physical length L.
        n: number of samples, at least 2.
        method: ``"closed"`` for the elliptic-integral closed form, ``"ode"``
            for RK4 integration of the DLO control system with the closed-form
            curvature (at least 10^4 steps).
    """
    if n < 2:
        raise ShapeError("need at least 2 samples")
    s = np.linspace(0.0, stiffness.L, int(n))
    x, y, phi, kap = free_states(base, params, s, method)
    return DLOShape(s, x, y, phi, kap, params, base, stiffness)


def elastic_energy(shape: DLOShape) -> float:
    """(EI/2) * integral of kappa^2 over the samples (composite Simpson)."""
    if shape.n < 2:
        raise ShapeError("need at least 2 samples")
    return 0.5 * shape.stiffness.EI * float(simpson(shape.kappa**2, x=shape.s))


def bending_energy(params: ElasticaParams, EI: float, length: float) -> float:
    """Closed-form (EI/2) * integral of kappa^2 over s in [0, length].

    Uses the integral of cn^2, (E(am u) - k'^2 u) / k^2.
    """
    if params.degenerate or length <= 0.0:
        return 0.0
    k = params.k
    w = angular_frequency(params)
    a, _, e_over_k = kernels.agm_ladder(k)
    u = np.array([w * params.s0, w * (params.s0 + length)])
    _, z = kernels.am_zeta(u, k)
    eps = u * e_over_k + z
    kp2 = (1.0 - k) * (1.0 + k)
    integral_cn2 = ((eps[1] - eps[0]) - kp2 * (u[1] - u[0])) / (k * k)
    return 2.0 * EI * k * k * w * integral_cn2


def lambda_r(params: ElasticaParams, stiffness: StiffnessSpec) -> float:
    """Magnitude of the opposing endpoint forces, EI * w^2."""
    if params.degenerate:
        raise DegenerateError("force direction undefined for a straight rod")
    return stiffness.EI * angular_frequency(params) ** 2


def elastica_axis_angle(params: ElasticaParams, phi_at_inflection: float, branch: int) -> float:
    """Axis angle from the tangent at an inflection point.

    ``branch=+1`` corresponds to the inflection at s + s0 = Ltilde/4,
    ``branch=-1`` to s + s0 = 3 Ltilde/4.
    """
    if params.degenerate:
        raise DegenerateError("axis undefined for a straight rod")
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    k = params.k
    return phi_at_inflection + branch * math.acos(1.0 - 2.0 * k * k)


def _shape_axis(shape: DLOShape) -> float:
    if shape.contact_length > 0.0:
        return axis_angle_from_base(shape.params, shape.free_base())
    return axis_angle_from_base(shape.params, shape.base)


def hamiltonian_residual(shape: DLOShape) -> float:
    """max |lr cos(phi - phi_axis) - EI kappa^2/2 - H*| / lr over the samples."""
    if shape.params.degenerate:
        raise DegenerateError("Hamiltonian residual undefined for k ~ 0")
    if shape.n < 10:
        raise ShapeError("need at least 10 samples")
    lr = lambda_r(shape.params, shape.stiffness)
    phi_axis = _shape_axis(shape)
    h = lr * np.cos(shape.phi - phi_axis) - 0.5 * shape.stiffness.EI * shape.kappa**2
    return float(np.max(np.abs(h - h[0])) / lr)


def integrate_adjoint(shape: DLOShape, substeps: int = 20) -> CostateRecord:
    """Integrate the costate along the shape from lambda_phi(0) = -EI kappa(0).

    lambda_x and lambda_y are the constant force components lr (cos, sin) of
    the axis angle; lambda_phi follows the adjoint equation.
    """
    p = shape.params
    if p.degenerate:
        raise DegenerateError("costate undefined for k ~ 0")
    lr = lambda_r(p, shape.stiffness)
    phi_axis = _shape_axis(shape)
    lx, ly = lr * math.cos(phi_axis), lr * math.sin(phi_axis)
    j = shape.junction_index
    s_free = shape.s[j:] - shape.s[j]
    lam0 = -shape.stiffness.EI * shape.kappa[j]
    lam = kernels.adjoint_rk4(s_free, p.k, p.s0, p.Ltilde, shape.phi[j], lx, ly, lam0, substeps)
    if j > 0:
        # contact segment: zero curvature, moment stays zero
        lam = np.concatenate([np.zeros(j), lam])
    n = shape.n
    return CostateRecord(shape.s.copy(), np.full(n, lx), np.full(n, ly), lam)
