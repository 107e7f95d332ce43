"""Shape characterization: recover elastica parameters from observed points.

The inverse map from a point sequence to (k, s0, Ltilde) is multi-valued, so
the fitter reports every distinct local minimum it finds. Fits are done in
the base frame (base point at the origin, base tangent along +x): a
quasi-random library of shapes is screened first, then Levenberg-Marquardt
refines the best library entries.

When the expected parameters are known (the controller's plan), a MAP fit
with a Gaussian prior centred there is also run. It becomes the estimate
whenever an F-test finds its data residual statistically indistinguishable
from the global best, which keeps the estimate near the plan along
directions the observation does not resolve.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import f as f_dist
from scipy.stats import qmc

from . import kernels
from .elastica import DLOShape, ElasticaParams, Pose, ShapeError, StiffnessSpec, wrap_angle
from .placement import composite_shape

K_FIT_MIN = 0.02
K_FIT_MAX = 0.95
K_SOLVE_MAX = 0.99
LIBRARY_LOG2 = 12
SCREEN_POINTS = 50
LM_TOL = 1e-12
DEFAULT_STARTS = 6
FAIL_RESIDUAL = 0.2  # in units of L
LENGTH_TOL = 0.10

# candidate separation, in grid cells (dk, dLtilde / L, ds0 / Ltilde)
SEP_K = 0.005
SEP_LT = 0.02
SEP_S0 = 0.02

# prior-tracked fit: F-test level and prior standard deviations of
# (k, Ltilde / L, phase)
PRIOR_ALPHA = 0.01
PRIOR_STD = (0.05, 0.2, 0.05)


class FitError(RuntimeError):
    """No candidate reproduces the observation."""


@dataclass(frozen=True, eq=False)
class ObservedShape:
    """Ordered medial-axis samples, assumed uniformly spaced in arclength."""

    points: np.ndarray
    base: Pose
    L: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ShapeError("points must be an (n, 2) array")
        if len(pts) < 8:
            raise ShapeError(f"need at least 8 points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise ShapeError("points must be finite")
        if not (self.L > 0):
            raise ShapeError("L must be positive")
        length = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
        if abs(length - self.L) > LENGTH_TOL * self.L:
            raise ShapeError(f"polyline length {length:.6g} m differs from L={self.L:.6g} m by more than 10%")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "L", float(self.L))

    @property
    def n(self):
        return len(self.points)

    @property
    def s(self):
        return np.linspace(0.0, self.L, self.n)

    def tangents(self):
        d = np.gradient(self.points, axis=0)
        return np.unwrap(np.arctan2(d[:, 1], d[:, 0]))


@dataclass
class CandidateSet:
    candidates: list  # (ElasticaParams, residual) ascending by residual
    degenerate: bool = False
    meta: dict = field(default_factory=dict)
    tracked: tuple | None = None  # (params, residual) of the accepted prior-started fit

    def __len__(self):
        return len(self.candidates)

    @property
    def estimate(self) -> ElasticaParams:
        """Prior-consistent solution when one was accepted, else the best candidate."""
        return self.tracked[0] if self.tracked is not None else self.best

    def ranked(self) -> list:
        """Candidates with the estimate first."""
        if self.tracked is None:
            return list(self.candidates)
        return [self.tracked] + [c for c in self.candidates if c[0] != self.tracked[0]]

    @property
    def best(self) -> ElasticaParams:
        return self.candidates[0][0]

    @property
    def best_residual(self) -> float:
        return self.candidates[0][1]

    def to_dict(self):
        return {
            "degenerate": self.degenerate,
            "candidates": [
                {"k": p.k, "s0": p.s0, "Ltilde": p.Ltilde, "residual": r} for p, r in self.candidates
            ],
            **({"meta": self.meta} if self.meta else {}),
            **(
                {"tracked": {"k": self.tracked[0].k, "s0": self.tracked[0].s0, "Ltilde": self.tracked[0].Ltilde,
                             "residual": self.tracked[1]}}
                if self.tracked is not None else {}
            ),
        }


@dataclass(frozen=True)
class AccuracyError:
    shape_err: float
    elastica_err: float
    tangent_err: float
    weighted: float
    weights: tuple

    def to_dict(self):
        return {
            "shape_err": self.shape_err,
            "elastica_err": self.elastica_err,
            "tangent_err": self.tangent_err,
            "weighted": self.weighted,
        }


def default_weights(L: float) -> tuple:
    """(w_shape [1/m], w_elastica, w_tangent [1/rad])."""
    return (1.0 / (0.01 * L), 0.1, 1.0 / 0.35)


# ----------------------------------------------------------------------------
# metrics


def _track(a):
    """(s normalised to [0, 1], points, tangents, length) of a shape-like input."""
    if isinstance(a, DLOShape):
        s = np.asarray(a.s)
        length = float(s[-1] - s[0])
        return (s - s[0]) / length, a.points(), np.unwrap(np.asarray(a.phi)), length
    if isinstance(a, ObservedShape):
        return np.linspace(0.0, 1.0, a.n), np.asarray(a.points), a.tangents(), a.L
    raise TypeError(f"expected DLOShape or ObservedShape, got {type(a).__name__}")


def _matched(a, b):
    sa, pa, ta, la = _track(a)
    sb, pb, tb, lb = _track(b)
    if abs(la - lb) > LENGTH_TOL * max(la, lb):
        raise ShapeError(f"shape lengths {la:.6g} and {lb:.6g} differ by more than 10%")
    if len(sa) >= len(sb):
        grid = sa
        pb = np.column_stack([np.interp(grid, sb, pb[:, 0]), np.interp(grid, sb, pb[:, 1])])
        tb = np.interp(grid, sb, tb)
    else:
        grid = sb
        pa = np.column_stack([np.interp(grid, sa, pa[:, 0]), np.interp(grid, sa, pa[:, 1])])
        ta = np.interp(grid, sa, ta)
    return pa, pb, ta, tb


def shape_error(a, b) -> float:
    """Mean distance between arclength-corresponding points (meters)."""
    pa, pb, _, _ = _matched(a, b)
    return float(np.mean(np.hypot(*(pa - pb).T)))


def tangent_error(a, b) -> float:
    """Mean absolute wrapped tangent difference (radians)."""
    _, _, ta, tb = _matched(a, b)
    return float(np.mean(np.abs(wrap_angle(ta - tb))))


def elastica_error(a: ElasticaParams, b: ElasticaParams, L: float = 1.0) -> float:
    """MSE over (Ltilde/L, s0/L, k)."""
    d = np.array([(a.Ltilde - b.Ltilde) / L, (a.s0 - b.s0) / L, a.k - b.k])
    return float(np.mean(d * d))


def accuracy_error(planned: DLOShape, observed_fit, weights=None, elastica_err=None) -> AccuracyError:
    """Weighted accuracy error between a planned shape and a fitted (shape, params) pair.

    ``elastica_err`` overrides the parameter term, e.g. when the compared
    shapes have no free portion.
    """
    fit_shape, fit_params = observed_fit
    w = tuple(default_weights(planned.L) if weights is None else weights)
    se = shape_error(planned, fit_shape)
    te = tangent_error(planned, fit_shape)
    ee = elastica_error(planned.params, fit_params, planned.L) if elastica_err is None else float(elastica_err)
    return AccuracyError(se, ee, te, w[0] * se + w[1] * ee + w[2] * te, w)


# ----------------------------------------------------------------------------
# observations


def synthesize_observation(truth: DLOShape, noise_sigma: float, seed=None, n: int | None = None) -> ObservedShape:
    """Truth samples (optionally re-evaluated on ``n`` uniform points) plus Gaussian noise."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    if n is not None and n != truth.n:
        truth = truth.resample(n)
    pts = truth.points()
    rng = np.random.default_rng(seed)
    pts = pts + rng.normal(0.0, noise_sigma, size=pts.shape) if noise_sigma > 0 else pts.copy()
    return ObservedShape(pts, truth.base, float(truth.s[-1] - truth.s[0]))


# ----------------------------------------------------------------------------
# fitting


def _to_base_frame(points, base: Pose):
    c, s = math.cos(base.phi0_base), math.sin(base.phi0_base)
    d = np.asarray(points) - (base.x0, base.y0)
    return np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])


def _model(s, k, s0, lt, l=0.0):
    """Base-frame points: straight contact segment [0, l] then the free elastica."""
    out = np.column_stack([s, np.zeros_like(s)])
    if k < 1e-6:
        return out
    if l <= 0.0:
        x, y, _, _ = kernels.elastica_states(s, k, s0, lt, 0.0, 0.0, 0.0)
        out[:, 0], out[:, 1] = x, y
        return out
    free = s > l
    if free.any():
        x, y, _, _ = kernels.elastica_states(s[free] - l, k, s0, lt, l, 0.0, 0.0)
        out[free, 0], out[free, 1] = x, y
    return out


@functools.lru_cache(maxsize=64)
def _library(length, n, m, lt_lo, lt_hi, log2, l=0.0):
    """Quasi-random shape library in the base frame, sampled at ``m`` of ``n`` uniform points.

    Returns (params (M, 3), points (M, m, 2), sample indices).
    """
    u = qmc.Sobol(d=3, scramble=False).random_base2(log2)
    k = K_FIT_MIN + (K_FIT_MAX - K_FIT_MIN) * u[:, 0]
    lt = lt_lo + (lt_hi - lt_lo) * u[:, 2]
    s0 = u[:, 1] * lt
    sub = np.round(np.linspace(0, n - 1, m)).astype(int)
    s = np.linspace(0.0, length, n)[sub]
    pts = np.empty((len(k), m, 2))
    for i in range(len(k)):
        pts[i] = _model(s, k[i], s0[i], lt[i], l)
    params = np.column_stack([k, s0, lt])
    params.setflags(write=False)
    pts.setflags(write=False)
    sub.setflags(write=False)
    return params, pts, sub


def _separated(p, q, L):
    dk = abs(p.k - q.k) / SEP_K
    dl = abs(p.Ltilde - q.Ltilde) / (SEP_LT * L)
    ds = abs(p.phase - q.phase) % 1.0
    ds = min(ds, 1.0 - ds) / SEP_S0
    return max(dk, dl, ds) > 1.0


def fit_elastica(
    obs: ObservedShape,
    stiffness: StiffnessSpec,
    starts: int = DEFAULT_STARTS,
    ltilde_bounds: tuple | None = None,
    contact_length: float = 0.0,
    prior: ElasticaParams | None = None,
) -> CandidateSet:
    """Multi-start least-squares fit of (k, s0, Ltilde) to an observation.

    With ``contact_length`` l > 0 the first l meters are a known straight
    segment along the base tangent and the parameters describe the free
    portion that follows. Ltilde is searched over ``ltilde_bounds``
    (default [L, 8L]). A curved ``prior`` adds a local fit started at it,
    reported as ``tracked`` when it passes the consistency F-test.
    """
    if starts < 1:
        raise ValueError("starts must be at least 1")
    L = stiffness.L
    lt_lo, lt_hi = ltilde_bounds if ltilde_bounds is not None else (L, 8.0 * L)
    lt_lo, lt_hi = float(lt_lo), float(lt_hi)
    n = obs.n
    s = np.linspace(0.0, obs.L, n)
    target = _to_base_frame(obs.points, obs.base)

    l = float(contact_length)
    if l < 0.0 or l >= obs.L:
        raise ValueError(f"contact_length {l} outside [0, {obs.L})")
    lib_params, lib_pts, sub = _library(float(obs.L), n, min(n, SCREEN_POINTS), lt_lo, lt_hi, LIBRARY_LOG2, l)
    screen = np.mean(np.sqrt(np.sum((lib_pts - target[sub]) ** 2, axis=2)), axis=1)
    order = np.argsort(screen, kind="stable")

    span = lt_hi - lt_lo

    def unpack(z):
        a, b, c = z
        k = K_SOLVE_MAX * math.sin(a) ** 2
        lt = lt_lo + span * math.sin(b) ** 2
        return k, (c % 1.0) * lt, lt

    def resid(z):
        k, s0, lt = unpack(z)
        return (_model(s, k, s0, lt, l) - target).ravel()

    def solve(k0, s00, lt0):
        z0 = (
            math.asin(math.sqrt(min(1.0, k0 / K_SOLVE_MAX))),
            math.asin(math.sqrt(min(1.0, max(0.0, (lt0 - lt_lo) / span)))) if span > 0 else 0.0,
            s00 / lt0,
        )
        sol = least_squares(resid, z0, method="lm", xtol=LM_TOL, ftol=LM_TOL, gtol=LM_TOL, max_nfev=400)
        k, s0, lt = unpack(sol.x)
        p = ElasticaParams(k, s0, lt)
        d = _model(s, p.k, p.s0, p.Ltilde, l) - target
        return p, float(np.mean(np.hypot(*d.T))), float(np.sum(d * d))

    found, rss = [], {}
    for idx in order[:starts]:
        p, r, q = solve(*lib_params[idx])
        found.append((p, r))
        rss[p] = q

    straight = ElasticaParams(0.0, 0.0, lt_lo)
    r_straight = float(np.mean(np.hypot(*(_model(s, 0.0, 0.0, lt_lo, l) - target).T)))

    found.sort(key=lambda c: (c[1], c[0].k, c[0].Ltilde, c[0].s0))
    kept = []
    for p, r in found:
        if p.degenerate:
            continue
        if all(_separated(p, q, L) for q, _ in kept):
            kept.append((p, r))
    best_curved = kept[0][1] if kept else math.inf
    degenerate = r_straight <= best_curved + max(1e-6 * L, 0.05 * best_curved)
    if degenerate:
        kept.insert(0, (straight, r_straight))
    else:
        kept.append((straight, r_straight))
        kept.sort(key=lambda c: (c[1], c[0].k, c[0].Ltilde, c[0].s0))
    if kept[0][1] >= FAIL_RESIDUAL * L:
        raise FitError(f"best residual {kept[0][1]:.4g} m exceeds {FAIL_RESIDUAL} L")
    tracked = None
    curved = [v for c, v in rss.items() if not c.degenerate]
    if prior is not None and not prior.degenerate and curved:
        best_rss = min(curved)
        sigma = math.sqrt(best_rss / max(1, 2 * n - 3))
        lt_p = min(max(prior.Ltilde, lt_lo), lt_hi)
        sk, sl, sq = PRIOR_STD

        def resid_map(z):
            k, s0, lt = unpack(z)
            dq = math.remainder(s0 / lt - prior.phase, 1.0)
            pen = sigma * np.array([(k - prior.k) / sk, (lt - lt_p) / (sl * L), dq / sq])
            return np.concatenate([resid(z), pen])

        z0 = (
            math.asin(math.sqrt(min(1.0, prior.k / K_SOLVE_MAX))),
            math.asin(math.sqrt(min(1.0, max(0.0, (lt_p - lt_lo) / span)))) if span > 0 else 0.0,
            prior.phase,
        )
        sol = least_squares(resid_map, z0, method="lm", xtol=LM_TOL, ftol=LM_TOL, gtol=LM_TOL, max_nfev=400)
        p = ElasticaParams(*unpack(sol.x))
        d = _model(s, p.k, p.s0, p.Ltilde, l) - target
        if _consistent(float(np.sum(d * d)), best_rss, 2 * n, 3):
            tracked = (p, float(np.mean(np.hypot(*d.T))))
    return CandidateSet(kept, degenerate, {"screen_best": float(screen[order[0]])}, tracked)


def _consistent(rss_alt, rss_best, m, p):
    """Nested-model F-test: is the excess residual of the alternative explained by noise?"""
    if rss_alt <= rss_best:
        return True
    dof = m - p
    if dof <= 0 or rss_best <= 0.0:
        return False
    stat = ((rss_alt - rss_best) / p) / (rss_best / dof)
    return stat <= f_dist.ppf(1.0 - PRIOR_ALPHA, p, dof)


def fitted_shape(
    obs: ObservedShape, params: ElasticaParams, stiffness: StiffnessSpec, n: int, contact_length: float = 0.0
) -> DLOShape:
    """Shape of length obs.L generated by ``params`` from the observation's base."""
    return composite_shape(obs.base, contact_length, params, StiffnessSpec(stiffness.EI, obs.L), n)
