import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dloplace.elastica import ElasticaParams, Pose, ShapeError, StiffnessSpec, angular_frequency, eval_shape
from dloplace.placement import (
    RollDirection,
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

L = 0.3
ST = StiffnessSpec(1.0, L)
SURF = SurfaceSpec(y0=0.02)
R, LEFT = RollDirection.RIGHTWARD, RollDirection.LEFTWARD


def brute_crossing(x, y):
    """O(n^2) proper/touching crossing test between non-adjacent segments."""
    p = np.column_stack([x, y])
    a, b = p[:-1], p[1:]
    m = len(a)

    def orient(o, e, q):
        return (e[..., 0] - o[..., 0]) * (q[..., 1] - o[..., 1]) - (e[..., 1] - o[..., 1]) * (q[..., 0] - o[..., 0])

    for i in range(m - 2):
        c, d = a[i + 2:], b[i + 2:]
        o1 = orient(a[i], b[i], c)
        o2 = orient(a[i], b[i], d)
        o3 = orient(c, d, a[i])
        o4 = orient(c, d, b[i])
        if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
            return True
    return False


def kmax(k, lt):
    return 2 * k * angular_frequency(ElasticaParams(k, 0, lt))


def test_roll_direction_mapping():
    assert R.phase == 0.25 and LEFT.phase == 0.75
    assert R.contact_angle == 0.0 and LEFT.contact_angle == math.pi
    for d in RollDirection:
        for r in (0.0, 0.3, 1.2):
            assert d.rolling_angle(d.tip_angle(r)) == pytest.approx(r)
        p = d.params(0.5, 0.8)
        assert p.s0 == pytest.approx(d.phase * 0.8)


class TestStage2:
    @given(st.sampled_from(list(RollDirection)), st.floats(0.05, 0.95), st.floats(1.0, 8.0), st.floats(0, 1.5))
    @settings(max_examples=40)
    def test_zero_tip_curvature(self, d, k, f, r):
        sh = stage2_shape(StageIIConfig(d.tip_angle(r), k, f * L), Pose(0.1, SURF.y0), d, ST, surface=SURF)
        assert abs(sh.kappa[0]) <= 1e-9 * kmax(k, f * L)
        assert sh.phi[0] == pytest.approx(d.tip_angle(r))

    def test_terminal_tangent(self):
        sh = stage2_shape(StageIIConfig(0.0, 0.6, 0.7), Pose(0, SURF.y0), R, ST)
        assert sh.phi[0] == 0.0

    def test_tip_and_phase_fixed(self):
        tip = Pose(0.05, SURF.y0)
        a = stage2_shape(StageIIConfig(0.4, 0.5, 0.7), tip, R, ST)
        b = stage2_shape(StageIIConfig(0.4, 0.7, 0.7), tip, R, ST)
        assert (a.x[0], a.y[0]) == (b.x[0], b.y[0])
        assert a.params.s0 == b.params.s0

    def test_errors(self):
        with pytest.raises(ShapeError):
            stage2_shape(StageIIConfig(0.4, 0.0, 0.7), Pose(0, SURF.y0), R, ST)
        with pytest.raises(ShapeError):
            stage2_shape(StageIIConfig(0.4, 0.5, 0.7), Pose(0, SURF.y0 + 0.01), R, ST, surface=SURF)


class TestStage3:
    def test_fully_placed(self):
        sh = stage3_shape(StageIIIConfig(L, 0.5, 0.7), Pose(0.1, SURF.y0), R, ST, surface=SURF)
        np.testing.assert_array_equal(sh.kappa, 0.0)
        np.testing.assert_array_equal(sh.phi, 0.0)
        np.testing.assert_array_equal(sh.y, SURF.y0)
        assert penetration_check(sh, SURF).feasible and penetration_check(sh, SURF).margin == 0.0

    @pytest.mark.parametrize("d", list(RollDirection))
    def test_boundary_with_stage2(self, d):
        a = stage3_shape(StageIIIConfig(0.0, 0.6, 0.75), Pose(0.1, SURF.y0), d, ST)
        b = stage2_shape(StageIIConfig(d.contact_angle, 0.6, 0.75), Pose(0.1, SURF.y0), d, ST)
        assert np.max(np.hypot(a.x - b.x, a.y - b.y)) <= 1e-9 * L

    @given(st.sampled_from(list(RollDirection)), st.floats(0.05, 0.95), st.floats(1.0, 8.0), st.floats(0.0, 1.0))
    @settings(max_examples=40)
    def test_junction(self, d, k, f, frac):
        l = frac * L
        sh = stage3_shape(StageIIIConfig(l, k, f * L), Pose(-0.05, SURF.y0), d, ST, surface=SURF)
        j = sh.junction_index
        assert sh.s[j] == pytest.approx(l, abs=1e-12)
        contact = sh.s <= l
        np.testing.assert_array_equal(sh.y[contact], SURF.y0)
        np.testing.assert_array_equal(sh.phi[contact], d.contact_angle)
        assert abs(sh.kappa[j]) <= 1e-9 * kmax(k, f * L)
        if l < L:
            # exact evaluation just past the junction is continuous with the contact segment
            eps = 1e-9 * L
            x, y, phi, kap = sh.evaluate(np.array([l + eps]))
            assert abs(x[0] - (sh.x[j] + d.sign * eps)) <= 1e-9 * L
            assert abs(y[0] - SURF.y0) <= 1e-9 * L
            assert abs(math.remainder(phi[0] - d.contact_angle, 2 * math.pi)) <= 1e-9
            assert abs(kap[0]) <= 1e-9 * kmax(k, f * L) + 1e-6

    def test_rejects_long_contact(self):
        with pytest.raises(ShapeError):
            stage3_shape(StageIIIConfig(1.1 * L, 0.5, 0.7), Pose(0, SURF.y0), R, ST)


class TestFriction:
    def test_effective_mu(self):
        v = friction_check(ElasticaParams(0.5, 0, 1), 0.0, R, SurfaceSpec(mu1=0.2, mu2=0.4))
        assert v.mu == 0.2

    def test_strict_boundary(self):
        # k = 1/sqrt(2) puts the axis a quarter turn from the contact tangent
        p = ElasticaParams(1 / math.sqrt(2), 0, 1)
        v = friction_check(p, 0.0, R, SurfaceSpec(mu1=0.0, mu2=0.0))
        assert abs(v.phi_axis - math.pi / 2) < 1e-12 and not v.feasible

    def test_margin_arithmetic(self):
        p = ElasticaParams(1 / math.sqrt(2), 0, 1)
        v = friction_check(p, math.radians(5), R, SurfaceSpec(mu1=math.tan(math.radians(10)), mu2=1.0))
        assert v.feasible
        assert v.margin == pytest.approx(math.radians(5), abs=1e-12)

    def test_leftward_mirror(self):
        p = ElasticaParams(0.6, 0, 1)
        a = friction_check(p, 0.3, R, SurfaceSpec())
        b = friction_check(p, math.pi - 0.3, LEFT, SurfaceSpec())
        assert a.margin == pytest.approx(b.margin, abs=1e-12)

    @given(st.floats(0.01, 0.95), st.floats(-3, 3), st.floats(0, 3), st.floats(0, 3))
    def test_monotone_in_mu(self, k, phi, mu, extra):
        p = ElasticaParams(k, 0, 1)
        lo = friction_check(p, phi, R, SurfaceSpec(mu1=mu, mu2=mu))
        hi = friction_check(p, phi, R, SurfaceSpec(mu1=mu + extra, mu2=mu + extra))
        assert hi.margin >= lo.margin
        if lo.feasible:
            assert hi.feasible


class TestPenetration:
    def test_translated_below(self):
        sh = stage3_shape(StageIIIConfig(L, 0.5, 0.7), Pose(0.0, SURF.y0), R, ST)
        assert not penetration_check(sh.translated(0, -1e-3 * L), SURF).feasible

    def test_tolerance(self):
        sh = stage3_shape(StageIIIConfig(L, 0.5, 0.7), Pose(0.0, SURF.y0), R, ST)
        assert penetration_check(sh.translated(0, -0.5e-9 * L), SURF).feasible

    def test_dense_resampling_oracle(self):
        verdicts = []
        for d in RollDirection:
            for k in (0.2, 0.5, 0.8):
                for f in (1.2, 2.0, 4.0):
                    for r in np.linspace(0.0, 1.4, 8):
                        sh = stage2_shape(StageIIConfig(d.tip_angle(r), k, f * L), Pose(0.0, SURF.y0), d, ST, 200)
                        dense = penetration_check(sh.resample(2000), SURF)
                        assert penetration_check(sh, SURF).feasible == dense.feasible
                        verdicts.append(dense.feasible)
        assert any(verdicts) and not all(verdicts)

    @given(st.floats(0.05, 0.9), st.floats(1, 8), st.floats(-1, 1), st.floats(-2, 2))
    @settings(max_examples=30)
    def test_translation_invariance(self, k, f, y, dx):
        sh = eval_shape(Pose(0, y, 0.4), ElasticaParams(k, 0.1, f * L), ST, 100)
        assert penetration_check(sh, SURF).feasible == penetration_check(sh.translated(dx, 0), SURF).feasible
        assert self_intersection_check(sh).feasible == self_intersection_check(sh.translated(dx, 0)).feasible


class TestSelfIntersection:
    def test_straight(self):
        assert self_intersection_check(eval_shape(Pose(), ElasticaParams(0, 0, 1), ST)).feasible

    def test_loop(self):
        # k near the upper bound with a rod longer than half a period forms a loop
        p = ElasticaParams(0.95, 0.0, 0.5 * L)
        sh = eval_shape(Pose(), p, ST, 200)
        assert brute_crossing(*sh.resample(2000).points().T)
        v = self_intersection_check(sh)
        assert not v.feasible and "cross" in v.detail

    @given(st.floats(0.02, 0.95), st.floats(0, 1), st.floats(0.3, 4.0))
    @settings(max_examples=60, deadline=None)
    def test_against_dense_oracle_and_mirror(self, k, q, f):
        p = ElasticaParams(k, q * f * L, f * L)
        sh = eval_shape(Pose(), p, ST, 120)
        dense = brute_crossing(*sh.resample(1200).points().T)
        coarse = not self_intersection_check(sh).feasible
        assert coarse == brute_crossing(sh.x, sh.y)
        assert coarse == dense
        mirror = eval_shape(Pose(), p, ST, 120)
        assert self_intersection_check(sh).feasible == self_intersection_check(
            type(sh)(mirror.s, mirror.x, -mirror.y, -mirror.phi, -mirror.kappa, p, Pose(), ST)
        ).feasible

    def test_needs_three_samples(self):
        with pytest.raises(ShapeError):
            self_intersection_check(eval_shape(Pose(), ElasticaParams(0.5, 0, 1), ST, 2))


class TestGrasp:
    def test_straight(self):
        sh = stage3_shape(StageIIIConfig(L, 0.5, 0.7), Pose(0.1, SURF.y0), R, ST)
        g = grasp_pose(sh)
        assert (g.x0, g.y0, g.phi0_base) == pytest.approx((0.1 + L, SURF.y0, 0.0))

    @given(st.floats(0.05, 0.95), st.floats(0, 1), st.floats(1, 8), st.floats(0, 1))
    @settings(max_examples=30)
    def test_resolution_invariant(self, k, q, f, frac):
        cfg = StageIIIConfig(frac * L, k, f * L)
        a = grasp_pose(stage3_shape(cfg, Pose(0.0, SURF.y0), R, ST, 200))
        b = grasp_pose(stage3_shape(cfg, Pose(0.0, SURF.y0), R, ST, 2000))
        assert math.hypot(a.x0 - b.x0, a.y0 - b.y0) <= 1e-6 * L
