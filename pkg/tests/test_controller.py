import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dloplace.characterize import AccuracyError, synthesize_observation
from dloplace.controller import (
    ControllerConfig,
    Decision,
    FrameRecord,
    aggregate_stats,
    controller_step,
    format_stats,
    run_simulation,
)
from dloplace.planner import Stage

L = 0.3
SIGMA = 0.003 * L


def observe(node, stiffness, sigma=0.0, seed=0, dx=0.0, dy=0.0, n=50):
    truth = node.shape(stiffness).resample(n).translated(dx, dy)
    return synthesize_observation(truth, sigma, seed)


def fake_frame(e):
    err = AccuracyError(e, e, e, e, (1.0, 0.0, 0.0))
    return FrameRecord(0, None, None, None, err, Decision.CONTINUE)


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [{"epsilon": 0}, {"fps": 0}, {"noise_sigma": -1}, {"obs_points": 7}, {"weights": (1, 2)}, {"weights": (1, -1, 0)}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ControllerConfig(**kw)


@pytest.fixture(scope="module")
def nodes(short_path):
    """First node of each stage and the fully placed final node."""
    by = {}
    for nd in short_path.nodes:
        by.setdefault(nd.stage, nd)
    by["last"] = short_path.nodes[-1]
    return by


class TestStep:
    @pytest.mark.parametrize("which", [Stage.I, Stage.II, Stage.III, "last"])
    def test_exact_continue(self, nodes, stiffness, which):
        nd = nodes[which]
        rec = controller_step(nd, observe(nd, stiffness), ControllerConfig(), stiffness)
        assert rec.decision is Decision.CONTINUE
        assert rec.error.shape_err <= 1e-6 * L

    def test_fully_placed_elastica_zero(self, nodes, stiffness):
        nd = nodes["last"]
        assert nd.stage is Stage.III and nd.l == pytest.approx(L)
        rec = controller_step(nd, observe(nd, stiffness, SIGMA, 1), ControllerConfig(), stiffness)
        assert rec.error.elastica_err == 0.0

    def test_displacement_recovers(self, nodes, stiffness):
        for nd in list(nodes.values()):
            rec = controller_step(nd, observe(nd, stiffness, dy=0.05 * L), ControllerConfig(), stiffness)
            assert rec.decision is Decision.RECOVERY

    def test_huge_epsilon(self, nodes, stiffness):
        cfg = ControllerConfig(epsilon=1e12)
        for nd in nodes.values():
            rec = controller_step(nd, observe(nd, stiffness, 0.005 * L, 3, 0.1 * L), cfg, stiffness)
            assert rec.decision is Decision.CONTINUE

    @given(st.floats(0.0, 0.2), st.floats(0.2, 5.0))
    @settings(max_examples=25, deadline=None)
    def test_decision_table(self, nodes, stiffness, delta, scale):
        nd = nodes[Stage.II]
        obs = observe(nd, stiffness, dx=delta * L)
        e = controller_step(nd, obs, ControllerConfig(epsilon=1e12), stiffness).error.weighted
        if e <= 0 or not math.isfinite(e):
            return
        eps = e * scale
        rec = controller_step(nd, obs, ControllerConfig(epsilon=eps), stiffness)
        assert rec.error.weighted == e
        assert rec.decision is (Decision.CONTINUE if e <= eps else Decision.RECOVERY)


class TestSimulation:
    def test_noiseless(self, short_path, stiffness):
        r = run_simulation(short_path, ControllerConfig())
        assert r.replans == 0 and r.success
        assert len(r.frames) == len(short_path)
        assert r.stats["shape_err"][0] <= 1e-6 * L
        assert [f.index for f in r.frames] == list(range(len(r.frames)))
        assert r.frames[3].time == pytest.approx(3 / 7.0)

    def test_noisy_no_replans(self, nominal_paths):
        """Calibrated noise alone never triggers a replan, including the last, barely free frames."""
        for i, p in enumerate(nominal_paths[:2]):
            r = run_simulation(p, ControllerConfig(noise_sigma=SIGMA, seed=i))
            assert r.replans == 0 and r.success

    def test_fault(self, short_path):
        r = run_simulation(short_path, ControllerConfig(), faults={10: (0.0, 0.1 * L)})
        rec = [f.index for f in r.frames if f.decision is Decision.RECOVERY]
        assert rec == [10]
        assert r.replans == 1 and r.success
        assert r.diagnostics["replans"][0]["frame"] == 10

    def test_budget(self, short_path):
        faults = {i: (0.0, 0.1 * L) for i in range(0, 40)}
        r = run_simulation(short_path, ControllerConfig(max_replans=2), faults=faults)
        assert not r.success and r.replans == 2
        assert r.diagnostics["reason"] == "replan budget exhausted"

    def test_deterministic(self, short_path):
        cfg = ControllerConfig(noise_sigma=SIGMA, seed=4)
        a, b = run_simulation(short_path, cfg), run_simulation(short_path, cfg)
        assert a.csv_text() == b.csv_text() and a.summary() == b.summary()

    def test_noise_monotone(self, short_path):
        """Run-mean shape error at 2 sigma vs sigma over matched seeds."""
        ok = 0
        for seed in range(20):
            lo = run_simulation(short_path, ControllerConfig(noise_sigma=0.5 * SIGMA, seed=seed))
            hi = run_simulation(short_path, ControllerConfig(noise_sigma=SIGMA, seed=seed))
            ok += hi.stats["shape_err"][0] >= lo.stats["shape_err"][0]
        assert ok >= 19

    def test_write(self, short_path, tmp_path):
        r = run_simulation(short_path, ControllerConfig(noise_sigma=SIGMA))
        r.write(tmp_path)
        rows = list(csv.DictReader(io.StringIO((tmp_path / "sim_frames.csv").read_text())))
        assert len(rows) == len(r.frames)
        st_ = aggregate_stats([fake_frame(float(row["shape_err"])) for row in rows])
        assert st_["shape_err"] == pytest.approx(r.stats["shape_err"], rel=1e-12)


class TestStats:
    def test_single(self):
        s = aggregate_stats([fake_frame(0.2)])
        assert s["shape_err"] == (0.2, 0.0, 0.2)

    def test_pair(self):
        s = aggregate_stats([fake_frame(1e-3), fake_frame(3e-3)])
        mu, sd, md = s["shape_err"]
        assert mu == pytest.approx(2e-3) and md == pytest.approx(2e-3)
        assert sd == pytest.approx(math.sqrt(2) * 1e-3)

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_stats([])

    @given(st.lists(st.floats(0, 1), min_size=2, max_size=30))
    def test_matches_numpy(self, v):
        mu, sd, md = aggregate_stats([fake_frame(x) for x in v])["tangent_err"]
        assert mu == pytest.approx(np.mean(v)) and md == pytest.approx(np.median(v))
        assert sd == pytest.approx(np.std(v, ddof=1), abs=1e-12)

    def test_format(self):
        text = format_stats(aggregate_stats([fake_frame(0.001), fake_frame(0.003)]))
        assert "shape_err: 0.0020 ± 0.0014 m (median 0.0020)" in text
