"""Acceptance suite: one pass/fail line per criterion, printed in the terminal summary."""

import json
import math
import time

import numpy as np
import pytest

from oracles import bfs_stage1_cost, coarse_grid

from dloplace import cli
from dloplace.characterize import fit_elastica, synthesize_observation
from dloplace.controller import ControllerConfig, Decision, aggregate_stats, format_stats, run_simulation
from dloplace.elastica import (
    ElasticaParams,
    Pose,
    StiffnessSpec,
    angular_frequency,
    eval_shape,
    hamiltonian_residual,
    integrate_adjoint,
)
from dloplace.placement import RollDirection, SurfaceSpec, friction_check
from dloplace.planner import GridSpec, Stage, plan_full, plan_stage1, revalidate
from dloplace.scenarios import CORPUS_DROP, CORPUS_PATHS, CORPUS_ROLL, generate_paths, random_start

L = 0.3
ST = StiffnessSpec(1.0, L)
R, LEFT = RollDirection.RIGHTWARD, RollDirection.LEFTWARD

REPORT = []


def report(n, ok, detail):
    REPORT.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


@pytest.fixture(scope="module")
def desk_paths():
    """Ten randomized desk-scale instances at mu = 0.5 with their default-grid plans."""
    surface = SurfaceSpec(mu1=0.5, mu2=0.5)
    grid = GridSpec.default(L)
    rng = np.random.default_rng(2024)
    out = []
    for i in range(10):
        d = (R, LEFT)[i % 2]
        start = random_start(rng, L, d, (0.05, 0.15), surface.y0, grid)
        t = time.perf_counter()
        path = plan_full(start, surface, d, grid, ST)
        out.append((start, path, time.perf_counter() - t))
    return surface, grid, out


def test_1_variational_structure():
    t = time.perf_counter()
    ham = eb = ode = 0.0
    for k in np.linspace(0.05, 0.95, 20):
        for q in (0.0, 0.125, 0.25, 0.75):
            p = ElasticaParams(float(k), q * 2 * L, 2 * L)
            base = Pose(0.1, 0.0, 1.0)
            a = eval_shape(base, p, ST, 1000)
            ham = max(ham, hamiltonian_residual(a))
            rec = integrate_adjoint(a)
            eb = max(eb, float(np.max(np.abs(rec.lambda_phi + ST.EI * a.kappa))) / (ST.EI * angular_frequency(p)))
            b = eval_shape(base, p, ST, 1000, method="ode")
            ode = max(ode, float(np.max(np.hypot(a.x - b.x, a.y - b.y))) / L)
    dt = time.perf_counter() - t
    ok = ham <= 1e-6 and eb <= 1e-6 and ode <= 1e-8 and dt < 10
    assert report(1, ok, f"H residual {ham:.2e} <= 1e-6, EB residual {eb:.2e} <= 1e-6 EI w, "
                         f"closed vs ODE {ode:.2e} <= 1e-8 L, {dt:.1f} s < 10 s")


def test_2_zero_curvature_exit(desk_paths):
    _, _, instances = desk_paths
    worst, checked = 0.0, 0
    for _, path, _ in instances:
        for nd in path.nodes:
            if nd.stage is Stage.I or nd.params.degenerate:
                continue
            sh = nd.shape(ST, path.n_samples)
            l = nd.l if nd.stage is Stage.III else 0.0
            if l >= L * (1 - 1e-12):
                continue
            kmax = 2 * nd.params.k * angular_frequency(nd.params)
            at = np.abs(sh.s - l) <= 1e-12 * L
            worst = max(worst, float(np.max(np.abs(sh.kappa[at]))) / kmax)
            checked += 1
    ok = worst <= 1e-9 and checked > 0
    assert report(2, ok, f"max |kappa|/(2 k w) at the contact boundary {worst:.2e} <= 1e-9 over {checked} nodes of 10 paths")


def test_3_friction_gate():
    dmu = 1e-3
    sweep = np.arange(0.0, 12.0 + dmu, dmu)
    ks = np.linspace(0.05, 0.9, 10)
    mus = np.linspace(0.1, 2.0, 10)
    flips_ok = mono_ok = verdict_ok = 0
    for k in ks:
        p = ElasticaParams(float(k), 0.0, 1.0)
        feas = [friction_check(p, R.contact_angle, R, SurfaceSpec(mu1=m, mu2=m)).feasible for m in sweep]
        dev = abs(math.remainder(friction_check(p, R.contact_angle, R, SurfaceSpec()).phi_axis - math.pi / 2, 2 * math.pi))
        mu_star = math.tan(dev)
        first = next(i for i, f in enumerate(feas) if f) if any(feas) else None
        for mu in mus:
            v = friction_check(p, R.contact_angle, R, SurfaceSpec(mu1=mu, mu2=mu)).feasible
            flips_ok += first is not None and abs(sweep[first] - mu_star) <= dmu
            mono_ok += all(feas[i] for i in range(len(sweep)) if sweep[i] >= mu) if v else True
            verdict_ok += v == (math.atan(mu) > dev) or abs(mu - mu_star) <= dmu
    n = len(ks) * len(mus)
    ok = flips_ok == n and mono_ok == n and verdict_ok == n
    assert report(3, ok, f"flip within one step ({dmu}) of tan|phi0 - alpha| on {flips_ok}/{n} pairs, "
                         f"verdict matches atan(mu) on {verdict_ok}/{n}, monotone in mu on {mono_ok}/{n}")


def test_4_planner_completeness(desk_paths):
    surface, grid, instances = desk_paths
    cg = coarse_grid(grid, L)
    bad, slow, mism, costs = [], 0.0, 0, []
    for i, (start, path, dt) in enumerate(instances):
        t = time.perf_counter()
        fails = revalidate(path)
        if fails or path.nodes[-1].stage is not Stage.III or abs(path.nodes[-1].l - L) > 1e-9 * L:
            bad.append(i)
        a = len(plan_stage1(start, surface, cg, ST, path.direction, 50)) - 1
        b = bfs_stage1_cost(start, surface, cg, ST, path.direction, 50)
        costs.append(a)
        mism += a != b
        slow = max(slow, dt + time.perf_counter() - t)
    ok = not bad and mism == 0 and slow < 60
    assert report(4, ok, f"10/10 planned, {10 - len(bad)}/10 revalidate with l = L, stage I cost = BFS on "
                         f"{10 - mism}/10 (costs {costs}), slowest {slow:.1f} s < 60 s")


def test_5_inverse_fit_round_trip():
    labels = list(cli.dataset_grid(L))
    ks = sorted({k for k, _, _ in labels})[::10]
    sub = [lab for lab in labels if lab[0] in set(ks)]
    good = 0
    for k, s0, lt in sub:
        p = ElasticaParams(k, s0, lt)
        cs = fit_elastica(synthesize_observation(eval_shape(Pose(), p, ST, 50), 0.0), ST, 4)
        b = cs.best
        dq = abs(b.phase - p.phase) % 1.0
        good += (
            cs.best_residual <= 1e-6 * L
            and abs(b.k - k) <= 0.005 + 1e-12
            and abs(b.Ltilde - lt) <= 0.02 * L + 1e-12
            and min(dq, 1 - dq) <= 0.02
        )
    rate = good / len(sub)
    # constructed multi-valued instance (found by a grid scan for near-coincident shapes)
    truth = ElasticaParams(0.47, 0.68 * 6.76 * L, 6.76 * L)
    cs = fit_elastica(synthesize_observation(eval_shape(Pose(), truth, ST, 50), 0.0), ST, 6)
    valid = [c for c, r in cs.candidates if r <= 1e-3 * L and not c.degenerate]
    ok = rate >= 0.99 and len(valid) >= 2
    assert report(5, ok, f"{good}/{len(sub)} = {rate:.2%} within one cell (>= 99%); "
                         f"multi-valued instance has {len(valid)} candidates <= 1e-3 L (>= 2)")


def test_6_controller_corpus():
    t = time.perf_counter()
    surface, grid = SurfaceSpec(), GridSpec.default(L)
    paths, _ = generate_paths(CORPUS_PATHS, 0, ST, surface, grid, CORPUS_DROP, roll=CORPUS_ROLL)
    frames = []
    for i, p in enumerate(paths):
        frames += run_simulation(p, ControllerConfig(noise_sigma=0.003 * L, seed=i)).frames
    dt = time.perf_counter() - t
    eps = ControllerConfig().epsilon
    rate = sum(f.error.weighted <= eps for f in frames) / len(frames)
    st = aggregate_stats(frames)
    mean = st["shape_err"][0]
    text = format_stats({m: st[m] for m in ("shape_err", "elastica_err", "tangent_err")})
    REPORT.append("  corpus statistics (mean ± std (median)):\n    " + text.replace("\n", "\n    "))
    ok = rate >= 0.9 and 0.0005 <= mean <= 0.01 and dt < 300 and "±" in text
    assert report(6, ok, f"{len(paths)} paths, {len(frames)} frames, {rate:.1%} under eps = {eps} (>= 90%), "
                         f"shape mean {mean:.2e} m in [5e-4, 1e-2], {dt:.0f} s < 300 s")


def test_7_fault_injection(desk_paths):
    _, _, instances = desk_paths
    path = instances[0][1]
    mid = len(path) // 2
    r = run_simulation(path, ControllerConfig(), faults={mid: (0.0, 0.1 * L)})
    rec = [f.index for f in r.frames if f.decision is Decision.RECOVERY]
    ok = rec == [mid] and r.success
    assert report(7, ok, f"0.1 L displacement at frame {mid}: recoveries at {rec}, success={r.success}")


def test_8_determinism(tmp_path):
    pts = eval_shape(Pose(), ElasticaParams(0.4, 0.3, 0.9), ST, 40)
    start = {"x0": -0.0565, "y0": 0.0202, "phi0_base": 0.6632, "k": 0.37, "s0": 0.219, "Ltilde": 0.876}

    def once(d):
        from dloplace.serialize import write_shape_csv

        d.mkdir()
        write_shape_csv(d / "obs.csv", pts)
        cfg = d / "cfg.json"
        cfg.write_text(json.dumps({"controller": {"noise_sigma": "0.003L", "seed": 5}}))
        coarse = d / "coarse.json"
        coarse.write_text(json.dumps({"grid": {"dk": 0.1, "dLtilde": "1L"}}))
        codes = [
            cli.main(["plan", "--config", str(cfg), "--start", json.dumps(start), "-o", str(d / "plan.json")]),
            cli.main(["simulate", "--config", str(cfg), "--plan", str(d / "plan.json"), "-o", str(d / "sim")]),
            cli.main(["fit", str(d / "obs.csv"), "-o", str(d / "fit.json")]),
            cli.main(["dataset-gen", "--config", str(coarse), "-o", str(d / "ds"), "--samples", "20"]),
        ]
        files = {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
        return codes, files

    ca, a = once(tmp_path / "a")
    cb, b = once(tmp_path / "b")
    same = sum(a[k] == b.get(k) for k in a)
    ok = ca == cb == [0, 0, 0, 0] and a.keys() == b.keys() and same == len(a)
    assert report(8, ok, f"{same}/{len(a)} output files byte-identical across repeated plan/simulate/fit/dataset-gen runs")
