"""Command-line interface.

Exit status: 0 success, 1 usage / I/O / validation error, 2 domain failure
(planning, fitting or simulation).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .characterize import FitError, ObservedShape, fit_elastica
from .config import ConfigError, ToolConfig, output_dir
from .controller import (
    CSV_COLUMNS,
    METRICS,
    aggregate_stats,
    format_stats,
    frames_csv,
    run_simulation,
)
from .elastica import ElasticaParams, Pose, ShapeError, StiffnessSpec, eval_shape
from .placement import StageIConfig
from .planner import PlanningError, PlanPath, plan_full
from .render import Curve, render_svg
from .scenarios import CORPUS_DROP, CORPUS_ROLL, generate_paths
from .serialize import read_points_csv, read_shape_csv, write_shape_csv

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _config(args) -> ToolConfig:
    return ToolConfig.load(args.config) if args.config else ToolConfig()


def _json_arg(text):
    """Inline JSON object or path to a JSON file."""
    t = text.strip()
    if t.startswith("{"):
        return json.loads(t)
    with open(t) as fh:
        return json.load(fh)


_START_KEYS = {"x0", "y0", "phi0_base", "k", "s0", "phase", "Ltilde", "z0", "theta0"}


def parse_start(d: dict, cfg: ToolConfig) -> StageIConfig:
    if not isinstance(d, dict):
        raise ConfigError("start must be a JSON object")
    unknown = set(d) - _START_KEYS
    if unknown:
        raise ConfigError(f"unknown start keys: {', '.join(sorted(unknown))}")
    if "s0" in d and "phase" in d:
        raise ConfigError("give either s0 or phase, not both")
    lt = float(d.get("Ltilde", 2.0 * cfg.stiffness.L))
    s0 = float(d["s0"]) if "s0" in d else float(d.get("phase", cfg.direction.phase)) * lt
    base = Pose(
        float(d.get("x0", 0.0)), float(d.get("y0", 0.0)), float(d.get("phi0_base", 0.0)),
        d.get("z0"), d.get("theta0"),
    )
    return StageIConfig(base, ElasticaParams(float(d.get("k", 0.0)), s0, lt))


# ----------------------------------------------------------------------------


def cmd_plan(args) -> int:
    cfg = _config(args)
    start = parse_start(_json_arg(args.start), cfg)
    try:
        path = plan_full(start, cfg.surface, cfg.direction, cfg.grid, cfg.stiffness)
    except PlanningError as exc:
        print(f"planning failed in stage {exc.stage.value}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    out = args.output
    if not os.path.isabs(out) and os.environ.get("DLOPLACE_OUTPUT_DIR"):
        out = os.path.join(output_dir("."), out)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    path.save(out)
    counts = path.stage_counts
    print(" ".join(f"stage {s}: {counts[s]}" for s in ("I", "II", "III")) + f" total: {len(path)}")
    return EXIT_OK


def _parse_fault(text):
    try:
        f, dx, dy = text.split(":")
        return int(f), (float(dx), float(dy))
    except ValueError as exc:
        raise UsageError(f"bad --fault {text!r}; expected FRAME:DX:DY") from exc


def cmd_simulate(args) -> int:
    cfg = _config(args)
    outdir = output_dir(args.output_dir)
    faults = dict(_parse_fault(f) for f in args.fault or [])
    if args.corpus:
        paths, skipped = generate_paths(
            args.corpus, cfg.controller.seed, cfg.stiffness, cfg.surface, cfg.grid, CORPUS_DROP, roll=CORPUS_ROLL
        )
        results = []
        os.makedirs(outdir, exist_ok=True)
        for i, p in enumerate(paths):
            sub = cfg.controller.__class__(**{**cfg.controller.to_dict(), "seed": cfg.controller.seed + i})
            r = run_simulation(p, sub, cfg.stiffness, cfg.surface)
            r.write(outdir, prefix=f"path{i:02d}")
            results.append(r)
        frames = [f for r in results for f in r.frames]
        st = aggregate_stats(frames)
        eps = cfg.controller.epsilon
        summary = {
            "paths": len(paths),
            "skipped_instances": skipped,
            "frames": len(frames),
            "epsilon": eps,
            "under_epsilon_rate": sum(f.error.weighted <= eps for f in frames) / len(frames),
            "replans": sum(r.replans for r in results),
            "success": all(r.success for r in results),
            "mean": {m: st[m][0] for m in METRICS},
            "std": {m: st[m][1] for m in METRICS},
            "median": {m: st[m][2] for m in METRICS},
        }
        with open(os.path.join(outdir, "corpus_summary.json"), "w") as fh:
            fh.write(json.dumps(summary, indent=1, sort_keys=True) + "\n")
        print(f"{len(paths)} paths, {len(frames)} frames, {summary['under_epsilon_rate']:.1%} under epsilon")
        print(format_stats({m: st[m] for m in METRICS}))
        return EXIT_OK if summary["success"] else EXIT_DOMAIN
    if not args.plan:
        raise UsageError("simulate needs --plan or --corpus")
    path = PlanPath.load(args.plan)
    r = run_simulation(path, cfg.controller, cfg.stiffness, cfg.surface, faults)
    r.write(outdir)
    print(f"{len(r.frames)} frames, {r.replans} replans, success={r.success}")
    print(format_stats({m: r.stats[m] for m in METRICS}))
    return EXIT_OK if r.success else EXIT_DOMAIN


def _parse_base(text):
    try:
        x, y, phi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --base {text!r}; expected X,Y,PHI") from exc
    return Pose(x, y, phi)


def cmd_fit(args) -> int:
    cfg = _config(args)
    pts, header = read_points_csv(args.points)
    if args.base:
        base = _parse_base(args.base)
    elif "base" in header:
        base = Pose.from_dict(header["base"])
    else:
        if len(pts) < 2:
            raise ShapeError("need at least 2 points to infer the base")
        d = pts[1] - pts[0]
        base = Pose(pts[0, 0], pts[0, 1], math.atan2(d[1], d[0]))
    L = float(header.get("L", cfg.stiffness.L))
    l = float(args.contact_length if args.contact_length is not None else header.get("contact_length", 0.0))
    obs = ObservedShape(pts, base, L)
    stiffness = StiffnessSpec(cfg.stiffness.EI, L)
    try:
        cs = fit_elastica(obs, stiffness, args.starts, contact_length=l)
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    text = json.dumps(cs.to_dict(), indent=1, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    b = cs.best
    print(
        f"best k={b.k:.6g} s0={b.s0:.6g} Ltilde={b.Ltilde:.6g} residual={cs.best_residual:.3g} m"
        + (" (degenerate)" if cs.degenerate else ""),
        file=sys.stderr if not args.output else sys.stdout,
    )
    return EXIT_OK


def dataset_grid(L, dk=0.005, dlt=None, k_stride=1, lt_stride=1, k_max=0.95):
    """(k, s0, Ltilde) labels of the dataset grid: k = i dk, Ltilde over [L, 8L], s0 in {Ltilde/4, 3 Ltilde/4}."""
    dlt = 0.02 * L if dlt is None else dlt
    nk = int(round(k_max / dk))
    nl = int(round(7.0 * L / dlt))
    for i in range(1, nk + 1, k_stride):
        k = i * dk
        for j in range(0, nl + 1, lt_stride):
            lt = L + j * dlt
            for q in (0.25, 0.75):
                yield k, q * lt, lt


def cmd_dataset_gen(args) -> int:
    cfg = _config(args)
    outdir = output_dir(args.output_dir)
    shapes_dir = os.path.join(outdir, "shapes")
    os.makedirs(shapes_dir, exist_ok=True)
    L = cfg.stiffness.L
    count = 0
    with open(os.path.join(outdir, "labels.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("id", "file", "k", "s0", "Ltilde", "phase"))
        for k, s0, lt in dataset_grid(L, cfg.grid.dk, cfg.grid.dLtilde, args.k_stride, args.lt_stride):
            count += 1
            name = f"shape_{count:06d}.csv"
            shape = eval_shape(Pose(), ElasticaParams(k, s0, lt), cfg.stiffness, args.samples)
            write_shape_csv(os.path.join(shapes_dir, name), shape)
            w.writerow((count, name, repr(k), repr(s0), repr(lt), repr(s0 / lt)))
    print(f"{count} shapes written to {outdir}")
    return EXIT_OK


def cmd_render(args) -> int:
    curves, y0 = [], None
    for path in args.inputs:
        if path.endswith(".json"):
            with open(path) as fh:
                d = json.load(fh)
            if "nodes" not in d:
                raise ConfigError(f"{path}: not a plan file")
            plan = PlanPath.from_dict(d)
            y0 = plan.surface.y0 if y0 is None else y0
            for i, shape in enumerate(plan.shapes()):
                curves.append(Curve(shape.points(), False, f"node {i} stage {plan.nodes[i].stage.value}"))
        else:
            try:
                shape = read_shape_csv(path)
                with open(path) as fh:
                    head = fh.readline()
                role = json.loads(head[1:]).get("role", "planned") if head.startswith("#") else "planned"
                curves.append(Curve(shape.points(), role in ("fitted", "observed"), os.path.basename(path)))
            except ShapeError:
                pts, _ = read_points_csv(path)
                curves.append(Curve(pts, True, os.path.basename(path)))
    if y0 is None:
        y0 = _config(args).surface.y0
    svg = render_svg(curves, y0)
    with open(args.output, "w") as fh:
        fh.write(svg)
    print(f"{len(curves)} curves rendered to {args.output}")
    return EXIT_OK


def cmd_stats(args) -> int:
    """Recompute mean/std/median from a frames CSV."""
    with open(args.frames) as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ConfigError("not a frames CSV")
    out = {}
    for m in METRICS + ("weighted",):
        v = np.array([float(r[m]) for r in rows])
        v = v[np.isfinite(v)]
        out[m] = (float(np.mean(v)), float(np.std(v, ddof=1)) if v.size > 1 else 0.0, float(np.median(v)))
    print(format_stats(out))
    return EXIT_OK


# ----------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="dloplace", description="Elastica-based DLO placement planning and shape control.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("plan", help="plan a three-stage placement")
    sp.add_argument("--config")
    sp.add_argument("--start", required=True, help="start pose and shape: JSON file or inline JSON object")
    sp.add_argument("--output", "-o", required=True)
    sp.set_defaults(func=cmd_plan)

    ss = sub.add_parser("simulate", help="run the closed-loop controller over a plan")
    ss.add_argument("--config")
    ss.add_argument("--plan")
    ss.add_argument("--corpus", type=int, default=0, help="simulate N generated paths instead of --plan")
    ss.add_argument("--fault", action="append", help="FRAME:DX:DY rigid disturbance (repeatable)")
    ss.add_argument("--output-dir", "-o", default="sim_out")
    ss.set_defaults(func=cmd_simulate)

    sf = sub.add_parser("fit", help="fit elastica parameters to an observed point list")
    sf.add_argument("points")
    sf.add_argument("--config")
    sf.add_argument("--output", "-o")
    sf.add_argument("--base", help="X,Y,PHI of the observed base (defaults to the file header)")
    sf.add_argument("--contact-length", type=float)
    sf.add_argument("--starts", type=int, default=6)
    sf.set_defaults(func=cmd_fit)

    sd = sub.add_parser("dataset-gen", help="export the (k, s0, Ltilde) shape dataset")
    sd.add_argument("--config")
    sd.add_argument("--output-dir", "-o", default="dataset")
    sd.add_argument("--samples", type=int, default=200)
    sd.add_argument("--k-stride", type=int, default=1)
    sd.add_argument("--lt-stride", type=int, default=1)
    sd.set_defaults(func=cmd_dataset_gen)

    sr = sub.add_parser("render", help="render plans or shapes to SVG")
    sr.add_argument("inputs", nargs="*")
    sr.add_argument("--config")
    sr.add_argument("--output", "-o", required=True)
    sr.set_defaults(func=cmd_render)

    st = sub.add_parser("stats", help="summary statistics of a frames CSV")
    st.add_argument("frames")
    st.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return EXIT_INPUT
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ShapeError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
