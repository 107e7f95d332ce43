"""Randomized placement instances and simulation corpora."""

from __future__ import annotations

import math

import numpy as np

from .elastica import Pose, StiffnessSpec
from .placement import RollDirection, StageIConfig, SurfaceSpec
from .planner import GridSpec, PlanningError, plan_full

# Simulation corpus: shallow drops and moderate rolls keep paths short
# (about 45 frames each, so 22 paths give roughly a thousand frames).
CORPUS_PATHS = 22
CORPUS_DROP = (0.01, 0.03)
CORPUS_ROLL = (10.0, 40.0)


def random_start(
    rng: np.random.Generator,
    L: float,
    direction: RollDirection,
    drop=(0.05, 0.15),
    surface_y: float = 0.0,
    grid: GridSpec | None = None,
    roll=(15.0, 75.0),
) -> StageIConfig:
    """Curved rod hanging tip-down above the surface, s0 at the direction's inflection.

    ``roll`` is the range of the tip roll angle in degrees. Sampled values are snapped to the planner lattice when ``grid`` is given.
    """
    h = rng.uniform(*drop)
    roll = math.radians(rng.uniform(*roll))
    k = rng.uniform(0.3, 0.8)
    lt = L * rng.uniform(1.6, 3.0)
    x = rng.uniform(-0.5, 0.5) * L
    if grid is not None:
        k = round(k / grid.dk) * grid.dk
        lt = L + round((lt - L) / grid.dLtilde) * grid.dLtilde
        roll = round(roll / grid.dphi) * grid.dphi
    return StageIConfig(Pose(x, surface_y + h, direction.tip_angle(roll)), direction.params(k, lt))


def generate_paths(
    count: int,
    seed: int,
    stiffness: StiffnessSpec,
    surface: SurfaceSpec,
    grid: GridSpec,
    drop=(0.05, 0.15),
    direction: RollDirection | None = None,
    roll=(15.0, 75.0),
):
    """``count`` successfully planned paths from seeded random starts.

    Directions alternate unless fixed. Instances whose planning fails are
    skipped; returns (paths, skipped count).
    """
    rng = np.random.default_rng(seed)
    paths, skipped = [], 0
    while len(paths) < count:
        d = direction or (RollDirection.RIGHTWARD, RollDirection.LEFTWARD)[len(paths) % 2]
        start = random_start(rng, stiffness.L, d, drop, surface.y0, grid, roll)
        try:
            paths.append(plan_full(start, surface, d, grid, stiffness))
        except PlanningError:
            skipped += 1
            if skipped > 10 * count:
                raise
    return paths, skipped
