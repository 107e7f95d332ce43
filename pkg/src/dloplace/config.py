"""Tool configuration (JSON).

Lengths are meters. Grid lengths and the noise scale may also be given as
strings relative to the rod length, e.g. ``"0.01L"``; angles may be given as
``"2deg"``. Everything is resolved to absolute values on load, and
``to_dict`` echoes the resolved values.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

from .controller import ControllerConfig
from .elastica import StiffnessSpec
from .placement import RollDirection, SurfaceSpec
from .planner import GridSpec

ENV_SEED = "DLOPLACE_SEED"
ENV_OUTPUT_DIR = "DLOPLACE_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


_SECTIONS = {
    "stiffness": {"EI", "L"},
    "surface": {"y0", "alpha", "mu1", "mu2"},
    "grid": {"dx", "dy", "dz", "dphi", "dtheta", "dLtilde", "dk", "dl", "dphase", "max_expansions"},
    "controller": {"epsilon", "weights", "noise_sigma", "fps", "seed", "max_replans", "obs_points", "fit_starts"},
}
_TOP = set(_SECTIONS) | {"direction"}
_LENGTHS = {"dx", "dy", "dz", "dLtilde", "dl", "noise_sigma", "y0"}
_ANGLES = {"dphi", "dtheta", "alpha"}


def _resolve(name, value, L):
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number")
    if isinstance(value, (int, float)):
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{name}: expected a number or string, got {type(value).__name__}")
    text = value.strip().replace(" ", "")
    try:
        if text.endswith("L") and name in _LENGTHS:
            return float(text[:-1] or 1.0) * L
        if text.endswith("deg") and name in _ANGLES:
            return math.radians(float(text[:-3]))
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {value!r}") from exc


def _section(d, name):
    sub = d.get(name, {})
    if not isinstance(sub, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(sub) - _SECTIONS[name]
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(sorted(unknown))}")
    return sub


@dataclass
class ToolConfig:
    stiffness: StiffnessSpec = field(default_factory=lambda: StiffnessSpec(1.0, 0.3))
    surface: SurfaceSpec = field(default_factory=SurfaceSpec)
    grid: GridSpec | None = None
    controller: ControllerConfig | None = None
    direction: RollDirection = RollDirection.RIGHTWARD

    def __post_init__(self):
        L = self.stiffness.L
        if self.grid is None:
            self.grid = GridSpec.default(L)
        if self.controller is None:
            self.controller = ControllerConfig(noise_sigma=0.003 * L)

    @classmethod
    def from_dict(cls, d: dict, env=None) -> "ToolConfig":
        env = os.environ if env is None else env
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - _TOP
        if unknown:
            raise ConfigError(f"unknown top-level keys: {', '.join(sorted(unknown))}")
        try:
            st = _section(d, "stiffness")
            stiffness = StiffnessSpec(float(st.get("EI", 1.0)), float(st.get("L", 0.3)))
            L = stiffness.L
            sf = {k: float(_resolve(k, v, L)) for k, v in _section(d, "surface").items()}
            surface = SurfaceSpec(**sf)
            gr = {k: _resolve(k, v, L) for k, v in _section(d, "grid").items()}
            if "max_expansions" in gr:
                gr["max_expansions"] = int(gr["max_expansions"])
            grid = GridSpec.default(L, **gr)
            ct = dict(_section(d, "controller"))
            for k in ("epsilon", "noise_sigma", "fps"):
                if k in ct:
                    ct[k] = float(_resolve(k, ct[k], L))
            for k in ("seed", "max_replans", "obs_points", "fit_starts"):
                if k in ct:
                    if isinstance(ct[k], bool) or not isinstance(ct[k], int):
                        raise ConfigError(f"controller.{k}: expected an integer")
            if "weights" in ct and ct["weights"] is not None:
                ct["weights"] = tuple(ct["weights"])
            if env.get(ENV_SEED):
                try:
                    ct["seed"] = int(env[ENV_SEED])
                except ValueError as exc:
                    raise ConfigError(f"{ENV_SEED} must be an integer") from exc
            ct.setdefault("noise_sigma", 0.003 * L)
            controller = ControllerConfig(**ct)
            direction = RollDirection(d.get("direction", "rightward"))
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(stiffness, surface, grid, controller, direction)

    def to_dict(self) -> dict:
        g = self.grid.to_dict()
        return {
            "stiffness": {"EI": self.stiffness.EI, "L": self.stiffness.L},
            "surface": self.surface.to_dict(),
            "grid": g,
            "controller": self.controller.to_dict(),
            "direction": self.direction.value,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps() + "\n")

    @classmethod
    def load(cls, path, env=None) -> "ToolConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d, env)


def output_dir(default, env=None):
    env = os.environ if env is None else env
    return env.get(ENV_OUTPUT_DIR) or default
