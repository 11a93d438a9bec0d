"""Experiment configuration: one INI-style file drives every stage.

The admissibility parameters (s0, eps0, s, k) appear exactly once, in the
[metric] and [calc] sections, so the exact-arithmetic gate and the physical
scenario cannot drift apart.  Unknown keys are rejected; probe tolerances may
only be loosened beyond their defaults when the section carries
``loosened = true``.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .metric import ConormalMetric, PiecewiseSpeed
from .wave import PulseSpec, SpongeSpec, WaveScenario


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "experiment": {"name", "out_dir", "seed"},
    "metric": {
        "kind", "k", "n", "s0", "amp", "c_bg", "core_radius",
        "c_left", "c_right", "c_smooth", "y_dependence",
    },
    "calc": {"eps0", "s", "batch"},
    "trace": {"x0", "direction", "policy", "t_span", "h"},
    "wave": {
        "x_lo", "x_hi", "duration", "nx", "cfl",
        "pulse_center", "pulse_width", "pulse_s_in", "pulse_seed",
        "sponge_cells", "sponge_strength", "store_stride",
    },
    "probe": {"oracle", "transmit_tol", "oracle_tol", "gain_floor", "margin", "loosened"},
    "commutant": {"frame", "delta", "eps", "beta", "F", "c0", "alpha", "C0", "dim", "grid"},
}

_PROBE_TOL_DEFAULTS = {"transmit_tol": 0.25, "oracle_tol": 0.25, "margin": 0.25}


def _rational(text: str) -> Fraction:
    return Fraction(text.strip())


def _compile_speed_expression(expr: str):
    """Compile a smooth background expression in x (numpy namespace only)."""
    import ast

    import numpy as np

    tree = ast.parse(expr, mode="eval")
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in ("np", "x"):
            raise ConfigError("c_smooth may reference only 'x' and 'np', found %r" % node.id)
        if isinstance(node, (ast.Import, ast.ImportFrom, ast.Lambda, ast.Subscript)):
            raise ConfigError("c_smooth must be a plain arithmetic expression")
    code = compile(tree, "<c_smooth>", "eval")

    def background(x):
        xs = np.asarray(x, float)
        val = eval(code, {"np": np, "x": xs, "__builtins__": {}})
        return np.broadcast_to(np.asarray(val, float), xs.shape).copy()

    return background


@dataclass
class ExperimentConfig:
    name: str
    out_dir: Path
    seed: int
    metric_kind: str
    k: int
    n: int
    s0: Fraction
    amp: float
    c_bg: float
    core_radius: float
    c_left: float
    c_right: float
    c_smooth: str | None
    eps0: Fraction
    s: Fraction
    trace_x0: float
    trace_direction: int
    trace_policy: str
    trace_t_span: float
    wave: dict
    probe: dict
    commutant: dict
    raw_text: str

    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()[:16]

    def build_metric(self):
        if self.metric_kind == "conormal":
            background = self.c_bg
            if self.c_smooth is not None:
                background = _compile_speed_expression(self.c_smooth)
            return ConormalMetric(
                k=self.k,
                n=self.n,
                s0=float(self.s0),
                amp=self.amp,
                c_bg=background,
                core_radius=self.core_radius,
            )
        if self.metric_kind == "jump":
            return PiecewiseSpeed(self.c_left, self.c_right)
        raise ConfigError("unknown metric kind %r" % (self.metric_kind,))

    def build_scenario(self) -> WaveScenario:
        w = self.wave
        source = PulseSpec(
            center=w["pulse_center"],
            width=w["pulse_width"],
            s_in=w["pulse_s_in"],
            seed=int(w["pulse_seed"]),
        )
        return WaveScenario(
            metric=self.build_metric(),
            x_lo=w["x_lo"],
            x_hi=w["x_hi"],
            duration=w["duration"],
            nx=int(w["nx"]),
            cfl=w["cfl"],
            source=source,
            sponge=SpongeSpec(cells=int(w["sponge_cells"]), strength=w["sponge_strength"]),
            store_stride=int(w["store_stride"]),
        )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file %s does not exist" % path)
    text = path.read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case: C0 and c0 are different constants
    cp.read_string(text)

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError("unknown section [%s]" % section)
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError("unknown key %r in section [%s]" % (key, section))
    if "metric" in cp and "y_dependence" in cp["metric"]:
        if cp["metric"]["y_dependence"].strip().lower() != "none":
            raise ConfigError(
                "y_dependence supports only 'none'; y-dependent singular"
                " amplitudes are limited to smooth modulation in code"
            )

    def get(section, key, default=None, cast=str):
        if section in cp and key in cp[section]:
            return cast(cp[section][key])
        if default is None:
            raise ConfigError("missing key %r in section [%s]" % (key, section))
        return default

    probe = {
        "oracle": get("probe", "oracle", "true").lower() in ("1", "true", "yes"),
        "transmit_tol": get("probe", "transmit_tol", 0.25, float),
        "oracle_tol": get("probe", "oracle_tol", 0.25, float),
        "gain_floor": get("probe", "gain_floor", 1.0, float),
        "margin": get("probe", "margin", 0.25, float),
    }
    loosened = get("probe", "loosened", "false").lower() in ("1", "true", "yes")
    for key, default in _PROBE_TOL_DEFAULTS.items():
        if probe[key] > default and not loosened:
            raise ConfigError(
                "tolerance %s=%g exceeds its default %g; set loosened=true to allow"
                % (key, probe[key], default)
            )

    wave = {
        "x_lo": get("wave", "x_lo", -4.0, float),
        "x_hi": get("wave", "x_hi", 4.0, float),
        "duration": get("wave", "duration", 6.6, float),
        "nx": get("wave", "nx", 2**14, int),
        "cfl": get("wave", "cfl", 0.9, float),
        "pulse_center": get("wave", "pulse_center", -2.2, float),
        "pulse_width": get("wave", "pulse_width", 0.06, float),
        "pulse_s_in": get("wave", "pulse_s_in", -0.5, float),
        "pulse_seed": get("wave", "pulse_seed", 1234, int),
        "sponge_cells": get("wave", "sponge_cells", 600, int),
        "sponge_strength": get("wave", "sponge_strength", 60.0, float),
        "store_stride": get("wave", "store_stride", 16, int),
    }
    commutant = {
        "frame": get("commutant", "frame", "synthetic-hoelder"),
        "delta": get("commutant", "delta", 0.125, float),
        "eps": (
            float(cp["commutant"]["eps"])
            if "commutant" in cp and "eps" in cp["commutant"]
            else None
        ),
        "beta": get("commutant", "beta", 1.0, float),
        "F": get("commutant", "F", 8.0, float),
        "c0": get("commutant", "c0", 1.0, float),
        "alpha": get("commutant", "alpha", 0.5, float),
        "C0": get("commutant", "C0", 0.05, float),
        "dim": get("commutant", "dim", 3, int),
        "grid": get("commutant", "grid", 10000, int),
    }
    out_dir = Path(get("experiment", "out_dir", "out"))
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir
    return ExperimentConfig(
        name=get("experiment", "name", path.stem),
        out_dir=out_dir,
        seed=get("experiment", "seed", 1234, int),
        metric_kind=get("metric", "kind", "conormal"),
        k=get("metric", "k", 1, int),
        n=get("metric", "n", 2, int),
        s0=get("metric", "s0", Fraction(5, 2), _rational),
        amp=get("metric", "amp", 0.4, float),
        c_bg=get("metric", "c_bg", 1.0, float),
        core_radius=get("metric", "core_radius", 1.0, float),
        c_left=get("metric", "c_left", 1.0, float),
        c_right=get("metric", "c_right", 1.3, float),
        c_smooth=(
            cp["metric"]["c_smooth"].strip()
            if "metric" in cp and "c_smooth" in cp["metric"]
            else None
        ),
        eps0=get("calc", "eps0", Fraction(1, 20), _rational),
        s=get("calc", "s", Fraction(1, 2), _rational),
        trace_x0=get("trace", "x0", -2.2, float),
        trace_direction=get("trace", "direction", 1, int),
        trace_policy=get("trace", "policy", "tree"),
        trace_t_span=get("trace", "t_span", 6.6, float),
        wave=wave,
        probe=probe,
        commutant=commutant,
        raw_text=text,
    )
