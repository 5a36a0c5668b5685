"""Experiment config files, presets, sweep expansion, and result emission.

Config files are TOML: flat typed keys at the top level plus [model],
[method], and optional [sweep] sections. A `preset` key seeds every field
from a named built-in configuration; explicit keys override it. Unknown
keys are rejected with their full path. Sweep sections hold lists whose
Cartesian product defines the runs; each sweep point gets a derived seed
and its own output directory.

Outputs per run: errors.csv (time, err_observed, err_unobserved, err_total
at 17 significant digits, so reruns are byte-comparable), manifest.json
(atomically written; enough to reproduce the run), and optional SVG plots.
"""

from __future__ import annotations

import copy
import itertools
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .enkf import EnkfParams
from .errors import ConfigurationError
from .kse import KseParams
from .nse import NseParams
from .nudging import NudgingParams
from .rng import derive_seed
from .twin import ErrorRecord, TwinConfig, TwinResult, run_twin_experiment

CSV_HEADER = "time,err_observed,err_unobserved,err_total"

PRESETS: dict[str, dict] = {
    "kse-paper": {
        "master_seed": 1,
        "horizon": 100.0,
        "spin_up_time": 1000.0,
        "record_stride": 10,
        "model": {
            "type": "kse",
            "lam": 0.5,
            "domain_length": 32.0 * np.pi,
            "n": 256,
            "dt": 0.01,
        },
        "method": {
            "type": "nudging",
            "cutoff_m": 16,
            "sigma_o_sq": 0.0,
            "mu": 100.0,
            "v0": "zero",
        },
    },
    "nse-paper": {
        "master_seed": 1,
        "horizon": 50.0,
        "spin_up_time": 10000.0,
        "record_stride": 10,
        "model": {
            "type": "nse",
            "nu": 0.01,
            "forcing_amplitude": 50.0,
            "forcing_mode": [5, 5],
            "n": 128,
            "dt": 0.01,
        },
        "method": {
            "type": "nudging",
            "cutoff_m": 10,
            "sigma_o_sq": 0.0,
            "mu": 100.0,
            "v0": "projected-obs",
            "observed_variable": "streamfunction",
        },
    },
}

_TOP_KEYS = {
    "preset",
    "output_dir",
    "emit_plots",
    "master_seed",
    "horizon",
    "spin_up_time",
    "record_stride",
    "model",
    "method",
    "sweep",
}
_MODEL_KEYS = {
    "kse": {"type", "lam", "domain_length", "n", "dt"},
    "nse": {"type", "nu", "forcing_amplitude", "forcing_mode", "n", "dt"},
}
_METHOD_KEYS = {
    "nudging": {"type", "cutoff_m", "sigma_o_sq", "mu", "v0", "observed_variable"},
    "enkf": {
        "type",
        "cutoff_m",
        "sigma_o_sq",
        "members",
        "sigma_e_sq",
        "sigma_i_sq",
        "observed_variable",
    },
    "free-run": {"type", "cutoff_m", "sigma_o_sq", "observed_variable"},
}
_SWEEP_PATHS = {
    "mu": ("method", "mu"),
    "members": ("method", "members"),
    "sigma_i_sq": ("method", "sigma_i_sq"),
    "sigma_e_sq": ("method", "sigma_e_sq"),
    "sigma_o_sq": ("method", "sigma_o_sq"),
}


@dataclass
class ExperimentConfig:
    raw: dict
    twin: TwinConfig
    output_dir: str | None
    emit_plots: bool
    sweep: dict[str, list]


def _fail(path: str, message: str) -> None:
    raise ConfigurationError(f"{path}: {message}")


def _require_number(value, path: str, minimum: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(path, f"must be >= {minimum}, got {value}")
    return float(value)


def _require_int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(path, f"must be >= {minimum}, got {value}")
    return value


def _require_str(value, path: str, choices=None) -> str:
    if not isinstance(value, str):
        _fail(path, f"expected a string, got {value!r}")
    if choices is not None and value not in choices:
        _fail(path, f"must be one of {sorted(choices)}, got {value!r}")
    return value


def _check_keys(table: dict, allowed: set[str], path: str) -> None:
    for key in table:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown key")


def _merge_with_preset(preset: dict, user: dict) -> dict:
    merged = copy.deepcopy(preset)
    for key, value in user.items():
        if key in ("model", "method") and isinstance(value, dict):
            base = merged.get(key, {})
            # switching type replaces the whole section instead of merging
            if value.get("type", base.get("type")) != base.get("type"):
                merged[key] = copy.deepcopy(value)
            else:
                merged[key] = {**base, **copy.deepcopy(value)}
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_config(data: dict) -> dict:
    """Merge a parsed config document with its preset and validate keys."""
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a table")
    _check_keys(data, _TOP_KEYS, "")
    preset_name = data.get("preset")
    if preset_name is not None:
        _require_str(preset_name, "preset", choices=set(PRESETS))
        merged = _merge_with_preset(PRESETS[preset_name], {k: v for k, v in data.items() if k != "preset"})
    else:
        merged = copy.deepcopy(data)
    if "model" not in merged:
        _fail("model", "missing section (set it or use a preset)")
    if "method" not in merged:
        _fail("method", "missing section (set it or use a preset)")
    _validate_resolved(merged)
    return merged


def _validate_resolved(raw: dict) -> None:
    model = raw["model"]
    if not isinstance(model, dict):
        _fail("model", "expected a table")
    model_type = _require_str(model.get("type"), "model.type", choices=set(_MODEL_KEYS))
    _check_keys(model, _MODEL_KEYS[model_type], "model")

    method = raw["method"]
    if not isinstance(method, dict):
        _fail("method", "expected a table")
    method_type = _require_str(method.get("type"), "method.type", choices=set(_METHOD_KEYS))
    _check_keys(method, _METHOD_KEYS[method_type], "method")

    sweep = raw.get("sweep", {})
    if not isinstance(sweep, dict):
        _fail("sweep", "expected a table of lists")
    _check_keys(sweep, set(_SWEEP_PATHS), "sweep")
    for key, values in sweep.items():
        if not isinstance(values, list) or not values:
            _fail(f"sweep.{key}", "expected a non-empty list")
        section, leaf = _SWEEP_PATHS[key]
        if leaf not in _METHOD_KEYS[method_type]:
            _fail(f"sweep.{key}", f"not a parameter of method {method_type!r}")
        for i, v in enumerate(values):
            if key == "members":
                _require_int(v, f"sweep.{key}[{i}]", minimum=2)
            else:
                _require_number(v, f"sweep.{key}[{i}]", minimum=0.0)

    if "output_dir" in raw:
        _require_str(raw["output_dir"], "output_dir")
    if "emit_plots" in raw and not isinstance(raw["emit_plots"], bool):
        _fail("emit_plots", f"expected a boolean, got {raw['emit_plots']!r}")


def build_twin(raw: dict, master_seed: int | None = None) -> TwinConfig:
    model = raw["model"]
    method = raw["method"]
    model_type = model["type"]
    method_type = method["type"]

    if model_type == "kse":
        kse_params = KseParams(
            lam=_require_number(model.get("lam", 0.5), "model.lam"),
            domain_length=_require_number(
                model.get("domain_length", 32.0 * np.pi), "model.domain_length", minimum=0.0
            ),
            n=_require_int(model.get("n", 256), "model.n", minimum=4),
            dt=_require_number(model.get("dt", 0.01), "model.dt"),
        )
        nse_params = None
    else:
        mode = model.get("forcing_mode", [5, 5])
        if (
            not isinstance(mode, (list, tuple))
            or len(mode) != 2
            or any(isinstance(m, bool) or not isinstance(m, int) for m in mode)
        ):
            _fail("model.forcing_mode", f"expected a pair of integers, got {mode!r}")
        kse_params = None
        nse_params = NseParams(
            nu=_require_number(model.get("nu", 0.01), "model.nu"),
            forcing_amplitude=_require_number(
                model.get("forcing_amplitude", 50.0), "model.forcing_amplitude"
            ),
            forcing_mode=(mode[0], mode[1]),
            n=_require_int(model.get("n", 128), "model.n", minimum=4),
            dt=_require_number(model.get("dt", 0.01), "model.dt"),
        )

    nudging_params = None
    enkf_params = None
    if method_type == "nudging":
        nudging_params = NudgingParams(
            mu=_require_number(method.get("mu"), "method.mu", minimum=0.0),
            v0_mode=_require_str(method.get("v0", "zero"), "method.v0"),
        )
    elif method_type == "enkf":
        enkf_params = EnkfParams(
            members=_require_int(method.get("members"), "method.members", minimum=2),
            sigma_e_sq=_require_number(method.get("sigma_e_sq"), "method.sigma_e_sq", minimum=0.0),
            sigma_i_sq=_require_number(method.get("sigma_i_sq"), "method.sigma_i_sq", minimum=0.0),
        )

    seed = master_seed if master_seed is not None else raw.get("master_seed", 1)
    return TwinConfig(
        model=model_type,
        method=method_type,
        cutoff_m=_require_int(method.get("cutoff_m"), "method.cutoff_m", minimum=1),
        kse_params=kse_params,
        nse_params=nse_params,
        sigma_o_sq=_require_number(method.get("sigma_o_sq", 0.0), "method.sigma_o_sq", minimum=0.0),
        nudging=nudging_params,
        enkf=enkf_params,
        spin_up_time=_require_number(raw.get("spin_up_time", 1000.0), "spin_up_time", minimum=0.0),
        horizon=_require_number(raw.get("horizon", 100.0), "horizon"),
        record_stride=_require_int(raw.get("record_stride", 10), "record_stride", minimum=1),
        master_seed=_require_int(seed, "master_seed"),
        observed_variable=_require_str(
            method.get("observed_variable", "streamfunction"), "method.observed_variable"
        ),
    )


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: malformed TOML ({exc})") from exc
    raw = resolve_config(data)
    twin = build_twin(raw)
    return ExperimentConfig(
        raw=raw,
        twin=twin,
        output_dir=raw.get("output_dir"),
        emit_plots=bool(raw.get("emit_plots", False)),
        sweep={k: list(v) for k, v in raw.get("sweep", {}).items()},
    )


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def expand_sweep(cfg: ExperimentConfig, master_seed: int | None = None) -> list[tuple[str, TwinConfig]]:
    """Cartesian-product expansion; each point gets a label and derived seed."""
    base_seed = master_seed if master_seed is not None else cfg.twin.master_seed
    if not cfg.sweep:
        return [("run", build_twin(cfg.raw, master_seed=base_seed))]
    keys = sorted(cfg.sweep)
    points: list[tuple[str, TwinConfig]] = []
    for combo in itertools.product(*(cfg.sweep[k] for k in keys)):
        raw = copy.deepcopy(cfg.raw)
        parts = []
        for key, value in zip(keys, combo):
            section, leaf = _SWEEP_PATHS[key]
            raw[section][leaf] = value
            parts.append(f"{key}={_format_value(value)}")
        label = "_".join(parts)
        points.append((label, build_twin(raw, master_seed=derive_seed(base_seed, label))))
    return points


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_csv(records: list[ErrorRecord], path: str | Path) -> None:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.time:.17g},{r.err_observed:.17g},{r.err_unobserved:.17g},{r.err_total:.17g}"
        )
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def write_manifest(manifest: dict, path: str | Path) -> None:
    _atomic_write_text(Path(path), json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run_and_emit(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    master_seed: int | None = None,
    emit_plots: bool | None = None,
    allow_failures: bool = False,
) -> int:
    """Execute every sweep point, emit CSV/manifest (and optional SVG) files.

    Returns the process exit code: 0, or 2 if any point blew up and
    failures are not allowed.
    """
    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir or "runs")
    plots_wanted = cfg.emit_plots if emit_plots is None else emit_plots
    points = expand_sweep(cfg, master_seed=master_seed)

    all_records: dict[str, list[ErrorRecord]] = {}
    failed: list[str] = []
    for label, twin in points:
        result: TwinResult = run_twin_experiment(twin)
        point_dir = out / label
        point_dir.mkdir(parents=True, exist_ok=True)
        write_csv(result.records, point_dir / "errors.csv")
        write_manifest(result.manifest, point_dir / "manifest.json")
        if plots_wanted:
            from . import plots

            plots.error_plot(result.records, point_dir / "errors.svg", title=label)
        all_records[label] = result.records
        final = result.records[-1]
        print(
            f"{label}: {result.status} "
            f"(t={final.time:g}, total={final.err_total:.3e}, "
            f"run={result.manifest['timings_seconds']['assimilation']:.1f}s)"
        )
        if result.status != "completed":
            failed.append(label)

    if plots_wanted and len(points) > 1:
        from . import plots

        plots.comparison_plot(all_records, out / "comparison.svg")

    if failed and not allow_failures:
        print(f"{len(failed)} run(s) failed: {', '.join(failed)}")
        return 2
    return 0
