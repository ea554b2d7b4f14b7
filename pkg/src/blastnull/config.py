"""Scenario file loading.

Scenarios are TOML with typed keys grouped in fixed sections (schema in
docs/scenario_schema.md).  Unknown sections or keys are rejected so a
misspelled knob cannot silently fall back to a default.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Dict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .exceptions import ParameterError
from .harness import Scenario
from .signalmodel import PathSet

_SCHEMA: Dict[str, set] = {
    "waveform": {"duration", "center_frequency", "bandwidth", "sample_rate"},
    "model": {"fft_size"},
    "channel": {
        "preset",
        "n_paths",
        "decay",
        "delay_spread",
        "base_delay",
        "scattered_lag",
        "direct_amplitudes",
        "direct_delays",
        "scattered_amplitudes",
        "scattered_delays",
    },
    "levels": {"snr_db", "sdr_db"},
    "detection": {"detectors", "pfa"},
    "estimation": {
        "delay_knowledge",
        "est_paths",
        "calibration_snr_db",
        "convergence_tol",
        "max_inner_iters",
        "refine_resolution",
    },
    "run": {"trials", "seed", "batch_size"},
    "crossing": {"profile"},
}

_TOP_LEVEL = {"schema_version"} | set(_SCHEMA)


def _reject_unknown(data: Dict[str, Any]) -> None:
    for section, content in data.items():
        if section not in _TOP_LEVEL:
            raise ParameterError(f"unknown scenario section or key {section!r}")
        if section == "schema_version":
            continue
        if not isinstance(content, dict):
            raise ParameterError(f"scenario section {section!r} must be a table")
        for key in content:
            if key not in _SCHEMA[section]:
                raise ParameterError(f"unknown key {key!r} in scenario section [{section}]")


def _complex_pairs(raw, label: str) -> np.ndarray:
    try:
        pairs = np.asarray(raw, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError
    except (TypeError, ValueError):
        raise ParameterError(f"{label} must be a list of [re, im] pairs") from None
    return pairs[:, 0] + 1j * pairs[:, 1]


def _pathset_from(section: Dict[str, Any], prefix: str) -> PathSet:
    amps = _complex_pairs(section[f"{prefix}_amplitudes"], f"{prefix}_amplitudes")
    return PathSet(amps, np.asarray(section[f"{prefix}_delays"], dtype=float))


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """Build a Scenario from parsed TOML, validating every key."""
    _reject_unknown(data)
    version = data.get("schema_version", 1)
    if version != 1:
        raise ParameterError(f"unsupported scenario schema_version {version}")

    def section(name: str, required: bool = True) -> Dict[str, Any]:
        if name not in data:
            if required:
                raise ParameterError(f"scenario is missing required section [{name}]")
            return {}
        return data[name]

    wav = section("waveform")
    model = section("model")
    chan = section("channel")
    levels = section("levels")
    det = section("detection", required=False)
    est = section("estimation", required=False)
    run = section("run")
    crossing = section("crossing", required=False)

    kwargs: Dict[str, Any] = {}
    try:
        kwargs.update(
            duration=float(wav["duration"]),
            center_frequency=float(wav["center_frequency"]),
            bandwidth=float(wav["bandwidth"]),
            sample_rate=float(wav["sample_rate"]),
            fft_size=int(model["fft_size"]),
            snr_db=tuple(levels["snr_db"]),
            sdr_db=tuple(levels["sdr_db"]),
            trials=int(run["trials"]),
            seed=int(run["seed"]),
        )
    except KeyError as exc:
        raise ParameterError(f"scenario is missing required key {exc.args[0]!r}") from None

    if "preset" in chan:
        kwargs["preset"] = chan["preset"]
        for toml_key, field_name in (
            ("n_paths", "preset_paths"),
            ("decay", "preset_decay"),
            ("delay_spread", "preset_delay_spread"),
            ("base_delay", "preset_base_delay"),
            ("scattered_lag", "preset_scattered_lag"),
        ):
            if toml_key in chan:
                kwargs[field_name] = chan[toml_key]
    else:
        needed = {
            "direct_amplitudes",
            "direct_delays",
            "scattered_amplitudes",
            "scattered_delays",
        }
        if not needed <= set(chan):
            raise ParameterError(
                "channel section needs either 'preset' or explicit path sets "
                f"({sorted(needed)})"
            )
        kwargs["direct"] = _pathset_from(chan, "direct")
        kwargs["scattered"] = _pathset_from(chan, "scattered")

    if "detectors" in det:
        kwargs["detectors"] = tuple(det["detectors"])
    if "pfa" in det:
        kwargs["pfa"] = tuple(det["pfa"])

    for toml_key, field_name in (
        ("delay_knowledge", "delay_knowledge"),
        ("est_paths", "est_paths"),
        ("calibration_snr_db", "calibration_snr_db"),
        ("convergence_tol", "wrelax_tol"),
        ("max_inner_iters", "wrelax_max_iters"),
        ("refine_resolution", "wrelax_refine"),
    ):
        if toml_key in est:
            kwargs[field_name] = est[toml_key]

    if "batch_size" in run:
        kwargs["batch_size"] = int(run["batch_size"])
    if "profile" in crossing:
        kwargs["crossing_profile"] = tuple(crossing["profile"])

    return Scenario(**kwargs)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario TOML file."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParameterError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = tomllib.loads(raw.decode())
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ParameterError(f"cannot parse scenario file {path}: {exc}") from exc
    return scenario_from_dict(data)
