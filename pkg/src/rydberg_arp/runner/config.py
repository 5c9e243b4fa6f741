"""Experiment configuration: YAML documents with unit-suffixed keys.

See ``README.md`` for the full schema. Every frequency key ends in
``_mhz`` or ``_hz``, times in ``_us``, intensities in ``_mw_per_um2``.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from ..atomdata import (
    AtomDataError,
    CS_CALIBRATION,
    CouplingCalibration,
    HyperfineLevel,
    InteractionMap,
    LevelScheme,
    interaction_map,
    single_level_scheme,
    uniform_map,
)
from ..model import FULL, REDUCED
from ..optimizer import ANALYTIC_NAMES
from ..pulse import ArpParams, DcrabEnvelope, PulseError, PulseSchedule

GATE_QUBITS = {"CZ": 2, "CCZ": 3, "CCCZ": 4}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class RobustnessSpec:
    intensity_rel_max: float = 0.03
    detuning_rel_max: float = 0.01
    n_intensity: int = 7
    n_detuning: int = 7


@dataclass
class BlockadeSpec:
    distances_um: list[float] = field(default_factory=list)
    v_rr_mhz: list[float] = field(default_factory=list)


@dataclass
class NoiseSpec:
    fwhm_hz: list[float] = field(default_factory=lambda: [0.0, 10.0, 100.0, 1000.0])
    n_shots: int = 150
    dt_noise_us: float = 1e-3


@dataclass
class OptimizerSpec:
    max_evals: int = 600
    restarts: int = 2
    xatol: float = 1e-6
    fatol: float = 1e-9
    initial_step: float = 0.05
    super_iterations: int = 5
    tol: float = 1e-8
    fixed: list[str] = field(default_factory=list)


@dataclass
class ExperimentConfig:
    name: str
    gate: str
    model: str
    seed: int
    scheme: LevelScheme
    interactions: InteractionMap
    params: ArpParams
    envelope: DcrabEnvelope | None
    tol: float = 1e-9
    method: str = "dop853"
    trace_samples: int = 2000
    robustness: RobustnessSpec = field(default_factory=RobustnessSpec)
    blockade: BlockadeSpec = field(default_factory=BlockadeSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def k(self) -> int:
        return GATE_QUBITS[self.gate] - 1

    @property
    def schedule(self) -> PulseSchedule:
        return PulseSchedule(self.params, self.envelope)

    def digest(self) -> str:
        return config_digest(self.raw)

    def with_overrides(self, **sections: Any) -> "ExperimentConfig":
        """Rebuild from the raw document with top-level sections merged in.

        Within a merged section a ``None`` value removes the key.
        """
        raw = copy.deepcopy(self.raw)
        for key, value in sections.items():
            if isinstance(value, Mapping) and isinstance(raw.get(key), Mapping):
                merged = {**raw[key], **value}
                raw[key] = {k: v for k, v in merged.items() if v is not None}
            else:
                raw[key] = value
        return parse_config(raw)


def config_digest(raw: Mapping[str, Any]) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode()).hexdigest()


def _section(doc: Mapping, key: str, required: bool = True) -> dict:
    val = doc.get(key)
    if val is None:
        if required:
            raise ConfigError(f"missing section '{key}'")
        return {}
    if not isinstance(val, Mapping):
        raise ConfigError(f"section '{key}' must be a mapping")
    return dict(val)


def _take(sec: dict, key: str, where: str, default: Any = ..., kind=float):
    if key not in sec or sec[key] is None:
        if default is ...:
            raise ConfigError(f"missing key '{where}.{key}'")
        return default
    try:
        return kind(sec[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for '{where}.{key}': {sec[key]!r}") from exc


def _check_unknown(sec: Mapping, allowed: set[str], where: str) -> None:
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(f"unknown keys in '{where}': {sorted(extra)}")


_CAL_KEYS = {
    "c_omega_mhz_um2_per_mw": "c_omega",
    "c_delta1_mhz_um2_per_mw": "c_delta1",
    "c_deltar_mhz_um2_per_mw": "c_deltar",
    "gamma_e_mhz": "gamma_e",
    "gamma_r_mhz": "gamma_r",
    "delta_int_mhz": "delta_int",
    "c_pe1_um2_per_mw": "c_pe1",
    "c_per_um2_per_mw": "c_per",
    "qubit_splitting_mhz": "qubit_splitting",
}


def _scheme(doc: Mapping) -> LevelScheme:
    sec = _section(doc, "calibration", required=False)
    _check_unknown(sec, set(_CAL_KEYS) | {"preset", "hyperfine_levels", "synthetic_single_level",
                                          "consistency_tol"}, "calibration")
    preset = sec.get("preset", "cs_82s")
    if preset != "cs_82s":
        raise ConfigError(f"unknown calibration preset {preset!r}")
    try:
        preset_cal = CS_CALIBRATION
        if "delta_int_mhz" in sec:
            # the preset rescaled to the requested intermediate detuning
            preset_cal = CS_CALIBRATION.with_detuning(_take(sec, "delta_int_mhz", "calibration"))
        base = {f: getattr(preset_cal, f) for f in _CAL_KEYS.values()}
        # explicit Stark coefficients imply their own population coefficients
        if "c_delta1_mhz_um2_per_mw" in sec and "c_pe1_um2_per_mw" not in sec:
            base["c_pe1"] = None
        if "c_deltar_mhz_um2_per_mw" in sec and "c_per_um2_per_mw" not in sec:
            base["c_per"] = None
        for key, name in _CAL_KEYS.items():
            if key in sec:
                base[name] = _take(sec, key, "calibration", None)
        cal = CouplingCalibration(**base)
        if sec.get("synthetic_single_level"):
            return single_level_scheme(cal)
        levels = []
        for i, lv in enumerate(sec.get("hyperfine_levels") or []):
            where = f"calibration.hyperfine_levels[{i}]"
            levels.append(HyperfineLevel(
                (_take(lv, "f", where, kind=int), _take(lv, "mf", where, kind=int)),
                _take(lv, "energy_offset_mhz", where),
                _take(lv, "coeff_lower_mhz_per_sqrt_mw_per_um2", where),
                _take(lv, "coeff_upper_mhz_per_sqrt_mw_per_um2", where),
            ))
        return LevelScheme(cal, tuple(levels), _take(sec, "consistency_tol", "calibration", 0.01))
    except AtomDataError as exc:
        raise ConfigError(str(exc)) from exc


def _interactions(doc: Mapping, n_qubits: int) -> InteractionMap:
    sec = _section(doc, "interactions")
    _check_unknown(sec, {"geometry", "v_rr_mhz", "uniform_mhz", "c6_mhz_um6", "positions_um"}, "interactions")
    try:
        if "v_rr_mhz" in sec:
            vmap = interaction_map(sec["v_rr_mhz"])
        elif "uniform_mhz" in sec:
            vmap = uniform_map(n_qubits, _take(sec, "uniform_mhz", "interactions"))
        elif "c6_mhz_um6" in sec:
            vmap = interaction_map(c6=_take(sec, "c6_mhz_um6", "interactions"), positions=sec.get("positions_um"))
        else:
            raise ConfigError("interactions need 'v_rr_mhz', 'uniform_mhz' or 'c6_mhz_um6' + 'positions_um'")
    except AtomDataError as exc:
        raise ConfigError(str(exc)) from exc
    if vmap.n_atoms != n_qubits:
        raise ConfigError(f"gate needs {n_qubits} atoms, interaction map has {vmap.n_atoms}")
    return vmap


def _pulse(doc: Mapping, scheme: LevelScheme) -> tuple[ArpParams, DcrabEnvelope | None]:
    sec = _section(doc, "pulse")
    _check_unknown(sec, {"t1_us", "t2_us", "t1_over_tau1", "t2_over_tau2", "delta_r1_mhz", "delta_r2_mhz",
                         "i1_mw_per_um2", "omega0_mhz", "ir_mw_per_um2", "dcrab"}, "pulse")
    ir = _take(sec, "ir_mw_per_um2", "pulse")
    if "omega0_mhz" in sec:
        omega0 = _take(sec, "omega0_mhz", "pulse")
    else:
        i1 = _take(sec, "i1_mw_per_um2", "pulse")
        if i1 < 0 or ir < 0:
            raise ConfigError("intensities must be non-negative")
        omega0 = scheme.calibration.c_omega * np.sqrt(i1 * ir)
    try:
        params = ArpParams.from_ratios(
            _take(sec, "t1_us", "pulse"), _take(sec, "t2_us", "pulse"),
            _take(sec, "t1_over_tau1", "pulse"), _take(sec, "t2_over_tau2", "pulse"),
            _take(sec, "delta_r1_mhz", "pulse"), _take(sec, "delta_r2_mhz", "pulse"), omega0, ir,
        )
        env = None
        if sec.get("dcrab"):
            d = sec["dcrab"]
            env = DcrabEnvelope(tuple(d["a"]), tuple(d["b"]), tuple(d["r"]))
    except (PulseError, KeyError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid pulse section: {exc}") from exc
    return params, env


def _spec(cls, doc: Mapping, key: str):
    sec = _section(doc, key, required=False)
    allowed = set(cls.__dataclass_fields__)
    _check_unknown(sec, allowed, key)
    defaults = cls()
    for name, value in sec.items():
        want = type(getattr(defaults, name))
        try:
            if want is list:
                if not isinstance(value, (list, tuple)):
                    raise TypeError("expected a list")
                sec[name] = [str(v) if name == "fixed" else float(v) for v in value]
            elif want is int and not isinstance(value, bool) and float(value) == int(value):
                sec[name] = int(value)
            else:
                sec[name] = want(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for '{key}.{name}': {value!r}") from exc
    return cls(**sec)


def parse_config(doc: Mapping[str, Any]) -> ExperimentConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("configuration must be a mapping")
    _check_unknown(doc, {"name", "gate", "model", "seed", "calibration", "interactions", "pulse", "integrator",
                         "robustness", "blockade", "noise", "optimizer"}, "<root>")
    gate = str(doc.get("gate", "CCZ")).upper()
    if gate not in GATE_QUBITS:
        raise ConfigError(f"gate must be one of {sorted(GATE_QUBITS)}")
    kind = str(doc.get("model", REDUCED)).lower()
    if kind not in (REDUCED, FULL):
        raise ConfigError("model must be 'reduced' or 'full'")
    scheme = _scheme(doc)
    if kind == FULL and not scheme.resolved:
        raise ConfigError("the full model needs hyperfine levels or synthetic_single_level")
    vmap = _interactions(doc, GATE_QUBITS[gate])
    params, env = _pulse(doc, scheme)
    integ = _section(doc, "integrator", required=False)
    _check_unknown(integ, {"tol", "method", "trace_samples"}, "integrator")
    method = integ.get("method", "dop853")
    if method not in ("dop853", "dopri5"):
        raise ConfigError("integrator.method must be 'dop853' or 'dopri5'")
    tol = _take(integ, "tol", "integrator", 1e-9)
    if not tol > 0:
        raise ConfigError("integrator.tol must be positive")
    blockade = _spec(BlockadeSpec, doc, "blockade")
    if len(blockade.distances_um) != len(blockade.v_rr_mhz):
        raise ConfigError("blockade.distances_um and blockade.v_rr_mhz must have equal length")
    noise = _spec(NoiseSpec, doc, "noise")
    if noise.n_shots < 2 or any(f < 0 for f in noise.fwhm_hz):
        raise ConfigError("noise needs n_shots >= 2 and non-negative linewidths")
    opt = _spec(OptimizerSpec, doc, "optimizer")
    unknown = set(opt.fixed) - set(ANALYTIC_NAMES)
    if unknown:
        raise ConfigError(f"optimizer.fixed names unknown parameters {sorted(unknown)}")
    rob = _spec(RobustnessSpec, doc, "robustness")
    if rob.n_intensity < 2 or rob.n_detuning < 2:
        raise ConfigError("robustness grid needs at least two points per axis")
    return ExperimentConfig(
        name=str(doc.get("name", "experiment")),
        gate=gate,
        model=kind,
        seed=int(doc.get("seed", 0)),
        scheme=scheme,
        interactions=vmap,
        params=params,
        envelope=env,
        tol=tol,
        method=method,
        trace_samples=int(integ.get("trace_samples", 2000)),
        robustness=rob,
        blockade=blockade,
        noise=noise,
        optimizer=opt,
        raw=json.loads(json.dumps(dict(doc), default=float)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a YAML document from *path* or a packaged config name such as ``fig2``."""
    p = Path(path)
    try:
        if p.exists():
            text = p.read_text()
        else:
            name = p.name if p.suffix else f"{p.name}.yaml"
            res = resources.files("rydberg_arp.configs") / name
            if not res.is_file():
                raise ConfigError(f"configuration file not found: {path}")
            text = res.read_text()
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(doc)


def packaged_configs() -> list[str]:
    return sorted(r.name[:-5] for r in resources.files("rydberg_arp.configs").iterdir() if r.name.endswith(".yaml"))
