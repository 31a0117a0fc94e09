"""YAML experiment configuration.

A config has a ``simulation`` section (resource grid, SNR sweep, channel
types) and a ``dataset`` section (split, vectorization and labeling). See
``configs/reference.yaml`` for the reference experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .channel_sim import ChannelProfile, SimConfig, profile_by_name
from .dataset import VectorMode
from .errors import ConfigurationError
from .labeling import LabelConvention, LabelScheme
from .srs import DEFAULT_ROOT

CHANNEL_MODES = ("independent", "trajectory")


@dataclass
class ExperimentConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    alpha: float = 0.9
    shuffle: bool = True
    mode: VectorMode = VectorMode.REIM
    scheme: LabelScheme = LabelScheme.SINGLE
    convention: LabelConvention = LabelConvention.SORTED
    seed: int = 0
    channel_mode: str = "independent"
    srs_root: int = DEFAULT_ROOT

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie strictly between 0 and 1, got {self.alpha}")
        if self.channel_mode not in CHANNEL_MODES:
            raise ConfigurationError(f"channel_mode must be one of {CHANNEL_MODES}")

    def to_dict(self) -> dict:
        s = self.sim
        return {
            "simulation": {
                "n_rb": s.n_rb,
                "n_sym": s.n_sym,
                "n_rx": s.n_rx,
                "comb": s.comb,
                "subcarrier_spacing_hz": s.subcarrier_spacing_hz,
                "slot_duration_s": s.slot_duration_s,
                "snr_grid_db": list(s.snr_grid_db),
                "n_slots_per_snr": s.n_slots_per_snr,
                "channel_mode": self.channel_mode,
                "srs_root": self.srs_root,
                "wcts": [p.to_dict() for p in s.wcts],
            },
            "dataset": {
                "alpha": self.alpha,
                "shuffle": self.shuffle,
                "mode": self.mode.value,
                "labeling": self.scheme.value,
                "label_convention": self.convention.value,
                "seed": self.seed,
            },
        }


def _snr_grid(value) -> list[float]:
    if isinstance(value, dict):
        try:
            start, stop = float(value["start"]), float(value["stop"])
        except KeyError as exc:
            raise ConfigurationError(f"snr_grid_db range needs {exc}") from None
        step = float(value.get("step", 1.0))
        if step <= 0:
            raise ConfigurationError("snr_grid_db step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    if isinstance(value, (list, tuple)):
        return [float(x) for x in value]
    raise ConfigurationError("snr_grid_db must be a list or a {start, stop, step} mapping")


def _profile(entry) -> ChannelProfile:
    if isinstance(entry, str):
        return profile_by_name(entry)
    if isinstance(entry, dict):
        return ChannelProfile.from_dict(entry)
    raise ConfigurationError(f"cannot interpret channel type entry {entry!r}")


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigurationError("config root must be a mapping")
    sim_d = dict(d.get("simulation") or {})
    ds_d = dict(d.get("dataset") or {})
    known_sim = {
        "n_rb", "n_sym", "n_rx", "comb", "subcarrier_spacing_hz", "slot_duration_s",
        "snr_grid_db", "n_slots_per_snr", "wcts", "channel_mode", "srs_root",
    }
    known_ds = {"alpha", "shuffle", "mode", "labeling", "label_convention", "seed"}
    for name, section, known in (("simulation", sim_d, known_sim), ("dataset", ds_d, known_ds)):
        unknown = set(section) - known
        if unknown:
            raise ConfigurationError(f"unknown {name} keys: {sorted(unknown)}")
    channel_mode = sim_d.pop("channel_mode", "independent")
    srs_root = int(sim_d.pop("srs_root", DEFAULT_ROOT))
    if "snr_grid_db" in sim_d:
        sim_d["snr_grid_db"] = _snr_grid(sim_d["snr_grid_db"])
    if "wcts" in sim_d:
        sim_d["wcts"] = [_profile(e) for e in sim_d["wcts"]]
    try:
        for key in ("n_rb", "n_sym", "n_rx", "comb", "n_slots_per_snr"):
            if key in sim_d:
                sim_d[key] = int(sim_d[key])
        sim = SimConfig(**sim_d)
        return ExperimentConfig(
            sim=sim,
            alpha=float(ds_d.get("alpha", 0.9)),
            shuffle=bool(ds_d.get("shuffle", True)),
            mode=VectorMode.parse(ds_d.get("mode", "reim")),
            scheme=LabelScheme.parse(ds_d.get("labeling", "single")),
            convention=LabelConvention.parse(ds_d.get("label_convention", "sorted")),
            seed=int(ds_d.get("seed", 0)),
            channel_mode=channel_mode,
            srs_root=srs_root,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data or {})


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
