"""End-to-end helpers: config -> dataset -> trained model -> report."""

from __future__ import annotations

from dataclasses import replace

from .channel_sim import ChannelProfile
from .config import ExperimentConfig
from .dataset import DatasetSplit, build_sample_matrix, split
from .labeling import LabelConvention, LabelScheme, build_labels, derive_task_layout
from .mlp import MlpModel, TrainConfig, init_model, train


def generate(cfg: ExperimentConfig, *, seed=None, mode=None, scheme=None):
    """Build and split the sample matrix and label both halves.

    Returns ``(split, (train_labels, infer_labels), header_extra)`` where
    ``header_extra`` is what the dataset file needs to rebuild the labels.
    """
    if seed is not None or mode is not None or scheme is not None:
        cfg = replace(
            cfg,
            seed=cfg.seed if seed is None else int(seed),
            mode=cfg.mode if mode is None else mode,
            scheme=cfg.scheme if scheme is None else LabelScheme.parse(scheme),
        )
    S = build_sample_matrix(
        cfg.sim,
        cfg.mode,
        cfg.seed,
        root=cfg.srs_root,
        independent_slots=cfg.channel_mode == "independent",
    )
    ds = split(S, cfg.alpha, shuffle=cfg.shuffle, seed=cfg.seed)
    del S
    labels = make_labels(ds, cfg.sim.wcts, cfg.scheme, cfg.convention)
    extra = {
        "profiles": [p.to_dict() for p in cfg.sim.wcts],
        "label_convention": cfg.convention.value,
        "n_slots_per_snr": cfg.sim.n_slots_per_snr,
        "config": cfg.to_dict(),
    }
    return ds, labels, extra


def make_labels(ds: DatasetSplit, profiles, scheme, convention=LabelConvention.SORTED):
    return (
        build_labels(ds.train_meta, profiles, scheme, convention),
        build_labels(ds.infer_meta, profiles, scheme, convention),
    )


def fit(ds: DatasetSplit, labels, tcfg: TrainConfig | None = None, *, progress=None) -> tuple[MlpModel, list]:
    tcfg = tcfg or TrainConfig()
    model = init_model(ds.train.shape[0], labels[0].segments, tcfg)
    return train(model, ds, labels, tcfg, progress=progress)


def describe_model(model: MlpModel, ds: DatasetSplit, labels, profiles: list[ChannelProfile], convention) -> None:
    """Record what inference needs (mode, channel types, layout) in ``model.info``."""
    layout = labels[0].layout
    if layout is None and model.head == "multi":
        layout = derive_task_layout(profiles, convention=convention)
    model.info.update(
        mode=ds.mode.value,
        n_des=ds.n_des,
        wct_names=list(ds.wct_names),
        profiles=[p.to_dict() for p in profiles],
        task_layout=layout.to_dict() if layout is not None else None,
        snr_grid=list(ds.snr_grid_db),
    )
