"""One-hot labels for single-task and multi-task channel-type classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .channel_sim import ChannelProfile, RxCorrelation
from .errors import ConfigurationError


class LabelScheme(enum.Enum):
    SINGLE = "single"
    MULTI = "multi"

    @classmethod
    def parse(cls, value) -> "LabelScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"unknown labeling scheme {value!r}") from None


class LabelConvention(enum.Enum):
    """How channel features are read off a profile.

    ``SORTED``: AWGN keeps its own "none" correlation class and every class
    list is sorted by value. ``FOLDED``: AWGN counts as low correlation and
    the static (0 Hz) Doppler class is ordered after the fading ones, which
    is the ordering behind the worked three-task label example.
    """

    SORTED = "sorted"
    FOLDED = "folded"

    @classmethod
    def parse(cls, value) -> "LabelConvention":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"unknown label convention {value!r}") from None


@dataclass(frozen=True)
class Feature:
    name: str
    extract: Callable[[ChannelProfile], object]
    sort_key: Callable[[object], object]
    unit: str = ""


def _delay_spread_ns(p: ChannelProfile) -> float:
    return round(p.rms_delay_spread * 1e9, 3)


def _corr_own_class(p: ChannelProfile) -> str:
    return p.rx_correlation.value


def _corr_folded(p: ChannelProfile) -> str:
    return RxCorrelation.LOW.value if p.rx_correlation is RxCorrelation.NONE else p.rx_correlation.value


def _corr_key(v) -> float:
    return RxCorrelation.parse(v).sort_key


def _doppler(p: ChannelProfile) -> float:
    return float(p.doppler_hz)


def default_features(convention=LabelConvention.SORTED) -> tuple[Feature, ...]:
    convention = LabelConvention.parse(convention)
    if convention is LabelConvention.SORTED:
        return (
            Feature("delay_spread", _delay_spread_ns, float, "ns"),
            Feature("correlation", _corr_own_class, _corr_key),
            Feature("doppler", _doppler, float, "Hz"),
        )
    return (
        Feature("delay_spread", _delay_spread_ns, float, "ns"),
        Feature("correlation", _corr_folded, _corr_key),
        Feature("doppler", _doppler, lambda v: (v == 0.0, v), "Hz"),
    )


@dataclass(frozen=True)
class Task:
    name: str
    classes: tuple

    @property
    def K(self) -> int:
        return len(self.classes)

    def class_names(self, unit: str = "") -> list[str]:
        if self.name == "correlation":
            return [str(RxCorrelation.parse(c)) for c in self.classes]
        return [f"{c:g} {unit}".strip() for c in self.classes]


@dataclass(frozen=True)
class TaskLayout:
    tasks: tuple[Task, ...]
    convention: LabelConvention = LabelConvention.SORTED

    @property
    def total_dim(self) -> int:
        return sum(t.K for t in self.tasks)

    @property
    def segments(self) -> tuple[int, ...]:
        return tuple(t.K for t in self.tasks)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.segments)])

    def features(self) -> tuple[Feature, ...]:
        by_name = {f.name: f for f in default_features(self.convention)}
        return tuple(by_name[t.name] for t in self.tasks)

    def class_names(self) -> list[list[str]]:
        return [t.class_names(f.unit) for t, f in zip(self.tasks, self.features())]

    def to_dict(self) -> dict:
        return {
            "convention": self.convention.value,
            "tasks": [{"name": t.name, "classes": list(t.classes)} for t in self.tasks],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskLayout":
        return cls(
            tasks=tuple(Task(t["name"], tuple(t["classes"])) for t in d["tasks"]),
            convention=LabelConvention.parse(d.get("convention", "sorted")),
        )


@dataclass
class LabelMatrix:
    E: np.ndarray  # (label_dim, n_columns)
    scheme: LabelScheme | None = LabelScheme.SINGLE
    layout: TaskLayout | None = None

    @property
    def segments(self) -> tuple[int, ...]:
        if self.scheme is LabelScheme.MULTI and self.layout is not None:
            return self.layout.segments
        return (self.E.shape[0],)

    def class_indices(self) -> np.ndarray:
        """Per-segment argmax, shape ``(n_segments, n_columns)``."""
        return segment_argmax(self.E, self.segments)


def segment_argmax(M: np.ndarray, segments: Sequence[int]) -> np.ndarray:
    offs = np.concatenate([[0], np.cumsum(segments)])
    return np.stack([np.argmax(M[a:b], axis=0) for a, b in zip(offs[:-1], offs[1:])])


def single_task_labels(column_meta, n_wct: int) -> LabelMatrix:
    """Columns of the ``n_wct`` identity matrix selected by each column's WCT index."""
    wct = np.asarray(column_meta)
    wct = wct[:, 0] if wct.ndim == 2 else wct
    wct = wct.astype(np.int64)
    if wct.size and (wct.min() < 0 or wct.max() >= n_wct):
        raise ConfigurationError(f"wct index out of range for {n_wct} channel types")
    E = np.eye(n_wct, dtype=np.float32)[:, wct]
    return LabelMatrix(E, LabelScheme.SINGLE, None)


def derive_task_layout(
    profiles: Sequence[ChannelProfile],
    features: Sequence[Feature] | None = None,
    convention=LabelConvention.SORTED,
) -> TaskLayout:
    """Distinct values of each feature over ``profiles``, in sort-key order."""
    if not profiles:
        raise ConfigurationError("need at least one profile")
    convention = LabelConvention.parse(convention)
    features = features or default_features(convention)
    tasks = []
    for f in features:
        values = {f.extract(p) for p in profiles}
        tasks.append(Task(f.name, tuple(sorted(values, key=f.sort_key))))
    return TaskLayout(tuple(tasks), convention)


def feature_indices(profile: ChannelProfile, layout: TaskLayout) -> tuple[int, ...]:
    out = []
    for task, f in zip(layout.tasks, layout.features()):
        value = f.extract(profile)
        if value not in task.classes:
            raise ConfigurationError(f"{profile.name!r}: {task.name} value {value!r} not in layout")
        out.append(task.classes.index(value))
    return tuple(out)


def multi_task_label(profile: ChannelProfile, layout: TaskLayout) -> np.ndarray:
    e = np.zeros(layout.total_dim, dtype=np.float32)
    for off, idx in zip(layout.offsets[:-1], feature_indices(profile, layout)):
        e[off + idx] = 1.0
    return e


def multi_task_labels(column_meta, layout: TaskLayout, profiles: Sequence[ChannelProfile]) -> LabelMatrix:
    """Concatenated per-feature one-hot labels for every column."""
    wct = np.asarray(column_meta)
    wct = (wct[:, 0] if wct.ndim == 2 else wct).astype(np.int64)
    if wct.size and wct.max() >= len(profiles):
        raise ConfigurationError("wct index out of range")
    table = np.stack([multi_task_label(p, layout) for p in profiles], axis=1)
    return LabelMatrix(table[:, wct], LabelScheme.MULTI, layout)


class UnmatchedFeatures(NamedTuple):
    """Feature combination that no configured channel type has."""

    values: tuple


def label_to_wct(indices: Sequence[int], layout: TaskLayout, profiles: Sequence[ChannelProfile]):
    """Name of the profile whose feature classes equal ``indices``.

    Returns :class:`UnmatchedFeatures` holding the feature values when no
    profile (or more than one) matches.
    """
    indices = tuple(int(i) for i in indices)
    matches = [p.name for p in profiles if feature_indices(p, layout) == indices]
    if len(matches) == 1:
        return matches[0]
    return UnmatchedFeatures(tuple(t.classes[i] for t, i in zip(layout.tasks, indices)))


def build_labels(column_meta, profiles, scheme, convention=LabelConvention.SORTED) -> LabelMatrix:
    scheme = LabelScheme.parse(scheme)
    if scheme is LabelScheme.SINGLE:
        return single_task_labels(column_meta, len(profiles))
    layout = derive_task_layout(profiles, convention=convention)
    return multi_task_labels(column_meta, layout, profiles)
