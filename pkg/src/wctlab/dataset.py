"""Sample-matrix assembly, train/inference split and the WCTDSET1 file format.

Columns of the sample matrix follow the loop order channel type, slot, SNR.
Column ``c`` therefore maps to::

    wct  = c // (n_slot * n_snr)
    slot = (c // n_snr) % n_slot
    snr  = c % n_snr
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel_sim import SimConfig, realize_slots
from .errors import ConfigurationError, FormatError
from .srs import DEFAULT_ROOT, DescrambledSlot, descramble, gen_srs

DATASET_MAGIC = b"WCTDSET1"
DATASET_VERSION = 1


class VectorMode(enum.Enum):
    REIM = "reim"
    MAGPHASE = "magphase"

    @classmethod
    def parse(cls, value) -> "VectorMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"unknown vectorization mode {value!r}") from None


@dataclass
class FeatureVector:
    v: np.ndarray
    mode: VectorMode
    meta: tuple[int, int, int] = (0, 0, 0)


def vectorize_array(s: np.ndarray, mode) -> np.ndarray:
    """Stack ``[Re; Im]`` or ``[|s|; arg s]`` along the last axis."""
    mode = VectorMode.parse(mode)
    if mode is VectorMode.REIM:
        return np.concatenate([s.real, s.imag], axis=-1)
    phase = np.angle(s)
    phase[phase == -np.pi] = np.pi
    return np.concatenate([np.abs(s), phase], axis=-1)


def vectorize(slot: DescrambledSlot, mode=VectorMode.REIM) -> FeatureVector:
    mode = VectorMode.parse(mode)
    return FeatureVector(
        v=vectorize_array(np.asarray(slot.s), mode),
        mode=mode,
        meta=(slot.wct_index, slot.slot_index, slot.snr_index),
    )


def devectorize(v: np.ndarray, mode=VectorMode.REIM) -> np.ndarray:
    """Inverse of :func:`vectorize_array` (exact for REIM)."""
    mode = VectorMode.parse(mode)
    v = np.asarray(v)
    if v.shape[-1] % 2:
        raise ConfigurationError(f"feature length {v.shape[-1]} is odd")
    a, b = np.split(v, 2, axis=-1)
    if mode is VectorMode.REIM:
        # a + 1j*b would turn a -0.0 real part into +0.0
        out = np.empty(a.shape, dtype=np.result_type(a.dtype, np.complex64))
        out.real, out.imag = a, b
        return out
    return a * np.exp(1j * b)


@dataclass
class SampleMatrix:
    S: np.ndarray  # (2*n_des, n_columns) float32
    column_meta: np.ndarray  # (n_columns, 3) uint32: wct, slot, snr
    mode: VectorMode
    snr_grid_db: list[float]
    wct_names: list[str]
    seed: int = 0

    @property
    def n_columns(self) -> int:
        return self.S.shape[1]


def column_meta_for(n_wct: int, n_slot: int, n_snr: int) -> np.ndarray:
    c = np.arange(n_wct * n_slot * n_snr)
    return np.stack([c // (n_slot * n_snr), (c // n_snr) % n_slot, c % n_snr], axis=1).astype(np.uint32)


def _channel_seed(master_seed: int, wct: int, snr: int, slot: int | None) -> int:
    key = [int(master_seed), 1, wct, snr] + ([] if slot is None else [slot])
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])


def noise_seed(master_seed: int, wct: int, slot: int, snr: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), 2, wct, slot, snr])


def build_sample_matrix(
    cfg: SimConfig,
    mode=VectorMode.REIM,
    master_seed: int = 0,
    *,
    root: int = DEFAULT_ROOT,
    independent_slots: bool = False,
) -> SampleMatrix:
    """Run the channel-type / slot / SNR loop and stack the feature vectors.

    Every SNR point of a channel type is a separate fading run of
    ``n_slots_per_snr`` consecutive slots. With ``independent_slots`` each
    slot instead draws its own fading process, which removes the time
    correlation between neighbouring slots.
    """
    mode = VectorMode.parse(mode)
    n_wct, n_slot, n_snr = len(cfg.wcts), cfg.n_slots_per_snr, len(cfg.snr_grid_db)
    n_cols = n_wct * n_slot * n_snr
    seq = gen_srs(cfg, root)
    # column-contiguous storage, one row per sample while filling
    rows = np.empty((n_wct, n_slot, n_snr, 2 * cfg.n_des), dtype=np.float32)
    slots = np.arange(n_slot)
    for w, profile in enumerate(cfg.wcts):
        for k, snr_db in enumerate(cfg.snr_grid_db):
            if independent_slots:
                h = np.stack(
                    [realize_slots(profile, cfg, [i], _channel_seed(master_seed, w, k, i))[0] for i in slots]
                )
            else:
                h = realize_slots(profile, cfg, slots, _channel_seed(master_seed, w, k, None))
            for i in slots:
                rng = np.random.default_rng(noise_seed(master_seed, w, int(i), k))
                s = descramble(seq, h[i], float(snr_db), rng).ravel()
                rows[w, i, k] = vectorize_array(s, mode)
    S = rows.reshape(n_cols, 2 * cfg.n_des).T
    return SampleMatrix(
        S=S,
        column_meta=column_meta_for(n_wct, n_slot, n_snr),
        mode=mode,
        snr_grid_db=[float(x) for x in cfg.snr_grid_db],
        wct_names=[p.name for p in cfg.wcts],
        seed=int(master_seed),
    )


@dataclass
class DatasetSplit:
    alpha: float
    train: np.ndarray
    infer: np.ndarray
    train_meta: np.ndarray
    infer_meta: np.ndarray
    train_index: np.ndarray
    infer_index: np.ndarray
    mode: VectorMode = VectorMode.REIM
    snr_grid_db: list[float] = field(default_factory=list)
    wct_names: list[str] = field(default_factory=list)
    seed: int = 0
    shuffled: bool = True

    @property
    def n_des(self) -> int:
        return self.train.shape[0] // 2


def _stratified_order(meta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Column order that interleaves every (wct, snr) stratum proportionally."""
    strata = meta[:, 0].astype(np.int64) * (int(meta[:, 2].max()) + 1) + meta[:, 2]
    key = np.empty(len(meta))
    for s in np.unique(strata):
        idx = np.flatnonzero(strata == s)
        key[idx[rng.permutation(len(idx))]] = (np.arange(len(idx)) + 0.5) / len(idx)
    tiebreak = rng.random(len(meta))
    return np.lexsort((tiebreak, key))


def split(S: SampleMatrix, alpha: float, *, shuffle: bool = True, seed: int = 0) -> DatasetSplit:
    """Assign ``round(alpha*N)`` columns to training and the rest to inference.

    With ``shuffle=False`` the split is the literal contiguous one (first
    columns train). The default shuffles within each (wct, snr) stratum so
    both sets see every channel type at every SNR.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie strictly between 0 and 1, got {alpha}")
    n = S.n_columns
    n_train = int(round(alpha * n))
    if shuffle:
        order = _stratified_order(S.column_meta, np.random.default_rng([int(seed), 3]))
        train_idx = np.sort(order[:n_train])
        infer_idx = np.sort(order[n_train:])
    else:
        train_idx = np.arange(n_train)
        infer_idx = np.arange(n_train, n)
    return DatasetSplit(
        alpha=float(alpha),
        train=S.S[:, train_idx],
        infer=S.S[:, infer_idx],
        train_meta=S.column_meta[train_idx],
        infer_meta=S.column_meta[infer_idx],
        train_index=train_idx,
        infer_index=infer_idx,
        mode=S.mode,
        snr_grid_db=list(S.snr_grid_db),
        wct_names=list(S.wct_names),
        seed=S.seed,
        shuffled=shuffle,
    )


class Standardizer:
    """Per-feature zero-mean/unit-variance scaling fitted on the training split."""

    def __init__(self, mean: np.ndarray, scale: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float32)
        self.scale = np.asarray(scale, dtype=np.float32)

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X64 = np.asarray(X, dtype=np.float64)
        mean = X64.mean(axis=1)
        std = X64.std(axis=1)
        std[std < 1e-12] = 1.0
        return cls(mean, 1.0 / std)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean[:, None]) * self.scale[:, None]


# --- WCTDSET1 file format --------------------------------------------------

_PAYLOAD_ORDER = ("train_samples", "train_labels", "infer_samples", "infer_labels")


def save_dataset(split: DatasetSplit, labels, path, *, extra: dict | None = None) -> None:
    """Write ``split`` and its ``(train_labels, infer_labels)`` to ``path``.

    Label arguments may be :class:`~wctlab.labeling.LabelMatrix` objects or
    plain arrays; the scheme and layout are taken from the former.
    """
    train_lab, infer_lab = labels
    E_train = np.asarray(getattr(train_lab, "E", train_lab), dtype=np.float32)
    E_infer = np.asarray(getattr(infer_lab, "E", infer_lab), dtype=np.float32)
    if E_train.shape[1] != split.train.shape[1]:
        raise ConfigurationError(
            f"train labels have {E_train.shape[1]} columns but train samples have {split.train.shape[1]}"
        )
    if E_infer.shape[1] != split.infer.shape[1]:
        raise ConfigurationError(
            f"infer labels have {E_infer.shape[1]} columns but infer samples have {split.infer.shape[1]}"
        )
    payloads = {
        "train_samples": np.asarray(split.train, dtype=np.float32),
        "train_labels": E_train,
        "infer_samples": np.asarray(split.infer, dtype=np.float32),
        "infer_labels": E_infer,
    }
    scheme = getattr(train_lab, "scheme", None)
    layout = getattr(train_lab, "layout", None)
    header = {
        "version": DATASET_VERSION,
        "mode": split.mode.value,
        "n_des": split.n_des,
        "dims": {k: list(v.shape) for k, v in payloads.items()},
        "meta_dims": {"train": list(split.train_meta.shape), "infer": list(split.infer_meta.shape)},
        "alpha": split.alpha,
        "shuffled": split.shuffled,
        "snr_grid": list(split.snr_grid_db),
        "wct_names": list(split.wct_names),
        "labeling_scheme": getattr(scheme, "value", scheme),
        "task_layout": layout.to_dict() if layout is not None else None,
        "seed": split.seed,
    }
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for key in _PAYLOAD_ORDER:
            fh.write(np.ascontiguousarray(payloads[key], dtype="<f4").tobytes())
        for meta in (split.train_meta, split.infer_meta):
            fh.write(np.ascontiguousarray(meta, dtype="<u4").tobytes())


def read_dataset_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh)[0]


def _read_header(fh) -> tuple[dict, int]:
    magic = fh.read(len(DATASET_MAGIC))
    if magic != DATASET_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}")
    raw = fh.read(8)
    if len(raw) != 8:
        raise FormatError("truncated header length")
    (n,) = struct.unpack("<Q", raw)
    blob = fh.read(n)
    if len(blob) != n:
        raise FormatError("truncated header")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"header is not valid JSON: {exc}") from None
    for key in ("version", "mode", "n_des", "dims", "meta_dims", "alpha"):
        if key not in header:
            raise FormatError(f"header field {key!r} missing")
    if header["version"] != DATASET_VERSION:
        raise FormatError(f"unsupported version {header['version']}")
    return header, len(DATASET_MAGIC) + 8 + n


def _read_array(fh, shape, dtype, name) -> np.ndarray:
    shape = tuple(int(x) for x in shape)
    count = int(np.prod(shape))
    nbytes = count * np.dtype(dtype).itemsize
    raw = fh.read(nbytes)
    if len(raw) != nbytes:
        raise FormatError(f"payload {name!r} truncated: expected {nbytes} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()


def _column_index(meta: np.ndarray, all_meta: np.ndarray, n_snr: int) -> np.ndarray:
    if len(all_meta) == 0:
        return np.zeros(0, dtype=np.int64)
    n_slot = int(all_meta[:, 1].max()) + 1
    n_snr = max(n_snr, int(all_meta[:, 2].max()) + 1)
    m = meta.astype(np.int64)
    return m[:, 0] * n_slot * n_snr + m[:, 1] * n_snr + m[:, 2]


def load_dataset(path):
    """Read a WCTDSET1 file.

    Returns ``(split, (train_labels, infer_labels), header)``; labels are
    rebuilt as :class:`~wctlab.labeling.LabelMatrix` objects.
    """
    from .labeling import LabelMatrix, LabelScheme, TaskLayout

    path = Path(path)
    with open(path, "rb") as fh:
        header, _ = _read_header(fh)
        dims = header["dims"]
        for key in _PAYLOAD_ORDER:
            if key not in dims:
                raise FormatError(f"header dims missing {key!r}")
        arrays = {key: _read_array(fh, dims[key], "<f4", key) for key in _PAYLOAD_ORDER}
        train_meta = _read_array(fh, header["meta_dims"]["train"], "<u4", "train_meta")
        infer_meta = _read_array(fh, header["meta_dims"]["infer"], "<u4", "infer_meta")
        if fh.read(1):
            raise FormatError("trailing bytes after payload")
    n_feat = 2 * int(header["n_des"])
    for key in ("train_samples", "infer_samples"):
        if arrays[key].shape[0] != n_feat:
            raise FormatError(f"{key} has {arrays[key].shape[0]} rows, header n_des implies {n_feat}")
    if arrays["train_samples"].shape[1] != arrays["train_labels"].shape[1]:
        raise FormatError("train_labels column count does not match train_samples")
    if arrays["infer_samples"].shape[1] != arrays["infer_labels"].shape[1]:
        raise FormatError("infer_labels column count does not match infer_samples")
    if train_meta.shape[0] != arrays["train_samples"].shape[1] or infer_meta.shape[0] != arrays["infer_samples"].shape[1]:
        raise FormatError("column metadata count does not match samples")

    all_meta = np.concatenate([train_meta, infer_meta])
    ds = DatasetSplit(
        alpha=float(header["alpha"]),
        train=arrays["train_samples"],
        infer=arrays["infer_samples"],
        train_meta=train_meta,
        infer_meta=infer_meta,
        train_index=_column_index(train_meta, all_meta, len(header.get("snr_grid", []))),
        infer_index=_column_index(infer_meta, all_meta, len(header.get("snr_grid", []))),
        mode=VectorMode.parse(header["mode"]),
        snr_grid_db=[float(x) for x in header.get("snr_grid", [])],
        wct_names=list(header.get("wct_names", [])),
        seed=int(header.get("seed", 0)),
        shuffled=bool(header.get("shuffled", True)),
    )
    scheme = header.get("labeling_scheme")
    scheme = LabelScheme(scheme) if scheme else None
    layout = TaskLayout.from_dict(header["task_layout"]) if header.get("task_layout") else None
    labels = (
        LabelMatrix(arrays["train_labels"], scheme, layout),
        LabelMatrix(arrays["infer_labels"], scheme, layout),
    )
    return ds, labels, header
