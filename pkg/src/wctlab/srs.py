"""SRS pilot generation, noisy transmission and descrambling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_sim import ChannelRealization, SimConfig
from .errors import ConfigurationError

DEFAULT_ROOT = 25
NOISELESS = math.inf


def largest_prime_at_most(n: int) -> int:
    for p in range(n, 1, -1):
        if all(p % d for d in range(2, math.isqrt(p) + 1)):
            return p
    raise ConfigurationError(f"no prime <= {n}")


def zadoff_chu(length: int, root: int) -> np.ndarray:
    """Zadoff-Chu sequence of odd ``length`` for ``root`` coprime to it."""
    if math.gcd(root, length) != 1:
        raise ConfigurationError(f"ZC root {root} is not coprime with length {length}")
    n = np.arange(length)
    return np.exp(-1j * np.pi * root * n * (n + 1) / length)


@dataclass
class SrsSequence:
    samples: np.ndarray  # (symbol, active_subcarrier), unit modulus
    root: int
    length: int  # ZC prime length before cyclic extension


def gen_srs(cfg: SimConfig, root: int = DEFAULT_ROOT) -> SrsSequence:
    """ZC sequence of the largest prime length that fits, cyclically extended.

    The same base sequence is sent on every SRS symbol.
    """
    n_sc = cfg.n_active
    if n_sc < 3:
        raise ConfigurationError(f"need at least 3 active subcarriers, got {n_sc}")
    nzc = largest_prime_at_most(n_sc)
    u = root % nzc or 1
    base = zadoff_chu(nzc, u)
    extended = base[np.arange(n_sc) % nzc]
    samples = np.tile(extended, (cfg.n_sym, 1))
    return SrsSequence(samples=samples, root=u, length=nzc)


@dataclass
class DescrambledSlot:
    """Descrambled samples of one slot.

    ``s`` is flattened rx-major, then symbol, then subcarrier, i.e. C order of
    a ``(rx, symbol, subcarrier)`` tensor.
    """

    s: np.ndarray
    wct_index: int = 0
    slot_index: int = 0
    snr_index: int = 0
    snr_db: float = NOISELESS


def noise_variance(snr_db: float) -> float:
    return 0.0 if math.isinf(snr_db) and snr_db > 0 else 10.0 ** (-snr_db / 10.0)


def descramble(seq: SrsSequence, h: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Descrambled ``(rx, sym, sc)`` tensor for channel ``h`` at ``snr_db``.

    The receiver computes ``y * conj(x)`` with ``y = h*x + n``. Because the
    pilot has unit modulus this is ``h + n*conj(x)``, which is what gets
    evaluated so that the noiseless case reproduces ``h`` bit-exactly.
    """
    x = seq.samples
    if h.shape[1:] != x.shape:
        raise ConfigurationError(f"channel shape {h.shape} does not match SRS grid {x.shape}")
    var = noise_variance(snr_db)
    if var == 0.0:
        return h.copy()
    n = rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)
    return h + np.sqrt(var / 2.0) * n * np.conj(x)[None, :, :]


def transmit_descramble(
    seq: SrsSequence,
    h: ChannelRealization,
    snr_db: float,
    seed: int,
    *,
    wct_index: int = 0,
    snr_index: int = 0,
) -> DescrambledSlot:
    """Pass the pilot through ``h`` plus AWGN at ``snr_db`` and descramble.

    Signal power per resource element is one, so the noise variance is
    ``10**(-snr_db/10)``. ``snr_db=inf`` gives the noiseless result, which is
    exactly the flattened channel.
    """
    rng = np.random.default_rng(seed)
    s = descramble(seq, h.h, snr_db, rng)
    return DescrambledSlot(
        s=s.ravel(),
        wct_index=wct_index,
        slot_index=h.slot_index,
        snr_index=snr_index,
        snr_db=float(snr_db),
    )
