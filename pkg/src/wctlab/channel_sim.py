"""Tapped-delay-line fading channels for the five standard channel types.

Each fading tap is a Rayleigh process generated by a sum of sinusoids whose
time autocorrelation approaches J0(2*pi*fd*tau). The frequency response is
evaluated on the SRS comb subcarriers and the receive-antenna dimension is
coloured with an exponential correlation matrix.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

SUBCARRIERS_PER_RB = 12
SYMBOLS_PER_SLOT = 14
N_SINUSOIDS = 32

# 3GPP TS 36.101 Annex B.2.1, (excess delay [ns], relative power [dB]).
EPA_TAPS_NS_DB = (
    (0, 0.0),
    (30, -1.0),
    (70, -2.0),
    (90, -3.0),
    (110, -8.0),
    (190, -17.2),
    (410, -20.8),
)
EVA_TAPS_NS_DB = (
    (0, 0.0),
    (30, -1.5),
    (150, -1.4),
    (310, -3.6),
    (370, -0.6),
    (710, -9.1),
    (1090, -7.0),
    (1730, -12.0),
    (2510, -16.9),
)
ETU_TAPS_NS_DB = (
    (0, -1.0),
    (50, -1.0),
    (120, -1.0),
    (200, 0.0),
    (230, 0.0),
    (500, 0.0),
    (1600, -3.0),
    (2300, -5.0),
    (5000, -7.0),
)


class RxCorrelation(enum.Enum):
    """Receive-antenna correlation level (36.101 exponential model)."""

    NONE = "none"
    LOW = "low"
    HIGH = "high"

    @property
    def alpha(self) -> float:
        return {"none": 0.0, "low": 0.0, "high": 0.9}[self.value]

    @property
    def sort_key(self) -> float:
        # NONE orders before LOW even though both are uncorrelated
        return -1.0 if self is RxCorrelation.NONE else self.alpha

    def __str__(self) -> str:
        return self.value.capitalize()

    @classmethod
    def parse(cls, value: "RxCorrelation | str | None") -> "RxCorrelation":
        if isinstance(value, cls):
            return value
        if value is None:
            return cls.NONE
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown rx correlation level {value!r}") from None


@dataclass(frozen=True)
class ChannelProfile:
    """A wireless channel type: power-delay profile, Doppler and Rx correlation.

    ``taps`` holds ``(delay_s, mean_power)`` pairs with linear powers that sum
    to one. Use :meth:`from_db` to build a profile from a dB table.
    """

    name: str
    taps: tuple[tuple[float, float], ...]
    doppler_hz: float = 0.0
    rx_correlation: RxCorrelation = RxCorrelation.NONE
    seed_domain: int = 0

    def __post_init__(self):
        if not self.taps:
            raise ConfigurationError(f"profile {self.name!r} has no taps")
        delays = np.array([d for d, _ in self.taps], dtype=float)
        powers = np.array([p for _, p in self.taps], dtype=float)
        if delays[0] != 0.0:
            raise ConfigurationError(f"profile {self.name!r}: first tap delay must be 0")
        if np.any(np.diff(delays) <= 0):
            raise ConfigurationError(f"profile {self.name!r}: tap delays must be strictly increasing")
        if np.any(powers <= 0):
            raise ConfigurationError(f"profile {self.name!r}: tap powers must be positive")
        if abs(powers.sum() - 1.0) > 1e-9:
            raise ConfigurationError(f"profile {self.name!r}: tap powers sum to {powers.sum()}, expected 1")
        if self.doppler_hz < 0:
            raise ConfigurationError(f"profile {self.name!r}: negative Doppler")
        object.__setattr__(self, "rx_correlation", RxCorrelation.parse(self.rx_correlation))

    @classmethod
    def from_db(cls, name, taps_s_db, doppler_hz=0.0, rx_correlation=RxCorrelation.NONE, seed_domain=0):
        delays = np.array([d for d, _ in taps_s_db], dtype=float)
        powers = 10.0 ** (np.array([p for _, p in taps_s_db], dtype=float) / 10.0)
        powers = powers / powers.sum()
        return cls(
            name=name,
            taps=tuple((float(d), float(p)) for d, p in zip(delays, powers)),
            doppler_hz=float(doppler_hz),
            rx_correlation=RxCorrelation.parse(rx_correlation),
            seed_domain=int(seed_domain),
        )

    @property
    def delays(self) -> np.ndarray:
        return np.array([d for d, _ in self.taps])

    @property
    def powers(self) -> np.ndarray:
        return np.array([p for _, p in self.taps])

    @property
    def is_awgn(self) -> bool:
        return len(self.taps) == 1 and self.doppler_hz == 0.0 and self.rx_correlation is RxCorrelation.NONE

    @property
    def rms_delay_spread(self) -> float:
        """RMS delay spread in seconds."""
        p, d = self.powers, self.delays
        mean = np.sum(p * d)
        return float(np.sqrt(max(np.sum(p * d**2) - mean**2, 0.0)))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "taps": [[d, 10.0 * np.log10(p)] for d, p in self.taps],
            "doppler_hz": self.doppler_hz,
            "rx_correlation": self.rx_correlation.value,
            "seed_domain": self.seed_domain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelProfile":
        """Inverse of :meth:`to_dict`; tap powers are given in dB."""
        try:
            return cls.from_db(
                d["name"],
                [(float(t[0]), float(t[1])) for t in d["taps"]],
                doppler_hz=d.get("doppler_hz", 0.0),
                rx_correlation=d.get("rx_correlation"),
                seed_domain=d.get("seed_domain", 0),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise ConfigurationError(f"malformed channel profile {d!r}: {exc}") from None


def _tdl_profile(family, table, doppler_hz, corr, seed_domain):
    label = {RxCorrelation.LOW: "low", RxCorrelation.HIGH: "high"}[corr]
    name = f"{family}{doppler_hz:g} {label} correlation"
    taps = [(ns * 1e-9, db) for ns, db in table]
    return ChannelProfile.from_db(name, taps, doppler_hz, corr, seed_domain)


def awgn_profile() -> ChannelProfile:
    return ChannelProfile("AWGN", ((0.0, 1.0),), 0.0, RxCorrelation.NONE, 0)


def make_standard_profiles(doppler_hz: float = 5.0) -> list[ChannelProfile]:
    """The five channel types of the reference experiment, in table order."""
    return [
        awgn_profile(),
        _tdl_profile("EPA", EPA_TAPS_NS_DB, doppler_hz, RxCorrelation.LOW, 1),
        _tdl_profile("EPA", EPA_TAPS_NS_DB, doppler_hz, RxCorrelation.HIGH, 2),
        _tdl_profile("EVA", EVA_TAPS_NS_DB, doppler_hz, RxCorrelation.LOW, 3),
        _tdl_profile("EVA", EVA_TAPS_NS_DB, doppler_hz, RxCorrelation.HIGH, 4),
    ]


def make_example_profiles() -> list[ChannelProfile]:
    """AWGN, EPA5 and EVA700 set used by the worked labeling example."""
    return [
        awgn_profile(),
        _tdl_profile("EPA", EPA_TAPS_NS_DB, 5.0, RxCorrelation.LOW, 1),
        _tdl_profile("EPA", EPA_TAPS_NS_DB, 5.0, RxCorrelation.HIGH, 2),
        _tdl_profile("EVA", EVA_TAPS_NS_DB, 700.0, RxCorrelation.LOW, 3),
        _tdl_profile("EVA", EVA_TAPS_NS_DB, 700.0, RxCorrelation.HIGH, 4),
    ]


def profile_by_name(name: str) -> ChannelProfile:
    """Resolve names such as ``"AWGN"``, ``"EVA5 high correlation"`` or ``"ETU70 low"``."""
    key = " ".join(name.lower().replace("_", " ").split())
    if key == "awgn":
        return awgn_profile()
    tables = {"epa": EPA_TAPS_NS_DB, "eva": EVA_TAPS_NS_DB, "etu": ETU_TAPS_NS_DB}
    parts = key.split()
    head = parts[0] if parts else ""
    family, digits = head[:3], head[3:]
    level = parts[1] if len(parts) > 1 else ""
    if family not in tables or not digits or level not in ("low", "high"):
        raise ConfigurationError(f"unknown channel type {name!r}")
    try:
        doppler = float(digits)
    except ValueError:
        raise ConfigurationError(f"unknown channel type {name!r}") from None
    corr = RxCorrelation.parse(level)
    seed_domain = {"epa": 1, "eva": 3, "etu": 5}[family] + (corr is RxCorrelation.HIGH)
    return _tdl_profile(family.upper(), tables[family], doppler, corr, seed_domain)


@dataclass
class SimConfig:
    """Resource grid, antenna and sweep settings for dataset synthesis."""

    n_rb: int = 16
    n_sym: int = 2
    n_rx: int = 2
    subcarrier_spacing_hz: float = 30e3
    comb: int = 2
    slot_duration_s: float = 0.5e-3
    snr_grid_db: list[float] = field(default_factory=lambda: [float(x) for x in range(31)])
    n_slots_per_snr: int = 500
    wcts: list[ChannelProfile] = field(default_factory=make_standard_profiles)

    def __post_init__(self):
        for attr in ("n_rb", "n_sym", "n_rx", "n_slots_per_snr"):
            if int(getattr(self, attr)) < 1:
                raise ConfigurationError(f"{attr} must be >= 1")
        if self.comb not in (1, 2, 4):
            raise ConfigurationError(f"comb must be 1, 2 or 4, got {self.comb}")
        if (self.n_rb * SUBCARRIERS_PER_RB) % self.comb:
            raise ConfigurationError("active subcarrier count is not an integer")
        if self.n_sym > SYMBOLS_PER_SLOT:
            raise ConfigurationError(f"at most {SYMBOLS_PER_SLOT} SRS symbols per slot")
        if self.subcarrier_spacing_hz <= 0 or self.slot_duration_s <= 0:
            raise ConfigurationError("subcarrier spacing and slot duration must be positive")
        if not self.snr_grid_db:
            raise ConfigurationError("snr_grid_db is empty")
        if not self.wcts:
            raise ConfigurationError("no channel types configured")
        names = [p.name for p in self.wcts]
        if len(set(names)) != len(names):
            raise ConfigurationError("channel type names must be unique")

    @property
    def n_active(self) -> int:
        """Active SRS subcarriers per symbol."""
        return self.n_rb * SUBCARRIERS_PER_RB // self.comb

    @property
    def n_des(self) -> int:
        return self.n_active * self.n_sym * self.n_rx

    @property
    def subcarrier_freqs(self) -> np.ndarray:
        """Baseband frequencies of the active subcarriers, centred on DC."""
        k = np.arange(self.n_active) * self.comb
        return (k - k.mean()) * self.subcarrier_spacing_hz

    @property
    def symbol_offsets(self) -> np.ndarray:
        """SRS symbol start times within a slot (last ``n_sym`` symbols)."""
        first = SYMBOLS_PER_SLOT - self.n_sym
        return (first + np.arange(self.n_sym)) * self.slot_duration_s / SYMBOLS_PER_SLOT


@dataclass
class ChannelRealization:
    h: np.ndarray  # (rx, symbol, subcarrier) complex128
    profile_ref: str
    slot_index: int
    rng_seed: int


def correlation_matrix(level: RxCorrelation, n_rx: int) -> np.ndarray:
    a = RxCorrelation.parse(level).alpha
    idx = np.arange(n_rx)
    return a ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def apply_rx_correlation(h_uncorrelated: np.ndarray, level, n_rx: int) -> np.ndarray:
    """Colour axis 0 (Rx antenna) of ``h_uncorrelated`` with R(level).

    Entries along the antenna axis are assumed i.i.d. with unit power; the
    output has covariance R across antennas and the same per-entry power.
    """
    level = RxCorrelation.parse(level)
    if n_rx < 1:
        raise ConfigurationError("n_rx must be >= 1")
    if h_uncorrelated.shape[0] != n_rx:
        raise ConfigurationError(f"expected {n_rx} antennas on axis 0, got {h_uncorrelated.shape[0]}")
    if level is RxCorrelation.NONE or n_rx == 1:
        return h_uncorrelated
    r = correlation_matrix(level, n_rx)
    try:
        chol = np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        raise ConfigurationError(f"correlation matrix for {level} is not positive definite") from None
    return np.tensordot(chol, h_uncorrelated, axes=(1, 0))


def _check_aliasing(profile: ChannelProfile, cfg: SimConfig):
    step = cfg.comb * cfg.subcarrier_spacing_hz
    if profile.delays[-1] * step >= 1.0:
        raise ConfigurationError(
            f"profile {profile.name!r}: max delay {profile.delays[-1]:.3g} s aliases on a "
            f"{step:.3g} Hz subcarrier grid"
        )


def _seed_sequence(profile: ChannelProfile, seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(profile.seed_domain)])


def tap_gains(profile: ChannelProfile, n_rx: int, times: np.ndarray, seed: int) -> np.ndarray:
    """Uncorrelated per-antenna tap coefficients, shape ``(n_rx, n_taps, len(times))``.

    Each (antenna, tap) pair is an independent sum-of-sinusoids process with
    ``N_SINUSOIDS`` arrival angles evenly spread over the circle with a random
    common offset, and random phases. The process is fixed by ``seed``; only
    ``times`` moves along it.
    """
    rng = np.random.default_rng(_seed_sequence(profile, seed))
    n_taps = len(profile.taps)
    shape = (n_rx, n_taps, N_SINUSOIDS)
    offset = rng.uniform(-np.pi, np.pi, size=(n_rx, n_taps, 1))
    n = np.arange(N_SINUSOIDS)
    theta = (2.0 * np.pi * n - np.pi + offset) / N_SINUSOIDS
    phi = rng.uniform(-np.pi, np.pi, size=shape)
    omega = 2.0 * np.pi * profile.doppler_hz * np.cos(theta)
    t = np.asarray(times, dtype=float)
    arg = omega[..., None] * t + phi[..., None]
    g = np.exp(1j * arg).sum(axis=2) / np.sqrt(N_SINUSOIDS)
    return g * np.sqrt(profile.powers)[None, :, None]


def realize_slots(profile: ChannelProfile, cfg: SimConfig, slot_indices, seed: int) -> np.ndarray:
    """Channel tensors for several slots of one fading trajectory.

    Returns an array of shape ``(n_slots, n_rx, n_sym, n_active)``.
    """
    slots = np.atleast_1d(np.asarray(slot_indices, dtype=np.int64))
    if np.any(slots < 0):
        raise ConfigurationError("slot_index must be >= 0")
    shape = (len(slots), cfg.n_rx, cfg.n_sym, cfg.n_active)
    if profile.is_awgn:
        return np.ones(shape, dtype=complex)
    _check_aliasing(profile, cfg)
    times = (slots[:, None] * cfg.slot_duration_s + cfg.symbol_offsets[None, :]).ravel()
    g = tap_gains(profile, cfg.n_rx, times, seed)  # (rx, tap, slot*sym)
    steering = np.exp(-2j * np.pi * np.outer(profile.delays, cfg.subcarrier_freqs))  # (tap, sc)
    h = np.einsum("rlt,lk->rtk", g, steering)
    h = apply_rx_correlation(h, profile.rx_correlation, cfg.n_rx)
    h = h.reshape(cfg.n_rx, len(slots), cfg.n_sym, cfg.n_active)
    return np.ascontiguousarray(h.transpose(1, 0, 2, 3))


def realize_channel(profile: ChannelProfile, cfg: SimConfig, slot_index: int, seed: int) -> ChannelRealization:
    """Frequency-domain channel of one slot; deterministic in its arguments."""
    if profile not in cfg.wcts:
        raise ConfigurationError(f"profile {profile.name!r} is not part of the configuration")
    h = realize_slots(profile, cfg, [slot_index], seed)[0]
    return ChannelRealization(h=h, profile_ref=profile.name, slot_index=int(slot_index), rng_seed=int(seed))
