import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import is_prime
from wctlab.channel_sim import SimConfig, realize_channel
from wctlab.errors import ConfigurationError
from wctlab.srs import NOISELESS, gen_srs, largest_prime_at_most, transmit_descramble, zadoff_chu


@pytest.fixture(scope="module")
def cfg():
    return SimConfig()


@pytest.fixture(scope="module")
def seq(cfg):
    return gen_srs(cfg)


def test_reference_sequence_length(seq):
    assert seq.samples.shape == (2, 96)
    assert seq.length == 89
    assert np.max(np.abs(np.abs(seq.samples) - 1)) < 1e-12


def test_cyclic_extension(seq):
    row = seq.samples[0]
    np.testing.assert_array_equal(row[89:], row[:7])
    np.testing.assert_array_equal(seq.samples[0], seq.samples[1])


def test_sequence_is_deterministic(cfg):
    assert gen_srs(cfg).samples.tobytes() == gen_srs(cfg).samples.tobytes()


def test_zadoff_chu_zero_autocorrelation():
    x = zadoff_chu(89, 25)
    ac = [abs(np.vdot(x, np.roll(x, k))) for k in range(1, 89)]
    assert max(ac) < 1e-9


def test_zadoff_chu_rejects_non_coprime_root():
    with pytest.raises(ConfigurationError):
        zadoff_chu(21, 7)


@pytest.mark.parametrize("n", [3, 4, 10, 96, 97, 192])
def test_largest_prime(n):
    p = largest_prime_at_most(n)
    assert is_prime(p) and p <= n
    assert not any(is_prime(q) for q in range(p + 1, n + 1))


@settings(max_examples=40, deadline=None)
@given(n_rb=st.integers(1, 40), comb=st.sampled_from([1, 2, 4]), n_sym=st.integers(1, 4), root=st.integers(1, 500))
def test_constant_amplitude_any_config(n_rb, comb, n_sym, root):
    cfg = SimConfig(n_rb=n_rb, comb=comb, n_sym=n_sym)
    s = gen_srs(cfg, root)
    assert s.samples.shape == (n_sym, cfg.n_active)
    assert np.max(np.abs(np.abs(s.samples) - 1)) < 1e-12


def test_too_few_subcarriers():
    # comb 4 over one RB leaves 3 subcarriers, still fine
    gen_srs(SimConfig(n_rb=1, comb=4))


def test_noiseless_awgn_is_ones(cfg, seq):
    h = realize_channel(cfg.wcts[0], cfg, 0, 0)
    out = transmit_descramble(seq, h, NOISELESS, seed=5)
    assert out.s.shape == (cfg.n_des,)
    assert np.all(out.s == 1 + 0j)


@pytest.mark.parametrize("index", range(5))
def test_noiseless_descrambling_returns_channel(cfg, seq, index):
    h = realize_channel(cfg.wcts[index], cfg, 3, 11)
    out = transmit_descramble(seq, h, NOISELESS, seed=1)
    assert out.s.tobytes() == h.h.ravel().tobytes()


def test_flattening_order(cfg, seq):
    h = realize_channel(cfg.wcts[3], cfg, 0, 1)
    s = transmit_descramble(seq, h, NOISELESS, 0).s
    rx, sym, sc = 1, 0, 17
    assert s[rx * cfg.n_sym * cfg.n_active + sym * cfg.n_active + sc] == h.h[rx, sym, sc]


def test_matches_explicit_receiver(cfg, seq):
    """y*conj(x) with y = h*x + n equals the returned samples."""
    h = realize_channel(cfg.wcts[1], cfg, 0, 3)
    snr = 7.0
    out = transmit_descramble(seq, h, snr, seed=99).s
    rng = np.random.default_rng(99)
    n = (rng.standard_normal(h.h.shape) + 1j * rng.standard_normal(h.h.shape)) * np.sqrt(10 ** (-snr / 10) / 2)
    y = h.h * seq.samples + n
    np.testing.assert_allclose(out, (y * np.conj(seq.samples)).ravel(), atol=1e-12)


def test_zero_db_noise_variance(cfg, seq):
    h = realize_channel(cfg.wcts[0], cfg, 0, 0)
    s = np.concatenate([transmit_descramble(seq, h, 0.0, seed=k).s for k in range(270)])
    assert s.size >= 1e5
    assert 0.97 <= np.var(s - 1) <= 1.03


@pytest.mark.parametrize("snr_db", [0.0, 10.0, 25.0])
@pytest.mark.parametrize("index", [0, 3])
def test_snr_calibration(cfg, seq, snr_db, index):
    sig, noise = [], []
    for k in range(3000 if index else 60):
        h = realize_channel(cfg.wcts[index], cfg, 0, k)
        clean = transmit_descramble(seq, h, NOISELESS, seed=k).s
        noisy = transmit_descramble(seq, h, snr_db, seed=k).s
        sig.append(clean)
        noise.append(noisy - clean)
    sig, noise = np.concatenate(sig), np.concatenate(noise)
    measured = 10 * np.log10(np.mean(abs(sig) ** 2) / np.mean(abs(noise) ** 2))
    assert abs(measured - snr_db) < 0.2


def test_statistics_do_not_depend_on_root(cfg):
    a_seq, b_seq = gen_srs(cfg, 25), gen_srs(cfg, 7)
    assert not np.allclose(a_seq.samples, b_seq.samples)
    a, b = [], []
    for k in range(400):
        h = realize_channel(cfg.wcts[3], cfg, 0, k)
        a.append(transmit_descramble(a_seq, h, 3.0, seed=10_000 + k).s)
        b.append(transmit_descramble(b_seq, h, 3.0, seed=20_000 + k).s)
    a, b = np.concatenate(a), np.concatenate(b)
    # channel terms are shared, so only the noise differs: compare the moments
    assert abs(np.mean(a) - np.mean(b)) < 0.02
    assert abs(np.var(a) - np.var(b)) / np.var(a) < 0.02


def test_shape_mismatch(cfg, seq):
    h = realize_channel(cfg.wcts[0], cfg, 0, 0)
    h.h = h.h[:, :, :10]
    with pytest.raises(ConfigurationError):
        transmit_descramble(seq, h, 0.0, 0)
