import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wctlab.channel_sim import SimConfig, make_standard_profiles  # noqa: E402
from wctlab.config import ExperimentConfig  # noqa: E402
from wctlab.mlp import TrainConfig, init_model, loss_and_grad  # noqa: E402
from oracles import central_difference_grad  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def tiny_sim(**kw) -> SimConfig:
    base = dict(n_rb=2, n_sym=2, n_rx=2, snr_grid_db=[0.0, 10.0, 20.0], n_slots_per_snr=4)
    base.update(kw)
    return SimConfig(**base)


def random_mlp_problem(segments, seed, activation="relu", n=10, d=8):
    """f64 model with hidden dims (6, 5, 4), random biases, and a 10-sample probe batch."""
    cfg = TrainConfig(hidden_dims=(6, 5, 4), init_seed=seed, standardize=False)
    m = init_model(d, segments, cfg, activation=activation, dtype=np.float64)
    rng = np.random.default_rng(seed)
    for b in m.biases:
        b[:] = rng.normal(0, 0.1, b.shape)
    X = rng.normal(size=(d, n))
    E = np.zeros((sum(segments), n))
    off = 0
    for k in segments:
        E[off + rng.integers(0, k, n), np.arange(n)] = 1
        off += k
    return m, X, E


def gradient_relative_error(m, X, E) -> float:
    _, analytic = loss_and_grad(m, X, E)
    numeric = central_difference_grad(lambda: loss_and_grad(m, X, E)[0], m.params)
    return max(
        float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8))) for a, b in zip(analytic, numeric)
    )


@pytest.fixture
def tiny_cfg():
    return tiny_sim()


@pytest.fixture
def tiny_experiment():
    return ExperimentConfig(sim=tiny_sim(), seed=3)


@pytest.fixture(scope="session")
def standard_profiles():
    return make_standard_profiles()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
