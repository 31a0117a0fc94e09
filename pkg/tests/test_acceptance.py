"""Acceptance criteria 1-8.

Every test appends one PASS/FAIL line to the "acceptance criteria" section
of the pytest terminal summary. Full reference-scale runs are marked ``slow``; they
run by default and take roughly 15 minutes on one core. Deselect them with
``-m "not slow"``.
"""

import hashlib
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, gradient_relative_error, random_mlp_problem
from oracles import bessel_j0_series, sample_autocorrelation
from wctlab.channel_sim import (
    RxCorrelation,
    SimConfig,
    apply_rx_correlation,
    make_example_profiles,
    realize_channel,
    realize_slots,
    tap_gains,
)
from wctlab.config import load_config
from wctlab.dataset import load_dataset, save_dataset
from wctlab.evaluation import evaluate
from wctlab.labeling import derive_task_layout, label_to_wct, multi_task_label, multi_task_labels
from wctlab.mlp import TrainConfig, load_model, save_model
from wctlab.pipeline import describe_model, fit, generate, make_labels
from wctlab.srs import NOISELESS, gen_srs, transmit_descramble

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SEEDS = (0, 1, 2)

# pinned gates
SINGLE_FULL, SINGLE_DESK = 0.80, 0.75
TASK_FLOORS = {"delay_spread": 0.85, "correlation": 0.75, "doppler": 0.95}
DESK_TRAIN_BUDGET_S = 300.0
GENERATION_BUDGET_S = 600.0
PAIRWISE_FLOOR = 0.99
GRAD_TOL = 1e-4
J0_TOL = 0.05
CORR_RANGE = (0.85, 0.95)
SNR_TOL_DB = 0.2


def record(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}")
    assert ok, detail


def _pct(x) -> str:
    return f"{100 * x:.2f}%"


def _run_scale(cfg_name: str, seeds=SEEDS) -> dict:
    """Generate each seed once, label it both ways, train and evaluate both heads."""
    cfg = load_config(CONFIGS / cfg_name)
    out = {"single": [], "multi": [], "train_s": [], "gen_s": [], "dims": None}
    for seed in seeds:
        t0 = time.perf_counter()
        ds, single, _ = generate(cfg, seed=seed, scheme="single")
        out["gen_s"].append(time.perf_counter() - t0)
        multi = make_labels(ds, cfg.sim.wcts, "multi", cfg.convention)
        if out["dims"] is None:
            offs = multi[0].layout.offsets
            out["dims"] = {
                "train": ds.train.shape,
                "infer": ds.infer.shape,
                "single": single[0].E.shape,
                "multi_segments": [multi[0].E[a:b].shape for a, b in zip(offs[:-1], offs[1:])],
            }
        for scheme, labels in (("single", single), ("multi", multi)):
            t0 = time.perf_counter()
            model, _ = fit(ds, labels, TrainConfig(init_seed=seed))
            out["train_s"].append(time.perf_counter() - t0)
            describe_model(model, ds, labels, cfg.sim.wcts, cfg.convention)
            report = evaluate(model, ds.infer, labels[1], ds.infer_meta,
                              wct_names=ds.wct_names, snr_grid_db=ds.snr_grid_db)
            out[scheme].append(report)
        del ds, single, multi
    return out


@pytest.fixture(scope="module")
def reference_runs():
    return _run_scale("reference.yaml")


@pytest.fixture(scope="module")
def desk_runs():
    return _run_scale("desk.yaml")


@pytest.mark.slow
def test_1_dimensional_fidelity(reference_runs):
    d = reference_runs["dims"]
    gen = reference_runs["gen_s"][0]
    ok = (
        d["train"] == (768, 69750)
        and d["infer"] == (768, 7750)
        and d["train"][1] + d["infer"][1] == 77500
        and d["single"] == (5, 69750)
        and d["multi_segments"] == [(3, 69750), (3, 69750), (2, 69750)]
        and gen < GENERATION_BUDGET_S
    )
    detail = (f"samples 768x{d['train'][1] + d['infer'][1]}, train {d['train']}, infer {d['infer']}, "
              f"single labels {d['single']}, multi segments {d['multi_segments']}, generation {gen:.0f} s")
    record(1, "dimensional fidelity", ok, detail)


@pytest.mark.slow
def test_2_single_task_accuracy_reference(reference_runs):
    accs = [r.overall_accuracy for r in reference_runs["single"]]
    ok = min(accs) >= SINGLE_FULL
    record(2, "single-task accuracy, reference scale",
           ok, f"per seed {', '.join(map(_pct, accs))} (mean {_pct(np.mean(accs))}), gate >= {_pct(SINGLE_FULL)}")


def test_2_single_task_accuracy_desk(desk_runs):
    accs = [r.overall_accuracy for r in desk_runs["single"]]
    slowest = max(desk_runs["train_s"])
    ok = min(accs) >= SINGLE_DESK and slowest < DESK_TRAIN_BUDGET_S
    record(2, "single-task accuracy, desk scale",
           ok, f"per seed {', '.join(map(_pct, accs))}, gate >= {_pct(SINGLE_DESK)}; "
               f"slowest training {slowest:.0f} s < {DESK_TRAIN_BUDGET_S:.0f} s")


def _task_gates(reports):
    per_task = {name: [r.per_task_accuracy[r.task_names.index(name)] for r in reports] for name in TASK_FLOORS}
    ok = all(min(v) >= TASK_FLOORS[k] for k, v in per_task.items())
    parts = [f"{k} min {_pct(min(v))} (>= {_pct(TASK_FLOORS[k])})" for k, v in per_task.items()]
    recon = np.mean([r.reconstructed_wct_accuracy for r in reports])
    return ok, "; ".join(parts) + f"; reconstructed WCT mean {_pct(recon)}"


@pytest.mark.slow
def test_3_multi_task_accuracy_reference(reference_runs):
    ok, detail = _task_gates(reference_runs["multi"])
    record(3, "multi-task accuracy, reference scale", ok, detail)


def test_3_multi_task_accuracy_desk(desk_runs):
    ok, detail = _task_gates(desk_runs["multi"])
    record(3, "multi-task accuracy, desk scale", ok, detail)


def test_4_awgn_vs_eva5_high():
    cfg = load_config(CONFIGS / "desk.yaml")
    wcts = [p for p in cfg.sim.wcts if p.name in ("AWGN", "EVA5 high correlation")]
    cfg = replace(cfg, sim=replace(cfg.sim, wcts=wcts))
    ds, labels, _ = generate(cfg, seed=0, scheme="single")
    model, _ = fit(ds, labels, TrainConfig(epochs=10))
    report = evaluate(model, ds.infer, labels[1], ds.infer_meta, wct_names=ds.wct_names, snr_grid_db=ds.snr_grid_db)
    acc = report.overall_accuracy
    record(4, "AWGN vs EVA5-high separability", acc >= PAIRWISE_FLOOR,
           f"{_pct(acc)} on {report.n_eval} samples, gate >= {_pct(PAIRWISE_FLOOR)}")


def test_5_gradient_oracle():
    worst = {}
    for head, segments in (("single", (3,)), ("multi", (2, 1, 3))):
        worst[head] = max(gradient_relative_error(*random_mlp_problem(segments, seed)) for seed in range(5))
    ok = max(worst.values()) < GRAD_TOL
    record(5, "gradient oracle", ok,
           ", ".join(f"{h} head max rel. error {e:.1e}" for h, e in worst.items()) + f" (< {GRAD_TOL:g})")


def test_6_channel_model_oracles():
    cfg = SimConfig()
    eva = cfg.wcts[3]

    times = np.arange(10_000) * cfg.slot_duration_s
    max_lag = int(round(0.1 / eva.doppler_hz / cfg.slot_duration_s))
    r = sample_autocorrelation(tap_gains(eva, cfg.n_rx, times, seed=2024)[0, 0], max_lag)
    j0 = bessel_j0_series(2 * np.pi * eva.doppler_hz * np.arange(max_lag + 1) * cfg.slot_duration_s)
    dev = float(np.max(np.abs(r.real - j0)))

    h = np.concatenate([realize_slots(cfg.wcts[4], cfg, [0], seed=s) for s in range(400)])
    a, b = h[:, 0].ravel(), h[:, 1].ravel()
    rho = abs(np.mean(a * np.conj(b))) / np.sqrt(np.mean(abs(a) ** 2) * np.mean(abs(b) ** 2))

    seq = gen_srs(cfg)
    exact = all(
        transmit_descramble(seq, ch, NOISELESS, seed=1).s.tobytes() == ch.h.ravel().tobytes()
        for ch in _channels(cfg)
    )

    snr_err = 0.0
    for snr_db in (0.0, 15.0, 30.0):
        sig, noise = [], []
        for k in range(2000):
            ch = _channel(cfg, 3, k)
            clean = transmit_descramble(seq, ch, NOISELESS, seed=k).s
            sig.append(clean)
            noise.append(transmit_descramble(seq, ch, snr_db, seed=k).s - clean)
        sig, noise = np.concatenate(sig), np.concatenate(noise)
        measured = 10 * np.log10(np.mean(abs(sig) ** 2) / np.mean(abs(noise) ** 2))
        snr_err = max(snr_err, abs(measured - snr_db))

    ok = dev <= J0_TOL and CORR_RANGE[0] <= rho <= CORR_RANGE[1] and exact and snr_err < SNR_TOL_DB
    record(6, "channel-model oracles", ok,
           f"(a) J0 max dev {dev:.3f} <= {J0_TOL}; (b) high corr {rho:.3f} in {list(CORR_RANGE)}; "
           f"(c) noiseless exact {exact}; (d) SNR error {snr_err:.3f} dB < {SNR_TOL_DB}")


def _channel(cfg, index, seed):
    return realize_channel(cfg.wcts[index], cfg, 0, seed)


def _channels(cfg):
    return [_channel(cfg, i, 11 + i) for i in range(len(cfg.wcts))]


def test_6b_high_correlation_coloring_alone():
    rng = np.random.default_rng(1)
    iid = (rng.standard_normal((2, 100_000)) + 1j * rng.standard_normal((2, 100_000))) / np.sqrt(2)
    h = apply_rx_correlation(iid, RxCorrelation.HIGH, 2)
    rho = abs(np.mean(h[0] * np.conj(h[1]))) / np.sqrt(np.mean(abs(h[0]) ** 2) * np.mean(abs(h[1]) ** 2))
    record(6, "high-correlation coloring on i.i.d. input", CORR_RANGE[0] <= rho <= CORR_RANGE[1],
           f"{rho:.3f} in {list(CORR_RANGE)}")


def test_7_labeling_oracles():
    profiles = make_example_profiles()
    layout = derive_task_layout(profiles, convention="folded")
    label = multi_task_label(profiles[2], layout).astype(int).tolist()
    worked = label == [0, 1, 0, 0, 1, 1, 0, 0]
    idx = multi_task_labels(np.arange(len(profiles))[:, None].repeat(3, axis=1), layout, profiles).class_indices()
    round_trip = all(label_to_wct(idx[:, i], layout, profiles) == p.name for i, p in enumerate(profiles))
    record(7, "labeling oracles", worked and round_trip,
           f"{profiles[2].name} -> {label}; round trip over {len(profiles)} profiles {round_trip}")


def _sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_8_determinism_and_persistence(tmp_path):
    cfg = load_config(CONFIGS / "desk.yaml")
    cfg = replace(cfg, sim=replace(cfg.sim, n_slots_per_snr=10))
    tcfg = TrainConfig(epochs=3)
    sums = {"dataset": [], "model": []}
    for run in range(2):
        ds, labels, extra = generate(cfg, seed=5, scheme="multi")
        save_dataset(ds, labels, tmp_path / f"d{run}.wct", extra=extra)
        model, _ = fit(ds, labels, tcfg)
        describe_model(model, ds, labels, cfg.sim.wcts, cfg.convention)
        save_model(model, tmp_path / f"m{run}.wmlp")
        sums["dataset"].append(_sha(tmp_path / f"d{run}.wct"))
        sums["model"].append(_sha(tmp_path / f"m{run}.wmlp"))

    ds2, labels2, header = load_dataset(tmp_path / "d0.wct")
    save_dataset(ds2, labels2, tmp_path / "d_again.wct", extra={k: header[k] for k in extra})
    save_model(load_model(tmp_path / "m0.wmlp"), tmp_path / "m_again.wmlp")
    ds_round = _sha(tmp_path / "d_again.wct") == sums["dataset"][0]
    model_round = _sha(tmp_path / "m_again.wmlp") == sums["model"][0]

    same_ds = sums["dataset"][0] == sums["dataset"][1]
    same_model = sums["model"][0] == sums["model"][1]
    ok = same_ds and same_model and ds_round and model_round
    record(8, "determinism and persistence", ok,
           f"dataset sha {sums['dataset'][0][:12]} repeated {same_ds}; model sha {sums['model'][0][:12]} "
           f"repeated {same_model}; dataset round trip {ds_round}; checkpoint round trip {model_round}")
