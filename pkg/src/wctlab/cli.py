"""``wctlab`` command line: generate, train, eval, infer.

Exit codes: 0 success, 2 usage/config error, 3 data-format error,
4 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .channel_sim import ChannelProfile
from .config import load_config
from .dataset import VectorMode, load_dataset, read_dataset_header, save_dataset, vectorize_array
from .errors import ConfigurationError, FormatError, WctLabError
from .labeling import LabelScheme, TaskLayout, UnmatchedFeatures, label_to_wct
from .mlp import TrainConfig, load_model, predict, save_model
from .pipeline import describe_model, fit, generate

log = logging.getLogger("wctlab")


def _thread_limit(n):
    if n is None:
        env = os.environ.get("WCTLAB_THREADS")
        n = int(env) if env else None
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def _hidden(text: str) -> tuple[int, int, int]:
    try:
        dims = tuple(int(x) for x in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hidden sizes {text!r}") from None
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError("need exactly three positive hidden sizes, e.g. 512,256,128")
    return dims


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    ds, labels, extra = generate(cfg, seed=args.seed, mode=args.mode, scheme=args.scheme)
    save_dataset(ds, labels, args.out, extra=extra)
    n_feat = ds.train.shape[0]
    n_total = ds.train.shape[1] + ds.infer.shape[1]
    print(f"samples {n_feat}x{n_total}, train {ds.train.shape[1]}, infer {ds.infer.shape[1]}")
    print(f"labels ({labels[0].scheme.value}) {labels[0].E.shape[0]}x{labels[0].E.shape[1]} / "
          f"{labels[1].E.shape[0]}x{labels[1].E.shape[1]}, segments {'+'.join(map(str, labels[0].segments))}")
    print(f"wrote {args.out}")
    return 0


def _write_history(history, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "batch_loss", "train_loss", "train_acc", "infer_loss", "infer_acc"])
        for r in history:
            w.writerow([r["epoch"]] + [repr(float(r.get(k, float("nan"))))
                                       for k in ("batch_loss", "train_loss", "train_acc", "infer_loss", "infer_acc")])


def cmd_train(args) -> int:
    header = read_dataset_header(args.dataset)
    stored = header.get("labeling_scheme")
    scheme = LabelScheme.parse(args.scheme or stored)
    if stored and LabelScheme.parse(stored) is not scheme:
        raise ConfigurationError(
            f"dataset is labeled {stored!r} but --scheme {scheme.value!r} was requested; regenerate with --scheme"
        )
    ds, labels, header = load_dataset(args.dataset)
    profiles = [ChannelProfile.from_dict(p) for p in header.get("profiles", [])]
    defaults = TrainConfig()
    tcfg = TrainConfig(
        epochs=args.epochs if args.epochs is not None else defaults.epochs,
        batch_size=args.batch_size or defaults.batch_size,
        learning_rate=args.lr or defaults.learning_rate,
        init_seed=args.seed,
        hidden_dims=args.hidden or defaults.hidden_dims,
        standardize=not args.no_standardize,
    )
    model, history = fit(ds, labels, tcfg, progress=lambda r: print(
        f"epoch {r['epoch']:3d}  loss {r['train_loss']:.4f}  train {100 * r['train_acc']:.2f}%  "
        f"infer {100 * r.get('infer_acc', float('nan')):.2f}%", flush=True))
    describe_model(model, ds, labels, profiles, header.get("label_convention", "sorted"))
    out = Path(args.out)
    save_model(model, out)
    hist = Path(args.history) if args.history else out.with_suffix(".history.csv")
    _write_history(history, hist)
    if not args.no_figures and history:
        from .plots import plot_history

        plot_history(history, hist.with_suffix(".png"))
    print(f"head {model.head} dim {model.layer_dims[-1]} segments {'+'.join(map(str, model.segments))}")
    print(f"wrote {out} and {hist}")
    return 0


def cmd_eval(args) -> int:
    from .evaluation import evaluate, render_report

    model = load_model(args.model)
    ds, labels, header = load_dataset(args.dataset)
    if labels[1].scheme is not None and labels[1].scheme.value != model.head:
        raise ConfigurationError(f"dataset labels are {labels[1].scheme.value}, model head is {model.head}")
    if model.layer_dims[0] != ds.infer.shape[0]:
        raise ConfigurationError(f"model expects {model.layer_dims[0]} inputs, dataset has {ds.infer.shape[0]}")
    report = evaluate(model, ds.infer, labels[1], ds.infer_meta, wct_names=ds.wct_names, snr_grid_db=ds.snr_grid_db)
    text, table = render_report(report)
    out_dir = Path(args.out_dir or Path(args.model).parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{args.prefix}.txt").write_text(text)
    (out_dir / f"{args.prefix}.csv").write_text(table)
    if not args.no_figures:
        from .plots import write_report_figures

        write_report_figures(report, out_dir, args.prefix)
    sys.stdout.write(text)
    print(f"wrote {out_dir / (args.prefix + '.csv')}")
    return 0


def load_samples(path, n_des: int, mode) -> np.ndarray:
    """Samples file (``.npy``, one sample per row) -> feature columns.

    Complex rows of length ``n_des`` are vectorized with ``mode``; real rows
    must already have length ``2*n_des``.
    """
    try:
        arr = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read samples from {path}: {exc}") from None
    arr = np.atleast_2d(arr)
    if arr.ndim != 2:
        raise FormatError(f"samples must be 1-D or 2-D, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        if arr.shape[1] != n_des:
            raise FormatError(f"complex samples must have length {n_des} (N_des), got {arr.shape[1]}")
        arr = vectorize_array(arr, mode)
    elif arr.shape[1] != 2 * n_des:
        raise FormatError(f"real samples must have length {2 * n_des} (2*N_des), got {arr.shape[1]}")
    return arr.T.astype(np.float32)


def cmd_infer(args) -> int:
    model = load_model(args.model)
    info = model.info
    n_des = int(info.get("n_des", model.layer_dims[0] // 2))
    X = load_samples(args.samples, n_des, VectorMode.parse(info.get("mode", "reim")))
    pred = predict(model, X)
    if model.head == "single":
        names = info.get("wct_names") or [str(i) for i in range(model.layer_dims[-1])]
        for i, k in enumerate(np.atleast_1d(pred)):
            print(f"sample {i}: {names[int(k)]}")
        return 0
    layout = TaskLayout.from_dict(info["task_layout"])
    profiles = [ChannelProfile.from_dict(p) for p in info.get("profiles", [])]
    class_names = layout.class_names()
    for i, idx in enumerate(pred.T):
        feats = "  ".join(f"{t.name}={class_names[j][int(k)]}" for j, (t, k) in enumerate(zip(layout.tasks, idx)))
        wct = label_to_wct(idx, layout, profiles)
        verdict = "unconfigured combination" if isinstance(wct, UnmatchedFeatures) else wct
        print(f"sample {i}: {feats}  ->  {verdict}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wctlab", description="Wireless channel type recognition lab")
    p.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads (env WCTLAB_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize and split a labeled dataset")
    g.add_argument("config")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--mode", choices=["reim", "magphase"], default=None)
    g.add_argument("--scheme", choices=["single", "multi"], default=None)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a network on a dataset file")
    t.add_argument("dataset")
    t.add_argument("--scheme", choices=["single", "multi"], default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--hidden", type=_hidden, default=None, help="three sizes, e.g. 512,256,128")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--no-standardize", action="store_true")
    t.add_argument("--out", required=True)
    t.add_argument("--history", default=None)
    t.add_argument("--no-figures", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a model on the inference split")
    e.add_argument("model")
    e.add_argument("dataset")
    e.add_argument("--out-dir", default=None)
    e.add_argument("--prefix", default="report")
    e.add_argument("--no-figures", action="store_true")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("infer", help="classify raw descrambled samples (.npy)")
    i.add_argument("model")
    i.add_argument("samples")
    i.set_defaults(func=cmd_infer)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except WctLabError as exc:
        print(f"wctlab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"wctlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
