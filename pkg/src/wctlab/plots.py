"""Report figures written next to the text/CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import EvalReport  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_confusion(report: EvalReport, task: int, path) -> Path:
    c = report.confusion[task].astype(float)
    rows = c.sum(axis=1, keepdims=True)
    frac = np.divide(c, rows, out=np.zeros_like(c), where=rows > 0)
    names = report.class_names[task]
    size = 1.2 + 0.9 * len(names)
    fig, ax = plt.subplots(figsize=(size + 1.5, size))
    im = ax.imshow(frac, vmin=0, vmax=1, cmap="Blues")
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"{report.task_names[task]} confusion")
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(j, i, f"{int(c[i, j])}", ha="center", va="center",
                    color="white" if frac[i, j] > 0.5 else "black", fontsize=8)
    fig.colorbar(im, ax=ax, fraction=0.046)
    return _save(fig, path)


def plot_per_snr(report: EvalReport, path) -> Path:
    snr = np.array(report.snr_db)
    acc = np.array([report.per_snr_accuracy[s] for s in report.snr_db])
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(snr, 100 * acc, "o-", ms=3)
    ax.axhline(100 * report.overall_accuracy, color="gray", ls="--", lw=1, label="overall")
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("accuracy [%]")
    ax.set_ylim(0, 101)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_history(history: list[dict], path) -> Path:
    epochs = [r["epoch"] for r in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(epochs, [r["train_loss"] for r in history], label="train")
    if history and "infer_loss" in history[0]:
        ax1.plot(epochs, [r["infer_loss"] for r in history], label="inference")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend()
    ax2.plot(epochs, [100 * r["train_acc"] for r in history], label="train")
    if history and "infer_acc" in history[0]:
        ax2.plot(epochs, [100 * r["infer_acc"] for r in history], label="inference")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("accuracy [%]")
    ax2.legend()
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    return _save(fig, path)


def write_report_figures(report: EvalReport, out_dir, prefix: str = "report") -> list[Path]:
    out_dir = Path(out_dir)
    paths = [plot_per_snr(report, out_dir / f"{prefix}_per_snr.png")]
    for t, task in enumerate(report.task_names):
        paths.append(plot_confusion(report, t, out_dir / f"{prefix}_confusion_{task}.png"))
    return paths
