"""Accuracy, confusion matrices and per-SNR breakdown, plus text/CSV rendering.

CSV schema (header ``section,task,key,n,correct,value``):

=============  ==========  ==============  ===================================
section        task        key             meaning
=============  ==========  ==============  ===================================
meta           -           scheme / ...    ``value`` holds the string
overall        -           all             n, correct, accuracy
reconstructed  -           all             multi-task: all features correct
task           task name   all             per-task n, correct, accuracy
class          task name   class name      per-class recall (``N/A`` if n=0)
snr            -           SNR in dB       per-SNR n, correct, accuracy
confusion      task name   ``i|j``         count of true i predicted j in ``n``
=============  ==========  ==============  ===================================
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .channel_sim import ChannelProfile
from .labeling import LabelScheme, TaskLayout, feature_indices, segment_argmax
from .mlp import MlpModel, predict_from_logits, predict_logits

CSV_FIELDS = ("section", "task", "key", "n", "correct", "value")


@dataclass
class EvalReport:
    scheme: str
    task_names: list[str]
    class_names: list[list[str]]
    confusion: list[np.ndarray]
    snr_db: list[float]
    snr_counts: np.ndarray  # (n_snr, 2): n, correct (all tasks correct)
    n_eval: int
    n_correct: int
    n_unmatched: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def overall_accuracy(self) -> float:
        return self.n_correct / self.n_eval if self.n_eval else float("nan")

    @property
    def per_task_accuracy(self) -> list[float]:
        return [np.trace(c) / c.sum() if c.sum() else float("nan") for c in self.confusion]

    @property
    def reconstructed_wct_accuracy(self) -> float | None:
        return self.overall_accuracy if self.scheme == "multi" else None

    @property
    def per_snr_accuracy(self) -> dict[float, float]:
        return {
            s: (c / n if n else float("nan")) for s, (n, c) in zip(self.snr_db, self.snr_counts.tolist())
        }

    def per_class(self, task: int) -> list[tuple[str, int, int]]:
        c = self.confusion[task]
        return [(name, int(c[i].sum()), int(c[i, i])) for i, name in enumerate(self.class_names[task])]


def evaluate_predictions(
    true_idx: np.ndarray,
    pred_idx: np.ndarray,
    column_meta: np.ndarray,
    *,
    scheme: str,
    task_names,
    class_names,
    snr_grid_db,
    matched: np.ndarray | None = None,
) -> EvalReport:
    """Count-based report from per-task true/predicted class indices ``(n_tasks, n)``."""
    true_idx = np.atleast_2d(true_idx)
    pred_idx = np.atleast_2d(pred_idx)
    n = true_idx.shape[1]
    confusion = []
    for t, names in enumerate(class_names):
        k = len(names)
        confusion.append(np.bincount(true_idx[t] * k + pred_idx[t], minlength=k * k).reshape(k, k))
    correct = (true_idx == pred_idx).all(axis=0)
    snr_idx = np.asarray(column_meta)[:, 2].astype(np.int64) if n else np.zeros(0, dtype=np.int64)
    n_snr = len(snr_grid_db)
    counts = np.stack(
        [np.bincount(snr_idx, minlength=n_snr), np.bincount(snr_idx, weights=correct, minlength=n_snr)], axis=1
    ).astype(np.int64)
    n_unmatched = int((~matched).sum()) if matched is not None else 0
    return EvalReport(
        scheme=scheme,
        task_names=list(task_names),
        class_names=[list(c) for c in class_names],
        confusion=confusion,
        snr_db=[float(s) for s in snr_grid_db],
        snr_counts=counts,
        n_eval=int(n),
        n_correct=int(correct.sum()),
        n_unmatched=n_unmatched,
    )


def evaluate(model: MlpModel, samples: np.ndarray, labels, column_meta, *, wct_names=None, snr_grid_db=None) -> EvalReport:
    """Evaluate ``model`` on ``samples`` (columns) against ``labels``."""
    E = np.asarray(getattr(labels, "E", labels))
    layout = getattr(labels, "layout", None)
    if layout is None and model.info.get("task_layout"):
        layout = TaskLayout.from_dict(model.info["task_layout"])
    logits = predict_logits(model, samples)
    pred = predict_from_logits(logits, model.segments)
    true = segment_argmax(E, model.segments)
    snr_grid_db = snr_grid_db if snr_grid_db is not None else model.info.get("snr_grid")
    if snr_grid_db is None:
        snr_grid_db = list(range(int(np.asarray(column_meta)[:, 2].max()) + 1))
    matched = None
    if model.head == LabelScheme.MULTI.value:
        task_names = [t.name for t in layout.tasks]
        class_names = layout.class_names()
        profiles = model.info.get("profiles")
        if profiles:
            codes = {feature_indices(ChannelProfile.from_dict(p), layout) for p in profiles}
            matched = np.array([tuple(c) in codes for c in pred.T.tolist()], dtype=bool)
    else:
        task_names = ["wct"]
        names = wct_names or model.info.get("wct_names") or [str(i) for i in range(model.segments[0])]
        class_names = [list(names)]
    return evaluate_predictions(
        true, pred, column_meta,
        scheme=model.head, task_names=task_names, class_names=class_names,
        snr_grid_db=snr_grid_db, matched=matched,
    )


def _fmt_acc(n, c) -> str:
    return f"{100.0 * c / n:6.2f}%" if n else "    N/A"


def render_text(report: EvalReport) -> str:
    lines = [f"scheme: {report.scheme}    samples: {report.n_eval}"]
    label = "reconstructed WCT accuracy" if report.scheme == "multi" else "classification accuracy"
    lines.append(f"{label}: {_fmt_acc(report.n_eval, report.n_correct).strip()}")
    if report.scheme == "multi":
        lines.append(f"unconfigured feature combinations predicted: {report.n_unmatched}")
    lines.append("")
    width = max([len(n) for names in report.class_names for n in names] + [12])
    for t, task in enumerate(report.task_names):
        c = report.confusion[t]
        lines.append(f"task {task}: accuracy {_fmt_acc(int(c.sum()), int(np.trace(c))).strip()}")
        lines.append(f"  {'class':<{width}} {'n':>7} {'accuracy':>9}")
        for name, n, corr in report.per_class(t):
            lines.append(f"  {name:<{width}} {n:>7} {_fmt_acc(n, corr):>9}")
        lines.append("  confusion (rows true, columns predicted):")
        for i, name in enumerate(report.class_names[t]):
            lines.append(f"  {name:<{width}} " + " ".join(f"{v:>7}" for v in c[i]))
        lines.append("")
    lines.append(f"  {'SNR [dB]':>8} {'n':>7} {'accuracy':>9}")
    for s, (n, corr) in zip(report.snr_db, report.snr_counts.tolist()):
        lines.append(f"  {s:>8g} {n:>7} {_fmt_acc(n, corr):>9}")
    return "\n".join(lines) + "\n"


def render_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)

    def acc(n, c):
        return repr(c / n) if n else "N/A"

    w.writerow(["meta", "", "scheme", "", "", report.scheme])
    w.writerow(["meta", "", "unmatched", report.n_unmatched, "", ""])
    w.writerow(["overall", "", "all", report.n_eval, report.n_correct, acc(report.n_eval, report.n_correct)])
    if report.scheme == "multi":
        w.writerow(["reconstructed", "", "all", report.n_eval, report.n_correct, acc(report.n_eval, report.n_correct)])
    for t, task in enumerate(report.task_names):
        c = report.confusion[t]
        w.writerow(["task", task, "all", int(c.sum()), int(np.trace(c)), acc(int(c.sum()), int(np.trace(c)))])
        for name, n, corr in report.per_class(t):
            w.writerow(["class", task, name, n, corr, acc(n, corr)])
    for s, (n, corr) in zip(report.snr_db, report.snr_counts.tolist()):
        w.writerow(["snr", "", repr(float(s)), n, corr, acc(n, corr)])
    for t, task in enumerate(report.task_names):
        c = report.confusion[t]
        for i in range(c.shape[0]):
            for j in range(c.shape[1]):
                w.writerow(["confusion", task, f"{i}|{j}", int(c[i, j]), "", ""])
    return buf.getvalue()


def render_report(report: EvalReport) -> tuple[str, str]:
    return render_text(report), render_csv(report)


def parse_report_csv(text: str) -> EvalReport:
    rows = list(csv.DictReader(io.StringIO(text)))
    scheme = next(r["value"] for r in rows if r["section"] == "meta" and r["key"] == "scheme")
    unmatched = next((int(r["n"]) for r in rows if r["section"] == "meta" and r["key"] == "unmatched"), 0)
    overall = next(r for r in rows if r["section"] == "overall")
    task_names = [r["task"] for r in rows if r["section"] == "task"]
    class_names = [[r["key"] for r in rows if r["section"] == "class" and r["task"] == t] for t in task_names]
    confusion = [np.zeros((len(c), len(c)), dtype=np.int64) for c in class_names]
    for r in rows:
        if r["section"] == "confusion":
            i, j = (int(x) for x in r["key"].split("|"))
            confusion[task_names.index(r["task"])][i, j] = int(r["n"])
    snr_rows = [r for r in rows if r["section"] == "snr"]
    counts = np.array([[int(r["n"]), int(r["correct"])] for r in snr_rows], dtype=np.int64).reshape(-1, 2)
    return EvalReport(
        scheme=scheme,
        task_names=task_names,
        class_names=class_names,
        confusion=confusion,
        snr_db=[float(r["key"]) for r in snr_rows],
        snr_counts=counts,
        n_eval=int(overall["n"]),
        n_correct=int(overall["correct"]),
        n_unmatched=unmatched,
    )
