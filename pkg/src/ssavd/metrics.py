"""Evaluation metrics: accuracy, rank-based AUC, and the metric report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


def auc(scores, labels):
    """Area under the ROC curve via the rank statistic, midrank ties.

    ``labels`` are 1 for the positive class.  Returns None when either
    class is absent (reported absent rather than zero).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(scores, labels, threshold=0.5):
    """Fraction of correct decisions at the given score threshold."""
    scores = np.asarray(scores)
    labels = np.asarray(labels).astype(int)
    preds = (scores > threshold).astype(int)
    return float((preds == labels).mean())


@dataclass
class MetricReport:
    """Per-target ACC/AUC plus the training loss curve and model size."""

    acc: dict = field(default_factory=dict)  # target -> float
    auc: dict = field(default_factory=dict)  # target -> float or None
    loss_curve: list = field(default_factory=list)
    param_count: int = 0

    def to_dict(self):
        return {
            "acc": self.acc,
            "auc": self.auc,
            "loss_curve": self.loss_curve,
            "param_count": self.param_count,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            acc=dict(d.get("acc", {})),
            auc=dict(d.get("auc", {})),
            loss_curve=list(d.get("loss_curve", [])),
            param_count=int(d.get("param_count", 0)),
        )

    def render(self):
        """Key/value lines, one metric per line, plus a JSON block."""
        lines = []
        for target in sorted(self.acc):
            lines.append(f"acc_{target} = {self.acc[target]:.6f}")
        for target in sorted(self.auc):
            value = self.auc[target]
            lines.append(f"auc_{target} = {'absent' if value is None else f'{value:.6f}'}")
        lines.append(f"param_count = {self.param_count}")
        lines.append("")
        lines.append(json.dumps(self.to_dict(), sort_keys=True))
        lines.append("")
        return "\n".join(lines)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            text = fh.read()
        for line in reversed(text.strip().splitlines()):
            line = line.strip()
            if line.startswith("{"):
                return cls.from_dict(json.loads(line))
        raise ValueError(f"no JSON block found in report {path}")
