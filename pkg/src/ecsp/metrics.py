"""F1 and accuracy scoring over gold/predicted label pairs.

All three F1 averages are always computed; macro is the headline column
in reports, and every report names the averaging it shows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Sequence

import numpy as np

from .core import NUM_CLASSES, EmotionClass
from .errors import EmptyInput


@dataclass(frozen=True)
class ConfusionMatrix:
    """9x9 counts; rows are gold classes, columns are predicted classes."""

    counts: np.ndarray
    total: int

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[EmotionClass, EmotionClass]]) -> "ConfusionMatrix":
        counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
        for gold, predicted in pairs:
            counts[int(gold), int(predicted)] += 1
        counts.flags.writeable = False
        return ConfusionMatrix(counts=counts, total=int(counts.sum()))


def score(pairs: Sequence[tuple[EmotionClass, EmotionClass]]) -> dict[str, float]:
    """Compute f1_macro, f1_micro, f1_weighted, accuracy, and n.

    Per-class F1 is the harmonic mean of precision and recall with the
    zero-division convention F1_c = 0 when P_c + R_c = 0. Macro averages
    over all nine classes (zero-support classes contribute 0); weighted
    uses gold support; micro F1 equals accuracy for single-label
    multiclass.
    """
    if not pairs:
        raise EmptyInput("cannot score an empty pair list")
    cm = ConfusionMatrix.from_pairs(pairs)
    counts = cm.counts
    tp = np.diag(counts).astype(np.float64)
    gold_support = counts.sum(axis=1).astype(np.float64)
    pred_support = counts.sum(axis=0).astype(np.float64)

    f1 = np.zeros(NUM_CLASSES, dtype=np.float64)
    for c in range(NUM_CLASSES):
        precision = tp[c] / pred_support[c] if pred_support[c] > 0 else 0.0
        recall = tp[c] / gold_support[c] if gold_support[c] > 0 else 0.0
        if precision + recall > 0:
            f1[c] = 2.0 * precision * recall / (precision + recall)

    accuracy = float(tp.sum() / cm.total)
    return {
        "f1_macro": float(f1.mean()),
        "f1_micro": accuracy,
        "f1_weighted": float((gold_support * f1).sum() / cm.total),
        "accuracy": accuracy,
        "n": cm.total,
    }


def _round3(value: float) -> str:
    """Decimal half-even to 3 places; works off the shortest repr so
    0.6225 renders as 0.622 rather than tracking binary error upward."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.001"), rounding=ROUND_HALF_EVEN))


def report(rows: Sequence[tuple[str, dict[str, float]]], average: str = "macro") -> str:
    """Fixed-width table with columns Method, F1, Acc.

    The F1 column shows the requested averaging (named in the line above
    the header); values are rendered half-even to 3 decimals.
    """
    if average not in ("macro", "micro", "weighted"):
        raise ValueError(f"unknown F1 average: {average!r}")
    key = f"f1_{average}"
    width = max(6, *(len(name) for name, _ in rows)) if rows else 6
    lines = [
        f"F1 column: {average} average",
        f"{'Method':<{width}}  F1     Acc",
    ]
    for name, metrics in rows:
        lines.append(f"{name:<{width}}  {_round3(metrics[key])}  {_round3(metrics['accuracy'])}")
    return "\n".join(lines) + "\n"


def scores_to_json(method: str, metrics: dict[str, float]) -> str:
    """The scores JSON interface: one object with the method name, all
    three F1 averages, accuracy, and the pair count."""
    return json.dumps(
        {
            "method": method,
            "f1_macro": metrics["f1_macro"],
            "f1_micro": metrics["f1_micro"],
            "f1_weighted": metrics["f1_weighted"],
            "accuracy": metrics["accuracy"],
            "n": metrics["n"],
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )
