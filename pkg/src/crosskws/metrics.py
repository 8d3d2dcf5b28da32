"""Detection metrics and result export.

Scores are detection probabilities, labels 1 for keyword-present pairs.  A
trial counts as a detection when its score is >= the threshold, so the
false-alarm rate is P(negative score >= t) and the miss rate is
P(positive score < t).  EER interpolates linearly between the two sweep
points bracketing the crossing; AUC uses the pairwise-comparison definition
with ties worth one half.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _split_scores(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D sequences")
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need at least one positive and one negative score")
    return pos, neg


def _sweep(pos: np.ndarray, neg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(far, miss) at each unique score threshold plus one beyond the max."""
    uniq = np.unique(np.concatenate([pos, neg]))
    thresholds = np.append(uniq, uniq[-1] + 1.0)
    far = (neg[None, :] >= thresholds[:, None]).mean(axis=1)
    miss = (pos[None, :] < thresholds[:, None]).mean(axis=1)
    return far, miss


def compute_eer(scores, labels) -> float:
    """Rate at the operating point where false alarms equal misses."""
    pos, neg = _split_scores(scores, labels)
    far, miss = _sweep(pos, neg)
    diff = far - miss  # starts >= 0 (far=1, miss=0), ends <= 0 (far=0, miss=1)
    idx = int(np.argmax(diff < 0))
    if diff[idx] >= 0:  # never goes negative: crossing sits at the last point
        return float(far[-1])
    if idx == 0:
        return float(far[0])
    f1, m1, f2, m2 = far[idx - 1], miss[idx - 1], far[idx], miss[idx]
    denom = (m2 - m1) - (f2 - f1)
    if denom == 0.0:
        return float((f1 + m1) / 2.0)
    s = (f1 - m1) / denom
    return float(f1 + s * (f2 - f1))


def compute_auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative."""
    pos, neg = _split_scores(scores, labels)
    cmp = pos[:, None] - neg[None, :]
    wins = (cmp > 0).sum() + 0.5 * (cmp == 0).sum()
    return float(wins / (len(pos) * len(neg)))


def det_curve(scores, labels) -> list[tuple[float, float]]:
    """(false-alarm, miss) per threshold, one point per unique score plus one.

    Sorted by threshold: far is non-increasing, miss non-decreasing, with
    endpoints (1, 0) and (0, 1) always present.
    """
    pos, neg = _split_scores(scores, labels)
    far, miss = _sweep(pos, neg)
    return [(float(f), float(m)) for f, m in zip(far, miss)]


@dataclass
class EvalReport:
    eer: float
    auc: float
    det_points: list[tuple[float, float]]
    by_length: dict[int, dict] = field(default_factory=dict)
    n_scores: int = 0

    def to_dict(self) -> dict:
        return {
            "eer": self.eer,
            "auc": self.auc,
            "n_scores": self.n_scores,
            "by_length": {str(k): v for k, v in sorted(self.by_length.items())},
        }


def build_report(scores, labels, n_words) -> EvalReport:
    """Pooled EER/AUC/DET plus a per-keyword-length breakdown (1-4 words)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_words = np.asarray(n_words)
    report = EvalReport(eer=compute_eer(scores, labels),
                        auc=compute_auc(scores, labels),
                        det_points=det_curve(scores, labels),
                        n_scores=len(scores))
    for length in range(1, 5):
        mask = n_words == length
        entry: dict = {"count": int(mask.sum())}
        sub_labels = labels[mask]
        if len(set(sub_labels.tolist())) == 2:
            entry["eer"] = compute_eer(scores[mask], sub_labels)
            entry["auc"] = compute_auc(scores[mask], sub_labels)
        else:
            entry["eer"] = None
            entry["auc"] = None
        report.by_length[length] = entry
    return report


def write_report(report: EvalReport, json_path, det_csv_path) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(det_csv_path, "w", encoding="utf-8") as fh:
        fh.write("false_alarm_rate,miss_rate\n")
        for f, m in report.det_points:
            fh.write(f"{f!r},{m!r}\n")


def export_affinity(affinity: np.ndarray, csv_path, pgm_path) -> None:
    """Dump an affinity matrix as full-precision CSV and a grayscale PGM.

    The PGM is the transpose (audio frames as rows, text positions as
    columns), scaled min -> 0 and max -> 255; a constant matrix renders as
    mid-gray 128.
    """
    a = np.asarray(affinity, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("affinity must be a nonempty 2-D matrix")
    with open(csv_path, "w", encoding="utf-8") as fh:
        for row in a:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")

    img = a.T
    lo, hi = img.min(), img.max()
    if hi > lo:
        pixels = np.round((img - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        pixels = np.full(img.shape, 128, dtype=np.uint8)
    height, width = pixels.shape
    with open(pgm_path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_affinity_csv(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return np.asarray(rows, dtype=np.float64)
