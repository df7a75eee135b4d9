"""One-vs-all evaluation mathematics: confusion counts, precision /
sensitivity / F1, class-weighted averaging, knot-level and action-recognition
evaluations, average precision, and per-video aggregation.

All 0/0 ratios resolve to 0.  "Sensitivity" and "recall" name the same
quantity throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .domain import Action, ClassLabel, Level, KNOT_ACTIONS, class_from_index


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise MetricError("negative confusion count")


@dataclass(frozen=True)
class MetricTriple:
    precision: float
    sensitivity: float
    f1: float

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "sensitivity": self.sensitivity,
            "f1": self.f1,
        }


def ova_counts(gt: Sequence[int], pred: Sequence[int], positive_class: int) -> MetricCounts:
    """One-vs-all confusion counts for one class."""
    if len(gt) != len(pred):
        raise MetricError(f"length mismatch: {len(gt)} vs {len(pred)}")
    if len(gt) == 0:
        raise MetricError("empty label lists")
    tp = fp = fn = 0
    for g, p in zip(gt, pred):
        if g == positive_class:
            if p == positive_class:
                tp += 1
            else:
                fn += 1
        elif p == positive_class:
            fp += 1
    return MetricCounts(tp, fp, fn)


def prf(counts: MetricCounts) -> MetricTriple:
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    s = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * p * s / (p + s) if p + s else 0.0
    return MetricTriple(p, s, f1)


def weighted_metrics(
    gt: Sequence[int], pred: Sequence[int], class_set: Iterable[int]
) -> tuple[MetricTriple, dict[int, MetricTriple], dict[int, int]]:
    """Per-class one-vs-all triples plus the support-weighted average.
    Weights are ground-truth support fractions; zero-support classes carry
    zero weight."""
    class_set = list(class_set)
    if not class_set:
        raise MetricError("empty class set")
    per_class = {c: prf(ova_counts(gt, pred, c)) for c in class_set}
    supports = {c: sum(1 for g in gt if g == c) for c in class_set}
    total = sum(supports.values())
    if total == 0:
        raise MetricError("no evaluated positions")
    weighted = MetricTriple(
        sum(supports[c] * per_class[c].precision for c in class_set) / total,
        sum(supports[c] * per_class[c].sensitivity for c in class_set) / total,
        sum(supports[c] * per_class[c].f1 for c in class_set) / total,
    )
    return weighted, per_class, supports


def _restrict_to_actions(
    gt_timeline: Sequence[ClassLabel],
    pred_timeline: Sequence[ClassLabel],
    actions_filter: Iterable[Action],
) -> tuple[list[int], list[int]]:
    actions = set(actions_filter)
    gt_levels, pred_levels = [], []
    for g, p in zip(gt_timeline, pred_timeline):
        if g.action in actions:
            gt_levels.append(int(g.level))
            pred_levels.append(int(p.level))
    return gt_levels, pred_levels


def knot_level_eval(
    gt_timeline: Sequence[ClassLabel],
    pred_timeline: Sequence[ClassLabel],
    actions_filter: Iterable[Action] = KNOT_ACTIONS,
) -> tuple[MetricTriple, dict[int, MetricTriple], dict[int, int]]:
    """Level metrics restricted to positions whose ground-truth action is in
    the filter.  The predicted level is the level component of the predicted
    12-class label, regardless of the predicted action."""
    if len(gt_timeline) != len(pred_timeline):
        raise MetricError("timeline length mismatch")
    gt_levels, pred_levels = _restrict_to_actions(gt_timeline, pred_timeline, actions_filter)
    if not gt_levels:
        raise MetricError("no knot-related ground truth in timeline")
    return weighted_metrics(gt_levels, pred_levels, [int(l) for l in Level])


def action_eval(
    gt_timeline: Sequence[ClassLabel], pred_timeline: Sequence[ClassLabel]
) -> tuple[MetricTriple, dict[int, MetricTriple], dict[int, int]]:
    """Action-recognition metrics over all positions."""
    if len(gt_timeline) != len(pred_timeline):
        raise MetricError("timeline length mismatch")
    if not gt_timeline:
        raise MetricError("empty timelines")
    gt_actions = [int(g.action) for g in gt_timeline]
    pred_actions = [int(p.action) for p in pred_timeline]
    return weighted_metrics(gt_actions, pred_actions, [int(a) for a in Action])


def average_precision(gt_binary: Sequence[int], scores: Sequence[float]) -> float:
    """Recall-increment-weighted mean of precision over descending score
    thresholds; equal scores are processed as one threshold step."""
    if len(gt_binary) != len(scores):
        raise MetricError("length mismatch")
    gt = np.asarray(gt_binary, dtype=np.int64)
    sc = np.asarray(scores, dtype=np.float64)
    n_pos = int(gt.sum())
    if n_pos == 0:
        raise MetricError("no positive examples")
    order = np.argsort(-sc, kind="stable")
    gt_sorted = gt[order]
    sc_sorted = sc[order]
    tp = fp = 0
    ap = 0.0
    prev_recall = 0.0
    i = 0
    n = len(gt)
    while i < n:
        j = i
        while j < n and sc_sorted[j] == sc_sorted[i]:
            j += 1
        tp += int(gt_sorted[i:j].sum())
        fp += (j - i) - int(gt_sorted[i:j].sum())
        precision = tp / (tp + fp)
        recall = tp / n_pos
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return ap


def mean_precision_score(
    gt_timeline: Sequence[ClassLabel],
    pred_probs: np.ndarray,
    actions_filter: Iterable[Action] = KNOT_ACTIONS,
) -> float:
    """Support-weighted mean over level classes of the average precision of
    detecting that level at knot-filtered positions; a level's score at a
    position is the summed probability over (action in filter, level)."""
    actions = set(actions_filter)
    idx = [i for i, g in enumerate(gt_timeline) if g.action in actions]
    if not idx:
        raise MetricError("no knot-related ground truth in timeline")
    probs = np.asarray(pred_probs, dtype=np.float64)
    if probs.shape[0] != len(gt_timeline):
        raise MetricError("probability rows do not match timeline length")
    gt_levels = np.array([int(gt_timeline[i].level) for i in idx])
    total = 0.0
    weight_sum = 0
    for level in Level:
        support = int((gt_levels == int(level)).sum())
        if support == 0:
            continue
        cols = [int(a) * 3 + int(level) for a in actions]
        scores = probs[idx][:, cols].sum(axis=1)
        ap = average_precision((gt_levels == int(level)).astype(int), scores)
        total += support * ap
        weight_sum += support
    return total / weight_sum


@dataclass(frozen=True)
class VideoEval:
    video_id: str
    knot_level: MetricTriple | None
    tying_level: MetricTriple | None
    pushing_level: MetricTriple | None
    action: MetricTriple
    mean_precision: float | None
    level_supports: dict[int, int] = field(default_factory=dict)
    action_supports: dict[int, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "knot_level": self.knot_level.as_dict() if self.knot_level else None,
            "tying_level": self.tying_level.as_dict() if self.tying_level else None,
            "pushing_level": self.pushing_level.as_dict() if self.pushing_level else None,
            "action": self.action.as_dict(),
            "mean_precision": self.mean_precision,
            "level_supports": {str(k): v for k, v in sorted(self.level_supports.items())},
            "action_supports": {str(k): v for k, v in sorted(self.action_supports.items())},
        }


@dataclass(frozen=True)
class AggregateStat:
    median: float
    mean: float
    std: float
    count: int

    def as_dict(self) -> dict:
        return {"median": self.median, "mean": self.mean, "std": self.std, "count": self.count}


def aggregate_values(values: Sequence[float]) -> AggregateStat:
    """Median (even count: mean of the two middle values), mean, and
    population standard deviation."""
    if len(values) == 0:
        raise MetricError("nothing to aggregate")
    arr = np.asarray(values, dtype=np.float64)
    return AggregateStat(
        median=float(np.median(arr)),
        mean=float(arr.mean()),
        std=float(arr.std()),
        count=len(arr),
    )


_TASK_FIELDS = ("knot_level", "tying_level", "pushing_level", "action")


def aggregate(per_video: Sequence[VideoEval]) -> dict:
    """Per-task, per-component aggregates across videos.  Videos lacking a
    task (no qualifying ground truth) are skipped for that task; the retained
    count is reported."""
    if not per_video:
        raise MetricError("no videos to aggregate")
    out: dict = {}
    for task in _TASK_FIELDS:
        triples = [getattr(v, task) for v in per_video if getattr(v, task) is not None]
        if not triples:
            out[task] = None
            continue
        out[task] = {
            comp: aggregate_values([getattr(t, comp) for t in triples]).as_dict()
            for comp in ("precision", "sensitivity", "f1")
        }
    mps = [v.mean_precision for v in per_video if v.mean_precision is not None]
    out["mean_precision"] = aggregate_values(mps).as_dict() if mps else None
    return out
