"""Five-fold cross-validation driver: video-level splits, per-fold
normalization fitted on training folds only, ensemble training, and report
assembly."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import domain, ensemble as ens_mod, featstore, metrics, tcn
from .domain import Action, DatasetManifest, class_from_index
from .tcn import ArchConfig, Normalizer, TrainConfig, WindowSample


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: dict[str, int]
    seed: int

    def test_ids(self, fold: int) -> list[str]:
        return sorted(v for v, f in self.fold_of.items() if f == fold)

    def train_ids(self, fold: int) -> list[str]:
        return sorted(v for v, f in self.fold_of.items() if f != fold)


def kfold_split(video_ids: list[str], k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle then round-robin assignment; fold sizes differ by at
    most one."""
    if k < 2:
        raise SplitError("k must be >= 2")
    if len(video_ids) < k:
        raise SplitError(f"{len(video_ids)} videos < {k} folds")
    if len(set(video_ids)) != len(video_ids):
        raise SplitError("duplicate video ids")
    rng = np.random.default_rng(seed)
    order = list(video_ids)
    rng.shuffle(order)
    return FoldAssignment(k, {v: i % k for i, v in enumerate(order)}, seed)


@dataclass
class _LoadedVideo:
    entry: domain.ManifestEntry
    seq: featstore.FeatureSequence
    gt_labels: list[domain.ClassLabel]


def _load_videos(manifest: DatasetManifest, context_len: int):
    videos: dict[str, _LoadedVideo] = {}
    warnings: list[str] = []
    for entry in manifest.videos:
        seq = featstore.read_features(entry.features)
        track = domain.parse_annotations(
            entry.annotations.read_text(), entry.meta.frame_count
        )
        if seq.T < context_len:
            warnings.append(
                f"skipped {entry.meta.id}: {seq.T} chunks < context window {context_len}"
            )
            continue
        gt = [track.label_at(int(c)) for c in seq.centers]
        videos[entry.meta.id] = _LoadedVideo(entry, seq, gt)
    if not videos:
        raise SplitError("no usable videos in manifest")
    return videos, warnings


def build_training_windows(
    videos: list[_LoadedVideo], normalizer: Normalizer, context_len: int
) -> list[WindowSample]:
    samples: list[WindowSample] = []
    for v in videos:
        windows = tcn.padded_windows(normalizer.apply(v.seq.vectors), context_len)
        for t in range(v.seq.T):
            samples.append(WindowSample(windows[t], v.gt_labels[t].index))
    return samples


def evaluate_video(
    video_id: str,
    gt_labels: list[domain.ClassLabel],
    voted: np.ndarray,
    mean_probs: np.ndarray,
) -> metrics.VideoEval:
    pred_labels = [class_from_index(int(c)) for c in voted]

    def try_level(actions):
        try:
            triple, _, supports = metrics.knot_level_eval(gt_labels, pred_labels, actions)
            return triple, supports
        except metrics.MetricError:
            return None, {}

    knot, level_supports = try_level(domain.KNOT_ACTIONS)
    tying, _ = try_level({Action.TYING_KNOT})
    pushing, _ = try_level({Action.PUSHING_KNOT})
    action_triple, _, action_supports = metrics.action_eval(gt_labels, pred_labels)
    try:
        mps = metrics.mean_precision_score(gt_labels, mean_probs)
    except metrics.MetricError:
        mps = None
    return metrics.VideoEval(
        video_id=video_id,
        knot_level=knot,
        tying_level=tying,
        pushing_level=pushing,
        action=action_triple,
        mean_precision=mps,
        level_supports=level_supports,
        action_supports=action_supports,
    )


def run_cv(
    manifest: DatasetManifest,
    arch: ArchConfig,
    train_cfg: TrainConfig,
    ensemble_seeds: list[int],
    split_seed: int,
    k: int = 5,
) -> dict:
    """Full cross-validation: returns the report as a JSON-ready dict."""
    videos, warnings = _load_videos(manifest, arch.context_len)
    assignment = kfold_split(sorted(videos), k, split_seed)
    folds = []
    pooled: list[metrics.VideoEval] = []
    for fold in range(k):
        train_ids = assignment.train_ids(fold)
        test_ids = assignment.test_ids(fold)
        train_videos = [videos[v] for v in train_ids]
        normalizer = Normalizer.fit(
            np.concatenate([v.seq.vectors for v in train_videos])
        )
        samples = build_training_windows(train_videos, normalizer, arch.context_len)
        ensemble = ens_mod.train_ensemble(
            samples, arch, train_cfg, ensemble_seeds, normalizer
        )
        evals = []
        for vid in test_ids:
            v = videos[vid]
            voted, mean_probs = ens_mod.predict_timeline(ensemble, v.seq)
            evals.append(evaluate_video(vid, v.gt_labels, voted, mean_probs))
        pooled.extend(evals)
        folds.append(
            {
                "fold": fold,
                "train_ids": train_ids,
                "test_ids": test_ids,
                "normalizer_fit_ids": train_ids,  # fitted on exactly these
                "per_video": [e.as_dict() for e in evals],
                "aggregate": metrics.aggregate(evals),
            }
        )
    leakage_ok = all(
        set(f["normalizer_fit_ids"]) == set(f["train_ids"])
        and not set(f["normalizer_fit_ids"]) & set(f["test_ids"])
        for f in folds
    )
    pooled_sorted = sorted(pooled, key=lambda e: e.video_id)
    report = {
        "config": {
            "arch": arch.to_dict(),
            "train": train_cfg.to_dict(),
            "ensemble_seeds": list(ensemble_seeds),
            "split_seed": split_seed,
            "k": k,
        },
        "folds": folds,
        "pooled": {
            "per_video": [e.as_dict() for e in pooled_sorted],
            "aggregate": metrics.aggregate(pooled_sorted),
        },
        "leakage_audit_passed": leakage_ok,
        "warnings": warnings,
    }
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _fmt_stat(stat: dict | None, comp: str) -> str:
    if stat is None:
        return "   --  "
    s = stat[comp]
    return f"{s['median']:.2f} ({s['mean']:.2f} ± {s['std']:.2f})"


def render_tables(report: dict) -> str:
    """Plain-text tables: knot-level (combined and per action), mean precision
    score, action recognition, each as median (mean +/- std) across videos."""
    agg = report["pooled"]["aggregate"]
    lines = []
    lines.append("Level of knot-related tasks  [median (mean ± std) across videos]")
    lines.append(f"{'Task':<22}{'Precision':<22}{'Sensitivity':<22}{'F1 score':<22}")
    for name, key in [
        ("Knot level (both)", "knot_level"),
        ("Tying knot", "tying_level"),
        ("Pushing knot", "pushing_level"),
    ]:
        stat = agg.get(key)
        lines.append(
            f"{name:<22}"
            f"{_fmt_stat(stat, 'precision'):<22}"
            f"{_fmt_stat(stat, 'sensitivity'):<22}"
            f"{_fmt_stat(stat, 'f1'):<22}"
        )
    lines.append("")
    lines.append("Mean precision score (threshold-averaged, knot-related levels)")
    mps = agg.get("mean_precision")
    if mps is None:
        lines.append("  no videos with knot-related ground truth")
    else:
        lines.append(
            f"  mean {mps['mean']:.2f} ± {mps['std']:.2f}  "
            f"(median {mps['median']:.2f}, n={mps['count']})"
        )
    lines.append("")
    lines.append("Action recognition")
    lines.append(f"{'Task':<22}{'Precision':<22}{'Sensitivity':<22}{'F1 score':<22}")
    stat = agg.get("action")
    lines.append(
        f"{'Action recognition':<22}"
        f"{_fmt_stat(stat, 'precision'):<22}"
        f"{_fmt_stat(stat, 'sensitivity'):<22}"
        f"{_fmt_stat(stat, 'f1'):<22}"
    )
    lines.append("")
    return "\n".join(lines)
