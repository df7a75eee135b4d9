"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numeric failure
(training divergence or failed gradient check).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import domain, ensemble as ens_mod, featstore, harness, metrics, tcn

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

GRADCHECK_THRESHOLD = 1e-3


def _load_json_arg(value: str | None, default: dict | None = None) -> dict:
    """Accept either inline JSON or a path to a JSON file."""
    if value is None:
        return dict(default or {})
    value = value.strip()
    if value.startswith("{"):
        return json.loads(value)
    return json.loads(Path(value).read_text())


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise domain.ValidationError(f"bad seed list {text!r}") from None


def cmd_synth(args) -> int:
    cfg = featstore.SynthConfig.from_dict(_load_json_arg(args.config))
    manifest = featstore.synth_dataset(cfg, args.seed, args.out)
    print(f"wrote {len(manifest.videos)} videos to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    manifest = domain.load_manifest(args.manifest)
    arch = tcn.ArchConfig.from_dict(_load_json_arg(args.arch))
    train_cfg = tcn.TrainConfig.from_dict(_load_json_arg(args.train))
    seeds = _parse_seeds(args.seeds)
    videos, warnings = harness._load_videos(manifest, arch.context_len)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    loaded = [videos[v] for v in sorted(videos)]
    normalizer = tcn.Normalizer.fit(np.concatenate([v.seq.vectors for v in loaded]))
    samples = harness.build_training_windows(loaded, normalizer, arch.context_len)
    ensemble = ens_mod.train_ensemble(samples, arch, train_cfg, seeds, normalizer)
    ens_mod.save_ensemble(ensemble, args.out)
    print(f"trained {len(seeds)} members on {len(samples)} windows -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    ensemble = ens_mod.load_ensemble(args.ckpt)
    seq = featstore.read_features(args.features)
    voted, mean_probs = ens_mod.predict_timeline(ensemble, seq)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(
            ["center_frame", "action", "level"] + [f"p{i}" for i in range(domain.N_CLASSES)]
        )
        for t in range(seq.T):
            label = domain.class_from_index(int(voted[t]))
            w.writerow(
                [int(seq.centers[t]), label.action.name, label.level.name]
                + [f"{p:.9g}" for p in mean_probs[t]]
            )
    print(f"wrote {seq.T} predictions to {args.out}")
    return EXIT_OK


def _read_prediction_csv(path: Path):
    centers, labels, probs = [], [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:3] != ["center_frame", "action", "level"]:
            raise domain.ValidationError(f"{path}: unexpected prediction header")
        for row in reader:
            centers.append(int(row[0]))
            labels.append(
                domain.ClassLabel(domain.parse_action(row[1]), domain.parse_level(row[2]))
            )
            probs.append([float(x) for x in row[3 : 3 + domain.N_CLASSES]])
    return centers, labels, np.array(probs)


def cmd_eval(args) -> int:
    manifest = domain.load_manifest(args.manifest)
    pred_dir = Path(args.pred_dir)
    evals = []
    for entry in manifest.videos:
        pred_path = pred_dir / f"{entry.meta.id}.csv"
        if not pred_path.exists():
            print(f"warning: no predictions for {entry.meta.id}", file=sys.stderr)
            continue
        centers, pred_labels, probs = _read_prediction_csv(pred_path)
        track = domain.parse_annotations(
            entry.annotations.read_text(), entry.meta.frame_count
        )
        gt = [track.label_at(c) for c in centers]
        voted = np.array([p.index for p in pred_labels])
        evals.append(harness.evaluate_video(entry.meta.id, gt, voted, probs))
    if not evals:
        raise domain.ValidationError("no videos evaluated")
    report = {
        "per_video": [e.as_dict() for e in evals],
        "aggregate": metrics.aggregate(evals),
    }
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"evaluated {len(evals)} videos -> {args.out}")
    return EXIT_OK


def cmd_cv(args) -> int:
    manifest = domain.load_manifest(args.manifest)
    arch = tcn.ArchConfig.from_dict(_load_json_arg(args.arch))
    train_cfg = tcn.TrainConfig.from_dict(_load_json_arg(args.train))
    seeds = _parse_seeds(args.seeds)
    report = harness.run_cv(manifest, arch, train_cfg, seeds, args.split_seed, args.k)
    Path(args.out).write_text(harness.report_json(report))
    print(f"cross-validation report -> {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    arch = tcn.ArchConfig.from_dict(
        _load_json_arg(
            args.arch,
            {"input_dim": 8, "hidden_width": 8, "dilations": [1, 2]},
        )
    )
    rng = np.random.default_rng(args.seed)
    model = tcn.init_model(arch, args.seed)
    sample = tcn.WindowSample(
        rng.standard_normal((arch.context_len, arch.input_dim)),
        int(rng.integers(arch.n_classes)),
    )
    worst = tcn.grad_check(model, sample, epsilon=1e-4, n_coords=200, seed=args.seed)
    print(f"max relative discrepancy: {worst:.3e}")
    return EXIT_OK if worst < GRADCHECK_THRESHOLD else EXIT_NUMERIC


def cmd_report(args) -> int:
    report = json.loads(Path(args.cv).read_text())
    print(harness.render_tables(report), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knotrate",
        description="Windowed temporal classification and rating of knot-tying videos",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus + manifest")
    p.add_argument("--config", help="JSON file or inline JSON; defaults used if omitted")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a seed ensemble on a whole manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--arch", help="JSON file or inline JSON")
    p.add_argument("--train", help="JSON file or inline JSON")
    p.add_argument("--seeds", required=True, help="comma-separated integer seeds")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="per-chunk timeline for one feature file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="metrics from stored predictions")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--arch", help="JSON file or inline JSON")
    p.add_argument("--train", help="JSON file or inline JSON")
    p.add_argument("--seeds", required=True, help="comma-separated integer seeds")
    p.add_argument("--split-seed", type=int, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--arch", help="JSON file or inline JSON; small default if omitted")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="render plain-text result tables")
    p.add_argument("--cv", required=True, help="cross-validation report JSON")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except tcn.NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, PermissionError, IsADirectoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (
        domain.ValidationError,
        domain.DomainError,
        featstore.FeatureFormatError,
        tcn.CheckpointError,
        metrics.MetricError,
        harness.SplitError,
        json.JSONDecodeError,
        ValueError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
