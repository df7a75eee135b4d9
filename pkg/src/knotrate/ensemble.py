"""Seed ensembling: several identically configured models differing only in
initialization/shuffle seed, combined by majority vote for labels and by
probability averaging for scores."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tcn
from .featstore import FeatureSequence
from .tcn import ArchConfig, Normalizer, TemporalModel, TrainConfig, WindowSample

#: The ten initialization seeds used for the reference ensemble.
DEFAULT_SEEDS = (2022, 30548, 85844, 20, 180, 357, 485621, 102314, 305945, 0)


@dataclass
class Ensemble:
    members: list[TemporalModel]
    seeds: list[int]
    normalizer: Normalizer

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("ensemble seeds must be pairwise distinct")
        if len({json.dumps(m.arch.to_dict(), sort_keys=True) for m in self.members}) != 1:
            raise ValueError("all members must share one architecture")

    @property
    def arch(self) -> ArchConfig:
        return self.members[0].arch


def train_ensemble(
    dataset: list[WindowSample],
    arch: ArchConfig,
    train_cfg: TrainConfig,
    seeds: list[int],
    normalizer: Normalizer,
) -> Ensemble:
    """Train one member per seed; the seed drives both initialization and the
    member's shuffle order."""
    if not seeds:
        raise ValueError("no seeds given")
    if len(set(seeds)) != len(seeds):
        raise ValueError("duplicate seeds")
    members = []
    for seed in seeds:
        model = tcn.init_model(arch, seed)
        cfg = dataclasses.replace(train_cfg, seed=seed)
        model, _ = tcn.train(model, dataset, cfg)
        members.append(model)
    return Ensemble(members, list(seeds), normalizer)


def vote(member_labels: list[int], member_probs: list[np.ndarray]) -> int:
    """Plurality label; ties broken by highest mean probability among the tied
    classes, then by lowest class index."""
    if not member_labels:
        raise ValueError("empty vote")
    counts = np.bincount(member_labels, minlength=12)
    top = counts.max()
    tied = np.flatnonzero(counts == top)
    if len(tied) == 1:
        return int(tied[0])
    mean_probs = np.mean(member_probs, axis=0)
    winners = tied[mean_probs[tied] == mean_probs[tied].max()]
    return int(winners.min())


def predict_timeline(
    ens: Ensemble, seq: FeatureSequence
) -> tuple[np.ndarray, np.ndarray]:
    """Per-position voted labels (T,) and mean member probabilities (T, 12)."""
    member_probs = []
    member_labels = []
    for m in ens.members:
        probs, labels = tcn.predict_sequence(m, seq, ens.normalizer)
        member_probs.append(probs)
        member_labels.append(labels)
    stacked = np.stack(member_probs)  # (N, T, 12)
    mean_probs = stacked.mean(axis=0)
    voted = np.array(
        [
            vote([int(l[t]) for l in member_labels], [p[t] for p in member_probs])
            for t in range(seq.T)
        ],
        dtype=np.int64,
    )
    return voted, mean_probs


def arch_hash(arch: ArchConfig) -> str:
    return hashlib.sha256(
        json.dumps(arch.to_dict(), sort_keys=True).encode()
    ).hexdigest()[:16]


def save_ensemble(ens: Ensemble, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for seed, member in zip(ens.seeds, ens.members):
        tcn.save_model(member, ens.normalizer, out_dir / f"member_{seed}.ktmc")
    index = {
        "seeds": list(ens.seeds),
        "arch": ens.arch.to_dict(),
        "arch_hash": arch_hash(ens.arch),
    }
    (out_dir / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")


def load_ensemble(ckpt_dir: str | Path) -> Ensemble:
    ckpt_dir = Path(ckpt_dir)
    index = json.loads((ckpt_dir / "index.json").read_text())
    members = []
    normalizer = None
    for seed in index["seeds"]:
        model, normalizer = tcn.load_model(ckpt_dir / f"member_{seed}.ktmc")
        members.append(model)
    return Ensemble(members, list(index["seeds"]), normalizer)
