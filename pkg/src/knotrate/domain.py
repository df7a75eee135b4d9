"""Label model, annotation parsing, video metadata, and chunk windowing.

Everything here is immutable value data and pure functions; nothing touches
the filesystem except manifest loading.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

N_CLASSES = 12

DEFAULT_CHUNK_LEN = 16
DEFAULT_CHUNK_STRIDE = 8


class DomainError(ValueError):
    """Raised on violated preconditions (out-of-range frames, bad indices)."""


class ValidationError(ValueError):
    """Raised when an annotation file or manifest fails validation."""


class Action(IntEnum):
    WAITING = 0
    NEEDLING = 1
    PUSHING_KNOT = 2
    TYING_KNOT = 3


#: Actions whose quality level is scored jointly as "knot-related".
KNOT_ACTIONS = frozenset({Action.PUSHING_KNOT, Action.TYING_KNOT})


class Level(IntEnum):
    GOOD = 0
    OKAY = 1
    BAD = 2


_ACTION_BY_NAME = {a.name.replace("_", "").lower(): a for a in Action}
# accept both "pushingknot" and "pushing_knot" spellings
_ACTION_BY_NAME.update({a.name.lower(): a for a in Action})
_LEVEL_BY_NAME = {l.name.lower(): l for l in Level}


def parse_action(token: str) -> Action:
    try:
        return _ACTION_BY_NAME[token.strip().replace("_", "").lower()]
    except KeyError:
        raise ValidationError(f"unknown action token {token!r}") from None


def parse_level(token: str) -> Level:
    try:
        return _LEVEL_BY_NAME[token.strip().lower()]
    except KeyError:
        raise ValidationError(f"unknown level token {token!r}") from None


@dataclass(frozen=True)
class ClassLabel:
    """(action, level) pair; canonical index = action*3 + level, in [0, 11]."""

    action: Action
    level: Level

    @property
    def index(self) -> int:
        return int(self.action) * 3 + int(self.level)


def class_index(label: ClassLabel) -> int:
    return label.index


def class_from_index(index: int) -> ClassLabel:
    if not 0 <= index < N_CLASSES:
        raise DomainError(f"class index {index} outside [0, {N_CLASSES - 1}]")
    return ClassLabel(Action(index // 3), Level(index % 3))


@dataclass(frozen=True)
class AnnotationTrack:
    """Ordered, contiguous, inclusive frame intervals covering a whole video."""

    intervals: tuple[tuple[int, int, ClassLabel], ...]
    frame_count: int

    def label_at(self, frame: int) -> ClassLabel:
        return label_at(self, frame)


def label_at(track: AnnotationTrack, frame: int) -> ClassLabel:
    if not 0 <= frame < track.frame_count:
        raise DomainError(
            f"frame {frame} outside [0, {track.frame_count - 1}]"
        )
    # intervals are contiguous, so a linear scan is unambiguous
    for start, end, label in track.intervals:
        if start <= frame <= end:
            return label
    raise AssertionError("contiguous track failed to cover a valid frame")


def parse_annotations(text: str, frame_count: int) -> AnnotationTrack:
    """Parse annotation CSV (`start_frame,end_frame,action,level`) into a
    validated track.  Intervals must be sorted, non-overlapping, contiguous,
    and cover [0, frame_count - 1] exactly."""
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if rows and rows[0][0].strip().lower() == "start_frame":
        rows = rows[1:]
    if not rows:
        raise ValidationError("annotation file has no data rows")

    intervals: list[tuple[int, int, ClassLabel]] = []
    expected_start = 0
    for i, row in enumerate(rows, start=1):
        if len(row) != 4:
            raise ValidationError(f"row {i}: expected 4 fields, got {len(row)}")
        try:
            start, end = int(row[0]), int(row[1])
        except ValueError:
            raise ValidationError(f"row {i}: non-integer frame index") from None
        label = ClassLabel(parse_action(row[2]), parse_level(row[3]))
        if end < start:
            raise ValidationError(f"row {i}: end {end} < start {start}")
        if start > expected_start:
            raise ValidationError(
                f"row {i}: gap, frames {expected_start}..{start - 1} unlabeled"
            )
        if start < expected_start:
            raise ValidationError(
                f"row {i}: overlap, frame {start} already labeled"
            )
        intervals.append((start, end, label))
        expected_start = end + 1
    if expected_start != frame_count:
        if expected_start < frame_count:
            raise ValidationError(
                f"tail frames {expected_start}..{frame_count - 1} unlabeled"
            )
        raise ValidationError(
            f"last interval ends at {expected_start - 1}, "
            f"beyond frame_count {frame_count}"
        )
    return AnnotationTrack(tuple(intervals), frame_count)


def track_to_csv(track: AnnotationTrack) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["start_frame", "end_frame", "action", "level"])
    for start, end, label in track.intervals:
        w.writerow([start, end, label.action.name, label.level.name])
    return out.getvalue()


@dataclass(frozen=True)
class VideoMeta:
    id: str
    student_level: str
    fps: float
    frame_count: int

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValidationError(f"video {self.id}: frame_count < 1")
        if not 1 <= self.fps <= 240:
            raise ValidationError(f"video {self.id}: fps {self.fps} outside [1, 240]")


@dataclass(frozen=True)
class Chunk:
    start_frame: int
    chunk_len: int

    @property
    def center_frame(self) -> int:
        return self.start_frame + self.chunk_len // 2


def chunk_video(
    frame_count: int,
    chunk_len: int = DEFAULT_CHUNK_LEN,
    chunk_stride: int = DEFAULT_CHUNK_STRIDE,
) -> list[Chunk]:
    """Window a video into fixed-length chunks at a fixed stride; chunk i
    starts at i*stride.  Count = floor((frame_count - chunk_len)/stride) + 1."""
    if chunk_len < 1 or chunk_stride < 1:
        raise DomainError("chunk_len and chunk_stride must be >= 1")
    if chunk_len > frame_count:
        raise DomainError(
            f"video shorter than one chunk ({frame_count} < {chunk_len})"
        )
    n = (frame_count - chunk_len) // chunk_stride + 1
    return [Chunk(i * chunk_stride, chunk_len) for i in range(n)]


def chunk_labels(track: AnnotationTrack, chunks: list[Chunk]) -> list[ClassLabel]:
    """Label of each chunk = annotation at its center frame."""
    return [label_at(track, c.center_frame) for c in chunks]


@dataclass(frozen=True)
class ManifestEntry:
    meta: VideoMeta
    annotations: Path
    features: Path


@dataclass(frozen=True)
class DatasetManifest:
    videos: tuple[ManifestEntry, ...]

    def __post_init__(self):
        if not self.videos:
            raise ValidationError("manifest has no videos")
        ids = [v.meta.id for v in self.videos]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate video ids in manifest")
        paths = [v.annotations for v in self.videos] + [v.features for v in self.videos]
        if len(set(paths)) != len(paths):
            raise ValidationError("manifest references the same path twice")


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"manifest {path}: invalid JSON: {e}") from None
    base = path.parent
    entries = []
    for v in doc.get("videos", []):
        meta = VideoMeta(
            id=str(v["id"]),
            student_level=str(v["student_level"]),
            fps=float(v["fps"]),
            frame_count=int(v["frame_count"]),
        )
        entries.append(
            ManifestEntry(meta, base / v["annotations"], base / v["features"])
        )
    return DatasetManifest(tuple(entries))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    base = path.parent
    doc = {
        "videos": [
            {
                "id": e.meta.id,
                "student_level": e.meta.student_level,
                "fps": e.meta.fps,
                "frame_count": e.meta.frame_count,
                "annotations": str(e.annotations.relative_to(base)),
                "features": str(e.features.relative_to(base)),
            }
            for e in manifest.videos
        ]
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
