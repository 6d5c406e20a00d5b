"""Dataset ingestion, class statistics, and seeded splits.

Datasets are immutable after construction and keep insertion order, so
every downstream operation (splits, pair sampling, augmentation) is
reproducible from the file content and a seed alone.

File formats: JSON-lines with string fields ``id``, ``text``, ``label``
(one object per line, UTF-8), or CSV with header ``id,text,label``.
Files ending in ``.csv`` take the CSV path; everything else is read as
JSON-lines.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, ValidationError
from .rng import SplitMix64


@dataclass(frozen=True)
class LabeledExample:
    """One message with its gold label. Text may be empty."""

    id: str
    text: str
    label: str


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of labeled examples over a fixed set of label classes."""

    examples: tuple[LabeledExample, ...]
    label_classes: tuple[str, ...]
    task_name: str = ""

    def __post_init__(self):
        if not self.label_classes:
            raise ValidationError("label_classes must be non-empty")
        if len(set(self.label_classes)) != len(self.label_classes):
            raise ValidationError("label_classes contains duplicates")
        seen: set[str] = set()
        classes = set(self.label_classes)
        for ex in self.examples:
            if ex.id in seen:
                raise ValidationError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)
            if ex.label not in classes:
                raise ValidationError(
                    f"example {ex.id!r} has label {ex.label!r} outside label classes {list(self.label_classes)}"
                )

    def __len__(self) -> int:
        return len(self.examples)

    def ids(self) -> tuple[str, ...]:
        return tuple(ex.id for ex in self.examples)

    def replace_examples(self, examples: Iterable[LabeledExample]) -> "Dataset":
        return Dataset(tuple(examples), self.label_classes, self.task_name)


@dataclass(frozen=True)
class ClassDistribution:
    """Per-class example counts; every label class is present, possibly with 0."""

    counts: dict[str, int]

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class SplitResult:
    """Two disjoint parts of a dataset plus the parameters that produced them."""

    part_a: Dataset
    part_b: Dataset
    seed: int
    fraction: float
    warnings: tuple[str, ...] = field(default=())


def make_dataset(
    examples: Iterable[LabeledExample],
    label_classes: Sequence[str] | None = None,
    task_name: str = "",
) -> Dataset:
    """Build a Dataset, inferring label classes lexicographically when absent."""
    examples = tuple(examples)
    if label_classes is None:
        label_classes = tuple(sorted({ex.label for ex in examples}))
        if not label_classes:
            raise ValidationError("cannot infer label classes from an empty dataset")
    return Dataset(examples, tuple(label_classes), task_name)


def _examples_from_jsonl(path: Path) -> list[LabeledExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(record, dict):
                raise ParseError("record is not an object", line=lineno)
            out.append(_record_to_example(record, lineno))
    return out


def _examples_from_csv(path: Path) -> list[LabeledExample]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return out
        missing = {"id", "text", "label"} - set(reader.fieldnames)
        if missing:
            raise ParseError(f"CSV header missing columns: {sorted(missing)}", line=1)
        for record in reader:
            out.append(_record_to_example(record, reader.line_num))
    return out


def _record_to_example(record: Mapping, lineno: int) -> LabeledExample:
    for key in ("id", "text", "label"):
        if record.get(key) is None:
            raise ParseError(f"missing field {key!r}", line=lineno)
        if not isinstance(record[key], str):
            raise ParseError(f"field {key!r} is not a string", line=lineno)
    return LabeledExample(id=record["id"], text=record["text"], label=record["label"])


def load_dataset(
    path: str | Path,
    label_classes: Sequence[str] | None = None,
    task_name: str = "",
) -> Dataset:
    """Load a dataset file (JSON-lines, or CSV for ``.csv`` paths).

    Label classes are inferred lexicographically from the data when not
    supplied; an empty file therefore requires explicit label_classes.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    if path.suffix.lower() == ".csv":
        examples = _examples_from_csv(path)
    else:
        examples = _examples_from_jsonl(path)
    if label_classes is None and not examples:
        raise ValidationError(f"{path}: empty dataset requires explicit label_classes")
    return make_dataset(examples, label_classes, task_name=task_name)


def save_dataset(d: Dataset, path: str | Path) -> None:
    """Write a dataset as JSON-lines (UTF-8, LF)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in d.examples:
            fh.write(json.dumps({"id": ex.id, "text": ex.text, "label": ex.label}, ensure_ascii=False))
            fh.write("\n")


def class_distribution(d: Dataset) -> ClassDistribution:
    """Exact per-class counts, keyed in label-class order."""
    counts = {c: 0 for c in d.label_classes}
    for ex in d.examples:
        counts[ex.label] += 1
    return ClassDistribution(counts)


def round_half_up(x: float) -> int:
    """Round to nearest integer with .5 going up; the split-size rule."""
    return math.floor(x + 0.5)


def stratified_split(d: Dataset, fraction: float, seed: int) -> SplitResult:
    """Split per class: the holdout (part_b) gets round_half_up(n_c * fraction)
    examples of each class c, chosen by seeded shuffle within the class.

    Both parts preserve the input example order. Classes are processed in
    label-class order against a single SplitMix64 stream, so the split is a
    pure function of (dataset, fraction, seed).
    """
    _check_fraction(fraction, "fraction")
    by_class: dict[str, list[int]] = {c: [] for c in d.label_classes}
    for i, ex in enumerate(d.examples):
        by_class[ex.label].append(i)
    for c in d.label_classes:
        if not by_class[c]:
            raise ValidationError(f"stratified_split requires >= 1 example per class; class {c!r} is empty")

    rng = SplitMix64(seed)
    holdout: set[int] = set()
    for c in d.label_classes:
        indices = rng.shuffled(by_class[c])
        take = round_half_up(len(indices) * fraction)
        holdout.update(indices[:take])

    part_a = [ex for i, ex in enumerate(d.examples) if i not in holdout]
    part_b = [ex for i, ex in enumerate(d.examples) if i in holdout]
    warnings = _empty_part_warnings(len(part_a), len(part_b))
    return SplitResult(
        part_a=d.replace_examples(part_a),
        part_b=d.replace_examples(part_b),
        seed=seed,
        fraction=fraction,
        warnings=warnings,
    )


def leaderboard_split(test: Dataset, public_fraction: float = 0.3, seed: int = 0) -> SplitResult:
    """Split a test set into public (part_a) and private (part_b) portions.

    The public portion has round_half_up(N * public_fraction) examples chosen
    by a seeded shuffle over the whole set. Not stratified: gold labels of a
    test set are unknown when the split is made.
    """
    _check_fraction(public_fraction, "public_fraction")
    if len(test) == 0:
        raise ValidationError("leaderboard_split requires a non-empty test set")
    rng = SplitMix64(seed)
    order = rng.shuffled(range(len(test)))
    take = round_half_up(len(test) * public_fraction)
    public = set(order[:take])
    part_a = [ex for i, ex in enumerate(test.examples) if i in public]
    part_b = [ex for i, ex in enumerate(test.examples) if i not in public]
    warnings = _empty_part_warnings(len(part_a), len(part_b))
    return SplitResult(
        part_a=test.replace_examples(part_a),
        part_b=test.replace_examples(part_b),
        seed=seed,
        fraction=public_fraction,
        warnings=warnings,
    )


def _check_fraction(fraction: float, name: str) -> None:
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"{name} must lie in (0, 1), got {fraction}")


def _empty_part_warnings(n_a: int, n_b: int) -> tuple[str, ...]:
    warnings = []
    if n_a == 0:
        warnings.append("part_a is empty after rounding")
    if n_b == 0:
        warnings.append("part_b is empty after rounding")
    return tuple(warnings)
