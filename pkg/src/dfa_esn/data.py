"""Dataset ingestion: the UEA ``.ts`` text format, a long-format CSV
fallback, and train-statistics normalization.

Only equal-length multivariate classification datasets are supported.
Missing-value markers (``?``/``NaN``) are rejected unless linear
interpolation is requested.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ShapeError


@dataclass(frozen=True)
class LabeledSeries:
    """One multivariate series: (steps, dims) values and a class index."""

    values: np.ndarray
    label: int
    source_id: str


@dataclass
class DatasetHalf:
    """One split of a dataset plus the metadata shared by both splits."""

    series: list[LabeledSeries]
    class_names: list[str]
    dims: int
    length: int
    problem_name: str = ""


@dataclass
class Dataset:
    train: list[LabeledSeries]
    test: list[LabeledSeries]
    class_names: list[str]
    dims: int
    length: int

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def combine_halves(train: DatasetHalf, test: DatasetHalf) -> Dataset:
    if train.class_names != test.class_names:
        raise ParseError(
            f"train/test class vocabularies differ: {train.class_names} vs {test.class_names}"
        )
    if (train.dims, train.length) != (test.dims, test.length):
        raise ParseError(
            f"train/test shapes differ: {train.dims}x{train.length} vs {test.dims}x{test.length}"
        )
    return Dataset(train.series, test.series, train.class_names, train.dims, train.length)


# ---------------------------------------------------------------------------
# .ts format

_TRUE = {"true", "1", "yes"}
_FALSE = {"false", "0", "no"}


def _parse_bool(value: str, key: str, line: int) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ParseError(f"@{key} expects true/false, got {value!r}", line)


def _parse_number(token: str, line: int, record: str, interpolate: bool) -> float:
    tok = token.strip()
    if tok in ("?", "") or tok.lower() == "nan":
        if interpolate:
            return np.nan
        raise ParseError(
            f"record {record}: missing value {tok!r} (enable interpolation to impute)", line
        )
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"record {record}: bad number {tok!r}", line) from None


def _interpolate_missing(grid: np.ndarray, record: str, line: int) -> np.ndarray:
    for d in range(grid.shape[1]):
        col = grid[:, d]
        bad = np.isnan(col)
        if not bad.any():
            continue
        if bad.all():
            raise ParseError(f"record {record}: dimension {d} is entirely missing", line)
        idx = np.arange(len(col))
        col[bad] = np.interp(idx[bad], idx[~bad], col[~bad])
    return grid


def parse_ts(text: str | bytes, interpolate_missing: bool = False) -> DatasetHalf:
    """Parse one ``.ts`` file (one dataset split).

    Header: ``@``-prefixed key/value lines (problemName, dimensions or
    univariate, equalLength, seriesLength, classLabel with its vocabulary),
    then ``@data``, then one record per line with ``:``-separated dimensions
    of comma-separated values and the class label after the final ``:``.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    meta: dict[str, str] = {}
    class_names: list[str] = []
    series: list[LabeledSeries] = []
    in_data = False
    data_line_seen = False
    declared_dims: int | None = None
    declared_len: int | None = None
    equal_length = True
    problem = ""
    label_to_index: dict[str, int] = {}
    shape: tuple[int, int] | None = None

    lines = text.splitlines()
    for line_no, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not in_data:
            if stripped.lower() == "@data":
                in_data = True
                data_line_seen = True
                # resolve header before reading records
                if "classlabel" not in meta:
                    raise ParseError("header is missing @classLabel", line_no)
                head, *names = meta["classlabel"].split()
                if not _parse_bool(head, "classLabel", line_no):
                    raise ParseError("@classLabel false: not a classification dataset", line_no)
                if not names:
                    raise ParseError("@classLabel true needs a class vocabulary", line_no)
                class_names = names
                label_to_index = {name: i for i, name in enumerate(names)}
                if "dimensions" in meta:
                    try:
                        declared_dims = int(meta["dimensions"])
                    except ValueError:
                        raise ParseError(
                            f"@dimensions expects an integer, got {meta['dimensions']!r}", line_no
                        ) from None
                elif "univariate" in meta and _parse_bool(meta["univariate"], "univariate", line_no):
                    declared_dims = 1
                if "serieslength" in meta:
                    try:
                        declared_len = int(meta["serieslength"])
                    except ValueError:
                        raise ParseError(
                            f"@seriesLength expects an integer, got {meta['serieslength']!r}",
                            line_no,
                        ) from None
                if "equallength" in meta:
                    equal_length = _parse_bool(meta["equallength"], "equalLength", line_no)
                if not equal_length:
                    raise ParseError(
                        "only equal-length datasets are supported (@equalLength false)", line_no
                    )
                problem = meta.get("problemname", "")
                continue
            if stripped.startswith("@"):
                key, _, value = stripped[1:].partition(" ")
                meta[key.strip().lower()] = value.strip()
                continue
            raise ParseError(f"unexpected content before @data: {stripped[:40]!r}", line_no)

        # data records
        record_id = f"{problem or 'record'}[{len(series)}]"
        parts = stripped.split(":")
        if len(parts) < 2:
            raise ParseError(f"record {record_id}: no class label field", line_no)
        label_name = parts[-1].strip()
        if label_name not in label_to_index:
            raise ParseError(
                f"record {record_id}: unknown class label {label_name!r} "
                f"(vocabulary: {class_names})",
                line_no,
            )
        dim_tokens = parts[:-1]
        dims = []
        for d, chunk in enumerate(dim_tokens):
            vals = [
                _parse_number(tok, line_no, record_id, interpolate_missing)
                for tok in chunk.split(",")
            ]
            dims.append(vals)
        lengths = {len(v) for v in dims}
        if len(lengths) != 1:
            raise ParseError(
                f"record {record_id}: ragged dimension lengths {sorted(len(v) for v in dims)}",
                line_no,
            )
        grid = np.array(dims, dtype=np.float64).T  # (steps, dims)
        if interpolate_missing:
            grid = _interpolate_missing(grid, record_id, line_no)
        if not np.all(np.isfinite(grid)):
            raise ParseError(f"record {record_id}: non-finite value", line_no)
        if declared_dims is not None and grid.shape[1] != declared_dims:
            raise ParseError(
                f"record {record_id}: {grid.shape[1]} dimensions, header declares {declared_dims}",
                line_no,
            )
        if shape is None:
            shape = grid.shape
            if declared_len is not None and shape[0] != declared_len:
                raise ParseError(
                    f"record {record_id}: length {shape[0]}, header declares {declared_len}",
                    line_no,
                )
        elif grid.shape != shape:
            raise ParseError(
                f"record {record_id}: shape {grid.shape[0]}x{grid.shape[1]} differs from "
                f"{shape[0]}x{shape[1]} (equal-length dataset)",
                line_no,
            )
        series.append(
            LabeledSeries(grid, label_to_index[label_name], f"{problem or 'ts'}[{len(series)}]")
        )

    if not data_line_seen:
        raise ParseError("no @data section found", len(lines) or 1)
    if not series:
        raise ParseError("no data records after @data", len(lines))
    return DatasetHalf(series, class_names, shape[1], shape[0], problem)


def serialize_ts(half: DatasetHalf, problem_name: str | None = None) -> str:
    """Write a split back to ``.ts`` text; ``parse_ts`` round-trips it."""
    name = problem_name or half.problem_name or "dataset"
    out = io.StringIO()
    out.write(f"@problemName {name}\n")
    out.write("@timeStamps false\n")
    out.write("@missing false\n")
    out.write(f"@univariate {'true' if half.dims == 1 else 'false'}\n")
    out.write(f"@dimensions {half.dims}\n")
    out.write("@equalLength true\n")
    out.write(f"@seriesLength {half.length}\n")
    out.write(f"@classLabel true {' '.join(half.class_names)}\n")
    out.write("@data\n")
    for s in half.series:
        dims = [",".join(repr(v) for v in s.values[:, d]) for d in range(half.dims)]
        out.write(":".join(dims) + f":{half.class_names[s.label]}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# long-format CSV fallback


def parse_csv(text: str | bytes, problem_name: str = "csv") -> DatasetHalf:
    """Parse long-format CSV: series_id, step, dim_0..dim_{D-1}, label.

    The header row defines the dimension count. Steps of each series must be
    0..T-1 exactly once; labels must be constant within a series.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV", 1) from None
    header = [h.strip() for h in header]
    if len(header) < 4 or header[0] != "series_id" or header[1] != "step" or header[-1] != "label":
        raise ParseError(
            "CSV header must be series_id,step,dim_0..dim_{D-1},label; got "
            + ",".join(header),
            1,
        )
    dim_names = header[2:-1]
    expected = [f"dim_{i}" for i in range(len(dim_names))]
    if dim_names != expected:
        raise ParseError(f"dimension columns must be {expected}, got {dim_names}", 1)
    d = len(dim_names)

    rows: dict[str, dict[int, list[float]]] = {}
    labels: dict[str, str] = {}
    order: list[str] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != d + 3:
            raise ParseError(f"expected {d + 3} columns, got {len(row)}", line_no)
        sid = row[0].strip()
        try:
            step = int(row[1])
        except ValueError:
            raise ParseError(f"series {sid}: bad step {row[1]!r}", line_no) from None
        try:
            vals = [float(v) for v in row[2:-1]]
        except ValueError:
            raise ParseError(f"series {sid}: bad value in step {step}", line_no) from None
        if not all(np.isfinite(v) for v in vals):
            raise ParseError(f"series {sid}: non-finite value in step {step}", line_no)
        label = row[-1].strip()
        if sid not in rows:
            rows[sid] = {}
            labels[sid] = label
            order.append(sid)
        elif labels[sid] != label:
            raise ParseError(
                f"series {sid}: conflicting labels {labels[sid]!r} and {label!r}", line_no
            )
        if step in rows[sid]:
            raise ParseError(f"series {sid}: duplicate step {step}", line_no)
        rows[sid][step] = vals

    if not rows:
        raise ParseError("CSV has a header but no data rows", 2)
    lengths = {len(steps) for steps in rows.values()}
    if len(lengths) != 1:
        raise ParseError(f"series lengths differ: {sorted(lengths)}")
    length = lengths.pop()
    class_names = sorted(set(labels.values()))
    label_to_index = {name: i for i, name in enumerate(class_names)}
    series = []
    for sid in order:
        steps = rows[sid]
        if sorted(steps) != list(range(length)):
            raise ParseError(f"series {sid}: steps are not contiguous 0..{length - 1}")
        grid = np.array([steps[t] for t in range(length)], dtype=np.float64)
        series.append(LabeledSeries(grid, label_to_index[labels[sid]], f"{problem_name}/{sid}"))
    return DatasetHalf(series, class_names, d, length, problem_name)


# ---------------------------------------------------------------------------
# normalization


@dataclass
class NormalizationSpec:
    """Per-dimension z-score statistics computed on the train split only.

    Zero-variance dimensions pass through untouched (mean 0, scale 1), so a
    constant channel is preserved rather than zeroed.
    """

    mode: str = "zscore"  # or "none"
    means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stds: np.ndarray = field(default_factory=lambda: np.ones(0))

    def apply(self, series_list: list[LabeledSeries]) -> list[LabeledSeries]:
        if self.mode == "none":
            return list(series_list)
        return [
            LabeledSeries((s.values - self.means) / self.stds, s.label, s.source_id)
            for s in series_list
        ]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "means": list(map(float, self.means)),
            "stds": list(map(float, self.stds)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationSpec":
        return cls(d["mode"], np.array(d["means"], float), np.array(d["stds"], float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "NormalizationSpec":
        return cls.from_dict(json.loads(text))


def normalize(ds: Dataset, mode: str = "zscore") -> tuple[Dataset, NormalizationSpec]:
    """Z-score both splits with train statistics (no test leakage)."""
    if mode not in ("zscore", "none"):
        raise ShapeError(f"unknown normalization mode {mode!r}")
    if not ds.train:
        raise ShapeError("cannot normalize a dataset with an empty train split")
    if mode == "none":
        spec = NormalizationSpec("none", np.zeros(ds.dims), np.ones(ds.dims))
        return ds, spec
    stacked = np.concatenate([s.values for s in ds.train], axis=0)
    means = stacked.mean(axis=0)
    stds = stacked.std(axis=0)
    constant = stds == 0.0
    means[constant] = 0.0
    stds[constant] = 1.0
    spec = NormalizationSpec("zscore", means, stds)
    return (
        Dataset(spec.apply(ds.train), spec.apply(ds.test), ds.class_names, ds.dims, ds.length),
        spec,
    )


def load_ts_file(path, interpolate_missing: bool = False) -> DatasetHalf:
    with open(path, "rb") as fh:
        return parse_ts(fh.read(), interpolate_missing=interpolate_missing)


def load_csv_file(path) -> DatasetHalf:
    with open(path, "rb") as fh:
        return parse_csv(fh.read())


def load_dataset(train_path, test_path, fmt: str = "ts") -> Dataset:
    """Load a train/test pair in ``.ts`` or long CSV format."""
    if fmt == "ts":
        return combine_halves(load_ts_file(train_path), load_ts_file(test_path))
    if fmt == "csv":
        return combine_halves(load_csv_file(train_path), load_csv_file(test_path))
    raise ShapeError(f"unknown dataset format {fmt!r} (expected 'ts' or 'csv')")
