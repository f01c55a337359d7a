"""Dataset ingestion, one-hot binarization, k-fold evaluation and the Wilcoxon test."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from diagnostics import log_health
from errors import LENGTH_MISMATCH, DataError, ParameterError
from interfaces import Model
from models import (
    AttributeEncoding,
    BitPattern,
    CsvSchema,
    CVReport,
    EncodedDataset,
    FoldSpec,
    RawDataset,
    WilcoxonResult,
)
from quantum_sim import make_rng

log = logging.getLogger(__name__)

EXACT_WILCOXON_LIMIT = 25
MIN_WILCOXON_PAIRS = 5


# ----------------------------------------------------------------------
# Ingestion
# ----------------------------------------------------------------------


def _data_line_numbers(text: str, header: bool) -> list[int]:
    numbers = [i for i, line in enumerate(text.splitlines(), start=1) if line.strip()]
    return numbers[1:] if header else numbers


def load_csv(path: Path | str, schema: CsvSchema | None = None) -> RawDataset:
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 (byte {exc.start})") from exc
    try:
        frame = pd.read_csv(
            path,
            header=0 if schema.header else None,
            sep=schema.delimiter,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"{path}: no rows") from exc
    except pd.errors.ParserError as exc:
        raise DataError(f"{path}: {exc}") from exc

    if frame.empty:
        raise DataError(f"{path}: no rows")
    short_rows = frame.isna().any(axis=1).to_numpy()
    if short_rows.any():
        row = int(np.argmax(short_rows))
        line = _data_line_numbers(text, schema.header)[row]
        raise DataError(f"{path}:{line}: expected {frame.shape[1]} fields")

    columns = [str(c) for c in frame.columns]
    label_col = schema.label_column
    if isinstance(label_col, str):
        if not schema.header or label_col not in columns:
            raise DataError(f"{path}: unknown label column {label_col!r}")
        label_idx = columns.index(label_col)
    else:
        if not -len(columns) <= label_col < len(columns):
            raise DataError(f"{path}: label column {label_col} out of range for {len(columns)} columns")
        label_idx = label_col % len(columns)

    frame = frame.apply(lambda col: col.str.strip())
    labels = frame.iloc[:, label_idx].tolist()
    attributes = frame.drop(columns=frame.columns[label_idx])
    names = tuple(str(c) for c in attributes.columns) if schema.header else tuple(
        f"a{j}" for j in range(attributes.shape[1])
    )
    rows = tuple(
        (tuple(values), label)
        for values, label in zip(attributes.itertuples(index=False, name=None), labels)
    )
    log.info("loaded %s: %d rows, %d attributes", path.name, len(rows), len(names))
    return RawDataset(rows=rows, attribute_names=names, missing_marker=schema.missing_marker)


# ----------------------------------------------------------------------
# Preprocessing
# ----------------------------------------------------------------------


def impute_mode(data: RawDataset) -> RawDataset:
    """Replace missing markers with the column mode; ties go to the first-seen value."""
    marker = data.missing_marker
    modes: list[str] = []
    for j, name in enumerate(data.attribute_names):
        counts: dict[str, int] = {}
        for value in data.column(j):
            if value != marker:
                counts[value] = counts.get(value, 0) + 1
        if not counts:
            raise DataError(f"attribute {name!r} has no observed values")
        modes.append(max(counts, key=counts.__getitem__))

    rows = tuple(
        (tuple(modes[j] if v == marker else v for j, v in enumerate(values)), label)
        for values, label in data.rows
    )
    return RawDataset(rows=rows, attribute_names=data.attribute_names, missing_marker=marker)


def one_hot_encode(data: RawDataset) -> EncodedDataset:
    """One bit per (attribute, value); values ordered lexicographically."""
    encoding: list[AttributeEncoding] = []
    start = 0
    for j, name in enumerate(data.attribute_names):
        column = data.column(j)
        if data.missing_marker in column:
            raise DataError(f"attribute {name!r} still has missing values; impute first")
        values = tuple(sorted(set(column)))
        if len(values) == 1:
            log.warning("attribute %r is constant (%r); it encodes to one fixed bit", name, values[0])
        encoding.append(AttributeEncoding(name, values, start))
        start += len(values)

    lookups = [{v: i for i, v in enumerate(enc.values)} for enc in encoding]
    patterns = []
    for values, label in data.rows:
        bits = [0] * start
        for enc, lookup, value in zip(encoding, lookups, values):
            bits[enc.start + lookup[value]] = 1
        patterns.append((BitPattern(tuple(bits)), label))
    return EncodedDataset(patterns=tuple(patterns), encoding=tuple(encoding))


def decode_pattern(encoded: EncodedDataset, pattern: BitPattern) -> tuple[str, ...]:
    if len(pattern) != encoded.width:
        raise DataError(
            f"pattern has {len(pattern)} bits, encoding has {encoded.width}", code=LENGTH_MISMATCH
        )
    values = []
    for enc in encoded.encoding:
        hot = [i for i, pos in enumerate(enc.positions) if pattern.bits[pos]]
        if len(hot) != 1:
            raise DataError(f"attribute {enc.name!r} has {len(hot)} set bits, expected 1")
        values.append(enc.values[hot[0]])
    return tuple(values)


def prepare_dataset(path: Path | str, schema: CsvSchema | None = None) -> EncodedDataset:
    return one_hot_encode(impute_mode(load_csv(path, schema)))


# ----------------------------------------------------------------------
# Cross validation
# ----------------------------------------------------------------------


def kfold_split(data: EncodedDataset, k: int, seed: int) -> list[FoldSpec]:
    """Stratified folds dealt round-robin per label; plain shuffled folds when a label is rarer than k."""
    size = len(data.patterns)
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    if k > size:
        raise ParameterError(f"k={k} exceeds the {size} samples")
    rng = make_rng(seed)
    labels = np.array(data.labels)
    assignment = np.empty(size, dtype=int)

    classes, class_counts = np.unique(labels, return_counts=True)
    if class_counts.min() >= k:
        offset = 0
        for label in classes:
            members = rng.permutation(np.flatnonzero(labels == label))
            assignment[members] = (offset + np.arange(len(members))) % k
            offset += len(members)
    else:
        log.warning("a class has fewer than %d samples; using non-stratified folds", k)
        for fold, members in enumerate(np.array_split(rng.permutation(size), k)):
            assignment[members] = fold

    folds = []
    for fold in range(k):
        test = tuple(int(i) for i in np.flatnonzero(assignment == fold))
        train = tuple(int(i) for i in np.flatnonzero(assignment != fold))
        folds.append(FoldSpec(index=fold, train=train, test=test))
    return folds


def _evaluate_fold(data: EncodedDataset, fold: FoldSpec, model: Model, tune_on_test: bool) -> tuple[float, dict[str, Any]]:
    train = data.subset(fold.train)
    test = data.subset(fold.test)
    model.fit(train, test if tune_on_test else None)
    predicted = model.predict([p for p, _ in test])
    hits = sum(1 for guess, (_, label) in zip(predicted, test) if guess == label)
    return hits / len(test), model.fitted_params()


def cross_validate(
    data: EncodedDataset,
    model_factory: Callable[[], Model],
    k: int,
    seed: int,
    dataset_name: str = "",
    tune_on_test: bool = True,
    workers: int | None = None,
) -> CVReport:
    """k-fold accuracy of a fresh model per fold.

    Tunable models get the test fold as their evaluation split when
    ``tune_on_test`` is set, which is how the reference benchmark picks
    its parameters.
    """
    folds = kfold_split(data, k, seed)
    model_name = model_factory().name
    log_health(log, "bench_started", dataset=dataset_name, model=model_name, folds=k, seed=seed)
    started = time.monotonic()

    def run(fold: FoldSpec) -> float:
        acc, params = _evaluate_fold(data, fold, model_factory(), tune_on_test)
        log_health(
            log,
            "fold_completed",
            dataset=dataset_name,
            model=model_name,
            fold=fold.index,
            accuracy=round(acc, 6),
            params=params,
        )
        return acc

    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_fold = list(pool.map(run, folds))
    except Exception as exc:
        log_health(
            log,
            "bench_failed",
            dataset=dataset_name,
            model=model_name,
            error_code=getattr(exc, "code", type(exc).__name__),
            message=str(exc),
        )
        raise

    report = CVReport.from_folds(dataset_name, model_name, per_fold, params={"folds": k, "seed": seed})
    log_health(
        log,
        "bench_completed",
        dataset=dataset_name,
        model=model_name,
        mean=round(report.mean, 6),
        std=round(report.std, 6),
        elapsed_ms=int((time.monotonic() - started) * 1000),
    )
    return report


def cv_report_to_json(report: CVReport, config: dict[str, Any] | None = None) -> str:
    payload = report.to_dict()
    if config is not None:
        payload["config"] = config
    return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True)


def cv_report_rows(report: CVReport) -> list[dict[str, Any]]:
    return [
        {"dataset": report.dataset, "model": report.model, "fold": i, "accuracy": acc}
        for i, acc in enumerate(report.per_fold)
    ]


# ----------------------------------------------------------------------
# Wilcoxon signed-rank test
# ----------------------------------------------------------------------


def _exact_lower_tail(doubled_ranks: np.ndarray, doubled_w: int) -> float:
    """P(W+ <= w) under the null, by counting subset sums of the doubled ranks."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts += shifted
    return float(counts[: doubled_w + 1].sum() / 2.0 ** len(doubled_ranks))


def wilcoxon_signed_rank(
    a: Sequence[float],
    b: Sequence[float],
    alpha: float = 0.05,
) -> WilcoxonResult:
    """Two-sided paired test on a - b; zero differences are dropped.

    Up to 25 pairs the null distribution is counted exactly (average ranks
    for ties); above that a normal approximation with tie and continuity
    corrections is used.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise DataError(f"paired samples differ in length: {x.size} vs {y.size}", code=LENGTH_MISMATCH)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    diff = x - y
    diff = diff[diff != 0.0]
    if diff.size == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, reject=False)
    if diff.size < MIN_WILCOXON_PAIRS:
        raise ParameterError(
            f"need at least {MIN_WILCOXON_PAIRS} nonzero differences, got {diff.size}"
        )

    ranks = stats.rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    w = min(w_plus, w_minus)
    n = diff.size

    if n <= EXACT_WILCOXON_LIMIT:
        doubled = np.rint(2 * ranks).astype(int)
        p_value = min(1.0, 2.0 * _exact_lower_tail(doubled, int(round(2 * w))))
        method = "exact"
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(np.abs(diff), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        z = min(0.0, (w - mean + 0.5) / np.sqrt(var))
        p_value = min(1.0, 2.0 * float(stats.norm.cdf(z)))
        method = "normal"
    log.debug("wilcoxon %s: n=%d W=%.1f p=%.6g", method, n, w, p_value)
    return WilcoxonResult(statistic=w, p_value=p_value, reject=p_value < alpha)


def compare_models(report_a: CVReport, report_b: CVReport, alpha: float = 0.05) -> WilcoxonResult:
    if len(report_a.per_fold) != len(report_b.per_fold):
        raise DataError("reports have different fold counts", code=LENGTH_MISMATCH)
    return wilcoxon_signed_rank(report_a.per_fold, report_b.per_fold, alpha)
