"""Quantum weightless classifier: one PQM per class, smallest E(X) wins.

E(X) is the expected number of 1s read from the control qubit, which for a
single measured qubit is P(c=1). Scores use the closed form, not shots.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from diagnostics import log_health
from errors import LENGTH_MISMATCH, DataError, ParameterError, PatternError
from models import (
    BitPattern,
    ClassMemory,
    MemoryContent,
    PqmClassifier,
    PqmParameter,
    PredictionReport,
)
from pqm_core import closed_form_p0

log = logging.getLogger(__name__)

Sample = tuple[BitPattern, str]

DEFAULT_K_RANGE = (1, 50)
DEFAULT_RESOLUTION = 10_000


def uniform_grid(count: int = 15) -> tuple[float, ...]:
    """``count`` evenly spaced values j/count, j = 1..count (always ends at 1.0)."""
    if count < 1:
        raise ParameterError(f"grid needs at least one point, got {count}")
    return tuple(j / count for j in range(1, count + 1))


def parse_grid(text: str) -> tuple[float, ...]:
    """``"uniform:15"`` or a comma list such as ``"0.25,0.5,1"``."""
    spec = text.strip()
    try:
        if spec.startswith("uniform:"):
            return uniform_grid(int(spec.split(":", 1)[1]))
        values = tuple(float(part) for part in spec.split(",") if part.strip())
    except ValueError as exc:
        raise ParameterError(f"cannot parse grid {text!r}") from exc
    if not values:
        raise ParameterError("parameter grid is empty")
    for t in values:
        PqmParameter(t)
    return values


def _pattern_matrix(patterns: Iterable[BitPattern]) -> np.ndarray:
    return np.array([p.bits for p in patterns], dtype=np.uint8)


def _hamming_matrix(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return (rows[:, None, :] != cols[None, :, :]).sum(axis=2)


def _check_samples(samples: Sequence[Sample], n: int | None = None) -> int:
    if not samples:
        raise DataError("sample list is empty")
    width = n if n is not None else len(samples[0][0])
    for pattern, _ in samples:
        if len(pattern) != width:
            raise PatternError(
                f"pattern has {len(pattern)} bits, expected {width}", code=LENGTH_MISMATCH
            )
    return width


# ----------------------------------------------------------------------
# Setup and scoring
# ----------------------------------------------------------------------


def setup(train: Sequence[Sample]) -> PqmClassifier:
    """One memory per label holding that label's distinct training patterns."""
    _check_samples(train)
    grouped: dict[str, dict[BitPattern, None]] = {}
    for pattern, label in train:
        grouped.setdefault(label, {})[pattern] = None
    classes = tuple(
        ClassMemory(label, MemoryContent(tuple(grouped[label])), PqmParameter(1.0))
        for label in sorted(grouped)
    )
    log.debug("classifier setup: %s", {c.label: c.memory.p for c in classes})
    return PqmClassifier(classes)


def expected_ones(memory: MemoryContent, input_pattern: BitPattern, t: PqmParameter | float = 1.0) -> float:
    return 1.0 - closed_form_p0(memory, input_pattern, t)


class _ScoreTable:
    """Hamming distances from a batch of inputs to every class memory."""

    def __init__(self, classifier: PqmClassifier, patterns: Sequence[BitPattern]) -> None:
        self.n = classifier.n
        self.labels = tuple(sorted(classifier.labels))
        inputs = _pattern_matrix(patterns)
        by_label = {c.label: c for c in classifier.classes}
        self._distances = {
            label: _hamming_matrix(inputs, _pattern_matrix(by_label[label].memory.patterns)).astype(float)
            for label in self.labels
        }

    def expected(self, label: str, t: float) -> np.ndarray:
        theta = math.pi / (2 * self.n * t)
        return 1.0 - np.mean(np.cos(theta * self._distances[label]) ** 2, axis=1)

    def scores(self, params: dict[str, float]) -> np.ndarray:
        return np.column_stack([self.expected(label, params[label]) for label in self.labels])

    def predict(self, params: dict[str, float]) -> list[str]:
        # columns are in label order, so argmin takes the smallest label on ties
        winners = np.argmin(self.scores(params), axis=1)
        return [self.labels[i] for i in winners]


def classify(classifier: PqmClassifier, input_pattern: BitPattern) -> PredictionReport:
    if len(input_pattern) != classifier.n:
        raise PatternError(
            f"input has {len(input_pattern)} bits, classifier expects {classifier.n}",
            code=LENGTH_MISMATCH,
        )
    table = _ScoreTable(classifier, [input_pattern])
    row = table.scores(classifier.parameters())[0]
    chosen = table.labels[int(np.argmin(row))]
    order = {label: i for i, label in enumerate(table.labels)}
    per_class = tuple((label, float(row[order[label]])) for label in classifier.labels)
    return PredictionReport(per_class=per_class, chosen=chosen)


def predict_batch(classifier: PqmClassifier, patterns: Sequence[BitPattern]) -> list[str]:
    if not patterns:
        return []
    _check_samples([(p, "") for p in patterns], classifier.n)
    return _ScoreTable(classifier, patterns).predict(classifier.parameters())


def accuracy(classifier: PqmClassifier, samples: Sequence[Sample]) -> float:
    _check_samples(samples, classifier.n)
    predicted = predict_batch(classifier, [p for p, _ in samples])
    hits = sum(1 for guess, (_, label) in zip(predicted, samples) if guess == label)
    return hits / len(samples)


# ----------------------------------------------------------------------
# Parameter tuning
# ----------------------------------------------------------------------


def _validated_grid(grid: Iterable[float], require_one: bool = True) -> tuple[float, ...]:
    values = tuple(float(t) for t in grid)
    if not values:
        raise ParameterError("parameter grid is empty")
    for t in values:
        PqmParameter(t)
    if require_one and 1.0 not in values:
        raise ParameterError("parameter grid must contain 1.0")
    return values


def tune_parameters(
    classifier: PqmClassifier,
    eval_set: Sequence[Sample],
    grid: Iterable[float],
) -> PqmClassifier:
    """Coordinate search: one pass over memories in label order.

    A candidate replaces the current t only if it strictly improves
    accuracy, so the result never scores below the starting classifier.
    """
    values = _validated_grid(grid)
    _check_samples(eval_set, classifier.n)
    table = _ScoreTable(classifier, [p for p, _ in eval_set])
    truth = [label for _, label in eval_set]

    def score(params: dict[str, float]) -> float:
        predicted = table.predict(params)
        return sum(1 for a, b in zip(predicted, truth) if a == b) / len(truth)

    params = classifier.parameters()
    start = best = score(params)
    for label in sorted(params):
        for t in values:
            candidate = dict(params, **{label: t})
            acc = score(candidate)
            if acc > best:
                best, params = acc, candidate

    tuned = classifier
    for label, t in params.items():
        tuned = tuned.with_parameter(label, PqmParameter(t))
    log_health(
        log,
        "tuning_completed",
        accuracy_before=round(start, 6),
        accuracy_after=round(best, 6),
        params=params,
    )
    return tuned


def sweep_shared_t(
    train: Sequence[Sample],
    test: Sequence[Sample],
    grid: Iterable[float],
) -> list[tuple[float, float]]:
    """Accuracy on ``test`` with one common t for every memory."""
    values = _validated_grid(grid, require_one=False)
    classifier = setup(train)
    _check_samples(test, classifier.n)
    table = _ScoreTable(classifier, [p for p, _ in test])
    truth = [label for _, label in test]
    curve = []
    for t in values:
        predicted = table.predict({label: t for label in classifier.labels})
        curve.append((t, sum(1 for a, b in zip(predicted, truth) if a == b) / len(truth)))
    return curve


# ----------------------------------------------------------------------
# Two-distance objective
# ----------------------------------------------------------------------


def _check_distances(d_near: int, d_far: int, n: int) -> None:
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    if not 0 <= d_near <= d_far <= n:
        raise ParameterError(f"need 0 <= d_near <= d_far <= n, got {d_near}, {d_far}, {n}")


def objective_f(t: PqmParameter | float, d_near: int, d_far: int, n: int) -> float:
    """Gap between the P(c=0) of a pattern at ``d_near`` and one at ``d_far``."""
    _check_distances(d_near, d_far, n)
    param = t if isinstance(t, PqmParameter) else PqmParameter(float(t))
    theta = param.angle(n)
    return math.cos(d_near * theta) ** 2 - math.cos(d_far * theta) ** 2


def _f_values(ts: np.ndarray, d_near: int, d_far: int, n: int) -> np.ndarray:
    theta = np.pi / (2 * n * ts)
    return np.cos(d_near * theta) ** 2 - np.cos(d_far * theta) ** 2


def f_curve(d_near: int, d_far: int, n: int, points: int = 200) -> list[tuple[float, float]]:
    _check_distances(d_near, d_far, n)
    if points < 2:
        raise ParameterError(f"need at least 2 points, got {points}")
    ts = np.linspace(1.0 / points, 1.0, points)
    return [(float(t), float(v)) for t, v in zip(ts, _f_values(ts, d_near, d_far, n))]


def maximize_f(d_near: int, d_far: int, n: int, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Grid search over (0, 1] refined by golden-section search around the best point."""
    _check_distances(d_near, d_far, n)
    if resolution < 1000:
        raise ParameterError(f"resolution must be >= 1000, got {resolution}")
    ts = np.arange(1, resolution + 1) / resolution
    values = _f_values(ts, d_near, d_far, n)
    k = int(np.argmax(values))
    best_t, best_value = float(ts[k]), float(values[k])
    if 0 < k < resolution - 1:
        lo, hi = float(ts[k - 1]), float(ts[k + 1])
        try:
            result = minimize_scalar(
                lambda t: -float(_f_values(np.asarray(t), d_near, d_far, n)),
                bracket=(lo, best_t, hi),
                method="golden",
            )
        except (ValueError, RuntimeError) as exc:
            log.debug("golden refinement skipped: %s", exc)
        else:
            refined = float(result.x)
            if lo <= refined <= hi and -float(result.fun) >= best_value:
                best_t, best_value = refined, -float(result.fun)
    log.debug("maximize_f(%d, %d, %d): t*=%.9g f=%.9g", d_near, d_far, n, best_t, best_value)
    return best_t


def margin_family(
    n: int,
    d_near: int = 1,
    d_far: int = 3,
    grid: Iterable[float] | None = None,
) -> tuple[float, float]:
    """(margin at t=1, best margin) for inputs at ``d_near`` from one class and ``d_far`` from the other.

    Without a grid the best margin comes from ``maximize_f``.
    """
    untuned = objective_f(1.0, d_near, d_far, n)
    if grid is None:
        tuned = objective_f(maximize_f(d_near, d_far, n), d_near, d_far, n)
    else:
        tuned = max(objective_f(t, d_near, d_far, n) for t in _validated_grid(grid, require_one=False))
    return untuned, max(tuned, untuned)


# ----------------------------------------------------------------------
# KNN baseline
# ----------------------------------------------------------------------


def _knn_votes(order: np.ndarray, distances: np.ndarray, train_labels: Sequence[str], k: int) -> str:
    tally: dict[str, list[float]] = {}
    for idx in order[:k]:
        entry = tally.setdefault(train_labels[idx], [0, 0.0])
        entry[0] += 1
        entry[1] += float(distances[idx])
    return min(tally, key=lambda label: (-tally[label][0], tally[label][1], label))


def _knn_predictions(train: Sequence[Sample], patterns: Sequence[BitPattern], ks: Iterable[int]) -> dict[int, list[str]]:
    distances = _hamming_matrix(_pattern_matrix(patterns), _pattern_matrix(p for p, _ in train))
    order = np.argsort(distances, axis=1, kind="stable")
    labels = [label for _, label in train]
    return {
        k: [_knn_votes(order[i], distances[i], labels, k) for i in range(len(patterns))]
        for k in ks
    }


def _k_values(k_range: tuple[int, int], train_size: int) -> range:
    low, high = k_range
    if low < 1 or low > high:
        raise ParameterError(f"invalid k range {k_range}")
    if low > train_size:
        raise ParameterError(f"k={low} exceeds the {train_size} training samples")
    if high > train_size:
        log.debug("clipping k range %s to %d training samples", k_range, train_size)
    return range(low, min(high, train_size) + 1)


def knn_baseline(
    train: Sequence[Sample],
    test: Sequence[Sample],
    k_range: tuple[int, int] = DEFAULT_K_RANGE,
) -> tuple[int, float]:
    """Hamming KNN with uniform weights; k picked by test accuracy.

    Votes tie-break on the smaller summed distance, then the smaller label.
    """
    width = _check_samples(train)
    _check_samples(test, width)
    ks = _k_values(k_range, len(train))
    predictions = _knn_predictions(train, [p for p, _ in test], ks)
    truth = [label for _, label in test]
    best_k, best_acc = ks[0], -1.0
    for k in ks:
        acc = sum(1 for a, b in zip(predictions[k], truth) if a == b) / len(truth)
        if acc > best_acc:
            best_k, best_acc = k, acc
    return best_k, best_acc


# ----------------------------------------------------------------------
# Model wrappers for cross validation
# ----------------------------------------------------------------------


class QwcModel:
    """All memories at t = 1."""

    name = "qwc"

    def __init__(self) -> None:
        self.classifier: PqmClassifier | None = None

    def fit(self, train: Sequence[Sample], eval_set: Sequence[Sample] | None = None) -> None:
        self.classifier = setup(train)

    def predict(self, patterns: Sequence[BitPattern]) -> list[str]:
        if self.classifier is None:
            raise DataError("model used before fit")
        return predict_batch(self.classifier, patterns)

    def fitted_params(self) -> dict[str, object]:
        return {}


@dataclass
class PqwcModel:
    """Per-memory t tuned on the evaluation split when one is given."""

    grid: tuple[float, ...] = field(default_factory=uniform_grid)
    name: str = "pqwc"
    classifier: PqmClassifier | None = None

    def fit(self, train: Sequence[Sample], eval_set: Sequence[Sample] | None = None) -> None:
        classifier = setup(train)
        if eval_set:
            classifier = tune_parameters(classifier, eval_set, self.grid)
        self.classifier = classifier

    def predict(self, patterns: Sequence[BitPattern]) -> list[str]:
        if self.classifier is None:
            raise DataError("model used before fit")
        return predict_batch(self.classifier, patterns)

    def fitted_params(self) -> dict[str, object]:
        return {"t": self.classifier.parameters()} if self.classifier else {}


@dataclass
class KnnClassifier:
    k_range: tuple[int, int] = DEFAULT_K_RANGE
    name: str = "knn"
    k: int | None = None
    _train: list[Sample] = field(default_factory=list, repr=False)

    def fit(self, train: Sequence[Sample], eval_set: Sequence[Sample] | None = None) -> None:
        _check_samples(train)
        self._train = list(train)
        if eval_set:
            self.k, _ = knn_baseline(self._train, eval_set, self.k_range)
        else:
            self.k = min(self.k_range[0], len(self._train))

    def predict(self, patterns: Sequence[BitPattern]) -> list[str]:
        if not self._train or self.k is None:
            raise DataError("model used before fit")
        if not patterns:
            return []
        return _knn_predictions(self._train, patterns, [self.k])[self.k]

    def fitted_params(self) -> dict[str, object]:
        return {"k": self.k}


def make_model(name: str, grid: Iterable[float] | None = None, k_range: tuple[int, int] = DEFAULT_K_RANGE):
    if name == "qwc":
        return QwcModel()
    if name == "pqwc":
        return PqwcModel(tuple(grid) if grid is not None else uniform_grid())
    if name == "knn":
        return KnnClassifier(k_range)
    raise ParameterError(f"unknown model {name!r}; expected qwc, pqwc or knn")
