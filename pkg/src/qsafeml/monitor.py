"""Safety monitoring of a quantum classifier from its prediction records.

Records are split per class into correctly and incorrectly classified sets.
Each set is aggregated into a uniform mixture density matrix, and the four
distance metrics between the two mixtures are related to the class
accuracy.  The asymmetric relative entropy is always taken as
``S(compared || reference)``: misclassified set against correct set, or
operational batch against reference state.  The online check compares operational batches against the
correct-set mixtures of a reference report.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    DimMismatch,
    EmptyInput,
    EmptySet,
    InsufficientData,
    LabelOutOfRange,
    UnknownClass,
)
from .metrics import (
    METRIC_KINDS,
    QUANTUM_RELATIVE_ENTROPY,
    all_metrics,
    closeness_to_accuracy,
    normalized_value,
    pearson_correlation,
    thread_count,
)
from .states import DensityMatrix, StateVector, density_from_distribution

NO_MISCLASSIFIED = "no misclassified samples"
NO_CORRECT = "no correctly classified samples"
NO_SAMPLES = "no samples"
GROUPINGS = ("true", "predicted")


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    """One classified sample.

    ``output_state`` is either a :class:`StateVector` or a vector of
    basis-outcome probabilities.  ``true_label`` may be ``None`` for
    operational (unlabelled) records.
    """

    sample_id: str
    true_label: "int | None"
    predicted_label: int
    output_state: object

    def __post_init__(self):
        state = self.output_state
        if not isinstance(state, StateVector):
            probs = np.array(state, dtype=float).reshape(-1)
            density_from_distribution(probs)
            probs.setflags(write=False)
            object.__setattr__(self, "output_state", probs)
        if self.predicted_label < 0 or (self.true_label is not None and self.true_label < 0):
            raise LabelOutOfRange("labels must be non-negative")

    @property
    def kind(self):
        return "statevector" if isinstance(self.output_state, StateVector) else "distribution"

    @property
    def dim(self):
        s = self.output_state
        return s.dim if isinstance(s, StateVector) else s.size

    @property
    def correct(self):
        return self.true_label is not None and self.true_label == self.predicted_label

    def density(self) -> DensityMatrix:
        s = self.output_state
        if isinstance(s, StateVector):
            return DensityMatrix.from_state(s)
        return density_from_distribution(s)


@dataclass
class ClassPartition:
    class_label: int
    correct: list = field(default_factory=list)
    misclassified: list = field(default_factory=list)


@dataclass(frozen=True)
class ThresholdConfig:
    """Per-metric flag thresholds on the normalized ``[0, 1]`` scale."""

    trace_distance: float = 0.5
    fidelity: float = 0.5
    bures_distance: float = 0.5
    quantum_relative_entropy: float = 0.5

    def __post_init__(self):
        for kind in METRIC_KINDS:
            v = getattr(self, kind)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"threshold for {kind} must lie in [0, 1], got {v!r}")

    def as_dict(self):
        return {k: getattr(self, k) for k in METRIC_KINDS}

    @classmethod
    def parse(cls, text):
        """``"0.4"`` (all metrics) or ``"trace_distance=0.3,fidelity=0.2"``."""
        text = (text or "").strip()
        if not text:
            return cls()
        if "=" not in text:
            v = float(text)
            return cls(**{k: v for k in METRIC_KINDS})
        values = {}
        for part in text.split(","):
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in METRIC_KINDS:
                raise ValueError(f"unknown metric {key!r} in thresholds")
            values[key] = float(val)
        return cls(**values)


@dataclass
class ClassSafetyResult:
    class_label: "int | None"
    n_correct: int
    n_misclassified: int
    class_accuracy: "float | None"
    metrics: "dict | None" = None
    normalized: "dict | None" = None
    closeness: "dict | None" = None
    flags: dict = field(default_factory=lambda: {k: False for k in METRIC_KINDS})
    degenerate: "str | None" = None
    warnings: list = field(default_factory=list)

    @property
    def n_total(self):
        return self.n_correct + self.n_misclassified

    @property
    def flagged(self):
        return any(self.flags.values())


@dataclass
class SafetyReport:
    dataset_id: str
    per_class: list
    overall: ClassSafetyResult
    model_accuracy: float
    n_records: int
    n_correct: int
    n_classes: int
    grouping: str = "true"
    correlations: "dict | None" = None
    config_echo: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    schema_version: str = "1"

    @classmethod
    def from_summary(cls, dataset_id, metric_values, accuracy, thresholds=None):
        """A report carrying only dataset-level metric values and an accuracy.

        Used to feed published or externally computed rows into
        :func:`correlate_reports`.
        """
        from .metrics import MetricValue

        thresholds = thresholds or ThresholdConfig()
        metrics = {k: MetricValue(k, float(metric_values[k])) for k in METRIC_KINDS}
        overall = _score(None, 0, 0, metrics, accuracy, thresholds)
        return cls(dataset_id, [], overall, float(accuracy), 0, 0, 0,
                   config_echo={"thresholds": thresholds.as_dict(), "source": "summary"})


def partition(records, n_classes, group_by="true"):
    """Split labelled records into ``n_classes`` correct/misclassified partitions.

    With ``group_by="true"`` a misclassified record lands in the partition
    of its true label; with ``"predicted"`` in that of its predicted label.
    """
    if group_by not in GROUPINGS:
        raise ValueError(f"group_by must be one of {GROUPINGS}")
    parts = [ClassPartition(c) for c in range(n_classes)]
    for r in records:
        if r.true_label is None:
            raise LabelOutOfRange(f"record {r.sample_id!r} has no true label")
        if not (0 <= r.true_label < n_classes and 0 <= r.predicted_label < n_classes):
            raise LabelOutOfRange(
                f"record {r.sample_id!r} has labels ({r.true_label}, {r.predicted_label}) "
                f"outside [0, {n_classes})"
            )
        if r.correct:
            parts[r.true_label].correct.append(r)
        else:
            key = r.true_label if group_by == "true" else r.predicted_label
            parts[key].misclassified.append(r)
    return parts


def aggregate(records) -> DensityMatrix:
    """Uniform mixture ``(1/N) sum_i rho_i`` of the records' states.

    Records are summed in ``sample_id`` order so the result does not depend
    on input order.
    """
    records = sorted(records, key=lambda r: r.sample_id)
    if not records:
        raise EmptySet("cannot aggregate an empty record set")
    dims = {r.dim for r in records}
    if len(dims) != 1:
        raise DimMismatch(f"records have differing state dims {sorted(dims)}")
    (d,) = dims
    rho = np.zeros((d, d), dtype=complex)
    vecs = [r.output_state.amplitudes for r in records if r.kind == "statevector"]
    dists = [r.output_state for r in records if r.kind == "distribution"]
    if vecs:
        a = np.stack(vecs)
        rho += a.T @ a.conj()
    if dists:
        rho[np.diag_indices(d)] += np.sum(dists, axis=0)
    rho /= len(records)
    pure = vecs[0] if len(records) == 1 and vecs else None
    return DensityMatrix(0.5 * (rho + rho.conj().T), _pure=pure)


def _score(label, n_correct, n_wrong, metrics, accuracy, thresholds):
    normalized = {k: normalized_value(m) for k, m in metrics.items()}
    closeness = {}
    notes = []
    for k, m in metrics.items():
        closeness[k] = closeness_to_accuracy(m, accuracy) if m.finite else None
    qre = metrics[QUANTUM_RELATIVE_ENTROPY]
    if qre.support_violation:
        notes.append("quantum_relative_entropy: support of the compared state is not "
                     "contained in the support of the reference state")
    elif qre.value > 1.0:
        notes.append("quantum_relative_entropy exceeds 1")
    flags = {k: bool(normalized[k] > getattr(thresholds, k)) for k in metrics}
    return ClassSafetyResult(label, n_correct, n_wrong, accuracy, metrics, normalized,
                             closeness, flags, None, notes)


def _evaluate(label, correct, wrong, thresholds, smoothing):
    n_c, n_w = len(correct), len(wrong)
    accuracy = n_c / (n_c + n_w) if n_c + n_w else None
    if not n_w or not n_c:
        reason = NO_SAMPLES if not (n_c or n_w) else (NO_MISCLASSIFIED if not n_w else NO_CORRECT)
        return ClassSafetyResult(label, n_c, n_w, accuracy, degenerate=reason)
    # relative entropy is read as S(misclassified || correct)
    metrics = all_metrics(aggregate(wrong), aggregate(correct), smoothing)
    return _score(label, n_c, n_w, metrics, accuracy, thresholds)


def analyze(records, n_classes, thresholds=None, dataset_id="dataset", group_by="true",
            smoothing=None, max_workers=None) -> SafetyReport:
    """Training-phase assessment over a set of labelled prediction records.

    For each class (and for all records pooled) the correct and
    misclassified sets are aggregated and compared with every metric.
    Classes lacking one of the two sets are reported as degenerate rather
    than given made-up distances.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no prediction records to analyze")
    thresholds = thresholds or ThresholdConfig()
    parts = partition(records, n_classes, group_by)
    dims = {r.dim for r in records}
    if len(dims) != 1:
        raise DimMismatch(f"records have differing state dims {sorted(dims)}")

    jobs = [(p.class_label, p.correct, p.misclassified) for p in parts]
    correct_all = [r for r in records if r.correct]
    wrong_all = [r for r in records if not r.correct]
    jobs.append((None, correct_all, wrong_all))

    workers = max_workers or thread_count()
    run = lambda job: _evaluate(*job, thresholds, smoothing)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    overall = results.pop()

    n_correct = len(correct_all)
    reference = {
        p.class_label: aggregate(p.correct).matrix for p in parts if p.correct
    }
    return SafetyReport(
        dataset_id=dataset_id,
        per_class=results,
        overall=overall,
        model_accuracy=float(Fraction(n_correct, len(records))),
        n_records=len(records),
        n_correct=n_correct,
        n_classes=n_classes,
        grouping=group_by,
        config_echo={
            "thresholds": thresholds.as_dict(),
            "aggregation": "uniform",
            "grouping": group_by,
            "relative_entropy": "S(misclassified || correct)",
            "smoothing": smoothing,
        },
        reference=reference,
    )


@dataclass
class BatchSummary:
    batch_index: int
    n_records: int
    classes: list
    skipped: list
    flagged: bool

    def as_dict(self):
        return {
            "batch": self.batch_index,
            "n_records": self.n_records,
            "grouping": "predicted",
            "flagged": self.flagged,
            "classes": self.classes,
            "skipped": self.skipped,
        }


def _batches(records, size):
    batch = []
    for r in records:
        batch.append(r)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


def online_check(new_records, reference: SafetyReport, thresholds=None, batch_size=50,
                 smoothing=None):
    """Operational-phase monitor.

    Yields one :class:`BatchSummary` per batch.  Within a batch, records
    are grouped by predicted label and each group's mixture is compared
    with the reference's correct-set mixture for that class.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not reference.reference:
        raise InsufficientData("reference report carries no correct-set states")
    if thresholds is None:
        echo = reference.config_echo.get("thresholds")
        thresholds = ThresholdConfig(**echo) if echo else ThresholdConfig()
    ref_states = {int(c): DensityMatrix(m) for c, m in reference.reference.items()}
    known = sorted(ref_states)

    for index, batch in enumerate(_batches(new_records, batch_size)):
        groups = {}
        for r in batch:
            if r.predicted_label not in ref_states:
                raise UnknownClass(
                    f"record {r.sample_id!r}: predicted class {r.predicted_label} has no reference state"
                )
            groups.setdefault(r.predicted_label, []).append(r)
        classes = []
        for c in sorted(groups):
            rho = aggregate(groups[c])
            ref = ref_states[c]
            if rho.dim != ref.dim:
                raise DimMismatch(f"batch state dim {rho.dim} vs reference dim {ref.dim}")
            metrics = all_metrics(rho, ref, smoothing)
            normalized = {k: normalized_value(m) for k, m in metrics.items()}
            flags = {k: bool(normalized[k] > getattr(thresholds, k)) for k in METRIC_KINDS}
            classes.append({
                "class": c,
                "n": len(groups[c]),
                "metrics": {k: m.value for k, m in metrics.items()},
                "normalized": normalized,
                "flags": flags,
            })
        skipped = [c for c in known if c not in groups]
        flagged = any(any(c["flags"].values()) for c in classes)
        yield BatchSummary(index, len(batch), classes, skipped, flagged)


def flag_rate(summaries) -> float:
    """Fraction of batches with at least one flag."""
    summaries = list(summaries)
    if not summaries:
        return 0.0
    return sum(s.flagged for s in summaries) / len(summaries)


def correlate_reports(reports):
    """Pearson r between each overall metric and model accuracy across reports.

    Reports whose overall value for a metric is missing or infinite are
    left out of that metric's correlation; the count is returned.

    Returns
    -------
    dict
        ``{kind: {"r": float, "n": int, "excluded": int}}``
    """
    reports = list(reports)
    if len(reports) < 2:
        raise InsufficientData("need at least two reports to correlate")
    out = {}
    for kind in METRIC_KINDS:
        xs, ys = [], []
        excluded = 0
        for rep in reports:
            m = (rep.overall.metrics or {}).get(kind)
            if m is None or not math.isfinite(m.value):
                excluded += 1
                continue
            xs.append(m.value)
            ys.append(rep.model_accuracy)
        if len(xs) < 2:
            raise InsufficientData(f"{kind}: fewer than two finite values after exclusions")
        out[kind] = {"r": pearson_correlation(xs, ys), "n": len(xs), "excluded": excluded}
    return out


def attach_correlations(reports, correlations=None):
    correlations = correlations or correlate_reports(reports)
    for rep in reports:
        rep.correlations = {k: v["r"] for k, v in correlations.items()}
    return correlations
