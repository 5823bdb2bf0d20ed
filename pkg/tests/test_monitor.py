import math
from fractions import Fraction

import numpy as np
import pytest

from qsafeml import monitor as mon
from qsafeml.errors import EmptyInput, EmptySet, InsufficientData, LabelOutOfRange, UnknownClass, ZeroVariance
from qsafeml.metrics import METRIC_KINDS
from qsafeml.states import StateVector


def rec(i, true, pred, state):
    if not isinstance(state, StateVector) and np.iscomplexobj(state):
        state = StateVector(state)
    return mon.PredictionRecord(str(i), true, pred, state)


def random_records(seed, n, n_classes=3, dim=4, p_correct=0.7):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        t = int(rng.integers(n_classes))
        p = t if rng.random() < p_correct else int((t + rng.integers(1, n_classes)) % n_classes)
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        out.append(rec(f"{i:05d}", t, p, StateVector(v / np.linalg.norm(v))))
    return out


def values(report):
    rows = list(report.per_class) + [report.overall]
    return [(r.n_correct, r.n_misclassified, r.degenerate,
             None if r.metrics is None else {k: m.value for k, m in r.metrics.items()}) for r in rows]


def close_metrics(a, b, tol=1e-12):
    for (_, _, da, ma), (_, _, db, mb) in zip(values(a), values(b)):
        assert da == db
        if ma is not None:
            for k in METRIC_KINDS:
                assert ma[k] == pytest.approx(mb[k], abs=tol) or ma[k] == mb[k]


# -- partition / aggregate -----------------------------------------------------------

def test_partition_trace():
    z = np.array([1, 0], dtype=complex)
    parts = mon.partition([rec(0, 0, 0, z), rec(1, 0, 1, z), rec(2, 1, 1, z)], 2)
    assert [(len(p.correct), len(p.misclassified)) for p in parts] == [(1, 1), (1, 0)]


def test_partition_confusion_oracle():
    records = random_records(0, 1000, n_classes=4, dim=2)
    confusion = np.zeros((4, 4), int)
    for r in records:
        confusion[r.true_label, r.predicted_label] += 1
    parts = mon.partition(records, 4)
    for c, p in enumerate(parts):
        assert len(p.correct) == confusion[c, c]
        assert len(p.correct) + len(p.misclassified) == confusion[c].sum()
    by_pred = mon.partition(records, 4, group_by="predicted")
    for c, p in enumerate(by_pred):
        assert len(p.misclassified) == confusion[:, c].sum() - confusion[c, c]
    # every record lands in exactly one list
    ids = [r.sample_id for p in parts for r in p.correct + p.misclassified]
    assert sorted(ids) == sorted(r.sample_id for r in records)


def test_partition_label_errors():
    z = np.array([1, 0], dtype=complex)
    with pytest.raises(LabelOutOfRange):
        mon.partition([rec(0, 2, 0, z)], 2)
    with pytest.raises(LabelOutOfRange):
        mon.partition([rec(0, None, 0, z)], 2)


def test_aggregate_examples():
    z, o = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    np.testing.assert_allclose(mon.aggregate([rec(0, 0, 0, z)]).matrix, np.diag([1, 0]))
    np.testing.assert_allclose(mon.aggregate([rec(0, 0, 0, z), rec(1, 0, 0, o)]).matrix, np.diag([0.5, 0.5]))
    with pytest.raises(EmptySet):
        mon.aggregate([])


def test_aggregate_summation_oracle():
    records = random_records(5, 50, dim=8)
    expected = np.zeros((8, 8), dtype=complex)
    for r in records:
        a = r.output_state.amplitudes
        for i in range(8):
            for j in range(8):
                expected[i, j] += a[i] * np.conj(a[j]) / 50
    np.testing.assert_allclose(mon.aggregate(records).matrix, expected, atol=1e-12)


def test_aggregate_distribution_records():
    records = [rec(0, 0, 0, [0.2, 0.8]), rec(1, 0, 0, [0.6, 0.4])]
    np.testing.assert_allclose(mon.aggregate(records).matrix, np.diag([0.4, 0.6]))


# -- analyze -----------------------------------------------------------------------------

def test_all_correct_is_degenerate():
    records = [r for r in random_records(1, 60) if r.correct]
    report = mon.analyze(records, 3)
    assert report.model_accuracy == 1.0
    assert all(c.degenerate == mon.NO_MISCLASSIFIED for c in report.per_class)
    assert report.overall.degenerate == mon.NO_MISCLASSIFIED
    assert not any(c.flagged for c in report.per_class) and not report.overall.flagged


def test_orthogonal_aggregates():
    z, o = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    records = [rec(0, 0, 0, z), rec(1, 0, 0, z), rec(2, 0, 1, o), rec(3, 1, 1, o)]
    report = mon.analyze(records, 2)
    c0 = report.per_class[0]
    m = {k: v.value for k, v in c0.metrics.items()}
    assert m["trace_distance"] == pytest.approx(1.0)
    assert m["fidelity"] == pytest.approx(0.0, abs=1e-12)
    assert m["bures_distance"] == pytest.approx(math.sqrt(2))
    assert m["quantum_relative_entropy"] == math.inf
    assert c0.metrics["quantum_relative_entropy"].support_violation
    assert all(c0.flags.values())
    assert c0.closeness["quantum_relative_entropy"] is None
    assert any("support" in w for w in c0.warnings)
    assert report.per_class[1].degenerate == mon.NO_MISCLASSIFIED
    assert c0.class_accuracy == pytest.approx(2 / 3)


def test_empty_class_reported():
    z = np.array([1, 0], dtype=complex)
    report = mon.analyze([rec(0, 0, 0, z), rec(1, 0, 1, z)], 3)
    assert [c.degenerate for c in report.per_class] == [None, mon.NO_SAMPLES, mon.NO_SAMPLES]
    by_pred = mon.analyze([rec(0, 0, 0, z), rec(1, 0, 1, z)], 3, group_by="predicted")
    assert [c.degenerate for c in by_pred.per_class] == [mon.NO_MISCLASSIFIED, mon.NO_CORRECT, mon.NO_SAMPLES]


def test_analyze_errors():
    with pytest.raises(EmptyInput):
        mon.analyze([], 2)


def test_permutation_invariance():
    records = random_records(2, 120)
    a = mon.analyze(records, 3)
    shuffled = [records[i] for i in np.random.default_rng(0).permutation(len(records))]
    b = mon.analyze(shuffled, 3)
    assert values(a) == values(b)


def test_duplication_invariance():
    records = random_records(3, 90)
    a = mon.analyze(records, 3)
    b = mon.analyze(records + records, 3)
    close_metrics(a, b)
    assert a.model_accuracy == b.model_accuracy
    assert [c.class_accuracy for c in a.per_class] == [c.class_accuracy for c in b.per_class]


def test_accuracy_exact_rational():
    records = random_records(4, 97)
    report = mon.analyze(records, 3)
    total = sum(Fraction(c.n_correct) for c in report.per_class)
    weighted = sum(Fraction(c.class_accuracy).limit_denominator(1000) * c.n_total
                   for c in report.per_class if c.class_accuracy is not None)
    assert weighted / report.n_records == Fraction(report.n_correct, report.n_records)
    assert total == report.n_correct
    assert report.model_accuracy == float(Fraction(sum(r.correct for r in records), 97))


def test_threaded_matches_serial():
    records = random_records(6, 150)
    assert values(mon.analyze(records, 3, max_workers=1)) == values(mon.analyze(records, 3, max_workers=4))


def test_smoothing_makes_qre_finite():
    z, o = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    records = [rec(0, 0, 0, z), rec(2, 0, 1, o), rec(3, 1, 1, o)]
    c0 = mon.analyze(records, 2, smoothing=1e-9).per_class[0]
    qre = c0.metrics["quantum_relative_entropy"]
    assert math.isfinite(qre.value) and qre.smoothed and qre.support_violation


def test_threshold_config():
    t = mon.ThresholdConfig.parse("0.3")
    assert set(t.as_dict().values()) == {0.3}
    t = mon.ThresholdConfig.parse("fidelity=0.2, trace_distance=0.1")
    assert t.fidelity == 0.2 and t.trace_distance == 0.1 and t.bures_distance == 0.5
    with pytest.raises(ValueError):
        mon.ThresholdConfig.parse("nope=0.1")
    with pytest.raises(ValueError):
        mon.ThresholdConfig(fidelity=1.5)


def test_threshold_controls_flags():
    records = random_records(7, 200)
    strict = mon.analyze(records, 3, mon.ThresholdConfig.parse("0"))
    lax = mon.analyze(records, 3, mon.ThresholdConfig.parse("1"))
    assert strict.overall.flags["trace_distance"] and not any(lax.overall.flags.values())


# -- online ------------------------------------------------------------------------------

def _reference():
    z, o = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    records = [rec(0, 0, 0, z), rec(1, 1, 1, o), rec(2, 0, 1, plus), rec(3, 1, 0, plus)]
    return mon.analyze(records, 2)


def test_online_orthogonal_batch_flags_everything():
    ref = _reference()
    z, o = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    stream = [rec(i, None, 0, o) for i in range(4)] + [rec(9, None, 1, z)]
    (summary,) = list(mon.online_check(stream, ref, batch_size=10))
    assert summary.flagged and summary.skipped == []
    for entry in summary.classes:
        assert all(entry["flags"].values())
        assert entry["metrics"]["trace_distance"] == pytest.approx(1.0)


def test_online_matching_batch_no_flags_and_skip():
    ref = _reference()
    z = np.array([1, 0], dtype=complex)
    summaries = list(mon.online_check([rec(i, None, 0, z) for i in range(5)], ref, batch_size=2))
    assert [s.n_records for s in summaries] == [2, 2, 1]
    assert all(not s.flagged and s.skipped == [1] for s in summaries)
    assert mon.flag_rate(summaries) == 0.0
    assert summaries[0].as_dict()["grouping"] == "predicted"


def test_online_unknown_class():
    ref = _reference()
    with pytest.raises(UnknownClass):
        list(mon.online_check([rec(0, None, 5, np.array([1, 0], dtype=complex))], ref))
    with pytest.raises(ValueError):
        list(mon.online_check([], ref, batch_size=0))


def test_online_deterministic():
    records = random_records(8, 100, n_classes=2, dim=2, p_correct=0.9)
    ref = mon.analyze(records[:50], 2)
    a = [s.as_dict() for s in mon.online_check(records[50:], ref, batch_size=7)]
    b = [s.as_dict() for s in mon.online_check(iter(records[50:]), ref, batch_size=7)]
    assert a == b


def test_flag_rate_empty():
    assert mon.flag_rate([]) == 0.0


# -- correlation ---------------------------------------------------------------------------

def _summary(name, td, acc, qre=0.5):
    return mon.SafetyReport.from_summary(name, {"trace_distance": td, "fidelity": 1 - td,
                                                "bures_distance": td / 2, "quantum_relative_entropy": qre}, acc)


def test_correlate_identical_reports_zero_variance():
    with pytest.raises(ZeroVariance):
        mon.correlate_reports([_summary("a", 0.3, 0.5), _summary("b", 0.3, 0.5)])


def test_correlate_metric_equals_accuracy():
    reports = [mon.SafetyReport.from_summary(str(a), {k: a for k in METRIC_KINDS}, a) for a in (0.1, 0.4, 0.8)]
    out = mon.correlate_reports(reports)
    assert out["trace_distance"]["r"] == pytest.approx(1.0)


def test_correlate_excludes_infinite():
    reports = [_summary("a", 0.1, 0.2, 0.1), _summary("b", 0.3, 0.5, math.inf), _summary("c", 0.6, 0.7, 0.6),
               _summary("d", 0.2, 0.1, 0.3)]
    out = mon.correlate_reports(reports)
    assert out["quantum_relative_entropy"]["excluded"] == 1 and out["quantum_relative_entropy"]["n"] == 3
    with pytest.raises(InsufficientData):
        mon.correlate_reports(reports[:1])
