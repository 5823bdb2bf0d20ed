"""Serialization of prediction records (JSON Lines) and safety reports (JSON)."""

import json
import math
from importlib import resources

import numpy as np

from .errors import InputError
from .metrics import METRIC_KINDS, MetricValue
from .monitor import ClassSafetyResult, PredictionRecord, SafetyReport
from .states import StateVector

SCHEMA_VERSION = "1"


# -- prediction records -------------------------------------------------------

def record_to_dict(r: PredictionRecord):
    if r.kind == "statevector":
        state = {"type": "statevector",
                 "amplitudes": [[float(a.real), float(a.imag)] for a in r.output_state.amplitudes]}
    else:
        state = {"type": "distribution", "probs": [float(p) for p in r.output_state]}
    doc = {"sample_id": r.sample_id}
    if r.true_label is not None:
        doc["true_label"] = int(r.true_label)
    doc["predicted_label"] = int(r.predicted_label)
    doc["state"] = state
    return doc


def record_from_dict(doc, where="record"):
    try:
        state = doc["state"]
        if state["type"] == "statevector":
            amps = np.array([complex(re, im) for re, im in state["amplitudes"]])
            output = StateVector(amps)
        elif state["type"] == "distribution":
            output = state["probs"]
        else:
            raise InputError(f"{where}: unknown state type {state['type']!r}")
        true_label = doc.get("true_label")
        return PredictionRecord(
            sample_id=str(doc["sample_id"]),
            true_label=None if true_label is None else int(true_label),
            predicted_label=int(doc["predicted_label"]),
            output_state=output,
        )
    except InputError as exc:
        raise InputError(f"{where}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{where}: malformed record ({exc})") from exc


def write_records(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(record_to_dict(r)) + "\n")


def iter_records(lines, source="<stream>"):
    """Parse JSON Lines lazily; blank lines are skipped."""
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{source}:{lineno}: invalid JSON ({exc.msg})") from exc
        yield record_from_dict(doc, where=f"{source}:{lineno}")


def read_records(path):
    with open(path, encoding="utf-8") as fh:
        return list(iter_records(fh, source=str(path)))


# -- reports --------------------------------------------------------------------

def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unnum(x):
    return None if x is None else float(x)


def _matrix_to_json(m):
    m = np.asarray(m)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _matrix_from_json(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def result_to_dict(res: ClassSafetyResult):
    doc = {
        "class_label": res.class_label,
        "n_correct": res.n_correct,
        "n_misclassified": res.n_misclassified,
        "class_accuracy": _num(res.class_accuracy),
        "degenerate": res.degenerate,
        "metrics": None,
        "normalized": None,
        "closeness": None,
        "flags": {k: bool(res.flags.get(k, False)) for k in METRIC_KINDS},
        "warnings": list(res.warnings),
    }
    if res.metrics is not None:
        doc["metrics"] = {
            k: {"value": _num(m.value), "support_violation": m.support_violation,
                "smoothed": m.smoothed}
            for k, m in res.metrics.items()
        }
        doc["normalized"] = {k: _num(v) for k, v in res.normalized.items()}
        doc["closeness"] = {k: _num(v) for k, v in res.closeness.items()}
    return doc


def result_from_dict(doc):
    metrics = normalized = closeness = None
    if doc.get("metrics") is not None:
        metrics = {
            k: MetricValue(k, _unnum(v["value"]), v.get("support_violation", False),
                           v.get("smoothed", False))
            for k, v in doc["metrics"].items()
        }
        normalized = {k: _unnum(v) for k, v in doc["normalized"].items()}
        closeness = {k: _unnum(v) for k, v in doc["closeness"].items()}
    return ClassSafetyResult(
        class_label=doc["class_label"],
        n_correct=doc["n_correct"],
        n_misclassified=doc["n_misclassified"],
        class_accuracy=_unnum(doc["class_accuracy"]),
        metrics=metrics,
        normalized=normalized,
        closeness=closeness,
        flags=dict(doc["flags"]),
        degenerate=doc.get("degenerate"),
        warnings=list(doc.get("warnings", [])),
    )


def report_to_dict(rep: SafetyReport):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "report",
        "dataset_id": rep.dataset_id,
        "n_classes": rep.n_classes,
        "n_records": rep.n_records,
        "n_correct": rep.n_correct,
        "model_accuracy": _num(rep.model_accuracy),
        "grouping": rep.grouping,
        "per_class": [result_to_dict(r) for r in rep.per_class],
        "overall": result_to_dict(rep.overall),
        "correlations": None if rep.correlations is None
        else {k: _num(v) for k, v in rep.correlations.items()},
        "config_echo": rep.config_echo,
        "reference": {str(c): _matrix_to_json(m) for c, m in sorted(rep.reference.items())},
    }


def report_from_dict(doc):
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported report schema_version {doc.get('schema_version')!r}")
    corr = doc.get("correlations")
    return SafetyReport(
        dataset_id=doc["dataset_id"],
        per_class=[result_from_dict(r) for r in doc["per_class"]],
        overall=result_from_dict(doc["overall"]),
        model_accuracy=_unnum(doc["model_accuracy"]),
        n_records=doc["n_records"],
        n_correct=doc["n_correct"],
        n_classes=doc["n_classes"],
        grouping=doc.get("grouping", "true"),
        correlations=None if corr is None else {k: _unnum(v) for k, v in corr.items()},
        config_echo=doc.get("config_echo", {}),
        reference={int(c): _matrix_from_json(m) for c, m in doc.get("reference", {}).items()},
    )


def bundle_to_dict(reports, correlations):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "bundle",
        "reports": [report_to_dict(r) for r in reports],
        "correlations": {
            k: {"r": _num(v["r"]), "n": v["n"], "excluded": v["excluded"]}
            for k, v in correlations.items()
        },
    }


def dump_json(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_report(rep, path):
    dump_json(report_to_dict(rep), path)


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") == "bundle":
        raise InputError(f"{path} is a multi-report bundle, not a single report")
    return report_from_dict(doc)


def load_schema():
    text = resources.files("qsafeml").joinpath("report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)
