"""Command-line interface: ``qsafeml {synth,train,predict,monitor,online}``.

Every option may also come from a JSON ``--config`` file using the same
names (dashes or underscores).  Precedence is flags, then config file, then
built-in defaults.  Exit codes: 0 success, 2 usage or input error,
3 numerical failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import data as dp
from . import monitor as mon
from . import plotting, reporting, vqc
from .errors import InputError, NumericalError
from .metrics import METRIC_KINDS
from .scenarios import prediction_records

log = logging.getLogger("qsafeml")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

DEFAULTS = {
    "synth": {
        "n_samples": 200, "n_features": 2, "n_classes": 2, "separation": 3.0, "seed": 7,
        "noise_rate": 0.0, "noise_seed": 0, "out": None,
    },
    "train": {
        "data": None, "label_col": "-1", "qubits": None, "layers": 2, "epochs": 100,
        "lr": 0.1, "seed": 42, "pca_k": None, "test_fraction": 0.2, "split_seed": 0,
        "gradient_mode": "finite_difference", "out": None,
    },
    "predict": {
        "model": None, "data": None, "out": None, "label_col": None, "subset": "all",
        "record_type": "statevector", "unlabelled": False,
    },
    "monitor": {
        "records": None, "n_classes": None, "thresholds": None, "out": None, "plots_dir": None,
        "dataset_id": None, "group_by": "true", "smoothing": None, "summary": None,
        "reports": None, "no_figures": False,
    },
    "online": {
        "records_stream": "-", "reference": None, "batch_size": 50, "thresholds": None,
        "smoothing": None,
    },
}
REQUIRED = {
    "synth": ["out"],
    "train": ["data", "out"],
    "predict": ["model", "data", "out"],
    "monitor": ["out"],
    "online": ["reference"],
}


class UsageError(InputError):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="qsafeml", description=__doc__.splitlines()[0])
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON file with option values")
        return sp

    s = cmd("synth", "generate a synthetic Gaussian-blob dataset as CSV")
    s.add_argument("--n-samples", type=int)
    s.add_argument("--n-features", type=int)
    s.add_argument("--n-classes", type=int)
    s.add_argument("--separation", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--noise-rate", type=float, help="label flip probability")
    s.add_argument("--noise-seed", type=int)
    s.add_argument("--out")

    t = cmd("train", "train the variational classifier")
    t.add_argument("--data")
    t.add_argument("--label-col", help="label column name or index (default: last)")
    t.add_argument("--qubits", type=int)
    t.add_argument("--layers", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--pca-k", type=int)
    t.add_argument("--test-fraction", type=float)
    t.add_argument("--split-seed", type=int)
    t.add_argument("--gradient-mode", choices=vqc.GRADIENT_MODES)
    t.add_argument("--out")

    r = cmd("predict", "write prediction records (JSON Lines)")
    r.add_argument("--model")
    r.add_argument("--data")
    r.add_argument("--out")
    r.add_argument("--label-col")
    r.add_argument("--subset", choices=("all", "train", "test"))
    r.add_argument("--record-type", choices=("statevector", "distribution"))
    r.add_argument("--unlabelled", action="store_true", default=None,
                   help="data has no label column; records carry no true label")

    m = cmd("monitor", "analyze prediction records and write a safety report")
    src = m.add_mutually_exclusive_group()
    src.add_argument("--records", nargs="+")
    src.add_argument("--summary", help="CSV of dataset-level metric values and accuracies")
    m.add_argument("--reports", nargs="+", help="existing report files to correlate with")
    m.add_argument("--n-classes", type=int)
    m.add_argument("--thresholds", help="number, metric=value list, or JSON file")
    m.add_argument("--out")
    m.add_argument("--plots-dir")
    m.add_argument("--dataset-id")
    m.add_argument("--group-by", choices=mon.GROUPINGS)
    m.add_argument("--smoothing", type=float)
    m.add_argument("--no-figures", action="store_true", default=None)

    o = cmd("online", "monitor a record stream against a reference report")
    o.add_argument("--records-stream", help="JSON Lines file, or - for standard input")
    o.add_argument("--reference")
    o.add_argument("--batch-size", type=int)
    o.add_argument("--thresholds")
    o.add_argument("--smoothing", type=float)
    return p


def _resolve(args):
    """Merge flags over config file over defaults into a plain dict."""
    defaults = DEFAULTS[args.command]
    file_values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
        for key, value in raw.items():
            key = key.replace("-", "_")
            if key not in defaults:
                raise UsageError(f"{args.config}: unknown option {key!r} for {args.command}")
            file_values[key] = value
    opts = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        opts[key] = flag if flag is not None else file_values.get(key, default)
    missing = [k for k in REQUIRED[args.command] if opts[k] in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return opts


def _emit(doc):
    sys.stdout.write(json.dumps(doc, allow_nan=False) + "\n")
    sys.stdout.flush()


# -- synth ----------------------------------------------------------------------

def cmd_synth(o):
    spec = dp.SyntheticSpec(o["n_samples"], o["n_features"], o["n_classes"], o["separation"], o["seed"])
    d = dp.gen_synthetic(spec)
    flipped = 0
    if o["noise_rate"]:
        d, mask = dp.inject_label_noise(d, o["noise_rate"], o["noise_seed"])
        flipped = int(mask.sum())
    dp.save_csv(d, o["out"])
    _emit({"out": o["out"], "n_samples": len(d), "n_features": d.n_features,
           "n_classes": d.n_classes, "labels_flipped": flipped})


# -- train / predict --------------------------------------------------------------

def _preprocess(d, prep):
    if prep.get("pca"):
        pca = dp.PcaTransform(np.array(prep["pca"]["mean"]), np.array(prep["pca"]["components"]),
                              np.array(prep["pca"]["explained_variance"]))
        d = dp.pca_apply(pca, d)
    lo, hi = prep["scaler"]["low"], prep["scaler"]["high"]
    return dp.scale_minmax(d, (np.array(lo), np.array(hi)))


def cmd_train(o):
    d = dp.load_csv(o["data"], o["label_col"])
    if o["pca_k"] is not None:
        dp.pca_fit(d, o["pca_k"])  # surfaces KTooLarge before any splitting
    train_set, test_set = dp.split(d, o["test_fraction"], o["split_seed"])
    prep = {}
    if o["pca_k"] is not None:
        pca = dp.pca_fit(train_set, o["pca_k"])
        prep["pca"] = {"mean": pca.mean.tolist(), "components": pca.components.tolist(),
                       "explained_variance": pca.explained_variance.tolist()}
        fitted = dp.pca_apply(pca, train_set)
    else:
        fitted = train_set
    lo, hi = dp.minmax_bounds(fitted)
    prep["scaler"] = {"low": lo.tolist(), "high": hi.tolist()}
    train_x = _preprocess(train_set, prep)
    test_x = _preprocess(test_set, prep)

    n_features = train_x.n_features
    min_qubits = max(n_features, int(np.ceil(np.log2(max(d.n_classes, 2)))))
    qubits = o["qubits"] if o["qubits"] is not None else min_qubits
    if qubits < n_features:
        raise UsageError(f"--qubits {qubits} cannot encode {n_features} features")
    model = vqc.VqcModel.init(qubits, o["layers"], d.n_classes, seed=o["seed"])
    cfg = vqc.TrainConfig(o["lr"], o["epochs"], o["seed"], o["gradient_mode"])
    model = vqc.train(model, train_x, cfg)
    train_acc = vqc.accuracy(model, train_x)
    test_acc = vqc.accuracy(model, test_x)
    label_col = o["label_col"]
    vqc.save_model(model, o["out"], extra={
        "preprocessing": prep,
        "label_names": list(d.label_names),
        "label_column": label_col,
        "train_ids": train_set.ids.tolist(),
        "test_ids": test_set.ids.tolist(),
        "train_config": {"learning_rate": cfg.learning_rate, "epochs": cfg.epochs,
                         "seed": cfg.seed, "gradient_mode": cfg.gradient_mode,
                         "test_fraction": o["test_fraction"], "split_seed": o["split_seed"]},
        "metrics": {"train_accuracy": train_acc, "test_accuracy": test_acc,
                    "final_loss": model.loss_history[-1]},
    })
    _emit({"out": o["out"], "n_train": len(train_set), "n_test": len(test_set),
           "train_accuracy": train_acc, "test_accuracy": test_acc,
           "final_loss": model.loss_history[-1]})


def _load_for_prediction(o, doc):
    if o["unlabelled"]:
        return dp.load_csv(o["data"], None), False
    label_col = o["label_col"] if o["label_col"] is not None else doc.get("label_column", "-1")
    d = dp.load_csv(o["data"], label_col)
    names = doc.get("label_names")
    if names:
        lookup = {str(n): k for k, n in enumerate(names)}
        try:
            remap = np.array([lookup[str(n)] for n in d.label_names])
        except KeyError as exc:
            raise InputError(f"{o['data']}: label {exc.args[0]!r} unknown to the model") from None
        d = dp.Dataset(d.features, remap[d.labels], len(names), d.feature_names, tuple(names), d.ids)
    return d, True


def cmd_predict(o):
    model, doc = vqc.load_model(o["model"])
    d, labelled = _load_for_prediction(o, doc)
    if o["subset"] != "all":
        ids = doc.get(f"{o['subset']}_ids")
        if ids is None:
            raise InputError(f"{o['model']} records no {o['subset']} split")
        if max(ids, default=-1) >= len(d):
            raise InputError(f"{o['data']} has fewer rows than the model's {o['subset']} split")
        d = d.subset(ids)
    x = _preprocess(d, doc.get("preprocessing", {"scaler": {
        "low": d.features.min(axis=0).tolist(), "high": d.features.max(axis=0).tolist()}}))
    records = prediction_records(model, x, labelled, o["record_type"])
    reporting.write_records(records, o["out"])
    out = {"out": o["out"], "n_records": len(records), "record_type": o["record_type"]}
    if labelled:
        out["accuracy"] = float(np.mean([r.correct for r in records]))
    _emit(out)


# -- monitor / online ---------------------------------------------------------------

def _thresholds(spec):
    if spec is None:
        return mon.ThresholdConfig()
    if isinstance(spec, dict):
        return mon.ThresholdConfig(**spec)
    if isinstance(spec, (int, float)):
        return mon.ThresholdConfig.parse(str(spec))
    if os.path.isfile(spec):
        with open(spec, encoding="utf-8") as fh:
            return mon.ThresholdConfig(**json.load(fh))
    try:
        return mon.ThresholdConfig.parse(spec)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid --thresholds {spec!r}: {exc}") from None


def read_summary(path, thresholds=None):
    """Reports from a CSV with columns dataset, the four metric names, accuracy."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    need = {"dataset", "accuracy", *METRIC_KINDS}
    if not rows or not need <= set(rows[0]):
        raise InputError(f"{path}: summary CSV needs columns {sorted(need)}")
    reports = []
    for i, row in enumerate(rows, start=2):
        try:
            values = {k: float(row[k]) for k in METRIC_KINDS}
            acc = float(row["accuracy"])
        except ValueError as exc:
            raise InputError(f"{path}: row {i}: {exc}") from None
        reports.append(mon.SafetyReport.from_summary(row["dataset"], values, acc, thresholds))
    return reports


def cmd_monitor(o):
    thresholds = _thresholds(o["thresholds"])
    reports = []
    if o["summary"]:
        reports.extend(read_summary(o["summary"], thresholds))
    for path in o["records"] or []:
        records = reporting.read_records(path)
        if not records:
            raise InputError(f"{path}: no records")
        n_classes = o["n_classes"]
        if n_classes is None:
            n_classes = 1 + max(max(r.predicted_label, r.true_label or 0) for r in records)
        if o["dataset_id"] and len(o["records"]) == 1:
            dataset_id = o["dataset_id"]
        else:
            dataset_id = os.path.splitext(os.path.basename(path))[0]
        reports.append(mon.analyze(records, n_classes, thresholds, dataset_id=dataset_id,
                                   group_by=o["group_by"], smoothing=o["smoothing"]))
    for path in o["reports"] or []:
        reports.append(reporting.read_report(path))
    if not reports:
        raise UsageError("monitor needs --records, --summary or --reports")

    figures = not o["no_figures"]
    if len(reports) == 1:
        rep = reports[0]
        reporting.write_report(rep, o["out"])
        if o["plots_dir"]:
            plotting.export_report(rep, o["plots_dir"], figures=figures)
        _emit(_report_summary(rep))
        return
    correlations = mon.attach_correlations(reports)
    reporting.dump_json(reporting.bundle_to_dict(reports, correlations), o["out"])
    if o["plots_dir"]:
        plotting.export_reports(reports, o["plots_dir"], correlations, figures=figures)
        for rep in reports:
            if rep.per_class:
                plotting.export_report(rep, o["plots_dir"], figures=figures)
    _emit({"out": o["out"], "n_reports": len(reports),
           "correlations": {k: v["r"] for k, v in correlations.items()},
           "excluded": {k: v["excluded"] for k, v in correlations.items()}})


def _report_summary(rep):
    flagged = [r.class_label for r in rep.per_class if r.flagged]
    return {
        "dataset_id": rep.dataset_id,
        "model_accuracy": rep.model_accuracy,
        "flagged_classes": flagged,
        "overall_flagged": rep.overall.flagged,
        "degenerate_classes": [r.class_label for r in rep.per_class if r.degenerate],
    }


def cmd_online(o):
    reference = reporting.read_report(o["reference"])
    thresholds = _thresholds(o["thresholds"]) if o["thresholds"] is not None else None
    if o["records_stream"] == "-":
        stream = reporting.iter_records(sys.stdin, source="<stdin>")
        summaries = _run_online(stream, reference, thresholds, o)
    else:
        with open(o["records_stream"], encoding="utf-8") as fh:
            stream = reporting.iter_records(fh, source=o["records_stream"])
            summaries = _run_online(stream, reference, thresholds, o)
    _emit({"kind": "summary", "batches": len(summaries),
           "flagged_batches": sum(s.flagged for s in summaries),
           "flag_rate": mon.flag_rate(summaries)})


def _run_online(stream, reference, thresholds, o):
    summaries = []
    for s in mon.online_check(stream, reference, thresholds, o["batch_size"], o["smoothing"]):
        summaries.append(s)
        _emit({"kind": "batch", **s.as_dict()})
    return summaries


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "predict": cmd_predict,
            "monitor": cmd_monitor, "online": cmd_online}


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            opts = _resolve(args)
            COMMANDS[args.command](opts)
    except NumericalError as exc:
        print(f"qsafeml {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"qsafeml {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
