"""Reusable experiment drivers built on the library.

The label-noise sweep checks that the monitor reacts to training-label
corruption.  For each flip rate the labels of S1 are corrupted and the
data split.  A model is trained on the noisy training part and analysed
on the noisy validation part.  Then an operational stream of fresh,
unlabelled draws is checked online against the *clean-rate* reference,
which stands for the trusted baseline deployment.
"""

from dataclasses import dataclass

import numpy as np

from . import data as dp
from . import monitor as mon
from . import vqc
from .states import StateVector


def prediction_records(model, d, labelled=True, record_type="statevector"):
    """Run ``model`` on already-scaled ``d`` and wrap the outputs as records."""
    probs, states = vqc.predict_batch(model, d.features)
    predicted = np.argmax(probs, axis=1)
    records = []
    for i in range(len(d)):
        state = StateVector(states[i]) if record_type == "statevector" else np.abs(states[i]) ** 2
        records.append(mon.PredictionRecord(
            sample_id=str(int(d.ids[i])),
            true_label=int(d.labels[i]) if labelled else None,
            predicted_label=int(predicted[i]),
            output_state=state,
        ))
    return records


@dataclass(frozen=True)
class NoiseLevel:
    rate: float
    n_flipped: int
    validation_accuracy: float
    report: mon.SafetyReport
    flag_rate: float


def label_noise_sweep(rates=(0.0, 0.1, 0.3), spec=dp.S1, noise_seed=11, split_seed=0,
                      operational_seed=8, n_operational=400, batch_size=50,
                      n_layers=2, train_config=None, thresholds=None):
    """Train, analyse and monitor once per flip rate; the first rate is the reference."""
    cfg = train_config or vqc.TrainConfig()
    base = dp.gen_synthetic(spec)
    fresh = dp.gen_synthetic(dp.SyntheticSpec(n_operational, spec.n_features, spec.n_classes,
                                              spec.separation, operational_seed))
    n_qubits = max(spec.n_features, int(np.ceil(np.log2(spec.n_classes))))
    reference, levels = None, []
    for rate in rates:
        noisy, flipped = dp.inject_label_noise(base, rate, noise_seed)
        train_set, val_set = dp.split(noisy, 0.2, split_seed)
        bounds = dp.minmax_bounds(train_set)
        model = vqc.VqcModel.init(n_qubits, n_layers, spec.n_classes, seed=cfg.seed)
        model = vqc.train(model, dp.scale_minmax(train_set, bounds), cfg)
        val = dp.scale_minmax(val_set, bounds)
        report = mon.analyze(prediction_records(model, val), spec.n_classes, thresholds,
                             dataset_id=f"noise_{rate:g}")
        if reference is None:
            reference = report
        stream = prediction_records(model, dp.scale_minmax(fresh, bounds), labelled=False)
        rate_flagged = mon.flag_rate(mon.online_check(stream, reference, thresholds, batch_size))
        levels.append(NoiseLevel(rate, int(flipped.sum()), vqc.accuracy(model, val), report,
                                 rate_flagged))
    return levels
