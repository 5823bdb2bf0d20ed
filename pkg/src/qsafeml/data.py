"""Dataset loading, scaling, PCA, splitting, synthetic generation and
label-noise injection."""

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import KTooLarge, MissingLabel, ParseError
from .linalg import eig_hermitian


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_names: tuple = None
    label_names: tuple = None
    ids: np.ndarray = None

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.array(self.labels, dtype=int).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.size or y.size < 1:
            raise ValueError(f"need matching non-empty features/labels, got {x.shape} and {y.shape}")
        if np.any(np.isnan(x)):
            raise ValueError("features contain NaN")
        if np.any(y < 0) or np.any(y >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        ids = np.arange(y.size) if self.ids is None else np.asarray(self.ids)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return self.labels.size

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, index):
        index = np.asarray(index, dtype=int)
        return replace(self, features=self.features[index], labels=self.labels[index],
                       ids=self.ids[index])


def _label_order(raw):
    uniq = sorted(set(raw))
    try:
        return sorted(uniq, key=float)
    except ValueError:
        return uniq


def load_csv(path, label_column=-1) -> Dataset:
    """Read a headed CSV; ``label_column`` is a column name or integer index.

    Labels are re-indexed densely to ``0..n_classes-1`` (numeric order when
    all labels parse as numbers, lexicographic otherwise); the original
    values are kept in ``label_names``.  ``label_column=None`` reads every
    column as a feature and assigns the placeholder label 0.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file (header row required)")
    header, body = rows[0], [r for r in rows[1:] if r]
    if label_column is None:
        col = None
    elif isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise MissingLabel(f"{path}: no column named {label_column!r}")
        col = header.index(label_column)
    else:
        col = int(label_column)
        if not -len(header) <= col < len(header):
            raise MissingLabel(f"{path}: label column index {col} out of range")
        col %= len(header)

    feature_cols = [j for j in range(len(header)) if j != col]
    unlabelled = col is None
    features, raw_labels = [], []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}", row=i)
        label = "0" if unlabelled else row[col].strip()
        if label == "":
            raise MissingLabel(f"{path}: row {i} has an empty label")
        raw_labels.append(label)
        values = []
        for j in feature_cols:
            try:
                values.append(float(row[j]))
            except ValueError:
                raise ParseError(
                    f"{path}: row {i}, column {header[j]!r}: cannot parse {row[j]!r} as a number",
                    row=i, column=header[j],
                ) from None
        features.append(values)
    if not body:
        raise ParseError(f"{path}: no data rows")

    names = _label_order(raw_labels)
    index = {name: k for k, name in enumerate(names)}
    return Dataset(
        features=np.array(features, dtype=float).reshape(len(body), len(feature_cols)),
        labels=np.array([index[v] for v in raw_labels]),
        n_classes=len(names),
        feature_names=tuple(header[j] for j in feature_cols),
        label_names=None if unlabelled else tuple(names),
    )


def save_csv(d: Dataset, path, label_name="label"):
    names = d.feature_names or tuple(f"x{j}" for j in range(d.n_features))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + [label_name])
        for row, label in zip(d.features, d.labels):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def minmax_bounds(d: Dataset):
    return d.features.min(axis=0), d.features.max(axis=0)


def scale_minmax(d: Dataset, bounds=None) -> Dataset:
    """Affinely map each column onto ``[-1, 1]``.

    ``bounds`` (a ``(lo, hi)`` pair from :func:`minmax_bounds`) lets a test
    split reuse the training range; values outside it are clamped.  Constant
    columns become 0 with a warning.
    """
    lo, hi = minmax_bounds(d) if bounds is None else (np.asarray(b, float) for b in bounds)
    span = hi - lo
    constant = span == 0
    if np.any(constant):
        warnings.warn(f"constant feature columns {np.flatnonzero(constant).tolist()} mapped to 0")
    safe = np.where(constant, 1.0, span)
    x = np.where(constant, 0.0, 2.0 * (d.features - lo) / safe - 1.0)
    return replace(d, features=np.clip(x, -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class PcaTransform:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def k(self):
        return self.components.shape[0]


def pca_fit(d: Dataset, k: int) -> PcaTransform:
    """Top-``k`` principal axes from the covariance eigendecomposition.

    Covariance uses the ``n - 1`` divisor.  Each component is sign-fixed so
    that its first non-negligible entry is positive.
    """
    n, p = d.features.shape
    if not 1 <= k <= p:
        raise KTooLarge(f"k={k} must be between 1 and the feature count {p}")
    if p > n:
        raise KTooLarge(f"feature count {p} exceeds sample count {n}")
    mean = d.features.mean(axis=0)
    centered = d.features - mean
    cov = centered.T @ centered / max(n - 1, 1)
    w, v = eig_hermitian(0.5 * (cov + cov.T))
    order = np.argsort(-w, kind="stable")[:k]
    comps = np.real(v[:, order]).T.copy()
    for row in comps:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return PcaTransform(mean, comps, np.maximum(w[order], 0.0))


def pca_apply(t: PcaTransform, d: Dataset) -> Dataset:
    z = (d.features - t.mean) @ t.components.T
    return replace(d, features=z, feature_names=tuple(f"pc{j + 1}" for j in range(t.k)))


def pca_inverse(t: PcaTransform, z):
    """Lift projected rows back into the original (uncentered) space."""
    return np.asarray(z) @ t.components + t.mean


def split(d: Dataset, test_fraction, seed):
    """Stratified, seeded train/test split.

    The test size is ``round(n * test_fraction)``, shared out across classes
    by largest remainder.  If any class has fewer than two samples the split
    falls back to a plain shuffle with a warning.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    n = len(d)
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1) if n > 1 else 0
    counts = np.bincount(d.labels, minlength=d.n_classes)
    present = counts[counts > 0]
    if present.size and present.min() >= 2:
        quota = counts * n_test / n
        take = np.floor(quota).astype(int)
        remainder = n_test - take.sum()
        order = np.argsort(-(quota - take), kind="stable")
        take[order[:remainder]] += 1
        test_idx = []
        for c in range(d.n_classes):
            members = np.flatnonzero(d.labels == c)
            test_idx.extend(rng.permutation(members)[: take[c]])
        test_idx = np.sort(np.array(test_idx, dtype=int))
    else:
        warnings.warn("class too small to stratify; using an unstratified split")
        test_idx = np.sort(rng.permutation(n)[:n_test])
    train_mask = np.ones(n, dtype=bool)
    train_mask[test_idx] = False
    return d.subset(np.flatnonzero(train_mask)), d.subset(test_idx)


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 200
    n_features: int = 2
    n_classes: int = 2
    separation: float = 3.0
    seed: int = 7


S1 = SyntheticSpec()


def class_centers(n_features, n_classes):
    """Hypercube vertices: coordinate ``j`` of class ``k`` is ``+1`` if bit ``j`` of ``k`` is set, else ``-1``."""
    if n_classes > 2 ** n_features:
        raise ValueError(f"{n_classes} classes need at least {int(np.ceil(np.log2(n_classes)))} features")
    bits = (np.arange(n_classes)[:, None] >> np.arange(n_features)[None, :]) & 1
    return 2.0 * bits - 1.0


def gen_synthetic(spec: SyntheticSpec = S1) -> Dataset:
    """Unit-variance Gaussian blobs centred on hypercube vertices scaled by ``separation``."""
    if spec.separation < 0:
        raise ValueError("separation must be non-negative")
    rng = np.random.default_rng(spec.seed)
    labels = rng.permutation(np.arange(spec.n_samples) % spec.n_classes)
    centers = spec.separation * class_centers(spec.n_features, spec.n_classes)
    x = centers[labels] + rng.standard_normal((spec.n_samples, spec.n_features))
    return Dataset(x, labels, spec.n_classes,
                   feature_names=tuple(f"x{j}" for j in range(spec.n_features)))


def inject_label_noise(d: Dataset, rate, seed):
    """Flip each label with probability ``rate`` to a uniformly chosen other class.

    Returns ``(noisy_dataset, flip_mask)``.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    flip = rng.random(len(d)) < rate
    offsets = rng.integers(1, d.n_classes, size=len(d)) if d.n_classes > 1 else np.zeros(len(d), int)
    labels = np.where(flip, (d.labels + offsets) % d.n_classes, d.labels)
    return replace(d, labels=labels), flip
