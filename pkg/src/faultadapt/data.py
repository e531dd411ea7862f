"""Telemetry datasets: CSV trace loading, normalization, label masking and
synthetic scenario generation.

A dataset is an immutable bundle of float64 feature rows with optional integer
labels (-1 marks an unlabeled row), a domain tag per row and an optional node
type per row. The synthetic generator builds paired source/target datasets
from per-class Gaussians, where the target domain applies a class-preserving
covariate shift: per-class mean translations along seeded directions, a
rotation in a seeded 2-plane and a noise rescale. Node-heterogeneous
scenarios split the target into typed blocks whose shift strength varies per
type.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

DOMAINS = ("source", "target")
NODE_TYPES = ("cpu_intensive", "memory_intensive", "io_bound", "mixed")
SCENARIO_KINDS = (
    "standard_shift",
    "zero_shift",
    "label_scarcity",
    "class_imbalance",
    "heterogeneous_nodes",
)

DEFAULT_FEATURE_COLUMNS = (
    "cpu_usage",
    "mem_usage",
    "disk_read",
    "disk_write",
    "net_in",
    "net_out",
)
_META_COLUMNS = ("timestamp", "node_id", "node_type", "domain", "label")

UNLABELED = -1


class TraceFormatError(ValueError):
    """Raised when a trace CSV cannot be parsed; names the offending cell."""


@dataclass(frozen=True)
class Sample:
    """One telemetry row."""

    features: np.ndarray
    label: int | None
    domain: str
    node_type: str | None


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of telemetry rows.

    Attributes:
        features: shape (n, d) float64 matrix, one row per sample.
        labels: shape (n,) int64; UNLABELED (-1) marks missing labels.
        domains: shape (n,) strings, each 'source' or 'target'.
        node_types: shape (n,) strings; '' marks an unknown node type.
        class_count: number of fault classes; labels lie in [0, class_count).
        feature_names: column name per feature dimension.
        provenance: short description of where the rows came from.
    """

    features: np.ndarray
    labels: np.ndarray
    domains: np.ndarray
    node_types: np.ndarray
    class_count: int
    feature_names: tuple[str, ...]
    provenance: str = "memory"

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got ndim={feats.ndim}")
        n = feats.shape[0]
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        domains = np.asarray(self.domains)
        node_types = np.asarray(self.node_types)
        names = tuple(self.feature_names)
        if labels.shape != (n,) or domains.shape != (n,) or node_types.shape != (n,):
            raise ValueError("features, labels, domains and node_types must agree in length")
        if len(names) != feats.shape[1]:
            raise ValueError(
                f"{len(names)} feature names for {feats.shape[1]} feature columns"
            )
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        bad = ~np.isin(domains, DOMAINS)
        if np.any(bad):
            raise ValueError(f"unknown domain tag {domains[bad][0]!r}")
        labeled = labels != UNLABELED
        if np.any(labeled):
            if self.class_count < 2:
                raise ValueError("labeled datasets need class_count >= 2")
            if labels[labeled].min() < 0 or labels[labeled].max() >= self.class_count:
                raise ValueError(
                    f"labels must lie in [0, {self.class_count}) or be {UNLABELED}"
                )
        for arr in (feats, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "domains", domains)
        object.__setattr__(self, "node_types", node_types)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    def sample(self, i: int) -> Sample:
        label = int(self.labels[i])
        node_type = str(self.node_types[i])
        return Sample(
            features=self.features[i],
            label=None if label == UNLABELED else label,
            domain=str(self.domains[i]),
            node_type=node_type or None,
        )

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            domains=self.domains[idx],
            node_types=self.node_types[idx],
            class_count=self.class_count,
            feature_names=self.feature_names,
            provenance=self.provenance,
        )


def make_dataset(features, labels=None, domain="source", node_types=None,
                 class_count=None, feature_names=None, provenance="memory") -> Dataset:
    """Convenience constructor for a single-domain dataset."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    n, d = features.shape
    if labels is None:
        labels = np.full(n, UNLABELED, dtype=np.int64)
    else:
        labels = np.ascontiguousarray(labels, dtype=np.int64)
    if class_count is None:
        labeled = labels[labels != UNLABELED]
        class_count = int(labeled.max()) + 1 if labeled.size else 0
    if feature_names is None:
        feature_names = default_feature_names(d)
    if node_types is None:
        node_types = np.full(n, "", dtype="<U16")
    return Dataset(
        features=features,
        labels=labels,
        domains=np.full(n, domain),
        node_types=np.asarray(node_types),
        class_count=class_count,
        feature_names=tuple(feature_names),
        provenance=provenance,
    )


def default_feature_names(dim: int) -> tuple[str, ...]:
    """Telemetry indicator names for the standard width, generic ones otherwise."""
    if dim == len(DEFAULT_FEATURE_COLUMNS):
        return DEFAULT_FEATURE_COLUMNS
    return tuple(f"metric_{i}" for i in range(dim))


# ---------------------------------------------------------------------------
# CSV traces
# ---------------------------------------------------------------------------


def load_trace_csv(path, feature_columns=None, default_domain="target",
                   class_count=None) -> Dataset:
    """Load a telemetry trace CSV into a Dataset.

    The header names the columns. Feature columns default to every column not
    named timestamp, node_id, node_type, domain or label. The label, domain
    and node_type columns are optional; empty label cells mean unlabeled.

    Raises:
        TraceFormatError: empty file, unknown requested column, short row, or
            an unparseable cell; messages cite the 1-based data row and the
            column name.
    """
    path = str(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        col_index = {name: i for i, name in enumerate(header)}
        if feature_columns is None:
            feature_columns = [h for h in header if h not in _META_COLUMNS]
        else:
            feature_columns = list(feature_columns)
        if not feature_columns:
            raise TraceFormatError(f"{path}: no feature columns found in header")
        for name in feature_columns:
            if name not in col_index:
                raise TraceFormatError(f"{path}: feature column {name!r} not in header")

        feat_idx = [col_index[c] for c in feature_columns]
        label_idx = col_index.get("label")
        domain_idx = col_index.get("domain")
        type_idx = col_index.get("node_type")

        rows, labels, domains, node_types = [], [], [], []
        for rownum, cells in enumerate(reader, start=1):
            if len(cells) < len(header):
                raise TraceFormatError(
                    f"{path}: row {rownum} has {len(cells)} cells, expected {len(header)}"
                )
            values = np.empty(len(feat_idx))
            for k, (ci, cname) in enumerate(zip(feat_idx, feature_columns)):
                cell = cells[ci].strip()
                try:
                    values[k] = float(cell)
                except ValueError:
                    raise TraceFormatError(
                        f"{path}: row {rownum}, column {cname}: "
                        f"could not parse {cell!r} as a number"
                    ) from None
                if not math.isfinite(values[k]):
                    raise TraceFormatError(
                        f"{path}: row {rownum}, column {cname}: value is not finite"
                    )
            rows.append(values)
            if label_idx is not None:
                cell = cells[label_idx].strip()
                if cell == "":
                    labels.append(UNLABELED)
                else:
                    try:
                        labels.append(int(cell))
                    except ValueError:
                        raise TraceFormatError(
                            f"{path}: row {rownum}, column label: "
                            f"could not parse {cell!r} as an integer"
                        ) from None
                    if labels[-1] < 0:
                        raise TraceFormatError(
                            f"{path}: row {rownum}, column label: negative class {cell!r}"
                        )
            if domain_idx is not None:
                cell = cells[domain_idx].strip()
                if cell not in DOMAINS:
                    raise TraceFormatError(
                        f"{path}: row {rownum}, column domain: unknown domain {cell!r}"
                    )
                domains.append(cell)
            if type_idx is not None:
                node_types.append(cells[type_idx].strip())

    n = len(rows)
    if n == 0:
        raise TraceFormatError(f"{path}: no data rows")
    features = np.vstack(rows)
    label_arr = (
        np.asarray(labels, dtype=np.int64) if labels else np.full(n, UNLABELED, dtype=np.int64)
    )
    if class_count is None:
        labeled = label_arr[label_arr != UNLABELED]
        class_count = int(labeled.max()) + 1 if labeled.size else 0
    return Dataset(
        features=features,
        labels=label_arr,
        domains=np.asarray(domains) if domains else np.full(n, default_domain),
        node_types=np.asarray(node_types, dtype="<U16") if node_types else np.full(n, "", dtype="<U16"),
        class_count=class_count,
        feature_names=tuple(feature_columns),
        provenance=f"trace_csv:{path}",
    )


def write_trace_csv(ds: Dataset, path) -> None:
    """Write a dataset as a trace CSV that load_trace_csv reads back.

    Output bytes are fully determined by the dataset: floats use their
    shortest round-trip representation and timestamps follow a fixed cadence.
    """
    typed = bool(np.any(ds.node_types != ""))
    header = ["timestamp", "node_id"] + list(ds.feature_names)
    if typed:
        header.append("node_type")
    header.append("label")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(ds)):
            node_type = str(ds.node_types[i])
            if typed and node_type:
                node_id = f"{node_type}-{i % 16:02d}"
            else:
                node_id = f"node-{i % 64:03d}"
            row = [str(1_700_000_000 + 30 * i), node_id]
            row.extend(repr(float(v)) for v in ds.features[i])
            if typed:
                row.append(node_type)
            label = int(ds.labels[i])
            row.append("" if label == UNLABELED else str(label))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizationStats:
    """Per-domain feature means and deviations used for z-scoring.

    Deviations below 1e-9 are replaced by 1 so constant columns pass through
    unscaled instead of dividing by zero.
    """

    per_domain: dict

    def transform(self, features: np.ndarray, domain: str) -> np.ndarray:
        mean, std = self._stats_for(domain)
        return (features - mean) / std

    def invert(self, features: np.ndarray, domain: str) -> np.ndarray:
        mean, std = self._stats_for(domain)
        return features * std + mean

    def _stats_for(self, domain: str):
        if domain not in self.per_domain:
            raise KeyError(f"no normalization stats for domain {domain!r}")
        return self.per_domain[domain]


def compute_normalization(ds: Dataset, stats_domain: str | None = None) -> NormalizationStats:
    """Z-score statistics per domain present in the dataset.

    Args:
        stats_domain: when given, statistics are computed from that domain
            only and shared by every domain tag in the dataset (the
            source-stats-only switch).
    """
    per_domain = {}
    present = sorted(set(str(d) for d in ds.domains))
    if stats_domain is not None:
        if stats_domain not in present:
            raise ValueError(f"stats domain {stats_domain!r} has no rows in dataset")
        rows = ds.features[ds.domains == stats_domain]
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        std = np.where(std < 1e-9, 1.0, std)
        for dom in present:
            per_domain[dom] = (mean, std)
    else:
        for dom in present:
            rows = ds.features[ds.domains == dom]
            mean = rows.mean(axis=0)
            std = rows.std(axis=0)
            per_domain[dom] = (mean, np.where(std < 1e-9, 1.0, std))
    return NormalizationStats(per_domain)


def apply_normalization(ds: Dataset, stats: NormalizationStats) -> Dataset:
    """Transform every row with the stats of its own domain tag."""
    out = np.empty_like(ds.features)
    for dom in set(str(d) for d in ds.domains):
        mask = ds.domains == dom
        out[mask] = stats.transform(ds.features[mask], dom)
    return replace(ds, features=out)


def zscore_normalize(ds: Dataset, stats_domain: str | None = None):
    """Normalize a dataset and return (normalized dataset, stats used)."""
    stats = compute_normalization(ds, stats_domain=stats_domain)
    return apply_normalization(ds, stats), stats


# ---------------------------------------------------------------------------
# Label masking and splits
# ---------------------------------------------------------------------------


def _largest_remainder(ideals: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to total, closest to the ideal real counts."""
    base = np.floor(ideals).astype(np.int64)
    remainder = total - int(base.sum())
    if remainder > 0:
        fracs = ideals - base
        # Stable order: largest fractional part first, ties to the lowest index.
        order = np.lexsort((np.arange(len(ideals)), -fracs))
        base[order[:remainder]] += 1
    return base


def mask_labels(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Keep labels on a stratified fraction of the labeled rows.

    Exactly ceil(fraction * n) labeled rows keep their labels whenever that
    many can cover every class at least once; each class present always
    retains at least one label when fraction > 0. Which rows keep labels is
    decided by a seeded per-class shuffle.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    if fraction == 1.0:
        return ds
    labeled_idx = np.flatnonzero(ds.labeled_mask())
    n_labeled = labeled_idx.size
    new_labels = np.array(ds.labels)
    if fraction == 0.0:
        new_labels[labeled_idx] = UNLABELED
        return replace(ds, labels=new_labels)

    target_keep = math.ceil(fraction * n_labeled)
    classes = np.unique(ds.labels[labeled_idx])
    class_sizes = np.array([(ds.labels[labeled_idx] == c).sum() for c in classes])
    keeps = _largest_remainder(fraction * class_sizes, target_keep)
    # Every class keeps at least one label, stealing from the largest
    # allocations when the exact total cannot cover all classes.
    for i in np.flatnonzero(keeps == 0):
        donor = int(np.argmax(keeps))
        if keeps[donor] > 1:
            keeps[donor] -= 1
        keeps[i] = 1

    rng = np.random.default_rng(seed)
    for cls, keep in zip(classes, keeps):
        idx = labeled_idx[ds.labels[labeled_idx] == cls]
        order = rng.permutation(idx.size)
        drop = idx[order[int(keep):]]
        new_labels[drop] = UNLABELED
    return replace(ds, labels=new_labels)


def split_holdout(ds: Dataset, fraction: float, seed: int):
    """Seeded stratified split into (rest, holdout) by label.

    Unlabeled rows never enter the holdout. The holdout receives
    ceil(fraction * n_labeled) rows spread over classes by largest remainder.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"holdout fraction must lie in (0, 1), got {fraction}")
    labeled_idx = np.flatnonzero(ds.labeled_mask())
    if labeled_idx.size < 2:
        raise ValueError("need at least two labeled rows to split a holdout")
    total = math.ceil(fraction * labeled_idx.size)
    classes = np.unique(ds.labels[labeled_idx])
    class_sizes = np.array([(ds.labels[labeled_idx] == c).sum() for c in classes])
    takes = _largest_remainder(fraction * class_sizes, total)
    takes = np.minimum(takes, class_sizes)

    rng = np.random.default_rng(seed)
    holdout = []
    for cls, take in zip(classes, takes):
        idx = labeled_idx[ds.labels[labeled_idx] == cls]
        order = rng.permutation(idx.size)
        holdout.extend(idx[order[:int(take)]])
    holdout = np.sort(np.asarray(holdout, dtype=np.int64))
    rest = np.setdiff1d(np.arange(len(ds)), holdout)
    return ds.subset(rest), ds.subset(holdout)


# ---------------------------------------------------------------------------
# Synthetic scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to synthesize one source/target dataset pair.

    The target domain differs from the source by per-class mean translations
    of magnitude ``shift_magnitude`` along seeded per-class unit directions,
    a rotation of ``rotation_angle_deg`` in a seeded 2-plane and a noise
    rescale of ``noise_scale``. Because each class moves its own way, the
    shift survives per-domain z-scoring; a shared global translation would
    not. ``node_type_mix`` partitions target rows into typed blocks whose
    shift strengths are scaled by ``node_type_shift_scale``.
    """

    kind: str = "standard_shift"
    num_classes: int = 4
    feature_dim: int = 6
    source_samples: int = 2000
    target_samples: int = 2000
    class_separation: float = 3.0
    shift_magnitude: float = 4.0
    rotation_angle_deg: float = 35.0
    noise_scale: float = 1.0
    label_fraction: float = 0.1
    imbalance_ratio: float = 1.0
    imbalance_in_source: bool = False
    node_type_mix: tuple[tuple[str, float], ...] = ()
    node_type_shift_scale: tuple[tuple[str, float], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if min(self.source_samples, self.target_samples) < self.num_classes:
            raise ValueError("need at least one sample per class in each domain")
        if not 0.0 < self.label_fraction <= 1.0:
            raise ValueError(f"label_fraction must lie in (0, 1], got {self.label_fraction}")
        if self.imbalance_ratio < 1.0:
            raise ValueError(f"imbalance_ratio must be >= 1, got {self.imbalance_ratio}")
        if self.class_separation <= 0:
            raise ValueError("class_separation must be positive")
        if self.shift_magnitude < 0:
            raise ValueError("shift_magnitude must be nonnegative")
        if not 0.0 <= self.rotation_angle_deg <= 180.0:
            raise ValueError("rotation_angle_deg must lie in [0, 180]")
        if self.rotation_angle_deg > 0 and self.feature_dim < 2:
            raise ValueError("rotation needs at least two feature dimensions")
        if self.noise_scale <= 0:
            raise ValueError("noise_scale must be positive")
        if self.kind == "zero_shift" and (
            self.shift_magnitude != 0.0 or self.rotation_angle_deg != 0.0 or self.noise_scale != 1.0
        ):
            raise ValueError("zero_shift scenarios must not configure any shift")
        mix = tuple((str(t), float(w)) for t, w in self.node_type_mix)
        for t, w in mix:
            if t not in NODE_TYPES:
                raise ValueError(f"unknown node type {t!r}")
            if w <= 0:
                raise ValueError(f"node type weight for {t!r} must be positive")
        if len(set(t for t, _ in mix)) != len(mix):
            raise ValueError("node_type_mix repeats a type")
        scales = tuple((str(t), float(s)) for t, s in self.node_type_shift_scale)
        known = set(t for t, _ in mix)
        for t, s in scales:
            if t not in known:
                raise ValueError(f"shift scale for {t!r} without a mix entry")
            if s < 0:
                raise ValueError("node type shift scales must be nonnegative")
        if self.kind == "heterogeneous_nodes" and not mix:
            raise ValueError("heterogeneous_nodes scenarios need a node_type_mix")
        object.__setattr__(self, "node_type_mix", mix)
        object.__setattr__(self, "node_type_shift_scale", scales)

    def stable_hash(self) -> str:
        """Short digest of every field, for provenance strings."""
        text = ",".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:10]


def standard_scenario(kind: str = "standard_shift", seed: int = 0, **overrides) -> ScenarioSpec:
    """Scenario template with the defaults used by the experiment harness."""
    base: dict = {"kind": kind, "seed": seed}
    if kind == "zero_shift":
        base.update(shift_magnitude=0.0, rotation_angle_deg=0.0, noise_scale=1.0)
    elif kind == "heterogeneous_nodes":
        base.update(
            node_type_mix=tuple((t, 0.25) for t in NODE_TYPES),
            node_type_shift_scale=(
                ("cpu_intensive", 0.6),
                ("memory_intensive", 0.85),
                ("io_bound", 1.1),
                ("mixed", 1.35),
            ),
        )
    base.update(overrides)
    return ScenarioSpec(**base)


def _class_means(rng: np.random.Generator, num_classes: int, dim: int, separation: float):
    if num_classes <= dim:
        raw = rng.standard_normal((dim, num_classes))
        q, _ = np.linalg.qr(raw)
        return separation * q[:, :num_classes].T
    # More classes than dimensions: deterministic axis-aligned lattice.
    means = np.zeros((num_classes, dim))
    for c in range(num_classes):
        means[c, c % dim] = separation * (1 + c // dim)
    return means


def _rotation_matrix(dim: int, p: np.ndarray, q: np.ndarray, angle_rad: float) -> np.ndarray:
    eye = np.eye(dim)
    if angle_rad == 0.0:
        return eye
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return eye + (c - 1.0) * (np.outer(p, p) + np.outer(q, q)) + s * (np.outer(q, p) - np.outer(p, q))


def _class_priors(spec: ScenarioSpec, imbalanced: bool) -> np.ndarray:
    k = spec.num_classes
    if not imbalanced or spec.imbalance_ratio == 1.0:
        return np.full(k, 1.0 / k)
    weights = spec.imbalance_ratio ** (-np.arange(k) / (k - 1))
    return weights / weights.sum()


def _type_plan(spec: ScenarioSpec):
    """Node types with mix fractions and shift scales, in canonical order."""
    if not spec.node_type_mix:
        return [("", 1.0, 1.0)]
    scales = dict(spec.node_type_shift_scale)
    total = sum(w for _, w in spec.node_type_mix)
    ordered = sorted(spec.node_type_mix, key=lambda tw: NODE_TYPES.index(tw[0]))
    return [(t, w / total, scales.get(t, 1.0)) for t, w in ordered]


def generate_scenario(spec: ScenarioSpec):
    """Synthesize (source, target) datasets for a scenario.

    Deterministic given the spec: structure (class means, per-class shift
    directions, rotation plane), per-domain noise and label masking all come
    from independent child streams of the spec seed.

    Returns:
        (source, target) Datasets. The source is fully labeled; the target
        keeps labels on a stratified label_fraction of its rows.
    """
    ss = np.random.SeedSequence(spec.seed)
    r_struct, r_source, r_target, r_mask = (np.random.default_rng(c) for c in ss.spawn(4))
    k, d = spec.num_classes, spec.feature_dim

    means = _class_means(r_struct, k, d, spec.class_separation)
    directions = r_struct.standard_normal((k, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    if d >= 2:
        plane = r_struct.standard_normal((d, 2))
        q_basis, _ = np.linalg.qr(plane)
        p_vec, q_vec = q_basis[:, 0], q_basis[:, 1]
    else:
        p_vec = q_vec = np.zeros(d)

    angle = np.deg2rad(spec.rotation_angle_deg)
    rotation = _rotation_matrix(d, p_vec, q_vec, angle)
    # Aim the mean translation away from the rotation-induced mean
    # displacement so the raw-feature domain gap grows monotonically with the
    # shift magnitude. Flipping every class direction together preserves the
    # per-class geometry.
    mu_bar = means.mean(axis=0)
    delta0 = mu_bar - rotation @ mu_bar
    if delta0 @ (rotation @ directions.mean(axis=0)) > 0:
        directions = -directions

    provenance = f"synthetic:{spec.kind}:{spec.stable_hash()}"
    names = default_feature_names(d)

    # Source rows: per-class Gaussians with unit covariance.
    priors_s = _class_priors(spec, spec.imbalance_in_source)
    counts_s = _largest_remainder(priors_s * spec.source_samples, spec.source_samples)
    labels_s = np.repeat(np.arange(k), counts_s)
    feats_s = means[labels_s] + r_source.standard_normal((spec.source_samples, d))
    perm = r_source.permutation(spec.source_samples)
    source = Dataset(
        features=feats_s[perm],
        labels=labels_s[perm],
        domains=np.full(spec.source_samples, "source"),
        node_types=np.full(spec.source_samples, "", dtype="<U16"),
        class_count=k,
        feature_names=names,
        provenance=provenance,
    )

    # Target rows: shifted per-class Gaussians, optionally split by node type.
    priors_t = _class_priors(spec, True)
    counts_t = _largest_remainder(priors_t * spec.target_samples, spec.target_samples)
    plan = _type_plan(spec)
    blocks, labels_t, types_t = [], [], []
    for c in range(k):
        type_counts = _largest_remainder(
            np.array([frac for _, frac, _ in plan]) * counts_t[c], int(counts_t[c])
        )
        for (node_type, _, scale), n_ct in zip(plan, type_counts):
            if n_ct == 0:
                continue
            rot = _rotation_matrix(d, p_vec, q_vec, angle * scale)
            center = rot @ (means[c] + spec.shift_magnitude * scale * directions[c])
            noise = r_target.standard_normal((int(n_ct), d)) * spec.noise_scale
            blocks.append(center + noise)
            labels_t.extend([c] * int(n_ct))
            types_t.extend([node_type] * int(n_ct))
    feats_t = np.vstack(blocks)
    labels_t = np.asarray(labels_t, dtype=np.int64)
    types_t = np.asarray(types_t, dtype="<U16")
    perm = r_target.permutation(spec.target_samples)
    target = Dataset(
        features=feats_t[perm],
        labels=labels_t[perm],
        domains=np.full(spec.target_samples, "target"),
        node_types=types_t[perm],
        class_count=k,
        feature_names=names,
        provenance=provenance,
    )
    if spec.label_fraction < 1.0:
        target = mask_labels(target, spec.label_fraction, int(r_mask.integers(2**63 - 1)))
    return source, target
