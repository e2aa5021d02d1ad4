"""Village classification: standardization, Mahalanobis geometry, two-class
Fisher discriminant, average-linkage clustering and cluster validity."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._backend import kernels
from .errors import InputError, NumericalError

INDICATORS = ("SGI", "SREI", "WI", "AII")
ADMIN_CLASSES = ("ADV", "SCV")
RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class StressMatrix:
    """Villages x indicators table with each village's administrative label."""

    row_ids: tuple
    data: np.ndarray
    admin_labels: tuple = ()
    columns: tuple = INDICATORS

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, ndmin=2)
        row_ids = tuple(str(r) for r in self.row_ids)
        columns = tuple(self.columns)
        if data.shape != (len(row_ids), len(columns)):
            raise InputError(
                f"data shape {data.shape} does not match {len(row_ids)} rows x "
                f"{len(columns)} columns"
            )
        if len(row_ids) < 2:
            raise InputError("a stress matrix needs at least two villages")
        if len(set(row_ids)) != len(row_ids):
            raise InputError("duplicate village id in stress matrix")
        if not np.isfinite(data).all():
            raise InputError("stress matrix contains missing or non-finite values")
        admin = tuple(self.admin_labels)
        if admin and len(admin) != len(row_ids):
            raise InputError("admin_labels must have one entry per village")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "row_ids", row_ids)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "admin_labels", admin)

    @property
    def n(self) -> int:
        return len(self.row_ids)

    def column(self, name) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def with_data(self, data) -> "StressMatrix":
        return replace(self, data=np.asarray(data, dtype=np.float64))


def standardize(matrix: StressMatrix) -> StressMatrix:
    """Column z-scores using the sample (n - 1) standard deviation."""
    x = matrix.data
    mean = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    for name, s in zip(matrix.columns, sd):
        if not s > 0:
            raise InputError(f"zero variance: {name}")
    return matrix.with_data((x - mean) / sd)


def whiten(matrix: StressMatrix) -> np.ndarray:
    """Coordinates in which Euclidean distance equals Mahalanobis distance.

    The data are standardized, then multiplied by the inverse Cholesky factor
    of their sample covariance.  A ridge of ``1e-8 * trace / p`` is added when
    the factorization fails.
    """
    z = standardize(matrix).data
    cov = np.cov(z, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        ridge = RIDGE * np.trace(cov) / cov.shape[0]
        try:
            chol = np.linalg.cholesky(cov + ridge * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            raise NumericalError("covariance matrix is rank deficient") from None
    return np.linalg.solve(chol, z.T).T


def euclidean_matrix(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    diff = p[:, None, :] - p[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def mahalanobis_matrix(matrix: StressMatrix) -> np.ndarray:
    """Pairwise Mahalanobis distances under the sample covariance."""
    return euclidean_matrix(whiten(matrix))


# -- discriminant analysis -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscriminantModel:
    """Two-class linear discriminant.

    ``scores`` are ``data @ coefficients + offset``; negative scores predict
    ``negative_class`` and all others ``positive_class``.
    """

    columns: tuple
    coefficients: np.ndarray
    offset: float
    scores: np.ndarray
    labels: tuple
    row_ids: tuple = ()
    positive_class: str = "SCV"
    negative_class: str = "ADV"

    def predict_scores(self, data) -> np.ndarray:
        return np.asarray(data, dtype=np.float64) @ self.coefficients + self.offset

    def predict(self, scores=None) -> list:
        s = self.scores if scores is None else np.asarray(scores, dtype=np.float64)
        return [self.negative_class if v < 0 else self.positive_class for v in s]

    def rescaled(self, factor: float) -> "DiscriminantModel":
        return replace(self, coefficients=self.coefficients * factor,
                       offset=self.offset * factor, scores=self.scores * factor)


def lda_fit(matrix: StressMatrix, positive_class="SCV", negative_class="ADV") -> DiscriminantModel:
    """Fisher discriminant between the two administrative classes.

    The direction solves ``S_w w = mean_pos - mean_neg`` with the pooled
    within-class covariance; it is scaled to unit within-class variance and
    centred so the grand mean scores zero.
    """
    labels = np.asarray(matrix.admin_labels)
    if labels.size == 0:
        raise InputError("LDA needs administrative labels")
    unknown = set(labels.tolist()) - {positive_class, negative_class}
    if unknown:
        raise InputError(f"unexpected class labels: {sorted(unknown)}")
    x = matrix.data
    pos = x[labels == positive_class]
    neg = x[labels == negative_class]
    if len(pos) < 2 or len(neg) < 2:
        raise InputError("LDA needs both classes with at least two villages each")
    mu_pos = pos.mean(axis=0)
    mu_neg = neg.mean(axis=0)
    scatter = (pos - mu_pos).T @ (pos - mu_pos) + (neg - mu_neg).T @ (neg - mu_neg)
    pooled = scatter / (len(x) - 2)
    try:
        w = np.linalg.solve(pooled, mu_pos - mu_neg)
    except np.linalg.LinAlgError:
        raise NumericalError("pooled within-class covariance is singular") from None
    w = w / np.sqrt(w @ pooled @ w)
    offset = -float(x.mean(axis=0) @ w)
    scores = x @ w + offset
    return DiscriminantModel(matrix.columns, w, offset, scores, tuple(labels.tolist()),
                             matrix.row_ids, positive_class, negative_class)


@dataclass(frozen=True)
class ClassSummary:
    label: str
    count: int
    mean: float
    sd: float
    minimum: float
    maximum: float
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.count


@dataclass(frozen=True)
class LdaEvaluation:
    classes: tuple
    correct: int
    total: int
    predicted: tuple
    truth: tuple

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    def confusion(self) -> dict:
        """``{(true, predicted): count}`` over both classes."""
        out = {}
        names = [c.label for c in self.classes]
        for t in names:
            for p in names:
                out[(t, p)] = 0
        for t, p in zip(self.truth, self.predicted):
            out[(t, p)] += 1
        return out


def lda_classify(model: DiscriminantModel) -> LdaEvaluation:
    """Apply the sign rule to the model's scores and tally hits per class."""
    scores = np.asarray(model.scores, dtype=np.float64)
    truth = list(model.labels)
    predicted = model.predict()
    rows = []
    for label in (model.negative_class, model.positive_class):
        idx = [i for i, t in enumerate(truth) if t == label]
        s = scores[idx]
        hits = sum(1 for i in idx if predicted[i] == label)
        rows.append(ClassSummary(
            label, len(idx),
            float(s.mean()) if len(idx) else float("nan"),
            float(s.std(ddof=1)) if len(idx) > 1 else float("nan"),
            float(s.min()) if len(idx) else float("nan"),
            float(s.max()) if len(idx) else float("nan"),
            hits,
        ))
    correct = sum(r.correct for r in rows)
    return LdaEvaluation(tuple(rows), correct, len(truth), tuple(predicted), tuple(truth))


# -- hierarchical clustering ---------------------------------------------------

@dataclass(frozen=True)
class Merge:
    node_a: int
    node_b: int
    height: float
    new_id: int
    size: int


@dataclass(frozen=True)
class LinkageTree:
    n: int
    merges: tuple

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def to_scipy(self) -> np.ndarray:
        """Linkage matrix in the layout used by ``scipy.cluster.hierarchy``."""
        return np.array([[m.node_a, m.node_b, m.height, m.size] for m in self.merges],
                        dtype=np.float64)


def check_distance_matrix(dist) -> np.ndarray:
    d = np.asarray(dist, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InputError("distance matrix must be square")
    if not np.isfinite(d).all():
        raise InputError("distance matrix contains non-finite values")
    if (d < 0).any():
        raise InputError("distance matrix has negative entries")
    if (np.diag(d) != 0).any():
        raise InputError("distance matrix diagonal must be zero")
    if not np.array_equal(d, d.T):
        raise InputError("distance matrix must be symmetric")
    return d


def hclust_average(dist) -> LinkageTree:
    """UPGMA agglomeration; leaves are ``0..n-1`` and merge ``t`` creates ``n+t``."""
    d = check_distance_matrix(dist)
    n = d.shape[0]
    if n < 2:
        raise InputError("clustering needs at least two items")
    merges = kernels.upgma(np.ascontiguousarray(d))
    return LinkageTree(n, tuple(Merge(int(a), int(b), float(h), int(c), int(s))
                                for a, b, h, c, s in merges))


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    labels: tuple

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        if self.k < 1 or self.k > len(labels):
            raise InputError(f"k={self.k} outside [1, {len(labels)}]")
        if set(labels) != set(range(1, self.k + 1)):
            raise InputError("every cluster 1..k must be non-empty and labels within 1..k")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    def members(self, cluster: int) -> list:
        return [i for i, c in enumerate(self.labels) if c == cluster]

    @classmethod
    def from_labels(cls, labels) -> "ClusterAssignment":
        """Relabel arbitrary hashable labels 1..k by first appearance."""
        order = {}
        for v in labels:
            order.setdefault(v, len(order) + 1)
        return cls(len(order), tuple(order[v] for v in labels))


def cut_tree(tree: LinkageTree, k: int) -> ClusterAssignment:
    """Undo the last ``k - 1`` merges; clusters numbered by smallest member."""
    n = tree.n
    if not 1 <= k <= n:
        raise InputError(f"k={k} outside [1, {n}]")
    parent = list(range(2 * n - 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for m in tree.merges[: n - k]:
        parent[m.node_a] = m.new_id
        parent[m.node_b] = m.new_id
    roots = [find(i) for i in range(n)]
    return ClusterAssignment.from_labels(roots)


def silhouette(dist, assignment: ClusterAssignment):
    """Mean silhouette and per-point scores; singleton clusters score 0."""
    d = np.asarray(dist, dtype=np.float64)
    labels = np.asarray(assignment.labels)
    if assignment.k < 2:
        raise InputError("silhouette needs at least two clusters")
    if d.shape != (labels.size, labels.size):
        raise InputError("distance matrix does not match the assignment")
    clusters = range(1, assignment.k + 1)
    members = {c: np.flatnonzero(labels == c) for c in clusters}
    scores = np.zeros(labels.size)
    for i in range(labels.size):
        own = labels[i]
        if members[own].size == 1:
            continue
        a = d[i, members[own]].sum() / (members[own].size - 1)
        b = min(d[i, members[c]].sum() / members[c].size for c in clusters if c != own)
        top = max(a, b)
        scores[i] = 0.0 if top == 0.0 else (b - a) / top
    return float(np.mean(scores)), scores


def calinski_harabasz(points, assignment: ClusterAssignment) -> float:
    """Variance-ratio criterion of ``points`` (pass whitened coordinates)."""
    x = np.asarray(getattr(points, "data", points), dtype=np.float64)
    labels = np.asarray(assignment.labels)
    n, k = labels.size, assignment.k
    if x.shape[0] != n:
        raise InputError("points do not match the assignment")
    if k < 2:
        raise InputError("Calinski-Harabasz needs at least two clusters")
    if k >= n:
        raise InputError("Calinski-Harabasz needs k < n (zero within-cluster dispersion)")
    centre = x.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in range(1, k + 1):
        pts = x[labels == c]
        mu = pts.mean(axis=0)
        between += len(pts) * float((mu - centre) @ (mu - centre))
        within += float(((pts - mu) ** 2).sum())
    if within == 0.0:
        return float("inf")
    return (between / (k - 1)) / (within / (n - k))


@dataclass(frozen=True)
class ValidityRow:
    k: int
    silhouette: float
    calinski_harabasz: float


@dataclass(frozen=True)
class ValidityReport:
    rows: tuple

    def best_k(self, index="silhouette") -> int:
        """k maximizing ``index``; ties go to the smaller k."""
        best = None
        for row in self.rows:
            v = getattr(row, index)
            if best is None or v > best[0]:
                best = (v, row.k)
        return best[1]


@dataclass(frozen=True, eq=False)
class Clustering:
    coordinates: np.ndarray
    distances: np.ndarray
    tree: LinkageTree

    def cut(self, k: int) -> ClusterAssignment:
        return cut_tree(self.tree, k)


def cluster_villages(matrix: StressMatrix) -> Clustering:
    """Whiten, measure Mahalanobis distances and build the UPGMA tree."""
    coords = whiten(matrix)
    dist = euclidean_matrix(coords)
    return Clustering(coords, dist, hclust_average(dist))


def scan_k(matrix: StressMatrix, kmin: int = 2, kmax: int = 16,
           clustering: Clustering | None = None) -> ValidityReport:
    """Silhouette and Calinski-Harabasz for each cut of one dendrogram."""
    n = matrix.n
    if kmin < 2 or kmax < kmin:
        raise InputError(f"invalid k range {kmin}..{kmax}")
    if kmax >= n:
        raise InputError(f"k_range exceeds n-1 (kmax={kmax}, n={n})")
    if clustering is None:
        clustering = cluster_villages(matrix)
    rows = []
    for k in range(kmin, kmax + 1):
        a = clustering.cut(k)
        sil, _ = silhouette(clustering.distances, a)
        rows.append(ValidityRow(k, sil, calinski_harabasz(clustering.coordinates, a)))
    return ValidityReport(tuple(rows))


# -- comparing labelings ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CrossTab:
    row_labels: tuple
    col_labels: tuple
    counts: np.ndarray

    def count(self, row, col) -> int:
        return int(self.counts[self.row_labels.index(row), self.col_labels.index(col)])

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def cross_tab(admin_labels: Sequence, assignment) -> CrossTab:
    """Contingency counts of administrative class against cluster."""
    clusters = list(getattr(assignment, "labels", assignment))
    admin = list(admin_labels)
    if len(admin) != len(clusters):
        raise InputError(f"label length mismatch: {len(admin)} vs {len(clusters)}")
    rows = tuple(sorted(set(admin)))
    cols = tuple(sorted(set(clusters)))
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for a, c in zip(admin, clusters):
        counts[rows.index(a), cols.index(c)] += 1
    return CrossTab(rows, cols, counts)


def align_labels(reference: Sequence[int], labels: Sequence[int]) -> tuple:
    """Rename ``labels`` to best match ``reference`` by maximum overlap.

    Clusters without a partner keep fresh ids above the reference maximum.
    """
    ref = list(reference)
    lab = list(labels)
    if len(ref) != len(lab):
        raise InputError("label length mismatch")
    ref_ids = sorted(set(ref))
    lab_ids = sorted(set(lab))
    overlap = np.zeros((len(lab_ids), len(ref_ids)))
    for r, l in zip(ref, lab):
        overlap[lab_ids.index(l), ref_ids.index(r)] += 1
    rows, cols = linear_sum_assignment(-overlap)
    mapping = {lab_ids[r]: ref_ids[c] for r, c in zip(rows, cols)}
    spare = max(ref_ids) + 1
    for l in lab_ids:
        if l not in mapping:
            mapping[l] = spare
            spare += 1
    return tuple(mapping[l] for l in lab)


def adjusted_rand_index(a: Sequence, b: Sequence) -> float:
    """Hubert-Arabie adjusted Rand index of two labelings."""
    table = cross_tab(a, b).counts.astype(np.float64)
    n = table.sum()

    def pairs(v):
        return float((v * (v - 1) / 2.0).sum())

    index = pairs(table)
    rows = pairs(table.sum(axis=1))
    cols = pairs(table.sum(axis=0))
    expected = rows * cols / (n * (n - 1) / 2.0)
    top = 0.5 * (rows + cols)
    if top == expected:
        return 1.0
    return (index - expected) / (top - expected)
