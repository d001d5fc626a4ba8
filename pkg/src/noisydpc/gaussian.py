"""Jointly Gaussian scalars: covariance construction, log-determinants,
entropies/mutual informations, and reproducible sampling.

Logs are natural internally; mutual informations are returned in bits.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channel import ChannelConfig
from .errors import DisjointnessViolation, SingularMatrix

LN2 = math.log(2.0)
PD_RTOL = 1e-12
PSD_RTOL = 1e-10
SAMPLE_CHUNK = 1 << 16


@dataclass(frozen=True)
class JointGaussianSpec:
    """Zero-mean Gaussian vector with labelled coordinates."""

    names: tuple[str, ...]
    cov: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        cov = np.array(self.cov, dtype=float)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate labels in {names}")
        if cov.shape != (len(names), len(names)):
            raise ValueError(f"covariance shape {cov.shape} does not match {len(names)} labels")
        if not np.array_equal(cov, cov.T):
            raise ValueError("covariance must be exactly symmetric")
        cov.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, labels: str | Iterable[str]) -> list[int]:
        lookup = {n: i for i, n in enumerate(self.names)}
        try:
            return [lookup[l] for l in as_labels(labels)]
        except KeyError as exc:
            raise KeyError(f"unknown label {exc.args[0]!r}; have {self.names}") from None

    def marginal(self, labels) -> np.ndarray:
        idx = self.index(labels)
        return self.cov[np.ix_(idx, idx)]


@dataclass(frozen=True)
class SampleBatch:
    names: tuple[str, ...]
    data: np.ndarray
    seed: int

    def __len__(self):
        return self.data.shape[0]

    def select(self, labels) -> np.ndarray:
        lookup = {n: i for i, n in enumerate(self.names)}
        return self.data[:, [lookup[l] for l in as_labels(labels)]]


def as_labels(labels) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


def symmetrize(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def build_joint_spec(cfg: ChannelConfig, alpha: float | None = None) -> JointGaussianSpec:
    """Joint law of (X, S, Y, M1..Mk[, U]) for a channel configuration.

    Every coordinate is a linear image of the independent sources
    (X, S, Z0, Z1..Zk), so the covariance is assembled as ``A D A^T``.
    Observations are labelled ``M1..Mk`` with the transmitter's first.

    When ``alpha`` is given, ``U = X + alpha * M_tx`` is appended, where
    ``M_tx`` is the transmitter's observation (the inverse-variance fusion of
    its observations when it holds several).
    """
    noises = cfg.noises
    k = len(noises)
    n_src = 3 + k
    variances = np.array([cfg.p, cfg.q, cfg.n0, *noises])

    rows = []
    names = ["X", "S", "Y"]
    rows.append(np.eye(n_src)[0])
    rows.append(np.eye(n_src)[1])
    y = np.zeros(n_src)
    y[[0, 1, 2]] = 1.0
    rows.append(y)
    for l in range(k):
        m = np.zeros(n_src)
        m[1] = 1.0
        m[3 + l] = 1.0
        rows.append(m)
    names += [f"M{l + 1}" for l in range(k)]

    if alpha is not None:
        if not cfg.tx_noise:
            raise ValueError("U = X + alpha*M_tx needs at least one transmitter observation")
        weights = _inverse_variance_weights(cfg.tx_noise)
        u = np.eye(n_src)[0].copy()
        for l, w in enumerate(weights):
            u += float(alpha) * w * rows[3 + l]
        rows.append(u)
        names.append("U")

    a = np.array(rows)
    cov = symmetrize((a * variances) @ a.T)
    return JointGaussianSpec(tuple(names), cov)


def _inverse_variance_weights(noises: Sequence[float]) -> list[float]:
    zeros = [i for i, v in enumerate(noises) if v == 0]
    if zeros:
        return [1.0 if i == zeros[0] else 0.0 for i in range(len(noises))]
    inv = [1.0 / v for v in noises]
    total = math.fsum(inv)
    return [w / total for w in inv]


def cholesky(m, rtol: float = PD_RTOL) -> np.ndarray:
    """Lower Cholesky factor with an explicit scale-invariant pivot test.

    Raises SingularMatrix naming the first pivot at or below
    ``rtol * max(diag(m))``.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return a
    tol = rtol * max(float(np.max(np.diag(a))), 0.0)
    l = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - l[j, :j] @ l[j, :j]
        if not pivot > tol:
            raise SingularMatrix(j, pivot)
        l[j, j] = math.sqrt(pivot)
        l[j + 1:, j] = (a[j + 1:, j] - l[j + 1:, :j] @ l[j, :j]) / l[j, j]
    return l


def log_det(m) -> float:
    """Natural log-determinant of a positive definite matrix."""
    l = cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(l))))


def gaussian_entropy(cov) -> float:
    """Differential entropy in nats of N(0, cov)."""
    cov = np.atleast_2d(cov)
    d = cov.shape[0]
    return 0.5 * (d * math.log(2 * math.pi * math.e) + log_det(cov))


def mi_from_cov(cov: np.ndarray, ia: Sequence[int], ib: Sequence[int]) -> float:
    iab = list(ia) + list(ib)
    ld_a = log_det(cov[np.ix_(ia, ia)])
    ld_b = log_det(cov[np.ix_(ib, ib)])
    ld_ab = log_det(cov[np.ix_(iab, iab)])
    return 0.5 * (ld_a + ld_b - ld_ab) / LN2


def gaussian_mi(spec: JointGaussianSpec, a, b) -> float:
    """I(A;B) in bits from the determinants of the marginal covariances."""
    a, b = as_labels(a), as_labels(b)
    if not a or not b:
        raise ValueError("label sets must be non-empty")
    overlap = set(a) & set(b)
    if overlap:
        raise DisjointnessViolation(f"label sets overlap on {sorted(overlap)}")
    return mi_from_cov(spec.cov, spec.index(a), spec.index(b))


def gaussian_conditional_mi(spec: JointGaussianSpec, a, b, given=()) -> float:
    """I(A;B|C) = I(A;B,C) - I(A;C), in bits."""
    a, b, c = as_labels(a), as_labels(b), as_labels(given)
    for x, y in ((a, b), (a, c), (b, c)):
        overlap = set(x) & set(y)
        if overlap:
            raise DisjointnessViolation(f"label sets overlap on {sorted(overlap)}")
    if not c:
        return gaussian_mi(spec, a, b)
    return gaussian_mi(spec, a, b + c) - gaussian_mi(spec, a, c)


def pivoted_cholesky(m, rtol: float = PSD_RTOL) -> np.ndarray:
    """Factor a PSD matrix as ``L @ L.T`` with symmetric (diagonal) pivoting.

    Returns an ``n x r`` factor, ``r`` the numerical rank. Rows stay in the
    original coordinate order, so degenerate coordinates (e.g. two exact
    copies of S) come out as exact linear combinations of the others.
    """
    a = np.array(m, dtype=float)
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    scale = max(float(np.max(np.diag(a))), 0.0)
    tol = rtol * scale
    d = np.diag(a).copy()
    if np.any(d < -tol):
        raise SingularMatrix(int(np.argmin(d)), float(np.min(d)), "matrix is not positive semidefinite")
    cols = []
    used = np.zeros(n, dtype=bool)
    for _ in range(n):
        cand = np.where(used, -np.inf, d)
        j = int(np.argmax(cand))
        if not cand[j] > tol:
            break
        col = a[:, j].copy()
        for c in cols:
            col -= c * c[j]
        col /= math.sqrt(d[j])
        col[used] = 0.0
        col[j] = math.sqrt(d[j])
        used[j] = True
        cols.append(col)
        d = d - col**2
        d[used] = 0.0
    if np.any(d < -tol * 1e2):
        raise SingularMatrix(int(np.argmin(d)), float(np.min(d)), "matrix is not positive semidefinite")
    if not cols:
        return np.zeros((n, 0))
    return np.column_stack(cols)


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def sample(spec: JointGaussianSpec, count: int, seed: int, workers: int = 1) -> SampleBatch:
    """Draw ``count`` rows from N(0, spec.cov).

    Rows are generated in fixed-size chunks, each with its own sub-seed, so
    the output is bit-identical for any ``workers``.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    factor = pivoted_cholesky(spec.cov)
    r = factor.shape[1]
    data = np.zeros((count, spec.dim))
    starts = list(range(0, count, SAMPLE_CHUNK))

    def fill(i):
        lo = starts[i]
        hi = min(lo + SAMPLE_CHUNK, count)
        z = _chunk_rng(seed, i).standard_normal((hi - lo, r))
        data[lo:hi] = z @ factor.T

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(len(starts))))
    else:
        for i in range(len(starts)):
            fill(i)
    return SampleBatch(spec.names, data, seed)
