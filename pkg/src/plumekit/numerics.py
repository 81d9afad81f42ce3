"""Shared numerical models: regularized covariance, PCA subspaces, PLS1, 1-D KDE.

The covariance model keeps an explicit eigensystem so the regularized inverse
is reproducible: precision = sum_k q_k q_k^T / (lambda_k + delta), with delta
chosen as a percentile of the eigenvalue spectrum (median by default). Rank
deficiency is tolerated; eigendirections with lambda + delta == 0 contribute
nothing to the precision (pseudo-inverse convention).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def _as_matrix(spectra) -> np.ndarray:
    X = np.asarray(spectra, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D (count, p) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite value in input spectra")
    return X


@dataclass(frozen=True)
class CovModel:
    """Mean plus eigendecomposed covariance with a delta-regularized inverse."""

    mean: np.ndarray  # (p,)
    eigenvalues: np.ndarray  # (p,) descending, >= 0
    eigenvectors: np.ndarray  # (p, p) columns aligned with eigenvalues
    delta: float
    precision: np.ndarray  # (p, p)

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def from_moments(cls, mean, cov, *, delta: float | None = None, delta_rule: float | None = None) -> "CovModel":
        """Build from explicit (mean, covariance).

        Exactly one of ``delta`` (explicit ridge) or ``delta_rule`` (percentile
        of the eigenvalues, 0..100) may be given; neither defaults to the
        median rule.
        """
        mean = np.asarray(mean, dtype=np.float64)
        cov = np.asarray(cov, dtype=np.float64)
        p = mean.shape[0]
        if cov.shape != (p, p):
            raise ValueError(f"covariance shape {cov.shape} does not match p={p}")
        if delta is not None and delta_rule is not None:
            raise ValueError("pass delta or delta_rule, not both")
        lam, vec = np.linalg.eigh(cov)
        lam = np.maximum(lam[::-1], 0.0)  # descending, clip eigh's tiny negatives
        # canonical layout before the matmul: rebuilding the precision from a
        # serialized copy of vec must hit the identical BLAS path
        vec = np.ascontiguousarray(vec[:, ::-1])
        if delta is None:
            rule = 50.0 if delta_rule is None else float(delta_rule)
            delta = float(np.percentile(lam, rule))
        inv = np.where(lam + delta > 0.0, 1.0 / np.where(lam + delta > 0.0, lam + delta, 1.0), 0.0)
        prec = (vec * inv) @ vec.T
        prec = (prec + prec.T) / 2.0
        return cls(
            mean=mean,
            eigenvalues=lam,
            eigenvectors=vec,
            delta=float(delta),
            precision=prec,
        )


def fit_cov(spectra, delta_rule: float = 50.0) -> CovModel:
    """Sample mean and covariance (1/(count-1)) with percentile-rule regularization.

    ``delta_rule`` is a percentile in [0, 100]; the ridge delta is that
    percentile of the covariance eigenvalues (50 = median). Requires at least
    two spectra.
    """
    X = _as_matrix(spectra)
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 spectra to fit a covariance, got {X.shape[0]}")
    if not 0.0 <= float(delta_rule) <= 100.0:
        raise ValueError(f"delta_rule must be a percentile in [0, 100], got {delta_rule}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (X.shape[0] - 1)
    return CovModel.from_moments(mean, cov, delta_rule=float(delta_rule))


@dataclass(frozen=True)
class SubspaceModel:
    """Affine subspace: mean point plus an orthonormal basis of the span."""

    mean: np.ndarray  # (p,)
    basis: np.ndarray  # (p, d), orthonormal columns; d may be 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        B = np.asarray(self.basis, dtype=np.float64)
        if B.ndim != 2 or B.shape[0] != mean.shape[0]:
            raise ValueError(f"basis shape {B.shape} does not match p={mean.shape[0]}")
        d = B.shape[1]
        if d > 0:
            gram = B.T @ B
            if not np.allclose(gram, np.eye(d), atol=1e-10):
                raise ValueError("basis columns are not orthonormal (use from_spanning)")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", B)

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_spanning(cls, mean, vectors) -> "SubspaceModel":
        """Orthonormalize arbitrary spanning vectors (columns) into a model."""
        mean = np.asarray(mean, dtype=np.float64)
        V = np.asarray(vectors, dtype=np.float64)
        if V.ndim == 1:
            V = V[:, None]
        if V.shape[1] == 0:
            return cls(mean=mean, basis=np.zeros((mean.shape[0], 0)))
        q, r = np.linalg.qr(V)
        keep = np.abs(np.diag(r)) > 1e-12 * max(np.abs(np.diag(r)).max(), 1e-300)
        if not np.all(keep):
            raise ValueError("spanning vectors are linearly dependent")
        return cls(mean=mean, basis=q)


def fit_pca(spectra, d: int) -> SubspaceModel:
    """Top-d principal subspace of the sample covariance.

    Errors if d exceeds what the data can support (d > min(p, count-1)) or if
    the input is degenerate (all points identical) while d >= 1.
    """
    X = _as_matrix(spectra)
    count, p = X.shape
    d = int(d)
    if d < 0:
        raise ValueError("d must be >= 0")
    if count < 1:
        raise ValueError("no spectra")
    if d > min(p, count - 1):
        raise ValueError(f"d={d} exceeds min(p, count-1)={min(p, count - 1)}")
    mean = X.mean(axis=0)
    if d == 0:
        return SubspaceModel(mean=mean, basis=np.zeros((p, 0)))
    Xc = X - mean
    cov = (Xc.T @ Xc) / max(count - 1, 1)
    lam, vec = np.linalg.eigh(cov)
    lam = lam[::-1]
    vec = vec[:, ::-1]
    scale = float(np.mean(X * X))
    if lam[0] <= 1e-28 * max(scale, np.finfo(np.float64).tiny):
        raise ValueError("degenerate input: all spectra identical, no principal direction")
    return SubspaceModel(mean=mean, basis=np.ascontiguousarray(vec[:, :d]))


def solve_ls(A, b) -> np.ndarray:
    """Least squares argmin ||A z - b||, minimum-norm solution if A is rank deficient."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"A must be 2-D, got shape {A.shape}")
    if A.shape[1] > A.shape[0]:
        raise ValueError(f"A is {A.shape}: more columns than rows")
    if b.shape != (A.shape[0],):
        raise ValueError(f"b shape {b.shape} does not match A rows {A.shape[0]}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite entries in least squares input")
    z, *_ = np.linalg.lstsq(A, b, rcond=None)
    return z


@dataclass(frozen=True)
class PlsrModel:
    """Affine predictor y ~ coef . x + intercept from PLS1 regression."""

    coef: np.ndarray  # (p,)
    intercept: float
    components: int


def fit_plsr(X, y, n_components: int) -> PlsrModel:
    """PLS1 by NIPALS deflation, folded back to raw-input (coef, intercept).

    Each component extracts the weight direction maximizing covariance with
    the current residual response, then deflates. A zero weight vector before
    ``n_components`` components means the predictors are rank exhausted; that
    raises with the failing component index. A numerically constant response
    short-circuits to coef=0, intercept=mean(y).
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    q, p = X.shape
    if y.shape != (q,):
        raise ValueError(f"y shape {y.shape} does not match {q} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite response value")
    l = int(n_components)
    if l < 1:
        raise ValueError("need at least one component")
    if q < l + 1:
        raise ValueError(f"{q} samples cannot support {l} components")
    xm = X.mean(axis=0)
    ym = float(y.mean())
    Xa = X - xm
    ya = y - ym
    yscale = float(np.linalg.norm(ya))
    if yscale <= 1e-12 * (1.0 + abs(ym)) * np.sqrt(q):
        return PlsrModel(coef=np.zeros(p), intercept=ym, components=l)
    wscale = float(np.linalg.norm(Xa)) * yscale
    W = np.empty((p, l))
    P = np.empty((p, l))
    qv = np.empty(l)
    for a in range(l):
        w = Xa.T @ ya
        wn = float(np.linalg.norm(w))
        if wn <= 1e-12 * max(wscale, np.finfo(np.float64).tiny):
            raise ValueError(
                f"predictors rank exhausted at component {a + 1} of {l}: zero weight vector"
            )
        w /= wn
        t = Xa @ w
        tt = float(t @ t)
        if tt <= 1e-30 * max(wscale, np.finfo(np.float64).tiny):
            raise ValueError(
                f"predictors rank exhausted at component {a + 1} of {l}: zero score vector"
            )
        pv = (Xa.T @ t) / tt
        qa = float(ya @ t) / tt
        Xa = Xa - np.outer(t, pv)
        ya = ya - qa * t
        W[:, a] = w
        P[:, a] = pv
        qv[a] = qa
    coef = W @ np.linalg.solve(P.T @ W, qv)
    return PlsrModel(coef=coef, intercept=ym - float(xm @ coef), components=l)


def predict_plsr(model: PlsrModel, x):
    """Evaluate coef . x + intercept; accepts a single spectrum or an (M, p) batch."""
    x = np.asarray(x, dtype=np.float64)
    out = x @ model.coef + model.intercept
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Kde1D:
    """Gaussian kernel density with a Silverman bandwidth, floored away from zero."""

    samples: np.ndarray  # (count,)
    bandwidth: float

    @property
    def count(self) -> int:
        return self.samples.shape[0]


def fit_kde(samples) -> Kde1D:
    """Bandwidth 1.06 * sigma * n^(-1/5) with floor 1e-6 * (1 + |sigma|)."""
    s = np.asarray(samples, dtype=np.float64).reshape(-1)
    n = s.shape[0]
    if n < 1:
        raise ValueError("KDE needs at least one sample")
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite KDE sample")
    sigma = float(np.std(s, ddof=1)) if n >= 2 else 0.0
    h = max(1.06 * sigma * n ** (-0.2), 1e-6 * (1.0 + abs(sigma)))
    return Kde1D(samples=np.ascontiguousarray(s), bandwidth=float(h))


def _kde_chunks(total_points, per_sample):
    # keep each (chunk, count) workspace near 2^22 float64 entries
    chunk = max(1, (1 << 22) // max(per_sample, 1))
    for start in range(0, total_points, chunk):
        yield start, min(start + chunk, total_points)


def eval_kde(model: Kde1D, t):
    """Density at t (scalar or array): mean of N(sample, h^2) kernels."""
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    tv = np.atleast_1d(t)
    out = np.empty(tv.shape[0])
    h = model.bandwidth
    norm = model.count * h * _SQRT_2PI
    for lo, hi in _kde_chunks(tv.shape[0], model.count):
        z = (tv[lo:hi, None] - model.samples[None, :]) / h
        out[lo:hi] = np.exp(-0.5 * z * z).sum(axis=1) / norm
    return float(out[0]) if scalar else out


def log_eval_kde(model: Kde1D, t):
    """log density at t, computed by logsumexp so distant tails stay finite-aware."""
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    tv = np.atleast_1d(t)
    out = np.empty(tv.shape[0])
    h = model.bandwidth
    log_norm = float(np.log(model.count * h * _SQRT_2PI))
    for lo, hi in _kde_chunks(tv.shape[0], model.count):
        z = (tv[lo:hi, None] - model.samples[None, :]) / h
        out[lo:hi] = logsumexp(-0.5 * z * z, axis=1) - log_norm
    return float(out[0]) if scalar else out


def sample_kde(model: Kde1D, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from the kernel mixture: pick a sample uniformly, add N(0, h^2)."""
    idx = rng.integers(0, model.count, size=count)
    return model.samples[idx] + model.bandwidth * rng.standard_normal(count)
