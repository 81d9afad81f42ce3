"""Mixture background models fit by hard-assignment alternation.

Gaussian mixtures come from K-means++ seeding plus Lloyd iteration to an
assignment fixpoint, then a per-cluster CovModel and occupancy weights.
Subspace mixtures (K-subspaces) alternate per-cluster PCA with reassignment
to the component of minimum squared orthogonal residual; the total residual
objective is non-increasing across iterations by construction.

An empty cluster is re-seeded at the point currently farthest from its own
assigned center (largest residual for the subspace flavor), lowest cluster
index first; ties on distance take the lowest point index. Everything is
driven by numpy Generator(PCG64) streams, so a (data, seed) pair pins the
fitted model bit for bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cube_io import HyperCube, ScoreMap
from .detectors import DetectorKind, lc_scores, nmf_scores, nss_scores, signature_matrix
from .numerics import CovModel, SubspaceModel, _as_matrix, fit_cov


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray  # (K,), sums to 1
    components: tuple  # CovModel per cluster

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != len(self.components) or w.shape[0] < 1:
            raise ValueError("weights and components disagree")
        if abs(float(w.sum()) - 1.0) > 1e-12 or np.any(w < 0):
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0].p


@dataclass(frozen=True)
class SubspaceMixture:
    weights: np.ndarray
    components: tuple  # SubspaceModel per cluster, all sharing d
    objective_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != len(self.components) or w.shape[0] < 1:
            raise ValueError("weights and components disagree")
        if abs(float(w.sum()) - 1.0) > 1e-12 or np.any(w < 0):
            raise ValueError("weights must be nonnegative and sum to 1")
        dims = {c.d for c in self.components}
        if len(dims) != 1:
            raise ValueError(f"components must share one dimension, got {sorted(dims)}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "objective_history", tuple(float(v) for v in self.objective_history))

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d

    @property
    def p(self) -> int:
        return self.components[0].p


def _sq_dist_to_points(X, centers):
    # (M, K) squared euclidean distances
    xx = np.einsum("ij,ij->i", X, X)[:, None]
    cc = np.einsum("ij,ij->i", centers, centers)[None, :]
    return np.maximum(xx - 2.0 * (X @ centers.T) + cc, 0.0)


def _kmeanspp_seeds(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = _sq_dist_to_points(X, centers[:1])[:, 0]
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))  # all mass on existing centers, fall back to uniform
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = X[idx]
        d2 = np.minimum(d2, _sq_dist_to_points(X, centers[j : j + 1])[:, 0])
    return centers


def _steal_for_empty(labels, dists, k):
    """Move the farthest-from-home point into each empty cluster, in index order."""
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        home = dists[np.arange(labels.shape[0]), labels]
        far = int(np.argmax(home))
        counts[labels[far]] -= 1
        labels[far] = j
        counts[j] += 1
        dists[far, :] = np.inf
        dists[far, j] = 0.0  # the stolen point now sits at distance 0 from its cluster
    return labels


def _alternate(X, k, rng, max_iter, fit_clusters, dist_matrix):
    """Shared hard-assignment loop; returns (final labels, objective history)."""
    seeds = _kmeanspp_seeds(X, k, rng)
    d0 = _sq_dist_to_points(X, seeds)
    labels = _steal_for_empty(d0.argmin(axis=1), d0, k)
    history = []
    for _ in range(int(max_iter)):
        models = fit_clusters(labels)
        d = dist_matrix(models)
        new_labels = d.argmin(axis=1)
        history.append(float(d[np.arange(X.shape[0]), new_labels].sum()))
        new_labels = _steal_for_empty(new_labels, d, k)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, history


def fit_gaussian_mixture(spectra, k: int = 3, seed: int = 0, max_iter: int = 100,
                         delta_rule: float = 50.0) -> GaussianMixture:
    """K-means++ / Lloyd clustering, then a CovModel and weight per cluster."""
    X = _as_matrix(spectra)
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if X.shape[0] < 2 * k:
        raise ValueError(f"{X.shape[0]} spectra cannot support {k} covariance clusters")
    rng = np.random.default_rng(seed)

    def fit_clusters(labels):
        return np.stack([X[labels == j].mean(axis=0) for j in range(k)])

    def dist_matrix(centers):
        return _sq_dist_to_points(X, centers)

    labels, _ = _alternate(X, k, rng, max_iter, fit_clusters, dist_matrix)
    counts = np.bincount(labels, minlength=k)
    if counts.min() < 2:
        j = int(counts.argmin())
        raise ValueError(f"cluster {j} collapsed to {counts[j]} spectra; cannot fit its covariance")
    comps = tuple(fit_cov(X[labels == j], delta_rule=delta_rule) for j in range(k))
    return GaussianMixture(weights=counts / X.shape[0], components=comps)


def _cluster_pca(Xj, d):
    """Mean and top-d eigenbasis, tolerant of rank-deficient clusters.

    eigh always returns a full orthonormal set, so degenerate directions get
    arbitrary-but-deterministic completions; fine for residual distances.
    """
    mean = Xj.mean(axis=0)
    if d == 0:
        return mean, np.zeros((Xj.shape[1], 0))
    Xc = Xj - mean
    cov = (Xc.T @ Xc) / max(Xj.shape[0] - 1, 1)
    _, vec = np.linalg.eigh(cov)
    return mean, np.ascontiguousarray(vec[:, ::-1][:, :d])


def _residual_matrix(X, params):
    cols = []
    for mean, basis in params:
        Xc = X - mean
        r2 = np.einsum("ij,ij->i", Xc, Xc)
        if basis.shape[1] > 0:
            proj = Xc @ basis
            r2 = r2 - np.einsum("ij,ij->i", proj, proj)
        cols.append(np.maximum(r2, 0.0))
    return np.stack(cols, axis=1)


def fit_subspace_mixture(spectra, k: int = 3, d: int = 2, seed: int = 0,
                         max_iter: int = 100) -> SubspaceMixture:
    """K-subspaces: alternate per-cluster PCA(d) with min-residual reassignment."""
    X = _as_matrix(spectra)
    k, d = int(k), int(d)
    if k < 1:
        raise ValueError("k must be >= 1")
    if d < 0 or d > X.shape[1]:
        raise ValueError(f"d={d} out of range for p={X.shape[1]}")
    if X.shape[0] < k * (d + 2):
        raise ValueError(f"{X.shape[0]} spectra cannot support k={k}, d={d} (need >= {k * (d + 2)})")
    rng = np.random.default_rng(seed)

    def fit_clusters(labels):
        return [_cluster_pca(X[labels == j], d) for j in range(k)]

    labels, history = _alternate(X, k, rng, max_iter, fit_clusters,
                                 lambda params: _residual_matrix(X, params))
    counts = np.bincount(labels, minlength=k)
    if counts.min() < d + 1:
        j = int(counts.argmin())
        raise ValueError(f"cluster {j} holds {counts[j]} spectra; cannot span a {d}-dim subspace")
    comps = tuple(
        SubspaceModel(mean=mean, basis=basis)
        for mean, basis in (_cluster_pca(X[labels == j], d) for j in range(k))
    )
    return SubspaceMixture(weights=counts / X.shape[0], components=comps,
                           objective_history=tuple(history))


def assign_many(X, model) -> np.ndarray:
    """Component index per row: max posterior-style Gaussian score or min residual."""
    if isinstance(model, GaussianMixture):
        X, _ = _batch(X, model.p)
        scores = np.empty((X.shape[0], model.k))
        with np.errstate(divide="ignore"):
            for j, comp in enumerate(model.components):
                Xc = X - comp.mean
                quad = np.einsum("ij,ij->i", Xc @ comp.precision, Xc)
                logdet = float(np.sum(np.log(comp.eigenvalues + comp.delta)))
                scores[:, j] = np.log(model.weights[j]) - 0.5 * quad - 0.5 * logdet
        return scores.argmax(axis=1)
    if isinstance(model, SubspaceMixture):
        X, _ = _batch(X, model.p)
        resid = _residual_matrix(X, [(c.mean, c.basis) for c in model.components])
        return resid.argmin(axis=1)
    raise TypeError(f"not a mixture model: {type(model).__name__}")


def assign(x, model) -> int:
    return int(assign_many(np.asarray(x, dtype=np.float64)[None, :], model)[0])


def _batch(X, p):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != p:
        raise ValueError(f"spectra shape {X.shape} does not match p={p}")
    return X, single


def _check_compat(model, kind: DetectorKind):
    if kind is DetectorKind.NMF and not isinstance(model, GaussianMixture):
        raise ValueError("NMF needs a Gaussian mixture background")
    if kind in (DetectorKind.NSS, DetectorKind.LC) and not isinstance(model, SubspaceMixture):
        raise ValueError(f"{kind.value} needs a subspace mixture background")


def mix_scores(X, model, sigs, kind: DetectorKind, sign: int = 1) -> np.ndarray:
    """Assign each spectrum to its component, then score with that component."""
    _check_compat(model, kind)
    X, _ = _batch(X, model.p)
    S = signature_matrix(sigs)
    jhat = assign_many(X, model)
    out = np.empty(X.shape[0])
    for j in range(model.k):
        rows = jhat == j
        if not np.any(rows):
            continue
        comp = model.components[j]
        if kind is DetectorKind.NMF:
            out[rows] = nmf_scores(X[rows], comp, S)
        elif kind is DetectorKind.NSS:
            out[rows] = nss_scores(X[rows], comp, S)
        else:
            out[rows] = lc_scores(X[rows], comp, S, sign)
    return out


def mix_score(x, model, sigs, kind: DetectorKind, sign: int = 1) -> float:
    return float(mix_scores(np.asarray(x, dtype=np.float64)[None, :], model, sigs, kind, sign)[0])


@dataclass(frozen=True)
class ModelSpec:
    """How to fit and apply a background model: family, size, seed, detector.

    Bundles everything the enhancement stages need to refit "the same model
    on different pixels": mixture family and K/d, RNG seed, covariance delta
    percentile, detector kind, and the LC orientation sign.
    """

    model: str = "gaussian"  # "gaussian" | "subspace"
    detector: DetectorKind = DetectorKind.NMF
    k: int = 3
    d: int = 2
    seed: int = 0
    max_iter: int = 100
    delta_rule: float = 50.0
    sign: int = 1

    def __post_init__(self):
        if self.model not in ("gaussian", "subspace"):
            raise ValueError(f"unknown model family {self.model!r}")
        if self.detector is DetectorKind.NMF and self.model != "gaussian":
            raise ValueError("nmf runs against a gaussian mixture")
        if self.detector in (DetectorKind.NSS, DetectorKind.LC) and self.model != "subspace":
            raise ValueError(f"{self.detector.value} runs against a subspace mixture")
        if self.sign not in (1, -1):
            raise ValueError("sign flag must be +1 or -1")

    def fit(self, spectra):
        if self.model == "gaussian":
            return fit_gaussian_mixture(spectra, self.k, self.seed, self.max_iter, self.delta_rule)
        return fit_subspace_mixture(spectra, self.k, self.d, self.seed, self.max_iter)

    def scores(self, X, sigs, model, threads: int = 1) -> np.ndarray:
        return _chunked_scores(X, model, sigs, self.detector, self.sign, threads)

    def score_map(self, cube: HyperCube, sigs, model, threads: int = 1) -> ScoreMap:
        flat = self.scores(cube.spectra(), sigs, model, threads)
        return ScoreMap(values=flat.reshape(cube.m, cube.n))


_CHUNK = 8192  # fixed, so chunk boundaries never depend on the worker count


def _chunked_scores(X, model, sigs, kind, sign, threads):
    X, _ = _batch(X, model.p)
    out = np.empty(X.shape[0])
    spans = [(lo, min(lo + _CHUNK, X.shape[0])) for lo in range(0, X.shape[0], _CHUNK)]

    def run(span):
        lo, hi = span
        out[lo:hi] = mix_scores(X[lo:hi], model, sigs, kind, sign)

    if threads and int(threads) > 1 and len(spans) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            list(pool.map(run, spans))
    else:
        for span in spans:
            run(span)
    return out


def _cov_to_dict(c: CovModel) -> dict:
    return {
        "mean": c.mean.tolist(),
        "eigenvalues": c.eigenvalues.tolist(),
        "eigenvectors": c.eigenvectors.tolist(),
        "delta": c.delta,
    }


def _cov_from_dict(d: dict) -> CovModel:
    lam = np.asarray(d["eigenvalues"], dtype=np.float64)
    vec = np.asarray(d["eigenvectors"], dtype=np.float64)
    delta = float(d["delta"])
    inv = np.where(lam + delta > 0.0, 1.0 / np.where(lam + delta > 0.0, lam + delta, 1.0), 0.0)
    prec = (vec * inv) @ vec.T
    prec = (prec + prec.T) / 2.0
    return CovModel(mean=np.asarray(d["mean"], dtype=np.float64), eigenvalues=lam,
                    eigenvectors=vec, delta=delta, precision=prec)


def mixture_to_json(model) -> str:
    """Serialize a mixture; float repr round trips, so load is bit exact."""
    if isinstance(model, GaussianMixture):
        doc = {
            "family": "gaussian",
            "weights": model.weights.tolist(),
            "components": [_cov_to_dict(c) for c in model.components],
        }
    elif isinstance(model, SubspaceMixture):
        doc = {
            "family": "subspace",
            "weights": model.weights.tolist(),
            "components": [
                {"mean": c.mean.tolist(), "basis": c.basis.tolist()} for c in model.components
            ],
            "d": model.d,
        }
    else:
        raise TypeError(f"not a mixture model: {type(model).__name__}")
    return json.dumps(doc, sort_keys=True)


def mixture_from_json(text: str):
    doc = json.loads(text)
    family = doc.get("family")
    w = np.asarray(doc["weights"], dtype=np.float64)
    if family == "gaussian":
        return GaussianMixture(weights=w, components=tuple(_cov_from_dict(c) for c in doc["components"]))
    if family == "subspace":
        comps = []
        for c in doc["components"]:
            mean = np.asarray(c["mean"], dtype=np.float64)
            basis = np.asarray(c["basis"], dtype=np.float64)
            if basis.size == 0:
                basis = basis.reshape(mean.shape[0], 0)
            comps.append(SubspaceModel(mean=mean, basis=basis))
        comps = tuple(comps)
        return SubspaceMixture(weights=w, components=comps)
    raise ValueError(f"unknown mixture family {family!r}")
