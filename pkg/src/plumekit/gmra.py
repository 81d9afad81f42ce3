"""Multiscale geometric background model and density-based anomaly detection.

A binary tree of nested pixel clusters is grown by seeded 2-means splits.
Every node keeps its member indices, center, and a local PCA basis sized by
an explained-variance rule; a child also keeps wavelet pieces (the part of
the parent-to-child center shift and of the parent plane that its own plane
misses). Cutting the tree at depth j, with shallow leaves standing in for
their missing subtrees, partitions the training set at every scale.

The density model fits, per node and scale, one 1-D Gaussian KDE per scaling
coordinate plus one on residual norms, weights nodes by occupancy, and picks
the working scale j* by held-out mean log-likelihood (ties to the coarser
scale). Pixel scores are floored log-likelihoods at j*; anomalies are scores
under a cutoff, either an explicit one, a training-score quantile, or a
Monte Carlo ball-probability rule.

Node dimensions: the adaptive explained-variance dimension is clamped below
by the parent's dimension and above by d_max, p, and |members| - 1. The lower
clamp is what makes mean reconstruction error non-increasing scale to scale
(a child plane at least as expressive as its parent's is a feasible PCA
candidate); the |members| - 1 cap keeps tiny nodes exact.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .cube_io import HyperCube, PlumeMask, ScoreMap
from .mixture import _kmeanspp_seeds, _sq_dist_to_points, _steal_for_empty
from .numerics import Kde1D, fit_kde, log_eval_kde, sample_kde

_GMRA_HDR = ".gmra.json"
_GMRA_RAW = ".gmra.bin"

DEFAULT_FLOOR = -1.0e6


@dataclass
class GmraNode:
    node_id: int
    scale: int
    index: int  # position within its scale, in construction order
    parent: int | None
    children: tuple
    members: np.ndarray  # training-row indices
    center: np.ndarray  # (p,)
    basis: np.ndarray  # (p, d)
    wavelet_shift: np.ndarray  # (p,), zero at the root
    wavelet_basis: np.ndarray  # (p, d_psi), empty at the root

    @property
    def d(self) -> int:
        return self.basis.shape[1]


@dataclass
class GmraTree:
    nodes: list
    n_points: int
    p: int
    max_scale: int

    @property
    def root(self) -> GmraNode:
        return self.nodes[0]


def _two_means_labels(X, rng):
    """Seeded 2-means; returns 0/1 labels after Lloyd to a fixpoint."""
    centers = _kmeanspp_seeds(X, 2, rng)
    labels = None
    for _ in range(100):
        d = _sq_dist_to_points(X, centers)
        new_labels = _steal_for_empty(d.argmin(axis=1), d, 2)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = np.stack([X[labels == 0].mean(axis=0), X[labels == 1].mean(axis=0)])
    return labels


def _node_geometry(Xm, parent_dim, dim_rule, d_max):
    count, p = Xm.shape
    center = Xm.mean(axis=0)
    if count == 1:
        return center, np.zeros((p, 0))
    Xc = Xm - center
    cov = (Xc.T @ Xc) / (count - 1)
    lam, vec = np.linalg.eigh(cov)
    lam = np.maximum(lam[::-1], 0.0)
    vec = vec[:, ::-1]
    total = float(lam.sum())
    scale = float(np.mean(Xm * Xm))
    if total <= 1e-28 * max(scale, np.finfo(np.float64).tiny):
        return center, np.zeros((p, 0))  # all members identical
    cum = np.cumsum(lam)
    d_adapt = int(np.searchsorted(cum, dim_rule * total * (1.0 - 1e-12)) + 1)
    d = min(max(d_adapt, parent_dim), d_max, count - 1, p)
    return center, np.ascontiguousarray(vec[:, :d])


def build_gmra(spectra, min_leaf: int = 40, dim_rule: float = 0.95, d_max: int = 10,
               seed: int = 0) -> GmraTree:
    """Grow the multiscale tree on (count, p) training spectra.

    Splitting stops once membership drops under 2 * min_leaf or a 2-means
    split would empty a side. Each split's 2-means is seeded from (seed,
    node_id), so the tree is a pure function of (data, parameters). For local
    PCA to have room, min_leaf should comfortably exceed d_max + 1; that is
    not enforced because dimensions are capped at |members| - 1 anyway.
    """
    X = np.asarray(spectra, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected (count, p) spectra, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite value in training spectra")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if not 0.0 < dim_rule <= 1.0:
        raise ValueError(f"dim_rule must be in (0, 1], got {dim_rule}")
    if d_max < 0:
        raise ValueError("d_max must be >= 0")
    if X.shape[0] < min_leaf:
        raise ValueError(f"{X.shape[0]} points cannot populate a tree with min_leaf={min_leaf}")

    nodes: list = []
    per_scale_counter: dict = {}

    def grow(members, scale, parent_id, parent_dim, parent_center, parent_basis):
        node_id = len(nodes)
        Xm = X[members]
        center, basis = _node_geometry(Xm, parent_dim, dim_rule, d_max)
        if parent_id is None:
            shift = np.zeros(X.shape[1])
            psi = np.zeros((X.shape[1], 0))
        else:
            delta = center - parent_center
            shift = delta - basis @ (basis.T @ delta)
            leftover = parent_basis - basis @ (basis.T @ parent_basis)
            if leftover.shape[1] > 0:
                q, r = np.linalg.qr(leftover)
                keep = np.abs(np.diag(r)) > 1e-10
                psi = np.ascontiguousarray(q[:, keep])
            else:
                psi = np.zeros((X.shape[1], 0))
        index = per_scale_counter.get(scale, 0)
        per_scale_counter[scale] = index + 1
        node = GmraNode(
            node_id=node_id, scale=scale, index=index, parent=parent_id, children=(),
            members=np.ascontiguousarray(members), center=center, basis=basis,
            wavelet_shift=shift, wavelet_basis=psi,
        )
        nodes.append(node)
        if members.shape[0] >= 2 * min_leaf:
            labels = _two_means_labels(Xm, np.random.default_rng((seed, node_id)))
            left = members[labels == 0]
            right = members[labels == 1]
            if left.shape[0] > 0 and right.shape[0] > 0:
                kids = (
                    grow(left, scale + 1, node_id, basis.shape[1], center, basis),
                    grow(right, scale + 1, node_id, basis.shape[1], center, basis),
                )
                node.children = kids
        return node_id

    grow(np.arange(X.shape[0]), 0, None, 0, None, None)
    return GmraTree(nodes=nodes, n_points=X.shape[0], p=X.shape[1],
                    max_scale=max(n.scale for n in nodes))


def partition_at(tree: GmraTree, j: int) -> list:
    """Node ids of the depth-j cut; leaves shallower than j stand in for subtrees."""
    if not 0 <= j <= tree.max_scale:
        raise ValueError(f"scale {j} out of range 0..{tree.max_scale}")
    out = []
    stack = [0]
    while stack:
        nid = stack.pop()
        node = tree.nodes[nid]
        if node.scale == j or not node.children:
            out.append(nid)
        else:
            stack.extend(reversed(node.children))
    return out


def _route_batch(tree: GmraTree, Xq, j: int) -> np.ndarray:
    cur = np.zeros(Xq.shape[0], dtype=np.intp)
    for depth in range(j):
        moved = False
        for nid in np.unique(cur):
            node = tree.nodes[nid]
            if node.scale != depth or not node.children:
                continue
            rows = np.flatnonzero(cur == nid)
            kids = np.asarray(node.children, dtype=np.intp)
            centers = np.stack([tree.nodes[k].center for k in node.children])
            cur[rows] = kids[_sq_dist_to_points(Xq[rows], centers).argmin(axis=1)]
            moved = True
        if not moved:
            break
    return cur


def gmra_transform(x, tree: GmraTree, j: int):
    """Route x to its scale-j node; returns (node_id, scaling coeffs, residual norm)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.p,):
        raise ValueError(f"spectrum shape {x.shape} does not match p={tree.p}")
    if not 0 <= j <= tree.max_scale:
        raise ValueError(f"scale {j} out of range 0..{tree.max_scale}")
    nid = int(_route_batch(tree, x[None, :], j)[0])
    node = tree.nodes[nid]
    xc = x - node.center
    coeffs = node.basis.T @ xc
    resid = float(np.linalg.norm(xc - node.basis @ coeffs))
    return nid, coeffs, resid


@dataclass(frozen=True)
class NodeDensity:
    weight: float
    coeff_kdes: tuple  # one Kde1D per scaling coordinate
    resid_kde: Kde1D


@dataclass
class GmraDensityModel:
    tree: GmraTree
    scale_densities: dict  # j -> {node_id -> NodeDensity}, candidate scales only
    jstar: int
    train_scores: np.ndarray  # floored log-likelihoods of the fit subset at j*
    floor: float = DEFAULT_FLOOR


def _loglik_batch(tree, densities, j, Xq, floor):
    ids = _route_batch(tree, Xq, j)
    out = np.empty(Xq.shape[0])
    for nid in np.unique(ids):
        nd = densities[int(nid)]
        node = tree.nodes[int(nid)]
        rows = np.flatnonzero(ids == nid)
        Xc = Xq[rows] - node.center
        ll = np.full(rows.shape[0], np.log(nd.weight))
        if node.d > 0:
            C = Xc @ node.basis
            for i, kde in enumerate(nd.coeff_kdes):
                ll += log_eval_kde(kde, C[:, i])
            resid = np.linalg.norm(Xc - C @ node.basis.T, axis=1)
        else:
            resid = np.linalg.norm(Xc, axis=1)
        ll += log_eval_kde(nd.resid_kde, resid)
        out[rows] = ll
    return np.maximum(out, floor)


def fit_density(tree: GmraTree, spectra, validation=None, seed: int = 0,
                floor: float = DEFAULT_FLOOR) -> GmraDensityModel:
    """Per-node KDE densities at every usable scale, working scale by held-out fit.

    ``spectra`` must be the array the tree was built on. Without an explicit
    validation set, a seeded 10% split is held out of the density fit and
    used only for scale selection. A scale where some node holds fewer than
    two fit points is skipped. Ties on mean validation log-likelihood go to
    the coarser scale.
    """
    X = np.asarray(spectra, dtype=np.float64)
    if X.shape != (tree.n_points, tree.p):
        raise ValueError(
            f"spectra shape {X.shape} does not match the tree's ({tree.n_points}, {tree.p})"
        )
    fit_mask = np.ones(tree.n_points, dtype=bool)
    if validation is None:
        rng = np.random.default_rng(seed)
        n_val = max(1, tree.n_points // 10)
        fit_mask[rng.permutation(tree.n_points)[:n_val]] = False
        Xval = X[~fit_mask]
    else:
        Xval = np.asarray(validation, dtype=np.float64)
        if Xval.ndim != 2 or Xval.shape[1] != tree.p:
            raise ValueError(f"validation shape {Xval.shape} does not match p={tree.p}")
        if Xval.shape[0] < 1:
            raise ValueError("empty validation set")
        if not np.all(np.isfinite(Xval)):
            raise ValueError("non-finite validation value")
    n_fit = int(fit_mask.sum())

    scale_densities = {}
    for j in range(tree.max_scale + 1):
        per = {}
        for nid in partition_at(tree, j):
            node = tree.nodes[nid]
            rows = node.members[fit_mask[node.members]]
            if rows.shape[0] < 2:
                per = None  # scale unusable for selection
                break
            Xc = X[rows] - node.center
            if node.d > 0:
                C = Xc @ node.basis
                kdes = tuple(fit_kde(C[:, i]) for i in range(node.d))
                resid = np.linalg.norm(Xc - C @ node.basis.T, axis=1)
            else:
                kdes = ()
                resid = np.linalg.norm(Xc, axis=1)
            per[nid] = NodeDensity(weight=rows.shape[0] / n_fit, coeff_kdes=kdes,
                                   resid_kde=fit_kde(resid))
        if per is not None:
            scale_densities[j] = per
    if not scale_densities:
        raise ValueError("no scale has two fit points in every node; more data needed")

    best_j, best_ll = None, None
    for j in sorted(scale_densities):
        mean_ll = float(_loglik_batch(tree, scale_densities[j], j, Xval, floor).mean())
        if best_ll is None or mean_ll > best_ll:  # strict: ties keep the coarser scale
            best_j, best_ll = j, mean_ll
    train_scores = _loglik_batch(tree, scale_densities[best_j], best_j, X[fit_mask], floor)
    return GmraDensityModel(tree=tree, scale_densities=scale_densities, jstar=best_j,
                            train_scores=train_scores, floor=floor)


def log_likelihood(x, model: GmraDensityModel):
    """Floored log-likelihood at the working scale; accepts one spectrum or a batch."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.tree.p:
        raise ValueError(f"spectra shape {X.shape} does not match p={model.tree.p}")
    out = _loglik_batch(model.tree, model.scale_densities[model.jstar], model.jstar, X,
                        model.floor)
    return float(out[0]) if single else out


def ball_probability(x, radius: float, model: GmraDensityModel, mc_samples: int = 1000,
                     seed=0) -> float:
    """Monte Carlo mass of the radius-ball around x under the working-scale mixture.

    Draws nodes by weight, coefficients and a residual magnitude from the
    fitted KDEs (kernel-mixture sampling), and a residual direction uniformly
    in the orthogonal complement. Fixed (seed, model) means the estimate is
    reproducible and non-decreasing in the radius.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.tree.p,):
        raise ValueError(f"spectrum shape {x.shape} does not match p={model.tree.p}")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    rng = np.random.default_rng(seed)
    densities = model.scale_densities[model.jstar]
    nids = sorted(densities)
    weights = np.array([densities[nid].weight for nid in nids])
    counts = rng.multinomial(mc_samples, weights / weights.sum())
    p = model.tree.p
    hits = 0
    for nid, cnt in zip(nids, counts):
        if cnt == 0:
            continue
        node = model.tree.nodes[nid]
        nd = densities[nid]
        pts = np.broadcast_to(node.center, (cnt, p)).copy()
        if node.d > 0:
            coeffs = np.stack([sample_kde(k, cnt, rng) for k in nd.coeff_kdes], axis=1)
            pts += coeffs @ node.basis.T
        rho = np.abs(sample_kde(nd.resid_kde, cnt, rng))
        if node.d < p:
            z = rng.standard_normal((cnt, p))
            if node.d > 0:
                z -= (z @ node.basis) @ node.basis.T
            zn = np.linalg.norm(z, axis=1)
            zn = np.where(zn > 0.0, zn, 1.0)
            pts += (rho / zn)[:, None] * z
        dist = np.linalg.norm(pts - x, axis=1)
        hits += int(np.count_nonzero(dist <= radius))
    return hits / mc_samples


@dataclass(frozen=True)
class AnomalyConfig:
    """Anomaly rule: a log-likelihood cutoff (explicit or a training-score
    quantile eta), or the ball rule (radius + Monte Carlo samples) with a
    probability threshold defaulting to 1/mc_samples. Exactly one rule."""

    eta: float | None = None
    loglik_cutoff: float | None = None
    radius: float | None = None
    mc_samples: int = 1000
    prob_threshold: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.radius is not None:
            if self.eta is not None or self.loglik_cutoff is not None:
                raise ValueError("the ball rule and the log-likelihood rule are exclusive")
            if self.radius <= 0:
                raise ValueError("radius must be > 0")
            if self.mc_samples < 1:
                raise ValueError("mc_samples must be >= 1")
            if self.prob_threshold is not None and not 0.0 <= self.prob_threshold <= 1.0:
                raise ValueError("prob_threshold must be in [0, 1]")
        else:
            if (self.eta is None) == (self.loglik_cutoff is None):
                raise ValueError("give exactly one of eta or loglik_cutoff")
            if self.eta is not None and not 0.0 < self.eta < 1.0:
                raise ValueError("eta must be in (0, 1)")
            if self.prob_threshold is not None:
                raise ValueError("prob_threshold belongs to the ball rule")


def detect_anomalies(frame: HyperCube, model: GmraDensityModel, cfg: AnomalyConfig):
    """Score a frame and threshold it; returns (ScoreMap, PlumeMask).

    Scores are log-likelihoods (likelihood rule) or ball probabilities (ball
    rule); a pixel is anomalous when its score falls under the cutoff.
    """
    X = frame.spectra()
    if frame.p != model.tree.p:
        raise ValueError(f"frame has p={frame.p}, model has p={model.tree.p}")
    if cfg.radius is None:
        flat = log_likelihood(X, model)
        if cfg.loglik_cutoff is not None:
            cutoff = float(cfg.loglik_cutoff)
        else:
            cutoff = float(np.quantile(model.train_scores, cfg.eta))
    else:
        flat = np.array([
            ball_probability(x, cfg.radius, model, cfg.mc_samples, seed=(cfg.seed, i))
            for i, x in enumerate(X)
        ])
        cutoff = 1.0 / cfg.mc_samples if cfg.prob_threshold is None else cfg.prob_threshold
    scores = ScoreMap(values=flat.reshape(frame.m, frame.n))
    mask = PlumeMask(values=(flat < cutoff).reshape(frame.m, frame.n))
    return scores, mask


def _stem(path):
    s = os.fspath(path)
    for suf in (_GMRA_HDR, _GMRA_RAW):
        if s.endswith(suf):
            return s[: -len(suf)]
    return s


def save_density_model(model: GmraDensityModel, path) -> None:
    """Write ``<stem>.gmra.json`` (structure) + ``<stem>.gmra.bin`` (float payloads)."""
    stem = _stem(path)
    payload = bytearray()
    arrays = {}

    def put(name, arr, dtype):
        a = np.ascontiguousarray(np.asarray(arr), dtype=dtype)
        arrays[name] = {"offset": len(payload), "dtype": dtype, "shape": list(a.shape)}
        payload.extend(a.tobytes())

    nodes_meta = []
    for node in model.tree.nodes:
        put(f"n{node.node_id}.members", node.members, "<i8")
        put(f"n{node.node_id}.center", node.center, "<f8")
        put(f"n{node.node_id}.basis", node.basis, "<f8")
        put(f"n{node.node_id}.wshift", node.wavelet_shift, "<f8")
        put(f"n{node.node_id}.wbasis", node.wavelet_basis, "<f8")
        nodes_meta.append({
            "id": node.node_id, "scale": node.scale, "index": node.index,
            "parent": node.parent, "children": list(node.children),
        })
    scales_meta = {}
    for j, per in model.scale_densities.items():
        entry = {}
        for nid, nd in per.items():
            for i, kde in enumerate(nd.coeff_kdes):
                put(f"s{j}.n{nid}.c{i}", kde.samples, "<f8")
            put(f"s{j}.n{nid}.r", nd.resid_kde.samples, "<f8")
            entry[str(nid)] = {
                "weight": nd.weight,
                "coeff_bandwidths": [k.bandwidth for k in nd.coeff_kdes],
                "resid_bandwidth": nd.resid_kde.bandwidth,
            }
        scales_meta[str(j)] = entry
    put("train_scores", model.train_scores, "<f8")
    manifest = {
        "format": "plumekit-gmra", "version": 1,
        "p": model.tree.p, "n_points": model.tree.n_points,
        "max_scale": model.tree.max_scale, "jstar": model.jstar, "floor": model.floor,
        "nodes": nodes_meta, "scales": scales_meta, "arrays": arrays,
    }
    with open(stem + _GMRA_HDR, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True)
        fh.write("\n")
    with open(stem + _GMRA_RAW, "wb") as fh:
        fh.write(bytes(payload))


def load_density_model(path) -> GmraDensityModel:
    stem = _stem(path)
    with open(stem + _GMRA_HDR, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "plumekit-gmra":
        raise ValueError(f"{stem + _GMRA_HDR}: not a density model manifest")
    with open(stem + _GMRA_RAW, "rb") as fh:
        blob = fh.read()

    def get(name):
        meta = manifest["arrays"][name]
        dt = np.dtype(meta["dtype"])
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        start = meta["offset"]
        end = start + count * dt.itemsize
        if end > len(blob):
            raise ValueError(f"{stem + _GMRA_RAW}: truncated payload for {name}")
        return np.frombuffer(blob, dtype=dt, count=count,
                             offset=start).reshape(meta["shape"]).copy()

    nodes = []
    for meta in manifest["nodes"]:
        nid = meta["id"]
        nodes.append(GmraNode(
            node_id=nid, scale=meta["scale"], index=meta["index"], parent=meta["parent"],
            children=tuple(meta["children"]), members=get(f"n{nid}.members"),
            center=get(f"n{nid}.center"), basis=get(f"n{nid}.basis"),
            wavelet_shift=get(f"n{nid}.wshift"), wavelet_basis=get(f"n{nid}.wbasis"),
        ))
    tree = GmraTree(nodes=nodes, n_points=manifest["n_points"], p=manifest["p"],
                    max_scale=manifest["max_scale"])
    scale_densities = {}
    for j_str, entry in manifest["scales"].items():
        j = int(j_str)
        per = {}
        for nid_str, nd_meta in entry.items():
            nid = int(nid_str)
            kdes = tuple(
                Kde1D(samples=get(f"s{j}.n{nid}.c{i}"), bandwidth=bw)
                for i, bw in enumerate(nd_meta["coeff_bandwidths"])
            )
            per[nid] = NodeDensity(
                weight=nd_meta["weight"], coeff_kdes=kdes,
                resid_kde=Kde1D(samples=get(f"s{j}.n{nid}.r"),
                                bandwidth=nd_meta["resid_bandwidth"]),
            )
        scale_densities[j] = per
    return GmraDensityModel(tree=tree, scale_densities=scale_densities,
                            jstar=manifest["jstar"], train_scores=get("train_scores"),
                            floor=manifest["floor"])
