"""Per-pixel detection statistics against a single background model.

Three statistics over the centered spectrum xt = x - mean:

* NMF: squared whitened correlation with the signature(s),
  (s'P xt)^2 / ((s'P s)(xt'P xt)) for one signature and the projection ratio
  (xt'P S)(S'P S)^-1 (S'P xt) / (xt'P xt) for several, P the regularized
  precision. Always in [0, 1].
* NSS: energy ratio ||(I - P_b) xt||^2 / ||(I - P_tb) xt||^2 where P_b
  projects onto the background subspace and P_tb onto [signatures, basis].
  Both sides carry a relative epsilon so the ratio is defined (and 1.0) for
  spectra inside the background span. Always >= 1.
* LC: least squares abundance of the signature in the [S B] design, clamped
  at zero after an orientation sign.

Each statistic has a batched form (the `*_scores` functions) used by the
mixture layer and the pipeline; the singular forms delegate to them.
"""
from __future__ import annotations

import enum

import numpy as np

from .cube_io import SignatureSet
from .numerics import CovModel, SubspaceModel


class DetectorKind(enum.Enum):
    NMF = "nmf"
    NSS = "nss"
    LC = "lc"


def signature_matrix(sigs) -> np.ndarray:
    """Coerce a SignatureSet, vector, or (p, N) array to a (p, N) float matrix."""
    if isinstance(sigs, SignatureSet):
        return sigs.signatures
    S = np.asarray(sigs, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2 or S.shape[1] < 1:
        raise ValueError(f"signatures must be a vector or (p, N) matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("non-finite signature value")
    return S


def _rows(X, p):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != p:
        raise ValueError(f"spectra shape {X.shape} does not match p={p}")
    return X, single


def nmf_scores(X, cov: CovModel, sigs) -> np.ndarray:
    """Batched NMF statistic; X is (M, p) or a single spectrum."""
    S = signature_matrix(sigs)
    X, single = _rows(X, cov.p)
    if S.shape[0] != cov.p:
        raise ValueError(f"signatures have p={S.shape[0]}, model has p={cov.p}")
    P = cov.precision
    Xt = X - cov.mean
    W = Xt @ P
    den = np.einsum("ij,ij->i", W, Xt)
    V = W @ S
    G = S.T @ (P @ S)
    if S.shape[1] == 1:
        g = float(G[0, 0])
        if g <= 1e-300:
            raise ValueError("signature lies in the null space of the precision")
        num = V[:, 0] ** 2 / g
    else:
        try:
            np.linalg.cholesky(G + 0.0)
        except np.linalg.LinAlgError:
            raise ValueError("S'PS is singular: signatures are collinear under this model") from None
        num = np.einsum("ij,ij->i", V, np.linalg.solve(G, V.T).T)
    # relative floor: spectra at (or numerically indistinguishable from) the mean score 0
    floor = 1e-12 * float(np.trace(P)) * np.einsum("ij,ij->i", Xt, Xt)
    out = np.zeros(X.shape[0])
    ok = den > floor
    np.divide(num, den, out=out, where=ok)
    out[~ok] = 0.0
    np.clip(out, 0.0, 1.0, out=out)  # the ratio is a projection, [0, 1] up to roundoff
    return out


def nmf_score(x, cov: CovModel, sigs) -> float:
    return float(nmf_scores(x, cov, sigs)[0])


def _nss_extra_basis(sub: SubspaceModel, S: np.ndarray) -> np.ndarray:
    """Orthonormal completion of the signatures against the background basis.

    Errors if [S B] is rank deficient (a signature inside the background span
    leaves nothing to detect).
    """
    B = sub.basis
    T = S - B @ (B.T @ S) if sub.d > 0 else S.copy()
    q, r = np.linalg.qr(T)
    diag = np.abs(np.diag(r))
    col_scale = np.linalg.norm(S, axis=0)
    if np.any(diag <= 1e-10 * np.maximum(col_scale, 1e-300)):
        raise ValueError("[signatures, basis] is rank deficient")
    return q


def nss_scores(X, sub: SubspaceModel, sigs) -> np.ndarray:
    S = signature_matrix(sigs)
    X, single = _rows(X, sub.p)
    if S.shape[0] != sub.p:
        raise ValueError(f"signatures have p={S.shape[0]}, model has p={sub.p}")
    Q = _nss_extra_basis(sub, S)
    Xt = X - sub.mean
    B = sub.basis
    Rb = Xt - (Xt @ B) @ B.T if sub.d > 0 else Xt
    num = np.einsum("ij,ij->i", Rb, Rb)
    proj = Rb @ Q
    den = np.maximum(num - np.einsum("ij,ij->i", proj, proj), 0.0)
    xt2 = np.einsum("ij,ij->i", Xt, Xt)
    eps = np.where(xt2 > 0.0, 1e-12 * xt2, 1e-300)
    return (num + eps) / (den + eps)


def nss_score(x, sub: SubspaceModel, sigs) -> float:
    return float(nss_scores(x, sub, sigs)[0])


def _lc_design(sub: SubspaceModel, S: np.ndarray):
    A = np.hstack([S, sub.basis]) if sub.d > 0 else S
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    if diag.min(initial=np.inf) <= 1e-10 * max(diag.max(initial=0.0), 1e-300):
        raise ValueError("[signatures, basis] design is rank deficient")
    return q, r


def lc_abundances(X, sub: SubspaceModel, sigs, sign: int = 1) -> np.ndarray:
    """Clamped signature coefficients, (M, N): max(sign * beta_i, 0) per signature."""
    S = signature_matrix(sigs)
    X, single = _rows(X, sub.p)
    if S.shape[0] != sub.p:
        raise ValueError(f"signatures have p={S.shape[0]}, model has p={sub.p}")
    if sign not in (1, -1):
        raise ValueError("sign flag must be +1 or -1")
    q, r = _lc_design(sub, S)
    beta = np.linalg.solve(r, q.T @ (X - sub.mean).T)  # (N + d, M)
    g = np.maximum(sign * beta[: S.shape[1]], 0.0).T
    return g


def lc_scores(X, sub: SubspaceModel, sigs, sign: int = 1) -> np.ndarray:
    return lc_abundances(X, sub, sigs, sign).max(axis=1)


def lc_score(x, sub: SubspaceModel, sigs, sign: int = 1) -> float:
    return float(lc_scores(x, sub, sigs, sign)[0])
