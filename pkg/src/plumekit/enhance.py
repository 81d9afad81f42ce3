"""Score-map enhancement: outlier pruning, resampled refits, and PLSR smoothing.

The resampling stage keeps the pixels scoring at or below the tau1 order
statistic, grows that set by 4-neighborhood, refits the same background model
on it, and rescores everything. The PLSR stage regresses the statistic onto
raw spectra over the union of the bottom-tau2 and top-tau3 pixels, then
replaces every score with the fitted linear response. Both consume and
produce full-frame ScoreMaps; selection fractions use 1-based ceil ranks of
the sorted scores, so a selection is never empty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cube_io import HyperCube, ScoreMap
from .mixture import ModelSpec
from .numerics import fit_plsr, predict_plsr


@dataclass(frozen=True)
class EnhanceConfig:
    """Knobs for the enhancement chain; None disables the PLSR stage."""

    outlier_fraction: float = 0.01
    tau1: float = 0.2
    tau2: float = 0.15
    tau3: float = 0.15
    resample_rounds: int = 0
    plsr_components: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError(f"outlier_fraction must be in [0, 1), got {self.outlier_fraction}")
        for name in ("tau1", "tau2", "tau3"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        if self.tau2 + self.tau3 >= 1.0:
            raise ValueError(f"tau2 + tau3 must stay below 1, got {self.tau2 + self.tau3}")
        if self.resample_rounds < 0:
            raise ValueError("resample_rounds must be >= 0")
        if self.plsr_components is not None and self.plsr_components < 1:
            raise ValueError("plsr_components must be >= 1 when enabled")


def outlier_split(spectra: np.ndarray, fraction: float):
    """(kept, removed) row indices after dropping the ceil(fraction * count) largest.

    Magnitude is the squared spectrum norm; ties keep the lower row index.
    Both returned index arrays are ascending.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    count = spectra.shape[0]
    r = math.ceil(fraction * count)
    if r == 0:
        return np.arange(count), np.empty(0, dtype=np.intp)
    mag = np.einsum("ij,ij->i", spectra, spectra)
    order = np.argsort(mag, kind="stable")  # ascending magnitude, ties by index
    return np.sort(order[: count - r]), np.sort(order[count - r :])


def remove_outliers(cube: HyperCube, fraction: float = 0.01):
    """Flat-pixel (kept, removed) split of a cube by spectrum magnitude."""
    return outlier_split(cube.spectra(), fraction)


def _order_stat(flat_scores: np.ndarray, rank_fraction: float) -> float:
    """Value at the 1-based ceil(rank_fraction * count) position of the sorted scores."""
    count = flat_scores.shape[0]
    rank = min(max(math.ceil(rank_fraction * count), 1), count)
    return float(np.sort(flat_scores)[rank - 1])


def _grow_4neighborhood(mask2d: np.ndarray) -> np.ndarray:
    grown = mask2d.copy()
    grown[1:, :] |= mask2d[:-1, :]
    grown[:-1, :] |= mask2d[1:, :]
    grown[:, 1:] |= mask2d[:, :-1]
    grown[:, :-1] |= mask2d[:, 1:]
    return grown


def resample_enhance(cube: HyperCube, scores: ScoreMap, sigs, tau1: float,
                     spec: ModelSpec, threads: int = 1) -> ScoreMap:
    """One resampling round: refit on low scorers plus neighbors, rescore all pixels."""
    if (cube.m, cube.n) != (scores.m, scores.n):
        raise ValueError(f"cube is {cube.m}x{cube.n}, scores are {scores.m}x{scores.n}")
    if not 0.0 < tau1 < 1.0:
        raise ValueError(f"tau1 must be in (0, 1), got {tau1}")
    flat = scores.values.reshape(-1)
    delta1 = _order_stat(flat, tau1)
    low = (scores.values <= delta1)
    selection = _grow_4neighborhood(low).reshape(-1)
    idx = np.flatnonzero(selection)
    model = spec.fit(cube.spectra()[idx])  # raises if the selection is too small to fit
    return spec.score_map(cube, sigs, model, threads)


def plsr_enhance(cube: HyperCube, scores: ScoreMap, tau2: float, tau3: float,
                 n_components: int) -> ScoreMap:
    """Replace scores with a PLS1 linear response fit on the score extremes.

    Fits on pixels at or below the tau2 order statistic plus those at or
    above the (1 - tau3) one, then evaluates the affine predictor everywhere.
    A constant selected response leaves the map untouched.
    """
    if (cube.m, cube.n) != (scores.m, scores.n):
        raise ValueError(f"cube is {cube.m}x{cube.n}, scores are {scores.m}x{scores.n}")
    for name, v in (("tau2", tau2), ("tau3", tau3)):
        if not 0.0 < v < 1.0:
            raise ValueError(f"{name} must be in (0, 1), got {v}")
    if tau2 + tau3 >= 1.0:
        raise ValueError(f"tau2 + tau3 must stay below 1, got {tau2 + tau3}")
    flat = scores.values.reshape(-1)
    delta2 = _order_stat(flat, tau2)
    delta3 = _order_stat(flat, 1.0 - tau3)
    sel = (flat <= delta2) | (flat >= delta3)
    count = int(sel.sum())
    if count < n_components + 2:
        raise ValueError(
            f"selected {count} pixels, need at least {n_components + 2} for {n_components} components"
        )
    y = flat[sel]
    if float(np.ptp(y)) == 0.0:
        return ScoreMap(values=scores.values.copy())
    model = fit_plsr(cube.spectra()[sel], y, n_components)
    fitted = predict_plsr(model, cube.spectra())
    return ScoreMap(values=fitted.reshape(cube.m, cube.n))
