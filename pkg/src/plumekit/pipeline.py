"""End-to-end detection: fit a background mixture, score frames, enhance.

Scenario 1 works on a single cube: prune outliers, fit the mixture on what
remains, score every pixel (pruned ones included, so maps stay dense), then
optional resampling rounds and an optional PLSR pass. Scenario 2 fits once on
designated clean frames of a sequence and scores every frame against that
fixed model; enhancement stages are scenario-1-only. Fitting never touches
pixels outside the training frames, which `fit_background` makes auditable by
being the only stage that reads spectra before scoring.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cube_io import HyperCube, ScoreMap
from .detectors import DetectorKind
from .enhance import EnhanceConfig, outlier_split, plsr_enhance, resample_enhance
from .mixture import ModelSpec


@dataclass(frozen=True)
class PipelineConfig:
    """Scenario selection plus the model, detector, and enhancement knobs."""

    scenario: int = 1
    clean_frames: int = 2
    train_frame_indices: tuple | None = None  # overrides clean_frames when given
    detector: DetectorKind = DetectorKind.NMF
    model: str = "gaussian"
    k: int = 3
    d: int = 2
    seed: int = 0
    max_iter: int = 100
    delta_rule: float = 50.0
    sign: int = 1
    enhance: EnhanceConfig = field(default_factory=EnhanceConfig)
    threads: int = 1

    def __post_init__(self):
        if self.scenario not in (1, 2):
            raise ValueError(f"scenario must be 1 or 2, got {self.scenario}")
        if self.scenario == 2:
            if self.clean_frames < 1:
                raise ValueError("scenario 2 needs clean_frames >= 1")
            if self.enhance.resample_rounds > 0 or self.enhance.plsr_components is not None:
                raise ValueError("resampling and PLSR enhancement are scenario-1 stages")
        if self.train_frame_indices is not None:
            idx = tuple(int(i) for i in self.train_frame_indices)
            if len(idx) < 1 or any(i < 0 for i in idx) or len(set(idx)) != len(idx):
                raise ValueError(f"bad train_frame_indices {self.train_frame_indices}")
            object.__setattr__(self, "train_frame_indices", idx)
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def model_spec(self) -> ModelSpec:
        return ModelSpec(
            model=self.model,
            detector=self.detector,
            k=self.k,
            d=self.d,
            seed=self.seed,
            max_iter=self.max_iter,
            delta_rule=self.delta_rule,
            sign=self.sign,
        )


def _check_frames(frames):
    if not frames:
        raise ValueError("no frames")
    first = frames[0]
    for i, fr in enumerate(frames[1:], start=1):
        if (fr.m, fr.n, fr.p) != (first.m, first.n, first.p):
            raise ValueError(f"frame {i} shape differs from frame 0")
        if not np.array_equal(fr.wavenumbers, first.wavenumbers):
            raise ValueError(f"frame {i} wavenumber axis differs from frame 0")


def _check_signatures(frame: HyperCube, sigs):
    if hasattr(sigs, "p") and sigs.p != frame.p:
        raise ValueError(f"signatures have p={sigs.p}, cube has p={frame.p}")
    wn = getattr(sigs, "wavenumbers", None)
    if wn is not None and not np.allclose(wn, frame.wavenumbers, rtol=0.0, atol=1e-6):
        raise ValueError("signature wavenumbers do not match the cube axis")


def training_indices(cfg: PipelineConfig, n_frames: int) -> tuple:
    """Frame indices the model is fit on (scenario 2)."""
    if cfg.train_frame_indices is not None:
        if max(cfg.train_frame_indices) >= n_frames:
            raise ValueError(
                f"train frame {max(cfg.train_frame_indices)} out of range for {n_frames} frames"
            )
        return cfg.train_frame_indices
    if n_frames <= cfg.clean_frames:
        raise ValueError(f"scenario 2 needs more than clean_frames={cfg.clean_frames} frames, got {n_frames}")
    return tuple(range(cfg.clean_frames))


def fit_background(frames, cfg: PipelineConfig):
    """Outlier-prune the training spectra and fit the mixture. Reads only training frames."""
    _check_frames(frames)
    spec = cfg.model_spec()
    if cfg.scenario == 1:
        if len(frames) != 1:
            raise ValueError(f"scenario 1 takes exactly one frame, got {len(frames)}")
        train = frames[0].spectra()
    else:
        idx = training_indices(cfg, len(frames))
        train = np.concatenate([frames[i].spectra() for i in idx], axis=0)
    kept, _ = outlier_split(train, cfg.enhance.outlier_fraction)
    return spec.fit(train[kept])


def run_pipeline(frames, sigs, cfg: PipelineConfig) -> list:
    """Score every frame; returns one dense ScoreMap per input frame."""
    _check_frames(frames)
    _check_signatures(frames[0], sigs)
    spec = cfg.model_spec()
    model = fit_background(frames, cfg)
    if cfg.scenario == 1:
        cube = frames[0]
        scores = spec.score_map(cube, sigs, model, cfg.threads)
        for _ in range(cfg.enhance.resample_rounds):
            scores = resample_enhance(cube, scores, sigs, cfg.enhance.tau1, spec, cfg.threads)
        if cfg.enhance.plsr_components is not None:
            scores = plsr_enhance(cube, scores, cfg.enhance.tau2, cfg.enhance.tau3,
                                  cfg.enhance.plsr_components)
        return [scores]
    return [spec.score_map(fr, sigs, model, cfg.threads) for fr in frames]


__all__ = [
    "PipelineConfig",
    "fit_background",
    "run_pipeline",
    "training_indices",
]
