"""Hyperspectral gas-plume detection toolkit.

Mixture-model background estimation, matched-filter style detectors,
score-map enhancement, multiscale density-based anomaly detection, synthetic
scene generation, and ROC evaluation, all deterministic given a seed.
"""

__version__ = "0.1.0"

from .cube_io import (
    HyperCube,
    PlumeMask,
    ScoreMap,
    SignatureSet,
    read_cube,
    read_mask,
    read_score_map,
    read_signatures,
    write_cube,
    write_mask,
    write_score_map,
    write_signatures,
)
from .detectors import (
    DetectorKind,
    lc_abundances,
    lc_score,
    lc_scores,
    nmf_score,
    nmf_scores,
    nss_score,
    nss_scores,
)
from .enhance import EnhanceConfig, outlier_split, plsr_enhance, remove_outliers, resample_enhance
from .evaluation import GroupSummary, RocCurve, group_summary, roc, write_roc_csv
from .gmra import (
    AnomalyConfig,
    GmraDensityModel,
    GmraNode,
    GmraTree,
    ball_probability,
    build_gmra,
    detect_anomalies,
    fit_density,
    gmra_transform,
    load_density_model,
    log_likelihood,
    partition_at,
    save_density_model,
)
from .mixture import (
    GaussianMixture,
    ModelSpec,
    SubspaceMixture,
    assign,
    assign_many,
    fit_gaussian_mixture,
    fit_subspace_mixture,
    mix_score,
    mix_scores,
    mixture_from_json,
    mixture_to_json,
)
from .numerics import (
    CovModel,
    Kde1D,
    PlsrModel,
    SubspaceModel,
    eval_kde,
    fit_cov,
    fit_kde,
    fit_pca,
    fit_plsr,
    log_eval_kde,
    predict_plsr,
    sample_kde,
    solve_ls,
)
from .pipeline import PipelineConfig, fit_background, run_pipeline, training_indices
from .synthgen import (
    Scene,
    SceneSpec,
    gen_gaussian_scene,
    gen_poisson_scene,
    gen_subspace_scene,
    gen_two_plume_scene,
    reference_signatures,
    reference_wavenumbers,
)

__all__ = [name for name in dir() if not name.startswith("_")]
