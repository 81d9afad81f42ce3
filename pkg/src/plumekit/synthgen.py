"""Synthetic scene generators with bundled reference spectra.

Three smooth 68-band radiance curves stand in for sky, mountain, and ground
backgrounds (sky dimmest, ground brightest), plus two band-localized
absorption signatures. Four recipes build labeled scenes from them:

* gaussian:   per-region diagonal-covariance Gaussian clutter, plume pixels
              are fresh ground draws plus g * signature, g ~ N(-0.01, sd 0.001).
* subspace:   per-region scaled means c * mu_i + eps, c ~ N(1, sd 0.01),
              shared per-band noise variances drawn once.
* poisson:    a single averaged background mean plus b * Poisson(0.005) spikes,
              b the mean's peak value.
* two_plume:  the gaussian recipe with two signatures, pixels carrying either
              or both.

Every recipe consumes a single Generator(PCG64) stream in a documented draw
order, so (recipe, seed, spec) pins the scene exactly. Flat pixel lists are
reshaped row-major onto the most-square grid whose row count divides the
total, generation order preserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cube_io import HyperCube, PlumeMask, SignatureSet

P_BANDS = 68


def reference_wavenumbers() -> np.ndarray:
    """68 bands across the long-wave infrared window, in 1/cm."""
    return np.linspace(850.0, 1320.0, P_BANDS)


def _curves(w):
    t = (w - w[0]) / (w[-1] - w[0])
    sky = 0.24 + 0.08 * (1.0 - t) + 0.035 * np.sin(2.6 * t + 0.3)
    mountain = 0.52 + 0.10 * t + 0.045 * np.cos(3.1 * t - 0.5)
    ground = 0.80 + 0.16 * np.exp(-(((t - 0.38) / 0.46) ** 2)) + 0.025 * np.sin(5.0 * t)
    return sky, mountain, ground


def reference_means() -> tuple:
    """(sky, mountain, ground) radiance curves; ground is the brightest."""
    return tuple(_curves(reference_wavenumbers()))


def reference_signatures() -> SignatureSet:
    """Two synthetic gas absorption signatures on the reference axis."""
    w = reference_wavenumbers()
    gas_a = np.exp(-(((w - 1032.0) / 14.0) ** 2)) + 0.6 * np.exp(-(((w - 1096.0) / 20.0) ** 2))
    gas_b = np.exp(-(((w - 1182.0) / 16.0) ** 2)) + 0.5 * np.exp(-(((w - 928.0) / 18.0) ** 2))
    return SignatureSet(
        signatures=np.stack([gas_a, gas_b], axis=1), names=("gas_a", "gas_b"), wavenumbers=w
    )


@dataclass(frozen=True)
class SceneSpec:
    """Counts, spectra, and distribution parameters shared by the recipes.

    Normal distributions are parameterized (mean, standard deviation). Noise
    scales are relative to ``a = max(ground mean)``.
    """

    wavenumbers: np.ndarray = field(default_factory=reference_wavenumbers)
    means: tuple = field(default_factory=reference_means)
    signatures: SignatureSet = field(default_factory=reference_signatures)
    region_counts: tuple = (5000, 5000, 4000)
    plume_count: int = 1000
    both_count: int = 100
    background_count: int = 10000
    noise_lo: float = 0.002
    noise_hi: float = 0.008
    scale_std: float = 0.01
    eps_sigma_std: float = 0.005
    poisson_rate: float = 0.005
    g_mean: float = -0.01
    g_std: float = 0.001

    def __post_init__(self):
        w = np.asarray(self.wavenumbers, dtype=np.float64)
        means = tuple(np.asarray(mu, dtype=np.float64) for mu in self.means)
        if len(means) != 3:
            raise ValueError("need exactly three region means")
        for mu in means:
            if mu.shape != w.shape:
                raise ValueError(f"mean length {mu.shape} does not match {w.shape[0]} bands")
        if self.signatures.p != w.shape[0]:
            raise ValueError("signatures are not on the scene wavenumber axis")
        if len(self.region_counts) != 3 or any(c < 1 for c in self.region_counts):
            raise ValueError("region_counts must be three positive integers")
        if self.plume_count < 1 or self.both_count < 0 or self.background_count < 1:
            raise ValueError("pixel counts must be positive")
        if not 0.0 <= self.noise_lo <= self.noise_hi:
            raise ValueError("need 0 <= noise_lo <= noise_hi")
        if self.scale_std < 0 or self.eps_sigma_std < 0 or self.g_std < 0:
            raise ValueError("standard deviations must be >= 0")
        if self.poisson_rate < 0:
            raise ValueError("poisson_rate must be >= 0")
        object.__setattr__(self, "wavenumbers", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "region_counts", tuple(int(c) for c in self.region_counts))

    @property
    def p(self) -> int:
        return self.wavenumbers.shape[0]

    @property
    def bright(self) -> float:
        """a = max(ground mean), the reference amplitude for noise scales."""
        return float(self.means[2].max())


@dataclass(frozen=True)
class Scene:
    """A packed synthetic scene: cube, per-pixel string labels, plume truth."""

    cube: HyperCube
    labels: np.ndarray  # (m, n) unicode labels
    mask: PlumeMask
    signatures: SignatureSet


def _grid_shape(total: int) -> tuple:
    r = int(math.isqrt(total))
    while total % r:
        r -= 1
    return r, total // r


def _pack(spec: SceneSpec, rows, labels, sigs: SignatureSet) -> Scene:
    X = np.concatenate(rows, axis=0)
    lab = np.concatenate([np.full(r.shape[0], name) for r, name in zip(rows, labels)])
    m, n = _grid_shape(X.shape[0])
    cube = HyperCube(wavenumbers=spec.wavenumbers, radiance=X.reshape(m, n, spec.p))
    plume = np.array([name not in ("sky", "mountain", "ground", "background") for name in labels])
    is_plume = np.isin(lab, np.array(labels)[plume])
    return Scene(
        cube=cube,
        labels=lab.reshape(m, n),
        mask=PlumeMask(values=is_plume.reshape(m, n)),
        signatures=sigs,
    )


def _single_signature(spec: SceneSpec) -> SignatureSet:
    return SignatureSet(
        signatures=spec.signatures.signatures[:, :1],
        names=spec.signatures.names[:1],
        wavenumbers=spec.signatures.wavenumbers,
    )


def gen_gaussian_scene(seed: int = 0, spec: SceneSpec | None = None) -> Scene:
    """Three Gaussian clutter regions plus plume-on-ground pixels.

    Draw order: per-region noise sigmas (uniform on [noise_lo, noise_hi] * a,
    one length-p vector per region), region pixel blocks in sky/mountain/
    ground order, plume base draws, then the per-pixel plume strengths g.
    """
    spec = spec or SceneSpec()
    rng = np.random.default_rng(seed)
    a = spec.bright
    sigma = [rng.uniform(spec.noise_lo * a, spec.noise_hi * a, spec.p) for _ in range(3)]
    regions = [
        mu + rng.standard_normal((count, spec.p)) * sg
        for mu, count, sg in zip(spec.means, spec.region_counts, sigma)
    ]
    base = spec.means[2] + rng.standard_normal((spec.plume_count, spec.p)) * sigma[2]
    g = rng.normal(spec.g_mean, spec.g_std, spec.plume_count)
    s = spec.signatures.signatures[:, 0]
    plume = base + g[:, None] * s
    return _pack(spec, [*regions, plume], ["sky", "mountain", "ground", "plume"],
                 _single_signature(spec))


def gen_subspace_scene(seed: int = 0, spec: SceneSpec | None = None) -> Scene:
    """Regions live on scaled-mean lines: x = c * mu_i + eps.

    Draw order: the shared per-band noise sigmas (normal, squared into
    variances), then per region the scale factors c and the noise block, then
    the plume block (ground line) and its g strengths.
    """
    spec = spec or SceneSpec()
    rng = np.random.default_rng(seed)
    a = spec.bright
    sig_eps = np.abs(rng.normal(0.0, spec.eps_sigma_std * a, spec.p))

    def block(mu, count):
        c = rng.normal(1.0, spec.scale_std, count)
        eps = rng.standard_normal((count, spec.p)) * sig_eps
        return c[:, None] * mu + eps

    regions = [block(mu, count) for mu, count in zip(spec.means, spec.region_counts)]
    base = block(spec.means[2], spec.plume_count)
    g = rng.normal(spec.g_mean, spec.g_std, spec.plume_count)
    plume = base + g[:, None] * spec.signatures.signatures[:, 0]
    return _pack(spec, [*regions, plume], ["sky", "mountain", "ground", "plume"],
                 _single_signature(spec))


def gen_poisson_scene(seed: int = 0, spec: SceneSpec | None = None) -> Scene:
    """Averaged background mean plus b * Poisson(rate) spike noise.

    Draw order: background spike block, plume spike block, plume strengths g.
    """
    spec = spec or SceneSpec()
    rng = np.random.default_rng(seed)
    mu = (spec.means[0] + spec.means[1] + spec.means[2]) / 3.0
    b = float(mu.max())
    background = mu + b * rng.poisson(spec.poisson_rate, (spec.background_count, spec.p))
    base = mu + b * rng.poisson(spec.poisson_rate, (spec.plume_count, spec.p))
    g = rng.normal(spec.g_mean, spec.g_std, spec.plume_count)
    plume = base + g[:, None] * spec.signatures.signatures[:, 0]
    return _pack(spec, [background, plume], ["background", "plume"], _single_signature(spec))


def gen_two_plume_scene(seed: int = 0, spec: SceneSpec | None = None) -> Scene:
    """Scaled-mean-line clutter with two gases: separate plumes plus overlap.

    Labels are sky/mountain/ground/plume1/plume2/both. Regions follow the
    scaled-mean recipe (both detector families model it well, which is the
    point of this scene). Draw order: shared noise sigmas, region blocks,
    then plume1, plume2, and both blocks with their g draws (g1 then g2 for
    the overlap block).
    """
    spec = spec or SceneSpec(region_counts=(5000, 5000, 5000))
    if spec.signatures.count < 2:
        raise ValueError("two-plume scene needs two signatures")
    rng = np.random.default_rng(seed)
    a = spec.bright
    sig_eps = np.abs(rng.normal(0.0, spec.eps_sigma_std * a, spec.p))

    def block(mu, count):
        c = rng.normal(1.0, spec.scale_std, count)
        eps = rng.standard_normal((count, spec.p)) * sig_eps
        return c[:, None] * mu + eps

    regions = [block(mu, count) for mu, count in zip(spec.means, spec.region_counts)]
    s1 = spec.signatures.signatures[:, 0]
    s2 = spec.signatures.signatures[:, 1]

    def plume_block(count, sigs_here):
        base = block(spec.means[2], count)
        for s in sigs_here:
            base = base + rng.normal(spec.g_mean, spec.g_std, count)[:, None] * s
        return base

    p1 = plume_block(spec.plume_count, [s1])
    p2 = plume_block(spec.plume_count, [s2])
    both = plume_block(spec.both_count, [s1, s2])
    sigs = SignatureSet(
        signatures=spec.signatures.signatures[:, :2],
        names=spec.signatures.names[:2],
        wavenumbers=spec.signatures.wavenumbers,
    )
    return _pack(spec, [*regions, p1, p2, both],
                 ["sky", "mountain", "ground", "plume1", "plume2", "both"], sigs)
