"""Data model and on-disk formats for cubes, masks, score maps, and signatures.

A cube on disk is a pair ``<name>.hdr.json`` + ``<name>.f32``: a tiny JSON
header carrying m, n, p and the wavenumber axis, and a raw payload of
little-endian 32-bit floats, pixel-major (pixel (r, c) occupies offsets
``[(r*n + c)*p, (r*n + c + 1)*p)`` in float units, bands in axis order).
Masks are ``<name>.mask.json`` + ``<name>.u8`` (bytes 0 or 255), score maps
are ``<name>.score.json`` + ``<name>.score.f32``. Signatures travel as CSV
with a ``wavenumber`` column followed by one column per named signature.

Storage is 32-bit; everything is widened to float64 on read and all
computation downstream stays in float64.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

_CUBE_HDR = ".hdr.json"
_CUBE_RAW = ".f32"
_MASK_HDR = ".mask.json"
_MASK_RAW = ".u8"
_SCORE_HDR = ".score.json"
_SCORE_RAW = ".score.f32"


def _stem(path, suffixes):
    s = os.fspath(path)
    for suf in suffixes:
        if s.endswith(suf):
            return s[: -len(suf)]
    return s


def _freeze(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class HyperCube:
    """An m x n image of length-p spectra with a strictly increasing wavenumber axis."""

    wavenumbers: np.ndarray  # (p,)
    radiance: np.ndarray  # (m, n, p)

    def __post_init__(self):
        wn = np.ascontiguousarray(np.asarray(self.wavenumbers, dtype=np.float64))
        rad = np.ascontiguousarray(np.asarray(self.radiance, dtype=np.float64))
        if rad.ndim != 3:
            raise ValueError(f"radiance must be (m, n, p), got shape {rad.shape}")
        m, n, p = rad.shape
        if m < 1 or n < 1 or p < 1:
            raise ValueError(f"empty cube dimensions {rad.shape}")
        if wn.ndim != 1 or wn.shape[0] != p:
            raise ValueError(f"wavenumber axis has length {wn.shape}, cube has p={p}")
        if not np.all(np.isfinite(wn)):
            raise ValueError("non-finite wavenumber")
        if p > 1 and not np.all(np.diff(wn) > 0):
            raise ValueError("wavenumbers must be strictly increasing")
        if not np.all(np.isfinite(rad)):
            raise ValueError("non-finite radiance value")
        object.__setattr__(self, "wavenumbers", _freeze(wn))
        object.__setattr__(self, "radiance", _freeze(rad))

    @property
    def m(self) -> int:
        return self.radiance.shape[0]

    @property
    def n(self) -> int:
        return self.radiance.shape[1]

    @property
    def p(self) -> int:
        return self.radiance.shape[2]

    def spectra(self) -> np.ndarray:
        """All pixels as an (m*n, p) array, row-major pixel order. A view, read-only."""
        return self.radiance.reshape(self.m * self.n, self.p)


@dataclass(frozen=True)
class PlumeMask:
    """Boolean per-pixel ground truth or detection mask."""

    values: np.ndarray  # (m, n) bool

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=bool))
        if v.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {v.shape}")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ScoreMap:
    """Per-pixel detection statistic, finite float64."""

    values: np.ndarray  # (m, n)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 2:
            raise ValueError(f"score map must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite score")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SignatureSet:
    """One or more absorption signatures sampled on a common wavenumber axis.

    ``signatures`` is (p, N) with one column per named gas; columns must be
    nonzero. The wavenumber axis is optional in-memory (detectors only need
    the columns) but always present in the CSV format, where it is used for
    alignment checks against cubes.
    """

    signatures: np.ndarray  # (p, N)
    names: tuple
    wavenumbers: np.ndarray | None = None

    def __post_init__(self):
        sig = np.ascontiguousarray(np.asarray(self.signatures, dtype=np.float64))
        if sig.ndim == 1:
            sig = sig[:, None]
        if sig.ndim != 2:
            raise ValueError(f"signatures must be (p, N), got shape {sig.shape}")
        p, nsig = sig.shape
        if nsig < 1 or p < 1:
            raise ValueError(f"empty signature matrix {sig.shape}")
        names = tuple(str(x) for x in self.names)
        if len(names) != nsig:
            raise ValueError(f"{nsig} signature columns but {len(names)} names")
        if not np.all(np.isfinite(sig)):
            raise ValueError("non-finite signature value")
        norms = np.linalg.norm(sig, axis=0)
        if np.any(norms == 0):
            dead = names[int(np.argmin(norms))]
            raise ValueError(f"signature {dead!r} is identically zero")
        wn = self.wavenumbers
        if wn is not None:
            wn = np.ascontiguousarray(np.asarray(wn, dtype=np.float64))
            if wn.shape != (p,):
                raise ValueError(f"wavenumber axis {wn.shape} does not match p={p}")
            if p > 1 and not np.all(np.diff(wn) > 0):
                raise ValueError("signature wavenumbers must be strictly increasing")
            object.__setattr__(self, "wavenumbers", _freeze(wn))
        object.__setattr__(self, "signatures", _freeze(sig))
        object.__setattr__(self, "names", names)

    @property
    def p(self) -> int:
        return self.signatures.shape[0]

    @property
    def count(self) -> int:
        return self.signatures.shape[1]


def _read_header(path, required):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            hdr = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: bad JSON header: {exc}") from None
    for key in required:
        if key not in hdr:
            raise ValueError(f"{path}: header missing {key!r}")
    return hdr


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def read_cube(path) -> HyperCube:
    """Load a ``.hdr.json`` + ``.f32`` cube pair; ``path`` may name either file or the stem."""
    stem = _stem(path, (_CUBE_HDR, _CUBE_RAW))
    hdr = _read_header(stem + _CUBE_HDR, ("m", "n", "p", "wavenumbers"))
    m, n, p = int(hdr["m"]), int(hdr["n"]), int(hdr["p"])
    raw = np.fromfile(stem + _CUBE_RAW, dtype="<f4")
    if raw.size != m * n * p:
        raise ValueError(
            f"{stem + _CUBE_RAW}: payload has {raw.size} floats, header says {m}*{n}*{p}={m * n * p}"
        )
    wn = np.asarray(hdr["wavenumbers"], dtype=np.float64)
    return HyperCube(wavenumbers=wn, radiance=raw.astype(np.float64).reshape(m, n, p))


def write_cube(cube: HyperCube, path) -> None:
    """Write the header/rawfile pair. Values are stored as little-endian float32."""
    stem = _stem(path, (_CUBE_HDR, _CUBE_RAW))
    hdr = {
        "m": cube.m,
        "n": cube.n,
        "p": cube.p,
        "wavenumbers": [float(w) for w in cube.wavenumbers],
    }
    _write_json(hdr, stem + _CUBE_HDR)
    cube.spectra().astype("<f4").tofile(stem + _CUBE_RAW)


def read_mask(path) -> PlumeMask:
    stem = _stem(path, (_MASK_HDR, _MASK_RAW))
    hdr = _read_header(stem + _MASK_HDR, ("m", "n"))
    m, n = int(hdr["m"]), int(hdr["n"])
    raw = np.fromfile(stem + _MASK_RAW, dtype=np.uint8)
    if raw.size != m * n:
        raise ValueError(f"{stem + _MASK_RAW}: {raw.size} bytes, header says {m}*{n}={m * n}")
    bad = (raw != 0) & (raw != 255)
    if np.any(bad):
        raise ValueError(f"{stem + _MASK_RAW}: byte value {int(raw[bad.argmax()])} is not 0 or 255")
    return PlumeMask(values=(raw == 255).reshape(m, n))


def write_mask(mask: PlumeMask, path) -> None:
    stem = _stem(path, (_MASK_HDR, _MASK_RAW))
    _write_json({"m": mask.m, "n": mask.n}, stem + _MASK_HDR)
    (mask.values.reshape(-1).astype(np.uint8) * np.uint8(255)).tofile(stem + _MASK_RAW)


def read_score_map(path) -> ScoreMap:
    stem = _stem(path, (_SCORE_HDR, _SCORE_RAW))
    hdr = _read_header(stem + _SCORE_HDR, ("m", "n"))
    m, n = int(hdr["m"]), int(hdr["n"])
    raw = np.fromfile(stem + _SCORE_RAW, dtype="<f4")
    if raw.size != m * n:
        raise ValueError(f"{stem + _SCORE_RAW}: {raw.size} floats, header says {m}*{n}={m * n}")
    return ScoreMap(values=raw.astype(np.float64).reshape(m, n))


def write_score_map(score_map: ScoreMap, path) -> None:
    """Write a score map; storage is float32, so one 64->32 rounding happens here."""
    stem = _stem(path, (_SCORE_HDR, _SCORE_RAW))
    _write_json({"m": score_map.m, "n": score_map.n}, stem + _SCORE_HDR)
    score_map.values.reshape(-1).astype("<f4").tofile(stem + _SCORE_RAW)


def read_signatures(path) -> SignatureSet:
    """Parse a signature CSV: header ``wavenumber,name...``, one row per band."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty signature file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0] != "wavenumber":
        raise ValueError(f"{path}: header must be 'wavenumber,<name>[,...]', got {rows[0]!r}")
    names = header[1:]
    width = len(header)
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
    if not data:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(data, dtype=np.float64)
    return SignatureSet(signatures=arr[:, 1:], names=tuple(names), wavenumbers=arr[:, 0])


def write_signatures(sigs: SignatureSet, path) -> None:
    if sigs.wavenumbers is None:
        raise ValueError("cannot write a SignatureSet without a wavenumber axis")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wavenumber", *sigs.names])
        for i in range(sigs.p):
            writer.writerow(
                [repr(float(sigs.wavenumbers[i])), *(repr(float(v)) for v in sigs.signatures[i])]
            )
