"""File formats: round trips, validation, and the failure modes."""
import json
import os

import numpy as np
import pytest

from plumekit.cube_io import (
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


def _cube(seed=0, m=4, n=5, p=6):
    rng = np.random.default_rng(seed)
    return HyperCube(
        wavenumbers=np.linspace(900.0, 1100.0, p),
        radiance=rng.uniform(0.1, 1.0, (m, n, p)),
    )


def test_cube_shape_properties():
    cube = _cube()
    assert (cube.m, cube.n, cube.p) == (4, 5, 6)
    assert cube.spectra().shape == (20, 6)
    # spectra() flattens row-major: pixel (i, j) is row i*n + j
    np.testing.assert_array_equal(cube.spectra()[7], cube.radiance[1, 2])


def test_cube_arrays_are_frozen():
    cube = _cube()
    with pytest.raises(ValueError):
        cube.radiance[0, 0, 0] = 2.0
    with pytest.raises(ValueError):
        cube.wavenumbers[0] = 0.0


def test_cube_validation():
    rng = np.random.default_rng(1)
    good = rng.uniform(0.1, 1.0, (2, 2, 3))
    with pytest.raises(ValueError):
        HyperCube(wavenumbers=np.array([3.0, 2.0, 1.0]), radiance=good)  # not increasing
    with pytest.raises(ValueError):
        HyperCube(wavenumbers=np.array([1.0, 2.0]), radiance=good)  # p mismatch
    bad = good.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        HyperCube(wavenumbers=np.array([1.0, 2.0, 3.0]), radiance=bad)


def test_cube_round_trip_is_bitwise_for_f32(tmp_path):
    # payload is float32; a cube written from float32-valued data survives exactly
    rng = np.random.default_rng(2)
    vals = rng.uniform(0.1, 1.0, (3, 4, 5)).astype(np.float32).astype(np.float64)
    cube = HyperCube(wavenumbers=np.linspace(1.0, 5.0, 5), radiance=vals)
    write_cube(cube, tmp_path / "a.hdr.json")
    back = read_cube(tmp_path / "a.hdr.json")
    np.testing.assert_array_equal(back.radiance, cube.radiance)
    np.testing.assert_array_equal(back.wavenumbers, cube.wavenumbers)
    # reading via the payload path or the bare stem lands on the same files
    again = read_cube(tmp_path / "a.f32")
    np.testing.assert_array_equal(again.radiance, cube.radiance)
    again = read_cube(tmp_path / "a")
    np.testing.assert_array_equal(again.radiance, cube.radiance)


def test_cube_write_is_deterministic(tmp_path):
    cube = _cube(3)
    write_cube(cube, tmp_path / "x.hdr.json")
    write_cube(cube, tmp_path / "y.hdr.json")
    assert (tmp_path / "x.hdr.json").read_bytes() == (tmp_path / "y.hdr.json").read_bytes()
    assert (tmp_path / "x.f32").read_bytes() == (tmp_path / "y.f32").read_bytes()


def test_cube_header_mismatch(tmp_path):
    cube = _cube(4)
    write_cube(cube, tmp_path / "c.hdr.json")
    hdr = json.loads((tmp_path / "c.hdr.json").read_text())
    hdr["p"] = 99
    (tmp_path / "c.hdr.json").write_text(json.dumps(hdr))
    with pytest.raises(ValueError):
        read_cube(tmp_path / "c.hdr.json")


def test_cube_truncated_payload(tmp_path):
    cube = _cube(5)
    write_cube(cube, tmp_path / "t.hdr.json")
    raw = (tmp_path / "t.f32").read_bytes()
    (tmp_path / "t.f32").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_cube(tmp_path / "t.hdr.json")


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    mask = PlumeMask(values=rng.random((7, 3)) > 0.5)
    write_mask(mask, tmp_path / "m.mask.json")
    back = read_mask(tmp_path / "m.mask.json")
    np.testing.assert_array_equal(back.values, mask.values)


def test_mask_rejects_stray_bytes(tmp_path):
    mask = PlumeMask(values=np.ones((2, 2), dtype=bool))
    write_mask(mask, tmp_path / "m.mask.json")
    raw = bytearray((tmp_path / "m.u8").read_bytes())
    raw[1] = 7  # only 0 and 255 are legal
    (tmp_path / "m.u8").write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        read_mask(tmp_path / "m.mask.json")


def test_score_map_round_trip_f32(tmp_path):
    rng = np.random.default_rng(7)
    vals = rng.uniform(0.0, 1.0, (5, 4)).astype(np.float32).astype(np.float64)
    sm = ScoreMap(values=vals)
    write_score_map(sm, tmp_path / "s.score.json")
    back = read_score_map(tmp_path / "s.score.json")
    np.testing.assert_array_equal(back.values, sm.values)


def test_score_map_rejects_nonfinite():
    with pytest.raises(ValueError):
        ScoreMap(values=np.array([[np.inf, 0.0]]))


def test_signatures_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    sigs = SignatureSet(
        signatures=rng.uniform(0.1, 2.0, (9, 2)),
        names=("gas_a", "gas_b"),
        wavenumbers=np.linspace(800.0, 1000.0, 9),
    )
    write_signatures(sigs, tmp_path / "s.csv")
    back = read_signatures(tmp_path / "s.csv")
    assert back.names == sigs.names
    # repr round trip: float64 values survive the text format exactly
    np.testing.assert_array_equal(back.signatures, sigs.signatures)
    np.testing.assert_array_equal(back.wavenumbers, sigs.wavenumbers)


def test_signatures_bad_csv(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("wavenumber,gas\n100.0,1.0\n100.0,oops\n")
    with pytest.raises(ValueError) as err:
        read_signatures(path)
    assert ":3:" in str(err.value)  # failing line is named
    path.write_text("wavenumber,gas\n200.0,1.0\n100.0,2.0\n")
    with pytest.raises(ValueError):
        read_signatures(path)  # wavenumbers must increase


def test_signatures_reject_zero_column():
    with pytest.raises(ValueError):
        SignatureSet(signatures=np.zeros((4, 1)), names=("z",))


def test_missing_files_error(tmp_path):
    with pytest.raises((OSError, ValueError)):
        read_cube(tmp_path / "nope.hdr.json")
    with pytest.raises((OSError, ValueError)):
        read_signatures(tmp_path / "nope.csv")
