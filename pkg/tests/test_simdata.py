"""Scene generation, echo synthesis, and the on-disk formats."""

import math

import numpy as np
import pytest
from PIL import Image

from echoform.core import FormatError, Rng, ShapeError
from echoform.csa import form_echo
from echoform.simdata import (
    DatasetSpec,
    Scene,
    build_dataset,
    export_magnitude_png,
    gen_distributed,
    gen_point_targets,
    load_arsn,
    make_context,
    read_manifest,
    save_arsn,
    synthesize,
    write_manifest,
)

from conftest import complex_noise


# -------------------------------------------------------------- scenes

def test_point_scene_support_and_range():
    scene = gen_point_targets(16, 16, 7, Rng(0))
    nz = np.flatnonzero(scene.image)
    assert scene.kind == "point_targets"
    assert nz.size == 7
    mags = np.abs(scene.image.ravel()[nz])
    assert np.all((mags >= 0.5) & (mags <= 1.5))


def test_point_scene_deterministic():
    a = gen_point_targets(16, 16, 5, Rng(3))
    b = gen_point_targets(16, 16, 5, Rng(3))
    assert np.array_equal(a.image, b.image)
    assert not np.array_equal(a.image, gen_point_targets(16, 16, 5, Rng(4)).image)


def test_point_scene_rejects_overcrowding():
    # placement stays comfortably sparse; a quarter of the grid is the cap
    gen_point_targets(8, 8, 16, Rng(0))
    with pytest.raises(ValueError):
        gen_point_targets(8, 8, 17, Rng(0))


def test_point_scene_rejects_bad_args():
    with pytest.raises(ValueError):
        gen_point_targets(16, 16, 0, Rng(0))
    with pytest.raises(ValueError):
        gen_point_targets(0, 16, 1, Rng(0))
    with pytest.raises(ValueError):
        gen_point_targets(16, 16, 3, Rng(0), amp_lo=2.0, amp_hi=1.0)


def test_distributed_support_fraction_exact():
    rows = cols = 128
    for sparsity in (0.1, 0.25, 0.6):
        scene = gen_distributed(rows, cols, sparsity, Rng(1))
        frac = np.count_nonzero(scene.image) / (rows * cols)
        assert frac == round(sparsity * rows * cols) / (rows * cols)
        assert abs(frac - sparsity) <= 0.02 * sparsity + 1e-12


def test_distributed_full_density():
    scene = gen_distributed(32, 32, 1.0, Rng(2))
    assert np.count_nonzero(scene.image) == 32 * 32


def test_distributed_rejects_degenerate_sparsity():
    with pytest.raises(ValueError):
        gen_distributed(16, 16, 0.0, Rng(0))
    with pytest.raises(ValueError):
        gen_distributed(16, 16, 1.5, Rng(0))
    with pytest.raises(ValueError):
        gen_distributed(16, 16, -0.1, Rng(0))
    with pytest.raises(ValueError):
        # rounds to zero kept pixels
        gen_distributed(4, 4, 0.01, Rng(0))


def test_distributed_deterministic():
    a = gen_distributed(24, 24, 0.3, Rng(7))
    b = gen_distributed(24, 24, 0.3, Rng(7))
    assert np.array_equal(a.image, b.image)


def test_scene_rejects_all_zero_image():
    with pytest.raises(ValueError):
        Scene(image=np.zeros((4, 4), dtype=complex), kind="point_targets")


# ----------------------------------------------------------- synthesize

def test_synthesize_noiseless_echo_exact(ctx64_full, params64):
    scene = gen_point_targets(64, 64, 6, Rng(10))
    sample = synthesize(ctx64_full, scene)
    assert np.array_equal(sample.echo_full, form_echo(ctx64_full.plan, scene.image))
    assert sample.noise_snr_db is None


def test_synthesize_full_rate_keeps_every_echo_sample(ctx64_full):
    scene = gen_point_targets(64, 64, 6, Rng(11))
    sample = synthesize(ctx64_full, scene)
    assert np.array_equal(sample.echo_down, sample.echo_full)


def test_synthesize_snr_is_exact(ctx64_full):
    scene = gen_distributed(64, 64, 0.5, Rng(12))
    for snr_db in (0.0, 10.0, 30.0):
        sample = synthesize(ctx64_full, scene, snr_db=snr_db, rng=Rng(99))
        clean = form_echo(ctx64_full.plan, scene.image)
        noise = sample.echo_full - clean
        got = 10.0 * math.log10(
            float(np.vdot(clean, clean).real) / float(np.vdot(noise, noise).real)
        )
        assert got == pytest.approx(snr_db, abs=0.1)


def test_synthesize_snr_requires_rng(ctx64_full):
    scene = gen_point_targets(64, 64, 3, Rng(13))
    with pytest.raises(ValueError):
        synthesize(ctx64_full, scene, snr_db=20.0)


def test_synthesize_grid_mismatch(ctx8_half):
    scene = gen_point_targets(16, 16, 4, Rng(14))
    with pytest.raises(ShapeError):
        synthesize(ctx8_half, scene)


def test_synthesize_downsamples_selected_rows_cols(ctx64_half):
    scene = gen_point_targets(64, 64, 5, Rng(15))
    sample = synthesize(ctx64_half, scene)
    assert sample.echo_down.shape == (64, 32)
    kept = ctx64_half.s_azimuth.kept_indices
    assert np.array_equal(sample.echo_down, sample.echo_full[:, kept])


# ----------------------------------------------------- complex raster IO

def test_arsn_round_trip_bitwise(tmp_path):
    a = complex_noise((17, 9), 20)
    p = tmp_path / "img.arsn"
    save_arsn(p, a)
    back = load_arsn(p)
    assert back.dtype == np.complex128
    assert np.array_equal(back, a)


def test_arsn_file_size(tmp_path):
    a = complex_noise((4, 6), 21)
    p = tmp_path / "img.arsn"
    save_arsn(p, a)
    assert p.stat().st_size == 16 + 4 * 6 * 16


def test_arsn_rejects_bad_magic(tmp_path):
    p = tmp_path / "img.arsn"
    save_arsn(p, complex_noise((4, 4), 22))
    raw = bytearray(p.read_bytes())
    raw[:4] = b"JUNK"
    p.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="offset 0"):
        load_arsn(p)


def test_arsn_rejects_truncation(tmp_path):
    p = tmp_path / "img.arsn"
    save_arsn(p, complex_noise((4, 4), 23))
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(FormatError, match="expected"):
        load_arsn(p)
    p.write_bytes(raw[:10])
    with pytest.raises(FormatError, match="header"):
        load_arsn(p)


def test_arsn_rejects_degenerate_header(tmp_path):
    p = tmp_path / "img.arsn"
    # handcrafted header claiming 0x0
    import struct

    p.write_bytes(struct.pack("<4sHBBII", b"ARSN", 1, 0, 0, 0, 0))
    with pytest.raises(FormatError, match="degenerate"):
        load_arsn(p)


def test_arsn_save_rejects_empty():
    with pytest.raises((ShapeError, ValueError)):
        save_arsn("/tmp/never-written.arsn", np.zeros((0, 0), dtype=complex))


# ------------------------------------------------------------ PNG export

def test_png_constant_image_is_uniform_peak_gray(tmp_path):
    p = tmp_path / "c.png"
    export_magnitude_png(p, np.full((8, 8), 3.0 + 0j))
    gray = np.asarray(Image.open(p))
    assert gray.shape == (8, 8)
    assert np.all(gray == 255)


def test_png_point_scene_lights_the_target(tmp_path):
    img = np.zeros((16, 16), dtype=complex)
    img[5, 11] = 2.0
    p = tmp_path / "pt.png"
    export_magnitude_png(p, img)
    gray = np.asarray(Image.open(p))
    assert gray[5, 11] == 255
    others = np.delete(gray.ravel(), 5 * 16 + 11)
    assert np.all(others == 0)


def test_png_zero_image_is_black(tmp_path):
    p = tmp_path / "z.png"
    export_magnitude_png(p, np.zeros((8, 8), dtype=complex))
    assert np.all(np.asarray(Image.open(p)) == 0)


def test_png_floor_changes_rendering(tmp_path):
    img = np.abs(complex_noise((12, 12), 30)) + 0.01
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    export_magnitude_png(a, img, db_floor=-40.0)
    export_magnitude_png(b, img, db_floor=-80.0)
    assert a.read_bytes() != b.read_bytes()


def test_png_rejects_nonnegative_floor(tmp_path):
    with pytest.raises(ValueError):
        export_magnitude_png(tmp_path / "x.png", np.ones((4, 4), dtype=complex), db_floor=0.0)


# ------------------------------------------------------------- manifests

def test_manifest_round_trip(tmp_path):
    p = tmp_path / "m.txt"
    entries = {"rows": 16, "cols": 16, "rate_azimuth": 0.5, "label": "demo"}
    write_manifest(p, entries)
    back = read_manifest(p)
    assert back == {k: str(v) for k, v in entries.items()}


def test_manifest_comments_and_blanks(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("# leading comment\n\nrows = 8  # trailing\n  cols=4\n")
    assert read_manifest(p) == {"rows": "8", "cols": "4"}


def test_manifest_reports_offending_line(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("rows = 8\nnot a pair\n")
    with pytest.raises(FormatError, match=":2:"):
        read_manifest(p)
    p.write_text("= 3\n")
    with pytest.raises(FormatError, match=":1:"):
        read_manifest(p)


def test_dataset_spec_manifest_round_trip():
    spec = DatasetSpec(rows=16, cols=16, seed=11, rate_azimuth=0.5,
                       snr_db=25.0, count_point=4, count_sparse=2,
                       count_dense=1, point_targets=3)
    assert DatasetSpec.from_manifest(
        {k: str(v) for k, v in spec.to_manifest().items()}
    ) == spec


def test_dataset_spec_manifest_omits_absent_snr():
    spec = DatasetSpec()
    entries = spec.to_manifest()
    assert "snr_db" not in entries
    assert DatasetSpec.from_manifest({k: str(v) for k, v in entries.items()}) == spec


def test_dataset_spec_rejects_bad_manifest_value():
    with pytest.raises(FormatError):
        DatasetSpec.from_manifest({"rows": "sixteen"})


def test_dataset_spec_validation():
    with pytest.raises(ValueError):
        DatasetSpec(count_point=0, count_sparse=0, count_dense=0).validate()
    with pytest.raises(ValueError):
        DatasetSpec(count_sparse=-1).validate()


# --------------------------------------------------------------- dataset

def test_build_dataset_composition_and_determinism(params16):
    spec = DatasetSpec(rows=16, cols=16, seed=5, rate_azimuth=0.5,
                       count_point=3, count_sparse=2, count_dense=1,
                       point_targets=4)
    ctx = make_context(params16, 1.0, 0.5, Rng(5))
    ds1 = build_dataset(ctx, spec)
    ds2 = build_dataset(ctx, spec)
    assert [s.scene.kind for s in ds1] == ["point_targets"] * 3 + ["distributed"] * 3
    for a, b in zip(ds1, ds2):
        assert np.array_equal(a.scene.image, b.scene.image)
        assert np.array_equal(a.echo_full, b.echo_full)
        assert np.array_equal(a.echo_down, b.echo_down)


def test_build_dataset_scenes_differ_across_index(params16):
    spec = DatasetSpec(rows=16, cols=16, seed=6, count_point=2,
                       count_sparse=0, count_dense=0, point_targets=3)
    ctx = make_context(params16, 1.0, 1.0, Rng(6))
    ds = build_dataset(ctx, spec)
    assert not np.array_equal(ds[0].scene.image, ds[1].scene.image)


def test_make_context_rejects_out_of_range_rates(params16):
    with pytest.raises(ValueError):
        make_context(params16, 1.0, 1.5, Rng(0))
    with pytest.raises(ValueError):
        make_context(params16, 0.0, 1.0, Rng(0))


def test_build_dataset_checks_grid(params16):
    ctx = make_context(params16, 1.0, 1.0, Rng(0))
    with pytest.raises(ShapeError):
        build_dataset(ctx, DatasetSpec(rows=8, cols=8))
