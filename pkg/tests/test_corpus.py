"""Corpus oracles: layout generation, optics, rule checks, and the builder.

Derived expectations are either recomputed by brute force inside the test
(direct convolution, pairwise pixel distances) or frozen from a by-hand
construction of the fixture.
"""

import json
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

from lithokit.corpus import (
    BinaryRaster,
    CorpusConfig,
    LayoutConfig,
    ProcessCondition,
    RuleSet,
    SourceType,
    Task,
    ViolationClass,
    build_corpus,
    check_drc,
    check_lrc,
    check_mrc,
    condition_from_json,
    contour_error,
    corpus_fingerprint,
    default_kernel_size,
    effective_sigma,
    generate_layout,
    kernel_second_moment,
    load_sample,
    read_manifest,
    run_opc,
    sample_seed,
    simulate_contour,
    source_kernel,
    split_assignment,
)
from lithokit.errors import ConfigurationError, InputError

from conftest import TINY_CORPUS_CONFIG, nominal_condition, raster

SQ3 = np.ones((3, 3), dtype=bool)


def canvas(n=64):
    return np.zeros((n, n), dtype=np.uint8)


def boxes_overlap(a, b):
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


# ---------------------------------------------------------------------------
# generate_layout


def test_layout_deterministic():
    cfg = LayoutConfig(size=64, wire_width=(6, 12), wire_length=(12, 32))
    a = generate_layout(7, cfg)
    b = generate_layout(7, cfg)
    assert np.array_equal(a.raster.pixels, b.raster.pixels)
    assert a.planted == b.planted


def test_layout_zero_density_is_empty():
    cfg = LayoutConfig(size=64, density=0.0)
    out = generate_layout(3, cfg)
    assert out.raster.pixels.sum() == 0
    assert out.planted == []


def test_layout_injection_rate_binomial():
    # 1000 draws at rate 0.3; planting can occasionally fail on a crowded
    # canvas, so the observed fraction sits slightly below the rate but
    # must stay inside the contracted window.
    cfg = LayoutConfig(
        size=64, wire_width=(6, 12), wire_length=(12, 32), injection_rate=0.3
    )
    hits = sum(bool(generate_layout(i, cfg).planted) for i in range(1000))
    assert 0.25 <= hits / 1000 <= 0.35


def test_layout_is_grid_snapped_manhattan():
    cfg = LayoutConfig(size=64, wire_width=(8, 12), wire_length=(16, 32),
                       injection_rate=0.0)
    px = generate_layout(11, cfg).raster.pixels
    assert px.any()
    # every horizontal/vertical run boundary lands on the 4-px grid
    cols = np.nonzero(np.diff(px.astype(int), axis=1))[1] + 1
    rows = np.nonzero(np.diff(px.astype(int), axis=0))[0] + 1
    assert (cols % cfg.grid == 0).all()
    assert (rows % cfg.grid == 0).all()


def test_layout_rejects_bad_config():
    with pytest.raises(ConfigurationError):
        generate_layout(0, LayoutConfig(size=-1))
    with pytest.raises(ConfigurationError):
        generate_layout(0, LayoutConfig(size=64, wire_width=(0, 4)))
    with pytest.raises(ConfigurationError):
        generate_layout(0, LayoutConfig(size=64, injection_rate=1.5))


# ---------------------------------------------------------------------------
# source_kernel


@pytest.mark.parametrize("source", list(SourceType))
@pytest.mark.parametrize("focus", [0.0, 50.0])
def test_kernel_normalized_and_symmetric(source, focus):
    cond = nominal_condition(source=source, focus=focus)
    k = source_kernel(cond, 13)
    assert abs(k.sum() - 1.0) <= 1e-9
    assert (k >= 0).all()
    assert np.allclose(k, k.T)           # k(x,y) = k(y,x)
    assert np.allclose(k, np.flipud(k))  # k(-x,y) = k(x,y)
    assert np.allclose(k, np.fliplr(k))


def test_kernel_defocus_widens_second_moment():
    sharp = source_kernel(nominal_condition(focus=0.0), 15)
    blurred = source_kernel(nominal_condition(focus=50.0), 15)
    assert kernel_second_moment(blurred) > kernel_second_moment(sharp)
    # second moment of an isotropic Gaussian is ~2 sigma^2; the truncated
    # 15x15 window clips the tails so the discrete value sits slightly low
    assert kernel_second_moment(sharp) == pytest.approx(
        2 * effective_sigma(0.0) ** 2, rel=0.05
    )


def test_kernel_even_size_rejected():
    with pytest.raises(ConfigurationError):
        source_kernel(nominal_condition(), 12)


# ---------------------------------------------------------------------------
# simulate_contour


def test_contour_zero_mask_is_empty():
    cond = nominal_condition()
    out = simulate_contour(raster(canvas()), cond)
    assert out.pixels.sum() == 0


def test_contour_dose_superset():
    mask = canvas()
    mask[20:44, 20:44] = 1
    lo = simulate_contour(raster(mask), nominal_condition(dose=1.0))
    hi = simulate_contour(raster(mask), nominal_condition(dose=1.2))
    assert (hi.pixels >= lo.pixels).all()
    assert hi.pixels.sum() > lo.pixels.sum()  # fixture chosen to be strict


def test_contour_matches_bruteforce_convolution():
    # 21x21 solid square; oracle recomputes the Gaussian kernel and the
    # zero-padded convolution with explicit loops (no scipy), then
    # thresholds.  sigma = 1.5 at focus 0 per the published optics model.
    mask = canvas()
    mask[22:43, 22:43] = 1
    sigma, size = 1.5, 11
    assert default_kernel_size(0.0) == size
    r = size // 2
    ax = np.arange(-r, r + 1, dtype=np.float64)
    g1 = np.exp(-0.5 * (ax / sigma) ** 2)
    kern = np.outer(g1, g1)
    kern /= kern.sum()
    field = np.zeros(mask.shape)
    for i in range(64):
        for j in range(64):
            acc = 0.0
            for di in range(-r, r + 1):
                ii = i + di
                if not 0 <= ii < 64:
                    continue
                for dj in range(-r, r + 1):
                    jj = j + dj
                    if 0 <= jj < 64:
                        acc += kern[di + r, dj + r] * mask[ii, jj]
            field[i, j] = acc
    oracle = field >= 0.5

    cond = ProcessCondition(SourceType.CIRCULAR, 0.5, 0.0, 1.0)
    got = simulate_contour(raster(mask), cond)
    assert np.array_equal(got.pixels > 0, oracle)
    assert int(oracle.sum()) == 437  # frozen from the brute-force oracle


# ---------------------------------------------------------------------------
# run_opc


def test_opc_zero_iterations_is_identity():
    lay = canvas()
    lay[10:30, 10:50] = 1
    out = run_opc(raster(lay), nominal_condition(), iterations=0)
    assert np.array_equal(out.pixels, lay)


def test_opc_never_prints_worse():
    lay = canvas()
    lay[8:16, 8:56] = 1
    lay[24:32, 8:56] = 1
    lay[8:48, 8:16] = 1
    cond = nominal_condition(threshold=0.45)
    before = contour_error(raster(lay), simulate_contour(raster(lay), cond))
    corrected = run_opc(raster(lay), cond, iterations=10)
    after = contour_error(raster(lay), simulate_contour(corrected, cond))
    assert before > 0
    assert after <= before


def test_opc_empty_layout_stays_empty():
    out = run_opc(raster(canvas()), nominal_condition(), iterations=5)
    assert out.pixels.sum() == 0


# ---------------------------------------------------------------------------
# check_drc / check_mrc


def test_drc_clean_square():
    lay = canvas()
    lay[4:14, 4:14] = 1
    assert check_drc(raster(lay), RuleSet(4, 4, 16)) == []


def test_drc_spacing_gap_bruteforce():
    lay = canvas()
    lay[4:14, 4:14] = 1
    lay[4:14, 16:26] = 1
    # brute-force oracle: the empty corridor between the two components is
    # min pairwise Chebyshev pixel distance minus 1 = 2, below the 4-px rule
    left = np.argwhere(lay[:, :15])
    right = np.argwhere(lay[:, 15:]) + (0, 15)
    dist = min(
        max(abs(int(a[0]) - int(b[0])), abs(int(a[1]) - int(b[1])))
        for a in left
        for b in right
    )
    assert dist - 1 == 2
    anns = check_drc(raster(lay), RuleSet(4, 4, 16))
    assert [a.klass for a in anns] == [ViolationClass.SPACING]
    assert anns[0].bbox == (14, 4, 16, 14)
    assert anns[0].task is Task.DRC


def test_drc_area_island():
    lay = canvas()
    lay[6:8, 6:8] = 1
    anns = check_drc(raster(lay), RuleSet(2, 2, 16))
    assert [a.klass for a in anns] == [ViolationClass.AREA]
    assert anns[0].bbox == (6, 6, 8, 8)


def test_drc_rejects_nonpositive_rules():
    with pytest.raises(ConfigurationError):
        check_drc(raster(canvas()), RuleSet(0, 4, 16))


def test_mrc_clean_and_serif():
    m = canvas()
    m[20:32, 20:32] = 1
    assert check_mrc(raster(m), RuleSet(3, 3, 10)) == []
    m[25, 32:35] = 1  # 1-px serif off the right edge
    anns = check_mrc(raster(m), RuleSet(3, 3, 10))
    widths = [a for a in anns if a.klass is ViolationClass.WIDTH]
    assert len(widths) >= 1
    assert any(boxes_overlap(a.bbox, (32, 25, 35, 26)) for a in widths)
    assert all(a.task is Task.MRC for a in anns)


def test_mrc_all_ones_clean():
    ones = raster(np.ones((64, 64), np.uint8))
    assert check_mrc(ones, RuleSet(3, 3, 10)) == []


# ---------------------------------------------------------------------------
# check_lrc


def test_lrc_identical_contour_clean():
    lay = canvas()
    lay[10:40, 10:40] = 1
    rules = RuleSet(pinch_width=3, bridge_gap=4, epe_tolerance=2)
    assert check_lrc(raster(lay), raster(lay), rules) == []


def test_lrc_pinch_box():
    lay = canvas()
    lay[28:33, 6:58] = 1  # 5-wide horizontal wire
    cont = lay.copy()
    cont[28:33, 30:35] = 0
    cont[30, 30:35] = 1  # thinned to 1 px over columns 30..34
    rules = RuleSet(pinch_width=3, bridge_gap=4, epe_tolerance=6)
    anns = check_lrc(raster(cont), raster(lay), rules)
    assert [a.klass for a in anns] == [ViolationClass.PINCH]
    assert anns[0].bbox == (30, 30, 35, 31)


def test_lrc_bridge_between_components():
    lay = canvas()
    lay[20:30, 10:30] = 1
    lay[20:30, 33:53] = 1  # 3-px corridor between two wires
    cont = lay.copy()
    cont[24:26, 30:33] = 1  # printed material spanning the corridor
    rules = RuleSet(pinch_width=3, bridge_gap=4, epe_tolerance=6)
    anns = check_lrc(raster(cont), raster(lay), rules)
    bridges = [a for a in anns if a.klass is ViolationClass.BRIDGE]
    assert len(bridges) == 1
    assert boxes_overlap(bridges[0].bbox, (30, 24, 33, 26))


def test_lrc_dilated_contour_epe_covers_boundary():
    lay = canvas()
    lay[24:40, 24:40] = 1
    dil = ndimage.binary_dilation(lay > 0, SQ3, iterations=4)  # 4 > tol 2
    rules = RuleSet(pinch_width=3, bridge_gap=4, epe_tolerance=2)
    anns = check_lrc(raster(dil.astype(np.uint8)), raster(lay), rules)
    epes = [a for a in anns if a.klass is ViolationClass.EPE]
    assert epes
    edges = dil & ~ndimage.binary_erosion(dil, SQ3, border_value=1)
    covered = np.zeros_like(edges)
    for a in epes:
        x0, y0, x1, y1 = a.bbox
        covered[y0:y1, x0:x1] = True
    assert not (edges & ~covered).any()


def test_lrc_shape_mismatch_rejected():
    small = raster(np.zeros((64, 64), np.uint8))
    big = raster(np.zeros((128, 128), np.uint8))
    with pytest.raises(InputError):
        check_lrc(small, big, RuleSet(pinch_width=3, bridge_gap=4, epe_tolerance=2))


# ---------------------------------------------------------------------------
# build_corpus and corpus invariants


def test_split_quota_exact():
    split = split_assignment(0, 200, 0.85)
    assert split.count("train") == 170
    assert split.count("test") == 30
    # independent of n ordering: pure function of (seed, index)
    assert split == split_assignment(0, 200, 0.85)


def test_condition_grid_cartesian():
    cfg = CorpusConfig(
        out_dir="unused",
        sources=("circular", "annular"),
        thresholds=(0.0923125, 0.1436665),
        foci=(0.0, 50.0),
        doses=(1.0, 1.2),
    )
    grid = cfg.condition_grid()
    assert len(grid) == 16
    assert len({c.key() for c in grid}) == 16


def test_rebuild_byte_identical(tmp_path, tiny_corpus):
    corpus_dir, _ = tiny_corpus
    other = tmp_path / "again"
    build_corpus(CorpusConfig(out_dir=str(other), **TINY_CORPUS_CONFIG))
    assert corpus_fingerprint(corpus_dir) == corpus_fingerprint(other)
    ref_files = sorted(p.relative_to(corpus_dir) for p in corpus_dir.rglob("*") if p.is_file())
    new_files = sorted(p.relative_to(other) for p in other.rglob("*") if p.is_file())
    assert ref_files == new_files
    for rel in ref_files:
        assert (corpus_dir / rel).read_bytes() == (other / rel).read_bytes()


def test_manifest_counts_and_files(tiny_corpus):
    corpus_dir, manifest = tiny_corpus
    records = read_manifest(corpus_dir).records
    assert len(records) == 10
    assert sum(r["split"] == "train" for r in records) == 8
    for rec in records:
        for kind in ("layout", "mask", "contour"):
            assert (corpus_dir / rec["split"] / f"{rec['id']}_{kind}.png").exists()
    meta = json.loads((corpus_dir / "meta.json").read_text())
    assert meta["seed"] == TINY_CORPUS_CONFIG["seed"]


def test_stored_contour_matches_oracle(tiny_corpus):
    corpus_dir, _ = tiny_corpus
    for rec in read_manifest(corpus_dir).records:
        s = load_sample(corpus_dir, rec)
        resim = simulate_contour(s.mask, s.condition)
        assert np.array_equal(resim.pixels, s.contour.pixels), rec["id"]


def test_dose_monotone_on_stored_masks(tiny_corpus):
    corpus_dir, _ = tiny_corpus
    for rec in read_manifest(corpus_dir).records:
        s = load_sample(corpus_dir, rec)
        base = s.condition
        for scale in (1.1, 1.3):
            hi = ProcessCondition(
                base.source_type, base.resist_threshold, base.focus, base.dose * scale
            )
            lo_px = simulate_contour(s.mask, base).pixels
            hi_px = simulate_contour(s.mask, hi).pixels
            assert (hi_px >= lo_px).all(), rec["id"]


def test_planted_defects_are_labelled(tiny_corpus):
    # label soundness: every planted DRC defect overlaps a DRC annotation
    corpus_dir, _ = tiny_corpus
    cfg = CorpusConfig(out_dir="unused", **TINY_CORPUS_CONFIG)
    for rec in read_manifest(corpus_dir).records:
        idx = int(rec["id"].lstrip("s"))
        planted = generate_layout(sample_seed(cfg.seed, idx), cfg.layout).planted
        s = load_sample(corpus_dir, rec)
        drc_boxes = [a.bbox for a in s.annotations_for(Task.DRC)]
        for p in planted:
            assert any(boxes_overlap(p.bbox, b) for b in drc_boxes), rec["id"]


def test_process_distinguishability(tiny_corpus):
    corpus_dir, _ = tiny_corpus
    n_diff = n_total = 0
    for rec in read_manifest(corpus_dir).records:
        s = load_sample(corpus_dir, rec)
        if not s.layout.pixels.any():
            continue
        thr = s.condition.resist_threshold
        a = simulate_contour(s.mask, ProcessCondition(s.condition.source_type, thr, 0.0, 1.0))
        b = simulate_contour(s.mask, ProcessCondition(s.condition.source_type, thr, 50.0, 1.2))
        n_total += 1
        n_diff += not np.array_equal(a.pixels, b.pixels)
    assert n_total > 0
    assert n_diff / n_total >= 0.9


def test_condition_roundtrip(tiny_corpus):
    _, manifest = tiny_corpus
    for cond in manifest.condition_grid:
        clone = condition_from_json(
            {
                "source": cond.source_type.value,
                "threshold": cond.resist_threshold,
                "focus": cond.focus,
                "dose": cond.dose,
            }
        )
        assert clone.key() == cond.key()
        assert np.array_equal(clone.source_raster, cond.source_raster)


def test_build_rejects_unwritable_dir(tmp_path):
    target = tmp_path / "blocked"
    target.write_text("not a directory")
    cfg = CorpusConfig(out_dir=str(target / "sub"), **TINY_CORPUS_CONFIG)
    with pytest.raises(OSError):
        build_corpus(cfg)
