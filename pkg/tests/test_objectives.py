"""Loss oracles.

Worked examples evaluate each formula by hand (values frozen below);
DERIVED cases recompute the published closed form independently inside the
test.  Hungarian matching is checked against exhaustive permutation search.
"""

import itertools
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from lithokit.errors import InputError
from lithokit.objectives import (
    DetLossWeights,
    GenLossWeights,
    GenerationBatch,
    bbox_l1_loss,
    bce_loss,
    box_iou,
    combine_generation_terms,
    cxcywh_to_xyxy,
    detection_loss_terms,
    dice_loss,
    dice_similarity,
    edge_dice_loss,
    edge_mask,
    edge_regions,
    fppl_loss,
    generation_loss_terms,
    giou_loss,
    hungarian_match,
    match_cost_matrix,
    pac_loss,
    reconstruction_loss,
    sac_from_similarities,
    sac_loss,
    total_detection_loss,
    total_generation_loss,
    varifocal_loss,
)

from conftest import raster

GW = GenLossWeights()
DW = DetLossWeights()


def t(arr, dtype=torch.float32):
    return torch.as_tensor(np.asarray(arr), dtype=dtype)


# ---------------------------------------------------------------------------
# bce_loss


def test_bce_perfect():
    target = torch.zeros(8, 8)
    target[2:5, 3:6] = 1
    assert float(bce_loss(target.clone(), target)) <= 1.2e-7


def test_bce_half_is_ln2():
    for target in (torch.zeros(6, 6), torch.ones(6, 6)):
        loss = bce_loss(torch.full((6, 6), 0.5), target)
        assert float(loss) == pytest.approx(math.log(2.0), abs=1e-6)


def test_bce_inverted_hits_clamp():
    target = torch.zeros(8, 8)
    target[1:4, 1:4] = 1
    loss = bce_loss(1.0 - target, target)
    assert float(loss) == pytest.approx(-math.log(1e-7), rel=1e-4)


def test_bce_shape_mismatch():
    with pytest.raises(InputError):
        bce_loss(torch.zeros(4, 4), torch.zeros(4, 5))


# ---------------------------------------------------------------------------
# dice_loss


def test_dice_identical_nonempty():
    target = torch.zeros(8, 8)
    target[2:6, 2:6] = 1
    assert float(dice_loss(target.clone(), target)) == pytest.approx(0.0, abs=1e-6)


def test_dice_both_empty_is_zero():
    assert float(dice_loss(torch.zeros(5, 5), torch.zeros(5, 5))) == 0.0


def test_dice_worked_example():
    # pred = 2x2 ones, target = first row: 1 - (2*2+1)/(4+2+1) = 2/7
    pred = torch.ones(2, 2)
    target = t([[1.0, 1.0], [0.0, 0.0]])
    assert float(dice_loss(pred, target)) == pytest.approx(2.0 / 7.0, abs=1e-7)


@given(
    st.lists(st.floats(0.0, 1.0), min_size=16, max_size=16),
    st.lists(st.integers(0, 1), min_size=16, max_size=16),
)
@settings(max_examples=50, deadline=None)
def test_dice_range_property(pred_vals, tgt_vals):
    pred = t(pred_vals).reshape(4, 4)
    target = t(tgt_vals).reshape(4, 4)
    val = float(dice_loss(pred, target))
    assert 0.0 <= val <= 1.0


# ---------------------------------------------------------------------------
# edge_regions / edge_dice_loss


def test_edge_regions_square_ring():
    g = np.zeros((64, 64), np.uint8)
    g[10:15, 10:15] = 1  # 5x5 solid square
    edges = edge_regions(raster(g)).pixels
    assert edges.sum() == 16
    inner = np.zeros_like(g)
    inner[11:14, 11:14] = 1
    assert np.array_equal(edges, g - inner)


def test_edge_regions_trivial():
    g = np.zeros((64, 64), np.uint8)
    assert edge_regions(raster(g)).pixels.sum() == 0
    g[20, 10:30] = 1  # 1-px line erodes away entirely
    assert np.array_equal(edge_regions(raster(g)).pixels, g)


def test_edge_dice_identical_and_empty():
    target = torch.zeros(10, 10)
    target[2:7, 2:7] = 1
    assert float(edge_dice_loss(target.clone(), target)) == pytest.approx(0.0, abs=1e-7)
    assert float(edge_dice_loss(torch.zeros(6, 6), torch.zeros(6, 6))) == 0.0


def test_edge_dice_disjoint_translation():
    # 4x4 square translated by half the canvas: edges disjoint, so
    # loss = 1 - s/(|E1| + |E2| + s) with s = 1
    target = torch.zeros(16, 16)
    target[2:6, 2:6] = 1
    pred = torch.roll(target, shifts=8, dims=1)
    n1 = float(edge_mask(pred).sum())
    n2 = float(edge_mask(target).sum())
    assert n1 == n2 == 12.0  # 4x4 ring
    expected = 1.0 - 1.0 / (n1 + n2 + 1.0)
    assert float(edge_dice_loss(pred, target)) == pytest.approx(expected, abs=1e-6)


# ---------------------------------------------------------------------------
# reconstruction_loss


class _Outs:
    def __init__(self, mask_prob, contour_prob):
        self.mask_prob, self.contour_prob = mask_prob, contour_prob


class _Sample:
    def __init__(self, mask, contour):
        self.mask, self.contour = mask, contour


def test_reconstruction_perfect():
    g = torch.zeros(8, 8)
    g[2:6, 2:6] = 1
    loss = reconstruction_loss(_Outs(g.clone(), g.clone()), _Sample(g, g), GW)
    assert float(loss) == pytest.approx(0.0, abs=1e-5)


def test_reconstruction_weight_arithmetic():
    # identical mask/contour predictions and targets make both branch
    # losses equal some t, so the total is w_mask*t + w_contour*t = 3t
    target = torch.zeros(8, 8)
    target[2:6, 2:6] = 1
    pred = torch.full((8, 8), 0.5)
    loss = reconstruction_loss(_Outs(pred, pred.clone()), _Sample(target, target), GW)
    branch = (
        GW.w_dice * dice_loss(pred, target)
        + GW.w_bce * bce_loss(pred, target)
        + GW.w_edge * edge_dice_loss(pred, target)
    )
    assert float(loss) == pytest.approx(3.0 * float(branch), rel=1e-6)


def test_reconstruction_hand_summed():
    gen = torch.Generator().manual_seed(3)
    mask_p = torch.rand(12, 12, generator=gen)
    cont_p = torch.rand(12, 12, generator=gen)
    mask_t = (torch.rand(12, 12, generator=gen) > 0.7).float()
    cont_t = (torch.rand(12, 12, generator=gen) > 0.7).float()
    loss = reconstruction_loss(_Outs(mask_p, cont_p), _Sample(mask_t, cont_t), GW)
    expected = GW.w_mask * (
        GW.w_dice * dice_loss(mask_p, mask_t)
        + GW.w_bce * bce_loss(mask_p, mask_t)
        + GW.w_edge * edge_dice_loss(mask_p, mask_t)
    ) + GW.w_contour * (
        GW.w_dice * dice_loss(cont_p, cont_t)
        + GW.w_bce * bce_loss(cont_p, cont_t)
        + GW.w_edge * edge_dice_loss(cont_p, cont_t)
    )
    assert float(loss) == pytest.approx(float(expected), abs=1e-6)


# ---------------------------------------------------------------------------
# sac_loss / pac_loss


def test_sac_worked_example():
    # one anchor: Dice(a,p)=0.9, Dice(a,n)=0.2, tau=0.07
    # -log(e^{0.9/tau} / (e^{0.9/tau} + e^{0.2/tau})) = log(1 + e^{-10});
    # float64 because the float32 logsumexp ulp at |12.86| swamps 4.5e-5
    loss = sac_from_similarities(
        t([0.9], torch.float64), [t([0.2], torch.float64)], tau=0.07
    )
    assert float(loss) == pytest.approx(math.log(1.0 + math.exp(-10.0)), rel=1e-5)
    assert float(loss) == pytest.approx(4.54e-5, abs=5e-7)


def test_sac_symmetric_case_ln2():
    loss = sac_from_similarities(t([0.5]), [t([0.5])], tau=0.07)
    assert float(loss) == pytest.approx(math.log(2.0), abs=1e-6)


def test_sac_monotone_in_negative_similarity():
    base = float(sac_from_similarities(t([0.6]), [t([0.3, 0.2])], tau=0.07))
    worse = float(sac_from_similarities(t([0.6]), [t([0.35, 0.2])], tau=0.07))
    assert worse > base


def test_sac_decreases_with_positive_similarity():
    lo = float(sac_from_similarities(t([0.5]), [t([0.4])], tau=0.07))
    hi = float(sac_from_similarities(t([0.6]), [t([0.4])], tau=0.07))
    assert hi < lo


def test_sac_literal_denominator_flag():
    pos, neg = t([0.6]), [t([0.4, 0.3])]
    literal = sac_from_similarities(pos, neg, tau=0.07, literal_denominator=True)
    expected = -0.6 / 0.07 + torch.logsumexp(t([0.4, 0.3]) / 0.07, dim=0)
    assert float(literal) == pytest.approx(float(expected), abs=1e-6)
    # default (InfoNCE) form is nonnegative, literal form here is not
    assert float(sac_from_similarities(pos, neg, tau=0.07)) >= 0.0
    assert float(literal) < 0.0


def test_sac_loss_matches_similarity_form():
    gen = torch.Generator().manual_seed(5)
    anchors = [torch.rand(8, 8, generator=gen) for _ in range(3)]
    positives = [torch.rand(8, 8, generator=gen) for _ in range(3)]
    negatives = [[torch.rand(8, 8, generator=gen) for _ in range(4)] for _ in range(3)]
    got = sac_loss(anchors, positives, negatives, tau=0.07)
    pos_sims = torch.stack(
        [dice_similarity(a, p) for a, p in zip(anchors, positives)]
    )
    neg_sims = [
        torch.stack([dice_similarity(a, n) for n in negs])
        for a, negs in zip(anchors, negatives)
    ]
    want = sac_from_similarities(pos_sims, neg_sims, tau=0.07)
    assert float(got) == pytest.approx(float(want), abs=1e-7)


def test_sac_empty_inputs_raise():
    with pytest.raises(InputError):
        sac_loss([], [], [], tau=0.07)
    a = [torch.rand(4, 4)]
    with pytest.raises(InputError):
        sac_loss(a, a, [[]], tau=0.07)


def test_pac_worked_values():
    target = torch.zeros(16, 16)
    target[2:6, 2:6] = 1
    # identical pair: edge loss 0 -> full margin penalty m = 0.5
    assert float(pac_loss([(target.clone(), target)], m=0.5)) == pytest.approx(0.5)
    # disjoint-edge pair: edge loss ~1 > m -> no penalty
    far = torch.roll(target, shifts=8, dims=1)
    assert float(pac_loss([(far, target)], m=0.5)) == 0.0
    # generic pair equals the recomputed hinge
    pred = torch.zeros(16, 16)
    pred[2:6, 2:7] = 1
    expected = max(0.0, 0.5 - float(edge_dice_loss(pred, target)))
    assert float(pac_loss([(pred, target)], m=0.5)) == pytest.approx(expected, abs=1e-6)


def test_pac_empty_warns_and_returns_zero(caplog):
    with caplog.at_level("WARNING"):
        out = pac_loss([], m=0.5)
    assert float(out) == 0.0
    assert any("pac" in rec.message.lower() for rec in caplog.records)


# ---------------------------------------------------------------------------
# total_generation_loss


def _random_batch(seed=0, with_contrast=True):
    gen = torch.Generator().manual_seed(seed)
    mk = lambda: torch.rand(12, 12, generator=gen)
    kwargs = {}
    if with_contrast:
        pac_gt = (mk() > 0.6).float()
        # near-miss prediction keeps the edge loss under the margin so the
        # pac term stays strictly positive for the ablation checks below
        kwargs = dict(
            sac_anchors=[mk(), mk()],
            sac_positives=[mk(), mk()],
            sac_negatives=[[mk(), mk()], [mk(), mk()]],
            pac_pairs=[(pac_gt * 0.9 + 0.05, pac_gt)],
        )
    return GenerationBatch(
        mask_prob=torch.stack([mk(), mk()]),
        contour_prob=torch.stack([mk(), mk()]),
        mask_target=(torch.stack([mk(), mk()]) > 0.7).float(),
        contour_target=(torch.stack([mk(), mk()]) > 0.7).float(),
        **kwargs,
    )


def test_total_generation_wcon_zero_is_reconstruction():
    batch = _random_batch(1)
    w0 = GenLossWeights(w_con=0.0)
    total = total_generation_loss(batch, w0)
    rec = reconstruction_loss(
        _Outs(batch.mask_prob, batch.contour_prob),
        _Sample(batch.mask_target, batch.contour_target),
        w0,
    )
    assert float(total) == pytest.approx(float(rec), abs=1e-7)


def test_total_generation_term_oracle():
    batch = _random_batch(2)
    total = total_generation_loss(batch, GW)
    terms = generation_loss_terms(batch, GW)
    rec = GW.w_mask * (
        GW.w_dice * terms["mask_dice"]
        + GW.w_bce * terms["mask_bce"]
        + GW.w_edge * terms["mask_edge"]
    ) + GW.w_contour * (
        GW.w_dice * terms["contour_dice"]
        + GW.w_bce * terms["contour_bce"]
        + GW.w_edge * terms["contour_edge"]
    )
    expected = GW.w_rec * rec + GW.w_con * (terms["sac"] + terms["pac"])
    assert float(total) == pytest.approx(float(expected), abs=1e-6)
    assert float(combine_generation_terms(terms, GW)) == pytest.approx(
        float(total), abs=1e-7
    )


def test_generation_ablation_flags_zero_terms():
    batch = _random_batch(3)
    on = generation_loss_terms(batch, GW)
    for flag, keys in [
        ("disable_bce", ("mask_bce", "contour_bce")),
        ("disable_dice", ("mask_dice", "contour_dice")),
        ("disable_edge", ("mask_edge", "contour_edge")),
        ("disable_sac", ("sac",)),
        ("disable_pac", ("pac",)),
    ]:
        terms = generation_loss_terms(batch, GenLossWeights(**{flag: True}))
        for key in keys:
            assert float(terms[key]) == 0.0, (flag, key)
        assert all(float(on[k]) > 0.0 for k in keys), flag


def test_perfect_predictions_zero_total():
    g = torch.zeros(8, 8)
    g[2:6, 2:6] = 1
    batch = GenerationBatch(
        mask_prob=g[None].clone(),
        contour_prob=g[None].clone(),
        mask_target=g[None],
        contour_target=g[None],
    )
    assert float(total_generation_loss(batch, GenLossWeights(w_con=0.0))) == pytest.approx(
        0.0, abs=1e-5
    )


# ---------------------------------------------------------------------------
# varifocal_loss / fppl_loss


def test_vfl_worked_examples():
    # p=0.9, t=0.8: weight = 0.75*sqrt(0.9)*0.2 + 0.8
    loss = varifocal_loss(t(0.9, torch.float64), 0.8, DW)
    weight = 0.75 * 0.9**0.5 * 0.2 + 0.8
    expected = -weight * (0.8 * math.log(0.9) + 0.2 * math.log(0.1))
    assert float(loss) == pytest.approx(expected, abs=1e-9)
    assert float(loss) == pytest.approx(0.5134, abs=1e-4)

    # t=0, p=0.25: weight = 0.375; loss = -0.375*ln(0.75)
    loss = varifocal_loss(t(0.25, torch.float64), 0.0, DW)
    assert float(loss) == pytest.approx(-0.375 * math.log(0.75), abs=1e-9)
    assert float(loss) == pytest.approx(0.1079, abs=1e-4)


def test_vfl_perfect_positive_vanishes():
    assert float(varifocal_loss(t(1.0), 1.0, DW)) == pytest.approx(0.0, abs=1e-6)


def test_vfl_batched_reduction():
    p = t([[0.9, 0.1], [0.2, 0.7]])
    tgt = t([[0.8, 0.0], [0.0, 0.6]])
    per = [
        float(varifocal_loss(p[i, j], float(tgt[i, j]), DW))
        for i in range(2)
        for j in range(2)
    ]
    # summed over classes, averaged over queries
    expected = (per[0] + per[1] + per[2] + per[3]) / 2.0
    assert float(varifocal_loss(p, tgt, DW)) == pytest.approx(expected, rel=1e-6)


def test_fppl_worked_examples():
    assert float(fppl_loss(t([0.5]), DW)) == pytest.approx(
        0.25 * 0.25 * math.log(2.0), abs=1e-9
    )
    assert float(fppl_loss(t([0.9]), DW)) == pytest.approx(
        0.25 * 0.81 * math.log(10.0), rel=1e-5
    )
    assert float(fppl_loss(t([1e-9]), DW)) == pytest.approx(0.0, abs=1e-12)


def test_fppl_strictly_increasing():
    ps = torch.linspace(0.01, 0.99, 50)
    vals = [float(fppl_loss(p.reshape(1), DW)) for p in ps]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_fppl_literal_form_decreases_near_one():
    w = DetLossWeights(fppl_literal_form=True)
    # the published exponent makes confident false positives cheaper, the
    # contradiction that motivated the corrected default
    assert float(fppl_loss(t([0.999]), w)) < float(fppl_loss(t([0.5]), w))


# ---------------------------------------------------------------------------
# bbox_l1_loss / giou_loss


def test_bbox_l1_worked():
    assert float(bbox_l1_loss(t([[0.1, 0.2, 0.3, 0.4]]), t([[0.1, 0.2, 0.3, 0.4]]))) == 0.0
    loss = bbox_l1_loss(t([[0.1, 0.2, 0.3, 0.4]]), t([[0.2, 0.2, 0.3, 0.5]]))
    assert float(loss) == pytest.approx(0.2, abs=1e-7)


def test_bbox_l1_homogeneous():
    a = t([[0.1, 0.2, 0.3, 0.4]])
    b = t([[0.2, 0.3, 0.2, 0.6]])
    base = float(bbox_l1_loss(a, b))
    doubled = float(bbox_l1_loss(a, a + 2 * (b - a)))
    assert doubled == pytest.approx(2 * base, rel=1e-6)
    with pytest.raises(InputError):
        bbox_l1_loss(torch.zeros(2, 4), torch.zeros(3, 4))


def test_giou_worked():
    assert float(giou_loss(t([0.0, 0.0, 2.0, 2.0]), t([0.0, 0.0, 2.0, 2.0]))) == pytest.approx(
        0.0, abs=1e-7
    )
    loss = giou_loss(t([0.0, 0.0, 2.0, 2.0]), t([4.0, 4.0, 6.0, 6.0]))
    assert float(loss) == pytest.approx(16.0 / 9.0, abs=1e-6)
    with pytest.raises(InputError):
        giou_loss(t([0.0, 0.0, 0.0, 2.0]), t([0.0, 0.0, 1.0, 1.0]))


@given(st.lists(st.floats(0.0, 0.9), min_size=8, max_size=8))
@settings(max_examples=60, deadline=None)
def test_giou_range_property(vals):
    a = t([vals[0], vals[1], vals[0] + vals[2] + 0.05, vals[1] + vals[3] + 0.05])
    b = t([vals[4], vals[5], vals[4] + vals[6] + 0.05, vals[5] + vals[7] + 0.05])
    val = float(giou_loss(a, b))
    assert -1e-6 <= val <= 2.0 + 1e-6


# ---------------------------------------------------------------------------
# hungarian_match


def _random_instance(rng, n_q, n_g):
    probs = torch.from_numpy(rng.random((n_q, 3))).float()
    boxes = torch.from_numpy(
        np.concatenate([rng.random((n_q, 2)) * 0.6 + 0.2, rng.random((n_q, 2)) * 0.2 + 0.05], axis=1)
    ).float()
    labels = torch.from_numpy(rng.integers(0, 3, n_g)).long()
    gt_boxes = torch.from_numpy(
        np.concatenate([rng.random((n_g, 2)) * 0.6 + 0.2, rng.random((n_g, 2)) * 0.2 + 0.05], axis=1)
    ).float()
    return probs, boxes, labels, gt_boxes


def _brute_force_cost(cost):
    q, g = cost.shape
    best = math.inf
    for perm in itertools.permutations(range(q), g):
        total = sum(cost[perm[j], j] for j in range(g))
        best = min(best, float(total))
    return best


def test_hungarian_zero_gts():
    probs, boxes, _, _ = _random_instance(np.random.default_rng(0), 4, 2)
    qi, gi = hungarian_match(probs, boxes, torch.zeros(0, dtype=torch.long), torch.zeros(0, 4), DW)
    assert qi.numel() == 0 and gi.numel() == 0


def test_hungarian_matches_bruteforce():
    rng = np.random.default_rng(42)
    for _ in range(40):
        n_g = int(rng.integers(1, 6))
        n_q = int(rng.integers(n_g, 7))
        probs, boxes, labels, gt_boxes = _random_instance(rng, n_q, n_g)
        cost = match_cost_matrix(probs, boxes, labels, gt_boxes, DW)
        qi, gi = hungarian_match(probs, boxes, labels, gt_boxes, DW)
        got = float(cost[qi, gi].sum())
        assert got == pytest.approx(_brute_force_cost(cost.numpy()), abs=1e-5)
        assert len(set(qi.tolist())) == n_g  # one-to-one


def test_hungarian_gt_permutation_invariant():
    rng = np.random.default_rng(7)
    probs, boxes, labels, gt_boxes = _random_instance(rng, 6, 4)
    cost = match_cost_matrix(probs, boxes, labels, gt_boxes, DW)
    qi, gi = hungarian_match(probs, boxes, labels, gt_boxes, DW)
    base_cost = float(cost[qi, gi].sum())
    perm = torch.tensor([2, 0, 3, 1])
    qi2, gi2 = hungarian_match(probs, boxes, labels[perm], gt_boxes[perm], DW)
    cost2 = match_cost_matrix(probs, boxes, labels[perm], gt_boxes[perm], DW)
    assert float(cost2[qi2, gi2].sum()) == pytest.approx(base_cost, abs=1e-6)


def test_hungarian_too_many_gts():
    probs, boxes, labels, gt_boxes = _random_instance(np.random.default_rng(1), 3, 3)
    with pytest.raises(InputError):
        hungarian_match(probs[:2], boxes[:2], labels, gt_boxes, DW)


# ---------------------------------------------------------------------------
# total_detection_loss


def test_detection_perfect_predictions():
    gt_boxes = t([[0.3, 0.3, 0.2, 0.2], [0.7, 0.6, 0.1, 0.3]])
    labels = torch.tensor([0, 2])
    probs = torch.zeros(4, 3)
    probs[0, 0] = 1.0
    probs[1, 2] = 1.0
    boxes = torch.zeros(4, 4)
    boxes[0] = gt_boxes[0]
    boxes[1] = gt_boxes[1]
    boxes[2:] = t([0.5, 0.5, 0.1, 0.1])
    loss = total_detection_loss(probs, boxes, labels, gt_boxes, DW)
    assert float(loss) == pytest.approx(0.0, abs=1e-5)


def test_detection_term_oracle():
    rng = np.random.default_rng(11)
    probs, boxes, labels, gt_boxes = _random_instance(rng, 6, 3)
    total = total_detection_loss(probs, boxes, labels, gt_boxes, DW)
    terms = detection_loss_terms(probs, boxes, labels, gt_boxes, DW)
    expected = (
        DW.w_vfl * terms["vfl"]
        + DW.w_fppl * terms["fppl"]
        + DW.w_bbox * terms["bbox"]
        + DW.w_giou * terms["giou"]
    )
    assert float(total) == pytest.approx(float(expected), abs=1e-6)

    # independent recomputation of the regression terms from the assignment
    qi, gi = hungarian_match(probs, boxes, labels, gt_boxes, DW)
    l1 = float((boxes[qi] - gt_boxes[gi]).abs().sum(-1).mean())
    assert float(terms["bbox"]) == pytest.approx(l1, abs=1e-6)
    g = float(giou_loss(cxcywh_to_xyxy(boxes[qi]), cxcywh_to_xyxy(gt_boxes[gi])).mean())
    assert float(terms["giou"]) == pytest.approx(g, abs=1e-6)


def test_detection_fppl_ablation():
    rng = np.random.default_rng(13)
    probs, boxes, labels, gt_boxes = _random_instance(rng, 5, 2)
    off = detection_loss_terms(probs, boxes, labels, gt_boxes, DetLossWeights(disable_fppl=True))
    assert float(off["fppl"]) == 0.0
    on = detection_loss_terms(probs, boxes, labels, gt_boxes, DW)
    assert float(on["fppl"]) > 0.0
    # w_fppl = 0 removes the term from the total without touching others
    w0 = DetLossWeights(w_fppl=0.0)
    t0 = total_detection_loss(probs, boxes, labels, gt_boxes, w0)
    expected = (
        DW.w_vfl * on["vfl"] + DW.w_bbox * on["bbox"] + DW.w_giou * on["giou"]
    )
    assert float(t0) == pytest.approx(float(expected), abs=1e-6)


def test_detection_class_and_box_ablation_forms():
    rng = np.random.default_rng(17)
    probs, boxes, labels, gt_boxes = _random_instance(rng, 5, 2)
    focal = detection_loss_terms(
        probs, boxes, labels, gt_boxes, DetLossWeights(class_loss="focal")
    )
    vfl = detection_loss_terms(probs, boxes, labels, gt_boxes, DW)
    assert float(focal["vfl"]) != pytest.approx(float(vfl["vfl"]), abs=1e-9)
    iou_only = detection_loss_terms(
        probs, boxes, labels, gt_boxes, DetLossWeights(box_loss="iou_only")
    )
    assert float(iou_only["bbox"]) == 0.0
    qi, gi = hungarian_match(probs, boxes, labels, gt_boxes, DW)
    expected = float(
        (1.0 - box_iou(cxcywh_to_xyxy(boxes[qi]), cxcywh_to_xyxy(gt_boxes[gi]))).mean()
    )
    assert float(iou_only["giou"]) == pytest.approx(expected, abs=1e-6)


def test_detection_losses_nonnegative_finite():
    rng = np.random.default_rng(23)
    for _ in range(10):
        probs, boxes, labels, gt_boxes = _random_instance(rng, 6, int(rng.integers(0, 5)))
        terms = detection_loss_terms(probs, boxes, labels, gt_boxes, DW)
        for key, val in terms.items():
            v = float(val)
            assert math.isfinite(v) and v >= 0.0, key
