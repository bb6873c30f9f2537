import math

import numpy as np
import pytest

from conftest import assert_grad_close, central_difference, random_orthogonal
from coview.losses import (
    LossBreakdown,
    LossConfig,
    cot_loss,
    instance_loss,
    l2_normalize,
    sim,
    total_loss,
)


def naive_instance_loss(clean, augmented, tau, include_positive=False):
    """Per-sample double loop straight off the printed formula."""
    b = clean.shape[0]
    total = 0.0
    for i in range(b):
        pos = math.exp(sim(clean[i], augmented[i]) / tau)
        denom = sum(
            math.exp(sim(clean[i], clean[k]) / tau) for k in range(b) if k != i
        )
        if include_positive:
            denom += pos
        total += -math.log(pos / denom)
    return total


def naive_cot_loss(emb, selected, protos, valid_mask, tau_proto):
    total = 0.0
    for i in range(emb.shape[0]):
        pos = math.exp(sim(emb[i], selected[i]) / tau_proto)
        denom = sum(
            math.exp(sim(emb[i], protos[j]) / tau_proto)
            for j in range(protos.shape[0])
            if valid_mask[j]
        )
        total += -math.log(pos / denom)
    return total


# ---------------------------------------------------------------------------
# sim


def test_sim_trivials():
    u = np.array([3.0, 4.0])
    assert sim(u, u) == pytest.approx(1.0, abs=1e-12)
    assert sim(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert sim(u, -u) == pytest.approx(-1.0, abs=1e-12)


def test_sim_degenerate_input():
    with pytest.raises(ValueError, match="degenerate embedding"):
        sim(np.zeros(3), np.ones(3))


def test_l2_normalize_rows():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 4))
    out = l2_normalize(x)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, rtol=1e-12)


# ---------------------------------------------------------------------------
# instance_loss


def test_instance_loss_orthonormal_pair_exact():
    clean = np.eye(2)
    value, _, _ = instance_loss(clean, clean.copy(), tau=1.0)
    assert value == -2.0


def test_instance_loss_orthonormal_pair_with_positive_in_denominator():
    clean = np.eye(2)
    value, _, _ = instance_loss(clean, clean.copy(), tau=1.0, include_positive=True)
    assert value == pytest.approx(2.0 * (math.log(1.0 + math.e) - 1.0), abs=1e-12)


def test_instance_loss_matches_naive_oracle():
    rng = np.random.default_rng(1)
    for trial in range(5):
        clean = rng.standard_normal((4, 3))
        augmented = rng.standard_normal((4, 3))
        for include in (False, True):
            value, _, _ = instance_loss(clean, augmented, tau=0.1, include_positive=include)
            want = naive_instance_loss(clean, augmented, 0.1, include_positive=include)
            assert value == pytest.approx(want, abs=1e-10)


def test_instance_loss_permutation_invariant():
    rng = np.random.default_rng(2)
    clean = rng.standard_normal((6, 4))
    augmented = rng.standard_normal((6, 4))
    v0, _, _ = instance_loss(clean, augmented, tau=0.2)
    perm = rng.permutation(6)
    v1, _, _ = instance_loss(clean[perm], augmented[perm], tau=0.2)
    assert v1 == pytest.approx(v0, abs=1e-10)


def test_instance_loss_rotation_invariant():
    rng = np.random.default_rng(3)
    clean = rng.standard_normal((5, 4))
    augmented = rng.standard_normal((5, 4))
    rot = random_orthogonal(4, seed=4)
    v0, _, _ = instance_loss(clean, augmented, tau=0.1)
    v1, _, _ = instance_loss(clean @ rot, augmented @ rot, tau=0.1)
    assert v1 == pytest.approx(v0, abs=1e-8)


def test_instance_loss_row_scale_invariant():
    rng = np.random.default_rng(5)
    clean = rng.standard_normal((4, 3))
    augmented = rng.standard_normal((4, 3))
    scales = rng.uniform(0.1, 10.0, size=(4, 1))
    v0, _, _ = instance_loss(clean, augmented, tau=0.1)
    v1, _, _ = instance_loss(clean * scales, augmented, tau=0.1)
    assert v1 == pytest.approx(v0, abs=1e-10)


def test_instance_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    clean = rng.standard_normal((4, 3))
    augmented = rng.standard_normal((4, 3))
    for include in (False, True):
        _, grad_c, grad_a = instance_loss(clean, augmented, tau=0.1, include_positive=include)
        fd_c = central_difference(
            lambda x: instance_loss(x, augmented, 0.1, include_positive=include)[0], clean
        )
        fd_a = central_difference(
            lambda x: instance_loss(clean, x, 0.1, include_positive=include)[0], augmented
        )
        assert_grad_close(grad_c, fd_c)
        assert_grad_close(grad_a, fd_a)


def test_instance_loss_small_temperature_no_overflow():
    rng = np.random.default_rng(7)
    clean = rng.standard_normal((8, 5))
    augmented = rng.standard_normal((8, 5))
    value, grad_c, grad_a = instance_loss(clean, augmented, tau=0.01)
    assert math.isfinite(value)
    assert np.all(np.isfinite(grad_c)) and np.all(np.isfinite(grad_a))


def test_instance_loss_batch_too_small():
    one = np.ones((1, 3))
    with pytest.raises(ValueError, match="instance loss requires at least 2 samples per batch"):
        instance_loss(one, one, tau=0.1)


def test_instance_loss_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        instance_loss(np.ones((2, 3)), np.ones((3, 3)), tau=0.1)


# ---------------------------------------------------------------------------
# cot_loss


def test_cot_loss_orthogonal_prototype_fixture():
    # emb_i equals its selected prototype, the other prototype orthogonal,
    # tau 1: each term is -log(e / (e + 1)).
    protos = np.eye(2)
    emb = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    selected = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    value, _ = cot_loss(emb, selected, protos, np.array([True, True]), tau_proto=1.0)
    per_term = math.log(1.0 + math.e) - 1.0
    assert value == pytest.approx(3 * per_term, abs=1e-12)


def test_cot_loss_single_prototype_is_zero():
    rng = np.random.default_rng(8)
    emb = rng.standard_normal((5, 3))
    proto = rng.standard_normal((1, 3))
    selected = np.repeat(proto, 5, axis=0)
    value, grad = cot_loss(emb, selected, proto, np.array([True]), tau_proto=0.5)
    assert value == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(grad, 0.0, atol=1e-12)


def test_cot_loss_matches_naive_oracle():
    rng = np.random.default_rng(9)
    for trial in range(5):
        emb = rng.standard_normal((4, 3))
        protos = rng.standard_normal((5, 3))
        valid = np.array([True, True, False, True, True])
        pick = rng.choice(np.flatnonzero(valid), size=4)
        selected = protos[pick]
        value, _ = cot_loss(emb, selected, protos, valid, tau_proto=0.7)
        want = naive_cot_loss(emb, selected, protos, valid, 0.7)
        assert value == pytest.approx(want, abs=1e-10)


def test_cot_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(10)
    emb = rng.standard_normal((4, 3))
    protos = rng.standard_normal((3, 3))
    selected = protos[[0, 2, 1, 0]]
    valid = np.array([True, True, True])
    _, grad = cot_loss(emb, selected, protos, valid, tau_proto=0.5)
    fd = central_difference(
        lambda x: cot_loss(x, selected, protos, valid, 0.5)[0], emb
    )
    assert_grad_close(grad, fd)


def test_cot_loss_joint_rotation_invariant():
    rng = np.random.default_rng(11)
    emb = rng.standard_normal((4, 5))
    protos = rng.standard_normal((3, 5))
    selected = protos[[0, 1, 2, 1]]
    valid = np.ones(3, dtype=bool)
    rot = random_orthogonal(5, seed=12)
    v0, _ = cot_loss(emb, selected, protos, valid, 1.0)
    v1, _ = cot_loss(emb @ rot, selected @ rot, protos @ rot, valid, 1.0)
    assert v1 == pytest.approx(v0, abs=1e-8)


def test_cot_loss_decreases_toward_prototype():
    rng = np.random.default_rng(13)
    protos = l2_normalize(rng.standard_normal((4, 6)))
    emb0 = rng.standard_normal(6)
    target = protos[2]
    valid = np.ones(4, dtype=bool)

    def at(t):
        point = l2_normalize(((1 - t) * emb0 + t * target)[None, :])
        value, _ = cot_loss(point, target[None, :], protos, valid, 1.0)
        return value

    assert at(0.4) < at(0.0)
    assert at(0.8) < at(0.4)


def test_cot_loss_empty_valid_set():
    emb = np.ones((2, 3))
    protos = np.ones((2, 3))
    with pytest.raises(ValueError, match="empty valid set"):
        cot_loss(emb, protos, protos, np.array([False, False]), 1.0)


def test_cot_loss_multi_way_sum_is_additive():
    rng = np.random.default_rng(14)
    emb = rng.standard_normal((4, 3))
    protos_a = rng.standard_normal((2, 3))
    protos_b = rng.standard_normal((4, 3))
    sel_a = protos_a[[0, 1, 0, 1]]
    sel_b = protos_b[[0, 1, 2, 3]]
    va, vb = np.ones(2, dtype=bool), np.ones(4, dtype=bool)
    a, _ = cot_loss(emb, sel_a, protos_a, va, 1.0)
    b, _ = cot_loss(emb, sel_b, protos_b, vb, 1.0)
    combined = a + b
    assert combined == pytest.approx(
        naive_cot_loss(emb, sel_a, protos_a, va, 1.0)
        + naive_cot_loss(emb, sel_b, protos_b, vb, 1.0),
        abs=1e-10,
    )


# ---------------------------------------------------------------------------
# total_loss


def test_total_loss_combines_parts():
    out = total_loss(1.0, 1.0, 1.0, 1.0, lam=1.0)
    assert out.total == 4.0
    out = total_loss(2.0, 3.0, 10.0, 10.0, lam=0.0)
    assert out.total == 5.0


def test_total_loss_breakdown_invariant():
    rng = np.random.default_rng(15)
    for trial in range(20):
        parts = rng.standard_normal(4)
        lam = float(rng.uniform(0, 2))
        out = total_loss(*parts, lam=lam)
        want = parts[0] + parts[1] + lam * (parts[2] + parts[3])
        assert abs(out.total - want) < 1e-10


def test_total_loss_names_non_finite_term():
    with pytest.raises(ValueError, match="cot_g"):
        total_loss(1.0, 1.0, 1.0, float("nan"), lam=1.0)
    with pytest.raises(ValueError, match="inst_h"):
        total_loss(float("inf"), 1.0, 1.0, 1.0, lam=1.0)


def test_loss_config_validation():
    with pytest.raises(ValueError, match="tau"):
        LossConfig(tau=0.0)
    with pytest.raises(ValueError, match="lam"):
        LossConfig(lam=-0.1)
    with pytest.raises(ValueError, match="tau_proto"):
        LossConfig(tau_proto=-1.0)
    cfg = LossConfig()
    assert cfg.tau == 0.1 and cfg.tau_proto == 1.0


def test_loss_breakdown_fields():
    out = total_loss(0.5, 0.25, 0.125, 0.0625, lam=2.0)
    assert isinstance(out, LossBreakdown)
    assert out.total == pytest.approx(0.5 + 0.25 + 2.0 * (0.125 + 0.0625), abs=1e-12)
