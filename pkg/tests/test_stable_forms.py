import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_gl6, seeds
from g2lab.errors import NotDefinite
from g2lab.exterior import AltForm, extend, interior, label_slot, pullback, two_form_rank
from g2lab.stable_forms import (
    Orbit,
    almost_complex,
    g2_bilinear,
    g2_metric_volume,
    hitchin_lambda,
    is_definite6,
    is_definite7,
    normal_form_phi0,
    normal_form_psi0,
    reference_volume,
)

SPLIT = AltForm.from_terms(6, 3, {("v1", "v2", "v3"): 1, ("w1", "w2", "w3"): 1})
V123 = AltForm.from_terms(6, 3, {("v1", "v2", "v3"): 1})


def test_psi0_printed_monomials():
    psi = normal_form_psi0()
    assert psi.coefficient(*map(label_slot, ("w1", "w2", "w3"))) == -1.0
    expected = AltForm.from_terms(
        6, 3,
        {("w1", "w2", "w3"): -1, ("w1", "v2", "v3"): 1, ("w2", "v3", "v1"): 1, ("w3", "v1", "v2"): 1},
    )
    assert psi.allclose(expected, atol=0)


def test_phi0_coefficient():
    phi = normal_form_phi0()
    assert phi.coefficient(*map(label_slot, ("w1", "v0", "v1"))) == 1.0


def test_lambda_anchors():
    assert hitchin_lambda(normal_form_psi0()).lam == pytest.approx(-1.0, abs=1e-12)
    split = hitchin_lambda(SPLIT)
    assert split.verdict is Orbit.OTHER_OPEN and split.lam > 0
    deg = hitchin_lambda(V123)
    assert deg.verdict is Orbit.DEGENERATE and deg.lam == 0.0


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0.2, 3.0))
def test_lambda_scaling(seed, t):
    rng = np.random.default_rng(seed)
    psi = AltForm(6, 3, rng.normal(size=20))
    lam = hitchin_lambda(psi).lam
    assert hitchin_lambda(t * psi).lam == pytest.approx(t**4 * lam, rel=1e-9, abs=1e-12)
    vol2 = t * reference_volume(6)
    assert hitchin_lambda(psi, vol2).lam == pytest.approx(lam / t**2, rel=1e-9, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_lambda_is_relative_invariant(seed):
    rng = np.random.default_rng(seed)
    g = random_gl6(rng)
    psi = AltForm(6, 3, rng.normal(size=20))
    lam = hitchin_lambda(psi).lam
    assert hitchin_lambda(pullback(psi, g)).lam == pytest.approx(
        np.linalg.det(g) ** 2 * lam, rel=1e-8, abs=1e-10
    )


def test_exact_definiteness_anchors():
    assert is_definite6(normal_form_psi0())
    assert not is_definite6(AltForm.zero(6, 3))
    assert not is_definite6(SPLIT)


def test_sampled_split_form_has_rank_two_witness():
    res = is_definite6(SPLIT, "sampled", seed=1)
    assert not res.definite and res.witness_rank == 2
    assert two_form_rank(interior(res.witness, SPLIT), eps=1e-9) == 2
    # the direction named for this form: d/dv1 contracts to v2 ^ v3
    v1 = np.eye(6)[label_slot("v1")]
    assert two_form_rank(interior(v1, SPLIT)) == 2


def test_sampled_needs_seed():
    with pytest.raises(ValueError):
        is_definite6(normal_form_psi0(), "sampled")


def test_sampled_is_deterministic():
    psi = AltForm(6, 3, np.random.default_rng(3).normal(size=20))
    a = is_definite6(psi, "sampled", seed=11)
    b = is_definite6(psi, "sampled", seed=11)
    assert a.definite == b.definite
    if a.witness is not None:
        assert np.array_equal(a.witness, b.witness)


def test_sampled_definite_on_psi0():
    assert is_definite6(normal_form_psi0(), "sampled", seed=0).definite


def test_almost_complex_on_psi0():
    J = almost_complex(normal_form_psi0())
    for j in (1, 2, 3):
        v, w = label_slot(f"v{j}"), label_slot(f"w{j}")
        assert np.allclose(J[:, v], np.eye(6)[w], atol=1e-12)
        assert np.allclose(J[:, w], -np.eye(6)[v], atol=1e-12)


def _random_definite(rng):
    return pullback(normal_form_psi0(), random_gl6(rng))


def test_almost_complex_squares_to_minus_one(rng):
    for _ in range(100):
        J = almost_complex(_random_definite(rng))
        assert np.allclose(J @ J, -np.eye(6), atol=1e-9)


def test_almost_complex_equivariance(rng):
    psi = normal_form_psi0()
    J = almost_complex(psi)
    for _ in range(100):
        g = random_gl6(rng)
        Jg = almost_complex(pullback(psi, g))
        assert np.allclose(Jg, np.linalg.inv(g) @ J @ g, atol=1e-9)


def test_almost_complex_rejects_split():
    with pytest.raises(NotDefinite):
        almost_complex(SPLIT)


def test_bilinear_anchors():
    b = g2_bilinear(normal_form_phi0())
    assert np.allclose(b, 6 * np.eye(7), atol=1e-12)
    assert np.allclose(g2_bilinear(2 * normal_form_phi0()), 8 * b, atol=1e-12)
    assert abs(np.linalg.det(g2_bilinear(extend(V123)))) < 1e-12


def test_metric_volume_of_phi0():
    data = g2_metric_volume(normal_form_phi0())
    assert np.allclose(data.metric, np.eye(7), atol=1e-12)
    assert data.volume == pytest.approx(1.0, abs=1e-12)
    assert data.orientation == 1


@pytest.mark.parametrize("t", [0.5, 2.0, 3.0])
def test_metric_scaling(t):
    data = g2_metric_volume(t * normal_form_phi0())
    assert data.volume == pytest.approx(t ** (7 / 3), rel=1e-12)
    assert np.allclose(data.metric, t ** (2 / 3) * np.eye(7), atol=1e-12)


def test_metric_equivariance(rng):
    phi = normal_form_phi0()
    for _ in range(20):
        g = np.eye(7) + 0.2 * rng.normal(size=(7, 7))
        if np.linalg.det(g) < 0:
            g[0] *= -1
        data = g2_metric_volume(pullback(phi, g))
        assert np.allclose(data.metric, g.T @ g, atol=1e-9)
        assert data.volume == pytest.approx(np.linalg.det(g), rel=1e-9)


def test_reversed_orientation_is_flagged():
    flip = np.diag([1, 1, 1, 1, 1, 1, -1.0])
    data = g2_metric_volume(pullback(normal_form_phi0(), flip))
    assert data.orientation == -1
    assert np.allclose(data.metric, np.eye(7), atol=1e-12)


def test_degenerate_7form_is_not_definite():
    with pytest.raises(NotDefinite):
        g2_metric_volume(extend(V123))
    assert not is_definite7(extend(V123))
    assert is_definite7(normal_form_phi0())
