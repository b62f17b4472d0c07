import numpy as np
import pytest
from hypothesis import given, settings

from conftest import random_frame, random_rotation, seeds
from g2lab.errors import FiberNonVanishing, NonHorizontalCurvature, NotDefinite, NotInPencil
from g2lab.exterior import AltForm, format_form, pullback
from g2lab.homogeneous import ModelAlgebra, curvature, levi_civita, torsion
from g2lab.invariant_forms import (
    MU,
    InvariantTriple,
    assemble_omega,
    assemble_psi,
    closedness_residual,
    curvature_from_forms,
    decompose_omega,
    decompose_psi,
    is_one_one,
    slice_d,
    torsion_form,
)
from g2lab.stable_forms import Orbit, hitchin_lambda, normal_form_psi0

SU2 = ModelAlgebra.preset("su2")
ABELIAN = ModelAlgebra.preset("abelian")


def random_triple(rng, alg, levi=False):
    E = random_frame(rng)
    A = levi_civita(E, alg) if levi else rng.normal(scale=0.5, size=(3, 3))
    return InvariantTriple(float(rng.uniform(0.2, 3.0)), A, E, alg)


def test_identity_triple():
    psi = assemble_psi(InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), ABELIAN))
    assert format_form(psi) == "-1*s1^s2^s3 +1*s1^m2^m3 -1*s2^m1^m3 +1*s3^m1^m2"


def test_identity_triple_matches_normal_form_pattern():
    # e <-> w and a <-> v carry psi to psi0
    psi = assemble_psi(InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), ABELIAN))
    assert np.array_equal(psi.coeffs, normal_form_psi0().coeffs)


def test_assembled_forms_are_definite_and_fiber_free(rng, preset):
    for _ in range(20):
        psi = assemble_psi(random_triple(rng, preset))
        assert hitchin_lambda(psi).verdict is Orbit.DEFINITE
        assert psi.coefficient(*MU) == 0.0


def test_decompose_exact_recovery():
    t = InvariantTriple(2.0, 0.5 * np.eye(3), 3 * np.eye(3), SU2)
    back = decompose_psi(assemble_psi(t), SU2)
    assert back.f == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(back.A, t.A, atol=1e-12)
    assert np.allclose(back.E, t.E, atol=1e-12)


def test_decompose_identity_triple():
    psi = assemble_psi(InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), ABELIAN))
    back = decompose_psi(psi, ABELIAN)
    assert back.f == pytest.approx(1.0)
    assert np.allclose(back.A, 0, atol=1e-14) and np.allclose(back.E, np.eye(3))


def test_fiber_term_rejected():
    psi = assemble_psi(InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), ABELIAN))
    with pytest.raises(FiberNonVanishing):
        decompose_psi(psi + 0.1 * AltForm.basis(6, *MU), ABELIAN)


def test_non_definite_rejected():
    split = AltForm.from_terms(6, 3, {("s1", "s2", "s3"): 1, ("s1", "m2", "m3"): 1})
    with pytest.raises(NotDefinite):
        decompose_psi(split, ABELIAN)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_psi_round_trip(seed):
    rng = np.random.default_rng(seed)
    t = random_triple(rng, SU2)
    back = decompose_psi(assemble_psi(t), SU2)
    assert np.max(np.abs(assemble_psi(back).coeffs - assemble_psi(t).coeffs)) <= 1e-12
    assert np.allclose(back.A, t.A, atol=1e-10) and np.allclose(back.E, t.E, atol=1e-10)


def test_omega_identity():
    t = InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), ABELIAN)
    expected = AltForm.from_terms(6, 2, {("m1", "s1"): 1, ("m2", "s2"): 1, ("m3", "s3"): 1})
    assert assemble_omega(np.eye(3), t).allclose(expected)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_omega_round_trip(seed):
    rng = np.random.default_rng(seed)
    t = random_triple(rng, SU2)
    K = rng.normal(size=(3, 3))
    assert np.allclose(decompose_omega(assemble_omega(K, t), t), K, atol=1e-10)


def test_omega_outside_pencil():
    t = InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), ABELIAN)
    with pytest.raises(NotInPencil):
        decompose_omega(AltForm.basis(6, 0, 1), t)


def test_one_one_anchors(rng):
    t = InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), ABELIAN)
    psi = assemble_psi(t)
    assert is_one_one(assemble_omega(np.eye(3), t), psi)
    N = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0.0]])
    assert not is_one_one(assemble_omega(N, t), psi)
    assert is_one_one(AltForm.zero(6, 2), psi)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_one_one_iff_symmetric(seed):
    rng = np.random.default_rng(seed)
    t = random_triple(rng, SU2)
    S = rng.normal(size=(3, 3))
    S = S + S.T
    N = rng.normal(size=(3, 3))
    N = N - N.T
    psi = assemble_psi(t)
    assert is_one_one(assemble_omega(S, t), psi)
    assert not is_one_one(assemble_omega(S + N, t), psi)


def test_maurer_cartan_signs():
    # base: d sigma^1 = -sigma^23 on su2; fiber: d mu^1 = +mu^23 (see decisions ledger)
    assert format_form(slice_d(AltForm.basis(6, 0), SU2)) == "-1*s2^s3"
    assert format_form(slice_d(AltForm.basis(6, 3), SU2)) == "+1*m2^m3"


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_d_squared_vanishes(seed):
    rng = np.random.default_rng(seed)
    for alg in (SU2, ModelAlgebra.preset("sl2r"), ModelAlgebra.preset("heisenberg")):
        for k in range(0, 5):
            n = len(AltForm.zero(6, k).coeffs)
            a = AltForm(6, k, rng.normal(size=n))
            assert slice_d(slice_d(a, alg), alg).norm <= 1e-12 * max(1.0, a.norm)


def test_d_is_a_derivation(rng):
    a = AltForm(6, 1, rng.normal(size=6))
    b = AltForm(6, 2, rng.normal(size=15))
    lhs = slice_d(a ^ b, SU2)
    rhs = (slice_d(a, SU2) ^ b) - (a ^ slice_d(b, SU2))
    assert lhs.allclose(rhs, atol=1e-12)


def test_closedness_anchors():
    assert closedness_residual(InvariantTriple(1.0, 0.5 * np.eye(3), np.eye(3), SU2)) < 1e-14
    assert closedness_residual(InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), ABELIAN)) == 0.0
    assert closedness_residual(InvariantTriple(1.0, np.zeros((3, 3)), np.eye(3), SU2)) > 0.1


def test_closed_iff_levi_civita(rng, preset):
    for _ in range(5):
        t = random_triple(rng, preset, levi=True)
        assert closedness_residual(t) <= 1e-12 * max(1.0, assemble_psi(t).norm)
        bad = InvariantTriple(t.f, t.A + 0.1 * rng.normal(size=(3, 3)), t.E, preset)
        assert closedness_residual(bad) > 1e-4


def test_closedness_independent_of_f(rng):
    E = random_frame(rng)
    A = levi_civita(E, SU2)
    for f in (0.1, 1.0, 7.0):
        assert closedness_residual(InvariantTriple(f, A, E, SU2)) < 1e-12


def test_torsion_form_matches_matrix(rng, preset):
    t = random_triple(rng, preset)
    T = torsion(t.A, t.E, preset)
    forms = torsion_form(t)
    for i in range(3):
        got = [forms[i].coefficient(1, 2), forms[i].coefficient(2, 0), forms[i].coefficient(0, 1)]
        assert np.allclose(got, T[i], atol=1e-12)
        assert forms[i].norm == pytest.approx(np.max(np.abs(T[i])), abs=1e-12)


def test_curvature_forms_match_matrix(rng, preset):
    E = random_frame(rng)
    A = levi_civita(E, preset)
    assert np.allclose(curvature_from_forms(A, E, preset), curvature(A, E, preset), atol=1e-10)


def test_arbitrary_connection_curvature_is_horizontal(rng):
    # invariance under the fiber action leaves only sigma-sigma components
    A = rng.normal(size=(3, 3))
    curvature_from_forms(A, np.eye(3), SU2)


def test_curvature_detects_fiber_components(monkeypatch):
    import g2lab.invariant_forms as inv

    original = inv.curvature_forms

    def leaky(A, alg):
        forms = original(A, alg)
        forms[0] = forms[0] + 1e-3 * AltForm.basis(6, 0, 3)
        return forms

    monkeypatch.setattr(inv, "curvature_forms", leaky)
    with pytest.raises(NonHorizontalCurvature):
        inv.curvature_from_forms(np.zeros((3, 3)), np.eye(3), SU2)


def test_gauge_is_fiber_pullback(rng):
    t = random_triple(rng, SU2, levi=True)
    R = random_rotation(rng)
    g = np.eye(6)
    g[3:, 3:] = R.T
    assert pullback(assemble_psi(t), g).allclose(assemble_psi(t.gauge(R)), atol=1e-12)
    assert closedness_residual(t.gauge(R)) < 1e-12


def test_triple_validation():
    with pytest.raises(ValueError):
        InvariantTriple(0.0, np.zeros((3, 3)), np.eye(3), SU2)
    with pytest.raises(ValueError):
        InvariantTriple(1.0, np.zeros((3, 3)), -np.eye(3), SU2)
