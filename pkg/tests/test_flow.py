import numpy as np
import pytest

from conftest import random_frame, random_rotation
from g2lab.errors import NonPositiveF, PolicyViolation, TooFewRecords
from g2lab.flow import (
    TRACE_COLUMNS,
    FlowState,
    FlowTrace,
    KPolicy,
    assemble_phi,
    dphi_residual,
    flow_rhs,
    gate,
    integrate,
    read_trace_csv,
    volume_monotone,
    write_trace_csv,
)
from g2lab.homogeneous import ModelAlgebra
from g2lab.stable_forms import g2_metric_volume

SU2 = ModelAlgebra.preset("su2")
ABELIAN = ModelAlgebra.preset("abelian")
I3 = np.eye(3)


def flat_torus(steps=100):
    return integrate(FlowState(0.0, I3, 1.0), KPolicy.constant(0.1 * I3), ABELIAN, 0.0, 1.0, steps)


def test_rhs_abelian():
    dE, df = flow_rhs(FlowState(0.0, I3, 1.0), 0.1 * I3, ABELIAN)
    assert np.allclose(dE, 0.1 * I3) and df == pytest.approx(-0.3)


@pytest.mark.parametrize("c,k", [(1.0, 0.1), (0.5, 0.2), (2.0, 0.05)])
def test_rhs_su2(c, k):
    _, df = flow_rhs(FlowState(0.0, c * I3, 1.0), k * I3, SU2)
    assert df == pytest.approx(-3 * k + 3 * k / (4 * c * c), abs=1e-14)


def test_rhs_zero_K():
    dE, df = flow_rhs(FlowState(0.0, I3, 1.0), np.zeros((3, 3)), SU2)
    assert np.array_equal(dE, np.zeros((3, 3))) and df == 0.0


def test_flat_torus_closed_form():
    tr = flat_torus()
    assert abs(tr.f[-1] - np.exp(-0.3)) <= 1e-9
    assert abs(np.linalg.det(tr.E[-1]) - np.exp(0.3)) <= 1e-9


def test_fourth_order_convergence():
    # a stiffer version so the error sits well above round-off
    pol = KPolicy.constant(2.0 * I3)
    err = []
    for steps in (100, 200):
        tr = integrate(FlowState(0.0, I3, 1.0), pol, ABELIAN, 0.0, 1.0, steps)
        err.append(abs(tr.f[-1] - np.exp(-6.0)))
    assert 14 <= err[0] / err[1] <= 18


def test_gate_rejects_at_first_stage():
    K = np.diag([0.1, 0.1, -0.01])
    with pytest.raises(PolicyViolation) as info:
        integrate(FlowState(0.0, I3, 1.0), KPolicy.constant(K), ABELIAN, 0.0, 1.0, 10)
    assert info.value.witness["t"] == 0.0
    assert info.value.witness["min_eigenvalue"] == pytest.approx(-0.01)
    assert info.value.condition == "positive-symmetric-K"


def test_gate_catches_late_violation():
    pol = KPolicy.polynomial([0.1 * I3, -0.2 * I3])
    with pytest.raises(PolicyViolation) as info:
        integrate(FlowState(0.0, I3, 1.0), pol, ABELIAN, 0.0, 1.0, 10)
    assert 0.4 <= info.value.witness["t"] <= 0.5


def test_gate_threshold():
    gate(0.01 * I3, 0.0, kappa_min=1e-3)
    with pytest.raises(PolicyViolation):
        gate(0.01 * I3, 0.0, kappa_min=0.1)


def test_nonpositive_f_raises():
    # on sl2r with E = Id, tr(K G) = 1.25 > 0 pushes f down
    with pytest.raises(NonPositiveF):
        integrate(FlowState(0.0, I3, 0.1), KPolicy.constant(I3), ModelAlgebra.preset("sl2r"),
                  0.0, 1.0, 50)


def test_phi_is_definite_and_positive(rng):
    for _ in range(10):
        E = random_frame(rng)
        Q = random_rotation(rng)
        K = Q @ np.diag(rng.uniform(0.05, 1.0, 3)) @ Q.T + 0.3 * np.array(
            [[0, -1, 0], [1, 0, 0], [0, 0, 0.0]]
        )
        data = g2_metric_volume(assemble_phi(FlowState(0.0, E, 1.5), K, SU2))
        assert data.volume > 0 and data.orientation == 1


def test_symmetric_K_splits_metric(rng):
    for _ in range(10):
        S = rng.normal(size=(3, 3))
        K = S @ S.T + 0.1 * I3
        g = g2_metric_volume(assemble_phi(FlowState(0.0, random_frame(rng), 1.0), K, SU2)).metric
        assert np.allclose(g[6, :6], 0, atol=1e-12)


def test_antisymmetric_K_tilts_metric():
    K = 0.1 * I3 + 0.3 * np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0.0]])
    g = g2_metric_volume(assemble_phi(FlowState(0.0, I3, 1.0), K, SU2)).metric
    assert np.max(np.abs(g[6, :6])) > 1e-3


def test_flat_torus_residuals():
    r_closed, r_evol = dphi_residual(flat_torus())
    assert np.max(r_closed) <= 1e-13
    assert np.max(r_evol) < 1e-6


def test_evolution_residual_second_order():
    pol = KPolicy.constant(0.05 * I3)
    res = []
    for steps in (100, 200):
        tr = integrate(FlowState(0.0, I3, 1.0), pol, SU2, 0.0, 1.0, steps)
        res.append(np.max(dphi_residual(tr)[1]))
    assert 3.5 <= res[0] / res[1] <= 4.5


def test_corrupted_connection_detected():
    tr = integrate(FlowState(0.0, I3, 1.0), KPolicy.constant(0.05 * I3), SU2, 0.0, 1.0, 20)
    bad = FlowTrace(tr.t, tr.E, tr.f, tr.K, SU2, A=tr.A + 1e-3)
    assert np.max(dphi_residual(bad)[0]) > 1e-6


def test_too_few_records():
    tr = integrate(FlowState(0.0, I3, 1.0), KPolicy.constant(0.1 * I3), ABELIAN, 0.0, 1.0, 1)
    with pytest.raises(TooFewRecords):
        dphi_residual(tr)


def test_volume_monotone_on_flat_torus():
    rep = volume_monotone(flat_torus())
    assert rep.verdict
    assert rep.det_E[-1] / rep.det_E[0] == pytest.approx(np.exp(0.3), abs=1e-9)
    assert rep.endpoint_difference > 0
    assert rep.rate_residual < 1e-5


def test_volume_monotone_rejects_constant_frames():
    n = 5
    tr = FlowTrace(np.linspace(0, 1, n), np.repeat(I3[None], n, 0), np.ones(n),
                   np.repeat(0.1 * I3[None], n, 0), ABELIAN)
    rep = volume_monotone(tr)
    assert not rep.verdict and rep.first_failure == 1


def test_state_policy_is_used():
    pol = KPolicy.state_function(lambda t, E, f: f * I3)
    tr = integrate(FlowState(0.0, I3, 1.0), pol, ABELIAN, 0.0, 0.5, 50)
    # df/dt = -3 f^2 with f(0) = 1 gives f = 1 / (1 + 3t)
    assert tr.f[-1] == pytest.approx(1 / 2.5, abs=1e-8)


def test_trace_csv_round_trip(tmp_path):
    tr = integrate(FlowState(0.0, I3, 1.0), KPolicy.constant(0.05 * I3), SU2, 0.0, 1.0, 20)
    write_trace_csv(tr, tmp_path / "trace.csv", tmp_path / "trace.meta.json")
    header = (tmp_path / "trace.csv").read_text().splitlines()[0].split(",")
    assert header == TRACE_COLUMNS
    back = read_trace_csv(tmp_path / "trace.csv", SU2)
    assert np.array_equal(back.E, tr.E) and np.array_equal(back.f, tr.f)
    assert np.array_equal(back.K, tr.K)
    first = (tmp_path / "trace.csv").read_bytes()
    write_trace_csv(tr, tmp_path / "trace.csv")
    assert (tmp_path / "trace.csv").read_bytes() == first


def test_integrate_rejects_bad_interval():
    with pytest.raises(ValueError):
        integrate(FlowState(0.0, I3, 1.0), KPolicy.constant(I3), ABELIAN, 1.0, 0.0, 10)
