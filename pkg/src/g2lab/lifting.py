"""Horizontal lifts of metric paths to frame paths, and gauge recovery.

The frame bundle over metrics carries the connection whose horizontal
directions are frame velocities dE/dt = S E with S symmetric.  Lifting a
reduced path therefore integrates

    dE/dt = S E,   S = 1/2 E^{-T} (dGamma/dt) E^{-1},

and the gauge rotation tau relating the lifted endpoint to a target frame
is recovered by a polar projection.  Gauge elements act on invariant data
by pullback: ``tau* (f, A, E) = (f, tau^T A, tau^T E)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import __version__
from .errors import (
    FrameMetricMismatch,
    MetricMismatch,
    OrientationFlip,
    SingularFrame,
    WitnessFailure,
)
from .exterior import AltForm
from .homogeneous import _check_frame, levi_civita, metric_of_frame
from .invariant_forms import (
    InvariantTriple,
    assemble_omega,
    assemble_psi,
    is_one_one,
    slice_d,
)
from .reduced import ReducedPath, check_reduced, project

TRACKING_TOL = 1e-8
GAUGE_DEFECT_TOL = 1e-8
EVOLUTION_TOL = 1e-6
REDUCED_TOL = 1e-5


@dataclass(frozen=True)
class GaugeRotation:
    R: np.ndarray
    defect: float = 0.0

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-10 or abs(np.linalg.det(R) - 1.0) > 1e-10:
            raise OrientationFlip("not a rotation", {"R": R.tolist()})
        object.__setattr__(self, "R", R)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.R))

    def distance_to_identity(self) -> float:
        return float(np.max(np.abs(self.R - np.eye(3))))

    def pull(self, t: InvariantTriple) -> InvariantTriple:
        """tau* acting on an invariant triple."""
        return t.gauge(self.R.T)


def horizontal_velocity(Etilde, Gamma_dot) -> np.ndarray:
    """Unique symmetric S with E^T (S + S^T) E = dGamma/dt."""
    E = _check_frame(Etilde)
    Gd = np.asarray(Gamma_dot, dtype=float)
    Ei = np.linalg.inv(E)
    S = 0.5 * Ei.T @ (0.5 * (Gd + Gd.T)) @ Ei
    return 0.5 * (S + S.T)


@dataclass(eq=False)
class LiftResult:
    t: np.ndarray
    E: np.ndarray
    S: np.ndarray
    f: np.ndarray
    tracking: np.ndarray
    tau: GaugeRotation | None = None
    witness: list[tuple[AltForm, AltForm]] = field(default_factory=list)
    report: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        meta = {"version": __version__, "samples": int(self.t.size)}
        if self.tau is not None:
            meta.update(
                tau=[float(x) for x in self.tau.R.reshape(-1)],
                tau_orthogonality_defect=self.tau.defect,
                tau_det=self.tau.det,
                tau_distance_to_identity=self.tau.distance_to_identity(),
            )
        meta.update({k: v for k, v in self.report.items() if not isinstance(v, np.ndarray)})
        return meta


def horizontal_lift(path: ReducedPath, E_init, tol: float = 1e-10) -> LiftResult:
    """Lift (f_t, Gamma_t) to frames with symmetric velocity, starting at ``E_init``.

    dGamma/dt between samples comes from a cubic spline through Gamma, so
    E^T E reproduces Gamma at the samples up to the Runge-Kutta error.
    """
    E = np.array(_check_frame(E_init), dtype=float)
    if np.linalg.det(E) <= 0:
        raise OrientationFlip("initial frame has det <= 0", {"det": float(np.linalg.det(E))})
    mismatch = np.max(np.abs(metric_of_frame(E) - path.Gamma[0]))
    if mismatch > tol * max(1.0, np.max(np.abs(path.Gamma[0]))):
        raise FrameMetricMismatch(f"E_init^T E_init differs from Gamma(t1) by {mismatch:.3e}")
    spline = CubicSpline(path.t, path.Gamma, axis=0)
    gdot = spline.derivative()

    def rhs(tt, EE):
        return horizontal_velocity(EE, gdot(tt)) @ EE

    Es = [E]
    for n in range(len(path) - 1):
        t0, h = path.t[n], path.t[n + 1] - path.t[n]
        k1 = rhs(t0, E)
        k2 = rhs(t0 + h / 2, E + h / 2 * k1)
        k3 = rhs(t0 + h / 2, E + h / 2 * k2)
        k4 = rhs(t0 + h, E + h * k3)
        E = E + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.linalg.det(E) <= 0:
            raise SingularFrame(f"lifted frame left the positive component at step {n + 1}")
        Es.append(E)
    Es = np.array(Es)
    S = np.array([horizontal_velocity(Ei, gdot(ti)) for Ei, ti in zip(Es, path.t)])
    tracking = np.max(np.abs(np.einsum("nji,njk->nik", Es, Es) - path.Gamma), axis=(1, 2))
    return LiftResult(path.t.copy(), Es, S, path.f.copy(), tracking)


def recover_gauge(Etilde_end, E_target, tol: float = GAUGE_DEFECT_TOL) -> GaugeRotation:
    """tau with tau* (frame E_target) = Etilde_end, i.e. Etilde_end = tau^T E_target."""
    raw = np.asarray(E_target, dtype=float) @ np.linalg.inv(_check_frame(Etilde_end))
    defect = float(np.max(np.abs(raw.T @ raw - np.eye(3))))
    if defect > tol:
        raise MetricMismatch(f"frames induce different metrics (defect {defect:.3e})",
                             {"defect": defect})
    if np.linalg.det(raw) < 0:
        raise OrientationFlip("frames lie in different connected components",
                              {"det": float(np.linalg.det(raw))})
    U, _, Vt = np.linalg.svd(raw)
    return GaugeRotation(U @ Vt, defect)


def rigid_witness_pipeline(
    trace,
    evolution_tol: float = EVOLUTION_TOL,
    tracking_tol: float = TRACKING_TOL,
    reduced_tol: float = REDUCED_TOL,
) -> LiftResult:
    """From a gated flow trace, build the rigid witness family and the gauge rotation tau.

    The projected path is checked against the reduced relation, lifted
    horizontally from the initial frame, and tau is recovered against the
    final frame.  The witness psi_t, omega_t = S_t a^i ^ e^j is verified
    for symmetry (omega is (1,1)), closedness, the evolution identity and
    gauge coherence; any failure raises ``WitnessFailure``.
    """
    alg = trace.alg
    path = ReducedPath.from_trace(trace)
    reduced = check_reduced(path, alg, reduced_tol)
    if not reduced.verdict:
        raise WitnessFailure("projected trace violates the reduced relation", reduced.witness)
    lift = horizontal_lift(path, trace.E[0])
    tau = recover_gauge(lift.E[-1], trace.E[-1])

    n = len(path)
    witness = []
    sym_defect = np.empty(n)
    one_one = np.empty(n)
    r_closed = np.empty(n)
    min_S = np.empty(n)
    psis = []
    for i in range(n):
        triple = InvariantTriple(lift.f[i], levi_civita(lift.E[i], alg), lift.E[i], alg)
        psi = assemble_psi(triple)
        omega = assemble_omega(lift.S[i], triple)
        witness.append((psi, omega))
        psis.append(psi.coeffs)
        sym_defect[i] = np.max(np.abs(lift.S[i] - lift.S[i].T))
        one_one[i] = float(np.max(np.abs((omega ^ psi).coeffs)))
        r_closed[i] = slice_d(psi, alg).norm
        min_S[i] = np.linalg.eigvalsh(lift.S[i])[0]
    dpsi = np.gradient(np.array(psis), path.t, axis=0, edge_order=2)
    r_evol = np.array(
        [np.max(np.abs(dpsi[i] - slice_d(witness[i][1], alg).coeffs)) for i in range(n)]
    )
    final_w = project(InvariantTriple(lift.f[-1], levi_civita(lift.E[-1], alg), lift.E[-1], alg))
    final_t = project(trace.triple(len(trace) - 1))
    coherence = float(np.max(np.abs(final_w.Gamma - final_t.Gamma)) + abs(final_w.f - final_t.f))

    lift.tau = tau
    lift.witness = witness
    lift.report = {
        "tracking": lift.tracking,
        "sym_defect": sym_defect,
        "one_one": one_one,
        "r_closed": r_closed,
        "r_evolution": r_evol,
        "min_S": min_S,
        "max_tracking": float(np.max(lift.tracking)),
        "max_sym_defect": float(np.max(sym_defect)),
        "max_one_one": float(np.max(one_one)),
        "max_r_closed": float(np.max(r_closed)),
        "max_r_evolution": float(np.max(r_evol)),
        "min_S_eigenvalue": float(np.min(min_S)),
        "gauge_coherence": coherence,
        "reduced_residual": reduced.max_residual,
    }
    failures = {}
    if np.max(lift.tracking) > tracking_tol:
        failures["tracking"] = float(np.max(lift.tracking))
    if np.max(sym_defect) > 1e-12:
        failures["horizontality"] = float(np.max(sym_defect))
    if not all(is_one_one(om, ps) for ps, om in witness):
        failures["one_one"] = float(np.max(one_one))
    if np.min(min_S) <= 0:
        failures["positive-symmetric-K"] = float(np.min(min_S))
    if np.max(r_closed) > 1e-12 * max(1.0, max(abs(p).max() for p in psis)):
        failures["closed"] = float(np.max(r_closed))
    if np.max(r_evol) > evolution_tol:
        failures["evolution"] = float(np.max(r_evol))
    if coherence > tracking_tol:
        failures["gauge_coherence"] = coherence
    if failures:
        raise WitnessFailure(f"witness checks failed: {sorted(failures)}", failures)
    return lift


LIFT_COLUMNS = ["t", "tracking", "sym_defect", "one_one", "r_closed", "r_evolution", "min_S"]


def write_lift_csv(lift: LiftResult, path, meta_path=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LIFT_COLUMNS)
        for i in range(lift.t.size):
            row = [lift.t[i], lift.tracking[i]]
            row += [lift.report.get(k, np.full(lift.t.size, np.nan))[i] for k in LIFT_COLUMNS[2:]]
            w.writerow([repr(float(x)) for x in row])
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(lift.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")
