"""Invariant cobordism evolution on the homogeneous model.

The state is (E, f) with a_t the Levi-Civita connection of e_t = E_t sigma
and

    dE/dt = K E,        df/dt = -f tr K - tr(K G),

where G is the curvature matrix of a_t and the symmetric part of K must
stay positive definite.  The 7-dim form phi = omega ^ dt + psi built from
such a family is closed, definite and positively oriented.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import __version__
from .errors import NonPositiveF, PolicyViolation, TooFewRecords
from .exterior import DT_SLOT, AltForm, extend, wedge
from .homogeneous import ModelAlgebra, _check_frame, curvature, levi_civita
from .invariant_forms import InvariantTriple, assemble_omega, assemble_psi, slice_d

KAPPA_MIN = 1e-3


@dataclass(frozen=True)
class FlowState:
    t: float
    E: np.ndarray
    f: float


@dataclass(frozen=True)
class KPolicy:
    """Rule producing K along the flow; ``fn(t, E, f) -> K``."""

    kind: str
    fn: Callable[[float, np.ndarray, float], np.ndarray] = field(repr=False)
    description: dict = field(default_factory=dict)

    def __call__(self, t: float, E: np.ndarray, f: float) -> np.ndarray:
        return np.asarray(self.fn(t, E, f), dtype=float).reshape(3, 3)

    @classmethod
    def constant(cls, K) -> KPolicy:
        K = np.array(K, dtype=float).reshape(3, 3)
        return cls("constant", lambda t, E, f: K, {"type": "constant", "K": K.tolist()})

    @classmethod
    def time_function(cls, fn, description: dict | None = None) -> KPolicy:
        return cls("time", lambda t, E, f: fn(t), description or {"type": "time"})

    @classmethod
    def state_function(cls, fn, description: dict | None = None) -> KPolicy:
        return cls("state", fn, description or {"type": "state"})

    @classmethod
    def polynomial(cls, coefficients) -> KPolicy:
        """K(t) = sum_n C_n t^n."""
        C = np.array(coefficients, dtype=float).reshape(-1, 3, 3)

        def fn(t):
            return sum(c * t**n for n, c in enumerate(C))

        return cls.time_function(fn, {"type": "polynomial", "coefficients": C.tolist()})


def sym_min_eigenvalue(K: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (K + K.T))[0])


def gate(K: np.ndarray, t: float, kappa_min: float = KAPPA_MIN) -> None:
    lam = sym_min_eigenvalue(K)
    if lam < kappa_min:
        raise PolicyViolation(
            f"symmetric part of K has eigenvalue {lam:.6g} < {kappa_min:g} at t = {t:.6g}",
            {"t": t, "min_eigenvalue": lam, "K": np.asarray(K).tolist()},
        )


def flow_rhs(s: FlowState, K, alg: ModelAlgebra) -> tuple[np.ndarray, float]:
    E = _check_frame(s.E)
    K = np.asarray(K, dtype=float)
    G = curvature(levi_civita(E, alg), E, alg)
    return K @ E, float(-s.f * np.trace(K) - np.trace(K @ G))


@dataclass(eq=False)
class FlowTrace:
    t: np.ndarray
    E: np.ndarray
    f: np.ndarray
    K: np.ndarray
    alg: ModelAlgebra
    policy: dict = field(default_factory=dict)
    steps: int = 0
    seed: int | None = None
    kappa_min: float = KAPPA_MIN
    A: np.ndarray | None = None
    G: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.E = np.asarray(self.E, dtype=float).reshape(-1, 3, 3)
        self.f = np.asarray(self.f, dtype=float)
        self.K = np.asarray(self.K, dtype=float).reshape(-1, 3, 3)
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if self.A is None:
            self.A = np.array([levi_civita(E, self.alg) for E in self.E])
        if self.G is None:
            self.G = np.array([curvature(A, E, self.alg) for A, E in zip(self.A, self.E)])

    def __len__(self) -> int:
        return self.t.size

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self) > 1 else 0.0

    def state(self, i: int) -> FlowState:
        return FlowState(float(self.t[i]), self.E[i], float(self.f[i]))

    def triple(self, i: int) -> InvariantTriple:
        return InvariantTriple(self.f[i], self.A[i], self.E[i], self.alg)

    def psi(self, i: int) -> AltForm:
        return assemble_psi(self.triple(i))

    def omega(self, i: int) -> AltForm:
        return assemble_omega(self.K[i], self.triple(i))

    @cached_property
    def residuals(self) -> tuple[np.ndarray, np.ndarray]:
        return dphi_residual(self)

    def metadata(self) -> dict:
        return {
            "model": self.alg.name,
            "structure_constants": self.alg.c.tolist(),
            "policy": self.policy,
            "steps": self.steps,
            "interval": [float(self.t[0]), float(self.t[-1])],
            "kappa_min": self.kappa_min,
            "seed": self.seed,
            "version": __version__,
        }


def _rk4_step(E, f, t, h, policy, alg, kappa_min, step_index):
    def stage(tt, EE, ff):
        if ff <= 0:
            raise NonPositiveF(
                f"f = {ff:.6g} reached a non-positive value in step {step_index}",
                {"step": step_index, "t": tt, "f": ff},
            )
        K = policy(tt, EE, ff)
        gate(K, tt, kappa_min)
        return flow_rhs(FlowState(tt, EE, ff), K, alg)

    k1E, k1f = stage(t, E, f)
    k2E, k2f = stage(t + h / 2, E + h / 2 * k1E, f + h / 2 * k1f)
    k3E, k3f = stage(t + h / 2, E + h / 2 * k2E, f + h / 2 * k2f)
    k4E, k4f = stage(t + h, E + h * k3E, f + h * k3f)
    return (
        E + h / 6 * (k1E + 2 * k2E + 2 * k3E + k4E),
        f + h / 6 * (k1f + 2 * k2f + 2 * k3f + k4f),
    )


def integrate(
    s0: FlowState,
    policy: KPolicy,
    alg: ModelAlgebra,
    t1: float,
    t2: float,
    steps: int,
    kappa_min: float = KAPPA_MIN,
    seed: int | None = None,
) -> FlowTrace:
    """Classical fourth-order Runge-Kutta over ``steps`` uniform steps."""
    if not t1 < t2:
        raise ValueError(f"need t1 < t2, got [{t1}, {t2}]")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    E = np.array(_check_frame(s0.E), dtype=float)
    if np.linalg.det(E) <= 0:
        raise ValueError("initial frame must have det E > 0")
    f = float(s0.f)
    if f <= 0:
        raise NonPositiveF(f"initial f = {f} is not positive", {"step": 0, "f": f})
    ts = t1 + (t2 - t1) * np.arange(steps + 1) / steps
    h = (t2 - t1) / steps
    Es, fs = [E], [f]
    for n in range(steps):
        E, f = _rk4_step(E, f, ts[n], h, policy, alg, kappa_min, n)
        if f <= 0:
            raise NonPositiveF(
                f"f = {f:.6g} became non-positive at step {n + 1}",
                {"step": n + 1, "t": float(ts[n + 1]), "f": f},
            )
        Es.append(E)
        fs.append(f)
    Ks = []
    for tt, EE, ff in zip(ts, Es, fs):
        K = policy(tt, EE, ff)
        gate(K, tt, kappa_min)
        Ks.append(K)
    return FlowTrace(ts, Es, fs, Ks, alg, policy.description, steps, seed, kappa_min)


def assemble_phi(s: FlowState, K, alg: ModelAlgebra) -> AltForm:
    """phi = omega ^ dt + psi on the 7-dim slice."""
    t = InvariantTriple(s.f, levi_civita(s.E, alg), s.E, alg)
    dt = AltForm.basis(7, DT_SLOT)
    return wedge(extend(assemble_omega(K, t)), dt) + extend(assemble_psi(t))


def dphi_residual(trace: FlowTrace) -> tuple[np.ndarray, np.ndarray]:
    """Per-record (|d psi_t|, |d psi/dt - d omega_t|) in the max norm.

    The time derivative uses second-order differences (central in the
    interior, one-sided at the two ends).
    """
    if len(trace) < 3:
        raise TooFewRecords(f"need at least 3 records, got {len(trace)}")
    psis = np.array([trace.psi(i).coeffs for i in range(len(trace))])
    dpsi = np.gradient(psis, trace.t, axis=0, edge_order=2)
    r_closed = np.empty(len(trace))
    r_evol = np.empty(len(trace))
    for i in range(len(trace)):
        r_closed[i] = slice_d(AltForm(6, 3, psis[i]), trace.alg).norm
        d_omega = slice_d(trace.omega(i), trace.alg)
        r_evol[i] = float(np.max(np.abs(dpsi[i] - d_omega.coeffs)))
    return r_closed, r_evol


@dataclass(frozen=True)
class MonotoneReport:
    verdict: bool
    det_E: np.ndarray
    tr_K: np.ndarray
    rate_residual: float
    endpoint_difference: float
    first_failure: int | None = None


def volume_monotone(trace: FlowTrace) -> MonotoneReport:
    """Frame volume e^123 grows at rate tr K; strict growth separates psi(t1) from psi(t2)."""
    det_E = np.linalg.det(trace.E)
    tr_K = np.trace(trace.K, axis1=1, axis2=2)
    inc = np.diff(det_E) > 0
    first = None if inc.all() else int(np.argmin(inc)) + 1
    rate = 0.0
    if len(trace) >= 3:
        rate = float(np.max(np.abs(np.gradient(det_E, trace.t, edge_order=2) - tr_K * det_E)))
    diff = float(np.max(np.abs(trace.psi(len(trace) - 1).coeffs - trace.psi(0).coeffs)))
    return MonotoneReport(bool(inc.all()), det_E, tr_K, rate, diff, first)


TRACE_COLUMNS = (
    ["t"]
    + [f"E{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + ["f"]
    + [f"K{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + ["detE", "trK", "r_closed", "r_evolution"]
)


def write_trace_csv(trace: FlowTrace, path, meta_path=None) -> None:
    r_closed, r_evol = trace.residuals if len(trace) >= 3 else (
        np.full(len(trace), np.nan),
        np.full(len(trace), np.nan),
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i in range(len(trace)):
            row = [trace.t[i], *trace.E[i].reshape(-1), trace.f[i], *trace.K[i].reshape(-1)]
            row += [np.linalg.det(trace.E[i]), np.trace(trace.K[i]), r_closed[i], r_evol[i]]
            w.writerow([repr(float(x)) for x in row])
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(trace.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_trace_csv(path, alg: ModelAlgebra) -> FlowTrace:
    data = np.genfromtxt(path, delimiter=",", names=True)
    E = np.stack([data[f"E{i}{j}"] for i in (1, 2, 3) for j in (1, 2, 3)], axis=1)
    K = np.stack([data[f"K{i}{j}"] for i in (1, 2, 3) for j in (1, 2, 3)], axis=1)
    return FlowTrace(data["t"], E, data["f"], K, alg, steps=data["t"].size - 1)
