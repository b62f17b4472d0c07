"""Projection to (f, gamma) and the reduced relation on positive functions x metrics.

A reduced path (f_t, Gamma_t) is admissible when dGamma/dt is positive
definite and

    df/dt = -A^{ij} (dGamma/dt)_{ij},    A = 1/2 (Ein + f gamma^{-1}),

with all contractions taken in an orthonormal frame of Gamma.  The
``paper_literal`` reading contracts A against Gamma itself instead of
its derivative; it is kept for comparison only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NonSPDSample, TooFewSamples
from .homogeneous import ModelAlgebra, einstein_oracle, frame_of_metric, metric_of_frame
from .invariant_forms import InvariantTriple

F_TOL = 1e-6


@dataclass(frozen=True)
class ReducedPoint:
    f: float
    Gamma: np.ndarray

    def __post_init__(self):
        if not self.f > 0:
            raise NonSPDSample(f"f must be positive, got {self.f}")
        G = np.asarray(self.Gamma, dtype=float)
        if not np.allclose(G, G.T, atol=1e-12 * max(1.0, np.max(np.abs(G)))):
            raise NonSPDSample("Gamma is not symmetric")
        if np.linalg.eigvalsh(G)[0] <= 0:
            raise NonSPDSample("Gamma is not positive definite")


def project(t: InvariantTriple) -> ReducedPoint:
    return ReducedPoint(t.f, metric_of_frame(t.E))


@dataclass(eq=False)
class ReducedPath:
    t: np.ndarray
    f: np.ndarray
    Gamma: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        self.Gamma = np.asarray(self.Gamma, dtype=float).reshape(-1, 3, 3)
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        for i in range(self.t.size):
            try:
                ReducedPoint(self.f[i], self.Gamma[i])
            except NonSPDSample as exc:
                raise NonSPDSample(f"sample {i}: {exc}") from None

    def __len__(self) -> int:
        return self.t.size

    @classmethod
    def from_trace(cls, trace) -> ReducedPath:
        return cls(trace.t, trace.f, np.einsum("nji,njk->nik", trace.E, trace.E))

    def f_dot(self) -> np.ndarray:
        return np.gradient(self.f, self.t, edge_order=2)

    def Gamma_dot(self) -> np.ndarray:
        return np.gradient(self.Gamma, self.t, axis=0, edge_order=2)

    def subsample(self, every: int) -> ReducedPath:
        return ReducedPath(self.t[::every], self.f[::every], self.Gamma[::every])


@dataclass(frozen=True)
class ReducedReport:
    verdict: bool
    f_residual: np.ndarray
    f_dot: np.ndarray
    f_dot_predicted: np.ndarray
    gamma_dot_min_eig: np.ndarray
    literal_residual: np.ndarray
    tolerance: float
    witness: dict | None = None

    @property
    def max_residual(self) -> float:
        return float(np.max(self.f_residual))


def predicted_f_dot(f: float, Gamma, Gamma_dot, alg: ModelAlgebra, paper_literal: bool = False) -> float:
    E = frame_of_metric(Gamma)
    Einv = np.linalg.inv(E)
    ein = einstein_oracle(E, alg)
    A = 0.5 * (ein + f * np.eye(3))
    if paper_literal:
        return float(-np.sum(A * (Einv.T @ np.asarray(Gamma) @ Einv)))
    return float(-np.sum(A * (Einv.T @ np.asarray(Gamma_dot) @ Einv)))


def check_reduced(
    path: ReducedPath,
    alg: ModelAlgebra,
    tol: float = F_TOL,
    paper_literal: bool = False,
) -> ReducedReport:
    """Check positivity of dGamma/dt and the f-evolution identity at interior samples."""
    if len(path) < 3:
        raise TooFewSamples(f"need at least 3 samples, got {len(path)}")
    fd = path.f_dot()
    Gd = path.Gamma_dot()
    idx = range(1, len(path) - 1)
    pred = np.array([predicted_f_dot(path.f[i], path.Gamma[i], Gd[i], alg) for i in idx])
    lit = np.array(
        [predicted_f_dot(path.f[i], path.Gamma[i], Gd[i], alg, paper_literal=True) for i in idx]
    )
    res = np.abs(fd[1:-1] - pred)
    lit_res = np.abs(fd[1:-1] - lit)
    mins = np.array([np.linalg.eigvalsh(0.5 * (Gd[i] + Gd[i].T))[0] for i in idx])
    used = lit_res if paper_literal else res
    witness = None
    if np.any(mins <= 0):
        k = int(np.argmax(mins <= 0))
        witness = {"condition": "positive-metric-velocity", "t": float(path.t[k + 1]),
                   "min_eigenvalue": float(mins[k])}
    elif np.any(used > tol):
        k = int(np.argmax(used))
        witness = {"condition": "f-evolution", "t": float(path.t[k + 1]),
                   "residual": float(used[k])}
    return ReducedReport(
        witness is None, used, fd[1:-1], lit if paper_literal else pred, mins, lit_res, tol, witness
    )


def reduced_consistency(trace, tol: float = F_TOL, paper_literal: bool = False) -> float:
    """Max f-identity residual of the projected trace (the reduced relation must hold)."""
    report = check_reduced(ReducedPath.from_trace(trace), trace.alg, tol, paper_literal)
    return report.max_residual


REDUCED_COLUMNS = ["t", "f"] + [f"G{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]


def write_reduced_csv(path: ReducedPath, filename) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REDUCED_COLUMNS)
        for i in range(len(path)):
            w.writerow([repr(float(x)) for x in (path.t[i], path.f[i], *path.Gamma[i].reshape(-1))])


def read_reduced_csv(filename) -> ReducedPath:
    data = np.genfromtxt(filename, delimiter=",", names=True)
    G = np.stack([data[f"G{i}{j}"] for i in (1, 2, 3) for j in (1, 2, 3)], axis=1)
    return ReducedPath(data["t"], data["f"], G)
