"""Left-invariant geometry of 3-dimensional Lie-group base models.

Conventions: ``c[i, j, k]`` is c^i_{jk}, ``[X_j, X_k] = c^i_{jk} X_i`` and
``d sigma^i = -1/2 c^i_{jk} sigma^j ^ sigma^k``.  A solder frame ``E`` has
e^i = E_ij sigma^j, a connection matrix ``A`` has a^i = mu^i + A_ij sigma^j,
and Lie-algebra valued 2-forms on the base are stored as 3x3 matrices of
components against sigma-hat^l = 1/2 eps_{lab} sigma^a ^ sigma^b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import JacobiError, SingularFrame

EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS3[_i, _j, _k] = 1.0
    EPS3[_i, _k, _j] = -1.0

TORSION_TOL = 1e-12

# Milnor parameters (lambda1, lambda2, lambda3): [X2,X3] = l1 X1, [X3,X1] = l2 X2, [X1,X2] = l3 X3
MILNOR_PRESETS = {
    "abelian": (0.0, 0.0, 0.0),
    "su2": (1.0, 1.0, 1.0),
    "heisenberg": (1.0, 0.0, 0.0),
    "e11": (1.0, -1.0, 0.0),
    "e2": (1.0, 1.0, 0.0),
    "sl2r": (1.0, 1.0, -1.0),
}


@dataclass(frozen=True, eq=False)
class ModelAlgebra:
    name: str
    c: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (3, 3, 3):
            raise JacobiError(f"structure constants must have shape (3, 3, 3), got {c.shape}")
        if not np.allclose(c, -c.transpose(0, 2, 1), atol=1e-12):
            raise JacobiError("structure constants must be antisymmetric in the lower indices")
        defect = jacobi_defect(c)
        if defect > 1e-10 * max(1.0, np.max(np.abs(c)) ** 2):
            raise JacobiError(f"Jacobi identity fails (defect {defect:.3e})")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def preset(cls, name: str) -> ModelAlgebra:
        key = name.lower()
        if key not in MILNOR_PRESETS:
            raise KeyError(f"unknown model {name!r}; choose from {sorted(MILNOR_PRESETS)}")
        return cls.milnor(*MILNOR_PRESETS[key], name=key)

    @classmethod
    def milnor(cls, l1: float, l2: float, l3: float, name: str = "milnor") -> ModelAlgebra:
        c = np.zeros((3, 3, 3))
        for (i, j, k), lam in zip(((0, 1, 2), (1, 2, 0), (2, 0, 1)), (l1, l2, l3)):
            c[i, j, k] = lam
            c[i, k, j] = -lam
        return cls(name, c)

    @property
    def d_sigma(self) -> np.ndarray:
        """D[i, l]: d sigma^i = D[i, l] sigma-hat^l."""
        return -0.5 * np.einsum("ijk,jkl->il", self.c, EPS3)

    @property
    def unimodular(self) -> bool:
        return bool(np.allclose(np.einsum("iik->k", self.c), 0.0))


def jacobi_defect(c) -> float:
    c = np.asarray(c, dtype=float)
    # [[X_a, X_b], X_d] = c^m_ab c^n_md X_n, summed cyclically over (a, b, d)
    t = np.einsum("mab,nmd->nabd", c, c)
    cyc = t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(cyc)))


def _check_frame(E) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    if E.shape != (3, 3):
        raise SingularFrame(f"frame must be 3x3, got {E.shape}")
    det = np.linalg.det(E)
    if not np.isfinite(det) or abs(det) <= 1e-14 * max(1.0, np.max(np.abs(E))) ** 3:
        raise SingularFrame(f"frame is singular (det {det:.3e})")
    return E


def bracket_wedge(M: np.ndarray, N: np.ndarray) -> np.ndarray:
    """[M sigma ^ N sigma] in sigma-hat components: eps_{abi} eps_{pql} M_ap N_bq."""
    return np.einsum("abi,pql,ap,bq->il", EPS3, EPS3, M, N)


def cofactor(E: np.ndarray) -> np.ndarray:
    """e-hat^i = cofactor(E)[i, l] sigma-hat^l."""
    return 0.5 * bracket_wedge(E, E)


def torsion(A, E, alg: ModelAlgebra) -> np.ndarray:
    """de + [a ^ e] on the base, in sigma-hat components (the fiber part cancels)."""
    return np.asarray(E) @ alg.d_sigma + bracket_wedge(np.asarray(A), np.asarray(E))


def levi_civita(E, alg: ModelAlgebra) -> np.ndarray:
    """The unique A making a = mu + A sigma torsion-free for the frame E."""
    E = _check_frame(E)
    # bracket_wedge(A, E)[i, l] = L[i, l, a, p] A[a, p]
    L = np.einsum("abi,pql,bq->ilap", EPS3, EPS3, E).reshape(9, 9)
    rhs = -(E @ alg.d_sigma).reshape(9)
    A = np.linalg.solve(L, rhs).reshape(3, 3)
    res = np.max(np.abs(torsion(A, E, alg)))
    scale = max(1.0, np.max(np.abs(E)) * max(1.0, np.max(np.abs(A))))
    if res > TORSION_TOL * scale:
        raise SingularFrame(f"Levi-Civita solve left torsion residual {res:.3e}")
    return A


def curvature_hat(A, alg: ModelAlgebra) -> np.ndarray:
    """Base curvature A d sigma + 1/2 [A sigma ^ A sigma] in sigma-hat components."""
    A = np.asarray(A, dtype=float)
    return A @ alg.d_sigma + 0.5 * bracket_wedge(A, A)


def curvature(A, E, alg: ModelAlgebra) -> np.ndarray:
    """G with F^j = G_ij e-hat^i."""
    E = _check_frame(E)
    F = curvature_hat(A, alg)
    return np.linalg.solve(cofactor(E).T, F.T)


def einstein_oracle(E, alg: ModelAlgebra) -> np.ndarray:
    """Einstein tensor of the metric E^T E in the orthonormal frame dual to e = E sigma.

    Pure frame computation (Koszul formula), independent of the connection path.
    """
    E = _check_frame(E)
    Einv = np.linalg.inv(E)
    # [e_a, e_b] = C[c, a, b] e_c with e_a = (E^-1)_{ja} X_j
    C = np.einsum("ci,ijk,ja,kb->cab", E, alg.c, Einv, Einv)
    # Gam[a, b, c] = <nabla_{e_a} e_b, e_c>
    Gam = 0.5 * (
        np.einsum("cab->abc", C) - np.einsum("abc->abc", C) + np.einsum("bca->abc", C)
    )
    # nabla_{e_a} e_b = Gam[a, b, c] e_c; R(e_a, e_b) e_c = nabla_a nabla_b e_c - nabla_b nabla_a e_c - nabla_[a,b] e_c
    nab_nab = np.einsum("bcd,ade->abce", Gam, Gam)
    R = nab_nab - nab_nab.transpose(1, 0, 2, 3) - np.einsum("dab,dce->abce", C, Gam)
    ric = np.einsum("abca->bc", R)
    return ric - 0.5 * np.trace(ric) * np.eye(3)


def metric_of_frame(E) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    return E.T @ E


def frame_of_metric(Gamma) -> np.ndarray:
    """An upper-triangular frame E with E^T E = Gamma and det E > 0."""
    L = np.linalg.cholesky(np.asarray(Gamma, dtype=float))
    return L.T
