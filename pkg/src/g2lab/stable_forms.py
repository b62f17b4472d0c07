"""Definite 3-forms in dimensions 6 and 7.

Dimension 6 uses the quartic orbit invariant built from the endomorphism
``K_psi(v) = u`` with ``iota(u) vol = iota(v)psi ^ psi``; the definite
orbit is where it is negative.  An independent route checks the rank of
``iota(v)psi`` directly.  Dimension 7 uses the cubic bilinear form
``b(u, v) vol = iota(u)phi ^ iota(v)phi ^ phi``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DegreeError, DimensionError, NotDefinite, ZeroVolume
from .exterior import (
    AltForm,
    interior,
    label_slot,
    multi_indices,
    two_form_rank,
    wedge,
    wedge_all,
)

LAMBDA_DEGENERATE_TOL = 1e-10
SPD_FLOOR = 1e-10
SAMPLED_RANK_EPS = 1e-9


def _normal_basis(dim: int, label: str) -> AltForm:
    return AltForm.basis(dim, label_slot(label))


def normal_form_psi0() -> AltForm:
    """-w123 + w1 v23 + w2 v31 + w3 v12."""
    return AltForm.from_terms(
        6,
        3,
        {
            ("w1", "w2", "w3"): -1.0,
            ("w1", "v2", "v3"): 1.0,
            ("w2", "v3", "v1"): 1.0,
            ("w3", "v1", "v2"): 1.0,
        },
    )


def normal_form_phi0() -> AltForm:
    """(v1 w1 + v2 w2 + v3 w3) ^ v0 + psi0, on seven slots."""
    terms = {
        ("w1", "w2", "w3"): -1.0,
        ("w1", "v2", "v3"): 1.0,
        ("w2", "v3", "v1"): 1.0,
        ("w3", "v1", "v2"): 1.0,
    }
    for j in (1, 2, 3):
        terms[(f"v{j}", f"w{j}", "v0")] = 1.0
    return AltForm.from_terms(7, 3, terms)


def reference_volume(dim: int) -> AltForm:
    """v1 w1 v2 w2 v3 w3 [v0]; coincides with the slice product orientation."""
    labels = ["v1", "w1", "v2", "w2", "v3", "w3"] + (["v0"] if dim == 7 else [])
    return wedge_all(*[_normal_basis(dim, lab) for lab in labels])


def _top_scalar(vol_ref: AltForm, dim: int) -> float:
    if vol_ref.dim != dim or vol_ref.degree != dim:
        raise DegreeError(f"reference volume must be a top form in dimension {dim}")
    c = float(vol_ref.coeffs[0])
    if c == 0.0:
        raise ZeroVolume("reference volume form is zero")
    return c


def _check3(psi: AltForm, dim: int):
    if psi.dim != dim:
        raise DimensionError(f"expected a dimension-{dim} form, got {psi.dim}")
    if psi.degree != 3:
        raise DegreeError(f"expected a 3-form, got degree {psi.degree}")


@lru_cache(maxsize=None)
def _five_form_to_vector() -> np.ndarray:
    # iota(u) e^{123456} = sum_m (-1)^m u_m e^{..hat m..}; return its inverse
    # as a map from 5-form coefficients to u.
    top = AltForm(6, 6, np.ones(1))
    cols = [interior(np.eye(6)[m], top).coeffs for m in range(6)]
    return np.linalg.inv(np.column_stack(cols))


def hitchin_endomorphism(psi: AltForm, vol_ref: AltForm) -> np.ndarray:
    """Matrix of ``K_psi`` acting on vector components (column j = K(e_j))."""
    _check3(psi, 6)
    c = _top_scalar(vol_ref, 6)
    inv = _five_form_to_vector()
    cols = [inv @ wedge(interior(np.eye(6)[j], psi), psi).coeffs for j in range(6)]
    return np.column_stack(cols) / c


def _raw_lambda(psi: AltForm, vol_ref: AltForm) -> float:
    k = hitchin_endomorphism(psi, vol_ref)
    return float(np.trace(k @ k)) / 6.0


@lru_cache(maxsize=None)
def _lambda_scale() -> float:
    return abs(_raw_lambda(normal_form_psi0(), reference_volume(6)))


class Orbit(enum.Enum):
    DEFINITE = "Definite"
    OTHER_OPEN = "OtherOpenOrbit"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class OrbitVerdict6:
    verdict: Orbit
    lam: float


def hitchin_lambda(psi: AltForm, vol_ref: AltForm | None = None) -> OrbitVerdict6:
    """Quartic invariant normalised to -1 on psi0 (w.r.t. v1 w1 v2 w2 v3 w3)."""
    vol_ref = reference_volume(6) if vol_ref is None else vol_ref
    c = _top_scalar(vol_ref, 6)
    lam = _raw_lambda(psi, vol_ref) / _lambda_scale()
    band = LAMBDA_DEGENERATE_TOL * psi.norm**4 / c**2
    if abs(lam) <= band:
        return OrbitVerdict6(Orbit.DEGENERATE, lam)
    return OrbitVerdict6(Orbit.DEFINITE if lam < 0 else Orbit.OTHER_OPEN, lam)


@dataclass(frozen=True)
class SampledVerdict:
    definite: bool
    witness: np.ndarray | None = None
    witness_rank: int | None = None
    samples: int = 0
    seed: int | None = None


@lru_cache(maxsize=None)
def _square_table() -> np.ndarray:
    """Bilinear coefficients Q[m, a, b] with (beta ^ beta)_m = beta^T Q[m] beta (dim 6, 2-forms)."""
    n2 = len(multi_indices(6, 2))
    q = np.zeros((len(multi_indices(6, 4)), n2, n2))
    eye = np.eye(n2)
    for a in range(n2):
        for b in range(n2):
            q[:, a, b] = wedge(AltForm(6, 2, eye[a]), AltForm(6, 2, eye[b])).coeffs
    return q


def _contraction_matrix(psi: AltForm) -> np.ndarray:
    """C[:, j] = coefficients of iota(e_j) psi, so iota(v)psi = C @ v."""
    return np.column_stack([interior(np.eye(6)[j], psi).coeffs for j in range(6)])


def _square_quadrics(psi: AltForm) -> tuple[np.ndarray, np.ndarray]:
    """(C, Q6) with iota(v)psi = C v and (iota(v)psi)^2 = [v^T Q6[m] v]_m."""
    c = _contraction_matrix(psi)
    q6 = np.einsum("ai,mab,bj->mij", c, _square_table(), c)
    return c, 0.5 * (q6 + q6.transpose(0, 2, 1))


def _refine_null_direction(q6: np.ndarray, starts: np.ndarray, iters: int = 30) -> np.ndarray:
    """Gauss-Newton on |iota(v)psi ^ iota(v)psi|^2 subject to |v| = 1, batched over starts."""
    v = starts / np.linalg.norm(starts, axis=1, keepdims=True)
    eye = np.eye(v.shape[1])
    nq, n = q6.shape[0], q6.shape[1]
    flat = q6.reshape(nq * n, n).T
    for _ in range(iters):
        qv = (v @ flat).reshape(-1, nq, n)
        res = np.concatenate(
            [(qv @ v[:, :, None])[:, :, 0], (np.sum(v * v, axis=1) - 1.0)[:, None]], axis=1
        )
        jac = np.concatenate([2.0 * qv, 2.0 * v[:, None, :]], axis=1)
        jt = jac.transpose(0, 2, 1)
        normal = jt @ jac
        damping = 1e-12 * np.trace(normal, axis1=1, axis2=2)[:, None, None] * eye
        step = np.linalg.solve(normal + damping, jt @ res[:, :, None])[:, :, 0]
        v = v - step
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if np.max(np.abs(step)) < 1e-14:
            break
    return v


def _rank_deficient(c: np.ndarray, q6: np.ndarray, vs: np.ndarray, scale: float) -> np.ndarray:
    # iota(v)psi always has v in its kernel, so its rank is 4 exactly when its square is nonzero
    beta = vs @ c.T
    bnorm = np.max(np.abs(beta), axis=1)
    sq = np.max(np.abs(np.einsum("si,mij,sj->sm", vs, q6, vs)), axis=1)
    return (bnorm <= SAMPLED_RANK_EPS * scale) | (sq <= SAMPLED_RANK_EPS * bnorm**2)


def is_definite6(
    psi: AltForm,
    mode: str = "exact",
    n: int = 64,
    seed: int | None = None,
    vol_ref: AltForm | None = None,
):
    """Definiteness of a 6-dim 3-form.

    ``mode="exact"`` returns a bool from the sign of the orbit invariant.
    ``mode="sampled"`` returns a :class:`SampledVerdict` from the rank
    criterion: iota(v)psi must have rank 4 for every nonzero v.  Rank-deficient
    directions form a measure-zero cone on the non-definite open orbit, so
    the coordinate directions and ``n`` seeded random directions are each
    driven to a nearby minimiser of |iota(v)psi ^ iota(v)psi| before the rank
    is read off.
    """
    _check3(psi, 6)
    if mode == "exact":
        return hitchin_lambda(psi, vol_ref).verdict is Orbit.DEFINITE
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if seed is None:
        raise ValueError("sampled mode needs an explicit seed")
    if psi.norm == 0.0:
        return SampledVerdict(False, np.eye(6)[0], 0, n, seed)
    rng = np.random.default_rng(seed)
    raw = np.vstack([np.eye(6), rng.standard_normal((n, 6))])
    c, q6 = _square_quadrics(psi)
    for candidates in (raw, _refine_null_direction(q6, raw)):
        bad = np.flatnonzero(_rank_deficient(c, q6, candidates, psi.norm))
        if bad.size:
            v = candidates[bad[0]]
            rank = two_form_rank(interior(v, psi), eps=SAMPLED_RANK_EPS)
            return SampledVerdict(False, v, min(rank, 2), n, seed)
    return SampledVerdict(True, None, None, n, seed)


def almost_complex(psi: AltForm, vol_ref: AltForm | None = None) -> np.ndarray:
    """The almost complex structure J_psi as a matrix on vector components.

    Normalised so that for psi0 the (1,0)-forms are v^j + i w^j, i.e.
    J(d/dv_j) = d/dw_j.
    """
    vol_ref = reference_volume(6) if vol_ref is None else vol_ref
    verdict = hitchin_lambda(psi, vol_ref)
    if verdict.verdict is not Orbit.DEFINITE:
        raise NotDefinite("J_psi needs a definite 3-form", {"lambda": verdict.lam})
    k = hitchin_endomorphism(psi, vol_ref)
    raw = _raw_lambda(psi, vol_ref)
    return _J_SIGN() * k / np.sqrt(-raw)


@lru_cache(maxsize=None)
def _J_SIGN() -> float:
    psi0, vol = normal_form_psi0(), reference_volume(6)
    k = hitchin_endomorphism(psi0, vol) / np.sqrt(-_raw_lambda(psi0, vol))
    v1, w1 = label_slot("v1"), label_slot("w1")
    return float(np.sign(k[w1, v1]))


def g2_bilinear(phi: AltForm, vol_ref: AltForm | None = None) -> np.ndarray:
    """b(u, v) with b(u, v) vol_ref = iota(u)phi ^ iota(v)phi ^ phi."""
    _check3(phi, 7)
    vol_ref = reference_volume(7) if vol_ref is None else vol_ref
    c = _top_scalar(vol_ref, 7)
    contractions = [interior(np.eye(7)[j], phi) for j in range(7)]
    b = np.empty((7, 7))
    for i in range(7):
        left = wedge(contractions[i], phi)
        for j in range(i, 7):
            b[i, j] = b[j, i] = wedge(left, contractions[j]).coeffs[0] / c
    return b


@dataclass(frozen=True)
class G2MetricData:
    bilinear: np.ndarray
    metric: np.ndarray
    volume: float
    orientation: int = 1
    eigenvalues: np.ndarray = field(default=None, repr=False)


def g2_metric_volume(phi: AltForm, vol_ref: AltForm | None = None) -> G2MetricData:
    """Metric and volume induced by a definite 7-dim 3-form.

    ``orientation`` is -1 when ``vol_ref`` had to be negated, i.e. when the
    induced orientation is opposite to the reference one.
    """
    vol_ref = reference_volume(7) if vol_ref is None else vol_ref
    b = g2_bilinear(phi, vol_ref)
    eig = np.linalg.eigvalsh(b)
    floor = SPD_FLOOR * max(np.max(np.abs(eig)), np.finfo(float).tiny)
    if np.all(eig > floor):
        orientation = 1
    elif np.all(eig < -floor):
        orientation, b, eig = -1, -b, -eig[::-1]
    else:
        raise NotDefinite("bilinear form is indefinite or singular", {"eigenvalues": eig})
    metric = 6.0 ** (-2.0 / 9.0) * np.prod(eig) ** (-1.0 / 9.0) * b
    volume = float(np.sqrt(np.linalg.det(metric)))
    return G2MetricData(b if orientation == 1 else -b, metric, volume, orientation, eig)


def is_definite7(phi: AltForm, vol_ref: AltForm | None = None) -> bool:
    try:
        g2_metric_volume(phi, vol_ref)
    except NotDefinite:
        return False
    return True
