"""Dense exterior algebra over a fixed coframe in dimension 6 or 7.

Coefficients of a degree-k form are stored over the k-subsets of
``range(n)`` in lexicographic order, so a 3-form in dimension 7 has
``C(7, 3) = 35`` entries.  All sign/index tables are cached per
``(n, p, q)`` and the products themselves are vectorised with numpy.

Two labelings of the same slots are supported:

* slice labels ``s1 s2 s3 m1 m2 m3 [dt]`` (base coframe sigma, fiber
  coframe mu, time),
* normal-form labels ``w1 w2 w3 v1 v2 v3 [v0]``, i.e. ``w`` sits on the
  sigma slots and ``v`` on the mu slots.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import DegreeError, DimensionError

SLICE_LABELS = ("s1", "s2", "s3", "m1", "m2", "m3", "dt")
NORMAL_LABELS = ("w1", "w2", "w3", "v1", "v2", "v3", "v0")
SUPPORTED_DIMS = (6, 7)

EPS_RANK = 1e-12


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(combinations(range(n), k))


@lru_cache(maxsize=None)
def _position(n: int, k: int) -> dict[tuple[int, ...], int]:
    return {idx: pos for pos, idx in enumerate(multi_indices(n, k))}


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _wedge_table(n: int, p: int, q: int):
    rows_a, rows_b, rows_out, signs = [], [], [], []
    pos_out = _position(n, p + q)
    for ia, I in enumerate(multi_indices(n, p)):
        sI = set(I)
        for ib, J in enumerate(multi_indices(n, q)):
            if sI.intersection(J):
                continue
            merged = I + J
            rows_a.append(ia)
            rows_b.append(ib)
            rows_out.append(pos_out[tuple(sorted(merged))])
            signs.append(_perm_sign(merged))
    return (
        np.array(rows_a, dtype=np.intp),
        np.array(rows_b, dtype=np.intp),
        np.array(rows_out, dtype=np.intp),
        np.array(signs, dtype=float),
    )


@lru_cache(maxsize=None)
def _interior_table(n: int, k: int):
    # iota(e_j) e^I = sum_m (-1)^m delta(j, I_m) e^{I without I_m}
    rows_in, vec_idx, rows_out, signs = [], [], [], []
    pos_out = _position(n, k - 1)
    for iI, I in enumerate(multi_indices(n, k)):
        for m, j in enumerate(I):
            rows_in.append(iI)
            vec_idx.append(j)
            rows_out.append(pos_out[I[:m] + I[m + 1:]])
            signs.append(-1.0 if m % 2 else 1.0)
    return (
        np.array(rows_in, dtype=np.intp),
        np.array(vec_idx, dtype=np.intp),
        np.array(rows_out, dtype=np.intp),
        np.array(signs, dtype=float),
    )


@dataclass(frozen=True, eq=False)
class AltForm:
    """A constant-coefficient alternating form of fixed degree."""

    dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.dim not in SUPPORTED_DIMS:
            raise DimensionError(f"unsupported dimension {self.dim}")
        if not 0 <= self.degree <= self.dim:
            raise DegreeError(f"degree {self.degree} outside 0..{self.dim}")
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if c.size != comb(self.dim, self.degree):
            raise DegreeError(
                f"expected {comb(self.dim, self.degree)} coefficients, got {c.size}"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, dim: int, degree: int) -> AltForm:
        return cls(dim, degree, np.zeros(comb(dim, degree)))

    @classmethod
    def basis(cls, dim: int, *indices: int) -> AltForm:
        """The monomial e^{i1} ^ ... ^ e^{ik} for 0-based slot indices."""
        if len(set(indices)) != len(indices):
            return cls.zero(dim, len(indices))
        c = np.zeros(comb(dim, len(indices)))
        c[_position(dim, len(indices))[tuple(sorted(indices))]] = _perm_sign(indices)
        return cls(dim, len(indices), c)

    @classmethod
    def from_terms(cls, dim: int, degree: int, terms: dict, labels=None) -> AltForm:
        """Build a form from ``{label-tuple: coefficient}``.

        Labels may be slot integers or names from either labeling.
        """
        out = cls.zero(dim, degree)
        for key, val in terms.items():
            slots = [label_slot(k, labels) for k in key]
            out = out + val * cls.basis(dim, *slots)
        return out

    @classmethod
    def one_form(cls, vec) -> AltForm:
        v = np.asarray(vec, dtype=float)
        return cls(v.size, 1, v)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def coefficient(self, *slots) -> float:
        slots = [label_slot(s) for s in slots]
        key = tuple(sorted(slots))
        if len(set(key)) != len(key):
            return 0.0
        return _perm_sign(slots) * float(self.coeffs[_position(self.dim, self.degree)[key]])

    def _check(self, other: AltForm):
        if not isinstance(other, AltForm):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if other.degree != self.degree:
            raise DegreeError(f"degree mismatch: {self.degree} vs {other.degree}")
        return None

    def __add__(self, other: AltForm) -> AltForm:
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AltForm(self.dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: AltForm) -> AltForm:
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AltForm(self.dim, self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> AltForm:
        return AltForm(self.dim, self.degree, -self.coeffs)

    def __mul__(self, scalar) -> AltForm:
        return AltForm(self.dim, self.degree, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> AltForm:
        return AltForm(self.dim, self.degree, self.coeffs / float(scalar))

    def __xor__(self, other: AltForm) -> AltForm:
        return wedge(self, other)

    def allclose(self, other: AltForm, atol: float = 1e-12) -> bool:
        return (
            self.dim == other.dim
            and self.degree == other.degree
            and bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))
        )

    def __repr__(self) -> str:
        return f"AltForm(dim={self.dim}, degree={self.degree}, {format_form(self)})"


def label_slot(label, labels=None) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    if labels is not None:
        return list(labels).index(label)
    if label in SLICE_LABELS:
        return SLICE_LABELS.index(label)
    if label in NORMAL_LABELS:
        return NORMAL_LABELS.index(label)
    raise KeyError(f"unknown coframe label {label!r}")


def format_form(alpha: AltForm, labels=SLICE_LABELS, tol: float = 0.0) -> str:
    parts = []
    for idx, c in zip(multi_indices(alpha.dim, alpha.degree), alpha.coeffs):
        if abs(c) > tol:
            name = "^".join(labels[i] for i in idx) or "1"
            parts.append(f"{c:+.6g}*{name}")
    return " ".join(parts) if parts else "0"


def wedge(alpha: AltForm, beta: AltForm) -> AltForm:
    if alpha.dim != beta.dim:
        raise DimensionError(f"dimension mismatch: {alpha.dim} vs {beta.dim}")
    n, p, q = alpha.dim, alpha.degree, beta.degree
    if p + q > n:
        raise DegreeError(f"degree overflow: {p} + {q} > {n}")
    ia, ib, io, sg = _wedge_table(n, p, q)
    out = np.zeros(comb(n, p + q))
    np.add.at(out, io, sg * alpha.coeffs[ia] * beta.coeffs[ib])
    return AltForm(n, p + q, out)


def wedge_all(*forms: AltForm) -> AltForm:
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def wedge_power(beta: AltForm, r: int) -> AltForm:
    out = AltForm(beta.dim, 0, np.ones(1))
    for _ in range(r):
        out = wedge(out, beta)
    return out


def interior(vector, alpha: AltForm) -> AltForm:
    """Contraction of ``alpha`` with a tangent vector (components dual to the coframe)."""
    x = np.asarray(vector, dtype=float).reshape(-1)
    if x.size != alpha.dim:
        raise DimensionError(f"vector of length {x.size} on a dimension-{alpha.dim} form")
    if alpha.degree == 0:
        raise DegreeError("cannot contract a 0-form")
    ri, vi, ro, sg = _interior_table(alpha.dim, alpha.degree)
    out = np.zeros(comb(alpha.dim, alpha.degree - 1))
    np.add.at(out, ro, sg * x[vi] * alpha.coeffs[ri])
    return AltForm(alpha.dim, alpha.degree - 1, out)


def unit_vector(dim: int, slot) -> np.ndarray:
    v = np.zeros(dim)
    v[label_slot(slot)] = 1.0
    return v


def two_form_rank(beta: AltForm, eps: float = EPS_RANK) -> int:
    """Rank 2r of a 2-form, r the largest power with beta^r != 0.

    A wedge power counts as zero when all its coefficients are at most
    ``eps * max|beta|^r``.
    """
    if beta.degree != 2:
        raise DegreeError("two_form_rank needs a 2-form")
    scale = beta.norm
    if scale == 0.0:
        return 0
    power = AltForm(beta.dim, 0, np.ones(1))
    rank = 0
    for r in range(1, beta.dim // 2 + 1):
        power = wedge(power, beta)
        if power.norm <= eps * scale**r:
            break
        rank = 2 * r
    return rank


def pullback(alpha: AltForm, g) -> AltForm:
    """Pullback by the linear map ``g``: (g*alpha)(x, ...) = alpha(g x, ...).

    On coefficients this is g*e^I = sum_J det(g[I, J]) e^J.
    """
    g = np.asarray(g, dtype=float)
    n, k = alpha.dim, alpha.degree
    if g.shape != (n, n):
        raise DimensionError(f"map of shape {g.shape} on a dimension-{n} form")
    if k == 0:
        return alpha
    idx = np.array(multi_indices(n, k))
    # minors[I, J] = g[I_a, J_b] over a, b
    minors = g[idx[:, None, :, None], idx[None, :, None, :]]
    return AltForm(n, k, alpha.coeffs @ np.linalg.det(minors))


def top_form(dim: int, scale: float = 1.0) -> AltForm:
    return AltForm(dim, dim, np.array([scale]))


def restrict(alpha: AltForm, drop_slot: int) -> AltForm:
    """Restriction to the coordinate hyperplane ``x_drop = 0`` of a 7-dim form, as a 6-dim form."""
    if alpha.dim != 7:
        raise DimensionError("restriction is defined from dimension 7 to 6")
    keep = [i for i in range(7) if i != drop_slot]
    out = np.zeros(comb(6, alpha.degree))
    pos6 = _position(6, alpha.degree)
    for c, idx in zip(alpha.coeffs, multi_indices(7, alpha.degree)):
        if drop_slot in idx:
            continue
        out[pos6[tuple(keep.index(i) for i in idx)]] = c
    return AltForm(6, alpha.degree, out)


def extend(alpha: AltForm) -> AltForm:
    """View a 6-dim form as a 7-dim form not involving the last slot."""
    if alpha.dim != 6:
        raise DimensionError("extend maps dimension 6 to 7")
    out = np.zeros(comb(7, alpha.degree))
    pos7 = _position(7, alpha.degree)
    for c, idx in zip(alpha.coeffs, multi_indices(6, alpha.degree)):
        out[pos7[idx]] = c
    return AltForm(7, alpha.degree, out)


DT_SLOT = 6
