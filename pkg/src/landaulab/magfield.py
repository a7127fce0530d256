"""Constant magnetic field matrices, their norms and real normal form.

A field is a real antisymmetric ``d x d`` matrix ``B``.  The orthogonal
conjugator ``U`` brings it to block form

    U^T B U = diag([[0, C_1], [-C_1, 0]], ..., [[0, C_m], [-C_m, 0]], 0, ..., 0)

with ``C_1 >= ... >= C_m > 0``.  The Landau operator then splits into
independent two-dimensional Landau problems plus a free Laplacian on the
null space, which gives the closed-form spectrum used throughout.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .defaults import ANTISYM_TOL, CLUSTER_TOL, RANK_TOL


class FieldError(ValueError):
    """Raised for malformed field matrices."""


@dataclass(frozen=True)
class FieldMatrix:
    """Antisymmetric field matrix.

    Antisymmetry is checked to ``ANTISYM_TOL`` relative to the largest entry;
    accepted input is then antisymmetrized exactly.
    """

    entries: np.ndarray

    def __post_init__(self):
        B = np.array(self.entries, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise FieldError(f"field matrix must be square, got shape {B.shape}")
        if B.shape[0] < 2:
            raise FieldError("field matrix needs dimension d >= 2")
        if not np.all(np.isfinite(B)):
            raise FieldError("field matrix has non-finite entries")
        viol = np.abs(B + B.T)
        if viol.max() > ANTISYM_TOL * max(1.0, float(np.abs(B).max())):
            k, l = np.unravel_index(np.argmax(viol), viol.shape)
            raise FieldError(
                f"field matrix is not antisymmetric: max |B_kl + B_lk| = {viol.max():.3e} "
                f"at ({k}, {l})"
            )
        B = 0.5 * (B - B.T)
        B.setflags(write=False)
        object.__setattr__(self, "entries", B)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_json(cls, text: str) -> "FieldMatrix":
        return cls(np.array(json.loads(text), dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.entries.tolist())

    @classmethod
    def from_blocks(cls, frequencies, nullity: int = 0) -> "FieldMatrix":
        """Block-diagonal field with the given frequencies (already in normal form)."""
        freqs = list(frequencies)
        d = 2 * len(freqs) + nullity
        B = np.zeros((d, d))
        for j, c in enumerate(freqs):
            B[2 * j, 2 * j + 1] = c
            B[2 * j + 1, 2 * j] = -c
        return cls(B)

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, scale: float = 1.0) -> "FieldMatrix":
        A = rng.normal(scale=scale, size=(d, d))
        A = np.triu(A, 1)
        return cls(A - A.T)


def as_field(B) -> FieldMatrix:
    return B if isinstance(B, FieldMatrix) else FieldMatrix(np.asarray(B, dtype=float))


@dataclass(frozen=True)
class FieldNorms:
    frobenius_sq: float
    one_norm_Bsq: float
    op_norm: float


@dataclass(frozen=True)
class BlockNormalForm:
    conjugator: np.ndarray
    frequencies: tuple
    nullity: int
    field: FieldMatrix = field(repr=False, compare=False, default=None)

    @property
    def dim(self) -> int:
        return self.conjugator.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.frequencies)

    def block_matrix(self) -> np.ndarray:
        """The block matrix built from the frequencies."""
        return FieldMatrix.from_blocks(self.frequencies, self.nullity).entries

    def to_dict(self) -> dict:
        return {
            "u": self.conjugator.tolist(),
            "frequencies": [float(c) for c in self.frequencies],
            "nullity": int(self.nullity),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "BlockNormalForm":
        U = np.array(data["u"], dtype=float)
        freqs = tuple(float(c) for c in data["frequencies"])
        nullity = int(data["nullity"])
        if 2 * len(freqs) + nullity != U.shape[0]:
            raise FieldError("2*len(frequencies) + nullity must equal the dimension")
        B = U @ FieldMatrix.from_blocks(freqs, nullity).entries @ U.T
        B = 0.5 * (B - B.T)
        return cls(U, freqs, nullity, FieldMatrix(B))


def _clusters(values: np.ndarray, tol: float) -> list:
    """Group sorted-descending values into runs closer than ``tol``."""
    groups = []
    for i, v in enumerate(values):
        if groups and abs(values[groups[-1][-1]] - v) <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _greedy_planes(P: np.ndarray, B: np.ndarray, c: float) -> list:
    """Split the invariant subspace with projector ``P`` into 2-planes.

    Coordinates are scanned in order; the projection of ``e_k`` onto what
    remains becomes the first column of the next plane, the second column is
    fixed by ``B u2 = c u1``.  This makes the output a deterministic function
    of ``B``.
    """
    d = P.shape[0]
    rank = int(round(np.trace(P)))
    planes = []
    remaining = P.copy()
    for k in range(d):
        if len(planes) * 2 >= rank:
            break
        v = remaining[:, k]
        nv = np.linalg.norm(v)
        if nv < 1e-6:
            continue
        u1 = v / nv
        u2 = -(B @ u1) / c
        u2 -= u1 * (u1 @ u2)
        u2 /= np.linalg.norm(u2)
        planes.append((u1, u2))
        remaining = remaining - np.outer(u1, u1) - np.outer(u2, u2)
    return planes


def _greedy_null(P: np.ndarray) -> list:
    d = P.shape[0]
    rank = int(round(np.trace(P)))
    cols = []
    remaining = P.copy()
    for k in range(d):
        if len(cols) >= rank:
            break
        v = remaining[:, k]
        nv = np.linalg.norm(v)
        if nv < 1e-6:
            continue
        u = v / nv
        cols.append(u)
        remaining = remaining - np.outer(u, u)
    return cols


def normal_form(B) -> BlockNormalForm:
    """Real normal form of an antisymmetric matrix.

    Frequencies are the positive eigenvalues of the Hermitian matrix ``iB``
    sorted descending.  Each 2-plane ``(u1, u2)`` is oriented so that
    ``u1^T B u2 = +C_j``; planes sharing a frequency are chosen greedily from
    the coordinate axes, which fixes the in-plane rotation and the ordering.
    """
    F = as_field(B)
    Bm = F.entries
    d = F.dim
    lam, V = np.linalg.eigh(1j * Bm)
    op = float(np.max(np.abs(lam))) if d else 0.0
    rank_cut = RANK_TOL * op if op > 0 else 0.0
    pos = np.where(lam > max(rank_cut, 0.0))[0] if op > 0 else np.array([], dtype=int)
    # descending order of positive eigenvalues
    pos = pos[np.argsort(-lam[pos], kind="stable")]
    vals = lam[pos]
    columns = []
    freqs = []
    for grp in _clusters(vals, CLUSTER_TOL * max(op, 1.0)):
        idx = pos[grp]
        Vc = V[:, idx]
        P = 2.0 * np.real(Vc @ Vc.conj().T)
        c = float(np.mean(lam[idx]))
        for u1, u2 in _greedy_planes(P, Bm, c):
            columns.extend([u1, u2])
            freqs.append(c)
    null_dim = d - 2 * len(freqs)
    if null_dim:
        # orthogonal complement of the rotation planes
        if columns:
            Q = np.column_stack(columns)
            P0 = np.eye(d) - Q @ Q.T
        else:
            P0 = np.eye(d)
        columns.extend(_greedy_null(P0))
    U = np.column_stack(columns) if columns else np.eye(d)
    # one polishing step keeps U^T U = Id at the 1e-15 level
    Uq, Rq = np.linalg.qr(U)
    U = Uq * np.sign(np.diag(Rq)) + 0.0
    U.setflags(write=False)
    return BlockNormalForm(U, tuple(freqs), null_dim, F)


def field_norms(B) -> FieldNorms:
    """Frobenius norm squared, column-sum norm of B^2, and |B|_op."""
    F = as_field(B)
    Bm = F.entries
    B2 = Bm @ Bm
    frob = float(np.sum(Bm * Bm))
    one = float(np.max(np.sum(np.abs(B2), axis=0)))
    nf = normal_form(F)
    op = max(nf.frequencies) if nf.frequencies else 0.0
    return FieldNorms(frob, one, float(op))


def spectrum_bottom(nf: BlockNormalForm) -> float:
    """Bottom of the spectrum, the sum of the block frequencies."""
    return float(sum(nf.frequencies))


@dataclass(frozen=True)
class Level:
    n: tuple
    base_energy: float
    band: bool


def enumerate_levels(nf: BlockNormalForm, E: float) -> list:
    """All Landau levels with base energy at most ``E``.

    Returns :class:`Level` records sorted by energy, ties broken
    lexicographically in ``n``.  With a nonzero null space each level is the
    bottom of a band ``[base_energy, inf)``.
    """
    if E < 0:
        raise ValueError("energy cutoff must be nonnegative")
    C = list(nf.frequencies)
    band = nf.nullity > 0
    if not C:
        return [Level((), 0.0, band)] if E >= 0 else []
    E0 = sum(C)
    if E < E0:
        return []
    out = []

    def rec(j, prefix, energy):
        if j == len(C):
            out.append(Level(tuple(prefix), energy, band))
            return
        n = 0
        while True:
            e = energy + (2 * n + 1) * C[j] + sum(C[j + 1:])
            if e > E:
                break
            rec(j + 1, prefix + [n], energy + (2 * n + 1) * C[j])
            n += 1

    rec(0, [], 0.0)
    out.sort(key=lambda lv: (lv.base_energy, lv.n))
    return out


def brute_force_levels(nf: BlockNormalForm, E: float) -> list:
    """Exhaustive box search, used as an independent check of the enumeration."""
    C = list(nf.frequencies)
    if not C:
        return [((), 0.0)]
    box = max(0, math.ceil(E / (2 * min(C))))
    found = []
    for n in itertools.product(range(box + 1), repeat=len(C)):
        e = sum((2 * k + 1) * c for k, c in zip(n, C))
        if e <= E:
            found.append((n, e))
    return sorted(found, key=lambda t: (t[1], t[0]))
