"""Observability constants on truncated subspaces and the related experiments.

On a truncated orthonormal basis the optimal constant in
``||f||^2 <= C ||f||^2_{L2(S)}`` is ``1 / lambda_min`` of the restricted Gram
matrix ``M_ij = <phi_i, 1_S phi_j>``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .defaults import L_MAX_DIAGNOSTIC_STEP, TOLERANCES
from .eigenbasis import SpectralBasis, SpectralFunction, build_basis, ground_state
from .magderiv import (CellPartition, bernstein_prime_bound, derivative_cell_norms,
                       effective_extent)
from .magfield import as_field, field_norms, normal_form
from .thickset import (Bitmap, FullSpace, PeriodicHoles, SamplingSet, Stripes, ball_volume,
                       hole_set, thickness_estimate)

ETA_ORTH = TOLERANCES["eta_orth"]


class CoverageError(RuntimeError):
    """The quadrature box misses part of the basis mass."""


class ObservabilityError(RuntimeError):
    """The restricted Gram matrix has a significantly negative eigenvalue."""


# --------------------------------------------------------------------------
# restricted Gram matrix
#
# M = G - int_{S^c} conj(phi_i) phi_j, with G the full Gram matrix on the
# Hermite grid and the complement integrated by rules adapted to its pieces
# (polar rules on holes, Gauss-Legendre on voxels and stripe gaps), so the
# indicator discontinuity never enters a quadrature.

def _mass_box(basis: SpectralBasis, shift) -> tuple:
    ext = np.array(effective_extent(basis.grid_values(), 1e-18))
    return shift - ext, shift + ext


def _gl(n: int, a: float, b: float):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


def _ball_rule(d: int, r: float, n_r: int, n_ang: int):
    """Product rule on the ball of radius ``r`` (d = 2 or 3), exact for smooth integrands."""
    rr, wr = _gl(n_r, 0.0, r)
    if d == 2:
        th = 2 * np.pi * np.arange(n_ang) / n_ang
        R, T = np.meshgrid(rr, th, indexing="ij")
        W = np.outer(wr * rr, np.full(n_ang, 2 * np.pi / n_ang))
        pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1)
        return pts.reshape(-1, 2), W.ravel()
    if d == 3:
        ct, wc = np.polynomial.legendre.leggauss(n_ang // 2)
        ph = 2 * np.pi * np.arange(n_ang) / n_ang
        R, CT, PH = np.meshgrid(rr, ct, ph, indexing="ij")
        ST = np.sqrt(1 - CT ** 2)
        W = (wr * rr ** 2)[:, None, None] * wc[None, :, None] * np.full(n_ang, 2 * np.pi / n_ang)
        pts = np.stack([R * ST * np.cos(PH), R * ST * np.sin(PH), R * CT], axis=-1)
        return pts.reshape(-1, 3), W.ravel()
    raise ValueError("ball rule implemented for d = 2 and 3")


def _hole_rule(basis, S: PeriodicHoles, lo, hi):
    deg = max(sum(m.n) + sum(m.l) for m in basis.modes) if basis.modes else 0
    n_r = 24 + deg
    n_ang = 2 * (32 + 2 * deg)
    base_pts, base_w = _ball_rule(S.dim, S.r, n_r, n_ang)
    off = np.array(S.offset)
    ranges = [np.arange(math.floor((lo[k] - S.r - off[k]) / S.L),
                        math.ceil((hi[k] + S.r - off[k]) / S.L) + 1) for k in range(S.dim)]
    pts, wts = [], []
    for idx in itertools.product(*ranges):
        c = off + S.L * np.array(idx, dtype=float)
        pts.append(base_pts + c)
        wts.append(base_w)
    return np.concatenate(pts), np.concatenate(wts)


def _voxel_rule(S: Bitmap, mask: np.ndarray, lo, hi, q: int = 4):
    vox = S.voxel
    t, w = np.polynomial.legendre.leggauss(q)
    sub = np.stack([m.ravel() for m in np.meshgrid(*[0.5 * (t + 1)] * S.dim, indexing="ij")], -1)
    subw = np.prod(np.stack(np.meshgrid(*[0.5 * w] * S.dim, indexing="ij"), -1), axis=-1).ravel()
    idx = np.argwhere(mask)
    corners = np.array(S.box[0]) + idx * vox
    keep = np.all((corners + vox >= lo) & (corners <= hi), axis=1)
    corners = corners[keep]
    pts = (corners[:, None, :] + sub[None, :, :] * vox).reshape(-1, S.dim)
    wts = np.tile(subw * np.prod(vox), corners.shape[0])
    return pts, wts


def _stripe_rule(S: Stripes, lo, hi, n_other: int = 160, q: int = 24):
    k = S.axis
    gaps = []
    j0 = math.floor((lo[k] - S.offset) / S.period) - 1
    j1 = math.ceil((hi[k] - S.offset) / S.period) + 1
    for j in range(j0, j1 + 1):
        a = S.offset + j * S.period + S.width
        b = S.offset + (j + 1) * S.period
        a, b = max(a, lo[k]), min(b, hi[k])
        if b > a:
            gaps.append((a, b))
    if not gaps:
        return np.zeros((0, S.dim)), np.zeros(0)
    axes, weights = [], []
    for ax in range(S.dim):
        if ax == k:
            rules = [_gl(q, a, b) for a, b in gaps]
            axes.append(np.concatenate([r[0] for r in rules]))
            weights.append(np.concatenate([r[1] for r in rules]))
        else:
            x, w = _gl(n_other, lo[ax], hi[ax])
            axes.append(x)
            weights.append(w)
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], -1)
    wts = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), -1), axis=-1).ravel()
    return pts, wts


def _midpoint_rule(S: SamplingSet, lo, hi, h: float):
    axes = []
    for k in range(S.dim):
        n = int(math.ceil((hi[k] - lo[k]) / h)) + 1
        axes.append(0.5 * (lo[k] + hi[k]) + h * (np.arange(n) - 0.5 * (n - 1)))
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], -1)
    inside = S.indicator(pts)
    return pts[inside], np.full(int(inside.sum()), h ** S.dim)


def _translated_modes(basis: SpectralBasis, x: np.ndarray, shift) -> np.ndarray:
    vals = basis.evaluate(x - shift)
    if np.any(shift != 0):
        vals = vals * np.exp(-0.5j * (x @ (basis.field.entries @ shift)))[:, None]
    return vals


def _accumulate(basis, pts, wts, shift, chunk):
    K = basis.size
    out = np.zeros((K, K), dtype=complex)
    for a in range(0, pts.shape[0], chunk):
        v = _translated_modes(basis, pts[a:a + chunk], shift)
        out += (v.conj() * wts[a:a + chunk, None]).T @ v
    return out


def restricted_gram(basis: SpectralBasis, S: SamplingSet, *, shift=None, method: str = "auto",
                    h: float | None = None, coverage_tol: float = ETA_ORTH,
                    chunk: int = 32768) -> np.ndarray:
    """``M_ij = <T_y phi_i, 1_S T_y phi_j>`` (``y = shift``, default 0).

    ``method="auto"`` subtracts the integral over the complement of ``S``
    from the full Gram matrix using rules fitted to the complement's pieces;
    ``method="midpoint"`` integrates the indicator directly on a uniform grid
    of spacing ``h`` (first-order accurate at the boundary, kept as a
    cross-check).  Raises :class:`CoverageError` if the Hermite grid misses
    basis mass.
    """
    if S.dim != basis.dim:
        raise ValueError("set and basis dimensions differ")
    shift = np.zeros(basis.dim) if shift is None else np.asarray(shift, dtype=float)
    G = basis.grid_values().gram()
    G = 0.5 * (G + G.conj().T)
    cov = float(np.abs(G - np.eye(basis.size)).max()) if basis.size else 0.0
    if cov > coverage_tol:
        raise CoverageError(f"basis grid misses mass: |G - Id|_max = {cov:.3e}")
    lo, hi = _mass_box(basis, shift)
    if isinstance(S, FullSpace):
        return G
    if method == "auto" and isinstance(S, PeriodicHoles) and S.dim in (2, 3):
        M = G - _accumulate(basis, *_hole_rule(basis, S, lo, hi), shift, chunk)
    elif method == "auto" and isinstance(S, Bitmap):
        if S.outside:
            M = G - _accumulate(basis, *_voxel_rule(S, ~S.bits, lo, hi), shift, chunk)
        else:
            M = _accumulate(basis, *_voxel_rule(S, S.bits, lo, hi), shift, chunk)
    elif method == "auto" and isinstance(S, Stripes):
        M = G - _accumulate(basis, *_stripe_rule(S, lo, hi), shift, chunk)
    else:
        if h is None:
            cmin = min(basis.nf.frequencies) if basis.nf.frequencies else 1.0
            h = (0.02 if basis.dim <= 2 else 0.1) / math.sqrt(cmin)
        M = _accumulate(basis, *_midpoint_rule(S, lo, hi, h), shift, chunk)
    return 0.5 * (M + M.conj().T)


def set_mass(f: SpectralFunction, S: SamplingSet, *, h: float | None = None) -> float:
    """``||f||^2_{L2(S)}`` for a possibly translated spectral function."""
    c = f.coefficients
    M = restricted_gram(f.basis, S, shift=f.shift, h=h)
    return float(np.real(c.conj() @ M @ c))


@dataclass
class ObservabilityResult:
    lambda_min: float
    constant: float
    worst: np.ndarray
    basis: dict
    set: dict
    l_max: int
    truncation_delta: float = None
    constant_refined: float = None
    thickness: dict = None

    def to_dict(self) -> dict:
        out = {"lambda_min": self.lambda_min, "constant": self.constant,
               "basis": self.basis, "set": self.set, "l_max": self.l_max,
               "truncation_delta": self.truncation_delta,
               "constant_refined": self.constant_refined,
               "label": "truncated-subspace constant"}
        if self.thickness is not None:
            out["thickness"] = self.thickness
        return out


def _lambda_min(M: np.ndarray):
    w, V = scipy.linalg.eigh(M)
    lam = float(w[0])
    if lam < -1e-10:
        raise ObservabilityError(f"restricted Gram matrix has eigenvalue {lam:.3e} < -1e-10")
    lam = max(lam, 0.0)
    return lam, V[:, 0]


def _basis_summary(basis: SpectralBasis) -> dict:
    return {"frequencies": list(basis.nf.frequencies), "nullity": basis.nf.nullity,
            "E": basis.E, "l_max": basis.l_max, "size": basis.size}


def observability_constant(basis: SpectralBasis, S: SamplingSet, *, truncation: bool = True,
                           h: float | None = None, thickness_ell=None) -> ObservabilityResult:
    """``1 / lambda_min`` of the restricted Gram matrix, with diagnostics.

    With ``truncation`` the computation is repeated with ``l_max + 4`` and the
    relative change of the constant is reported.  ``thickness_ell`` embeds a
    thickness certificate of ``S`` for boxes of that size.
    """
    M = restricted_gram(basis, S, h=h)
    lam, vec = _lambda_min(M)
    const = 1.0 / lam if lam > 0 else math.inf
    res = ObservabilityResult(lam, const, vec, _basis_summary(basis), S.to_dict(), basis.l_max)
    if truncation:
        big = build_basis(basis.nf, basis.E, basis.l_max + L_MAX_DIAGNOSTIC_STEP, basis.null_modes,
                          n_nodes=basis.grid.n_nodes[0], sigma_null=basis.sigma_null, verify=False)
        lam2, _ = _lambda_min(restricted_gram(big, S, h=h))
        c2 = 1.0 / lam2 if lam2 > 0 else math.inf
        res.constant_refined = c2
        res.truncation_delta = abs(c2 - const) / c2 if math.isfinite(c2) else math.inf
    if thickness_ell is not None and not isinstance(S, FullSpace):
        res.thickness = thickness_estimate(S, thickness_ell).to_dict()
    return res


# --------------------------------------------------------------------------
# the evaluable theorem bound

def default_constants(d: int) -> dict:
    """Constants read off the proof.

    ``A1 = A2 = 10 sqrt(2) (d+2) d^((d+1)/2)``, ``A3 = 200 (d+2)^2 d^(d+1)``;
    the exponent is ``2 log M / log 2 + 1`` with ``log M`` bounded by
    ``log(2(d+2)) + A1 |l| sqrt(E) + A2 |l| b^(1/2) + A3 |l|^2 b``, and
    ``C1 = 24 |S^(d-1)| diam^d`` for the unit cube.
    """
    A1 = 10 * math.sqrt(2) * (d + 2) * d ** ((d + 1) / 2)
    A3 = 200 * (d + 2) ** 2 * d ** (d + 1)
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    ln2 = math.log(2)
    return {
        "C1": 24 * sphere * d ** (d / 2),
        "C2": 1 + 2 * math.log(2 * (d + 2)) / ln2,
        "C3": 2 * A1 / ln2,
        "C4": 2 * A3 / ln2,
        "c_d": float(d),
    }


@dataclass(frozen=True)
class TheoremBound:
    C1: float
    C2: float
    C3: float
    C4: float
    exponent: float
    log_bound: float
    variant: str
    prefactor: float = 1.0

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound) if self.log_bound < 709 else math.inf

    def to_dict(self) -> dict:
        return {"C1": self.C1, "C2": self.C2, "C3": self.C3, "C4": self.C4,
                "exponent": self.exponent, "log_bound": self.log_bound,
                "bound": self.bound, "variant": self.variant, "prefactor": self.prefactor}


THEOREM_VARIANTS = ("abstract", "refined", "energy", "final")


def theorem_bound(ell, rho: float, E: float, B, constants: dict | None = None,
                  variant: str = "abstract") -> TheoremBound:
    """Evaluate ``(C1/rho)^(C2 + C3|l|_1 sqrt(E) + C4 |l|_1^2 sqrt(|B^2|_1))``.

    Variants: ``refined`` adds the ``C4 |l|_1 |B^2|_1^(1/4)`` term and the
    prefactor 4 of the proof; ``energy`` replaces ``sqrt(|B^2|_1)`` by
    ``sqrt(c_d) E``; ``final`` uses the literal ``|l|_1^2 E sqrt(|B|_1)``
    term.  The value is carried as a logarithm since it overflows quickly.
    """
    ell = np.atleast_1d(np.asarray(ell, dtype=float))
    F = as_field(B)
    d = F.dim
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if np.any(ell <= 0) or E <= 0:
        raise ValueError("need positive box sides and E > 0")
    c = default_constants(d)
    if constants:
        unknown = set(constants) - set(c)
        if unknown:
            raise ValueError(f"unknown constants {sorted(unknown)}")
        c.update({k: float(v) for k, v in constants.items()})
    l1 = float(np.sum(ell)) if ell.size > 1 else float(ell[0]) * d
    beta = math.sqrt(field_norms(F).one_norm_Bsq)
    expo = c["C2"] + c["C3"] * l1 * math.sqrt(E)
    pref = 1.0
    if variant == "abstract":
        expo += c["C4"] * l1 ** 2 * beta
    elif variant == "refined":
        expo += c["C4"] * (l1 * math.sqrt(beta) + l1 ** 2 * beta)
        pref = 4.0
    elif variant == "energy":
        expo += c["C4"] * l1 ** 2 * math.sqrt(c["c_d"]) * E
    elif variant == "final":
        one_B = float(np.max(np.sum(np.abs(F.entries), axis=0)))
        expo += c["C4"] * l1 ** 2 * E * math.sqrt(one_B)
    else:
        raise ValueError(f"unknown variant {variant!r}; choose from {THEOREM_VARIANTS}")
    log_bound = math.log(pref) + expo * math.log(c["C1"] / rho)
    return TheoremBound(c["C1"], c["C2"], c["C3"], c["C4"], expo, log_bound, variant, pref)


# --------------------------------------------------------------------------
# optimality and necessity

def _fit_slope(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, icpt])
    return float(slope), float(icpt), float(np.sqrt(np.mean(resid ** 2)))


def optimality_scan(C_block: float, rho: float, L_list, d: int = 2, *,
                    n_nodes: int | None = None, h: float | None = None) -> dict:
    """Ground-state mass on a hole lattice at fixed density as ``L`` grows.

    Each ``L`` gives ``r = L ((1 - rho)/omega_d)^(1/d)``; the ground state is
    centred in a hole and ``-log ||Psi_0||^2_{L2(S)}`` is fitted against
    ``r^2``.  The single-hole closed form is ``C r^2 / 2``; the theoretical
    floor on the slope is ``C_min / 4``.
    """
    if d % 2:
        raise ValueError("the scan uses a full-rank field, so d must be even")
    nf = normal_form(_block_field(C_block, d))
    psi = ground_state(nf, n_nodes=n_nodes)
    rows = []
    for L in L_list:
        r = L * ((1 - rho) / ball_volume(d)) ** (1.0 / d)
        S, rho_exact = hole_set(L, r, d)
        mass = set_mass(psi, S, h=h)
        rows.append({"L": float(L), "r": r, "rho": rho_exact, "mass_in_S": mass,
                     "neg_log_mass": -math.log(mass), "single_hole": math.exp(-0.5 * C_block * r * r)
                     if d == 2 else float("nan")})
    r2 = np.array([row["r"] ** 2 for row in rows])
    y = np.array([row["neg_log_mass"] for row in rows])
    slope, icpt, rms = _fit_slope(r2, y) if len(rows) > 1 else (float("nan"),) * 3
    return {"rows": rows, "slope": slope, "intercept": icpt, "fit_rms": rms,
            "floor": C_block / 4, "single_hole_slope": C_block / 2}


def single_hole_scan(C_block: float, radii, *, L: float | None = None, h: float | None = None) -> dict:
    """``-log ||Psi_0||^2_{L2(S)}`` for one hole of radius ``r`` at the origin (d = 2)."""
    nf = normal_form(_block_field(C_block, 2))
    psi = ground_state(nf)
    rows = []
    for r in radii:
        Lr = L if L is not None else max(1e3, 4 * r)
        S, _ = hole_set(Lr, r, 2)
        mass = set_mass(psi, S, h=h)
        rows.append({"r": float(r), "mass_in_S": mass, "neg_log_mass": -math.log(mass),
                     "closed_form": math.exp(-0.5 * C_block * r * r)})
    slope, icpt, rms = _fit_slope(np.array([row["r"] ** 2 for row in rows]),
                                  np.array([row["neg_log_mass"] for row in rows]))
    return {"rows": rows, "slope": slope, "intercept": icpt, "fit_rms": rms}


def _block_field(C: float, d: int) -> np.ndarray:
    B = np.zeros((d, d))
    for j in range(d // 2):
        B[2 * j, 2 * j + 1] = C
        B[2 * j + 1, 2 * j] = -C
    return B


def necessity_probe(S: SamplingSet, nf, translates, *, threshold_constant: float | None = None,
                    h: float | None = None) -> dict:
    """``||T_y Psi_0||^2_{L2(S)}`` over the probe translates.

    A non-thick set makes the minimum fall below ``1 / (2 C^2)`` for any
    candidate constant ``C``; the table is emitted rather than a verdict.
    """
    psi = ground_state(nf)
    rows = []
    from .eigenbasis import magnetic_translate
    for y in translates:
        y = np.asarray(y, dtype=float)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fy = magnetic_translate(psi, y)
        mass = set_mass(fy, S, h=h)
        rows.append({"y": [float(v) for v in y], "mass_in_S": mass,
                     "warning": str(caught[0].message) if caught else ""})
    out = {"rows": rows, "min_mass": min(r["mass_in_S"] for r in rows)}
    if threshold_constant is not None:
        out["threshold"] = 1.0 / (2 * threshold_constant ** 2)
        out["below_threshold"] = out["min_mass"] < out["threshold"]
    return out


# --------------------------------------------------------------------------
# good and bad rectangles

@dataclass
class GoodBadReport:
    labels: np.ndarray
    cell_mass: np.ndarray
    good_mass: float
    total_mass: float
    flagged: int
    partition: CellPartition = field(repr=False)

    @property
    def good_fraction(self) -> float:
        return self.good_mass / self.total_mass

    def to_dict(self) -> dict:
        return {"good_fraction": self.good_fraction, "good_mass": self.good_mass,
                "total_mass": self.total_mass, "n_cells": int(self.labels.size),
                "n_good": int(self.labels.sum()), "flagged_empty": self.flagged,
                "ell": list(self.partition.ell)}


def good_bad_partition(f, ell, E: float, B=None, m_max: int = 4, *, n_sub: int | None = None,
                       slack: float = 1e-4, empty_tol: float = 1e-14) -> GoodBadReport:
    """Label cells of side ``ell`` good when every derivative bound holds.

    A cell is good when ``||d^a |f|^2||_L1(Q) <= (d+2)^(m+1) C'_B(m) ||f||^2_L2(Q)``
    for all ``|a| = m <= m_max``.  Cells carrying mass below ``empty_tol``
    times the total are labelled good and flagged.
    """
    g = f.grid_rep() if hasattr(f, "grid_rep") else f
    F = as_field(B) if B is not None else f.field
    d = g.grid.dim
    ell = tuple(float(v) for v in np.broadcast_to(ell, (d,)))
    if n_sub is None:
        n_sub = max(4, int(math.ceil(max(ell) / 0.03))) if d <= 2 else 6
    ext = effective_extent(g, 1e-16)
    part = CellPartition.covering(ext, ell, n_sub)
    data = derivative_cell_norms(g, m_max, part)
    mass = data["mass"]
    total = float(mass.sum())
    good = np.ones(part.n_cells, dtype=bool)
    for a in data["mult"]:
        m = sum(a)
        bound = (d + 2) ** (m + 1) * bernstein_prime_bound(d, E, F, m)
        good &= data["l1"][a] <= bound * mass * (1 + slack)
    empty = mass < empty_tol * total
    good |= empty
    return GoodBadReport(good, mass, float(mass[good].sum()), total, int(empty.sum()), part)


# --------------------------------------------------------------------------
# one-dimensional Remez-type check

def _sup_abs(coef: np.ndarray, intervals) -> float:
    """Exact sup of ``|p|`` over a union of intervals via critical points of ``|p|^2``."""
    P = np.polynomial.Polynomial(coef)
    Pc = np.polynomial.Polynomial(np.conj(coef))
    q = P * Pc
    dq = q.deriv()
    crit = dq.roots() if dq.degree() > 0 else np.array([])
    crit = np.real(crit[np.abs(np.imag(crit)) < 1e-9])
    best = 0.0
    for a, b in intervals:
        pts = np.concatenate([[a, b], crit[(crit >= a) & (crit <= b)]])
        best = max(best, float(np.max(np.abs(P(pts)))))
    return best


def _random_intervals(rng, measure: float, max_pieces: int = 5):
    k = int(rng.integers(1, max_pieces + 1))
    lengths = rng.dirichlet(np.ones(k)) * measure
    gaps = rng.dirichlet(np.ones(k + 1)) * (1.0 - measure)
    out, t = [], 0.0
    for i in range(k):
        t += gaps[i]
        out.append((t, t + lengths[i]))
        t += lengths[i]
    return out


def remez_1d_check(degree: int, E_measure: float, trials: int, seed: int,
                   n_circle: int = 4096) -> dict:
    """Random trials of ``sup_[0,1] |p| <= (12/|E|)^(2 log M / log 2) sup_E |p|``.

    ``M = sup_{|z| <= 4} |p(z)|`` is sampled densely on ``|z| = 4``; sampling
    can only underestimate ``M``, which shrinks the bound, so a pass is
    conservative.  Half of the trials place all roots inside ``[0, 1]``.
    """
    if degree > 12 or degree < 0:
        raise ValueError("degree must lie in 0..12")
    if not 0 < E_measure <= 1:
        raise ValueError("E_measure must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    z = 4.0 * np.exp(2j * np.pi * np.arange(n_circle) / n_circle)
    worst, violations, rows = 0.0, 0, []
    for t in range(trials):
        deg = int(rng.integers(0, degree + 1))
        if t % 2 and deg > 0:
            roots = rng.uniform(0, 1, deg)
            coef = np.polynomial.polynomial.polyfromroots(roots).astype(complex)
            coef = coef * np.exp(2j * np.pi * rng.uniform())
        else:
            coef = rng.standard_normal(deg + 1) + 1j * rng.standard_normal(deg + 1)
        if abs(coef[0]) < 1e-8:
            coef[0] = 1.0
        coef = coef / coef[0]
        intervals = _random_intervals(rng, E_measure) if E_measure < 1 else [(0.0, 1.0)]
        sup01 = _sup_abs(coef, [(0.0, 1.0)])
        supE = _sup_abs(coef, intervals)
        M = max(1.0, float(np.max(np.abs(np.polynomial.polynomial.polyval(z, coef)))))
        log_bound = 2 * math.log(M) / math.log(2) * math.log(12.0 / E_measure) + math.log(supE)
        ratio = math.exp(math.log(sup01) - log_bound)
        worst = max(worst, ratio)
        violations += ratio > 1.0
        rows.append({"trial": t, "degree": deg, "sup_01": sup01, "sup_E": supE, "M": M,
                     "ratio": ratio})
    return {"violations": int(violations), "max_ratio": worst, "trials": trials, "rows": rows}
