"""Magnetic derivatives, the Landau operator and Bernstein-type quantities.

Sign convention: the potential is ``A(x) = -B x / 2`` so that

    D_k = i d/dx_k + A_k(x),      [D_k, D_l] = i B_kl,
    H_B = sum_k D_k^2 = (-i grad - A)^2.

Axes are 0-based throughout.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .defaults import TOLERANCES
from .grid import GridRep, TensorGrid, apply_axis
from .magfield import as_field, field_norms, normal_form, spectrum_bottom

ETA_BERN = TOLERANCES["eta_bern"]


def _field_array(B, d: int) -> np.ndarray:
    Bm = as_field(B).entries
    if Bm.shape[0] != d:
        raise ValueError(f"field dimension {Bm.shape[0]} does not match grid dimension {d}")
    return Bm


def potential(B, grid: TensorGrid, k: int) -> np.ndarray:
    """A_k(x) = -(B x)_k / 2 broadcast to the grid shape."""
    Bm = _field_array(B, grid.dim)
    out = np.zeros(grid.shape)
    for j in range(grid.dim):
        if Bm[k, j] != 0.0:
            out = out - 0.5 * Bm[k, j] * grid.coordinate(j)
    return out


def _as_grid_rep(f) -> GridRep:
    if isinstance(f, GridRep):
        return f
    return f.grid_rep()


def apply_magnetic_derivative(f, k: int, B, check: bool = True, tol: float = 1e-12) -> GridRep:
    """``i d_k f + A_k f`` using the native spectral derivative of the grid.

    Raises :class:`~landaulab.grid.ResolutionError` when ``check`` is set and
    the input has a coefficient tail above ``tol``.
    """
    f = _as_grid_rep(f)
    if not 0 <= k < f.grid.dim:
        raise IndexError(f"axis {k} out of range for dimension {f.grid.dim}")
    if check:
        f.check_resolution(tol)
    ax = f.values.ndim - f.grid.dim + k
    dv = apply_axis(f.grid.axis_diff(k), f.values, ax)
    return f.with_values(1j * dv + potential(B, f.grid, k) * f.values)


def apply_H(f, B, check: bool = True, tol: float = 1e-12) -> GridRep:
    """Landau operator as the sum of squared magnetic derivatives."""
    f = _as_grid_rep(f)
    if check:
        f.check_resolution(tol)
    out = np.zeros_like(f.values)
    for k in range(f.grid.dim):
        g = apply_magnetic_derivative(f, k, B, check=False)
        out += apply_magnetic_derivative(g, k, B, check=False).values
    return f.with_values(out)


def commutator_residual(f, B, k: int, l: int) -> float:
    """``||[D_k, D_l] f - i B_kl f|| / ||f||``."""
    f = _as_grid_rep(f)
    Bm = _field_array(B, f.grid.dim)
    kl = apply_magnetic_derivative(apply_magnetic_derivative(f, l, B), k, B, check=False)
    lk = apply_magnetic_derivative(apply_magnetic_derivative(f, k, B), l, B, check=False)
    r = f.with_values(kl.values - lk.values - 1j * Bm[k, l] * f.values)
    return float(np.sqrt(np.sum(r.norm_sq()) / np.sum(f.norm_sq())))


# --------------------------------------------------------------------------
# Bernstein quantities

def bernstein_bound(d: int, E: float, B, m: int) -> float:
    """``(d/2 (E + sqrt(|B^2|_1) m))^m``."""
    if m < 0 or E <= 0:
        raise ValueError("need m >= 0 and E > 0")
    beta = math.sqrt(field_norms(B).one_norm_Bsq)
    return float((0.5 * d * (E + beta * m)) ** m)


def bernstein_prime_bound(d: int, E: float, B, m: int) -> float:
    """``d^(dm/2) (d/2 (E + sqrt(|B^2|_1) m))^(m/2)``."""
    if m < 0 or E <= 0:
        raise ValueError("need m >= 0 and E > 0")
    beta = math.sqrt(field_norms(B).one_norm_Bsq)
    return float(d ** (0.5 * d * m) * (0.5 * d * (E + beta * m)) ** (0.5 * m))


@dataclass(frozen=True)
class BernsteinReport:
    m: int
    lhs: float
    bound: float
    ratio: float
    slack: float = ETA_BERN

    @property
    def passed(self) -> bool:
        return self.ratio <= 1.0 + self.slack

    def row(self, config_id: str) -> dict:
        return {"m": self.m, "lhs": self.lhs, "bound": self.bound,
                "ratio": self.ratio, "config_id": config_id}


def _field_of(f, B):
    if B is not None:
        return as_field(B)
    basis = getattr(f, "basis", None)
    if basis is None:
        raise ValueError("a field matrix is required for grid functions")
    return basis.field


def bernstein_lhs(f, m: int, B=None, check: bool = True) -> np.ndarray:
    """``sum over alpha in {1..d}^m of ||D_alpha f||^2``.

    The multi-index tree is walked depth first in fixed order, so at most
    ``m + 1`` derivative arrays are alive at once.  A batched grid function
    gives one value per batch entry.
    """
    if m < 0:
        raise ValueError("order m must be nonnegative")
    F = _field_of(f, B)
    g = _as_grid_rep(f)
    if check:
        g.check_resolution()

    def walk(h, depth):
        if depth == m:
            return h.norm_sq()
        acc = 0.0
        for k in range(g.grid.dim):
            acc = acc + walk(apply_magnetic_derivative(h, k, F, check=False), depth + 1)
        return acc

    out = walk(g, 0)
    if check and m > 0:
        # the deepest generation must still be resolved
        probe = g
        for _ in range(m):
            probe = apply_magnetic_derivative(probe, 0, F, check=False)
        probe.check_resolution(1e-9)
    return np.asarray(out)


def apply_R_power(f, m: int, B) -> GridRep:
    """``R^m(Id) f`` with ``R(X) = sum_k D_k X D_k``."""
    g = _as_grid_rep(f)
    if m == 0:
        return g
    out = np.zeros_like(g.values)
    for k in range(g.grid.dim):
        inner = apply_R_power(apply_magnetic_derivative(g, k, B, check=False), m - 1, B)
        out += apply_magnetic_derivative(inner, k, B, check=False).values
    return g.with_values(out)


def bernstein_lhs_by_parts(f, m: int, B=None) -> np.ndarray:
    """``<f, R^m(Id) f>``; equals :func:`bernstein_lhs` by integration by parts."""
    F = _field_of(f, B)
    g = _as_grid_rep(f)
    return np.real(g.inner(apply_R_power(g, m, F)))


def bernstein_report(f, m: int, E: float, B=None) -> BernsteinReport:
    F = _field_of(f, B)
    g = _as_grid_rep(f)
    lhs = float(np.sum(bernstein_lhs(g, m, F)))
    nrm = float(np.sum(g.norm_sq()))
    bound = bernstein_bound(g.grid.dim, E, F, m) * nrm
    return BernsteinReport(m, lhs, bound, lhs / bound)


def product_form_bound(f, m: int, B=None) -> float:
    """``<f, (d/2)^m prod_{j=1..m} (H + (2j-1) beta) f>`` via moments of H.

    Stricter than the closed-form constant; evaluated as a quadratic form.
    """
    F = _field_of(f, B)
    g = _as_grid_rep(f)
    d = g.grid.dim
    beta = math.sqrt(field_norms(F).one_norm_Bsq)
    poly = np.polynomial.Polynomial([1.0])
    for j in range(1, m + 1):
        poly = poly * np.polynomial.Polynomial([(2 * j - 1) * beta, 1.0])
    mu = _moments(g, F, m)
    return float((0.5 * d) ** m * sum(c * mu[j] for j, c in enumerate(poly.coef)))


def _moments(g: GridRep, B, jmax: int) -> list:
    """``<g, H^j g>`` for j = 0..jmax (real parts)."""
    mu = [float(np.real(np.sum(g.norm_sq())))]
    h = g
    for _ in range(jmax):
        h = apply_H(h, B, check=False)
        mu.append(float(np.real(np.sum(g.inner(h)))))
    return mu


@dataclass(frozen=True)
class RecursionReport:
    m: int
    q_X: float
    q_Y: float
    rhs_X: float
    rhs_Z: float
    passed_X: bool
    passed_Z: bool


def _poly_form(coeffs, mu):
    return float(sum(c * mu[j] for j, c in enumerate(coeffs)))


def verify_recursion(f, m_max: int = 4, B=None, E: float | None = None, slack: float = ETA_BERN) -> dict:
    """Check the two-component recursion bound on X_m and Y_m as quadratic forms.

    ``q_X(m) = sum_k <D_k f, H^m D_k f>`` and
    ``q_Y(m) = i sum_{j,l} B_jl <D_l f, H^m D_j f>``.  For each ``m`` the
    checks are

        2 q_X(m)        <= <f, (H - F)(H - 2b)^m + (H + F)(H + 2b)^m f>
        2 q_Y(m) / b    <= <f, (H + F)(H + 2b)^m - (H - F)(H - 2b)^m f>

    with ``b = sqrt(|B^2|_1)`` and ``F = |B|_f^2 / b``.  The initial values
    ``q_X(0) = <f, H f>`` and ``q_Y(0) = |B|_f^2 |f|^2 / 2`` are checked too.
    """
    F = _field_of(f, B)
    g = _as_grid_rep(f)
    if g.batch_shape:
        raise ValueError("verify_recursion takes a single function")
    g.check_resolution()
    Bm = F.entries
    d = g.grid.dim
    norms = field_norms(F)
    beta = math.sqrt(norms.one_norm_Bsq)
    fro = norms.frobenius_sq
    Dk = [apply_magnetic_derivative(g, k, F, check=False) for k in range(d)]
    mu = _moments(g, F, m_max + 1)
    nrm = mu[0]
    rows = []
    HD = list(Dk)
    for m in range(m_max + 1):
        if m > 0:
            HD = [apply_H(h, F, check=False) for h in HD]
        qx = float(np.real(sum(np.sum(Dk[k].inner(HD[k])) for k in range(d))))
        qy = 0.0 + 0.0j
        for j in range(d):
            for l in range(d):
                if Bm[j, l] != 0.0:
                    qy += 1j * Bm[j, l] * np.sum(Dk[l].inner(HD[j]))
        qy = float(np.real(qy))
        P = np.polynomial.Polynomial
        if beta > 0:
            Fr = fro / beta
            lo = P([-Fr, 1.0]) * P([-2 * beta, 1.0]) ** m
            hi = P([Fr, 1.0]) * P([2 * beta, 1.0]) ** m
            rhs_x = _poly_form((lo + hi).coef, mu)
            rhs_z = _poly_form((hi - lo).coef, mu) if m > 0 or Fr else 0.0
            z = qy / beta
        else:
            rhs_x = _poly_form((2 * P([0.0, 1.0]) ** (m + 1)).coef, mu)
            rhs_z = 0.0
            z = 0.0
        scale = max(abs(rhs_x), nrm, 1e-300)
        rows.append(RecursionReport(
            m, qx, qy, rhs_x, rhs_z,
            2 * qx <= rhs_x + slack * scale,
            2 * z <= rhs_z + slack * max(abs(rhs_z), nrm, 1e-300),
        ))
    qx0_ok = abs(rows[0].q_X - mu[1]) <= 1e-8 * max(1.0, abs(mu[1]))
    qy0_expected = 0.5 * fro * nrm
    qy0_ok = abs(rows[0].q_Y - qy0_expected) <= 1e-8 * max(1.0, qy0_expected)
    out = {
        "rows": rows,
        "q_X0_matches_H": qx0_ok,
        "q_Y0_expected": qy0_expected,
        "q_Y0_matches": qy0_ok,
        "energy": mu[1] / nrm,
        "norm_sq": nrm,
    }
    if E is not None:
        nf = normal_form(F)
        e = mu[1] / nrm
        out["energy_in_range"] = spectrum_bottom(nf) - 1e-8 <= e <= E * (1 + 1e-8)
    out["passed"] = all(r.passed_X and r.passed_Z for r in rows) and qx0_ok and qy0_ok
    return out


# --------------------------------------------------------------------------
# classical derivatives of |f|^2

def _count_vectors(d: int, m: int):
    """All count vectors ``a`` with ``sum(a) = m`` and their multiplicities."""
    for combo in itertools.combinations_with_replacement(range(d), m):
        a = [0] * d
        for k in combo:
            a[k] += 1
        mult = math.factorial(m)
        for c in a:
            mult //= math.factorial(c)
        yield tuple(a), mult


def _classical_derivatives(g: GridRep, m_max: int) -> dict:
    """Classical derivatives ``d^a f`` on the grid for all ``|a| <= m_max``."""
    d = g.grid.dim
    out = {(0,) * d: g}
    for order in range(1, m_max + 1):
        for a, _ in _count_vectors(d, order):
            k = max(i for i in range(d) if a[i] > 0)
            prev = list(a)
            prev[k] -= 1
            out[a] = out[tuple(prev)].diff(k)
    return out


def _leibniz(a, fields):
    """``d^a |f|^2`` from the derivative fields via Leibniz' rule."""
    total = 0.0
    for b in itertools.product(*[range(c + 1) for c in a]):
        coef = 1
        for ai, bi in zip(a, b):
            coef *= math.comb(ai, bi)
        c = tuple(ai - bi for ai, bi in zip(a, b))
        total = total + coef * fields[b] * np.conj(fields[c])
    return np.real(total)


def effective_extent(g: GridRep, tol: float = 1e-14) -> list:
    """Per-axis half widths outside of which the mass of ``g`` is below ``tol``."""
    w = g.grid.weights()
    dens = (np.abs(g.values) ** 2 * w)
    if g.batch_shape:
        dens = dens.reshape((-1,) + g.grid.shape).sum(axis=0)
    total = dens.sum()
    out = []
    for k in range(g.grid.dim):
        marg = dens.sum(axis=tuple(j for j in range(g.grid.dim) if j != k))
        x = g.grid.axis_nodes(k)
        order = np.argsort(-np.abs(x), kind="stable")
        cum = np.cumsum(marg[order])
        outside = cum < tol * total
        idx = np.argmin(outside) if not outside.all() else len(x) - 1
        out.append(float(np.abs(x[order[idx]])))
    return out


@dataclass(frozen=True)
class CellPartition:
    """Axis-aligned partition into boxes of sides ``ell`` with sub-sampling."""

    origin: tuple
    ell: tuple
    n_cells: tuple
    n_sub: int

    def axis_points(self, k: int) -> np.ndarray:
        i = np.arange(self.n_cells[k] * self.n_sub)
        return self.origin[k] + (i + 0.5) * self.ell[k] / self.n_sub

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.ell))

    @property
    def point_weight(self) -> float:
        return self.cell_volume / self.n_sub ** len(self.ell)

    @classmethod
    def covering(cls, extent, ell, n_sub: int, centered: bool = True) -> "CellPartition":
        origin, counts = [], []
        for X, L in zip(extent, ell):
            n = int(math.ceil(2 * X / L))
            if centered and n % 2 == 0:
                n += 1
            n = max(n, 1)
            counts.append(n)
            origin.append(-0.5 * n * L)
        return cls(tuple(origin), tuple(float(x) for x in ell), tuple(counts), int(n_sub))


def _cell_sums(arr: np.ndarray, part: CellPartition, axis0_cells: int) -> np.ndarray:
    shape = []
    for k in range(arr.ndim):
        n = axis0_cells if k == 0 else part.n_cells[k]
        shape.extend([n, part.n_sub])
    r = arr.reshape(shape)
    return r.sum(axis=tuple(range(1, 2 * arr.ndim, 2)))


def derivative_cell_norms(f, m_max: int, part: CellPartition, cells_per_slab: int = 4) -> dict:
    """Per-cell ``L1`` norms of ``d^a |f|^2``, L-infinity norms and ``L2`` masses.

    Derivatives are taken spectrally on the Hermite grid, interpolated to the
    cell-centred sampling points and combined with Leibniz' rule.  Returns
    ``{"l1": {a: cells}, "linf": {a: float}, "mass": cells, "mult": {a: int}}``.
    """
    g = _as_grid_rep(f)
    if g.batch_shape:
        raise ValueError("single function expected")
    d = g.grid.dim
    fields = _classical_derivatives(g, m_max)
    alphas = {}
    for m in range(m_max + 1):
        for a, mult in _count_vectors(d, m):
            alphas[a] = mult
    l1 = {a: np.zeros(part.n_cells) for a in alphas}
    linf = {a: 0.0 for a in alphas}
    mass = np.zeros(part.n_cells)
    interp = [g.grid.axis_interpolation(k, part.axis_points(k)) for k in range(1, d)]
    pts0 = part.axis_points(0)
    w = part.point_weight
    for c0 in range(0, part.n_cells[0], cells_per_slab):
        c1 = min(part.n_cells[0], c0 + cells_per_slab)
        M0 = g.grid.axis_interpolation(0, pts0[c0 * part.n_sub:c1 * part.n_sub])
        local = {}
        for b, fb in fields.items():
            v = apply_axis(M0, fb.values, 0)
            for k in range(1, d):
                v = apply_axis(interp[k - 1], v, k)
            local[b] = v
        zero = (0,) * d
        mass[c0:c1] = _cell_sums(np.abs(local[zero]) ** 2 * w, part, c1 - c0)
        for a in alphas:
            val = _leibniz(a, local)
            l1[a][c0:c1] = _cell_sums(np.abs(val) * w, part, c1 - c0)
            linf[a] = max(linf[a], float(np.max(np.abs(val))))
    return {"l1": l1, "linf": linf, "mass": mass, "mult": alphas}


def classical_derivative_l1(f, m: int, n_points: int | None = None) -> float:
    """``sum over alpha in {1..d}^m of || d^alpha |f|^2 ||_L1`` (classical derivatives)."""
    g = _as_grid_rep(f)
    d = g.grid.dim
    if n_points is None:
        n_points = {1: 4096, 2: 800, 3: 64}.get(d, 32)
    ext = effective_extent(g)
    n_sub_cells = 8 if d <= 2 else 4
    n_sub = max(2, n_points // n_sub_cells)
    part = CellPartition.covering(ext, [2 * X / n_sub_cells for X in ext], n_sub, centered=False)
    data = derivative_cell_norms(g, m, part)
    total = 0.0
    for a, mult in data["mult"].items():
        if sum(a) == m:
            total += mult * float(data["l1"][a].sum())
    return total


def classical_derivative_report(f, m_max: int, E: float, B=None, n_points: int | None = None) -> list:
    """Per-order est1 check: L1 sums against ``C'_B(m) |f|^2``."""
    F = _field_of(f, B)
    g = _as_grid_rep(f)
    d = g.grid.dim
    if n_points is None:
        n_points = {1: 4096, 2: 800, 3: 64}.get(d, 32)
    ext = effective_extent(g)
    n_sub_cells = 8 if d <= 2 else 4
    n_sub = max(2, n_points // n_sub_cells)
    part = CellPartition.covering(ext, [2 * X / n_sub_cells for X in ext], n_sub, centered=False)
    data = derivative_cell_norms(g, m_max, part)
    nrm = float(np.sum(g.norm_sq()))
    rows = []
    for m in range(m_max + 1):
        lhs = sum(mult * float(data["l1"][a].sum()) for a, mult in data["mult"].items() if sum(a) == m)
        bound = bernstein_prime_bound(d, E, F, m) * nrm
        rows.append(BernsteinReport(m, lhs, bound, lhs / bound))
    linf_sums = [sum(mult * data["linf"][a] for a, mult in data["mult"].items() if sum(a) == m)
                 for m in range(m_max + 1)]
    return rows, linf_sums


def est2_check(f, m_max: int, E: float, B=None, slack: float = ETA_BERN) -> dict:
    """Pointwise estimate with the Sobolev constant fitted at ``m = 0``.

    The constant ``C_sob`` is unknown; it is fitted once from the ``m = 0``
    sup norm and then the estimate is required for ``1 <= m <= m_max``.
    """
    F = _field_of(f, B)
    g = _as_grid_rep(f)
    d = g.grid.dim
    nrm = float(np.sum(g.norm_sq()))
    _, linf = classical_derivative_report(g, m_max, E, F)

    def rhs(m):
        return sum(bernstein_prime_bound(d, E, F, mm) for mm in range(m, m + d + 2)) * nrm

    c_sob = linf[0] / rhs(0)
    ratios = [linf[m] / (c_sob * rhs(m)) for m in range(m_max + 1)]
    return {"c_sob": c_sob, "linf": linf, "ratios": ratios,
            "passed": all(r <= 1 + slack for r in ratios)}


def analyticity_growth(f, m_max: int = 6) -> list:
    """``max_alpha ||d^alpha |f|^2||_L1^(1/m) / sqrt(m)`` for m = 1..m_max."""
    g = _as_grid_rep(f)
    d = g.grid.dim
    n_points = {1: 2048, 2: 320, 3: 48}.get(d, 24)
    ext = effective_extent(g)
    n_sub_cells = 8 if d <= 2 else 4
    part = CellPartition.covering(ext, [2 * X / n_sub_cells for X in ext],
                                  max(2, n_points // n_sub_cells), centered=False)
    data = derivative_cell_norms(g, m_max, part)
    out = []
    for m in range(1, m_max + 1):
        best = max(float(data["l1"][a].sum()) for a in data["mult"] if sum(a) == m)
        out.append(best ** (1.0 / m) / math.sqrt(m))
    return out
