"""Truncated orthonormal bases of spectral subspaces of the Landau operator.

In the coordinates ``y = U^T x`` of the normal form each 2-plane carries a
two-dimensional Landau problem with field strength ``C``.  With the
convention of :mod:`landaulab.magderiv` the operators

    a^+ = D_1 - i D_2,                     (raises the level n, [a, a^+] = 2C)
    b^+ = P_1 + i P_2,  P_k = i d_k - A_k  (moves inside a level, commutes with D)

generate ``phi_{n,l} = (a^+)^n (b^+)^l Psi_0 / sqrt((2C)^(n+l) n! l!)`` with
``H phi_{n,l} = (2n+1) C phi_{n,l}``.  Both operators act exactly on
Hermite-function coefficients at the scale ``s = sqrt(2/C)``, which is how
the modes are represented.  Null directions carry windowed plane waves.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .defaults import (GRID_NODES, GRID_NODES_FALLBACK, L_MAX, SIGMA_NULL_FACTOR,
                       TOLERANCES)
from .grid import GridRep, ResolutionError, TensorGrid, hermite_functions
from .magderiv import apply_H
from .magfield import BlockNormalForm, FieldMatrix, enumerate_levels, spectrum_bottom

ETA_ORTH = TOLERANCES["eta_orth"]
ETA_EIG = TOLERANCES["eta_eig"]


class BasisError(RuntimeError):
    """Basis construction failed an orthonormality or eigen-residual check."""


@dataclass(frozen=True)
class LandauMode:
    n: tuple
    l: tuple
    xi: tuple
    energy: float
    level_energy: float

    def __post_init__(self):
        if any(v < 0 for v in self.n) or any(v < 0 for v in self.l):
            raise ValueError("mode indices must be nonnegative")

    def to_dict(self) -> dict:
        return {"n": list(self.n), "l": list(self.l), "xi": list(self.xi),
                "energy": self.energy}


# --------------------------------------------------------------------------
# exact ladder action on Hermite coefficients

def _raise_1d(P: int) -> np.ndarray:
    """Unit-scale creation operator ``(t - d/dt)/sqrt(2)`` on P coefficients."""
    A = np.zeros((P, P))
    k = np.arange(P - 1)
    A[k + 1, k] = np.sqrt(k + 1.0)
    return A


def block_coefficients(n: int, l: int) -> np.ndarray:
    """Hermite coefficients of the normalized block mode ``phi_{n,l}``.

    Entry ``[p, q]`` multiplies ``psi_p(y_1/s) psi_q(y_2/s) / s``.  The
    coefficients do not depend on ``C`` once lengths are measured in ``s``.
    """
    P = n + l + 1
    A = _raise_1d(P)
    c = np.zeros((P, P), dtype=complex)
    c[0, 0] = 1.0
    # normalized a^+ = -(i A1 + A2)/sqrt(2), b^+ = -(i A1 - A2)/sqrt(2)
    for j in range(l):
        c = -(1j * (A @ c) - c @ A.T) / math.sqrt(2.0) / math.sqrt(j + 1)
    for j in range(n):
        c = -(1j * (A @ c) + c @ A.T) / math.sqrt(2.0) / math.sqrt(j + 1)
    return c


def block_mode_values(n: int, l: int, C: float, y1, y2) -> np.ndarray:
    """Block mode ``phi_{n,l}`` of field strength ``C`` at points ``(y1, y2)``."""
    s = math.sqrt(2.0 / C)
    c = block_coefficients(n, l)
    P = c.shape[0]
    H1 = hermite_functions(P - 1, np.asarray(y1) / s)
    H2 = hermite_functions(P - 1, np.asarray(y2) / s)
    return np.einsum("...p,pq,...q->...", H1, c, H2) / s


def radial_density(n: int, l: int, C: float, r) -> np.ndarray:
    """``|phi_{n,l}|^2`` from the generalized Laguerre closed form."""
    from scipy.special import eval_genlaguerre

    r = np.asarray(r, dtype=float)
    u = 0.5 * C * r * r
    k, a = min(n, l), abs(n - l)
    norm = math.factorial(k) / math.factorial(k + a)
    return (C / (2 * math.pi)) * norm * u ** a * eval_genlaguerre(k, a, u) ** 2 * np.exp(-u)


# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NullWindow:
    """Orthonormalized windowed plane waves on the null space."""

    xis: np.ndarray      # (K, nullity)
    sigma: float
    mixing: np.ndarray   # (K, K) Loewdin matrix S^(-1/2)

    @classmethod
    def build(cls, xis, sigma: float) -> "NullWindow":
        X = np.atleast_2d(np.asarray(xis, dtype=float))
        diff = X[:, None, :] - X[None, :, :]
        S = np.exp(-0.25 * sigma ** 2 * np.sum(diff ** 2, axis=-1))
        lam, V = np.linalg.eigh(S)
        if lam.min() < 1e-10:
            raise BasisError("null wavevectors are too close for the window width; "
                             f"overlap matrix eigenvalue {lam.min():.2e}")
        L = (V / np.sqrt(lam)) @ V.T
        return cls(X, float(sigma), L)

    def raw(self, t: np.ndarray) -> np.ndarray:
        """Un-mixed windowed plane waves at points ``t`` of shape (n, nullity)."""
        q = t.shape[1]
        env = (math.pi * self.sigma ** 2) ** (-0.25 * q) * np.exp(-0.5 * np.sum(t * t, axis=1) / self.sigma ** 2)
        return np.exp(1j * t @ self.xis.T) * env[:, None]

    def values(self, t: np.ndarray) -> np.ndarray:
        return self.raw(t) @ self.mixing

    def momentum_density(self, k: np.ndarray) -> np.ndarray:
        """``|g_a^(k)|^2`` at momenta ``k`` (n, nullity), unitary Fourier convention."""
        q = k.shape[1]
        amp = np.empty((k.shape[0], self.xis.shape[0]))
        for b, xi in enumerate(self.xis):
            amp[:, b] = (self.sigma ** 2 / math.pi) ** (0.25 * q) * np.exp(
                -0.5 * self.sigma ** 2 * np.sum((k - xi) ** 2, axis=1))
        return np.abs(amp @ self.mixing) ** 2

    def leakage_one(self, a: int, budget: float, n_k: int | None = None) -> float:
        """Mass of mode ``a`` with ``|k|^2`` above ``budget``."""
        q = self.xis.shape[1]
        if n_k is None:
            n_k = {1: 4001, 2: 301}.get(q, 41)
        lo = self.xis.min(axis=0) - 10.0 / self.sigma
        hi = self.xis.max(axis=0) + 10.0 / self.sigma
        axes = [np.linspace(lo[i], hi[i], n_k) for i in range(q)]
        K = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
        dens = self.momentum_density(K)[:, a]
        k2 = np.sum(K * K, axis=1)
        return float(dens[k2 > budget].sum() / dens.sum())


def _grid_scales(nf: BlockNormalForm, sigma: float) -> list:
    prec = [0.5 * c for c in nf.frequencies for _ in range(2)] + [sigma ** -2] * nf.nullity
    p = (nf.conjugator ** 2) @ np.array(prec)
    return [1.0 / math.sqrt(v) for v in p]


def default_grid(nf: BlockNormalForm, sigma: float, n_nodes: int | None = None) -> TensorGrid:
    d = nf.dim
    n = n_nodes or GRID_NODES.get(d, GRID_NODES_FALLBACK)
    return TensorGrid((n,) * d, tuple(_grid_scales(nf, sigma)))


@dataclass
class SpectralBasis:
    """Ordered orthonormal modes spanning a truncated spectral subspace."""

    nf: BlockNormalForm
    E: float
    l_max: int
    null_modes: list
    sigma_null: float
    modes: list
    grid: TensorGrid
    excluded: int = 0
    residuals: np.ndarray = None
    leakage: np.ndarray = None
    orth_error: float = None
    _window: NullWindow = field(default=None, repr=False)
    _grid_values: np.ndarray = field(default=None, repr=False)

    @property
    def field(self) -> FieldMatrix:
        return self.nf.field

    @property
    def dim(self) -> int:
        return self.nf.dim

    @property
    def size(self) -> int:
        return len(self.modes)

    @property
    def energies(self) -> np.ndarray:
        return np.array([m.energy for m in self.modes])

    @property
    def discrete(self) -> np.ndarray:
        return np.array([self.nf.nullity == 0] * self.size)

    def evaluate_y(self, y: np.ndarray, chunk: int = 65536) -> np.ndarray:
        """All modes at points given in normal-form coordinates; shape (n, K)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.empty((y.shape[0], self.size), dtype=complex)
        for a in range(0, y.shape[0], chunk):
            out[a:a + chunk] = self._evaluate_y_chunk(y[a:a + chunk])
        return out

    def _evaluate_y_chunk(self, y):
        m = self.nf.n_blocks
        cache = {}
        null_vals = None
        if self.nf.nullity:
            null_vals = self._window.values(y[:, 2 * m:])
        out = np.empty((y.shape[0], self.size), dtype=complex)
        for i, mode in enumerate(self.modes):
            v = np.ones(y.shape[0], dtype=complex)
            for j in range(m):
                key = (j, mode.n[j], mode.l[j])
                if key not in cache:
                    cache[key] = block_mode_values(mode.n[j], mode.l[j], self.nf.frequencies[j],
                                                   y[:, 2 * j], y[:, 2 * j + 1])
                v = v * cache[key]
            if null_vals is not None:
                v = v * null_vals[:, self._null_index(mode.xi)]
            out[:, i] = v
        return out

    def _null_index(self, xi) -> int:
        for a, x in enumerate(self._window.xis):
            if tuple(float(v) for v in x) == tuple(xi):
                return a
        raise KeyError(xi)

    def evaluate(self, x: np.ndarray, chunk: int = 65536) -> np.ndarray:
        """All modes at points in original coordinates via ``y = U^T x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.evaluate_y(x @ self.nf.conjugator, chunk)

    def grid_values(self) -> GridRep:
        """The modes on the basis grid as a batched :class:`GridRep`."""
        if self._grid_values is None:
            v = self.evaluate(self.grid.points())
            self._grid_values = np.ascontiguousarray(v.T).reshape((self.size,) + self.grid.shape)
        return GridRep(self.grid, self._grid_values)

    def to_dict(self) -> dict:
        return {
            "normal_form": self.nf.to_dict(),
            "E": self.E,
            "l_max": self.l_max,
            "null_modes": [list(map(float, x)) for x in self.null_modes],
            "sigma_null": self.sigma_null,
            "modes": [m.to_dict() for m in self.modes],
            "excluded": self.excluded,
            "grid": self.grid.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _admitted_null_modes(nf, E, null_spec):
    E0 = spectrum_bottom(nf)
    if nf.nullity == 0:
        return [()]
    if null_spec is None or len(null_spec) == 0:
        null_spec = [(0.0,) * nf.nullity]
    out = []
    for xi in null_spec:
        xi = tuple(float(v) for v in np.atleast_1d(xi))
        if len(xi) != nf.nullity:
            raise ValueError(f"null wavevector {xi} must have length {nf.nullity}")
        if sum(v * v for v in xi) > E - E0 + 1e-12:
            raise ValueError(f"null wavevector {xi} violates |xi|^2 <= E - E0 = {E - E0}")
        out.append(xi)
    return out


def build_basis(nf: BlockNormalForm, E: float, l_max: int = L_MAX, null_spec=None, *,
                n_nodes: int | None = None, sigma_null: float | None = None,
                eta_orth: float = ETA_ORTH, eta_eig: float = ETA_EIG,
                verify: bool = True, chunk: int = 32) -> SpectralBasis:
    """Build and verify a truncated orthonormal basis of ``Ran 1_(-inf,E](H_B)``.

    Modes are products of block modes ``phi_{n_j,l_j}`` with ``l_j <= l_max``
    and, with a null space, one windowed plane wave per admitted wavevector.
    Candidates with energy above ``E`` are excluded and counted.  With
    ``verify`` set the grid Gram matrix and eigen-residuals are checked.
    """
    if E <= 0:
        raise ValueError("energy cutoff E must be positive")
    if l_max < 0:
        raise ValueError("l_max must be nonnegative")
    if nf.field is None:
        raise ValueError("normal form must carry its field matrix")
    xis = _admitted_null_modes(nf, E, null_spec)
    sigma = float(sigma_null) if sigma_null is not None else SIGMA_NULL_FACTOR / math.sqrt(E)
    window = NullWindow.build(xis, sigma) if nf.nullity else None
    m = nf.n_blocks
    modes, excluded = [], 0
    for lv in enumerate_levels(nf, E):
        for l in itertools.product(range(l_max + 1), repeat=m):
            for xi in xis:
                energy = lv.base_energy + sum(v * v for v in xi)
                if energy > E:
                    excluded += 1
                    continue
                modes.append(LandauMode(tuple(lv.n), tuple(l), xi, energy, lv.base_energy))
    modes.sort(key=lambda md: (md.energy, md.n, md.l, md.xi))
    grid = default_grid(nf, sigma, n_nodes)
    basis = SpectralBasis(nf, float(E), int(l_max), xis, sigma, modes, grid, excluded,
                          _window=window)
    if nf.nullity and modes:
        by_xi = {xi: a for a, xi in enumerate(xis)}
        cache = {}
        leak = np.empty(len(modes))
        for i, md in enumerate(modes):
            key = (by_xi[md.xi], E - md.level_energy)
            if key not in cache:
                cache[key] = window.leakage_one(*key)
            leak[i] = cache[key]
        basis.leakage = leak
    else:
        basis.leakage = np.zeros(len(modes))
    if verify and modes:
        verify_basis(basis, eta_orth, eta_eig, chunk)
    return basis


def verify_basis(basis: SpectralBasis, eta_orth: float = ETA_ORTH, eta_eig: float = ETA_EIG,
                 chunk: int = 32) -> None:
    """Grid orthonormality and eigen-residual checks; raises :class:`BasisError`."""
    g = basis.grid_values()
    try:
        g.check_resolution()
    except ResolutionError as exc:
        tails = [g.with_values(g.values[i]).coefficient_tail() for i in range(basis.size)]
        i = int(np.argmax(tails))
        raise BasisError(f"grid under-resolves mode {i} {basis.modes[i].to_dict()}: "
                         f"coefficient tail {tails[i]:.3e}") from exc
    G = g.gram()
    dev = np.abs(G - np.eye(basis.size))
    basis.orth_error = float(dev.max())
    if basis.orth_error > eta_orth:
        i, j = np.unravel_index(np.argmax(dev), dev.shape)
        raise BasisError(
            f"orthonormality residual {dev[i, j]:.3e} > {eta_orth:.1e} for modes "
            f"{i} {basis.modes[i].to_dict()} and {j} {basis.modes[j].to_dict()}")
    res = np.empty(basis.size)
    for a in range(0, basis.size, chunk):
        part = g.with_values(g.values[a:a + chunk])
        Hp = apply_H(part, basis.field, check=False)
        lam = basis.energies[a:a + chunk].reshape((-1,) + (1,) * basis.dim)
        r = part.with_values(Hp.values - lam * part.values)
        res[a:a + chunk] = np.sqrt(r.norm_sq() / part.norm_sq())
    basis.residuals = res
    if basis.nf.nullity == 0:
        bad = np.where(res > eta_eig)[0]
        if bad.size:
            i = int(bad[np.argmax(res[bad])])
            raise BasisError(f"eigen-residual {res[i]:.3e} > {eta_eig:.1e} for mode {i} "
                             f"{basis.modes[i].to_dict()}")


# --------------------------------------------------------------------------

@dataclass
class SpectralFunction:
    """``e^{i phase} T_shift (sum_i c_i phi_i)``; unshifted functions lie in the span."""

    basis: SpectralBasis
    coefficients: np.ndarray
    shift: np.ndarray = None
    phase: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex).ravel()
        if c.shape[0] != self.basis.size:
            raise ValueError(f"expected {self.basis.size} coefficients, got {c.shape[0]}")
        self.coefficients = c
        d = self.basis.dim
        self.shift = np.zeros(d) if self.shift is None else np.asarray(self.shift, dtype=float)

    @property
    def field(self) -> FieldMatrix:
        return self.basis.field

    @property
    def is_translated(self) -> bool:
        return bool(np.any(self.shift != 0.0))

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def evaluate(self, x: np.ndarray, chunk: int = 65536) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty(x.shape[0], dtype=complex)
        Bm = self.basis.field.entries
        for a in range(0, x.shape[0], chunk):
            xc = x[a:a + chunk]
            v = self.basis.evaluate(xc - self.shift) @ self.coefficients
            if self.is_translated:
                v = v * np.exp(1j * (-0.5 * xc @ (Bm @ self.shift) + self.phase))
            elif self.phase:
                v = v * np.exp(1j * self.phase)
            out[a:a + chunk] = v
        return out

    def grid_rep(self, grid: TensorGrid | None = None) -> GridRep:
        grid = grid or self.basis.grid
        if grid == self.basis.grid and not self.is_translated:
            g = self.basis.grid_values()
            v = np.tensordot(self.coefficients, g.values, axes=(0, 0)) * np.exp(1j * self.phase)
            return GridRep(grid, v)
        return GridRep(grid, self.evaluate(grid.points()).reshape(grid.shape))

    def to_dict(self) -> dict:
        return {"coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
                "shift": [float(v) for v in self.shift], "phase": float(self.phase)}

    @classmethod
    def from_dict(cls, basis: SpectralBasis, data: dict) -> "SpectralFunction":
        c = np.array([complex(re, im) for re, im in data["coefficients"]])
        return cls(basis, c, np.array(data.get("shift", [0.0] * basis.dim)), data.get("phase", 0.0))


def ground_state(nf: BlockNormalForm, *, n_nodes: int | None = None,
                 sigma_null: float | None = None, verify: bool = True) -> SpectralFunction:
    """Normalized Gaussian ground state ``prod_j sqrt(C_j/2pi) exp(-C_j |y_j|^2/4)``.

    With a null space a unit-norm Gaussian envelope of width ``sigma_null``
    multiplies the block ground state.
    """
    if nf.n_blocks == 0:
        raise ValueError("ground state needs at least one nonzero block frequency")
    E0 = spectrum_bottom(nf)
    sigma = sigma_null if sigma_null is not None else SIGMA_NULL_FACTOR / math.sqrt(E0)
    basis = build_basis(nf, E0, 0, None, n_nodes=n_nodes, sigma_null=sigma, verify=verify)
    return SpectralFunction(basis, np.ones(1))


def random_subspace_function(basis: SpectralBasis, seed: int) -> SpectralFunction:
    """Complex Gaussian coefficients normalized to unit norm, deterministic per seed."""
    if basis.size == 0:
        raise ValueError("cannot draw from an empty basis")
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
    return SpectralFunction(basis, c / np.linalg.norm(c))


# --------------------------------------------------------------------------
# magnetic translations  (T_y g)(x) = exp(i chi(x, y)) g(x - y),  chi = -x^T B y / 2

def translation_phase(B, y, y2) -> float:
    """Phase ``theta`` with ``T_y T_y2 = e^{i theta} T_{y + y2}``; ``theta = y^T B y2 / 2``."""
    Bm = B.entries if isinstance(B, FieldMatrix) else np.asarray(B, dtype=float)
    return float(0.5 * np.asarray(y) @ Bm @ np.asarray(y2))


@dataclass(frozen=True)
class TranslationReport:
    mass_loss: float
    leakage: float


def magnetic_translate(f, y, B=None, mass_tol: float = 1e-8):
    """Magnetic translate of a spectral or grid function.

    A :class:`SpectralFunction` is translated exactly (the shift and phase
    are recorded); a :class:`GridRep` is interpolated onto shifted nodes and
    a warning reports the estimated mass pushed off the grid.
    """
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("translation vector must be finite")
    if isinstance(f, SpectralFunction):
        Bm = f.field
        theta = f.phase + translation_phase(Bm, y, f.shift)
        out = SpectralFunction(f.basis, f.coefficients, f.shift + y, theta)
        _check_mass(out.grid_rep(), f.norm_sq(), mass_tol)
        return out
    if B is None:
        raise ValueError("a field matrix is required to translate grid functions")
    Bm = B.entries if isinstance(B, FieldMatrix) else np.asarray(B, dtype=float)
    grid = f.grid
    targets = [grid.axis_nodes(k) - y[k] for k in range(grid.dim)]
    shifted = f.interpolate(targets)
    chi = np.zeros(grid.shape)
    By = Bm @ y
    for k in range(grid.dim):
        chi = chi - 0.5 * By[k] * grid.coordinate(k)
    out = f.with_values(np.exp(1j * chi) * shifted)
    _check_mass(out, float(np.sum(f.norm_sq())), mass_tol)
    return out


def _check_mass(g: GridRep, ref: float, tol: float) -> float:
    loss = max(0.0, 1.0 - float(np.sum(g.norm_sq())) / ref) if ref > 0 else 0.0
    if loss > tol:
        warnings.warn(f"magnetic translate leaves the reliable grid region: "
                      f"estimated mass loss {loss:.3e}", RuntimeWarning, stacklevel=3)
    return loss


def translation_leakage(f: SpectralFunction) -> float:
    """Fraction of ``||f||^2`` outside the basis span (truncation leakage)."""
    g = f.grid_rep()
    modes = f.basis.grid_values()
    proj = modes.inner(g)
    total = float(np.sum(g.norm_sq()))
    return max(0.0, 1.0 - float(np.sum(np.abs(proj) ** 2)) / total)
