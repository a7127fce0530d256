"""Tensor Gauss-Hermite grids, native differentiation and grid functions.

Each axis carries the nodes ``x = s t`` where ``t`` are the roots of the
degree-``N`` Hermite polynomial.  Nodal values are identified with the
expansion in the first ``N`` normalized Hermite functions
``psi_n(x / s) / sqrt(s)``, so differentiation and interpolation are exact on
polynomial-times-Gaussian functions of degree below ``N``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ResolutionError(RuntimeError):
    """The grid cannot resolve the function (coefficient tail too heavy)."""

    def __init__(self, message, tail):
        super().__init__(message)
        self.tail = tail


def hermite_functions(n_max: int, t) -> np.ndarray:
    """Normalized Hermite functions ``psi_0 .. psi_{n_max}`` at ``t``.

    Returns an array of shape ``t.shape + (n_max + 1,)``.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (n_max + 1,))
    out[..., 0] = np.pi ** -0.25 * np.exp(-0.5 * t * t)
    if n_max >= 1:
        out[..., 1] = np.sqrt(2.0) * t * out[..., 0]
    for n in range(1, n_max):
        out[..., n + 1] = (np.sqrt(2.0 / (n + 1)) * t * out[..., n]
                           - np.sqrt(n / (n + 1.0)) * out[..., n - 1])
    return out


def hermite_function_derivatives(n_max: int, t) -> np.ndarray:
    """d/dt psi_n(t) for n = 0 .. n_max, via the ladder relation."""
    psi = hermite_functions(n_max + 1, t)
    n = np.arange(n_max + 1)
    dpsi = -np.sqrt((n + 1) / 2.0) * psi[..., 1:]
    dpsi[..., 1:] += np.sqrt(n[1:] / 2.0) * psi[..., :-2]
    return dpsi


@lru_cache(maxsize=64)
def _gauss_hermite(n: int):
    k = np.arange(1, n)
    J = np.diag(np.sqrt(k / 2.0), 1) + np.diag(np.sqrt(k / 2.0), -1)
    t = np.linalg.eigvalsh(J)
    t = 0.5 * (t - t[::-1])  # exact symmetry
    # w_i exp(t_i^2) = 1 / (n psi_{n-1}(t_i)^2), overflow free
    psi = hermite_functions(n - 1, t)
    wt = 1.0 / (n * psi[:, n - 1] ** 2)
    Psi = psi
    dPsi = hermite_function_derivatives(n - 1, t)
    D = dPsi @ (Psi.T * wt)
    for a in (t, wt, Psi, D):
        a.setflags(write=False)
    return t, wt, Psi, D


def gauss_hermite(n: int):
    """Roots ``t`` and Gaussian-free weights ``w exp(t^2)`` of degree ``n``."""
    t, wt, _, _ = _gauss_hermite(int(n))
    return t, wt


def hermite_diff_matrix(n: int) -> np.ndarray:
    """First-derivative matrix on the unit-scale Hermite nodes."""
    return _gauss_hermite(int(n))[3]


def fd4_matrix(n: int, h: float) -> np.ndarray:
    """Fourth-order central difference matrix on a uniform grid.

    One-sided five-point stencils are used at the two boundary nodes on each
    side.  Only used to cross-check the spectral matrices.
    """
    D = np.zeros((n, n))
    c = np.array([1, -8, 0, 8, -1]) / 12.0
    for i in range(2, n - 2):
        D[i, i - 2:i + 3] = c
    fwd = np.array([-25, 48, -36, 16, -3]) / 12.0
    D[0, 0:5] = fwd
    D[1, 0:5] = np.array([-3, -10, 18, -6, 1]) / 12.0
    D[n - 1, n - 5:] = -fwd[::-1]
    D[n - 2, n - 5:] = -np.array([-3, -10, 18, -6, 1])[::-1] / 12.0
    return D / h


def apply_axis(M: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    """Contract a matrix with ``values`` along one axis (counted from the end
    of the grid dimensions is handled by the caller)."""
    v = np.moveaxis(values, axis, -1)
    return np.moveaxis(v @ M.T, -1, axis)


@dataclass(frozen=True)
class TensorGrid:
    """Tensor product of scaled Gauss-Hermite rules."""

    n_nodes: tuple
    scales: tuple

    def __post_init__(self):
        if len(self.n_nodes) != len(self.scales):
            raise ValueError("n_nodes and scales must have equal length")
        if any(n < 2 for n in self.n_nodes) or any(s <= 0 for s in self.scales):
            raise ValueError("need at least 2 nodes and positive scales per axis")
        object.__setattr__(self, "n_nodes", tuple(int(n) for n in self.n_nodes))
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))

    @property
    def dim(self) -> int:
        return len(self.n_nodes)

    @property
    def shape(self) -> tuple:
        return self.n_nodes

    @property
    def size(self) -> int:
        return int(np.prod(self.n_nodes))

    def axis_nodes(self, k: int) -> np.ndarray:
        return self.scales[k] * gauss_hermite(self.n_nodes[k])[0]

    def axis_weights(self, k: int) -> np.ndarray:
        return self.scales[k] * gauss_hermite(self.n_nodes[k])[1]

    def axis_diff(self, k: int) -> np.ndarray:
        return hermite_diff_matrix(self.n_nodes[k]) / self.scales[k]

    def axis_coefficients(self, k: int) -> np.ndarray:
        """Map nodal values to Hermite-function coefficients along axis k."""
        _, wt, Psi, _ = _gauss_hermite(self.n_nodes[k])
        return np.sqrt(self.scales[k]) * (Psi.T * wt)

    def axis_interpolation(self, k: int, targets) -> np.ndarray:
        """Matrix mapping nodal values on axis k to values at ``targets``."""
        n = self.n_nodes[k]
        s = self.scales[k]
        _, wt, Psi, _ = _gauss_hermite(n)
        T = hermite_functions(n - 1, np.asarray(targets, dtype=float) / s)
        return T @ (Psi.T * wt)

    def axis_extent(self, k: int) -> float:
        return float(self.axis_nodes(k)[-1])

    def points(self) -> np.ndarray:
        """All nodes as an array of shape ``(size, d)`` in C order."""
        mesh = np.meshgrid(*[self.axis_nodes(k) for k in range(self.dim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def coordinate(self, k: int) -> np.ndarray:
        """Coordinate x_k broadcast to the grid shape."""
        shape = [1] * self.dim
        shape[k] = self.n_nodes[k]
        return self.axis_nodes(k).reshape(shape)

    def weights(self) -> np.ndarray:
        w = np.ones(())
        for k in range(self.dim):
            w = np.multiply.outer(w, self.axis_weights(k))
        return w

    def to_dict(self) -> dict:
        return {"kind": "gauss-hermite", "n_nodes": list(self.n_nodes),
                "scales": [float(s) for s in self.scales]}


@dataclass(frozen=True)
class GridRep:
    """Complex function values on a tensor grid.

    ``values`` has shape ``batch + grid.shape``; a leading batch allows a
    stack of functions to be differentiated at once.
    """

    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape[v.ndim - self.grid.dim:] != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not end with grid shape {self.grid.shape}")
        object.__setattr__(self, "values", v)

    @property
    def batch_shape(self) -> tuple:
        return self.values.shape[: self.values.ndim - self.grid.dim]

    def _axis(self, k: int) -> int:
        return self.values.ndim - self.grid.dim + k

    def with_values(self, values) -> "GridRep":
        return GridRep(self.grid, values)

    def inner(self, other: "GridRep") -> np.ndarray:
        """``<self, other>`` with conjugation on the left, per batch entry."""
        w = self.grid.weights()
        ax = tuple(range(-self.grid.dim, 0))
        return np.sum(np.conj(self.values) * other.values * w, axis=ax)

    def norm_sq(self) -> np.ndarray:
        w = self.grid.weights()
        ax = tuple(range(-self.grid.dim, 0))
        return np.sum((self.values.real ** 2 + self.values.imag ** 2) * w, axis=ax)

    def gram(self) -> np.ndarray:
        """Gram matrix of a 1-d batch of functions."""
        if len(self.batch_shape) != 1:
            raise ValueError("gram needs a one-dimensional batch")
        w = np.sqrt(self.grid.weights()).ravel()
        F = self.values.reshape(self.values.shape[0], -1) * w
        return F.conj() @ F.T

    def diff(self, k: int) -> "GridRep":
        """Classical partial derivative along axis k."""
        return self.with_values(apply_axis(self.grid.axis_diff(k), self.values, self._axis(k)))

    def coefficient_tail(self, frac: float = 0.125) -> float:
        """Largest fraction of coefficient energy in the top modes of any axis."""
        worst = 0.0
        total = float(np.sum(self.norm_sq()))
        if total == 0.0:
            return 0.0
        for k in range(self.grid.dim):
            c = apply_axis(self.grid.axis_coefficients(k), self.values, self._axis(k))
            e = np.abs(c) ** 2
            # remaining grid axes are weighted by their quadrature weights
            for j in range(self.grid.dim):
                if j != k:
                    shape = [1] * self.grid.dim
                    shape[j] = self.grid.n_nodes[j]
                    e = e * self.grid.axis_weights(j).reshape(shape)
            e = np.moveaxis(e, self._axis(k), -1).reshape(-1, self.grid.n_nodes[k]).sum(axis=0)
            ntail = max(2, int(np.ceil(frac * self.grid.n_nodes[k])))
            worst = max(worst, float(e[-ntail:].sum() / max(e.sum(), 1e-300)))
        return worst

    def check_resolution(self, tol: float = 1e-12) -> float:
        tail = self.coefficient_tail()
        if tail > tol:
            raise ResolutionError(
                f"grid under-resolved: coefficient tail fraction {tail:.3e} exceeds {tol:.1e}", tail)
        return tail

    def interpolate(self, targets: list) -> np.ndarray:
        """Values on the tensor product of per-axis target points."""
        v = self.values
        for k in range(self.grid.dim):
            v = apply_axis(self.grid.axis_interpolation(k, targets[k]), v, self._axis(k))
        return v

    def interpolate_points(self, points: np.ndarray) -> np.ndarray:
        """Values at scattered points of shape ``(n, d)``; unbatched only."""
        if self.batch_shape:
            raise ValueError("scattered interpolation supports a single function")
        points = np.atleast_2d(points)
        out = np.empty(points.shape[0], dtype=complex)
        chunk = 2048
        for a in range(0, points.shape[0], chunk):
            P = points[a:a + chunk]
            mats = [self.grid.axis_interpolation(k, P[:, k]) for k in range(self.grid.dim)]
            # contract the last axis first, rows carried along
            v = np.broadcast_to(self.values, (P.shape[0],) + self.grid.shape)
            v = np.einsum("p...j,pj->p...", v, mats[-1])
            for k in range(self.grid.dim - 2, -1, -1):
                v = np.einsum("p...j,pj->p...", v, mats[k])
            out[a:a + chunk] = v
        return out
