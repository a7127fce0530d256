"""Sampling sets, thickness certificates and the periodic hole family.

A set ``S`` is ``(l, rho)``-thick when every axis-aligned box with side
lengths ``l`` meets ``S`` in at least a ``rho`` fraction of its volume.
"""
from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field, replace

import numpy as np


def ball_volume(d: int) -> float:
    """Volume of the unit ball, ``pi^(d/2) / Gamma(d/2 + 1)``."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class SamplingSet:
    """Base class; subclasses implement membership."""

    dim: int

    variant = "abstract"

    def indicator(self, points) -> np.ndarray:
        raise NotImplementedError

    def shifted(self, y) -> "SamplingSet":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class FullSpace(SamplingSet):
    variant = "full_space"

    def indicator(self, points) -> np.ndarray:
        return np.ones(np.atleast_2d(points).shape[0], dtype=bool)

    def shifted(self, y) -> "FullSpace":
        return self

    def to_dict(self) -> dict:
        return {"variant": self.variant, "dim": self.dim}


def _offset(offset, d):
    return tuple(float(v) for v in (np.zeros(d) if offset is None else np.broadcast_to(offset, (d,))))


@dataclass(frozen=True)
class PeriodicHoles(SamplingSet):
    """Complement of the balls ``B_r(L k + offset)``, ``k`` in the integer lattice."""

    L: float = 1.0
    r: float = 0.25
    offset: tuple = None

    variant = "periodic_holes"

    def __post_init__(self):
        if not (self.L > 2 * self.r > 0):
            raise ValueError(f"periodic holes need L > 2r > 0, got L={self.L}, r={self.r}")
        object.__setattr__(self, "offset", _offset(self.offset, self.dim))

    def indicator(self, points) -> np.ndarray:
        z = np.atleast_2d(np.asarray(points, dtype=float)) - np.array(self.offset)
        z = z - self.L * np.round(z / self.L)
        return np.sum(z * z, axis=1) >= self.r * self.r

    def shifted(self, y) -> "PeriodicHoles":
        return replace(self, offset=tuple(np.array(self.offset) + np.asarray(y, dtype=float)))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "dim": self.dim, "L": self.L, "r": self.r,
                "offset": list(self.offset)}


@dataclass(frozen=True)
class Stripes(SamplingSet):
    """``{x : (x_axis - offset) mod period < width}``."""

    period: float = 1.0
    width: float = 0.5
    axis: int = 0
    offset: float = 0.0

    variant = "stripes"

    def __post_init__(self):
        if not (0 < self.width <= self.period):
            raise ValueError("stripes need 0 < width <= period")
        if not 0 <= self.axis < self.dim:
            raise ValueError("stripe axis out of range")

    def indicator(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))[:, self.axis] - self.offset
        return np.mod(x, self.period) < self.width

    def shifted(self, y) -> "Stripes":
        return replace(self, offset=self.offset + float(np.asarray(y)[self.axis]))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "dim": self.dim, "period": self.period,
                "width": self.width, "axis": self.axis, "offset": self.offset}


@dataclass(frozen=True)
class Bitmap(SamplingSet):
    """Voxel set on an axis-aligned box; points outside the box get ``outside``."""

    box: tuple = None          # ((lo_1..lo_d), (hi_1..hi_d))
    resolution: tuple = None
    bits: np.ndarray = field(default=None, compare=False)
    outside: bool = True

    variant = "bitmap"

    def __post_init__(self):
        lo, hi = (tuple(float(v) for v in self.box[0]), tuple(float(v) for v in self.box[1]))
        res = tuple(int(n) for n in self.resolution)
        if len(lo) != self.dim or len(hi) != self.dim or len(res) != self.dim:
            raise ValueError("box and resolution must match the dimension")
        if any(h <= l for l, h in zip(lo, hi)) or any(n < 1 for n in res):
            raise ValueError("empty box or resolution")
        b = np.asarray(self.bits, dtype=bool)
        if b.size != int(np.prod(res)):
            raise ValueError(f"bitmap has {b.size} bits, expected {int(np.prod(res))}")
        b = b.reshape(res).copy()
        b.setflags(write=False)
        object.__setattr__(self, "box", (lo, hi))
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "bits", b)

    @property
    def voxel(self) -> np.ndarray:
        lo, hi = np.array(self.box[0]), np.array(self.box[1])
        return (hi - lo) / np.array(self.resolution)

    def voxel_centers(self, k: int) -> np.ndarray:
        return self.box[0][k] + (np.arange(self.resolution[k]) + 0.5) * self.voxel[k]

    def indicator(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((x - np.array(self.box[0])) / self.voxel).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.array(self.resolution)), axis=1)
        out = np.full(x.shape[0], bool(self.outside))
        if inside.any():
            out[inside] = self.bits[tuple(idx[inside].T)]
        return out

    def shifted(self, y) -> "Bitmap":
        y = np.asarray(y, dtype=float)
        return replace(self, box=(tuple(np.array(self.box[0]) + y), tuple(np.array(self.box[1]) + y)),
                       bits=self.bits)

    def to_dict(self) -> dict:
        packed = np.packbits(self.bits.ravel())
        return {"variant": self.variant, "dim": self.dim,
                "box": [list(self.box[0]), list(self.box[1])],
                "resolution": list(self.resolution), "outside": bool(self.outside),
                "bits": base64.b64encode(packed.tobytes()).decode("ascii")}


def set_from_dict(data: dict) -> SamplingSet:
    v = data["variant"]
    d = int(data["dim"])
    if v == "full_space":
        return FullSpace(d)
    if v == "periodic_holes":
        return PeriodicHoles(d, float(data["L"]), float(data["r"]), data.get("offset"))
    if v == "stripes":
        return Stripes(d, float(data["period"]), float(data["width"]), int(data.get("axis", 0)),
                       float(data.get("offset", 0.0)))
    if v == "bitmap":
        res = tuple(int(n) for n in data["resolution"])
        bits = data["bits"]
        if isinstance(bits, str):
            raw = np.frombuffer(base64.b64decode(bits), dtype=np.uint8)
            bits = np.unpackbits(raw)[: int(np.prod(res))].astype(bool)
        return Bitmap(d, tuple(map(tuple, data["box"])), res, np.asarray(bits, dtype=bool),
                      bool(data.get("outside", True)))
    raise ValueError(f"unknown set variant {v!r}")


def hole_set(L: float, r: float, d: int):
    """Periodic holes and their density ``rho = 1 - omega_d (r/L)^d``."""
    if not (L > 2 * r > 0):
        raise ValueError(f"hole set needs L > 2r > 0, got L={L}, r={r}")
    return PeriodicHoles(d, float(L), float(r)), 1.0 - ball_volume(d) * (r / L) ** d


def hole_radius(L: float, rho: float, d: int) -> float:
    """Radius giving density ``rho`` at spacing ``L``."""
    return L * ((1.0 - rho) / ball_volume(d)) ** (1.0 / d)


def void_bitmap(center, R: float, half_width: float, resolution: int) -> Bitmap:
    """Square bitmap around ``center`` with a ball of radius ``R`` removed."""
    c = np.asarray(center, dtype=float)
    d = c.size
    lo, hi = c - half_width, c + half_width
    axes = [lo[k] + (np.arange(resolution) + 0.5) * (2 * half_width / resolution) for k in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    r2 = sum((m - c[k]) ** 2 for k, m in enumerate(mesh))
    return Bitmap(d, (tuple(lo), tuple(hi)), (resolution,) * d, r2 >= R * R, True)


# --------------------------------------------------------------------------
# thickness

@dataclass(frozen=True)
class ThicknessCertificate:
    ell: tuple
    rho_lower: float
    worst_translate: tuple
    method: str
    discretization_error: float

    def __post_init__(self):
        if not 0.0 <= self.rho_lower <= 1.0:
            raise ValueError("rho_lower must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"ell": list(self.ell), "rho_lower": self.rho_lower,
                "worst_translate": list(self.worst_translate), "method": self.method,
                "discretization_error": self.discretization_error}


def _window_sums(a: np.ndarray, axis: int, width: float, periodic: bool) -> np.ndarray:
    """Sums over ``width`` consecutive cells (fractional last cell) starting at each index."""
    n = a.shape[axis]
    m = int(math.floor(width))
    frac = width - m
    a = np.moveaxis(a, axis, -1)
    if periodic:
        q, rem = divmod(m, n)
        full = a.sum(axis=-1, keepdims=True)
        ext = np.concatenate([a, a], axis=-1)
        cs = np.concatenate([np.zeros(a.shape[:-1] + (1,)), np.cumsum(ext, axis=-1)], axis=-1)
        idx = np.arange(n)
        out = q * full + cs[..., idx + rem] - cs[..., idx]
        if frac:
            out = out + frac * ext[..., idx + rem]
    else:
        cs = np.concatenate([np.zeros(a.shape[:-1] + (1,)), np.cumsum(a, axis=-1)], axis=-1)
        starts = np.arange(0, n - m + (0 if frac else 1))
        out = cs[..., starts + m] - cs[..., starts]
        if frac:
            out = out + frac * a[..., starts + m]
    return np.moveaxis(out, -1, axis)


def _boundary_cells(I: np.ndarray, periodic: bool) -> np.ndarray:
    Bd = np.zeros(I.shape, dtype=bool)
    for k in range(I.ndim):
        if I.shape[k] < 2:
            continue
        if periodic:
            Bd |= I != np.roll(I, 1, axis=k)
            Bd |= I != np.roll(I, -1, axis=k)
        else:
            diff = np.diff(I.astype(np.int8), axis=k) != 0
            pad_lo = [(0, 0)] * I.ndim
            pad_hi = [(0, 0)] * I.ndim
            pad_lo[k] = (1, 0)
            pad_hi[k] = (0, 1)
            Bd |= np.pad(diff, pad_lo) | np.pad(diff, pad_hi)
    return Bd


def _scan(I: np.ndarray, widths, periodic: bool):
    W = I.astype(float)
    Bd = _boundary_cells(I, periodic).astype(float)
    for k, w in enumerate(widths):
        W = _window_sums(W, k, w, periodic)
        Bd = _window_sums(Bd, k, w, periodic)
    vol = float(np.prod(widths))
    frac = W / vol
    i = np.unravel_index(np.argmin(frac), frac.shape)
    err = float(Bd.max() / vol + sum(1.0 / w for k, w in enumerate(widths) if I.shape[k] > 1))
    return float(frac[i]), i, err


def thickness_estimate(S: SamplingSet, ell, resolution: int = 200) -> ThicknessCertificate:
    """Minimum density of ``S`` over boxes with sides ``ell``.

    Periodic sets are scanned exhaustively over one period cell sampled at
    ``resolution`` cells per axis; bitmaps are scanned over all voxel-aligned
    in-box translates at their native resolution.  The reported
    discretization error counts cells cut by the boundary of ``S``.
    """
    ell = tuple(float(v) for v in np.broadcast_to(ell, (S.dim,)))
    if any(v <= 0 for v in ell):
        raise ValueError("box sides must be positive")
    if isinstance(S, FullSpace):
        return ThicknessCertificate(ell, 1.0, (0.0,) * S.dim, "exhaustive-by-periodicity", 0.0)
    if isinstance(S, Bitmap):
        vox = S.voxel
        span = np.array(S.box[1]) - np.array(S.box[0])
        if np.any(span < np.array(ell)):
            raise ValueError(f"bitmap box {span.tolist()} is smaller than the box sides {list(ell)}")
        widths = [e / h for e, h in zip(ell, vox)]
        rho, i, err = _scan(S.bits, widths, periodic=False)
        worst = tuple(float(S.box[0][k] + i[k] * vox[k]) for k in range(S.dim))
        return ThicknessCertificate(ell, min(1.0, max(0.0, rho)), worst, "exhaustive-by-voxel", err)
    if isinstance(S, PeriodicHoles):
        periods = [S.L] * S.dim
        origin = np.array(S.offset)
        counts = [resolution] * S.dim
    elif isinstance(S, Stripes):
        periods = [1.0] * S.dim
        periods[S.axis] = S.period
        origin = np.zeros(S.dim)
        origin[S.axis] = S.offset
        counts = [1] * S.dim
        counts[S.axis] = resolution
    else:
        raise TypeError(f"unsupported set {type(S).__name__}")
    h = [p / n for p, n in zip(periods, counts)]
    axes = [origin[k] + (np.arange(counts[k]) + 0.5) * h[k] for k in range(S.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    I = S.indicator(np.stack([m.ravel() for m in mesh], axis=-1)).reshape(counts)
    widths = [e / hh for e, hh in zip(ell, h)]
    rho, i, err = _scan(I, widths, periodic=True)
    worst = tuple(float(origin[k] + i[k] * h[k]) for k in range(S.dim))
    return ThicknessCertificate(ell, min(1.0, max(0.0, rho)), worst, "exhaustive-by-periodicity", err)
