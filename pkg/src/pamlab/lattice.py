"""Probability measures on boxes of Z^d and the functionals built on them."""
from __future__ import annotations

import csv
import enum
import io
import itertools
from pathlib import Path
from typing import Iterable, Mapping, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import xlogy

__all__ = [
    "Boundary",
    "LatticeMeasure",
    "DegenerateMeasureError",
    "SUPPORT_FLOOR",
    "dirichlet_form",
    "entropy_term",
    "gamma_sum",
    "periodize",
    "sobolev_ratio",
    "laplacian_matrix",
    "box_shape",
]

SUPPORT_FLOOR = 1e-10


class Boundary(str, enum.Enum):
    FREE = "free"
    PERIODIC = "periodic"


class DegenerateMeasureError(ValueError):
    """Raised when a ratio needs a positive Dirichlet form."""


def box_shape(dim: int, radius: int) -> Tuple[int, ...]:
    return (2 * radius + 1,) * dim


class LatticeMeasure:
    """Probability measure on ``B_R = [-R, R]^d`` stored densely.

    The array ``values`` is indexed so that site ``z`` lives at ``z + R``.
    :attr:`mass` gives the sparse view, sorted lexicographically by site.
    Instances are read-only.
    """

    __slots__ = ("dim", "radius", "boundary", "values")

    def __init__(self, values, boundary: Union[Boundary, str] = Boundary.FREE, *, check: bool = True):
        arr = np.array(values, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        n = arr.shape[0]
        if any(s != n for s in arr.shape) or n % 2 == 0:
            raise ValueError(f"values must live on a cube of odd side, got shape {arr.shape}")
        if check:
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError("masses must be finite and non-negative")
            total = arr.sum()
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"total mass {total!r} differs from 1")
        arr.setflags(write=False)
        self.values = arr
        self.dim = arr.ndim
        self.radius = (n - 1) // 2
        self.boundary = Boundary(boundary)

    # -- constructors --------------------------------------------------
    @classmethod
    def delta(cls, dim: int, radius: int = 0, boundary=Boundary.FREE) -> "LatticeMeasure":
        arr = np.zeros(box_shape(dim, radius))
        arr[(radius,) * dim] = 1.0
        return cls(arr, boundary)

    @classmethod
    def from_mapping(cls, mass: Mapping, dim: int, radius: int, boundary=Boundary.FREE, normalize=False):
        arr = np.zeros(box_shape(dim, radius))
        for z, m in mass.items():
            z = (z,) if np.isscalar(z) else tuple(z)
            if len(z) != dim or any(abs(c) > radius for c in z):
                raise ValueError(f"site {z} outside B_{radius}")
            arr[tuple(c + radius for c in z)] += m
        if normalize:
            arr /= arr.sum()
        return cls(arr, boundary)

    @classmethod
    def uniform(cls, sites: Iterable, dim: int, radius: int, boundary=Boundary.FREE):
        sites = list(sites)
        return cls.from_mapping({s: 1.0 / len(sites) for s in sites}, dim, radius, boundary)

    # -- views ---------------------------------------------------------
    @property
    def mass(self) -> dict:
        """Sparse map ``site -> mass`` over strictly positive masses, sorted by site."""
        idx = np.argwhere(self.values > 0)
        return {tuple(int(c) - self.radius for c in i): float(self.values[tuple(i)]) for i in idx}

    def coords(self) -> np.ndarray:
        """Integer coordinates of every cell, shape ``values.shape + (d,)``."""
        axes = [np.arange(-self.radius, self.radius + 1)] * self.dim
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def sqrt(self) -> np.ndarray:
        return np.sqrt(self.values)

    def with_boundary(self, boundary) -> "LatticeMeasure":
        return LatticeMeasure(self.values, boundary, check=False)

    def embed(self, radius: int) -> "LatticeMeasure":
        """Same measure viewed inside a larger box."""
        if radius < self.radius:
            raise ValueError("can only embed into a larger box")
        pad = radius - self.radius
        return LatticeMeasure(np.pad(self.values, pad), self.boundary, check=False)

    def support_size(self, floor: float = SUPPORT_FLOOR) -> int:
        return int(np.count_nonzero(self.values > floor))

    def __eq__(self, other):
        return (
            isinstance(other, LatticeMeasure)
            and self.boundary == other.boundary
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"LatticeMeasure(dim={self.dim}, radius={self.radius}, boundary={self.boundary.value}, sites={len(self.mass)})"

    # -- CSV ------------------------------------------------------------
    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        """CSV with header ``z_1,...,z_d,mass``; masses in shortest round-trip decimal."""
        buf = io.StringIO()
        buf.write(f"# radius={self.radius} boundary={self.boundary.value}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"z_{i + 1}" for i in range(self.dim)] + ["mass"])
        for z, m in self.mass.items():
            w.writerow([*z, repr(m)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def load_csv(cls, path: Union[str, Path]) -> "LatticeMeasure":
        return cls.from_csv(Path(path).read_text())

    @classmethod
    def from_csv(cls, text: str) -> "LatticeMeasure":
        """Inverse of :meth:`to_csv` (takes the CSV text)."""
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                meta.update(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
            elif line.strip():
                rows.append(line)
        reader = csv.reader(rows)
        header = next(reader)
        dim = len(header) - 1
        mass = {}
        for r in reader:
            mass[tuple(int(c) for c in r[:dim])] = float(r[dim])
        radius = int(meta["radius"]) if "radius" in meta else max((max(map(abs, z)) for z in mass), default=0)
        return cls.from_mapping(mass, dim, radius, meta.get("boundary", "free"))


# ---------------------------------------------------------------------------
# functionals


def _neighbour_differences(q: np.ndarray, periodic: bool):
    """Yield arrays of ``q(x) - q(x + e_i)`` over every nearest-neighbour edge."""
    for ax in range(q.ndim):
        if periodic:
            yield q - np.roll(q, -1, axis=ax)
        else:
            pad = [(0, 0)] * q.ndim
            pad[ax] = (1, 1)
            yield np.diff(np.pad(q, pad), axis=ax)


def dirichlet_form(p: LatticeMeasure) -> float:
    """Sum over nearest-neighbour edges of ``(sqrt p(x) - sqrt p(y))^2``.

    Free boxes include the edges to the zero exterior; periodic boxes wrap.
    """
    q = p.sqrt()
    periodic = p.boundary is Boundary.PERIODIC
    return float(sum(np.sum(d * d) for d in _neighbour_differences(q, periodic)))


def entropy_term(p: LatticeMeasure) -> float:
    """``sum p log p`` with ``0 log 0 = 0``."""
    return float(np.sum(xlogy(p.values, p.values)))


def gamma_sum(p: LatticeMeasure, gamma: float, floor: float = SUPPORT_FLOOR) -> float:
    """``sum p^gamma``; for ``gamma = 0`` the number of sites with mass above ``floor``."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if gamma == 0:
        return float(p.support_size(floor))
    v = p.values[p.values > 0]
    return float(np.sum(v**gamma))


def periodize(p: LatticeMeasure, R: int) -> LatticeMeasure:
    """Fold ``p`` into ``B_R`` by summing over translates by ``(2R+1) Z^d``."""
    n = 2 * R + 1
    src = p.values
    coords = np.nonzero(src)
    out = np.zeros(box_shape(p.dim, R))
    target = tuple(((c - p.radius + R) % n) for c in coords)
    np.add.at(out, target, src[coords])
    return LatticeMeasure(out, Boundary.PERIODIC, check=False)


def sobolev_ratio(p: LatticeMeasure, gamma: float) -> float:
    """``gamma_sum(p, gamma) / S(p)^(d (gamma - 1) / 2)`` for ``gamma > 1``."""
    d = p.dim
    if not gamma > 1 or gamma * (d - 2) >= d:
        raise ValueError("need gamma > 1 and gamma (d - 2) < d")
    s = dirichlet_form(p)
    if s <= 0:
        raise DegenerateMeasureError("Dirichlet form vanishes; ratio undefined")
    return gamma_sum(p, gamma) / s ** (d * (gamma - 1) / 2)


def laplacian_matrix(shape: Tuple[int, ...], periodic: bool = False) -> sp.csr_matrix:
    """Sparse ``2d I - A`` on a box so that ``q @ L @ q`` is the edge sum of squared differences.

    Free boxes drop the exterior neighbours (they carry zero); periodic boxes wrap.
    """
    shape = tuple(int(s) for s in shape)
    d = len(shape)
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    rows, cols = [], []
    for ax in range(d):
        if periodic:
            nb = np.roll(idx, -1, axis=ax)
            src = idx
        else:
            sl_a = [slice(None)] * d
            sl_b = [slice(None)] * d
            sl_a[ax] = slice(0, -1)
            sl_b[ax] = slice(1, None)
            src, nb = idx[tuple(sl_a)], idx[tuple(sl_b)]
        rows.extend([src.ravel(), nb.ravel()])
        cols.extend([nb.ravel(), src.ravel()])
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    c = np.concatenate(cols) if cols else np.zeros(0, int)
    adj = sp.coo_matrix((np.ones(r.size), (r, c)), shape=(n, n)).tocsr()
    return (2.0 * d * sp.identity(n, format="csr") - adj).tocsr()


def all_sites(dim: int, radius: int):
    return itertools.product(range(-radius, radius + 1), repeat=dim)
