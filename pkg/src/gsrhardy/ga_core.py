"""Dense geometric algebra over Euclidean R^d.

Multivectors are stored as 2**d real coefficients indexed by bitmask: bit i
set means the basis vector e_{i+1} is a factor of that basis blade.  Products
are driven by per-dimension sign/index tables built once and cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

MAX_DIM = 10
DEGENERACY_RTOL = 1e-24


class DimensionMismatch(ValueError):
    pass


class DegenerateBladeError(ValueError):
    pass


_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << MAX_DIM)], dtype=np.int64)


@lru_cache(maxsize=None)
def _tables(dim: int):
    """Sign, result index and validity masks for all basis-blade pairs."""
    size = 1 << dim
    a = np.arange(size)[:, None]
    b = np.arange(size)[None, :]
    swaps = np.zeros((size, size), dtype=np.int64)
    shifted = a >> 1
    for _ in range(dim):
        swaps += _POPCOUNT[shifted & b]
        shifted = shifted >> 1
    sign = np.where(swaps % 2 == 0, 1.0, -1.0)
    index = a ^ b
    wedge_ok = (a & b) == 0
    lc_ok = (a & b) == a
    grade = _POPCOUNT[:size]
    for arr in (sign, index, wedge_ok, lc_ok):
        arr.setflags(write=False)
    return sign, index, wedge_ok, lc_ok, grade


def _product(a: np.ndarray, b: np.ndarray, dim: int, kind: str) -> np.ndarray:
    sign, index, wedge_ok, lc_ok, _ = _tables(dim)
    terms = sign * np.outer(a, b)
    if kind == "wedge":
        terms = np.where(wedge_ok, terms, 0.0)
    elif kind == "lc":
        terms = np.where(lc_ok, terms, 0.0)
    out = np.zeros(1 << dim)
    np.add.at(out, index.ravel(), terms.ravel())
    return out


@dataclass(frozen=True, eq=False)
class Multivector:
    dim: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {self.dim}")
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (1 << self.dim,):
            raise ValueError(f"expected {1 << self.dim} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, dim: int) -> "Multivector":
        return cls(dim, np.zeros(1 << dim))

    @classmethod
    def scalar(cls, dim: int, value: float = 1.0) -> "Multivector":
        c = np.zeros(1 << dim)
        c[0] = value
        return cls(dim, c)

    @classmethod
    def basis(cls, dim: int, mask: int, value: float = 1.0) -> "Multivector":
        c = np.zeros(1 << dim)
        c[mask] = value
        return cls(dim, c)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "Multivector":
        v = np.asarray(v, dtype=float)
        dim = v.shape[0]
        c = np.zeros(1 << dim)
        c[1 << np.arange(dim)] = v
        return cls(dim, c)

    # structure ----------------------------------------------------------
    def grade(self, k: int) -> "Multivector":
        g = _tables(self.dim)[4]
        return Multivector(self.dim, np.where(g == k, self.coeffs, 0.0))

    def grades(self, tol: float = 1e-12) -> set[int]:
        g = _tables(self.dim)[4]
        cut = tol * max(1.0, float(np.abs(self.coeffs).max(initial=0.0)))
        return {int(k) for k in np.unique(g[np.abs(self.coeffs) > cut])}

    @property
    def scalar_part(self) -> float:
        return float(self.coeffs[0])

    def to_vector(self, tol: float = 1e-10) -> np.ndarray:
        """Grade-1 coefficients; raises if other grades carry weight."""
        g = _tables(self.dim)[4]
        other = np.abs(self.coeffs[g != 1]).max(initial=0.0)
        scale = max(np.abs(self.coeffs).max(initial=0.0), 1e-300)
        if other > tol * scale:
            raise ValueError(f"multivector is not a pure vector (off-grade weight {other:.3g})")
        return self.coeffs[1 << np.arange(self.dim)].copy()

    def norm_sq(self) -> float:
        """Scalar part of A A-dagger; for blades this is |A|^2."""
        return float(np.dot(self.coeffs, self.coeffs))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "Multivector"):
        if not isinstance(other, Multivector):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimensions {self.dim} and {other.dim} differ")
        return None

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Multivector.scalar(self.dim, float(other))
        self._check(other)
        return Multivector(self.dim, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Multivector.scalar(self.dim, float(other))
        self._check(other)
        return Multivector(self.dim, self.coeffs - other.coeffs)

    def __neg__(self):
        return Multivector(self.dim, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Multivector(self.dim, self.coeffs * float(other))
        return geometric_product(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Multivector(self.dim, self.coeffs * float(other))
        return NotImplemented

    def __truediv__(self, other):
        return Multivector(self.dim, self.coeffs / float(other))

    def __xor__(self, other):
        return wedge(self, other)

    def __lshift__(self, other):
        return left_interior(self, other)

    def __invert__(self):
        return reverse(self)

    def allclose(self, other: "Multivector", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def __repr__(self):
        nz = np.flatnonzero(self.coeffs)
        if nz.size == 0:
            return f"Multivector(dim={self.dim}, 0)"
        parts = []
        for m in nz:
            name = "1" if m == 0 else "e" + "".join(str(i + 1) for i in range(self.dim) if m >> i & 1)
            parts.append(f"{self.coeffs[m]:+.6g}*{name}")
        return f"Multivector(dim={self.dim}, {' '.join(parts)})"


def _pair(a: Multivector, b: Multivector) -> int:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions {a.dim} and {b.dim} differ")
    return a.dim


def wedge(a: Multivector, b: Multivector) -> Multivector:
    dim = _pair(a, b)
    return Multivector(dim, _product(a.coeffs, b.coeffs, dim, "wedge"))


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    dim = _pair(a, b)
    return Multivector(dim, _product(a.coeffs, b.coeffs, dim, "gp"))


def left_interior(a: Multivector, b: Multivector) -> Multivector:
    """Left contraction: the grade (s - r) part of a_r b_s, zero when r > s."""
    dim = _pair(a, b)
    return Multivector(dim, _product(a.coeffs, b.coeffs, dim, "lc"))


def reverse(a: Multivector) -> Multivector:
    g = _tables(a.dim)[4]
    sign = np.where((g * (g - 1) // 2) % 2 == 0, 1.0, -1.0)
    return Multivector(a.dim, a.coeffs * sign)


def wedge_all(vectors, dim: int | None = None) -> Multivector:
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    if not vectors:
        if dim is None:
            raise ValueError("dimension required for an empty wedge")
        return Multivector.scalar(dim)
    out = Multivector.from_vector(vectors[0])
    for v in vectors[1:]:
        out = wedge(out, Multivector.from_vector(v))
    return out


class Blade:
    """Exterior product of an ordered list of vectors (empty list = scalar 1)."""

    def __init__(self, factors, dim: int | None = None, sign: float = 1.0):
        factors = [np.asarray(v, dtype=float) for v in factors]
        if factors:
            dim = factors[0].shape[0]
            if any(v.shape != (dim,) for v in factors):
                raise DimensionMismatch("blade factors have inconsistent shapes")
        elif dim is None:
            raise ValueError("dim is required for a scalar blade")
        self.factors = tuple(factors)
        self.dim = dim
        self.grade = len(factors)
        self.mv = wedge_all(factors, dim) * float(sign)

    @classmethod
    def from_axes(cls, dim: int, axes) -> "Blade":
        return cls([np.eye(dim)[i] for i in axes], dim=dim)

    def norm_sq(self) -> float:
        return self.mv.norm_sq()

    def norm(self) -> float:
        return self.mv.norm()

    def is_degenerate(self) -> bool:
        scale = float(np.prod([v @ v for v in self.factors])) if self.factors else 1.0
        return self.norm_sq() <= DEGENERACY_RTOL * scale

    def __repr__(self):
        return f"Blade(grade={self.grade}, |A|={self.norm():.6g})"


def _as_mv(A) -> Multivector:
    return A.mv if isinstance(A, Blade) else A


def blade_inverse(A: Blade) -> Multivector:
    if A.is_degenerate():
        raise DegenerateBladeError(f"blade of grade {A.grade} has zero magnitude")
    return reverse(A.mv) / A.norm_sq()


def project_reject(x, A: Blade) -> tuple[np.ndarray, np.ndarray]:
    """Split x into its projection on span(A) and the rejection from it."""
    xv = Multivector.from_vector(x)
    if xv.dim != A.dim:
        raise DimensionMismatch(f"vector of dim {xv.dim} against blade of dim {A.dim}")
    inv = blade_inverse(A)
    par = geometric_product(left_interior(xv, A.mv), inv).to_vector()
    perp = geometric_product(wedge(xv, A.mv), inv).to_vector()
    return par, perp


def blade_grad_sq(x, A: Blade) -> np.ndarray:
    """Gradient of x -> |x ^ A|^2, i.e. 2 (x ^ A) A-dagger."""
    if A.is_degenerate():
        raise DegenerateBladeError("gradient undefined for a degenerate blade")
    xv = Multivector.from_vector(x)
    if xv.dim != A.dim:
        raise DimensionMismatch(f"vector of dim {xv.dim} against blade of dim {A.dim}")
    return (geometric_product(wedge(xv, A.mv), reverse(A.mv)) * 2.0).to_vector()


class BladeLaplacians(NamedTuple):
    lap_sq: float
    lap_pow: float
    grad_log: np.ndarray
    lap_log: float


def blade_laplacians(x, A: Blade, beta: float, R: float = 1.0) -> BladeLaplacians:
    """Derivatives of |x^A|^2, |x^A|^(2 beta) and ln(|x^A|/R) at x.

    The log gradient is returned as (x^A) A-dagger / |x^A|^2, the exact
    gradient; it equals ((x^A)^-1 A-dagger) up to the reversion sign of x^A.
    """
    if R <= 0:
        raise ValueError("length scale R must be positive")
    if A.is_degenerate():
        raise DegenerateBladeError("derivatives undefined for a degenerate blade")
    xv = Multivector.from_vector(x)
    xa = wedge(xv, A.mv)
    s2 = xa.norm_sq()
    if s2 <= DEGENERACY_RTOL * max(float(np.dot(x, x)), 1e-300) * A.norm_sq():
        raise DegenerateBladeError("x lies in the subspace of A")
    a2 = A.norm_sq()
    k = A.dim - A.grade
    grad_sq = geometric_product(xa, reverse(A.mv)).to_vector() * 2.0
    return BladeLaplacians(
        lap_sq=2.0 * k * a2,
        lap_pow=2.0 * beta * (2.0 * beta + k - 2) * a2 * s2 ** (beta - 1.0),
        grad_log=grad_sq / (2.0 * s2),
        lap_log=(k - 2) * a2 / s2,
    )


def e(dim: int, *indices: int) -> Multivector:
    """Basis blade e_{i1 i2 ...} with 1-based indices, e.g. e(3, 1, 2) = e12."""
    out = Multivector.scalar(dim)
    for i in indices:
        out = geometric_product(out, Multivector.basis(dim, 1 << (i - 1)))
    return out
