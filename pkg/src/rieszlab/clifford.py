"""Real Clifford algebra Cl_n with negative-definite generators.

Basis blades ``e_I`` are labelled by strictly increasing index tuples
``I = (i_1, ..., i_l)`` drawn from ``1..n``; the empty tuple is the scalar
unit.  Generators satisfy ``e_j * e_j = -1`` and ``e_j * e_k = -e_k * e_j``
for ``j != k``, so an embedded vector squares to ``-|x|^2``.

Two representations are provided:

* :class:`Multivector` -- immutable, sparse (dict keyed by blade tuple),
  valid for any ``n``.  Used for exact, small-scale algebra.
* dense arrays of shape ``(..., 2**n)`` whose last axis is indexed by the
  blade bitmask (bit ``j-1`` set iff ``e_j`` occurs).  Used by the
  quadrature code for vectorized products over whole meshes.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

Blade = tuple[int, ...]


class CliffordError(ValueError):
    """Invalid blade index or dimension mismatch."""


def check_blade(indices: Sequence[int], n: int) -> Blade:
    blade = tuple(int(i) for i in indices)
    for i in blade:
        if not 1 <= i <= n:
            raise CliffordError(f"blade index {i} outside 1..{n}")
    if any(a >= b for a, b in zip(blade, blade[1:])):
        raise CliffordError(f"blade indices {blade} not strictly increasing")
    return blade


def blade_mul(I: Sequence[int], J: Sequence[int], n: int) -> tuple[int, Blade]:
    """Normalized product ``e_I * e_J = sign * e_K``.

    The concatenated word is bubble-sorted, each adjacent transposition of
    distinct generators contributing a factor -1; equal neighbours are then
    contracted with ``e_j * e_j = -1``.
    """
    I = check_blade(I, n)
    J = check_blade(J, n)
    word = list(I + J)
    sign = 1
    # bubble sort; only distinct generators are swapped
    for end in range(len(word) - 1, 0, -1):
        for k in range(end):
            if word[k] > word[k + 1]:
                word[k], word[k + 1] = word[k + 1], word[k]
                sign = -sign
    out: list[int] = []
    for g in word:
        if out and out[-1] == g:
            out.pop()
            sign = -sign
        else:
            out.append(g)
    return sign, tuple(out)


def blades(n: int) -> list[Blade]:
    """All 2**n blades of Cl_n, ordered by bitmask."""
    return [mask_to_blade(m) for m in range(1 << n)]


def blade_to_mask(blade: Blade) -> int:
    m = 0
    for i in blade:
        m |= 1 << (i - 1)
    return m


def mask_to_blade(mask: int) -> Blade:
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


class Multivector:
    """Immutable element of Cl_n stored as ``{blade: coefficient}``."""

    __slots__ = ("n", "_coeffs")

    def __init__(self, n: int, coeffs: Mapping[Sequence[int], float] | None = None):
        if n < 0:
            raise CliffordError("dimension must be nonnegative")
        self.n = int(n)
        clean: dict[Blade, float] = {}
        for key, val in (coeffs or {}).items():
            blade = check_blade(key, n)
            val = float(val)
            if val != 0.0:
                clean[blade] = clean.get(blade, 0.0) + val
        self._coeffs = clean

    # construction helpers
    @classmethod
    def scalar(cls, n: int, c: float = 1.0) -> "Multivector":
        return cls(n, {(): c})

    @classmethod
    def blade(cls, n: int, indices: Sequence[int], c: float = 1.0) -> "Multivector":
        return cls(n, {tuple(indices): c})

    @classmethod
    def from_dense(cls, arr: Sequence[float]) -> "Multivector":
        arr = np.asarray(arr, dtype=float)
        n = int(round(math.log2(arr.shape[-1])))
        if 1 << n != arr.shape[-1]:
            raise CliffordError("dense length must be a power of two")
        return cls(n, {mask_to_blade(m): arr[m] for m in range(arr.shape[-1])})

    @property
    def coeffs(self) -> dict[Blade, float]:
        return dict(self._coeffs)

    def __getitem__(self, blade: Sequence[int]) -> float:
        return self._coeffs.get(tuple(blade), 0.0)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(1 << self.n)
        for blade, c in self._coeffs.items():
            out[blade_to_mask(blade)] = c
        return out

    def _check(self, other: "Multivector") -> None:
        if not isinstance(other, Multivector):
            raise TypeError(f"expected Multivector, got {type(other).__name__}")
        if other.n != self.n:
            raise CliffordError(f"dimension mismatch: Cl_{self.n} vs Cl_{other.n}")

    def __add__(self, other: "Multivector") -> "Multivector":
        self._check(other)
        out = dict(self._coeffs)
        for b, c in other._coeffs.items():
            out[b] = out.get(b, 0.0) + c
        return Multivector(self.n, out)

    def __neg__(self) -> "Multivector":
        return Multivector(self.n, {b: -c for b, c in self._coeffs.items()})

    def __sub__(self, other: "Multivector") -> "Multivector":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return mv_mul(self, other)
        return Multivector(self.n, {b: c * float(other) for b, c in self._coeffs.items()})

    def __rmul__(self, other):
        return Multivector(self.n, {b: float(other) * c for b, c in self._coeffs.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, Multivector) and other.n == self.n and other._coeffs == self._coeffs

    def __hash__(self) -> int:
        return hash((self.n, frozenset(self._coeffs.items())))

    def allclose(self, other: "Multivector", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.to_dense(), other.to_dense(), rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        if not self._coeffs:
            return f"Multivector(n={self.n}, 0)"
        terms = []
        for b in sorted(self._coeffs, key=lambda t: (len(t), t)):
            name = "1" if not b else "e" + "".join(str(i) for i in b)
            terms.append(f"{self._coeffs[b]:+g}*{name}")
        return f"Multivector(n={self.n}, {' '.join(terms)})"


def mv_mul(u: Multivector, v: Multivector) -> Multivector:
    """Clifford product, the bilinear extension of :func:`blade_mul`."""
    u._check(v)
    out: dict[Blade, float] = {}
    for I, a in u._coeffs.items():
        for J, b in v._coeffs.items():
            sign, K = _blade_mul_cached(I, J, u.n)
            out[K] = out.get(K, 0.0) + sign * a * b
    return Multivector(u.n, out)


@lru_cache(maxsize=None)
def _blade_mul_cached(I: Blade, J: Blade, n: int) -> tuple[int, Blade]:
    return blade_mul(I, J, n)


def conj_sign(blade: Sequence[int]) -> int:
    # (-1)^l from the definition, (-1)^{l(l-1)/2} from reversing l generators
    l = len(blade)
    return (-1) ** l * (-1) ** (l * (l - 1) // 2)


def mv_conj(u: Multivector) -> Multivector:
    """Clifford conjugation: ``conj(e_I) = (-1)^l e_{i_l} ... e_{i_1}``."""
    return Multivector(u.n, {b: conj_sign(b) * c for b, c in u._coeffs.items()})


def mv_scalar_part(u: Multivector) -> float:
    return u[()]


def mv_norm(u: Multivector) -> float:
    return math.sqrt(sum(c * c for c in u._coeffs.values()))


def mv_inner(u: Multivector, v: Multivector) -> float:
    u._check(v)
    return sum(c * v[b] for b, c in u._coeffs.items())


def embed(x: Sequence[float]) -> Multivector:
    """``x -> sum_j x_j e_j``."""
    x = [float(c) for c in x]
    return Multivector(len(x), {(j + 1,): c for j, c in enumerate(x)})


def vector_part(u: Multivector) -> np.ndarray:
    return np.array([u[(j,)] for j in range(1, u.n + 1)])


# ---------------------------------------------------------------- dense path


@lru_cache(maxsize=None)
def product_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached ``(sign, target)`` tables for bitmask-indexed blades.

    ``e_{mask i} * e_{mask j} = sign[i, j] * e_{target[i, j]}``.  Built from
    the transposition-counting product so there is a single source of truth.
    """
    size = 1 << n
    sign = np.empty((size, size), dtype=np.int8)
    target = np.empty((size, size), dtype=np.intp)
    bl = blades(n)
    for i, j in itertools.product(range(size), repeat=2):
        s, K = blade_mul(bl[i], bl[j], n)
        sign[i, j] = s
        target[i, j] = blade_to_mask(K)
    sign.setflags(write=False)
    target.setflags(write=False)
    return sign, target


def dense_mul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Clifford product of broadcastable arrays of shape ``(..., 2**n)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    size = 1 << n
    if a.shape[-1] != size or b.shape[-1] != size:
        raise CliffordError(f"last axis must have length {size}")
    sign, _ = product_table(n)
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.zeros(shape)
    for i in range(size):
        ai = a[..., i]
        if not np.any(ai):
            continue
        for j in range(size):
            bj = b[..., j]
            # target blade of e_i e_j is the symmetric difference i ^ j
            out[..., i ^ j] += sign[i, j] * ai * bj
    return out


def dense_conj(a: np.ndarray, n: int) -> np.ndarray:
    signs = np.array([conj_sign(mask_to_blade(m)) for m in range(1 << n)], dtype=float)
    return np.asarray(a, dtype=float) * signs


def dense_embed(x: np.ndarray) -> np.ndarray:
    """Embed vectors ``(..., n)`` into dense multivectors ``(..., 2**n)``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.zeros(x.shape[:-1] + (1 << n,))
    for j in range(n):
        out[..., 1 << j] = x[..., j]
    return out


def dense_vector_part(a: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(a)
    return np.stack([a[..., 1 << j] for j in range(n)], axis=-1)


def dense_norm(a: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def random_multivector(n: int, rng: np.random.Generator) -> Multivector:
    return Multivector.from_dense(rng.standard_normal(1 << n))


def check_axioms(n: int, pairs: int = 10_000, seed: int = 0,
                 sign_fault: tuple[int, int] | None = None) -> dict:
    """Run the algebra invariant suite and return a JSON-ready report.

    ``sign_fault`` flips the sign of one bitmask-indexed blade product before
    checking; it exists so harnesses can confirm that a corrupted table is
    caught.
    """
    sign, _ = product_table(n)
    table = sign.astype(int).copy()
    if sign_fault is not None:
        table[sign_fault] *= -1
    size = 1 << n
    failures: list[dict] = []

    def tprod(i: int, j: int) -> tuple[int, int]:
        return table[i, j], i ^ j

    # associativity and anticommutation at blade level (exact integer arithmetic)
    if n <= 4:
        for i, j, k in itertools.product(range(size), repeat=3):
            s1, a = tprod(i, j)
            s2, left = tprod(a, k)
            s3, b = tprod(j, k)
            s4, right = tprod(i, b)
            if s1 * s2 != s3 * s4 or left != right:
                failures.append({"check": "associativity",
                                 "blades": [mask_to_blade(i), mask_to_blade(j), mask_to_blade(k)]})
                if len(failures) > 20:
                    break
    for j in range(n):
        for k in range(n):
            mj, mk = 1 << j, 1 << k
            s_jk, _ = tprod(mj, mk)
            s_kj, _ = tprod(mk, mj)
            if j == k and s_jk != -1:
                failures.append({"check": "generator_square", "blades": [(j + 1,), (j + 1,)]})
            if j != k and s_jk != -s_kj:
                failures.append({"check": "anticommutation", "blades": [(j + 1,), (k + 1,)]})

    rng = np.random.default_rng(seed)
    a = rng.standard_normal((pairs, size))
    b = rng.standard_normal((pairs, size))
    x = rng.standard_normal((pairs, n))
    xv = dense_embed(x)
    ab = _table_mul(a, b, table)
    xb = _table_mul(xv, b, table)
    na, nb, nab = dense_norm(a), dense_norm(b), dense_norm(ab)
    submult = float(np.max(nab / (na * nb)))
    bound = 2.0 ** (n / 2)
    if submult > bound * (1 + 1e-12):
        failures.append({"check": "submultiplicativity", "max_ratio": submult})
    iso = np.abs(dense_norm(xb) - np.linalg.norm(x, axis=-1) * nb) / (np.linalg.norm(x, axis=-1) * nb)
    iso_max = float(np.max(iso))
    if iso_max > 1e-12:
        failures.append({"check": "vector_isometry", "max_rel_err": iso_max})
    return {
        "n": n,
        "pairs": pairs,
        "seed": seed,
        "max_submult_ratio": submult,
        "submult_bound": bound,
        "max_isometry_rel_err": iso_max,
        "failures": [_jsonable(f) for f in failures],
        "passed": not failures,
    }


def _table_mul(a: np.ndarray, b: np.ndarray, table: np.ndarray) -> np.ndarray:
    size = table.shape[0]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for i in range(size):
        for j in range(size):
            out[..., i ^ j] += table[i, j] * a[..., i] * b[..., j]
    return out


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if k == "blades":
            v = [list(b) for b in v]
        out[k] = v
    return out

