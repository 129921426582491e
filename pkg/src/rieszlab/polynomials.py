"""Exact homogeneous polynomials and the kernels built from them.

Coefficients are :class:`fractions.Fraction` unless a caller deliberately
supplies floats (e.g. the Riesz kernel ``x_j / omega_{n-1}``); floats only
enter at evaluation time otherwise.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from .clifford import blade_mul

Exponent = tuple[int, ...]


class PolynomialError(ValueError):
    pass


def _coerce(c):
    if isinstance(c, (Fraction, float)):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, Number):
        return float(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def monomials(n: int, degree: int) -> list[Exponent]:
    """All exponent tuples of total degree ``degree`` in ``n`` variables (lex order)."""
    if n == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in monomials(n - 1, degree - first):
            out.append((first,) + rest)
    return out


class HomogeneousPoly:
    """Homogeneous polynomial in ``n`` variables of fixed degree."""

    __slots__ = ("n", "degree", "_coeffs")

    def __init__(self, n: int, degree: int, coeffs: Mapping[Sequence[int], object] | None = None):
        if n < 1 or degree < 0:
            raise PolynomialError("need n >= 1 and degree >= 0")
        self.n, self.degree = int(n), int(degree)
        clean: dict[Exponent, object] = {}
        for e, c in (coeffs or {}).items():
            e = tuple(int(k) for k in e)
            if len(e) != n or any(k < 0 for k in e):
                raise PolynomialError(f"bad exponent {e} for n={n}")
            if sum(e) != degree:
                raise PolynomialError(f"monomial {e} has degree {sum(e)}, expected {degree}")
            c = _coerce(c)
            total = clean.get(e, 0) + c
            if total != 0:
                clean[e] = total
            else:
                clean.pop(e, None)
        self._coeffs = clean

    # constructors
    @classmethod
    def zero(cls, n: int, degree: int) -> "HomogeneousPoly":
        return cls(n, degree)

    @classmethod
    def coordinate(cls, n: int, j: int, c=1) -> "HomogeneousPoly":
        """``c * x_j`` with 1-based ``j``."""
        e = [0] * n
        e[j - 1] = 1
        return cls(n, 1, {tuple(e): c})

    @classmethod
    def norm_squared(cls, n: int, power: int = 1) -> "HomogeneousPoly":
        """``|x|^{2 power}`` expanded."""
        out = cls(n, 0, {(0,) * n: 1})
        sq = cls(n, 2, {tuple(2 if k == j else 0 for k in range(n)): 1 for j in range(n)})
        for _ in range(power):
            out = out * sq
        return out

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "HomogeneousPoly":
        return parse_poly(text, n)

    @property
    def coeffs(self) -> dict[Exponent, object]:
        return dict(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self._coeffs.values())

    def _check(self, other: "HomogeneousPoly") -> None:
        if not isinstance(other, HomogeneousPoly):
            raise TypeError("expected HomogeneousPoly")
        if other.n != self.n:
            raise PolynomialError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "HomogeneousPoly") -> "HomogeneousPoly":
        self._check(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if other.degree != self.degree:
            raise PolynomialError("cannot add polynomials of different degree")
        out = dict(self._coeffs)
        for e, c in other._coeffs.items():
            out[e] = out.get(e, 0) + c
        return HomogeneousPoly(self.n, self.degree, out)

    def __neg__(self) -> "HomogeneousPoly":
        return self.scale(-1)

    def __sub__(self, other: "HomogeneousPoly") -> "HomogeneousPoly":
        return self + (-other)

    def scale(self, c) -> "HomogeneousPoly":
        c = _coerce(c)
        return HomogeneousPoly(self.n, self.degree, {e: v * c for e, v in self._coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, HomogeneousPoly):
            return poly_mul(self, other)
        return self.scale(other)

    __rmul__ = scale

    def __eq__(self, other) -> bool:
        if not isinstance(other, HomogeneousPoly) or other.n != self.n:
            return False
        if self.is_zero() and other.is_zero():
            return True
        return self.degree == other.degree and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self.n, self.degree, frozenset(self._coeffs.items())))

    def __call__(self, x) -> np.ndarray:
        return poly_eval(self, x)

    def __repr__(self) -> str:
        return f"HomogeneousPoly(n={self.n}, {format_poly(self)})"

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._coeffs:
            return np.zeros((0, self.n), dtype=int), np.zeros(0)
        exps = np.array(list(self._coeffs), dtype=int)
        vals = np.array([float(c) for c in self._coeffs.values()])
        return exps, vals


def poly_mul(P: HomogeneousPoly, Q: HomogeneousPoly) -> HomogeneousPoly:
    P._check(Q)
    out: dict[Exponent, object] = {}
    for e1, c1 in P._coeffs.items():
        for e2, c2 in Q._coeffs.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
    return HomogeneousPoly(P.n, P.degree + Q.degree, out)


def poly_partial(P: HomogeneousPoly, r: int) -> HomogeneousPoly:
    """``d/dx_r`` with 1-based ``r``."""
    if not 1 <= r <= P.n:
        raise PolynomialError(f"variable index {r} outside 1..{P.n}")
    if P.degree == 0:
        return HomogeneousPoly(P.n, 0)
    k = r - 1
    out: dict[Exponent, object] = {}
    for e, c in P._coeffs.items():
        if e[k] == 0:
            continue
        e2 = list(e)
        e2[k] -= 1
        out[tuple(e2)] = c * e[k]
    return HomogeneousPoly(P.n, P.degree - 1, out)


def poly_laplacian(P: HomogeneousPoly) -> HomogeneousPoly:
    if P.degree < 2:
        return HomogeneousPoly(P.n, 0)
    out = HomogeneousPoly(P.n, P.degree - 2)
    for r in range(1, P.n + 1):
        out = out + poly_partial(poly_partial(P, r), r)
    return out


def is_harmonic(P: HomogeneousPoly) -> bool:
    return poly_laplacian(P).is_zero()


def poly_eval(P: HomogeneousPoly, x) -> np.ndarray:
    """Evaluate at points ``x`` of shape ``(..., n)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != P.n:
        raise PolynomialError(f"points must have last axis {P.n}")
    exps, vals = P.as_arrays()
    out = np.zeros(x.shape[:-1])
    if not len(vals):
        return out
    # powers table avoids repeated ** on large arrays
    maxdeg = P.degree
    pw = np.ones(x.shape + (maxdeg + 1,))
    for d in range(1, maxdeg + 1):
        pw[..., d] = pw[..., d - 1] * x
    for e, c in zip(exps, vals):
        term = np.full(x.shape[:-1], c)
        for k, ek in enumerate(e):
            if ek:
                term = term * pw[..., k, ek]
        out = out + term
    return out


def poly_gradient_eval(P: HomogeneousPoly, x) -> np.ndarray:
    return np.stack([poly_eval(poly_partial(P, r), x) for r in range(1, P.n + 1)], axis=-1)


_TERM = re.compile(r"\s*([+-])?\s*([^+-]+)")


def parse_poly(text: str, n: int | None = None) -> HomogeneousPoly:
    """Parse ``"x1^2*x2 - 3*x3^3"``-style literals (rational coefficients allowed)."""
    text = text.strip()
    if not text:
        raise PolynomialError("empty polynomial literal")
    terms: list[tuple[Fraction, dict[int, int]]] = []
    pos = 0
    maxvar = 0
    for m in _TERM.finditer(text):
        if m.start() != pos and text[pos:m.start()].strip():
            raise PolynomialError(f"cannot parse {text!r}")
        pos = m.end()
        sign = -1 if m.group(1) == "-" else 1
        coef = Fraction(sign)
        powers: dict[int, int] = {}
        for factor in m.group(2).split("*"):
            factor = factor.strip()
            if not factor:
                raise PolynomialError(f"dangling '*' in {text!r}")
            vm = re.fullmatch(r"x(\d+)(?:\^(\d+))?", factor)
            if vm:
                j = int(vm.group(1))
                if j < 1:
                    raise PolynomialError("variables are x1, x2, ...")
                powers[j] = powers.get(j, 0) + int(vm.group(2) or 1)
                maxvar = max(maxvar, j)
            else:
                try:
                    coef *= Fraction(factor)
                except ValueError:
                    raise PolynomialError(f"bad factor {factor!r} in {text!r}") from None
        terms.append((coef, powers))
    if pos != len(text):
        raise PolynomialError(f"cannot parse {text!r}")
    n = n or maxvar
    if maxvar > n:
        raise PolynomialError(f"literal uses x{maxvar} but n={n}")
    degrees = {sum(p.values()) for _, p in terms}
    if len(degrees) != 1:
        raise PolynomialError(f"literal {text!r} is not homogeneous")
    degree = degrees.pop()
    coeffs: dict[Exponent, Fraction] = {}
    for c, p in terms:
        e = tuple(p.get(j, 0) for j in range(1, n + 1))
        coeffs[e] = coeffs.get(e, 0) + c
    return HomogeneousPoly(n, degree, coeffs)


def format_poly(P: HomogeneousPoly) -> str:
    if P.is_zero():
        return "0"
    parts = []
    for e in sorted(P.coeffs, reverse=True):
        c = P.coeffs[e]
        mon = "*".join(f"x{k + 1}" + (f"^{p}" if p > 1 else "") for k, p in enumerate(e) if p)
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        if mon:
            body = mon if mag == 1 else f"{mag}*{mon}"
        else:
            body = f"{mag}"
        parts.append((sign, body))
    first_sign, first = parts[0]
    s = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        s += f" {sign} {body}"
    return s


# --------------------------------------------------------- linear algebra


def _solve_exact(A: list[list], b: list) -> list:
    """Gaussian elimination; exact for Fraction entries."""
    m = len(A)
    M = [list(row) + [rhs] for row, rhs in zip(A, b)]
    exact = all(isinstance(v, Fraction) for row in M for v in row)
    for col in range(m):
        if exact:
            piv = next((r for r in range(col, m) if M[r][col] != 0), None)
        else:
            piv = max(range(col, m), key=lambda r: abs(M[r][col]))
            if abs(M[piv][col]) < 1e-300:
                piv = None
        if piv is None:
            raise PolynomialError("singular system in harmonic decomposition")
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        for r in range(m):
            if r != col and M[r][col] != 0:
                f = M[r][col] / p
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][m] / M[r][r] for r in range(m)]


def harmonic_decompose(P: HomogeneousPoly) -> list[tuple[int, HomogeneousPoly]]:
    """Write ``P = sum_j |x|^{2(j-1)} P_j`` with each ``P_j`` harmonic.

    At each stage the linear system ``Delta(|x|^2 Q) = Delta(P_rest)`` is
    solved for ``Q`` and ``P_j = P_rest - |x|^2 Q``; ``Q`` becomes the next
    remainder.  Returns ``[(j, P_j), ...]`` for ``j = 1, 2, ...`` including
    any zero components down to degree 0 or 1.
    """
    n = P.n
    out: list[tuple[int, HomogeneousPoly]] = []
    rest = P
    j = 1
    r2 = HomogeneousPoly.norm_squared(n)
    while True:
        deg = rest.degree
        if deg < 2:
            out.append((j, rest if not rest.is_zero() else HomogeneousPoly(n, deg)))
            return out
        lap = poly_laplacian(rest)
        if lap.is_zero():
            out.append((j, rest))
            # remaining components vanish
            d = deg - 2
            while d >= 0:
                j += 1
                out.append((j, HomogeneousPoly(n, d)))
                d -= 2
            return out
        basis = monomials(n, deg - 2)
        images = [poly_laplacian(r2 * HomogeneousPoly(n, deg - 2, {e: 1})) for e in basis]
        rows = monomials(n, deg - 2)
        A = [[img.coeffs.get(row, Fraction(0)) for img in images] for row in rows]
        b = [lap.coeffs.get(row, Fraction(0)) for row in rows]
        q = _solve_exact(A, b)
        Q = HomogeneousPoly(n, deg - 2, dict(zip(basis, q)))
        Pj = rest - r2 * Q
        out.append((j, Pj if not Pj.is_zero() else HomogeneousPoly(n, deg)))
        rest = Q if not Q.is_zero() else HomogeneousPoly(n, deg - 2)
        j += 1


def reconstruct(parts: Iterable[tuple[int, HomogeneousPoly]], n: int, degree: int) -> HomogeneousPoly:
    total = HomogeneousPoly(n, degree)
    for j, Pj in parts:
        if Pj.is_zero():
            continue
        total = total + HomogeneousPoly.norm_squared(n, j - 1) * Pj
    return total


# ------------------------------------------------------ rational functions


@dataclass(frozen=True)
class RationalHomogeneous:
    """``scalar * numerator(x) / |x|^radial_power``."""

    numerator: HomogeneousPoly
    radial_power: int
    scalar: complex = 1.0

    @property
    def n(self) -> int:
        return self.numerator.n

    @property
    def degree(self) -> int:
        return self.numerator.degree - self.radial_power

    def partial(self, j: int) -> "RationalHomogeneous":
        """``d/dx_j``: numerator becomes ``|x|^2 dQ - p x_j Q``, power ``p + 2``."""
        Q, p = self.numerator, self.radial_power
        r2 = HomogeneousPoly.norm_squared(Q.n)
        num = r2 * poly_partial(Q, j) if Q.degree > 0 else HomogeneousPoly(Q.n, Q.degree + 1)
        if p:
            num = num - HomogeneousPoly.coordinate(Q.n, j, p) * Q
        return RationalHomogeneous(num, p + 2, self.scalar)

    def scaled(self, c) -> "RationalHomogeneous":
        return RationalHomogeneous(self.numerator, self.radial_power, self.scalar * c)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return self.scalar * poly_eval(self.numerator, x) / r**self.radial_power

    def __call__(self, x):
        return self.evaluate(x)

    def is_real(self, tol: float = 1e-10) -> bool:
        return abs(complex(self.scalar).imag) <= tol * max(1.0, abs(self.scalar))


def eval_sum(terms: Sequence[RationalHomogeneous], x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1], dtype=complex)
    for t in terms:
        out = out + t.evaluate(x)
    return out


# --------------------------------------------------------------- gamma etc.


def sphere_area(n: int) -> float:
    """``omega_{n-1}``, the area of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def gamma_coefficient(n: int, m: int, lam: float) -> complex:
    """Fourier coefficient of ``Q_m(x)/|x|^{n+m-lam}`` for harmonic ``Q_m``.

    The sign ``(-1)^{3m/2}`` is taken on the branch ``exp(3 i pi m / 2)``.
    """
    if m < 0:
        raise PolynomialError("m must be nonnegative")
    if not lam < n:
        raise PolynomialError(f"lambda={lam} outside the validity window lambda < n={n}")
    num_arg = m / 2 + lam / 2
    den_arg = m / 2 + n / 2 - lam / 2
    for arg in (num_arg, den_arg):
        if arg <= 0 and float(arg).is_integer():
            raise PolynomialError(f"Gamma pole at argument {arg}")
    if float(m).is_integer():
        # exp(3 i pi m / 2) = i^{3m}, taken exactly
        phase = (1, 1j, -1, -1j)[(3 * int(m)) % 4]
    else:
        phase = cmath.exp(1j * 1.5 * math.pi * m)
    val = math.pi ** (n / 2) * 2**lam * gamma_fn(num_arg) / gamma_fn(den_arg)
    return phase * val


def _phase_clean(z: complex) -> complex:
    # exp(3 i pi m / 2) is exactly one of 1, -1, i, -i; drop the float fuzz
    re_, im_ = z.real, z.imag
    if abs(re_) < 1e-15 * abs(z):
        re_ = 0.0
    if abs(im_) < 1e-15 * abs(z):
        im_ = 0.0
    return complex(re_, im_)


def kernel_symbol(P: HomogeneousPoly, xi) -> complex | np.ndarray:
    """Fourier symbol of ``P(x)/|x|^{n-1+l}`` at unit vectors ``xi``.

    Non-harmonic ``P`` is first split with :func:`harmonic_decompose`; each
    piece ``P_j`` of degree ``m`` contributes ``gamma(n, m, 1) P_j(xi)``.
    """
    xi = np.asarray(xi, dtype=float)
    norms = np.linalg.norm(xi, axis=-1)
    if np.max(np.abs(norms - 1)) > 1e-10:
        raise PolynomialError("symbol evaluated off the unit sphere")
    if is_harmonic(P):
        parts = [(1, P)]
    else:
        parts = harmonic_decompose(P)
    out = np.zeros(xi.shape[:-1], dtype=complex)
    for j, Pj in parts:
        if Pj.is_zero():
            continue
        m = P.degree - 2 * (j - 1)
        out = out + _phase_clean(gamma_coefficient(P.n, m, 1)) * poly_eval(Pj, xi)
    return out[()] if out.ndim == 0 else out


# ----------------------------------------------------------- Semmes family


@dataclass(frozen=True)
class SemmesFamily:
    """``P_rs`` (degree l-2) and vector-valued ``k_rs`` with components ``krs[r][s][j]``.

    Each component is a list of :class:`RationalHomogeneous` terms, all
    homogeneous of degree ``-(n-1)``.
    """

    P: HomogeneousPoly
    Prs: list[list[HomogeneousPoly]]
    krs: list[list[list[list[RationalHomogeneous]]]]
    path: str
    max_imag: float = 0.0

    @property
    def n(self) -> int:
        return self.P.n

    @property
    def l(self) -> int:
        return self.P.degree

    def k_eval(self, r: int, s: int, x) -> np.ndarray:
        """Vector ``k_rs(x)`` of shape ``(..., n)`` (1-based r, s)."""
        comps = self.krs[r - 1][s - 1]
        return np.stack([eval_sum(c, x).real for c in comps], axis=-1)

    def pro1_residual(self, x) -> np.ndarray:
        """``sum_rs [k_rs(x)]_s - P(x)/|x|^{n-1+l}``."""
        x = np.asarray(x, dtype=float)
        n, l = self.n, self.l
        total = np.zeros(x.shape[:-1])
        for r in range(n):
            for s in range(n):
                total = total + eval_sum(self.krs[r][s][s], x).real
        target = poly_eval(self.P, x) / np.linalg.norm(x, axis=-1) ** (n - 1 + l)
        return total - target

    def right_dirac(self, r: int, s: int) -> dict[tuple[int, ...], list[RationalHomogeneous]]:
        """Symbolic ``D_R k_rs = sum_{j,m} d_m (k_rs)_j e_j e_m`` grouped by blade."""
        n = self.n
        out: dict[tuple[int, ...], list[RationalHomogeneous]] = {}
        for j in range(1, n + 1):
            for m in range(1, n + 1):
                sign, blade = blade_mul((j,), (m,), n)
                for term in self.krs[r - 1][s - 1][j - 1]:
                    out.setdefault(blade, []).append(term.partial(m).scaled(sign))
        return out

    def pro2_residual(self, r: int, s: int, x) -> np.ndarray:
        """Max over blades of ``|D_R k_rs - c d_r(P_rs/|x|^{n+l-3})|`` at ``x``."""
        n, l = self.n, self.l
        x = np.asarray(x, dtype=float)
        rhs = RationalHomogeneous(self.Prs[r - 1][s - 1], n + l - 3).partial(r)
        c = Fraction(l - 1, n + l - 3)
        dr = self.right_dirac(r, s)
        worst = np.zeros(x.shape[:-1])
        for blade, terms in dr.items():
            val = eval_sum(terms, x).real
            if blade == ():
                val = val - float(c) * rhs.evaluate(x).real
            worst = np.maximum(worst, np.abs(val))
        return worst


def semmes_decompose(P: HomogeneousPoly) -> SemmesFamily:
    """Semmes family of an odd harmonic homogeneous polynomial of degree >= 3."""
    n, l = P.n, P.degree
    if l < 3:
        raise PolynomialError("degree must be at least 3")
    if l % 2 == 0:
        raise PolynomialError("degree must be odd")
    if not is_harmonic(P):
        raise PolynomialError("polynomial must be harmonic")
    if n < 2:
        raise PolynomialError("need n >= 2")
    norm = Fraction(1, l * (l - 1))
    Prs = [[poly_partial(poly_partial(P, r), s).scale(norm) for s in range(1, n + 1)]
           for r in range(1, n + 1)]
    if n >= 3:
        c = Fraction(1, (n + l - 3) * (n + l - 5))
        krs = []
        for r in range(1, n + 1):
            row = []
            for s in range(1, n + 1):
                base = RationalHomogeneous(Prs[r - 1][s - 1], n + l - 5).partial(r)
                comps = [[base.partial(j).scaled(c)] for j in range(1, n + 1)]
                row.append(comps)
            krs.append(row)
        return SemmesFamily(P, Prs, _realify(krs), path="direct")
    # n == 2: invert the Fourier identity termwise on harmonic pieces of xi_r xi_j P_rs
    pref = _phase_clean(cmath.exp(1j * 1.5 * math.pi * l)) * 2 * math.pi
    krs = []
    max_imag = 0.0
    for r in range(1, 3):
        row = []
        for s in range(1, 3):
            comps = []
            for j in range(1, 3):
                Q = (HomogeneousPoly.coordinate(2, r) * HomogeneousPoly.coordinate(2, j)
                     * Prs[r - 1][s - 1])
                terms = []
                for h, Qh in harmonic_decompose(Q):
                    if Qh.is_zero():
                        continue
                    m = l - 2 * (h - 1)
                    coef = pref / _phase_clean(gamma_coefficient(2, m, 1))
                    max_imag = max(max_imag, abs(coef.imag))
                    terms.append(RationalHomogeneous(Qh, m + 1, coef))
                comps.append(terms)
            row.append(comps)
        krs.append(row)
    if max_imag > 1e-10:
        raise PolynomialError(f"two-dimensional family not real: imaginary part {max_imag:.3g}")
    return SemmesFamily(P, Prs, _realify(krs), path="fourier", max_imag=max_imag)


def _realify(krs):
    out = []
    for row in krs:
        new_row = []
        for comps in row:
            new_row.append([[RationalHomogeneous(t.numerator, t.radial_power,
                                                 float(complex(t.scalar).real))
                             for t in terms] for terms in comps])
        out.append(new_row)
    return out


def random_odd_harmonic(n: int, degree: int, rng: np.random.Generator,
                        max_coeff: int = 5) -> HomogeneousPoly:
    """Random odd harmonic polynomial: harmonic part of a random integer polynomial."""
    if degree % 2 == 0:
        raise PolynomialError("degree must be odd")
    while True:
        coeffs = {e: int(rng.integers(-max_coeff, max_coeff + 1)) for e in monomials(n, degree)}
        P = HomogeneousPoly(n, degree, coeffs)
        if P.is_zero():
            continue
        H = harmonic_decompose(P)[0][1]
        if not H.is_zero():
            return H


def harmonic_from_trig(l: int, a: float, b: float) -> HomogeneousPoly:
    """Harmonic polynomial of degree ``l`` in R^2 restricting to ``a cos(l t) + b sin(l t)``."""
    coeffs: dict[Exponent, float] = {}
    # (x1 + i x2)^l = sum_k C(l,k) x1^{l-k} (i x2)^k
    for k in range(l + 1):
        ik = 1j**k
        c = math.comb(l, k) * (a * ik.real + b * ik.imag)
        if c != 0:
            coeffs[(l - k, k)] = coeffs.get((l - k, k), 0.0) + float(c)
    return HomogeneousPoly(2, l, coeffs)


def fit_harmonic(values_fn, n: int, l: int, rng: np.random.Generator | None = None,
                 samples: int | None = None) -> HomogeneousPoly:
    """Harmonic polynomial of degree ``l`` agreeing on the sphere with ``values_fn``.

    ``values_fn`` must be a spherical harmonic of degree ``l``.  A least-squares
    fit over all degree-``l`` monomials is followed by harmonic projection.
    """
    rng = rng or np.random.default_rng(0)
    basis = monomials(n, l)
    samples = samples or 4 * len(basis) + 20
    pts = rng.standard_normal((samples, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    A = np.stack([poly_eval(HomogeneousPoly(n, l, {e: 1}), pts) for e in basis], axis=1)
    coef, *_ = np.linalg.lstsq(A, values_fn(pts), rcond=None)
    Q = HomogeneousPoly(n, l, {e: float(c) for e, c in zip(basis, coef) if abs(c) > 1e-14})
    return harmonic_decompose(Q)[0][1]


def sphere_lp_norm(P_or_fn, n: int, p: float = 2.0, order: int = 64) -> float:
    """``L^p(S^{n-1})`` norm by tensor quadrature (n = 2 or 3)."""
    pts, w = sphere_quadrature(n, order)
    f = P_or_fn(pts) if callable(P_or_fn) else poly_eval(P_or_fn, pts)
    return float(np.sum(w * np.abs(f) ** p) ** (1 / p))


def sphere_quadrature(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights on S^{n-1} exact for polynomials of degree < ``order`` (n=2,3)."""
    if n == 2:
        M = 2 * order
        t = 2 * np.pi * np.arange(M) / M
        return np.stack([np.cos(t), np.sin(t)], 1), np.full(M, 2 * np.pi / M)
    if n == 3:
        x, wx = np.polynomial.legendre.leggauss(order)
        M = 2 * order
        t = 2 * np.pi * np.arange(M) / M
        ct, tt = np.meshgrid(x, t, indexing="ij")
        st = np.sqrt(1 - ct**2)
        pts = np.stack([st * np.cos(tt), st * np.sin(tt), ct], -1).reshape(-1, 3)
        w = (wx[:, None] * np.full(M, 2 * np.pi / M)[None, :]).ravel()
        return pts, w
    raise PolynomialError("sphere quadrature implemented for n = 2, 3")


def all_multi_indices(n: int, order: int) -> list[Exponent]:
    return [e for d in range(order + 1) for e in monomials(n, d)]


def poly_derivative(P: HomogeneousPoly, multi: Sequence[int]) -> HomogeneousPoly:
    out = P
    for k, times in enumerate(multi):
        for _ in range(times):
            out = poly_partial(out, k + 1)
    return out


__all__ = [name for name in dir() if not name.startswith("_") and name not in {
    "annotations", "cmath", "itertools", "math", "re", "dataclass", "Fraction", "Number",
    "Iterable", "Mapping", "Sequence", "np", "gamma_fn"}]
