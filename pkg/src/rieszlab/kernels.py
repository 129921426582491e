"""Odd kernels homogeneous of degree -(n-1), evaluated on difference vectors.

Every kernel maps an array of differences ``v = x - y`` with shape
``(..., n)`` to values of shape ``(...)`` and supplies the gradient used by
the principal-value diagonal correction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polynomials import (HomogeneousPoly, fit_harmonic, harmonic_decompose, harmonic_from_trig,
                          is_harmonic, kernel_symbol, poly_eval, poly_gradient_eval,
                          sphere_area)
from .spherical import SphericalExpansion


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class AmbientConstants:
    n: int

    @property
    def omega(self) -> float:
        """Area of the unit sphere in R^n."""
        return sphere_area(self.n)


def _sq_norm(v: np.ndarray) -> np.ndarray:
    out = v[..., 0] * v[..., 0]
    for k in range(1, v.shape[-1]):
        out += v[..., k] * v[..., k]
    return out


def omega(n: int) -> float:
    return sphere_area(n)


class KernelSpec:
    """Base class; subclasses define ``n``, ``evaluate`` and ``gradient``."""

    n: int
    name: str = "kernel"

    def evaluate(self, v) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, v) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, v):
        return self.evaluate(v)

    def symbol(self, xi) -> complex | np.ndarray:
        raise KernelError(f"{self.name} has no polynomial symbol")

    def check_parity(self, rng: np.random.Generator | None = None, samples: int = 32,
                     tol: float = 1e-10) -> dict:
        """Spot-check ``k(-x) = -k(x)`` and ``k(lam x) = lam^{1-n} k(x)``."""
        rng = rng or np.random.default_rng(0)
        x = rng.standard_normal((samples, self.n))
        lam = rng.uniform(0.3, 3.0, samples)
        kx = self.evaluate(x)
        scale = max(float(np.max(np.abs(kx))), 1e-300)
        odd = float(np.max(np.abs(self.evaluate(-x) + kx))) / scale
        hom = float(np.max(np.abs(self.evaluate(lam[:, None] * x) - lam ** (1 - self.n) * kx))) / scale
        return {"odd_residual": odd, "homogeneity_residual": hom,
                "passed": odd <= tol and hom <= tol}


class RieszKernel(KernelSpec):
    """``v_j / (omega_{n-1} |v|^n)``."""

    def __init__(self, n: int, j: int):
        if n < 2 or not 1 <= j <= n:
            raise KernelError(f"Riesz component j={j} invalid for n={n}")
        self.n, self.j = n, j
        self.name = f"riesz{j}"
        self._omega = omega(n)

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        r2 = _sq_norm(v)
        if self.n == 2:
            return v[..., self.j - 1] / (self._omega * r2)
        return v[..., self.j - 1] / (self._omega * r2 ** (self.n / 2))

    def gradient(self, v):
        v = np.asarray(v, dtype=float)
        r2 = np.sum(v * v, axis=-1)
        r = np.sqrt(r2)
        g = -self.n * v * v[..., self.j - 1, None] / (r2[..., None] * r[..., None] ** self.n)
        g[..., self.j - 1] += 1 / r**self.n
        return g / self._omega

    @property
    def polynomial(self) -> HomogeneousPoly:
        return HomogeneousPoly.coordinate(self.n, self.j, 1.0 / self._omega)

    def symbol(self, xi):
        return kernel_symbol(self.polynomial, xi)


class PolyKernel(KernelSpec):
    """``scale * P(v) / |v|^{n-1+l}`` for an odd homogeneous ``P`` of degree ``l``."""

    def __init__(self, P: HomogeneousPoly, scale: float = 1.0):
        if P.degree % 2 == 0:
            raise KernelError(f"kernel polynomial must have odd degree, got {P.degree}")
        self.P, self.scale = P, float(scale)
        self.n, self.l = P.n, P.degree
        self.name = f"poly(l={self.l})"
        self._exps, self._vals = P.as_arrays()

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        r = np.linalg.norm(v, axis=-1)
        return self.scale * poly_eval(self.P, v) / r ** (self.n - 1 + self.l)

    def gradient(self, v):
        v = np.asarray(v, dtype=float)
        r2 = np.sum(v * v, axis=-1)
        p = self.n - 1 + self.l
        Pv = poly_eval(self.P, v)
        gP = poly_gradient_eval(self.P, v)
        rp = r2 ** (p / 2)
        return self.scale * (gP / rp[..., None] - p * v * (Pv / (rp * r2))[..., None])

    def harmonic_parts(self) -> list["PolyKernel"]:
        """Kernels ``P_j(v)/|v|^{n-1+l-2(j-1)}`` summing to this one."""
        if is_harmonic(self.P):
            return [self]
        return [PolyKernel(Pj, self.scale) for _, Pj in harmonic_decompose(self.P)
                if not Pj.is_zero()]

    def symbol(self, xi):
        return self.scale * kernel_symbol(self.P, xi)


class SeriesKernel(KernelSpec):
    """Truncated spherical-harmonic series ``sum_l P_l(v)/|v|^{n-1+l}``, ``l <= L_max``."""

    def __init__(self, expansion: SphericalExpansion, L_max: int | None = None):
        self.expansion = expansion
        self.n = expansion.n
        self.L_max = expansion.L_max if L_max is None else min(L_max, expansion.L_max)
        self.name = f"series(L={self.L_max})"
        self.modes: list[PolyKernel] = []
        rng = np.random.default_rng(12345)
        for l in range(1, self.L_max + 1, 2):
            if expansion.mode_norm(l) == 0:
                continue
            if self.n == 2:
                a, b = expansion.modes[l]
                P = harmonic_from_trig(l, float(a), float(b))
            else:
                P = fit_harmonic(expansion.mode_function(l), self.n, l, rng)
            self.modes.append(PolyKernel(P))

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1])
        for k in self.modes:
            out = out + k.evaluate(v)
        return out

    def gradient(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape)
        for k in self.modes:
            out = out + k.gradient(v)
        return out

    def symbol(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for k in self.modes:
            out = out + k.symbol(xi)
        return out[()] if out.ndim == 0 else out


class SampledKernel(KernelSpec):
    """``g(v/|v|) / |v|^{n-1}`` for a callable ``g`` on the unit circle (angle argument).

    Used as the direct-quadrature reference for series kernels.
    """

    def __init__(self, g, n: int = 2, name: str = "sampled"):
        if n != 2:
            raise KernelError("sampled kernels are implemented on S^1")
        self.g, self.n, self.name = g, n, name

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        t = np.arctan2(v[..., 1], v[..., 0])
        return self.g(t) / np.linalg.norm(v, axis=-1)

    def gradient(self, v):
        v = np.asarray(v, dtype=float)
        r = np.linalg.norm(v, axis=-1)
        t = np.arctan2(v[..., 1], v[..., 0])
        h = 1e-5
        gt = self.g(t)
        dg = (self.g(t + h) - self.g(t - h)) / (2 * h)
        er = v / r[..., None]
        et = np.stack([-er[..., 1], er[..., 0]], -1)
        return (-gt / r**2)[..., None] * er + (dg / r**2)[..., None] * et


def as_kernel(obj, n: int) -> KernelSpec:
    """Coerce ``int j`` (Riesz), a polynomial or literal, or a kernel to a KernelSpec."""
    if isinstance(obj, KernelSpec):
        return obj
    if isinstance(obj, (int, np.integer)):
        return RieszKernel(n, int(obj))
    if isinstance(obj, str):
        return PolyKernel(HomogeneousPoly.parse(obj, n))
    if isinstance(obj, HomogeneousPoly):
        return PolyKernel(obj)
    if isinstance(obj, SphericalExpansion):
        return SeriesKernel(obj)
    raise KernelError(f"cannot interpret {obj!r} as a kernel")


def jump_symbol(kernel: KernelSpec, nu, tol: float = 1e-10):
    """``(1/2i) k_hat(nu)``; the imaginary residue is asserted below ``tol``."""
    val = np.asarray(kernel.symbol(nu), dtype=complex) / 2j
    scale = max(1.0, float(np.max(np.abs(val))))
    if np.max(np.abs(val.imag)) > tol * scale:
        raise KernelError(f"jump symbol not real: imaginary part {np.max(np.abs(val.imag)):.3g}")
    out = val.real
    return float(out) if out.ndim == 0 else out
