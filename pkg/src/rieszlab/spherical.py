"""Spherical-harmonic expansion of kernel restrictions and the summability diagnostic.

On S^1 modes are Fourier pairs ``(a_l, b_l)`` for ``a cos(l t) + b sin(l t)``.
On S^2 modes are real orthonormal spherical harmonics ``c_{l,m}``,
``m = -l..l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, sph_harm_y


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class SphericalExpansion:
    """Truncated expansion ``k|_S = sum_l Y_l``.

    ``modes[l]`` holds ``[a_l, b_l]`` on S^1 (with ``b_0 = 0``) and the
    ``2l+1`` real coefficients ``c_{l,-l..l}`` on S^2.
    """

    n: int
    modes: tuple[np.ndarray, ...]
    L_max: int
    m_schedule: str = "l2"
    residual_l2: float = 0.0
    sample_l2: float = 0.0

    def mode_norm(self, l: int) -> float:
        """``||Y_l||_{L^2(S^{n-1})}``."""
        c = self.modes[l]
        if self.n == 2:
            a, b = c
            scale = 2 * math.pi if l == 0 else math.pi
            return float(math.sqrt(scale * (a * a + b * b)))
        return float(np.linalg.norm(c))

    def mode_norms(self) -> np.ndarray:
        return np.array([self.mode_norm(l) for l in range(self.L_max + 1)])

    def single(self, l: int) -> "SphericalExpansion":
        modes = tuple(c if k == l else np.zeros_like(c) for k, c in enumerate(self.modes))
        return SphericalExpansion(self.n, modes, self.L_max, self.m_schedule)

    def evaluate(self, points) -> np.ndarray:
        """Synthesize ``sum_l Y_l`` at unit vectors (radial part ignored)."""
        pts = np.asarray(points, dtype=float)
        u = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
        if self.n == 2:
            t = np.arctan2(u[..., 1], u[..., 0])
            out = np.zeros(u.shape[:-1])
            for l, (a, b) in enumerate(self.modes):
                out = out + a * np.cos(l * t) + b * np.sin(l * t)
            return out
        polar = np.arccos(np.clip(u[..., 2], -1, 1))
        azim = np.arctan2(u[..., 1], u[..., 0])
        out = np.zeros(u.shape[:-1])
        for l, c in enumerate(self.modes):
            if np.any(c):
                out = out + np.tensordot(real_sph_harm(l, polar, azim), c, axes=([0], [0]))
        return out

    def mode_function(self, l: int):
        """Callable for ``Y_l`` alone, on unit vectors."""
        return self.single(l).evaluate

    def to_json(self) -> list:
        return [[l, np.asarray(c).tolist()] for l, c in enumerate(self.modes)]


def real_sph_harm(l: int, polar, azim) -> np.ndarray:
    """Stack of the ``2l+1`` real orthonormal spherical harmonics (m = -l..l)."""
    polar = np.asarray(polar, dtype=float)
    azim = np.asarray(azim, dtype=float)
    out = np.empty((2 * l + 1,) + polar.shape)
    out[l] = sph_harm_y(l, 0, polar, azim).real
    for m in range(1, l + 1):
        y = sph_harm_y(l, m, polar, azim)
        sgn = (-1) ** m
        out[l + m] = math.sqrt(2) * sgn * y.real
        out[l - m] = math.sqrt(2) * sgn * y.imag
    return out


def sphere_grid(L_max: int, n_polar: int | None = None, n_azim: int | None = None):
    """Gauss-Legendre x trapezoid grid on S^2 meeting the aliasing guard.

    Returns ``(points, weights, polar, azim)`` with points flattened.
    """
    n_azim = n_azim or 4 * max(L_max, 1)
    n_polar = n_polar or 2 * max(L_max, 1) + 2
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    az = 2 * np.pi * np.arange(n_azim) / n_azim
    pol = np.arccos(x)
    P, A = np.meshgrid(pol, az, indexing="ij")
    pts = np.stack([np.sin(P) * np.cos(A), np.sin(P) * np.sin(A), np.cos(P)], -1).reshape(-1, 3)
    w = (wx[:, None] * np.full(n_azim, 2 * np.pi / n_azim)[None, :]).ravel()
    return pts, w, P.ravel(), A.ravel()


def circle_grid(L_max: int, M: int | None = None) -> np.ndarray:
    M = M or 4 * max(L_max, 1)
    t = 2 * np.pi * np.arange(M) / M
    return np.stack([np.cos(t), np.sin(t)], 1)


def expand_on_sphere(samples, L_max: int, *, n: int, points=None, weights=None,
                     m_schedule: str = "l2", odd_tol: float | None = 1e-8) -> SphericalExpansion:
    """Project sampled kernel values onto modes ``l <= L_max``.

    n=2: ``samples`` are equispaced on ``[0, 2 pi)`` and analyzed by FFT.
    n=3: ``points``/``weights`` give the quadrature carrying ``samples``
    (see :func:`sphere_grid`).
    Even-degree coefficients are asserted small for odd kernels unless
    ``odd_tol`` is None.
    """
    f = np.asarray(samples, dtype=float)
    if L_max < 0:
        raise ExpansionError("L_max must be nonnegative")
    if n == 2:
        M = f.shape[0]
        if M < 4 * max(L_max, 1):
            raise ExpansionError(f"aliasing guard: {M} samples < 4*L_max={4 * L_max}")
        F = np.fft.rfft(f) / M
        modes = []
        for l in range(L_max + 1):
            if l == 0:
                modes.append(np.array([F[0].real, 0.0]))
            else:
                modes.append(np.array([2 * F[l].real, -2 * F[l].imag]))
        weights = np.full(M, 2 * np.pi / M)
        sample_l2 = float(np.sqrt(np.sum(weights * f**2)))
    elif n == 3:
        if points is None or weights is None:
            raise ExpansionError("S^2 expansion needs quadrature points and weights")
        pts = np.asarray(points, dtype=float)
        w = np.asarray(weights, dtype=float)
        u = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        polar = np.arccos(np.clip(u[:, 2], -1, 1))
        azim = np.arctan2(u[:, 1], u[:, 0])
        n_azim = len(np.unique(np.round(azim, 12)))
        if n_azim < 4 * max(L_max, 1):
            raise ExpansionError(f"aliasing guard: {n_azim} azimuthal points < 4*L_max")
        modes = [real_sph_harm(l, polar, azim) @ (w * f) for l in range(L_max + 1)]
        sample_l2 = float(np.sqrt(np.sum(w * f**2)))
    else:
        raise ExpansionError("expansions implemented for n = 2, 3 only")
    exp = SphericalExpansion(n, tuple(np.asarray(m, float) for m in modes), L_max, m_schedule,
                             sample_l2=sample_l2)
    captured = math.sqrt(sum(exp.mode_norm(l) ** 2 for l in range(L_max + 1)))
    exp = SphericalExpansion(n, exp.modes, L_max, m_schedule,
                             residual_l2=math.sqrt(max(sample_l2**2 - captured**2, 0.0)),
                             sample_l2=sample_l2)
    if odd_tol is not None:
        scale = max(sample_l2, 1e-300)
        for l in range(0, L_max + 1, 2):
            if exp.mode_norm(l) > odd_tol * scale:
                raise ExpansionError(f"kernel not odd: even mode l={l} has norm {exp.mode_norm(l):.3g}")
    return exp


def laplace_beltrami(exp: SphericalExpansion) -> SphericalExpansion:
    """Apply the sphere Laplacian mode by mode (eigenvalue ``-l(l+n-2)``)."""
    modes = tuple(-l * (l + exp.n - 2) * c for l, c in enumerate(exp.modes))
    return SphericalExpansion(exp.n, modes, exp.L_max, exp.m_schedule)


def laplace_beltrami_circle(values) -> np.ndarray:
    """Spectral second derivative of equispaced samples on S^1."""
    f = np.asarray(values, dtype=float)
    M = f.shape[0]
    k = np.fft.rfftfreq(M, 1.0 / M)
    return np.fft.irfft(-(k**2) * np.fft.rfft(f), n=M)


def schedule(name_or_fn, l: int) -> int:
    if callable(name_or_fn):
        return int(name_or_fn(l))
    if name_or_fn == "l2":
        return l * l
    if name_or_fn == "zero":
        return 0
    if isinstance(name_or_fn, str) and name_or_fn.startswith("const:"):
        return int(name_or_fn.split(":", 1)[1])
    raise ExpansionError(f"unknown m schedule {name_or_fn!r}")


def log_lap_power_norm(exp: SphericalExpansion, m: int) -> float:
    """``log ||Delta^m k||_2`` from the spectrum (``-inf`` for zero)."""
    logs = []
    for l in range(exp.L_max + 1):
        nl = exp.mode_norm(l)
        if nl == 0:
            continue
        lam = l * (l + exp.n - 2)
        if m > 0 and lam == 0:
            continue
        logs.append(2 * m * math.log(lam) + 2 * math.log(nl) if m > 0 else 2 * math.log(nl))
    if not logs:
        return -math.inf
    return 0.5 * float(logsumexp(logs))


@dataclass
class SummabilityReport:
    ls: list[int]
    log_terms: list[float]
    terms: list[float]
    total: float
    verdict: str
    m_schedule: str
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"l": self.ls, "term": self.terms, "log_term": self.log_terms,
                "total": self.total, "verdict": self.verdict, "m_schedule": self.m_schedule,
                "notes": self.notes}


def summability_report(exp: SphericalExpansion, C: float | None = None, *,
                       m_schedule=None, l_report: int | None = None) -> SummabilityReport:
    """Weighted series ``sum_l w_l l^{-2 m_l} ||Delta^{m_l} k||``.

    The weight is ``4^{l^2}``, or ``C^l 2^{l^2}`` when ``C`` is given.  Terms
    are computed in log space; the ``l = 0`` term is ``||k||``.  Convergent
    means the tail terms decay and the last term is below ``1e-12`` of the
    total.
    """
    sched = m_schedule if m_schedule is not None else exp.m_schedule
    lam_max = max([l * (l + exp.n - 2) for l in range(exp.L_max + 1)
                   if exp.mode_norm(l) > 0] or [0])
    l_report = l_report or max(exp.L_max, int(math.ceil(2 * math.sqrt(lam_max))) + 12)
    ls, logs = [], []
    for l in range(l_report + 1):
        m = schedule(sched, l)
        if C is None:
            lw = l * l * math.log(4)
        else:
            lw = l * math.log(C) + l * l * math.log(2)
        base = log_lap_power_norm(exp, m)
        lt = lw + base - (2 * m * math.log(l) if l > 0 else 0.0)
        ls.append(l)
        logs.append(lt)
    terms = [math.exp(v) if v < 709 else math.inf for v in logs]
    finite = [v for v in logs if v > -math.inf]
    if not finite:
        return SummabilityReport(ls, logs, terms, 0.0, "convergent", str(sched))
    log_total = float(logsumexp(finite))
    total = math.exp(log_total) if log_total < 709 else math.inf
    tail = [v for v in logs[-5:]]
    decaying = all(b <= a for a, b in zip(tail, tail[1:]))
    small = logs[-1] - log_total < math.log(1e-12)
    verdict = "convergent" if (decaying and small and math.isfinite(total)) else "divergent"
    return SummabilityReport(ls, logs, terms, total, verdict, str(sched))


def single_mode_log_terms(l0: int, n: int, norm: float, ls) -> np.ndarray:
    """Logarithms of :func:`single_mode_terms`, free of over- and underflow."""
    lam = l0 * (l0 + n - 2)
    with np.errstate(divide="ignore"):
        lognorm = np.log(norm)
    return np.array([lognorm if l == 0 else
                     l * l * (math.log(4) - 2 * math.log(l) + math.log(lam)) + lognorm
                     for l in ls], dtype=float)


def single_mode_terms(l0: int, n: int, norm: float, ls) -> np.ndarray:
    """Closed-form term sequence ``4^{l^2} l^{-2 l^2} [l0(l0+n-2)]^{l^2} ||k||``."""
    v = single_mode_log_terms(l0, n, norm, ls)
    out = np.where(v < 709, np.exp(np.minimum(v, 709)), np.inf)
    out[np.asarray(ls) == 0] = norm
    return out
