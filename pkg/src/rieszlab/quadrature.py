"""Quadrature engines behind the singular operators.

Three routes are provided:

* plain sums for targets off the boundary,
* node-excluded sums with an analytic self-term for principal values on
  meshes (curves and spheres),
* an independent truncation mode: integrals over ``{|x - y| > eps}``
  computed on the interpolated geometry, followed by polynomial
  extrapolation in ``eps``.

Clifford-valued data use dense bitmask arrays of shape ``(..., 2**n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .clifford import dense_embed, dense_mul
from .geometry import BoundaryMesh, GeometryError, curve_derivative, spectral_derivative
from .spherical import real_sph_harm

CHUNK = 1 << 21  # pair evaluations per block


class QuadratureError(RuntimeError):
    pass


def _as2d(f: np.ndarray) -> tuple[np.ndarray, bool]:
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        return f[:, None], True
    return f, False


def _rows(M: int, N: int) -> int:
    return max(1, CHUNK // max(N, 1))


# ------------------------------------------------------------ plain sums


def kernel_sum(kernel, targets, sources, density, exclude=None) -> np.ndarray:
    """``sum_k k(x_i - y_k) density_k`` with optional excluded source per target.

    ``density`` already includes the quadrature weights; shape ``(N,)`` or
    ``(N, C)``.  ``exclude[i]`` is a source index dropped for target ``i``
    (``-1`` for none).  Accumulation order is fixed (row blocks, then BLAS
    dot products), so results are reproducible run to run.
    """
    X = np.atleast_2d(np.asarray(targets, dtype=float))
    Y = np.asarray(sources, dtype=float)
    D, squeeze = _as2d(density)
    M, N = X.shape[0], Y.shape[0]
    out = np.empty((M, D.shape[1]))
    step = _rows(M, N)
    for a in range(0, M, step):
        b = min(M, a + step)
        V = X[a:b, None, :] - Y[None, :, :]
        if exclude is not None:
            ex = np.asarray(exclude[a:b])
            rows = np.nonzero(ex >= 0)[0]
            V[rows, ex[rows]] = 1.0  # placeholder, zeroed below
        K = kernel(V)
        if exclude is not None:
            K[rows, ex[rows]] = 0.0
        out[a:b] = K @ D
    return out[:, 0] if squeeze else out


def cauchy_kernel_vec(V: np.ndarray, n: int, omega: float) -> np.ndarray:
    """Vector ``v / (omega |v|^n)`` for differences ``V`` of shape ``(..., n)``."""
    r = np.linalg.norm(V, axis=-1)
    return V / (omega * r[..., None] ** n)


def clifford_left_vec(n: int, A: np.ndarray) -> list[np.ndarray]:
    """``[e_j * A for j = 1..n]`` for dense multivectors ``A`` of shape ``(N, 2**n)``."""
    out = []
    for j in range(n):
        e = np.zeros(1 << n)
        e[1 << j] = 1.0
        out.append(dense_mul(e, A, n))
    return out


def cauchy_sum(targets, mesh: BoundaryMesh, density, omega: float, exclude=None) -> np.ndarray:
    """``sum_k K(x_i - y_k) * density_k`` with ``K`` the vector Cauchy kernel.

    ``density`` is Clifford-valued ``(N, 2**n)`` and already includes
    ``nu_k`` and the weights.
    """
    n = mesh.n
    X = np.atleast_2d(np.asarray(targets, dtype=float))
    Y = mesh.nodes
    B = clifford_left_vec(n, np.asarray(density, dtype=float))
    M, N = X.shape[0], Y.shape[0]
    out = np.zeros((M, 1 << n))
    step = _rows(M, N)
    for a in range(0, M, step):
        b = min(M, a + step)
        V = X[a:b, None, :] - Y[None, :, :]
        if exclude is not None:
            ex = np.asarray(exclude[a:b])
            rows = np.nonzero(ex >= 0)[0]
            V[rows, ex[rows]] = 1.0
        Kv = cauchy_kernel_vec(V, n, omega)
        if exclude is not None:
            Kv[rows, ex[rows]] = 0.0
        for j in range(n):
            out[a:b] += Kv[..., j] @ B[j]
    return out


# --------------------------------------------------- curve self-term rules


def curve_self_term(mesh: BoundaryMesh, kernel, f: np.ndarray) -> np.ndarray:
    """Missing node contribution ``h g(0)`` for the punctured trapezoid rule.

    With ``F = f |z'|`` the regular part of ``k(z(t_i) - z(t)) F(t)`` at
    ``t = t_i`` is ``-k(z') F' - (1/2) (grad k(z') . z'') F``; the odd
    ``1/s`` part cancels between symmetric nodes.
    """
    F2, squeeze = _as2d(f)
    J = np.linalg.norm(mesh.tangent, axis=1)
    F = F2 * J[:, None]
    dF = curve_derivative(mesh, F)
    k0 = kernel(mesh.tangent)
    gk = kernel.gradient(mesh.tangent)
    curv = np.sum(gk * mesh.accel, axis=1)
    g = -k0[:, None] * dF - 0.5 * curv[:, None] * F
    out = mesh.param_step * g
    return out[:, 0] if squeeze else out


def curve_pv(mesh: BoundaryMesh, kernel, f, corrected: bool = True) -> np.ndarray:
    """Principal value at every node of a parametrized curve."""
    F2, squeeze = _as2d(f)
    idx = np.arange(mesh.N)
    out = kernel_sum(kernel, mesh.nodes, mesh.nodes, F2 * mesh.weights[:, None], exclude=idx)
    if corrected:
        out = out + curve_self_term(mesh, kernel, F2)
    return out[:, 0] if squeeze else out


def curve_cauchy_pv(mesh: BoundaryMesh, f: np.ndarray, omega: float,
                    corrected: bool = True) -> np.ndarray:
    """Subtracted-kernel Cauchy principal value (without the ``+-1/2 f`` term)."""
    n = mesh.n
    f = np.asarray(f, dtype=float)
    nu = dense_embed(mesh.normals)
    idx = np.arange(mesh.N)
    dens = dense_mul(nu, f, n) * mesh.weights[:, None]
    # sum_k K_ik nu_k (f_k - f_i) w_k = sum_k K_ik nu_k f_k w_k - (sum_k K_ik nu_k w_k) f_i
    A = cauchy_sum(mesh.nodes, mesh, dens, omega, exclude=idx)
    Bv = cauchy_sum(mesh.nodes, mesh, nu * mesh.weights[:, None], omega, exclude=idx)
    out = A - dense_mul(Bv, f, n)
    if corrected:
        df = curve_derivative(mesh, f)
        J2 = np.sum(mesh.tangent**2, axis=1)
        kz = dense_embed(mesh.tangent / (omega * J2[:, None]))
        out = out - mesh.weights[:, None] * dense_mul(kz, dense_mul(nu, df, n), n)
    return out


# ------------------------------------------------------------ sphere rules


def sphere_shape(mesh: BoundaryMesh) -> tuple[int, int]:
    if not mesh.is_sphere:
        raise GeometryError("sphere rules need a lat/long sphere mesh")
    return tuple(mesh.param["shape"])


def sphere_tangential_gradient(mesh: BoundaryMesh, f: np.ndarray) -> np.ndarray:
    """Spectral surface gradient of node data; returns ``(N, 3)`` or ``(N, 3, C)``."""
    F2, squeeze = _as2d(f)
    n_phi, n_theta = sphere_shape(mesh)
    if n_theta % 2:
        raise GeometryError("sphere gradient needs an even longitude count")
    r = mesh.param["radius"]
    G = F2.reshape(n_phi, n_theta, -1)
    dtheta = 2 * np.pi / n_theta
    dphi = np.pi / n_phi
    d_theta = spectral_derivative(np.swapaxes(G, 0, 1), dtheta).swapaxes(0, 1)
    # continue each meridian across the poles: f(-phi, theta) = f(phi, theta + pi)
    ext = np.concatenate([G, np.roll(G, -n_theta // 2, axis=1)[::-1]], axis=0)
    d_phi = spectral_derivative(ext, dphi)[:n_phi]
    P = mesh.param["phi"].reshape(n_phi, n_theta)
    T = mesh.param["theta"].reshape(n_phi, n_theta)
    e_phi = np.stack([np.cos(P) * np.cos(T), np.cos(P) * np.sin(T), -np.sin(P)], -1)
    e_th = np.stack([-np.sin(T), np.cos(T), np.zeros_like(T)], -1)
    grad = (d_phi[:, :, None, :] * e_phi[..., None] / r
            + d_theta[:, :, None, :] * e_th[..., None] / (r * np.sin(P))[..., None, None])
    grad = grad.reshape(n_phi * n_theta, 3, -1)
    return grad[..., 0] if squeeze else grad


def _frames(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.where(np.abs(normal[:, :1]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]])
    u = np.cross(normal, a)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(normal, u)
    return u, v


def sphere_polar_points(mesh: BoundaryMesh, idx: np.ndarray, psi: np.ndarray, wpsi: np.ndarray,
                        n_beta: int):
    """Exact sphere points around nodes ``idx`` in geodesic polar coordinates.

    Returns points ``(T, P, B, 3)``, unit outward radial vectors and
    area weights ``(T, P, B)``.
    """
    c = mesh.param["center"]
    r = mesh.param["radius"]
    x = mesh.nodes[idx]
    nh = (x - c) / r
    u, v = _frames(nh)
    beta = 2 * np.pi * np.arange(n_beta) / n_beta
    sp, cp = np.sin(psi), np.cos(psi)
    cb, sb = np.cos(beta), np.sin(beta)
    rad = (sp[None, :, None, None] * (cb[None, None, :, None] * u[:, None, None, :]
                                      + sb[None, None, :, None] * v[:, None, None, :])
           + cp[None, :, None, None] * nh[:, None, None, :])
    pts = c + r * rad
    w = (r * r * sp * wpsi)[:, None] * np.full(n_beta, 2 * np.pi / n_beta)[None, :]
    return pts, rad, np.broadcast_to(w, (len(idx),) + w.shape)


def sphere_local_moments(mesh: BoundaryMesh, integrand, n_psi: int = 32, n_beta: int = 32,
                         block: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """``pv int phi_i(y) dsigma`` and ``int phi_i(y) (y - x_i) dsigma`` on the exact sphere.

    ``integrand(X, Y, NU)`` returns values of shape ``(..., C)`` for targets
    ``X``, sources ``Y`` and source normals ``NU`` (all broadcast to
    ``(..., 3)``).  Gauss-Legendre in the geodesic angle and an even
    trapezoid in the azimuth make the odd leading singularity cancel.
    """
    psi_n, psi_w = np.polynomial.legendre.leggauss(n_psi)
    psi = 0.5 * np.pi * (psi_n + 1)
    wpsi = 0.5 * np.pi * psi_w
    orient = np.sign(np.sum(mesh.normals[0] * (mesh.nodes[0] - mesh.param["center"])))
    M0, M1 = [], []
    for a in range(0, mesh.N, block):
        idx = np.arange(a, min(mesh.N, a + block))
        pts, rad, w = sphere_polar_points(mesh, idx, psi, wpsi, n_beta)
        X = mesh.nodes[idx][:, None, None, :]
        vals = integrand(X, pts, orient * rad)
        M0.append(np.einsum("tpb,tpbc->tc", w, vals))
        M1.append(np.einsum("tpb,tpbd,tpbc->tdc", w, pts - X, vals))
    return np.concatenate(M0), np.concatenate(M1)


def sphere_pv(mesh: BoundaryMesh, kernel, f, moments=None) -> np.ndarray:
    """Scalar-kernel principal value at every sphere node.

    The density is split as ``f_i + grad f_i . (y - x_i) + remainder``; the
    first two pieces use exact local moments, the bounded remainder uses
    the node-excluded grid sum.
    """
    F2, squeeze = _as2d(f)
    if moments is None:
        moments = sphere_local_moments(mesh, lambda X, Y, NU: kernel(X - Y)[..., None])
    M0, M1 = moments[0][:, 0], moments[1][..., 0]
    grad = sphere_tangential_gradient(mesh, F2)  # (N, 3, C)
    idx = np.arange(mesh.N)
    w = mesh.weights
    C = F2.shape[1]
    dens = np.concatenate([F2 * w[:, None], w[:, None], mesh.nodes * w[:, None]], axis=1)
    S = kernel_sum(kernel, mesh.nodes, mesh.nodes, dens, exclude=idx)
    raw, k1, ky = S[:, :C], S[:, C], S[:, C + 1:]
    # sum_k K_ik (y_k - x_i) w_k
    kd = ky - k1[:, None] * mesh.nodes
    out = (raw - k1[:, None] * F2 - np.einsum("id,idc->ic", kd, grad)
           + M0[:, None] * F2 + np.einsum("id,idc->ic", M1, grad))
    return out[:, 0] if squeeze else out


def sphere_cauchy_pv(mesh: BoundaryMesh, f: np.ndarray, omega: float, moments=None) -> np.ndarray:
    """Subtracted Cauchy principal value on a sphere (without the ``+-1/2 f`` term)."""
    n = 3
    f = np.asarray(f, dtype=float)
    nu = dense_embed(mesh.normals)
    w = mesh.weights
    if moments is None:
        moments = sphere_local_moments(mesh, lambda X, Y, NU: dense_mul(
            dense_embed(cauchy_kernel_vec(X - Y, n, omega)), dense_embed(NU), n))
    M0, M1 = moments  # (N, 8), (N, 3, 8): int K nu and int K nu (y - x)_d
    grad = sphere_tangential_gradient(mesh, f)  # (N, 3, 8)
    idx = np.arange(mesh.N)
    A = cauchy_sum(mesh.nodes, mesh, dense_mul(nu, f, n) * w[:, None], omega, exclude=idx)
    Bv = cauchy_sum(mesh.nodes, mesh, nu * w[:, None], omega, exclude=idx)
    out = A - dense_mul(Bv, f, n)
    for d in range(3):
        Bd = cauchy_sum(mesh.nodes, mesh, nu * (w * mesh.nodes[:, d])[:, None], omega, exclude=idx)
        Bd = Bd - Bv * mesh.nodes[:, d][:, None]  # sum K nu (y_d - x_d) w
        out = out - dense_mul(Bd, grad[:, d, :], n) + dense_mul(M1[:, d, :], grad[:, d, :], n)
    return out


# --------------------------------------------------------- truncation mode


class TrigInterpolant:
    """Band-limited periodic interpolant of node data on ``t_k = 2 pi k / N``."""

    def __init__(self, values: np.ndarray, t0: float = 0.0, tol: float = 1e-15):
        V, self._squeeze = _as2d(values)
        N = V.shape[0]
        C = np.fft.fft(V, axis=0) / N
        k = np.fft.fftfreq(N, 1.0 / N)
        if N % 2 == 0:
            # split the Nyquist term so the interpolant stays real
            C = np.concatenate([C, C[N // 2: N // 2 + 1] * 0.5])
            C[N // 2] *= 0.5
            k = np.concatenate([k, [N // 2]])
        keep = np.max(np.abs(C), axis=1) > tol * np.max(np.abs(C))
        self.k, self.c, self.t0 = k[keep], C[keep], t0

    def __call__(self, t, deriv: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        E = np.exp(1j * np.multiply.outer(t - self.t0, self.k))
        out = (E * (1j * self.k) ** deriv) @ self.c
        out = out.real
        return out[..., 0] if self._squeeze else out


def _graded_nodes(a: float, b: float, first: float, order: int = 20):
    """Gauss panels on ``[a, b]`` refined geometrically toward both ends."""
    g, gw = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (a + b)
    edges_left = [a]
    L = first
    while edges_left[-1] + L < mid:
        edges_left.append(edges_left[-1] + L)
        L *= 2
    edges_left.append(mid)
    edges = np.array(edges_left + [b - (e - a) for e in reversed(edges_left[:-1])])
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * g + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * gw)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass
class CurveGeometry:
    z: TrigInterpolant
    orient: float
    h: float

    @classmethod
    def from_mesh(cls, mesh: BoundaryMesh) -> "CurveGeometry":
        if not (mesh.is_curve and mesh.smooth):
            raise QuadratureError("truncation mode needs a smooth parametrized curve")
        z = TrigInterpolant(mesh.nodes)
        dz = z(np.array([0.0]), 1)[0]
        rot = np.array([dz[1], -dz[0]])
        orient = float(np.sign(np.dot(rot, mesh.normals[0])))
        return cls(z, orient, mesh.param_step)


def _cut_params(geo: CurveGeometry, mesh: BoundaryMesh, i: int, eps: float) -> tuple[float, float]:
    x = mesh.nodes[i]
    d = np.linalg.norm(mesh.nodes - x, axis=1)
    N = mesh.N
    ti = geo.h * i

    def dist(s):
        return float(np.linalg.norm(geo.z(np.array([ti + s]))[0] - x)) - eps

    out = []
    for direction in (1, -1):
        m = 1
        while m < N and d[(i + direction * m) % N] < eps:
            m += 1
        if m >= N // 2:
            raise QuadratureError(f"eps={eps} too large at node {i}")
        out.append(brentq(lambda s: dist(direction * s), (m - 1) * geo.h, m * geo.h,
                          xtol=1e-15, rtol=4 * np.finfo(float).eps))
    # any node beyond the cut but still within eps means the cap is not a single arc
    m_plus = int(np.floor(out[0] / geo.h)) + 1
    m_minus = int(np.floor(out[1] / geo.h)) + 1
    rest = [(i + k) % N for k in range(m_plus, N - m_minus + 1)]
    if rest and np.min(d[rest]) < eps * (1 - 1e-9):
        raise QuadratureError(f"eps={eps} ball meets the curve in several arcs at node {i}")
    return out[0], out[1]


def curve_truncated(mesh: BoundaryMesh, i: int, eps: float, integrand, geo: CurveGeometry,
                    f_interp: TrigInterpolant | None, order: int = 20) -> np.ndarray:
    """``int_{|x_i - y| > eps} integrand`` on the interpolated curve.

    ``integrand(x, Y, NUJ, FY)`` receives the target, source points, the
    normal scaled by ``|z'|`` and interpolated density values.
    """
    dp, dm = _cut_params(geo, mesh, i, eps)
    ti = geo.h * i
    J0 = float(np.linalg.norm(geo.z(np.array([ti]), 1)[0]))
    first = max(min(dp, dm), 1e-3 * eps / J0)
    s, w = _graded_nodes(ti + dp, ti + 2 * np.pi - dm, first, order)
    Y = geo.z(s)
    dz = geo.z(s, 1)
    nuJ = geo.orient * np.stack([dz[:, 1], -dz[:, 0]], 1)
    FY = f_interp(s) if f_interp is not None else None
    vals = integrand(mesh.nodes[i], Y, nuJ, FY)
    return np.tensordot(w, vals, axes=(0, 0))


def richardson(eps: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Neville extrapolation to ``eps = 0``; uncertainty is the last increment."""
    eps = np.asarray(eps, dtype=float)
    T = [np.asarray(v, dtype=float) for v in values]
    diag = [T[0]]
    for m in range(1, len(T)):
        for k in range(len(T) - m):
            T[k] = (eps[k + m] * T[k] - eps[k] * T[k + 1]) / (eps[k + m] - eps[k])
            # T[k] now interpolates points k..k+m, evaluated at 0
        diag.append(T[0])
    est = diag[-1]
    unc = np.abs(diag[-1] - diag[-2]) if len(diag) > 1 else np.full_like(est, np.inf)
    return est, unc


def sh_interpolant(mesh: BoundaryMesh, f: np.ndarray, L: int | None = None):
    """Spherical-harmonic least-squares interpolant of sphere node data."""
    F2, squeeze = _as2d(f)
    n_phi, n_theta = sphere_shape(mesh)
    L = L or min(n_phi - 1, n_theta // 2 - 1, 24)
    c = mesh.param["center"]
    u = (mesh.nodes - c) / mesh.param["radius"]
    pol = np.arccos(np.clip(u[:, 2], -1, 1))
    az = np.arctan2(u[:, 1], u[:, 0])
    B = np.concatenate([real_sph_harm(l, pol, az) for l in range(L + 1)], axis=0).T
    coef, *_ = np.linalg.lstsq(B, F2, rcond=None)

    def ev(points):
        p = np.asarray(points, dtype=float)
        q = (p - c) / np.linalg.norm(p - c, axis=-1, keepdims=True)
        pl = np.arccos(np.clip(q[..., 2], -1, 1))
        a = np.arctan2(q[..., 1], q[..., 0])
        Bp = np.concatenate([real_sph_harm(l, pl, a) for l in range(L + 1)], axis=0)
        out = np.tensordot(np.moveaxis(Bp, 0, -1), coef, axes=(-1, 0))
        return out[..., 0] if squeeze else out

    return ev


def sphere_truncated(mesh: BoundaryMesh, i: int, eps: float, integrand, f_eval,
                     n_beta: int = 64, order: int = 20) -> np.ndarray:
    """``int_{|x_i - y| > eps}`` over the exact sphere in polar coordinates about ``x_i``."""
    r = mesh.param["radius"]
    if eps >= 2 * r:
        raise QuadratureError("eps exceeds the sphere diameter")
    psi_e = 2 * np.arcsin(eps / (2 * r))
    g, gw = np.polynomial.legendre.leggauss(order)
    edges = [psi_e]
    L = psi_e
    while edges[-1] + L < np.pi:
        edges.append(edges[-1] + L)
        L *= 2
    edges.append(np.pi)
    psi = np.concatenate([0.5 * (b - a) * g + 0.5 * (a + b) for a, b in zip(edges[:-1], edges[1:])])
    wpsi = np.concatenate([0.5 * (b - a) * gw for a, b in zip(edges[:-1], edges[1:])])
    pts, rad, w = sphere_polar_points(mesh, np.array([i]), psi, wpsi, n_beta)
    orient = np.sign(np.sum(mesh.normals[0] * (mesh.nodes[0] - mesh.param["center"])))
    FY = f_eval(pts[0]) if f_eval is not None else None
    vals = integrand(mesh.nodes[i], pts[0], orient * rad[0], FY)
    return np.tensordot(w[0], vals, axes=([0, 1], [0, 1]))


def default_eps_ladder(mesh: BoundaryMesh, levels: int = 6, c: float | None = None) -> np.ndarray:
    if c is None:
        c = 0.05 * mesh.diameter() if mesh.is_curve else 0.25 * mesh.param["radius"]
    return c * 2.0 ** -np.arange(levels)


def pick_targets(N: int, count: int) -> np.ndarray:
    if count >= N:
        return np.arange(N)
    return np.unique(np.linspace(0, N - 1, count).round().astype(int))
