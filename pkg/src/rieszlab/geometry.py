"""Discretized closed boundaries in R^2 and R^3.

Curves are sampled on a uniform parameter grid with periodic trapezoid
weights ``w_i = |z'(t_i)| h``; the grid is symmetric about every node,
which the principal-value quadrature relies on.  Spheres use a
midpoint latitude/longitude grid (poles excluded).  Squares place nodes at
edge midpoints so corners are never nodes.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import pdist


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Quadrature nodes, outward normals and weights on a closed boundary.

    ``tangent`` and ``accel`` hold the first and second parameter
    derivatives ``z'(t_i)``, ``z''(t_i)`` for curves; ``param_step`` is the
    uniform parameter spacing ``h`` (so ``w_i = |z'(t_i)| h``).  ``smooth``
    marks families whose parametrization is smooth and periodic, for which
    spectral differentiation of node data is legitimate.
    """

    n: int
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    label: str
    bounded: bool = True
    param: dict = field(default_factory=dict)
    tangent: np.ndarray | None = None
    accel: np.ndarray | None = None
    param_step: float | None = None
    smooth: bool = True

    def __post_init__(self):
        for name in ("nodes", "normals", "weights"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.n:
            raise GeometryError(f"nodes must have shape (N, {self.n})")
        if self.normals.shape != self.nodes.shape or self.weights.shape != (len(self.nodes),):
            raise GeometryError("normals/weights do not match nodes")
        if np.any(self.weights <= 0):
            raise GeometryError("quadrature weights must be positive")
        if np.max(np.abs(np.linalg.norm(self.normals, axis=1) - 1.0)) > 1e-12:
            raise GeometryError("normals must be unit vectors")

    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.weights))

    @property
    def is_curve(self) -> bool:
        return self.n == 2 and self.tangent is not None

    @property
    def is_sphere(self) -> bool:
        return self.n == 3 and "radius" in self.param

    def spacing(self) -> float:
        """Typical node spacing (median nearest-neighbour distance)."""
        d, _ = cKDTree(self.nodes).query(self.nodes, k=2)
        return float(np.median(d[:, 1]))

    def local_spacing(self) -> np.ndarray:
        d, _ = cKDTree(self.nodes).query(self.nodes, k=2)
        return d[:, 1]

    def diameter(self) -> float:
        pts = self.nodes
        if len(pts) > self.n + 1:
            pts = pts[ConvexHull(pts).vertices]
        return float(pdist(pts).max())

    def flipped(self) -> "BoundaryMesh":
        """Same boundary viewed from the exterior component: normals negated."""
        return dataclasses.replace(self, normals=-self.normals, bounded=not self.bounded)

    def centroid(self) -> np.ndarray:
        return (self.weights[:, None] * self.nodes).sum(0) / self.total_measure


def _curve_mesh(z, dz, ddz, h, label, param, smooth=True) -> BoundaryMesh:
    speed = np.linalg.norm(dz, axis=1)
    normals = np.stack([dz[:, 1], -dz[:, 0]], axis=1) / speed[:, None]
    return BoundaryMesh(
        n=2, nodes=z, normals=normals, weights=speed * h, label=label,
        param=param, tangent=dz, accel=ddz, param_step=h, smooth=smooth,
    )


def make_ellipse(a: float, b: float, N: int) -> BoundaryMesh:
    if a <= 0 or b <= 0:
        raise GeometryError("ellipse axes must be positive")
    if N < 4:
        raise GeometryError("ellipse needs at least 4 nodes")
    t = 2 * np.pi * np.arange(N) / N
    c, s = np.cos(t), np.sin(t)
    z = np.stack([a * c, b * s], axis=1)
    dz = np.stack([-a * s, b * c], axis=1)
    ddz = -z
    label = "circle" if a == b == 1 else f"ellipse({a:g},{b:g})"
    return _curve_mesh(z, dz, ddz, 2 * np.pi / N, label, {"theta": t, "a": a, "b": b})


def _cutoff(u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smooth bump exp(1 - 1/(1-u^2)) on |u|<1 with its first two derivatives."""
    s = np.zeros_like(u)
    ds = np.zeros_like(u)
    dds = np.zeros_like(u)
    inside = np.abs(u) < 1
    v = u[inside]
    q = 1 - v * v
    g = np.exp(1 - 1 / q)
    gp = -2 * v / q**2                      # d/du of (1 - 1/q)
    gpp = -2 / q**2 - 8 * v * v / q**3
    s[inside] = g
    ds[inside] = g * gp
    dds[inside] = g * (gp * gp + gpp)
    return s, ds, dds


def bump_radius(theta: np.ndarray, alpha: float, A: float, width: float = math.pi):
    """Radial profile ``1 + A s(theta) |theta - pi|^{1+alpha}`` and derivatives.

    The second derivative is singular at ``theta = pi``; it is reported as 0
    there (the symmetric limit of the regular part).
    """
    u = theta - np.pi
    s, ds, dds = _cutoff(u / width)
    ds, dds = ds / width, dds / width**2
    au = np.abs(u)
    p = 1 + alpha
    g = au**p
    dg = p * au**alpha * np.sign(u)
    with np.errstate(divide="ignore"):
        ddg = np.where(au > 0, p * alpha * au ** (alpha - 1), 0.0)
    r = 1 + A * s * g
    dr = A * (ds * g + s * dg)
    ddr = A * (dds * g + 2 * ds * dg + s * ddg)
    return r, dr, ddr


def make_bump_circle(alpha: float, A: float, N: int, width: float = math.pi) -> BoundaryMesh:
    """Radial graph whose normal is exactly C^alpha at theta = pi.

    The cutoff is supported on ``|theta - pi| < width``; the default spans
    the whole circle, so the profile is smooth everywhere except at
    ``theta = pi`` and its curvature stays mild away from the cusp.
    """
    if not 0 < alpha < 1:
        raise GeometryError("alpha must lie in (0, 1)")
    if N < 8:
        raise GeometryError("bump circle needs at least 8 nodes")
    tt = np.linspace(0, 2 * np.pi, 4001)
    rr, _, _ = bump_radius(tt, alpha, A, width)
    if rr.min() < 0.5:
        raise GeometryError(f"amplitude {A} too large: radius drops to {rr.min():.3f}")
    t = 2 * np.pi * np.arange(N) / N
    r, dr, ddr = bump_radius(t, alpha, A, width)
    c, s = np.cos(t), np.sin(t)
    z = np.stack([r * c, r * s], axis=1)
    dz = np.stack([dr * c - r * s, dr * s + r * c], axis=1)
    ddz = np.stack([(ddr - r) * c - 2 * dr * s, (ddr - r) * s + 2 * dr * c], axis=1)
    label = "circle" if A == 0 else f"bump_circle({alpha:g},{A:g})"
    return _curve_mesh(z, dz, ddz, 2 * np.pi / N, label,
                       {"theta": t, "alpha": alpha, "A": A}, smooth=(A == 0))


def make_square(side: float, M: int) -> BoundaryMesh:
    """Square centred at the origin, ``M`` midpoint nodes per edge, counterclockwise."""
    if side <= 0:
        raise GeometryError("side must be positive")
    if M < 4:
        raise GeometryError("need at least 4 nodes per edge")
    h = side / M
    s = (np.arange(M) + 0.5) * h - side / 2
    half = side / 2
    edges = [
        (np.stack([s, -half + 0 * s], 1), (1.0, 0.0), (0.0, -1.0)),     # bottom
        (np.stack([half + 0 * s, s], 1), (0.0, 1.0), (1.0, 0.0)),       # right
        (np.stack([-s, half + 0 * s], 1), (-1.0, 0.0), (0.0, 1.0)),     # top
        (np.stack([-half + 0 * s, -s], 1), (0.0, -1.0), (-1.0, 0.0)),   # left
    ]
    z = np.concatenate([e[0] for e in edges])
    dz = np.concatenate([np.tile(e[1], (M, 1)) for e in edges])
    nu = np.concatenate([np.tile(e[2], (M, 1)) for e in edges])
    edge_id = np.repeat(np.arange(4), M)
    return BoundaryMesh(
        n=2, nodes=z, normals=nu, weights=np.full(4 * M, h), label=f"square({side:g})",
        param={"edge": edge_id, "side": side}, tangent=dz, accel=np.zeros_like(dz),
        param_step=h, smooth=False,
    )


def fejer_weights(n: int) -> np.ndarray:
    """Fejér first-rule weights for ``int_0^pi g(phi) sin(phi) dphi`` at midpoint angles.

    Exact for ``g`` a polynomial in ``cos(phi)`` of degree below ``n``.
    """
    phi = (np.arange(n) + 0.5) * np.pi / n
    j = np.arange(1, n // 2 + 1)
    s = np.cos(2 * np.outer(phi, j)) / (4 * j * j - 1)
    return (2.0 / n) * (1 - 2 * s.sum(axis=1))


def make_sphere(r: float, n_phi: int, n_theta: int, center=(0.0, 0.0, 0.0)) -> BoundaryMesh:
    """Lat/long grid: midpoint polar angles with Fejér weights, uniform azimuths.

    ``w = r^2 w_phi dtheta``; the rule is spectrally accurate for smooth
    integrands, unlike the plain midpoint ``sin(phi) dphi`` weights.
    """
    if r <= 0:
        raise GeometryError("radius must be positive")
    if n_phi < 8 or n_theta < 8:
        raise GeometryError("degenerate sphere grid")
    dtheta = 2 * np.pi / n_theta
    phi = (np.arange(n_phi) + 0.5) * np.pi / n_phi
    theta = np.arange(n_theta) * dtheta
    P, T = np.meshgrid(phi, theta, indexing="ij")
    W = np.broadcast_to(fejer_weights(n_phi)[:, None], P.shape).ravel()
    P, T = P.ravel(), T.ravel()
    nu = np.stack([np.sin(P) * np.cos(T), np.sin(P) * np.sin(T), np.cos(P)], axis=1)
    center = np.asarray(center, dtype=float)
    return BoundaryMesh(
        n=3, nodes=center + r * nu, normals=nu, weights=r * r * W * dtheta,
        label="sphere" if r == 1 else f"sphere({r:g})",
        param={"phi": P, "theta": T, "radius": float(r), "center": center,
               "shape": (n_phi, n_theta)},
    )


def make_family(family: str, N: int, **kw) -> BoundaryMesh:
    """Build a mesh by family name with roughly ``N`` nodes."""
    if family == "circle":
        return make_ellipse(1.0, 1.0, N)
    if family == "ellipse":
        return make_ellipse(kw.get("a", 2.0), kw.get("b", 1.0), N)
    if family == "square":
        return make_square(kw.get("side", 2.0), max(4, N // 4))
    if family == "bump_circle":
        return make_bump_circle(kw.get("bump_alpha", 0.5), kw.get("A", 0.1), N,
                                kw.get("width", math.pi))
    if family == "sphere":
        n_phi = max(8, int(round(np.sqrt(N / 2))))
        return make_sphere(kw.get("r", 1.0), n_phi, 2 * n_phi)
    raise GeometryError(f"unknown domain family {family!r}")


SMOOTH_FAMILIES = {"circle", "ellipse", "sphere"}


# ------------------------------------------------------------------ probes


@dataclass(frozen=True, eq=False)
class ProbeSet:
    base: int
    points: np.ndarray
    depths: np.ndarray
    rho: np.ndarray
    rho_uncertainty: float
    kappa: float


def probe_ladder(mesh: BoundaryMesh, i: int, t0: float, ratio: float, K: int,
                 kappa: float = 1.0) -> ProbeSet:
    """Probes ``x_i - t0 ratio^k nu_i`` marching straight in along the normal.

    ``rho`` is the distance to the nearest node, except on circles and
    spheres where the exact distance to the surface is used.
    """
    if not 0 < ratio < 1:
        raise GeometryError("ratio must lie in (0, 1)")
    x, nu = mesh.nodes[i], mesh.normals[i]
    tree = cKDTree(mesh.nodes)
    start = x - t0 * nu
    d_all, idx = tree.query(start, k=1)
    if idx != i and d_all < t0 * (1 - 1e-12):
        raise GeometryError(f"t0={t0} exceeds the local reach at node {i}")
    depths = t0 * ratio ** np.arange(K)
    pts = x[None, :] - depths[:, None] * nu[None, :]
    rho = _distance_to_boundary(mesh, pts, tree)
    h = float(mesh.local_spacing()[i])
    for k, (z, r) in enumerate(zip(pts, rho)):
        # nearest-node rho over-estimates the true distance by at most ~h
        if np.linalg.norm(x - z) >= (1 + kappa) * r:
            raise GeometryError(f"probe {k} at depth {depths[k]:.3g} leaves the cone Gamma_kappa")
        if not _inside(mesh, z, x):
            raise GeometryError(f"probe {k} at depth {depths[k]:.3g} is on the wrong side")
    exact = _exact_distance_available(mesh)
    return ProbeSet(base=i, points=pts, depths=depths, rho=rho,
                    rho_uncertainty=0.0 if exact else h, kappa=kappa)


def _exact_distance_available(mesh: BoundaryMesh) -> bool:
    return mesh.label == "circle" or mesh.is_sphere


def _distance_to_boundary(mesh: BoundaryMesh, pts: np.ndarray, tree=None) -> np.ndarray:
    if mesh.label == "circle":
        return np.abs(1 - np.linalg.norm(pts, axis=1))
    if mesh.is_sphere:
        c, r = mesh.param["center"], mesh.param["radius"]
        return np.abs(r - np.linalg.norm(pts - c, axis=1))
    tree = tree or cKDTree(mesh.nodes)
    d, _ = tree.query(pts, k=1)
    return d


def _inside(mesh: BoundaryMesh, z: np.ndarray, x: np.ndarray) -> bool:
    # moving against the outward normal of the region of interest keeps us in it
    j = int(np.argmin(np.linalg.norm(mesh.nodes - z, axis=1)))
    return float(np.dot(mesh.normals[j], mesh.nodes[j] - z)) > 0


def distance_to_boundary(mesh: BoundaryMesh, pts) -> np.ndarray:
    return _distance_to_boundary(mesh, np.atleast_2d(np.asarray(pts, dtype=float)))


def spectral_derivative(values: np.ndarray, h: float, order: int = 1) -> np.ndarray:
    """Derivative of periodic samples on a uniform grid with spacing ``h``.

    Works along axis 0; ``values`` may carry trailing axes.
    """
    N = values.shape[0]
    k = np.fft.fftfreq(N, d=h) * 2 * np.pi
    if N % 2 == 0 and order % 2 == 1:
        k[N // 2] = 0.0
    mult = (1j * k) ** order
    shape = (N,) + (1,) * (values.ndim - 1)
    out = np.fft.ifft(mult.reshape(shape) * np.fft.fft(values, axis=0), axis=0)
    return out.real


def centered_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order periodic central difference along axis 0."""
    return (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)) / (2 * h)


def curve_derivative(mesh: BoundaryMesh, values: np.ndarray) -> np.ndarray:
    """d/dt of node data along a curve's parameter."""
    h = mesh.param_step
    if mesh.smooth:
        return spectral_derivative(values, h)
    return centered_derivative(values, h)


def with_curve_params(mesh: BoundaryMesh) -> BoundaryMesh:
    """Attach spectral tangents to a curve that only carries nodes (e.g. loaded from file)."""
    if mesh.n != 2 or mesh.tangent is not None:
        return mesh
    N = mesh.N
    h = 2 * np.pi / N
    dz = spectral_derivative(mesh.nodes, h)
    ddz = spectral_derivative(mesh.nodes, h, order=2)
    return dataclasses.replace(mesh, tangent=dz, accel=ddz, param_step=h)
