"""Riesz, generalized, Cauchy-Clifford and layer-potential operators on meshes.

Scalar fields are arrays of shape ``(N,)``; Clifford fields are dense
bitmask arrays of shape ``(N, 2**n)`` (see :mod:`rieszlab.clifford`).
Principal values on curves use the node-excluded trapezoid rule plus an
analytic self-term; on spheres a local Taylor subtraction with exact polar
moments.  Both can be cross-checked by the truncation mode, which
integrates over ``{|x - y| > eps}`` on the interpolated geometry and
extrapolates ``eps -> 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .clifford import dense_embed, dense_mul, dense_vector_part
from .geometry import BoundaryMesh, GeometryError, ProbeSet, distance_to_boundary
from .kernels import KernelSpec, PolyKernel, RieszKernel, SeriesKernel, as_kernel, omega
from .quadrature import (CurveGeometry, QuadratureError, TrigInterpolant, cauchy_kernel_vec,
                         cauchy_sum, curve_cauchy_pv, curve_pv, curve_truncated,
                         default_eps_ladder, kernel_sum, pick_targets, richardson,
                         sh_interpolant, sphere_cauchy_pv, sphere_local_moments, sphere_pv,
                         sphere_truncated)

log = logging.getLogger(__name__)


class OperatorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: BoundaryMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.N,):
            raise OperatorError(f"scalar field needs shape ({self.mesh.N},), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise OperatorError("scalar field has non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class CliffordField:
    mesh: BoundaryMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.N, 1 << self.mesh.n):
            raise OperatorError(f"Clifford field needs shape ({self.mesh.N}, {1 << self.mesh.n})")
        object.__setattr__(self, "values", v)


@dataclass
class OperatorResult:
    """Values plus run metadata (mode, cross-check residuals, warnings)."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _scalar(f, mesh: BoundaryMesh) -> np.ndarray:
    if isinstance(f, (ScalarField, CliffordField)):
        f = f.values
    if np.isscalar(f):
        return np.full(mesh.N, float(f))
    f = np.asarray(f, dtype=float)
    if f.shape[0] != mesh.N:
        raise OperatorError(f"field has {f.shape[0]} values, mesh has {mesh.N} nodes")
    return f


def _clifford(f, mesh: BoundaryMesh) -> np.ndarray:
    """Coerce scalars, scalar fields or Clifford fields to ``(N, 2**n)``."""
    size = 1 << mesh.n
    if isinstance(f, (ScalarField, CliffordField)):
        f = f.values
    if np.isscalar(f):
        out = np.zeros((mesh.N, size))
        out[:, 0] = float(f)
        return out
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        if f.shape[0] == size and mesh.N != size:
            return np.tile(f, (mesh.N, 1))
        out = np.zeros((mesh.N, size))
        out[:, 0] = f
        return out
    if f.shape != (mesh.N, size):
        raise OperatorError(f"Clifford field needs shape ({mesh.N}, {size}), got {f.shape}")
    return f


def _kernel(kernel, n: int) -> KernelSpec:
    k = as_kernel(kernel, n)
    if k.n != n:
        raise OperatorError(f"kernel dimension {k.n} does not match mesh dimension {n}")
    return k


# --------------------------------------------------------------- truncation


def riesz_truncated(mesh: BoundaryMesh, j: int, f, eps: float, x=None) -> np.ndarray:
    """``(1/omega) sum_{|x - y_i| > eps} (x_j - y_ij)/|x - y_i|^n f_i w_i`` at nodes ``x``."""
    if eps <= 0:
        raise OperatorError("eps must be positive")
    return generalized_truncated(mesh, RieszKernel(mesh.n, j), f, eps, x)


def generalized_truncated(mesh: BoundaryMesh, kernel, f, eps: float, x=None) -> np.ndarray:
    k = _kernel(kernel, mesh.n)
    fv = _scalar(f, mesh)
    idx = np.arange(mesh.N) if x is None else np.atleast_1d(np.asarray(x, dtype=int))
    X = mesh.nodes[idx]
    out = np.empty(len(idx))
    dens = fv * mesh.weights
    step = max(1, (1 << 21) // mesh.N)
    for a in range(0, len(idx), step):
        V = X[a:a + step, None, :] - mesh.nodes[None, :, :]
        r = np.linalg.norm(V, axis=-1)
        far = r > eps
        V[~far] = 1.0
        K = np.where(far, k(V), 0.0)
        out[a:a + step] = K @ dens
    return out if x is None or np.ndim(x) else out[0]


def riesz_maximal(mesh: BoundaryMesh, j: int, f, eps_ladder,
                  include_limit: bool = False) -> np.ndarray:
    """Per-node sup over a decreasing ladder of ``|riesz_truncated|``.

    With ``include_limit`` the principal value (the ``eps -> 0`` limit)
    joins the sup, so the result dominates ``|riesz_pv|``; a finite ladder
    alone can approach the limit from below.
    """
    ladder = np.asarray(eps_ladder, dtype=float)
    if ladder.ndim != 1 or len(ladder) == 0:
        raise OperatorError("need a nonempty eps ladder")
    if np.any(np.diff(ladder) >= 0):
        raise OperatorError("eps ladder must be strictly decreasing")
    vals = [np.abs(riesz_truncated(mesh, j, f, e)) for e in ladder]
    if include_limit:
        vals.append(np.abs(np.asarray(riesz_pv(mesh, j, f))))
    return np.stack(vals).max(axis=0)


# ----------------------------------------------------------- principal value


def _pv_scalar(mesh: BoundaryMesh, k: KernelSpec, fv: np.ndarray, mode: str) -> np.ndarray:
    if mesh.is_curve:
        if mode not in ("corrected", "exclusion"):
            raise OperatorError(f"unknown pv mode {mode!r}")
        return curve_pv(mesh, k, fv, corrected=(mode == "corrected"))
    if mesh.is_sphere:
        return sphere_pv(mesh, k, fv)
    raise OperatorError("principal values need a curve or lat/long sphere mesh")


def truncation_crosscheck(mesh: BoundaryMesh, kernel, f, targets=16, eps_ladder=None,
                          clifford: bool = False) -> dict:
    """Independent pv estimate at a subset of nodes by eps-truncation and extrapolation."""
    idx = pick_targets(mesh.N, targets) if np.isscalar(targets) else np.asarray(targets, int)
    ladder = default_eps_ladder(mesh) if eps_ladder is None else np.asarray(eps_ladder, float)
    n = mesh.n
    if clifford:
        fv = _clifford(f, mesh)
        om = omega(n)

        def integrand(x, Y, NU, FY):
            K = dense_embed(cauchy_kernel_vec(x - Y, n, om))
            return dense_mul(dense_mul(K, dense_embed(NU), n), FY, n)
    else:
        fv = _scalar(f, mesh)
        k = _kernel(kernel, n)

        def integrand(x, Y, NU, FY):
            J = np.linalg.norm(NU, axis=-1)
            return k(x - Y) * FY * (J if mesh.is_curve else 1.0)

    if mesh.is_curve:
        geo = CurveGeometry.from_mesh(mesh)
        interp = TrigInterpolant(fv)
        rows = [[curve_truncated(mesh, i, e, integrand, geo, interp) for e in ladder] for i in idx]
    elif mesh.is_sphere:
        ev = sh_interpolant(mesh, fv)
        rows = [[sphere_truncated(mesh, i, e, integrand, ev) for e in ladder] for i in idx]
    else:
        raise QuadratureError("truncation mode needs a smooth curve or a sphere")
    est, unc = [], []
    for r in rows:
        e, u = richardson(ladder, r)
        est.append(e)
        unc.append(u)
    return {"targets": idx, "eps": ladder, "estimate": np.array(est),
            "uncertainty": np.array(unc)}


def _attach_crosscheck(res: OperatorResult, cc: dict, offset=None, tol: float = 1e-8) -> None:
    est = cc["estimate"] + (0 if offset is None else offset)
    diff = np.abs(np.asarray(res.values)[cc["targets"]] - est)
    if diff.ndim > 1:
        diff = diff.max(axis=tuple(range(1, diff.ndim)))
    unc = cc["uncertainty"]
    if unc.ndim > 1:
        unc = unc.max(axis=tuple(range(1, unc.ndim)))
    agree = bool(np.all(diff <= np.maximum(10 * unc, tol)))
    res.meta["crosscheck"] = {
        "targets": cc["targets"].tolist(), "estimate": est.tolist(),
        "uncertainty": unc.tolist(), "max_diff": float(diff.max()), "agree": agree,
    }
    if not agree:
        res.meta.setdefault("warnings", []).append(
            f"exclusion and truncation modes disagree by {diff.max():.3g}")


def riesz_pv(mesh: BoundaryMesh, j: int, f, mode: str = "corrected",
             crosscheck: int = 0) -> OperatorResult:
    """Principal-value Riesz transform ``R_j f`` at every node."""
    return generalized_pv(mesh, RieszKernel(mesh.n, j), f, mode, crosscheck)


def generalized_pv(mesh: BoundaryMesh, kernel, f, mode: str = "corrected",
                   crosscheck: int = 0) -> OperatorResult:
    """Principal value of ``sum k(x - y) f(y) w`` for odd degree ``-(n-1)`` kernels.

    Series kernels are evaluated mode by mode and summed.
    """
    k = _kernel(kernel, mesh.n)
    fv = _scalar(f, mesh)
    if isinstance(k, SeriesKernel):
        vals = np.zeros(mesh.N)
        for mk in k.modes:
            vals = vals + _pv_scalar(mesh, mk, fv, mode)
    else:
        vals = _pv_scalar(mesh, k, fv, mode)
    res = OperatorResult(vals, {"operator": "pv", "kernel": k.name, "mesh": mesh.label,
                                "N": mesh.N, "mode": mode})
    if crosscheck:
        _attach_crosscheck(res, truncation_crosscheck(mesh, k, fv, crosscheck))
    return res


# ------------------------------------------------------- boundary to domain


def _off_boundary(mesh: BoundaryMesh, points) -> tuple[np.ndarray, np.ndarray, list[str]]:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[1] != mesh.n:
        raise OperatorError(f"points must have {mesh.n} coordinates")
    rho = distance_to_boundary(mesh, P)
    if np.any(rho <= 0):
        raise OperatorError("evaluation point lies on the boundary")
    h = mesh.spacing()
    warns = [f"point {i} within 2x node spacing of the boundary (rho={r:.3g})"
             for i, r in enumerate(rho) if r < 2 * h]
    for w in warns:
        log.warning(w)
    return P, rho, warns


def _fd_gradient(fun, P: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Central differences; ``fun`` maps ``(M, n)`` points to ``(M, C)`` values."""
    n = P.shape[1]
    cols = []
    for d in range(n):
        e = np.zeros(n)
        e[d] = 1.0
        up = fun(P + steps[:, None] * e)
        dn = fun(P - steps[:, None] * e)
        cols.append((up - dn) / (2 * steps[:, None]))
    return np.stack(cols, axis=1)


def boundary_to_domain(mesh: BoundaryMesh, kernel, f, points, alpha: float = 0.5,
                       diagnostics: bool = True) -> OperatorResult:
    """``T f(z) = sum k(z - y) f(y) w`` off the boundary, with sup/gradient diagnostics."""
    k = _kernel(kernel, mesh.n)
    fv = _scalar(f, mesh)
    P, rho, warns = _off_boundary(mesh, points)
    dens = fv * mesh.weights

    def fun(Z):
        return kernel_sum(k, Z, mesh.nodes, dens)[:, None]

    vals = fun(P)[:, 0]
    meta = {"operator": "boundary_to_domain", "kernel": k.name, "mesh": mesh.label,
            "N": mesh.N, "warnings": warns}
    if diagnostics:
        steps = np.minimum(rho / 8, mesh.spacing())
        grad = _fd_gradient(fun, P, steps)[..., 0]
        meta["sup_abs"] = float(np.max(np.abs(vals)))
        meta["weighted_grad_sup"] = float(np.max(rho ** (1 - alpha) * np.linalg.norm(grad, axis=1)))
        meta["gradient"] = grad
        meta["rho"] = rho
    return OperatorResult(vals, meta)


def cauchy_domain(mesh: BoundaryMesh, f, points) -> OperatorResult:
    """``(1/omega) sum (z - y)/|z - y|^n * nu * f * w`` at off-boundary points."""
    fv = _clifford(f, mesh)
    P, rho, warns = _off_boundary(mesh, points)
    nu = dense_embed(mesh.normals)
    dens = dense_mul(nu, fv, mesh.n) * mesh.weights[:, None]
    vals = cauchy_sum(P, mesh, dens, omega(mesh.n))
    return OperatorResult(vals, {"operator": "cauchy_domain", "mesh": mesh.label, "N": mesh.N,
                                 "warnings": warns, "rho": rho})


def cauchy_pv(mesh: BoundaryMesh, f, mode: str = "corrected", crosscheck: int = 0,
              moments=None) -> OperatorResult:
    """Subtracted-kernel Cauchy-Clifford principal value.

    ``C^pv f(x_i) = +-f_i/2 + (1/omega) sum_{k != i} K(x_i - y_k) nu_k (f_k - f_i) w_k``
    with ``+`` for bounded and ``-`` for exterior orientation; on curves the
    missing node term is added analytically.
    """
    fv = _clifford(f, mesh)
    om = omega(mesh.n)
    sign = 0.5 if mesh.bounded else -0.5
    if mesh.is_curve:
        body = curve_cauchy_pv(mesh, fv, om, corrected=(mode == "corrected"))
    elif mesh.is_sphere:
        body = sphere_cauchy_pv(mesh, fv, om, moments)
    else:
        raise OperatorError("Cauchy principal value needs a curve or sphere mesh")
    res = OperatorResult(sign * fv + body, {"operator": "cauchy_pv", "mesh": mesh.label,
                                            "N": mesh.N, "mode": mode, "sign": sign})
    if crosscheck:
        _attach_crosscheck(res, truncation_crosscheck(mesh, None, fv, crosscheck, clifford=True))
    return res


def cauchy_sphere_moments(mesh: BoundaryMesh):
    """Reusable local moments for repeated sphere Cauchy evaluations."""
    om = omega(3)
    return sphere_local_moments(mesh, lambda X, Y, NU: dense_mul(
        dense_embed(cauchy_kernel_vec(X - Y, 3, om)), dense_embed(NU), 3))


def recover_normal(mesh: BoundaryMesh, mode: str = "corrected") -> dict:
    """``nu_rec = -4 C^pv(sum_j (R_j 1) e_j)`` with per-node errors.

    ``mode="exclusion"`` drops the analytic self-terms on curves, giving the
    first-order node-exclusion scheme.
    """
    n = mesh.n
    R = np.stack([np.asarray(riesz_pv(mesh, j, 1.0, mode=mode)) for j in range(1, n + 1)], axis=1)
    out = np.asarray(cauchy_pv(mesh, dense_embed(R), mode=mode))
    rec = -4 * dense_vector_part(out, n)
    other = out.copy()
    for j in range(n):
        other[:, 1 << j] = 0.0
    err = np.linalg.norm(rec - mesh.normals, axis=1)
    unit = rec / np.linalg.norm(rec, axis=1, keepdims=True)
    ang = np.arccos(np.clip(np.sum(unit * mesh.normals, axis=1), -1, 1))
    return {"nu_rec": rec, "error": err, "max_error": float(err.max()),
            "angular_error": ang, "max_angular_error": float(ang.max()),
            "non_vector_residual": float(4 * np.abs(other).max()), "riesz": R}


# ---------------------------------------------------------- layer potentials


def fundamental_solution(v: np.ndarray) -> np.ndarray:
    """``(1/2pi) ln|x|`` in R^2; ``1/(omega (2-n) |x|^{n-2})`` for n >= 3."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    r = np.linalg.norm(v, axis=-1)
    if n == 2:
        return np.log(r) / (2 * np.pi)
    return 1.0 / (omega(n) * (2 - n) * r ** (n - 2))


def single_layer(mesh: BoundaryMesh, f, points) -> OperatorResult:
    fv = _scalar(f, mesh)
    P, rho, warns = _off_boundary(mesh, points)
    vals = kernel_sum(fundamental_solution, P, mesh.nodes, fv * mesh.weights)
    return OperatorResult(vals, {"operator": "single_layer", "warnings": warns, "rho": rho})


def double_layer(mesh: BoundaryMesh, f, points) -> OperatorResult:
    """``(1/omega) sum <nu(y), y - x>/|x - y|^n f(y) w``."""
    fv = _scalar(f, mesh)
    P, rho, warns = _off_boundary(mesh, points)
    om = omega(mesh.n)
    out = np.zeros(len(P))
    step = max(1, (1 << 21) // mesh.N)
    for a in range(0, len(P), step):
        V = mesh.nodes[None, :, :] - P[a:a + step, None, :]
        r = np.linalg.norm(V, axis=-1)
        K = np.sum(V * mesh.normals[None], axis=-1) / (om * r**mesh.n)
        out[a:a + step] = K @ (fv * mesh.weights)
    return OperatorResult(out, {"operator": "double_layer", "warnings": warns, "rho": rho})


def grad_single_layer(mesh: BoundaryMesh, f, points) -> OperatorResult:
    """``grad S f`` by central differences and as the vector part of ``-C(nu f)``."""
    fv = _scalar(f, mesh)
    P, rho, warns = _off_boundary(mesh, points)
    dens = fv * mesh.weights
    steps = np.minimum(rho / 8, mesh.spacing())
    fd = _fd_gradient(lambda Z: kernel_sum(fundamental_solution, Z, mesh.nodes, dens)[:, None],
                      P, steps)[..., 0]
    nu = dense_embed(mesh.normals)
    cf = -np.asarray(cauchy_domain(mesh, nu * fv[:, None], P))
    via_c = dense_vector_part(cf, mesh.n)
    scale = np.maximum(np.linalg.norm(via_c, axis=1), 1e-300)
    rel = np.linalg.norm(fd - via_c, axis=1) / scale
    return OperatorResult(via_c, {"operator": "grad_single_layer", "finite_difference": fd,
                                  "relative_residual": rel, "max_relative_residual":
                                  float(rel.max()), "warnings": warns, "steps": steps})


# ------------------------------------------------------------------- traces


@dataclass
class TraceResult:
    limit: np.ndarray
    uncertainty: float
    flagged: bool
    depths_used: np.ndarray
    notes: list[str] = field(default_factory=list)


def nontangential_trace(evaluator, probe: ProbeSet, min_rho: float = 0.0,
                        max_points: int = 5) -> TraceResult:
    """Extrapolate ``evaluator`` along a probe ladder to depth 0.

    Probes with ``rho < min_rho`` are skipped (quadrature is unreliable in
    that boundary layer).  Polynomial extrapolation in the depth uses the
    ``max_points`` deepest admissible probes; the uncertainty is the last
    increment of the extrapolation table.
    """
    keep = probe.rho >= min_rho
    notes = [f"probe {k} skipped: rho={r:.3g} below {min_rho:.3g}"
             for k, r in enumerate(probe.rho) if r < min_rho]
    depths = probe.depths[keep]
    if len(depths) < 3:
        raise OperatorError(f"need at least 3 admissible probes, have {len(depths)}")
    depths = depths[-max_points:]
    pts = probe.points[keep][-max_points:]
    vals = np.asarray(evaluator(pts), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    # Neville table, recording successive estimates
    T = [v.copy() for v in vals]
    diag = [T[0].copy()]
    for m in range(1, len(T)):
        for k in range(len(T) - m):
            # increment form: exact when the column is constant
            T[k] = T[k] + depths[k] * (T[k] - T[k + 1]) / (depths[k + m] - depths[k])
        diag.append(T[0].copy())
    incs = [float(np.max(np.abs(b - a))) for a, b in zip(diag, diag[1:])]
    flagged = len(incs) >= 2 and incs[-1] > incs[-2] and incs[-1] > 1e-12
    if flagged:
        notes.append("increments do not decrease; estimate flagged")
    return TraceResult(diag[-1], incs[-1], flagged, depths, notes)


# ------------------------------------------------------------ misc checks


def cauchy_truncation_bound(mesh: BoundaryMesh, eps_ladder) -> float:
    """``sup_{i, eps} |(1/omega) sum_{|x_i - y| > eps} K(x_i - y) nu w|``."""
    n = mesh.n
    om = omega(n)
    nu = dense_embed(mesh.normals) * mesh.weights[:, None]
    B = [dense_mul(np.eye(1 << n)[1 << j], nu, n) for j in range(n)]
    best = 0.0
    step = max(1, (1 << 20) // mesh.N)
    for a in range(0, mesh.N, step):
        V = mesh.nodes[a:a + step, None, :] - mesh.nodes[None, :, :]
        r = np.linalg.norm(V, axis=-1)
        for e in eps_ladder:
            far = r > e
            Vs = np.where(far[..., None], V, 1.0)
            Kv = np.where(far[..., None], cauchy_kernel_vec(Vs, n, om), 0.0)
            tot = sum(Kv[..., j] @ B[j] for j in range(n))
            best = max(best, float(np.max(np.linalg.norm(tot, axis=1))))
    return best


def bilinear(mesh: BoundaryMesh, u, v) -> float:
    """Weighted discrete pairing ``sum u_i v_i w_i``."""
    return float(np.sum(np.asarray(u) * np.asarray(v) * mesh.weights))


__all__ = [
    "OperatorError", "ScalarField", "CliffordField", "OperatorResult", "riesz_truncated",
    "generalized_truncated", "riesz_maximal", "riesz_pv", "generalized_pv",
    "truncation_crosscheck", "boundary_to_domain", "cauchy_domain", "cauchy_pv",
    "cauchy_sphere_moments", "recover_normal", "fundamental_solution", "single_layer",
    "double_layer", "grad_single_layer", "TraceResult", "nontangential_trace",
    "cauchy_truncation_bound", "bilinear", "GeometryError", "PolyKernel",
]
