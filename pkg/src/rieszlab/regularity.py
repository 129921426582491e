"""Discrete Hölder, BMO/VMO and Besov estimators and the refinement classifier."""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundaryMesh, GeometryError, curve_derivative, make_family

PAIR_BLOCK = 1 << 21


class RegularityError(ValueError):
    pass


@dataclass
class SeminormReport:
    kind: str
    value: float
    argpair: tuple[int, int] | None = None
    curve: dict | None = None
    parts: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    refinement: str | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value,
                "argpair": list(self.argpair) if self.argpair else None,
                "curve": self.curve, "parts": self.parts, "notes": self.notes,
                "refinement": self.refinement}


def _values2d(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return v[:, None] if v.ndim == 1 else v.reshape(v.shape[0], -1)


def _points(mesh_or_nodes) -> np.ndarray:
    if isinstance(mesh_or_nodes, BoundaryMesh):
        return mesh_or_nodes.nodes
    return np.asarray(mesh_or_nodes, dtype=float)


def _pair_blocks(X: np.ndarray, F: np.ndarray):
    """Yield ``(start, dist, diff_norm)`` row blocks over all pairs."""
    N = X.shape[0]
    step = max(1, PAIR_BLOCK // max(N, 1))
    for a in range(0, N, step):
        b = min(N, a + step)
        D = np.sqrt(np.sum((X[a:b, None, :] - X[None, :, :]) ** 2, axis=-1))
        dF = np.sqrt(np.sum((F[a:b, None, :] - F[None, :, :]) ** 2, axis=-1))
        yield a, D, dF


def holder_seminorm(values, mesh_or_nodes, alpha: float, min_sep: float | None = None) -> SeminormReport:
    """``max |f(x) - f(y)| / |x - y|^alpha`` over pairs with ``|x - y| >= min_sep``.

    Vector and Clifford values use the Euclidean norm of the coefficient
    difference.  ``min_sep`` defaults to three times the mesh spacing.
    """
    if not 0 < alpha < 1:
        raise RegularityError("alpha must lie in (0, 1)")
    X = _points(mesh_or_nodes)
    F = _values2d(values)
    if min_sep is None:
        if not isinstance(mesh_or_nodes, BoundaryMesh):
            raise RegularityError("min_sep required when passing raw nodes")
        min_sep = 3 * mesh_or_nodes.spacing()
    if min_sep < 0:
        raise RegularityError("min_sep must be nonnegative")
    best, arg, count = 0.0, None, 0
    for a, D, dF in _pair_blocks(X, F):
        ok = D >= max(min_sep, 1e-300)
        count += int(ok.sum())
        if not ok.any():
            continue
        R = np.where(ok, dF / np.where(ok, D, 1.0) ** alpha, -1.0)
        k = int(np.argmax(R))
        i, j = divmod(k, R.shape[1])
        if R[i, j] > best or arg is None:
            best, arg = float(R[i, j]), (a + i, j)
    if count < 4:  # each unordered pair is seen twice
        raise RegularityError("fewer than 2 admissible pairs")
    return SeminormReport(f"holder({alpha:g})", max(best, 0.0), arg,
                          parts={"min_sep": float(min_sep), "alpha": alpha})


def second_difference_seminorm(values, mesh: BoundaryMesh, alpha: float,
                               k_range: tuple[int, int] = (3, 6)) -> SeminormReport:
    """``max |f(x_{i+k}) + f(x_{i-k}) - 2 f(x_i)| / d_{ik}^alpha`` on a closed curve.

    ``k`` runs over ``k_range`` node offsets and ``d_{ik}`` is the larger of
    the two chord lengths, so the admissible separations scale with the
    mesh spacing.  For ``0 < alpha < 1`` this second-difference quotient is
    an equivalent Hölder seminorm; unlike first differences it does not
    see the smooth linear part of ``f``, which otherwise masks a weak cusp
    at coarse resolution.
    """
    if not 0 < alpha < 1:
        raise RegularityError("alpha must lie in (0, 1)")
    if not mesh.is_curve:
        raise RegularityError("second differences need a closed curve (ordered nodes)")
    k0, k1 = int(k_range[0]), int(k_range[1])
    if not 1 <= k0 <= k1 or 2 * k1 >= mesh.N:
        raise RegularityError(f"offset range {k_range} invalid for N={mesh.N}")
    X = mesh.nodes
    F = _values2d(values)
    best, arg = 0.0, None
    for k in range(k0, k1 + 1):
        d = np.maximum(np.linalg.norm(X - np.roll(X, -k, 0), axis=1),
                       np.linalg.norm(X - np.roll(X, k, 0), axis=1))
        d2 = np.linalg.norm(np.roll(F, -k, 0) + np.roll(F, k, 0) - 2 * F, axis=1)
        q = d2 / d**alpha
        i = int(np.argmax(q))
        if q[i] > best or arg is None:
            best, arg = float(q[i]), (i, k)
    return SeminormReport(f"second_difference({alpha:g})", best, arg,
                          parts={"k_range": [k0, k1], "alpha": alpha})


def bmo_sharp(values, mesh: BoundaryMesh, radii, p: float = 1.0) -> SeminormReport:
    """Discrete sharp maximal function ``f^{#,p}`` over metric balls.

    Returns the sup over nodes and radii; ``curve`` holds the VMO profile
    (sup over nodes at each radius).  Radii whose balls hold only their
    centre node are skipped with a notice.
    """
    if p < 1:
        raise RegularityError("p must be >= 1")
    X = mesh.nodes
    F = _values2d(values)
    w = mesh.weights
    N = mesh.N
    radii = np.sort(np.asarray(radii, dtype=float))
    profile, used, notes = [], [], []
    step = max(1, PAIR_BLOCK // (N * max(F.shape[1], 1)))
    for r in radii:
        osc = np.empty(N)
        degenerate = False
        for a in range(0, N, step):
            b = min(N, a + step)
            D = np.sqrt(np.sum((X[a:b, None, :] - X[None, :, :]) ** 2, axis=-1))
            M = (D < r) * w[None, :]
            if np.any(np.count_nonzero(M, axis=1) < 2):
                degenerate = True
                break
            mass = M.sum(axis=1)
            mean = (M @ F) / mass[:, None]
            dev = np.sqrt(np.sum((F[None, :, :] - mean[:, None, :]) ** 2, axis=-1))
            osc[a:b] = (np.sum(M * dev**p, axis=1) / mass) ** (1 / p)
        if degenerate:
            notes.append(f"radius {r:.4g} skipped: ball with no neighbours")
            continue
        profile.append(float(osc.max()))
        used.append(float(r))
    if not used:
        raise RegularityError("no admissible radius")
    return SeminormReport(f"bmo({p:g})", max(profile), curve={"radius": used, "sup": profile},
                          notes=notes)


def vmo_profile(values, mesh: BoundaryMesh, radii, p: float = 1.0) -> dict:
    return bmo_sharp(values, mesh, radii, p).curve


def besov_seminorm(values, mesh: BoundaryMesh, p: float, s: float,
                   self_cell: bool = True) -> SeminormReport:
    """Discrete ``B^{p,p}_s`` norm: double-sum seminorm plus the ``L^p`` term.

    On curves the excluded diagonal cell is restored from the local Taylor
    model ``|f'| |t - t_i|``, which removes the leading ``O(h^{p(1-s)})``
    error of the punctured sum.
    """
    if not 1 <= p < math.inf:
        raise RegularityError("need 1 <= p < inf")
    if not 0 < s < 1:
        raise RegularityError("need 0 < s < 1")
    n = mesh.n
    notes = []
    if s * p <= n - 1:
        notes.append(f"s*p={s * p:g} <= n-1={n - 1}: Hölder embedding not available")
        warnings.warn(notes[-1], stacklevel=2)
    X = mesh.nodes
    F = _values2d(values)
    w = mesh.weights
    expo = n - 1 + s * p
    total = 0.0
    for a, D, dF in _pair_blocks(X, F):
        rows = np.arange(D.shape[0])
        D[rows, a + rows] = 1.0
        T = dF**p / D**expo
        T[rows, a + rows] = 0.0
        total += float(w[a:a + D.shape[0]] @ T @ w)
    if self_cell and mesh.is_curve and mesh.param_step is not None:
        h = mesh.param_step
        J = np.linalg.norm(mesh.tangent, axis=1)
        ft = np.linalg.norm(curve_derivative(mesh, F), axis=1)
        cell = ft**p * J ** (-s * p) * 2 * (h / 2) ** (p - s * p) / (p - s * p)
        total += float(np.sum(w * cell))
        notes.append("diagonal cell restored from local Taylor model")
    semi = total ** (1 / p)
    lp = float(np.sum(w * np.sum(F**2, axis=1) ** (p / 2)) ** (1 / p))
    return SeminormReport(f"besov({p:g},{s:g})", semi + lp,
                          parts={"seminorm": semi, "lp": lp}, notes=notes)


def normalize_diameter(mesh: BoundaryMesh) -> BoundaryMesh:
    """Rescale a mesh to diameter 1 (weights scale by ``d^{-(n-1)}``)."""
    d = mesh.diameter()
    kw = {}
    if mesh.tangent is not None:
        kw["tangent"] = mesh.tangent / d
    if mesh.accel is not None:
        kw["accel"] = mesh.accel / d
    param = dict(mesh.param)
    if "radius" in param:
        param["radius"] = param["radius"] / d
        param["center"] = np.asarray(param["center"]) / d
    return dataclasses.replace(mesh, nodes=mesh.nodes / d, weights=mesh.weights / d ** (mesh.n - 1),
                               param=param, **kw)


# ----------------------------------------------------------- refinement


def _operator_field(mesh: BoundaryMesh, op: str) -> np.ndarray:
    from .operators import riesz_pv  # local import keeps module layering flat

    if op == "riesz":
        return np.stack([np.asarray(riesz_pv(mesh, j, 1.0)) for j in range(1, mesh.n + 1)], 1)
    if op.startswith("riesz") and op[5:].isdigit():
        return np.asarray(riesz_pv(mesh, int(op[5:]), 1.0))
    if op == "normal":
        return mesh.normals
    raise RegularityError(f"unknown operator id {op!r}")


def _jittered(levels, factor: float, family: str) -> list[int]:
    q = 16 if family == "square" else 8
    return [max(q, int(round(N * factor / q)) * q) for N in levels]


@dataclass
class RefinementReport:
    family: str
    op: str
    alpha: float
    verdict: str
    levels: list[int]
    seminorms: list[float]
    ratios: list[float]
    jitter: dict = field(default_factory=dict)
    stable: bool = True
    thresholds: tuple[float, float] = (1.1, 1.5)
    estimator: str = "second_difference"

    def table(self) -> list[dict]:
        rows = []
        for k, (N, v) in enumerate(zip(self.levels, self.seminorms)):
            rows.append({"level": k, "N": N, "seminorm": v,
                         "ratio": self.ratios[k - 1] if k else None})
        return rows

    def to_json(self) -> dict:
        return {"family": self.family, "op": self.op, "alpha": self.alpha,
                "verdict": self.verdict, "table": self.table(), "jitter": self.jitter,
                "stable": self.stable, "thresholds": list(self.thresholds),
                "estimator": self.estimator}


def classify(ratios, bounded: float = 1.1, divergent: float = 1.5) -> str:
    r = np.asarray(ratios, dtype=float)
    if np.all(r <= bounded):
        return "bounded"
    if np.all(r >= divergent):
        return "divergent"
    return "inconclusive"


def _study_once(family, op, alpha, levels, estimator, min_sep_factor, family_kw):
    vals = []
    for N in levels:
        mesh = make_family(family, N, **family_kw)
        field_ = _operator_field(mesh, op)
        if estimator == "second_difference":
            k0 = max(1, int(math.ceil(min_sep_factor)))
            rep = second_difference_seminorm(field_, mesh, alpha, (k0, 2 * k0))
        else:
            rep = holder_seminorm(field_, mesh, alpha, min_sep_factor * mesh.spacing())
        vals.append(rep.value)
    ratios = [b / a if a > 0 else math.inf for a, b in zip(vals, vals[1:])]
    return vals, ratios


def refinement_study(family: str, op: str = "riesz", alpha: float = 0.5,
                     levels=(256, 1024, 4096), jitter=(0.9, 1.1),
                     thresholds: tuple[float, float] = (1.1, 1.5), min_sep_factor: float = 3.0,
                     estimator: str = "second_difference", **family_kw) -> RefinementReport:
    """Hölder seminorm of an operator output across refinement levels.

    ``estimator`` is ``"second_difference"`` (node offsets ``m..2m`` with
    ``m = ceil(min_sep_factor)``, see :func:`second_difference_seminorm`)
    or ``"holder"`` (all pairs with separation at least ``min_sep_factor``
    spacings).  Either way the admissible separations are tied to each
    level's node spacing.  Verdict ``bounded`` if every successive ratio is
    at most ``thresholds[0]``, ``divergent`` if every ratio is at least
    ``thresholds[1]``.  The study is repeated with node counts scaled by
    each ``jitter`` factor; ``stable`` records whether all verdicts agree.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise RegularityError("need at least 3 refinement levels")
    if family not in {"circle", "ellipse", "square", "bump_circle"}:
        raise GeometryError(f"refinement study not defined for family {family!r}")
    if estimator not in {"second_difference", "holder"}:
        raise RegularityError(f"unknown estimator {estimator!r}")
    vals, ratios = _study_once(family, op, alpha, levels, estimator, min_sep_factor, family_kw)
    verdict = classify(ratios, *thresholds)
    jit = {}
    for fac in jitter:
        lv = _jittered(levels, fac, family)
        v, r = _study_once(family, op, alpha, lv, estimator, min_sep_factor, family_kw)
        jit[f"{fac:g}"] = {"levels": lv, "seminorms": v, "ratios": r,
                           "verdict": classify(r, *thresholds)}
    stable = all(j["verdict"] == verdict for j in jit.values())
    return RefinementReport(family, op, alpha, verdict, levels, vals, ratios, jit, stable,
                            tuple(thresholds), estimator)


def weighted_gradient_sup(points, rho, grad, alpha: float, values=None,
                          min_sep: float = 0.0) -> dict:
    """``sup rho^{1-alpha} |grad u|`` over probes, plus the Hölder seminorm on the cloud.

    The returned ``ratio`` is Hölder/weighted-sup, which the gradient lemma
    bounds by a geometric constant.
    """
    rho = np.asarray(rho, dtype=float)
    g = np.asarray(grad, dtype=float).reshape(len(rho), -1)
    wsup = float(np.max(rho ** (1 - alpha) * np.linalg.norm(g, axis=1)))
    out = {"weighted_sup": wsup, "argmax": int(np.argmax(rho ** (1 - alpha)
                                                         * np.linalg.norm(g, axis=1)))}
    if values is not None:
        hol = holder_seminorm(values, np.asarray(points, dtype=float), alpha, min_sep).value
        out["holder_on_cloud"] = hol
        out["ratio"] = hol / wsup if wsup > 0 else (0.0 if hol == 0 else math.inf)
    return out
