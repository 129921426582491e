import json
import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rieszlab.geometry import GeometryError, make_bump_circle, make_ellipse, make_square
from rieszlab.identities import trig_fields
from rieszlab.operators import boundary_to_domain, cauchy_domain
from rieszlab.regularity import (RefinementReport, RegularityError, besov_seminorm, bmo_sharp,
                                 classify, holder_seminorm, normalize_diameter,
                                 refinement_study, second_difference_seminorm, vmo_profile,
                                 weighted_gradient_sup)


def brute_holder(X, F, alpha, min_sep):
    best = 0.0
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            d = np.linalg.norm(X[i] - X[j])
            if d >= min_sep and d > 0:
                best = max(best, np.linalg.norm(F[i] - F[j]) / d**alpha)
    return best


# ---------------------------------------------------------------- Hölder

def test_holder_constant_is_zero():
    m = make_ellipse(2, 1, 64)
    assert holder_seminorm(np.full(m.N, 3.0), m, 0.5).value == 0.0


def test_holder_x1_on_circle():
    m = make_ellipse(1, 1, 64)
    rep = holder_seminorm(m.nodes[:, 0], m, 0.5, min_sep=0.0)
    assert rep.value == pytest.approx(math.sqrt(2), rel=1e-14)
    i, j = rep.argpair
    assert {i, j} == {0, 32}
    assert rep.value == pytest.approx(brute_holder(m.nodes, m.nodes[:, :1], 0.5, 0.0), rel=1e-14)


def test_holder_lower_bound_converging():
    # odd node counts never contain the antipodal pair
    vals = [holder_seminorm(make_ellipse(1, 1, N).nodes[:, 0], make_ellipse(1, 1, N), 0.5,
                            min_sep=0.0).value for N in (9, 17, 33, 65)]
    assert all(v <= math.sqrt(2) for v in vals)
    assert all(b >= a * 0.99 for a, b in zip(vals, vals[1:]))
    assert vals[-1] >= 0.99 * math.sqrt(2)


def test_holder_matches_brute_force_on_clifford_field():
    m = make_ellipse(2, 1, 48)
    F = trig_fields(m, 1, seed=1)[0]
    h = m.spacing()
    rep = holder_seminorm(F, m, 0.7)
    assert rep.value == pytest.approx(brute_holder(m.nodes, F, 0.7, 3 * h), rel=1e-13)
    i, j = rep.argpair
    assert np.linalg.norm(m.nodes[i] - m.nodes[j]) >= 3 * h


def test_holder_square_normal_jump():
    for M in (16, 64):
        m = make_square(2.0, M)
        gap = m.weights[0] / math.sqrt(2)
        assert holder_seminorm(m.normals, m, 0.5, min_sep=0.0).value >= math.sqrt(2) / gap**0.5
    grow = [holder_seminorm(make_square(2.0, M).normals, make_square(2.0, M), 0.5).value
            for M in (16, 64, 256)]
    assert grow[0] < grow[1] < grow[2]


def test_holder_errors():
    m = make_ellipse(1, 1, 16)
    with pytest.raises(RegularityError):
        holder_seminorm(m.nodes[:, 0], m, 1.0)
    with pytest.raises(RegularityError):
        holder_seminorm(m.nodes[:, 0], m, 0.5, min_sep=10.0)
    with pytest.raises(RegularityError):
        holder_seminorm(m.nodes[:, 0], m.nodes, 0.5)


def test_second_difference_closed_form():
    # f = x_1 on the unit circle: |second difference| = 2 (1 - cos kh) |cos t|,
    # largest chord 2 sin(kh/2), maximized at t = 0 and the largest offset
    N, alpha = 256, 0.5
    m = make_ellipse(1, 1, N)
    h = 2 * np.pi / N
    rep = second_difference_seminorm(m.nodes[:, 0], m, alpha, (3, 6))
    ks = np.arange(3, 7)
    want = np.max(2 * (1 - np.cos(ks * h)) / (2 * np.sin(ks * h / 2)) ** alpha)
    assert rep.value == pytest.approx(want, rel=1e-12)
    with pytest.raises(RegularityError):
        second_difference_seminorm(m.nodes[:, 0], m, alpha, (3, 200))


# ------------------------------------------------------------------- BMO

def test_bmo_constant():
    m = make_ellipse(2, 1, 128)
    rep = bmo_sharp(np.ones(m.N), m, [0.1, 0.3, 1.0])
    assert rep.value <= 1e-15
    assert_allclose(rep.curve["sup"], 0.0, atol=1e-15)


def test_vmo_profile_decays_on_ellipse():
    m = make_ellipse(2, 1, 512)
    radii = [0.025, 0.05, 0.1, 0.2, 0.4]
    prof = vmo_profile(m.normals, m, radii)
    assert np.all(np.diff(prof["sup"]) > 0)
    # the normal is Lipschitz with constant max curvature a / b^2 = 2
    assert np.all(np.array(prof["sup"]) <= 2 * np.array(radii))
    slope = np.polyfit(np.log(radii), np.log(prof["sup"]), 1)[0]
    assert 0.85 <= slope <= 1.05


def test_vmo_slope_on_bump_circle():
    m = make_bump_circle(0.5, 0.1, 4096)
    radii = np.geomspace(0.01, 0.04, 4)
    prof = vmo_profile(m.normals, m, radii)
    slope = np.polyfit(np.log(prof["radius"]), np.log(prof["sup"]), 1)[0]
    # the cusp oscillation decays like r^alpha; the smooth background like r
    assert 0.4 <= slope <= 1.05


def enumerate_square_oscillation(m, r):
    best = 0.0
    for i in range(m.N):
        d = np.linalg.norm(m.nodes - m.nodes[i], axis=1)
        ball = d < r
        w = m.weights[ball]
        mean = (w[:, None] * m.normals[ball]).sum(0) / w.sum()
        osc = (w * np.linalg.norm(m.normals[ball] - mean, axis=1)).sum() / w.sum()
        best = max(best, osc)
    return best


def test_vmo_plateau_on_square():
    m = make_square(2.0, 32)
    radii = [0.1, 0.2, 0.4]
    prof = vmo_profile(m.normals, m, radii)
    oracle = [enumerate_square_oscillation(m, r) for r in radii]
    assert_allclose(prof["sup"], oracle, rtol=1e-12)
    # two normals at a right angle with equal masses: |nu_a - nu_b| / 2
    assert_allclose(prof["sup"], math.sqrt(2) / 2, rtol=0.05)


def test_bmo_dominated_by_holder():
    m = make_ellipse(2, 1, 256)
    alpha = 0.5
    for F in trig_fields(m, 3, seed=7):
        hol = holder_seminorm(F, m, alpha, min_sep=0.0).value
        radii = [0.05, 0.1, 0.3, 0.8]
        prof = bmo_sharp(F, m, radii).curve
        for r, v in zip(prof["radius"], prof["sup"]):
            assert v <= 2 * hol * r**alpha


def test_bmo_skips_tiny_radius():
    m = make_ellipse(1, 1, 64)
    rep = bmo_sharp(m.nodes[:, 0], m, [1e-4, 0.5])
    assert rep.curve["radius"] == [0.5] and rep.notes


# ----------------------------------------------------------------- Besov

def test_besov_cosine_closed_form_and_dense_oracle():
    # |cos t - cos u|^2 / |x - y|^2 = sin^2((t + u)/2), so the seminorm is pi sqrt(2)
    exact = math.sqrt(math.pi) + math.pi * math.sqrt(2)
    m = make_ellipse(1, 1, 2048)
    rep = besov_seminorm(m.nodes[:, 0], m, 2, 0.5)
    assert abs(rep.value - exact) / exact <= 1e-4
    M = 20_000
    t = 2 * np.pi * np.arange(M) / M
    X = np.stack([np.cos(t), np.sin(t)], 1)
    h = 2 * np.pi / M
    total = 0.0
    for a in range(0, M, 500):
        D2 = np.sum((X[a:a + 500, None] - X[None]) ** 2, axis=-1)
        dF2 = (X[a:a + 500, None, 0] - X[None, :, 0]) ** 2
        np.fill_diagonal(D2[:, a:a + 500], 1.0)
        total += np.sum(dF2 / D2) * h * h
    dense = math.sqrt(total) + math.sqrt(math.pi)
    assert abs(rep.value - dense) / dense <= 1e-4


def test_besov_constant_is_lp_term():
    m = make_ellipse(2, 1, 256)
    rep = besov_seminorm(np.full(m.N, 2.0), m, 3, 0.6)
    assert rep.parts["seminorm"] == 0.0
    assert rep.value == pytest.approx(2.0 * m.total_measure ** (1 / 3), rel=1e-14)


def test_besov_monotone_in_s():
    m = normalize_diameter(make_ellipse(2, 1, 512))
    F = trig_fields(make_ellipse(2, 1, 512), 1, seed=2)[0]
    vals = [besov_seminorm(F, m, 2, s).value for s in (0.55, 0.7, 0.85, 0.95)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_besov_warns_outside_embedding():
    m = make_ellipse(1, 1, 64)
    with pytest.warns(UserWarning):
        besov_seminorm(m.nodes[:, 0], m, 1, 0.5)


def test_besov_embedding_direction():
    # sp > n - 1: Hölder-(s - 1/p) seminorm bounded by a fixed multiple of the Besov norm
    p, s = 4, 0.75
    ratios = []
    for N in (256, 512):
        base = make_ellipse(2, 1, N)
        m = normalize_diameter(base)
        for F in trig_fields(base, 3, seed=11):
            hol = holder_seminorm(F, m, s - 1 / p, min_sep=0.0).value
            ratios.append(hol / besov_seminorm(F, m, p, s).value)
    assert max(ratios) <= 5.0
    assert max(ratios) / min(ratios) <= 5.0


def test_besov_errors():
    m = make_ellipse(1, 1, 32)
    with pytest.raises(RegularityError):
        besov_seminorm(m.nodes[:, 0], m, 0.5, 0.5)
    with pytest.raises(RegularityError):
        besov_seminorm(m.nodes[:, 0], m, 2, 1.0)


# ------------------------------------------------------------ classifier

def test_classify_thresholds():
    assert classify([1.0, 1.05]) == "bounded"
    assert classify([1.6, 2.0]) == "divergent"
    assert classify([1.0, 1.6]) == "inconclusive"
    assert classify([1.2, 1.2], bounded=1.3) == "bounded"


def test_refinement_study_circle_and_report():
    rep = refinement_study("circle", alpha=0.5, levels=(64, 128, 256), jitter=(0.9,))
    assert isinstance(rep, RefinementReport)
    assert rep.verdict == "bounded" and rep.stable
    js = json.loads(json.dumps(rep.to_json()))
    assert js["table"][0]["ratio"] is None and len(js["table"]) == 3
    assert js["jitter"]["0.9"]["levels"] == [56, 112, 232]


def test_refinement_study_errors():
    with pytest.raises(RegularityError):
        refinement_study("circle", levels=(64, 128))
    with pytest.raises(GeometryError):
        refinement_study("sphere")
    with pytest.raises(RegularityError):
        refinement_study("circle", estimator="spline")
    with pytest.raises(RegularityError):
        refinement_study("circle", op="laplace", levels=(64, 128, 256), jitter=())


# ------------------------------------------------------- gradient weights

def test_weighted_gradient_linear():
    rho = np.array([0.4, 0.2, 0.1, 0.05])
    a = np.array([3.0, -4.0])
    grad = np.tile(a, (4, 1))
    out = weighted_gradient_sup(np.zeros((4, 2)), rho, grad, 0.5)
    assert out["weighted_sup"] == pytest.approx(0.4**0.5 * 5.0)
    assert out["argmax"] == 0


def test_weighted_gradient_riesz_extension_stable():
    sups = []
    for N in (512, 1024, 2048):
        m = make_ellipse(2, 1, N)
        idx = np.arange(0, N, N // 32)
        pts = np.concatenate([m.nodes[idx] - d * m.normals[idx] for d in (0.4, 0.2, 0.1)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = boundary_to_domain(m, 1, 1.0, pts)
        out = weighted_gradient_sup(pts, res.meta["rho"], res.meta["gradient"], 0.5,
                                    values=np.asarray(res), min_sep=0.05)
        assert np.isfinite(out["weighted_sup"]) and np.isfinite(out["ratio"])
        sups.append(out["weighted_sup"])
    assert max(sups) / min(sups) <= 1.05


def test_weighted_gradient_cauchy_of_one():
    m = make_ellipse(2, 1, 2048)
    idx = np.arange(0, m.N, 64)
    pts = m.nodes[idx] - 0.3 * m.normals[idx]
    h = 1e-3
    grad = np.stack([(np.asarray(cauchy_domain(m, 1.0, pts + h * e))[:, 0]
                      - np.asarray(cauchy_domain(m, 1.0, pts - h * e))[:, 0]) / (2 * h)
                     for e in np.eye(2)], 1)
    out = weighted_gradient_sup(pts, np.full(len(pts), 0.3), grad, 0.5)
    assert out["weighted_sup"] <= 1e-6
