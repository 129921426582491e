import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rieszlab.clifford import dense_embed, dense_vector_part
from rieszlab.geometry import make_ellipse, make_sphere, probe_ladder
from rieszlab.identities import trig_fields
from rieszlab.kernels import (KernelError, PolyKernel, RieszKernel, SeriesKernel, jump_symbol,
                              omega)
from rieszlab.operators import (CliffordField, OperatorError, ScalarField, bilinear,
                                boundary_to_domain, cauchy_domain, cauchy_pv,
                                cauchy_truncation_bound, double_layer, generalized_pv,
                                grad_single_layer, nontangential_trace, recover_normal,
                                riesz_maximal, riesz_pv, riesz_truncated, single_layer,
                                truncation_crosscheck)
from rieszlab.polynomials import parse_poly
from rieszlab.spherical import expand_on_sphere


def dense_circle(M):
    t = 2 * np.pi * np.arange(M) / M
    return np.stack([np.cos(t), np.sin(t)], 1), 2 * np.pi / M


# ---------------------------------------------------------------- kernels

def test_omega():
    assert abs(omega(2) - 2 * np.pi) <= 1e-14
    assert abs(omega(3) - 4 * np.pi) <= 1e-14


@pytest.mark.parametrize("kernel", [RieszKernel(2, 1), RieszKernel(3, 2), RieszKernel(4, 4),
                                    PolyKernel(parse_poly("x1*x2*x3", 3)),
                                    PolyKernel(parse_poly("x1^3", 2))])
def test_kernel_parity_and_homogeneity(kernel):
    rep = kernel.check_parity(np.random.default_rng(1))
    assert rep["passed"], rep


def test_kernel_gradient_matches_finite_difference():
    rng = np.random.default_rng(2)
    v = rng.standard_normal((10, 3))
    for k in (RieszKernel(3, 2), PolyKernel(parse_poly("x1*x2*x3", 3))):
        h = 1e-6
        fd = np.stack([(k(v + h * e) - k(v - h * e)) / (2 * h) for e in np.eye(3)], 1)
        assert_allclose(k.gradient(v), fd, rtol=1e-6, atol=1e-8)


def test_kernel_errors():
    with pytest.raises(KernelError):
        RieszKernel(3, 4)
    with pytest.raises(KernelError):
        PolyKernel(parse_poly("x1*x2", 2))


def test_field_validation():
    m = make_ellipse(1, 1, 16)
    with pytest.raises(OperatorError):
        ScalarField(m, np.zeros(15))
    with pytest.raises(OperatorError):
        ScalarField(m, np.full(16, np.nan))
    with pytest.raises(OperatorError):
        CliffordField(m, np.zeros((16, 8)))


# -------------------------------------------------------------- truncated

def test_truncated_empty_beyond_diameter():
    m = make_ellipse(2, 1, 128)
    assert np.all(riesz_truncated(m, 1, 1.0, 4.5) == 0)


def test_truncated_circle_against_dense_oracle():
    # closed form: (x - y)_1 / |x - y|^2 = 1/2 on the unit circle at x = (1, 0),
    # and |x - y| > 1 on an arc of length 4 pi / 3, so the value is 1/3
    M = 1_000_000
    Y, h = dense_circle(M)
    V = np.array([1.0, 0.0]) - Y
    r2 = np.sum(V * V, axis=1)
    far = r2 > 1.0
    oracle = np.sum(V[far, 0] / r2[far]) * h / (2 * np.pi)
    assert abs(oracle - 1 / 3) <= 1e-6
    m = make_ellipse(1, 1, M)
    got = riesz_truncated(m, 1, 1.0, 1.0, x=0)
    assert abs(got - oracle) <= 1e-12
    assert abs(riesz_truncated(m, 2, 1.0, 1.0, x=0)) <= 1e-12


def test_maximal():
    m = make_ellipse(1, 1, 256)
    ladder = [0.5, 0.2, 0.1, 0.05]
    pv = np.asarray(riesz_pv(m, 1, 1.0))
    # sup over eps > 0 dominates the eps -> 0 limit
    mx = riesz_maximal(m, 1, 1.0, ladder, include_limit=True)
    assert np.all(mx >= np.abs(pv))
    # a finite ladder approaches nu_1 / 2 from below on the circle: (1/2)(1 - arc(eps)/2pi)
    arc = 4 * np.arcsin(np.array(ladder) / 2)
    assert_allclose(riesz_maximal(m, 1, 1.0, ladder).max(), 0.5 * (1 - arc[-1] / (2 * np.pi)),
                    atol=2 / m.N)
    assert np.all(riesz_maximal(m, 1, 0.0, ladder) == 0)
    assert_allclose(riesz_maximal(m, 2, 1.0, [0.3]), np.abs(riesz_truncated(m, 2, 1.0, 0.3)))
    with pytest.raises(OperatorError):
        riesz_maximal(m, 1, 1.0, [0.1, 0.2])


# ---------------------------------------------------------- principal value

@pytest.mark.parametrize("N", [64, 512])
def test_riesz_of_one_on_circle(N):
    m = make_ellipse(1, 1, N)
    for j in (1, 2):
        assert_allclose(np.asarray(riesz_pv(m, j, 1.0)), m.normals[:, j - 1] / 2, atol=1e-12)


def test_riesz_of_one_on_sphere():
    m = make_sphere(1.0, 16, 32)
    for j in (1, 2, 3):
        assert_allclose(np.asarray(riesz_pv(m, j, 1.0)), m.normals[:, j - 1] / 2, atol=1e-4)


def test_riesz_of_normal_on_circle_closed_form():
    # Hilbert-transform computation: R(nu_1) = (-nu_2^2 / 2, nu_1 nu_2 / 2)
    m = make_ellipse(1, 1, 1024)
    nu = m.normals
    assert_allclose(np.asarray(riesz_pv(m, 1, nu[:, 0])), -nu[:, 1] ** 2 / 2, atol=1e-10)
    assert_allclose(np.asarray(riesz_pv(m, 2, nu[:, 0])), nu[:, 0] * nu[:, 1] / 2, atol=1e-10)


def test_riesz_pv_ellipse_matches_truncation_mode():
    m = make_ellipse(2, 1, 1024)
    f = np.cos(m.param["theta"]) + 0.3 * np.sin(2 * m.param["theta"])
    res = riesz_pv(m, 1, f, crosscheck=8)
    assert res.meta["crosscheck"]["agree"]
    assert res.meta["crosscheck"]["max_diff"] <= 1e-6


def test_generalized_riesz_equivalence():
    m = make_ellipse(2, 1, 256)
    f = np.sin(m.param["theta"])
    P = PolyKernel(parse_poly("x2", 2), 1 / (2 * np.pi))
    assert_allclose(np.asarray(generalized_pv(m, P, f)), np.asarray(riesz_pv(m, 2, f)),
                    atol=1e-14)
    assert_allclose(np.asarray(generalized_pv(m, RieszKernel(2, 2), f)),
                    np.asarray(riesz_pv(m, 2, f)), atol=0)


def test_nonharmonic_kernel_is_sum_of_parts():
    m = make_ellipse(2, 1, 512)
    f = np.cos(m.param["theta"])
    k = PolyKernel(parse_poly("x1^3", 2))
    whole = np.asarray(generalized_pv(m, k, f))
    parts = sum(np.asarray(generalized_pv(m, p, f)) for p in k.harmonic_parts())
    assert len(k.harmonic_parts()) == 2
    assert_allclose(whole, parts, atol=1e-10)


def test_exclusion_truncation_agreement_all_kernels():
    m = make_ellipse(2, 1, 1024)
    t = m.param["theta"]
    exp = expand_on_sphere(np.sin(3 * np.arange(64) * 2 * np.pi / 64)
                           + np.cos(np.arange(64) * 2 * np.pi / 64), 9, n=2)
    for k in (RieszKernel(2, 1), PolyKernel(parse_poly("x1^3 - 3*x1*x2^2", 2)),
              SeriesKernel(exp)):
        for f in (np.ones(m.N), m.normals[:, 1], np.cos(2 * t)):
            res = generalized_pv(m, k, f, crosscheck=4)
            cc = res.meta["crosscheck"]
            assert cc["agree"], (k.name, cc["max_diff"])


def test_anti_self_adjoint():
    m = make_ellipse(2, 1, 1024)
    t = m.param["theta"]
    f, g = np.cos(t) + np.sin(3 * t), np.sin(2 * t) - 0.5 * np.cos(t)
    for k in (RieszKernel(2, 1), RieszKernel(2, 2), PolyKernel(parse_poly("x1^3", 2))):
        a = bilinear(m, np.asarray(generalized_pv(m, k, f)), g)
        b = bilinear(m, f, np.asarray(generalized_pv(m, k, g)))
        assert abs(a + b) <= 1e-8


# --------------------------------------------------------- boundary to domain

def test_boundary_to_domain_examples():
    m = make_ellipse(1, 1, 512)
    z = np.array([[0.0, 0.0]])
    assert np.all(np.asarray(boundary_to_domain(m, 1, 0.0, z)) == 0)
    assert abs(np.asarray(boundary_to_domain(m, 1, 1.0, z))[0]) <= 1e-15
    s = make_sphere(1.0, 16, 32)
    val = boundary_to_domain(s, PolyKernel(parse_poly("x1*x2*x3", 3)), 1.0, [[0, 0, 0]])
    assert abs(np.asarray(val)[0]) <= 1e-14


def test_boundary_to_domain_dense_oracle():
    z = np.array([0.31, -0.42])
    M = 1_000_000
    Y, h = dense_circle(M)
    f = lambda P: np.cos(np.arctan2(P[:, 1], P[:, 0])) ** 2 + P[:, 1]  # noqa: E731
    V = z - Y
    oracle = np.sum(V[:, 0] / np.sum(V * V, axis=1) * f(Y)) * h / (2 * np.pi)
    m = make_ellipse(1, 1, 512)
    got = np.asarray(boundary_to_domain(m, 1, f(m.nodes), [z]))[0]
    assert abs(got - oracle) <= 1e-8


def test_boundary_to_domain_diagnostics():
    m = make_ellipse(2, 1, 512)
    res = boundary_to_domain(m, 1, 1.0, [[0.0, 0.0], [1.5, 0.2]])
    assert res.meta["sup_abs"] >= 0 and np.isfinite(res.meta["weighted_grad_sup"])
    with pytest.raises(OperatorError):
        boundary_to_domain(m, 1, 1.0, [m.nodes[0]])


# -------------------------------------------------------------- Cauchy

def test_cauchy_domain_reproduces_one():
    m = make_ellipse(2, 1, 2048)
    idx = np.arange(0, m.N, 64)
    inside = m.nodes[idx] - 0.2 * m.normals[idx]
    outside = m.nodes[idx] + 0.2 * m.normals[idx]
    one = np.eye(4)[0]
    assert np.abs(np.asarray(cauchy_domain(m, 1.0, inside)) - one).max() <= 1e-6
    assert np.abs(np.asarray(cauchy_domain(m, 1.0, outside))).max() <= 1e-6


def test_double_layer_is_scalar_part_of_cauchy():
    m = make_ellipse(2, 1, 512)
    f = np.cos(m.param["theta"]) ** 3
    pts = np.array([[0.3, 0.2], [-1.0, 0.1], [3.0, 1.0]])
    c = np.asarray(cauchy_domain(m, f, pts))
    assert_allclose(c[:, 0], np.asarray(double_layer(m, f, pts)), atol=1e-13)


def test_cauchy_pv_examples():
    m = make_ellipse(1, 1, 512)
    one = np.eye(4)[0]
    assert_allclose(np.asarray(cauchy_pv(m, 1.0)), np.tile(one / 2, (m.N, 1)), atol=0)
    assert_allclose(np.asarray(cauchy_pv(m.flipped(), 1.0)), np.tile(-one / 2, (m.N, 1)), atol=0)
    nu = dense_embed(m.normals)
    assert_allclose(np.asarray(cauchy_pv(m, nu)), -nu / 2, atol=1e-12)


def test_cauchy_pv_truncation_mode():
    m = make_ellipse(2, 1, 1024)
    res = cauchy_pv(m, 1.0, crosscheck=6)
    est = np.asarray(res.meta["crosscheck"]["estimate"])
    assert np.abs(est - np.eye(4)[0] / 2).max() <= 1e-3


def test_cauchy_square_identity():
    m = make_ellipse(2, 1, 2048)
    for F in trig_fields(m, 6, seed=3):
        gg = np.asarray(cauchy_pv(m, np.asarray(cauchy_pv(m, F))))
        assert np.abs(gg - F / 4).max() / np.abs(F).max() <= 5e-3


def test_recover_normal():
    rec = recover_normal(make_ellipse(1, 1, 2048))
    assert rec["max_error"] <= 1e-6
    # the corrected scheme is already at round-off, so monotonicity is checked on the
    # first-order exclusion scheme
    errs = [recover_normal(make_ellipse(2, 1, N))["max_error"] for N in (512, 1024, 2048)]
    assert max(errs) <= 1e-10
    excl = [recover_normal(make_ellipse(2, 1, N), mode="exclusion")["max_error"]
            for N in (512, 1024, 2048)]
    assert excl[0] > excl[1] > excl[2]


def test_truncation_bound_stable():
    ladder = [0.5, 0.2, 0.1, 0.05]
    b = [cauchy_truncation_bound(make_ellipse(2, 1, N), ladder) for N in (256, 512, 1024)]
    assert all(np.isfinite(b))
    assert abs(b[2] - b[1]) <= 0.05 * b[1]


# ---------------------------------------------------------- layer potentials

def test_single_layer_centres():
    c = make_ellipse(1, 1, 256)
    assert abs(np.asarray(single_layer(c, 1.0, [[0.0, 0.0]]))[0]) <= 1e-6
    s = make_sphere(1.0, 16, 32)
    assert abs(np.asarray(single_layer(s, 1.0, [[0.0, 0.0, 0.0]]))[0] + 1) <= 1e-6


def test_double_layer_one():
    m = make_ellipse(2, 1, 1024)
    pts = np.array([[0.0, 0.0], [1.2, 0.3], [-0.5, -0.5]])
    assert_allclose(np.asarray(double_layer(m, 1.0, pts)), 1.0, atol=1e-6)


def test_grad_single_layer_two_ways():
    m = make_ellipse(2, 1, 1024)
    pts = np.array([[0.2, 0.1], [1.0, -0.3], [-1.3, 0.2]])
    g = grad_single_layer(m, np.cos(m.param["theta"]), pts)
    fd = g.meta["finite_difference"]
    assert np.abs(fd - np.asarray(g)).max() <= 1e-4 * max(1.0, np.abs(fd).max())


# ---------------------------------------------------------------- traces

def test_trace_of_constant():
    m = make_ellipse(1, 1, 128)
    p = probe_ladder(m, 3, 0.2, 0.5, 5)
    tr = nontangential_trace(lambda Z: np.full(len(Z), 2.5), p)
    assert tr.limit[0] == 2.5 and tr.uncertainty == 0.0 and not tr.flagged


def test_trace_needs_three_probes():
    m = make_ellipse(1, 1, 128)
    p = probe_ladder(m, 3, 0.2, 0.5, 2)
    with pytest.raises(OperatorError):
        nontangential_trace(lambda Z: np.zeros(len(Z)), p)


def test_cauchy_jump_formula():
    m = make_ellipse(2, 1, 1024)
    F = trig_fields(m, 1, seed=5)[0]
    pv = np.asarray(cauchy_pv(m, F))
    h = m.local_spacing()
    for i in (0, 200, 400, 700):
        p = probe_ladder(m, i, 0.1, 0.5, 7)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tr = nontangential_trace(lambda Z: cauchy_domain(m, F, Z).values, p, min_rho=2 * h[i])
        assert np.abs(tr.limit - (pv[i] + F[i] / 2)).max() <= 1e-2 * np.abs(F).max()


def test_riesz_trace_jump_is_minus_normal():
    m = make_ellipse(2, 1, 1024)
    h = m.local_spacing()
    for i in (50, 300, 777):
        lims = []
        for mesh in (m, m.flipped()):
            p = probe_ladder(mesh, i, 0.1, 0.5, 7)
            tr = nontangential_trace(
                lambda Z: np.stack([boundary_to_domain(m, j, 1.0, Z, diagnostics=False).values
                                    for j in (1, 2)], 1), p, min_rho=2 * h[i])
            lims.append(tr.limit)
        assert_allclose(lims[0] - lims[1], -m.normals[i], atol=1e-3)


# ---------------------------------------------------------------- symbols

@pytest.mark.parametrize("n", [2, 3, 4])
def test_jump_symbol_riesz(n):
    rng = np.random.default_rng(n)
    nu = rng.standard_normal(n)
    nu /= np.linalg.norm(nu)
    for j in range(1, n + 1):
        k = RieszKernel(n, j)
        assert abs(jump_symbol(k, nu) + nu[j - 1] / 2) <= 1e-12
        assert jump_symbol(k, -nu) == pytest.approx(-jump_symbol(k, nu), abs=1e-15)


def test_jump_symbol_series_single_mode():
    t = 2 * np.pi * np.arange(64) / 64
    exp = expand_on_sphere(0.4 * np.cos(3 * t) - 0.1 * np.sin(3 * t), 9, n=2)
    series = SeriesKernel(exp)
    poly = next(k for k in series.modes if k.l == 3)
    nu = np.array([math.cos(0.7), math.sin(0.7)])
    assert jump_symbol(series, nu) == pytest.approx(jump_symbol(poly, nu), abs=1e-12)


def test_grad_via_cauchy_is_vector_valued():
    m = make_ellipse(2, 1, 256)
    nu = dense_embed(m.normals)
    c = np.asarray(cauchy_domain(m, nu, [[0.1, 0.2]]))
    # -C(nu) is the gradient of S1: scalar and bivector parts vanish
    assert abs(c[0, 0]) <= 1e-12 and abs(c[0, 3]) <= 1e-12
    assert dense_vector_part(c, 2).shape == (1, 2)


def test_crosscheck_targets_reported():
    m = make_ellipse(2, 1, 256)
    cc = truncation_crosscheck(m, 1, 1.0, targets=3)
    assert len(cc["estimate"]) == 3 and np.all(cc["uncertainty"] >= 0)
