import numpy as np
import pytest

import spectral_coords.gallery as gallery
from spectral_coords.errors import NonPositiveDiagonal
from spectral_coords.geometry import (FIRST_DERIVATIVE_FD,
                                      SECOND_DERIVATIVE_FD, build_report,
                                      check_immersion, check_systems,
                                      christoffel_and_riemann,
                                      epsilon_invariant, jacobian, lame,
                                      metric, rotation)

rng = np.random.default_rng(20240814)


def polar_map(us):
    us = np.asarray(us, dtype=float)
    r = np.exp(us[:, 0])
    return np.stack([r * np.cos(us[:, 1]), r * np.sin(us[:, 1])], axis=1)


def test_jacobian_of_plain_callable():
    u = np.array([0.3, 0.7])
    J = jacobian(polar_map, u)
    r = np.exp(u[0])
    expected = np.array([
        [r * np.cos(u[1]), -r * np.sin(u[1])],
        [r * np.sin(u[1]), r * np.cos(u[1])],
    ])
    assert np.allclose(J, expected, atol=1e-9)


def test_jacobian_accepts_spectral_data_directly():
    data = gallery.build("polar").data
    u = np.array([0.1, -0.2])
    assert np.allclose(jacobian(data, u), jacobian(polar_map, u), atol=1e-9)


def test_metric_is_diagonal_with_known_scale_factors():
    u = np.array([-0.2, 0.9])
    g, imag_max = metric(gallery.build("polar").data, u)
    assert imag_max < 1e-9
    r2 = np.exp(2 * u[0])
    assert g[0, 0] == pytest.approx(r2, rel=1e-7)
    assert g[1, 1] == pytest.approx(r2, rel=1e-7)
    assert abs(g[0, 1]) < 1e-9
    assert np.allclose(lame(g), [np.exp(u[0])] * 2, rtol=1e-7)


def test_lame_rejects_nonpositive_metric():
    with pytest.raises(NonPositiveDiagonal):
        lame(np.diag([1.0, -2.0]))
    with pytest.raises(NonPositiveDiagonal):
        lame(np.zeros((2, 2)))


def test_rotation_closed_form():
    # both scale factors are e^{u1}, so the only nonzero coefficient is
    # the (1,2) one and it equals 1
    u = np.array([0.25, -0.4])
    beta = rotation(gallery.build("polar").data, u)
    assert beta[0, 1] == pytest.approx(1.0, abs=1e-6)
    assert abs(beta[1, 0]) < 1e-6
    assert abs(beta[0, 0]) < 1e-6 and abs(beta[1, 1]) < 1e-6


def test_system_families_by_dimension():
    res2 = check_systems(gallery.build("polar").data, np.array([0.1, 0.2]))
    assert res2.eq1 == [] and res2.eq4 == []
    assert len(res2.eq2) == 1 and len(res2.eq5) == 1

    res3 = check_systems(gallery.build("spherical3").data,
                         np.array([0.1, -0.1, 0.2]))
    assert len(res3.eq1) == 3
    assert len(res3.eq2) == 3
    assert len(res3.eq4) == 6
    assert len(res3.eq5) == 3
    assert res3.max_abs() < 1e-5


def test_flat_metrics_have_vanishing_curvature():
    for name in ("euclidean2", "polar", "example2"):
        data = gallery.build(name).data
        u = rng.uniform(-0.3, 0.3, size=data.n)
        _, riemann_max = christoffel_and_riemann(data, u)
        assert riemann_max < 1e-5, name


def test_christoffel_closed_form_for_conformal_factor():
    u = np.array([0.2, 0.5])
    gamma, _ = christoffel_and_riemann(gallery.build("polar").data, u)
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = 1.0
    expected[0, 1, 1] = -1.0
    expected[1, 0, 1] = expected[1, 1, 0] = 1.0
    assert np.allclose(gamma, expected, atol=1e-5)


def test_immersion_system_closes():
    for name in ("polar", "example3"):
        data = gallery.build(name).data
        u = rng.uniform(-0.3, 0.3, size=data.n)
        assert check_immersion(data, u) < 1e-6, name


def test_epsilon_ratio_is_parameter_independent():
    data = gallery.build("example1").data
    us = rng.uniform(-0.4, 0.4, size=(5, data.n))
    spread = epsilon_invariant(data, us)
    assert spread.shape == (data.n,)
    assert np.max(spread) < 1e-6


def test_build_report_fields_and_serialization():
    report = build_report(gallery.build("polar").data, np.array([0.0, 1.0]))
    assert report.x[0][0] == pytest.approx(np.cos(1.0), abs=1e-10)
    assert report.x[1][0] == pytest.approx(np.sin(1.0), abs=1e-10)
    assert report.imag_max < 1e-10
    assert report.g_offdiag_max < 1e-9
    assert report.lame == pytest.approx([1.0, 1.0], rel=1e-7)
    assert report.eq1_max == 0.0  # empty family for n = 2
    assert report.eq5_max < 1e-5
    assert report.riemann_max < 1e-5
    assert report.immersion_max < 1e-6
    blob = report.to_json()
    assert set(blob) == {
        "u", "x", "imag_max", "g_offdiag_max", "lame", "rotation",
        "eq1_max", "eq2_max", "eq4_max", "eq5_max", "riemann_max",
        "immersion_max"}


def test_fd_tiers_are_distinct():
    assert FIRST_DERIVATIVE_FD.h < SECOND_DERIVATIVE_FD.h
    assert FIRST_DERIVATIVE_FD.order == 2
    assert SECOND_DERIVATIVE_FD.order == 4
