import math

import numpy as np
import pytest

from spectral_coords.dressing import (Factor, Grid, KernelSpec, PhiEntry,
                                      _cumulative_integral, build_F,
                                      check_beta_systems, check_F_equations,
                                      lame_from_rotation,
                                      rotation_from_dressing, solve_marchenko,
                                      solve_marchenko_kernel)
from spectral_coords.errors import (IncompatibleField, InputError,
                                    SingularFredholm, TailTooFat)

rng = np.random.default_rng(20240816)


def make_spec3() -> KernelSpec:
    g = lambda *a: Factor("gaussian", *a)
    return KernelSpec(3, (
        PhiEntry(1, 1, g(0.3, 1.2, 0.4), g(0.25, 0.9, -0.2)),
        PhiEntry(1, 2, g(0.4, 1.0, 0.3), g(0.35, 1.1, 0.1)),
        PhiEntry(1, 3, g(0.3, 1.1, -0.1), g(0.2, 1.0, 0.25)),
        PhiEntry(2, 2, g(0.2, 1.3, 0.2), g(0.3, 0.8, 0.5)),
        PhiEntry(2, 3, g(0.25, 0.9, 0.15), g(0.3, 1.2, -0.3)),
        PhiEntry(3, 3, g(0.35, 1.0, 0.0), g(0.15, 1.1, 0.3)),
    ))


def make_spec2() -> KernelSpec:
    full = make_spec3()
    kept = [e for e in full.entries if (e.i, e.j) in ((1, 1), (1, 2), (2, 2))]
    return KernelSpec(2, kept)


GRID = Grid(s=-2.0, s_max=7.0, N=160)


# -- factors and specs ------------------------------------------------------

@pytest.mark.parametrize("factor", [
    Factor("gaussian", 0.7, 1.3, 0.2),
    Factor("bump", 0.5, 2.0, -0.3),
])
def test_factor_derivative_matches_fd(factor):
    ts = np.linspace(-1.2, 1.2, 9)
    h = 1e-6
    fd = (factor.value(ts + h) - factor.value(ts - h)) / (2 * h)
    assert np.max(np.abs(factor.dvalue(ts) - fd)) < 1e-7


def test_bump_is_compactly_supported():
    f = Factor("bump", 1.0, 0.5, 0.0)
    assert f.value(0.51) == 0.0
    assert f.dvalue(-0.6) == 0.0
    assert f.value(0.0) == pytest.approx(math.exp(-1.0))


def test_factor_validation_and_json_keys():
    with pytest.raises(InputError):
        Factor("lorentzian", 1.0, 1.0, 0.0)
    with pytest.raises(InputError):
        Factor("gaussian", 1.0, 0.0, 0.0)
    assert "rate" in Factor("gaussian", 1.0, 2.0, 0.0).to_json()
    assert "width" in Factor("bump", 1.0, 2.0, 0.0).to_json()


def test_kernel_spec_rejects_bad_entries():
    g = Factor("gaussian", 1.0, 1.0, 0.0)
    with pytest.raises(InputError):
        KernelSpec(2, (PhiEntry(2, 1, g, g),))
    with pytest.raises(InputError):
        KernelSpec(2, (PhiEntry(1, 3, g, g),))
    with pytest.raises(InputError):
        KernelSpec(2, (PhiEntry(1, 2, g, g), PhiEntry(1, 2, g, g)))


def test_kernel_spec_json_round_trip():
    spec = make_spec3()
    again = KernelSpec.from_json(spec.to_json())
    assert again == spec
    with pytest.raises(InputError):
        KernelSpec.from_json({"phi": []})
    with pytest.raises(InputError):
        KernelSpec.from_json({"n": 1, "phi": [{"i": 1, "j": 1,
                                               "family": "poly-product",
                                               "params": {}}]})


# -- the kernel matrix ------------------------------------------------------

def test_build_F_entry_conventions():
    spec = make_spec2()
    u = np.array([0.1, -0.2])
    s, sp = 0.4, -0.3
    F = build_F(spec, u, s, sp)
    e12 = spec.entry(1, 2)
    assert F[0, 1] == pytest.approx(e12.d1(s - u[0], sp - u[1]))
    assert F[1, 0] == pytest.approx(-e12.d2(sp - u[0], s - u[1]))
    e11 = spec.entry(1, 1)
    assert F[0, 0] == pytest.approx(e11.d1(s - u[0], sp - u[0]))


def test_build_F_broadcasts():
    spec = make_spec2()
    qa = np.linspace(-1, 1, 4)[:, None]
    qb = np.linspace(-1, 1, 3)[None, :]
    F = build_F(spec, np.zeros(2), qa, qb)
    assert F.shape == (2, 2, 4, 3)


@pytest.mark.parametrize("u", [np.zeros(3), np.array([0.3, -0.1, 0.2])])
def test_kernel_satisfies_both_structure_systems(u):
    res10, res12 = check_F_equations(make_spec3(), u)
    assert res10 < 1e-6
    assert res12 < 1e-6


def test_wrong_off_diagonal_sign_breaks_reduction():
    spec = make_spec2()

    class Flipped:
        n = spec.n
        entries = spec.entries

        def entry(self, i, j):
            return spec.entry(i, j)

    flipped = Flipped()
    ref = build_F(spec, np.zeros(2), 0.3, -0.4)
    h = 1e-4
    # flipping the sign of the lower block makes the reduction residual
    # jump from FD noise to order one
    def res12_of(sign):
        worst = 0.0
        for s in (-0.5, 0.2):
            for sp in (-0.1, 0.4):
                def F(a, b):
                    out = build_F(spec, np.zeros(2), a, b)
                    out[1, 0] *= sign
                    return out
                dFdsp = (F(s, sp + h) - F(s, sp - h)) / (2 * h)
                dswap = (F(sp, s + h) - F(sp, s - h)) / (2 * h)
                worst = max(worst, float(np.max(np.abs(dFdsp + dswap.T))))
        return worst

    assert ref.shape == (2, 2)
    assert res12_of(+1.0) < 1e-6
    assert res12_of(-1.0) > 1e-3


# -- quadrature grids -------------------------------------------------------

def test_grid_weights_sum_to_span():
    for rule in ("trapezoid", "gauss-legendre"):
        g = Grid(s=-1.0, s_max=3.0, N=33, rule=rule)
        q, w = g.nodes()
        assert q.shape == w.shape == (33,)
        assert np.sum(w) == pytest.approx(4.0)
        assert q.min() >= -1.0 and q.max() <= 3.0


def test_gauss_rule_is_high_order():
    g = Grid(s=0.0, s_max=1.0, N=8)
    q, w = g.nodes()
    for p in range(15):
        assert np.sum(w * q ** p) == pytest.approx(1.0 / (p + 1), abs=1e-14)


def test_grid_validation():
    with pytest.raises(InputError):
        Grid(s=1.0, s_max=0.0)
    with pytest.raises(InputError):
        Grid(s=0.0, s_max=1.0, N=4)
    with pytest.raises(InputError):
        Grid(s=0.0, s_max=1.0, rule="simpson")


# -- Marchenko solve --------------------------------------------------------

def rank_one_pair():
    phi = Factor("gaussian", 0.4, 1.3, 0.5)
    psi = Factor("gaussian", 0.3, 0.9, -0.2)
    return phi, psi


def rank_one_F(phi, psi):
    def F_fn(qa, qb):
        rows = phi.value(np.asarray(qa))[:, None]
        cols = psi.value(np.asarray(qb))[None, :]
        return (rows * cols)[None, None]
    return F_fn


def rank_one_exact(phi, psi, s, sp):
    """For F(a,b) = phi(a) psi(b) the solution is explicit:
    K(s,s') = phi(s) psi(s') / (1 - m(s)) with m the tail integral of
    phi*psi, a scaled complementary error function."""
    r = phi.width + psi.width
    cm = (phi.width * phi.center + psi.width * psi.center) / r
    pref = phi.amp * psi.amp * math.exp(
        -phi.width * psi.width * (phi.center - psi.center) ** 2 / r)
    m = pref * math.sqrt(math.pi / r) * 0.5 * math.erfc(
        math.sqrt(r) * (s - cm))
    return phi.value(s) * psi.value(sp) / (1.0 - m)


def test_rank_one_solution_matches_closed_form():
    phi, psi = rank_one_pair()
    grid = Grid(s=-2.0, s_max=6.0, N=200)
    sol = solve_marchenko_kernel(rank_one_F(phi, psi), 1, grid)
    assert sol.residual < 1e-12
    worst = 0.0
    for sp in (-2.0, -1.0, 0.0, 0.7, 2.5):
        got = float(sol.k_at(sp)[0, 0])
        worst = max(worst, abs(got - rank_one_exact(phi, psi, grid.s, sp)))
    assert worst < 1e-8


def test_interpolation_reproduces_nodes():
    sol = solve_marchenko(make_spec2(), np.zeros(2), GRID)
    j = 57
    assert np.allclose(sol.k_at(sol.q[j]), sol.K_nodes[:, :, j], atol=1e-10)


def test_trapezoid_error_halves_twice_per_refinement():
    phi, psi = rank_one_pair()
    F_fn = rank_one_F(phi, psi)

    def err(N):
        grid = Grid(s=-2.0, s_max=6.0, N=N, rule="trapezoid")
        sol = solve_marchenko_kernel(F_fn, 1, grid)
        return abs(float(sol.diagonal()[0, 0])
                   - rank_one_exact(phi, psi, grid.s, grid.s))

    ratio = err(100) / err(200)
    assert 3.5 < ratio < 4.5


def test_fat_tail_is_refused():
    spec = KernelSpec(1, (PhiEntry(
        1, 1, Factor("gaussian", 0.5, 1.0, 6.5),
        Factor("gaussian", 0.4, 1.0, 0.0)),))
    with pytest.raises(TailTooFat):
        solve_marchenko(spec, np.zeros(1), Grid(s=-2.0, s_max=7.0, N=64))


def test_unit_mass_kernel_is_singular():
    # tuned so the tail integral of phi*psi from s is 1 to machine
    # precision, putting an eigenvalue of the discretized operator at 0
    a1 = 0.8
    phi = Factor("gaussian", a1, 1.0, 0.0)
    psi = Factor("gaussian", 1.0 / (a1 * math.sqrt(math.pi / 2.0)), 1.0, 0.0)
    with pytest.raises(SingularFredholm):
        solve_marchenko_kernel(rank_one_F(phi, psi), 1,
                               Grid(s=-5.0, s_max=9.0, N=200))


# -- rotation coefficients from the kernel ----------------------------------

def test_dressed_rotation_satisfies_both_systems():
    spec = make_spec3()
    u0 = np.array([0.15, -0.1, 0.2])
    res = check_beta_systems(
        lambda u: rotation_from_dressing(spec, u, GRID), 3, u0)
    assert max(abs(v) for v in res.eq4) < 1e-7
    assert max(abs(v) for v in res.eq5) < 1e-7


def test_untransposed_extraction_fails_the_skew_system():
    spec = make_spec3()
    u0 = np.array([0.15, -0.1, 0.2])
    raw = lambda u: solve_marchenko(spec, u, GRID).diagonal()
    res = check_beta_systems(raw, 3, u0)
    assert max(abs(v) for v in res.eq4) < 1e-6  # insensitive to transpose
    assert max(abs(v) for v in res.eq5) > 1e-5  # discriminates


def test_two_axis_spec_has_no_triple_system():
    res = check_beta_systems(
        lambda u: rotation_from_dressing(make_spec2(), u, GRID), 2,
        np.array([0.1, -0.05]))
    assert res.eq4 == []
    assert len(res.eq5) == 1
    assert abs(res.eq5[0]) < 1e-6


# -- scale factors from a rotation field ------------------------------------

def translated_frame():
    """Closed-form compatible field: H1 = 1, H2 = u1 + 2,
    H3 = (u1 + 2) sin(u2 + 0.8)."""

    def beta_fn(u):
        out = np.zeros((3, 3))
        out[0, 1] = 1.0
        out[0, 2] = np.sin(u[1] + 0.8)
        out[1, 2] = np.cos(u[1] + 0.8)
        return out

    def H_exact(G1, G2):
        return np.stack([np.ones_like(G1), G1 + 2.0,
                         (G1 + 2.0) * np.sin(G2 + 0.8)])

    # each line lives on its own axis with the other coordinates at 0,
    # so the second one is the constant 2, not 2 + u^2
    cauchy = [
        lambda t: np.ones_like(t),
        lambda t: 2.0 * np.ones_like(t),
        lambda t: 2.0 * np.sin(0.8) * np.ones_like(t),
    ]
    return beta_fn, H_exact, cauchy


def test_closed_field_systems_vanish():
    # the residual floor is the h^2 truncation of the central difference
    beta_fn, _, _ = translated_frame()
    res = check_beta_systems(beta_fn, 3, np.array([0.2, -0.3, 0.1]))
    assert res.max_abs() < 1e-6


def test_lame_reconstruction_trivial_field():
    axes = [np.linspace(-0.5, 0.5, 11)] * 2
    result = lame_from_rotation(
        lambda u: np.zeros((2, 2)),
        [np.exp, lambda t: 1.0 + t ** 2], axes)
    assert result.path_spread == 0.0
    G1, G2 = np.meshgrid(*axes, indexing="ij")
    assert np.allclose(result.H[0], np.exp(G1), atol=1e-14)
    assert np.allclose(result.H[1], 1.0 + G2 ** 2, atol=1e-14)


def test_lame_reconstruction_conformal_pair():
    # beta_12 = 1, beta_21 = 0 integrates back to H1 = H2 = e^{u1}
    axes = [np.linspace(-0.5, 0.5, 41)] * 2

    def beta_fn(u):
        return np.array([[0.0, 1.0], [0.0, 0.0]])

    result = lame_from_rotation(
        beta_fn, [np.exp, lambda t: np.ones_like(t)], axes)
    G1, _ = np.meshgrid(*axes, indexing="ij")
    assert np.max(np.abs(result.H[0] - np.exp(G1))) < 1e-8
    assert np.max(np.abs(result.H[1] - np.exp(G1))) < 1e-7
    assert result.path_spread < 1e-7


def test_lame_reconstruction_three_axes():
    beta_fn, H_exact, cauchy = translated_frame()
    axes = [np.linspace(-0.3, 0.3, 13)] * 3
    result = lame_from_rotation(beta_fn, cauchy, axes)
    G1, G2, _ = np.meshgrid(*axes, indexing="ij")
    assert np.max(np.abs(result.H - H_exact(G1, G2))) < 1e-5
    assert result.path_spread < 1e-6
    assert result.iterations < 80


def test_incompatible_field_is_rejected_up_front():
    axes = [np.linspace(-0.2, 0.2, 5)] * 3
    with pytest.raises(IncompatibleField):
        lame_from_rotation(lambda u: np.ones((3, 3)),
                           [np.ones_like] * 3, axes)


def test_axis_validation():
    beta = lambda u: np.zeros((2, 2))
    cauchy = [np.ones_like] * 2
    good = np.linspace(-0.5, 0.5, 11)
    with pytest.raises(InputError):
        lame_from_rotation(beta, cauchy, [good, good ** 3])
    with pytest.raises(InputError):
        lame_from_rotation(beta, cauchy, [good, good + 5.0])
    with pytest.raises(InputError):
        lame_from_rotation(beta, cauchy, [good, np.array([-0.5, 0.0, 0.5])])


def test_cumulative_integral_is_exact_on_cubics():
    x = np.linspace(0.0, 1.0, 11)
    f = x ** 3 - 2.0 * x + 0.5
    F = _cumulative_integral(f, x[1] - x[0], axis=0)
    exact = x ** 4 / 4.0 - x ** 2 + 0.5 * x
    assert np.max(np.abs(F - exact)) < 1e-14
