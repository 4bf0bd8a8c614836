import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vortexkit.errors import StencilError, ValidationError
from vortexkit.flowgrid import FlowParams, slice_plane
from vortexkit.numerics import (
    dvorticity_dt, gradient_field, nondimensionalize, transport_residual, transport_terms_field,
    velocity_gradient, vorticity_2d, vorticity_2d_field, vorticity_3d, vorticity_field, vorticity_series,
)
from vortexkit.synth import (
    GenSpec, Vortex, gen_lamb_oseen_street, gen_shear, gen_solid_body, gen_taylor_green_2d,
    gen_uniform, taylor_green_2d_vorticity,
)

from .conftest import make_grid


def test_zero_field_zero_tensor():
    g = make_grid(np.zeros((3, 3, 3)))
    np.testing.assert_array_equal(velocity_gradient(g, 0, (1, 1, 1)), np.zeros((3, 3)))
    np.testing.assert_array_equal(vorticity_3d(g, 0, (1, 1, 1)), np.zeros(3))


def test_solid_body_gradient_exact():
    g = gen_solid_body(GenSpec("solid_body", dims=(5, 5, 5), extent=((-2, 2),) * 3))
    np.testing.assert_array_equal(velocity_gradient(g, 0, (2, 1, 3)),
                                  [[0, -1, 0], [1, 0, 0], [0, 0, 0]])
    np.testing.assert_array_equal(vorticity_3d(g, 0, (1, 2, 2)), [0, 0, 2])


def test_shear_gradient_exact():
    g = gen_shear(GenSpec("shear", dims=(5, 5, 5), extent=((-2, 2),) * 3))
    G = velocity_gradient(g, 0, (2, 2, 2))
    expected = np.zeros((3, 3))
    expected[0, 1] = 1.0
    np.testing.assert_array_equal(G, expected)


def test_boundary_point_rejected():
    g = make_grid(np.zeros((4, 4, 4)))
    with pytest.raises(StencilError):
        velocity_gradient(g, 0, (0, 1, 1))
    with pytest.raises(StencilError):
        velocity_gradient(g, 0, (1, 1, 3))
    with pytest.raises(StencilError):
        velocity_gradient(g, 1, (1, 1, 1))


def test_affine_fields_exact_on_uniform_grid(rng):
    axes = [np.linspace(-1, 1, 6)] * 3
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    M = rng.uniform(-2, 2, (3, 3))
    c = rng.uniform(-1, 1, 3)
    comps = [c[a] + M[a, 0] * X + M[a, 1] * Y + M[a, 2] * Z for a in range(3)]
    g = make_grid(*comps, axes=axes)
    G, mask = gradient_field(g, 0)
    assert np.abs(G[mask] - M).max() < 1e-12


def test_point_and_field_agree_bitwise(rng):
    axes = [np.cumsum(rng.uniform(0.1, 1.0, n)) for n in (5, 6, 4)]
    g = make_grid(*(rng.normal(size=(2, 5, 6, 4)) for _ in range(3)), axes=axes)
    G, mask = gradient_field(g, 1)
    om, _ = vorticity_field(g, 1)
    for p in np.argwhere(mask):
        np.testing.assert_array_equal(velocity_gradient(g, 1, p), G[tuple(p)])
        np.testing.assert_array_equal(vorticity_3d(g, 1, p), om[tuple(p)])


def test_nonuniform_axis_uses_true_spacing():
    x = np.array([0.0, 0.1, 0.4, 1.0])
    X, _, _ = np.meshgrid(x, [0.0, 1.0, 2.0], [0.0, 1.0, 2.0], indexing="ij")
    g = make_grid(np.zeros_like(X), 3.0 * X, axes=[x, [0.0, 1.0, 2.0], [0.0, 1.0, 2.0]])
    assert vorticity_3d(g, 0, (2, 1, 1))[2] == pytest.approx(3.0, rel=1e-15)


def _tg_error(n):
    g = gen_taylor_green_2d(GenSpec("taylor_green_2d", dims=(n, n, 3), nu=0.1, timesteps=3, dt=0.5))
    om, mask = vorticity_field(g, 2)
    X, Y, _ = g.mesh()
    return np.abs(om[..., 2] - taylor_green_2d_vorticity(X, Y, 1.0, 0.1))[mask].max()


def test_taylor_green_vorticity_second_order():
    ratio = _tg_error(33) / _tg_error(65)
    assert 3.5 <= ratio <= 4.5


def test_vorticity_2d_matches_analytic():
    g = gen_taylor_green_2d(GenSpec("taylor_green_2d", dims=(65, 65, 2), nu=0.1))
    s = slice_plane(g, 0)
    f = vorticity_2d_field(s, 0)
    i, j = 10, 20
    assert f.values[i, j, 0] == vorticity_2d(s, 0, (i, j))
    assert vorticity_2d(s, 0, (i, j)) == pytest.approx(2 * math.cos(s.x[i]) * math.cos(s.y[j]), abs=5e-3)


def test_vorticity_2d_requires_slice():
    g = make_grid(np.zeros((3, 3, 3)))
    with pytest.raises(ValidationError):
        vorticity_2d(g, 0, (1, 1))


def test_vorticity_2d_zero_and_solid():
    z = slice_plane(make_grid(np.zeros((4, 4, 2))), 0)
    assert vorticity_2d(z, 0, (1, 2)) == 0.0
    s = slice_plane(gen_solid_body(GenSpec("solid_body", dims=(5, 5, 2))), 1)
    assert vorticity_2d(s, 0, (2, 2)) == pytest.approx(2.0, abs=1e-14)


def test_dvorticity_dt_constant_and_linear():
    np.testing.assert_array_equal(dvorticity_dt(np.full(6, 3.0), 0.1), np.zeros(4))
    t = np.arange(7) * 0.25
    np.testing.assert_allclose(dvorticity_dt(1.5 * t, 0.25), np.full(5, 1.5), rtol=1e-14)


def test_dvorticity_dt_exponential_second_order():
    nu = 0.3
    errs = []
    for dt in (0.1, 0.05):
        t = np.arange(0, 2.0 + dt / 2, dt)
        d = dvorticity_dt(np.exp(-2 * nu * t), dt)
        errs.append(np.abs(d - (-2 * nu) * np.exp(-2 * nu * t[1:-1])).max())
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_dvorticity_dt_needs_three():
    with pytest.raises(ValidationError):
        dvorticity_dt([1.0, 2.0], 0.1)


def test_vorticity_series_from_slice():
    g = gen_taylor_green_2d(GenSpec("taylor_green_2d", dims=(17, 17, 2), nu=0.2, timesteps=5, dt=0.1))
    ser = vorticity_series(slice_plane(g, 0), (3, 8))
    np.testing.assert_allclose(ser[1:] / ser[:-1], math.exp(-2 * 0.2 * 0.1), rtol=1e-12)


def test_nondimensionalize_identity_and_substitution():
    g = make_grid(np.full((3, 3, 3), 4.0), axes=[np.array([0.0, 2.0, 4.0])] * 3, dt=1.0)
    same = nondimensionalize(g, FlowParams(L=1.0, U=1.0))
    assert same.bit_equal(g)
    nd = nondimensionalize(g, FlowParams(L=2.0, U=4.0))
    assert nd.x[1] == 1.0 and nd.u[0, 0, 0, 0] == 1.0 and nd.dt == 2.0


def test_nondimensionalize_inverse(rng):
    g = make_grid(rng.normal(size=(2, 3, 3, 3)), axes=[np.cumsum(rng.uniform(0.1, 1, 3))] * 3, dt=0.3)
    L, U = 3.7, 0.9
    back = nondimensionalize(nondimensionalize(g, FlowParams(L=L, U=U)), FlowParams(L=1 / L, U=1 / U))
    for name in ("x", "u", "v"):
        a, b = getattr(g, name), getattr(back, name)
        # one rounding per scaling step
        np.testing.assert_allclose(b, a, rtol=4 * np.finfo(float).eps, atol=0)
    assert back.dt == pytest.approx(g.dt, rel=4 * np.finfo(float).eps)


def test_uniform_flow_transport_all_zero():
    g = gen_uniform(GenSpec("uniform", dims=(7, 7, 2), timesteps=3, velocity=(1.5, -0.5, 0.0)))
    terms = transport_residual(slice_plane(g, 0), 100.0, 1, (3, 3))
    assert terms.diffusion == terms.convection == terms.domega_dt == terms.residual == 0.0


def _tg_residual(n, dt, steps):
    # L = U = 1, so the field is already nondimensional with Re = 1/nu
    g = gen_taylor_green_2d(GenSpec("taylor_green_2d", dims=(n, n, 2), nu=0.1, timesteps=steps, dt=dt))
    s = nondimensionalize(slice_plane(g, 0), FlowParams(L=1.0, U=1.0, nu=0.1))
    terms, mask = transport_terms_field(s, 10.0, (steps - 1) // 2)
    return np.abs(terms.residual)[mask].max()


def test_taylor_green_transport_residual_converges():
    ratio = _tg_residual(33, 0.1, 11) / _tg_residual(65, 0.05, 21)
    assert 3.0 <= ratio <= 5.0


def test_transport_point_matches_field():
    g = gen_taylor_green_2d(GenSpec("taylor_green_2d", dims=(17, 17, 2), nu=0.1, timesteps=3))
    s = slice_plane(g, 0)
    terms, mask = transport_terms_field(s, 10.0, 1)
    for i, j in [(2, 2), (5, 9), (14, 14)]:
        t = transport_residual(s, 10.0, 1, (i, j))
        assert mask[i, j]
        assert t.residual == pytest.approx(terms.residual[i, j], abs=1e-13)
        assert t.diffusion == pytest.approx(terms.diffusion[i, j], abs=1e-12)
        assert t.residual == pytest.approx(t.domega_dt - (t.diffusion / 10.0 - t.convection), abs=1e-15)


def test_transport_stencil_limits():
    g = gen_taylor_green_2d(GenSpec("taylor_green_2d", dims=(9, 9, 2), timesteps=3))
    s = slice_plane(g, 0)
    with pytest.raises(StencilError):
        transport_residual(s, 10.0, 1, (1, 4))
    with pytest.raises(StencilError):
        transport_residual(s, 10.0, 0, (4, 4))


def _translating_vortex_residual(n):
    # A Lamb-Oseen vortex carried by a uniform stream U0 solves the inviscid
    # transport equation exactly: d(omega)/dt + u . grad(omega) = 0.
    U0 = 0.5
    dt = 0.4 / (n - 1)
    spec = GenSpec("lamb_oseen_street", dims=(n, n, 2), extent=((-1, 1), (-1, 1), (0, 1)),
                   timesteps=3, dt=dt, vortices=(Vortex((0.0, 0.0), 1.0, 0.3, (U0, 0.0)),))
    g, _ = gen_lamb_oseen_street(spec)
    g = g.replace(u=g.u + U0)
    terms, mask = transport_terms_field(slice_plane(g, 0), math.inf, 1)
    np.testing.assert_array_equal(terms.residual, terms.domega_dt + terms.convection)
    return np.abs(terms.residual)[mask].max()


def test_inviscid_limit_translating_vortex():
    ratio = _translating_vortex_residual(41) / _translating_vortex_residual(81)
    assert 3.0 <= ratio <= 5.0


def test_reynolds_must_be_positive():
    g = gen_uniform(GenSpec("uniform", dims=(7, 7, 2), timesteps=3))
    with pytest.raises(ValidationError):
        transport_residual(slice_plane(g, 0), 0.0, 1, (3, 3))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-8, 8), st.integers(-8, 8), st.integers(-8, 8))
def test_gradient_galilean_invariant_bitwise(seed, cu, cv, cw):
    # values on a 2^-10 lattice with small magnitude: adding an integer shift is exact
    r = np.random.default_rng(seed)
    u, v, w = (r.integers(-2048, 2048, size=(1, 4, 4, 4)) / 1024.0 for _ in range(3))
    axes = [np.cumsum(r.uniform(0.1, 1.0, 4)) for _ in range(3)]
    g0 = make_grid(u, v, w, axes=axes)
    g1 = make_grid(u + cu, v + cv, w + cw, axes=axes)
    G0, _ = gradient_field(g0, 0)
    G1, _ = gradient_field(g1, 0)
    assert G0.tobytes() == G1.tobytes()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-10, 10), st.floats(-10, 10))
def test_gradient_galilean_invariant_general_shift(seed, cu, cv):
    r = np.random.default_rng(seed)
    u, v, w = (r.normal(size=(1, 4, 4, 4)) for _ in range(3))
    axes = [np.linspace(0, 1, 4)] * 3
    G0, _ = gradient_field(make_grid(u, v, w, axes=axes), 0)
    G1, _ = gradient_field(make_grid(u + cu, v + cv, w, axes=axes), 0)
    # only the rounding of u + c itself can differ
    assert np.abs(G1 - G0).max() <= 64 * np.finfo(float).eps * (1 + abs(cu) + abs(cv)) / (1 / 3)
