from math import factorial

import numpy as np
import pytest

from bernstein_dg.bernstein import eval_decasteljau
from bernstein_dg.dg import (
    AcousticDG, AcousticState, acoustic_flux, euler_step, plane_wave, read_state_csv,
    rusanov_flux, ssprk3_step, standing_wave, trace_indices, upwind_flux, wall_ghost,
    write_state_csv,
)
from bernstein_dg.mass import condition
from bernstein_dg.mesh import (
    SimplexMesh, build_structured_mesh, read_mesh_csv, write_mesh_csv,
)
from bernstein_dg.multiindex import dim, enumerate_indices, index_array
from bernstein_dg.stroud import eval_at_stroud, facet_rule, stroud_rule
from oracles import bernstein_direct


# -- mesh -----------------------------------------------------------------

def test_mesh_counts():
    assert build_structured_mesh(32).n_cells == 2048
    m = build_structured_mesh(1)
    assert m.n_cells == 2 and m.n_facets == 5 and m.interior.sum() == 1
    p = build_structured_mesh(1, periodic=True)
    assert p.n_cells == 2 and p.n_facets == 3 and p.interior.all()
    with pytest.raises(ValueError):
        build_structured_mesh(0)


@pytest.mark.parametrize("periodic", [False, True])
def test_mesh_conformity(periodic):
    mesh = build_structured_mesh(4, periodic)
    x = mesh.geometry.coords
    for f in np.flatnonzero(mesh.interior):
        (c0, c1), (v0, v1) = mesh.facet_cells[f], mesh.facet_local[f]
        e0 = x[c0][[k for k in range(3) if k != v0]]
        e1 = x[c1][[k for k in range(3) if k != v1]]
        if mesh.facet_flip[f]:
            e1 = e1[::-1]
        shift = e1 - e0
        # identical up to a whole period shift, and equal along the edge
        np.testing.assert_allclose(shift[0], shift[1], atol=1e-14)
        np.testing.assert_allclose(shift[0] - np.round(shift[0]), 0, atol=1e-14)
        if not periodic:
            np.testing.assert_allclose(shift, 0, atol=1e-14)


def test_mesh_geometry():
    mesh = build_structured_mesh(3)
    np.testing.assert_allclose(mesh.geometry.volume.sum(), 1.0)
    np.testing.assert_allclose(mesh.geometry.grad_b.sum(axis=1), 0, atol=1e-13)
    np.testing.assert_allclose(np.linalg.norm(mesh.facet_normals(), axis=1), 1.0)
    lengths = sorted(set(np.round(mesh.facet_lengths(), 12)))
    np.testing.assert_allclose(lengths, [1 / 3, np.sqrt(2) / 3])
    # outward normals of one cell sum to zero when weighted by lengths
    assert mesh.h_min() == pytest.approx(4 * (1 / 18) / (2 / 3 + np.sqrt(2) / 3))


def test_degenerate_cell_rejected():
    with pytest.raises(ValueError):
        SimplexMesh(np.array([[0, 0], [1, 0], [2, 0]]), np.array([[0, 1, 2]]))


def test_mesh_csv_roundtrip(tmp_path):
    mesh = build_structured_mesh(3, periodic=True)
    write_mesh_csv(mesh, tmp_path)
    back = read_mesh_csv(tmp_path)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.cells, mesh.cells)
    assert back.period == mesh.period
    assert (tmp_path / "cells.csv").read_text().splitlines()[0] == "id,v0,v1,v2"


# -- fluxes ---------------------------------------------------------------

def test_flux_examples():
    n = np.array([1.0, 0.0])
    q = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(rusanov_flux(q, q, n), [0, 1, 0])
    np.testing.assert_allclose(upwind_flux(q, q, n), [0, 1, 0])
    np.testing.assert_allclose(rusanov_flux(q, np.zeros(3), n), [0.5, 0.5, 0])
    F = acoustic_flux(np.array([2.0, 3.0, 5.0]))
    np.testing.assert_array_equal(F, [[3, 5], [2, 0], [0, 2]])


@pytest.mark.parametrize("flux", [rusanov_flux, upwind_flux])
def test_flux_consistency_and_antisymmetry(rng, flux):
    qm, qp = rng.normal(size=(2, 3, 1000))
    th = rng.uniform(0, 2 * np.pi, 1000)
    n = np.stack([np.cos(th), np.sin(th)])
    Fn = np.einsum("fkx,kx->fx", acoustic_flux(qm), n)
    np.testing.assert_allclose(flux(qm, qm, n), Fn, atol=1e-14)
    np.testing.assert_array_equal(flux(qm, qp, n), -flux(qp, qm, -n))


def test_wall_ghost(rng):
    q = rng.normal(size=(3, 50))
    th = rng.uniform(0, 2 * np.pi, 50)
    n = np.stack([np.cos(th), np.sin(th)])
    g = wall_ghost(q, n)
    np.testing.assert_array_equal(g[0], q[0])
    np.testing.assert_allclose(g[1] * n[0] + g[2] * n[1], -(q[1] * n[0] + q[2] * n[1]))
    # tangential velocity kept
    np.testing.assert_allclose(-g[1] * n[1] + g[2] * n[0], -q[1] * n[1] + q[2] * n[0])
    # the resulting normal velocity flux vanishes
    np.testing.assert_allclose(upwind_flux(q, g, n)[0], 0, atol=1e-14)


# -- traces ---------------------------------------------------------------

def test_trace_indices():
    n = 4
    tr = trace_indices(n)
    A = index_array(2, n)
    assert tr.shape == (3, n + 1)
    for v in range(3):
        assert (A[tr[v], v] == 0).all()
        assert len(set(tr[v].tolist())) == n + 1


def test_trace_values_match_volume(rng):
    n = 5
    c = rng.normal(size=dim(2, n))
    rule = facet_rule(2, n + 1)
    t = rule.lines[0].nodes
    for v in range(3):
        i, j = [k for k in range(3) if k != v]
        vals = eval_at_stroud(c[trace_indices(n)[v]], 1, n, rule)
        for tk, val in zip(t, vals):
            p = np.zeros(3)
            p[i], p[j] = tk, 1 - tk
            assert val == pytest.approx(eval_decasteljau(c, 2, p), abs=1e-13)


# -- residual ---------------------------------------------------------------

def _constant(p=1.0, u1=0.5, u2=-0.25):
    return lambda x, y, t: np.stack([p + 0 * x, u1 + 0 * x, u2 + 0 * x])


@pytest.mark.parametrize("flux", ["rusanov", "upwind"])
@pytest.mark.parametrize("n", [1, 3, 6])
def test_constant_state_is_steady(n, flux):
    dg = AcousticDG(build_structured_mesh(4, periodic=True), n, flux=flux)
    u = dg.project(_constant())
    np.testing.assert_allclose(u[:, 0], 1.0, atol=1e-13)
    # individual moments of a constant flux against grad B_alpha are nonzero,
    # but the basis sums to one so their total vanishes on every cell
    np.testing.assert_allclose(dg.volume_term(u).sum(axis=0), 0, atol=1e-13)
    assert np.abs(dg.residual(u)).max() <= 1e-13
    # the mass inverse amplifies residual roundoff by up to its condition number
    tol = 1e-12 if n <= 3 else 1e-12 * float(condition(2, n))
    assert np.abs(dg.rhs(u)).max() <= tol


def test_constant_state_wall():
    dg = AcousticDG(build_structured_mesh(3), 3)
    u = dg.project(_constant(2.0, 0.0, 0.0))
    assert np.abs(dg.rhs(u)).max() <= 1e-12


def _volume_oracle(dg, u):
    """Loop over every basis function at the Stroud points of every cell."""
    n = dg.n
    rule = stroud_rule(2, n + 1)
    lam = rule.points.reshape(-1, 3)
    W = rule.weights.ravel()
    idx, lower = enumerate_indices(2, n), enumerate_indices(2, n - 1)
    B = np.array([[bernstein_direct(a, p) for a in idx] for p in lam])
    Bl = np.array([[bernstein_direct(a, p) for a in lower] for p in lam])
    out = np.zeros_like(u)
    g = dg.mesh.geometry
    for c in range(dg.mesh.n_cells):
        q = B @ u[:, :, c]  # (npts, 3)
        F = acoustic_flux(q.T)  # (3, 2, npts)
        for r, a in enumerate(idx):
            grad = np.zeros((len(lam), 2))
            for i in range(3):
                if a[i] > 0:
                    am = list(a)
                    am[i] -= 1
                    grad += n * Bl[:, lower.index(tuple(am))][:, None] * g.grad_b[c, i]
            out[r, :, c] = np.einsum("p,fkp,pk->f", W, F, grad) * dg.jac[c]
    return out


def test_volume_term_matches_dense_quadrature(rng):
    dg = AcousticDG(build_structured_mesh(2, periodic=True), 3)
    u = rng.normal(size=dg.zeros().shape)
    ref = _volume_oracle(dg, u)
    np.testing.assert_allclose(dg.volume_term(u), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_volume_term_scales_with_area(rng):
    mesh = build_structured_mesh(2, periodic=True)
    big = SimplexMesh(mesh.vertices * np.sqrt(2.0), mesh.cells, period=(np.sqrt(2), np.sqrt(2)))
    u = rng.normal(size=(dim(2, 3), 3, mesh.n_cells))
    # gradients shrink by 1/sqrt(2) and the area doubles: net factor sqrt(2)
    small_v = AcousticDG(mesh, 3).volume_term(u)
    big_v = AcousticDG(big, 3).volume_term(u)
    np.testing.assert_allclose(big_v, np.sqrt(2.0) * small_v, rtol=1e-12, atol=1e-13)


def test_facet_term_closed_form():
    n = 3
    mesh = build_structured_mesh(1)
    dg = AcousticDG(mesh, n, flux="rusanov")
    qa, qb = np.array([1.0, 0.3, -0.2]), np.array([-0.5, 0.1, 0.4])
    u = dg.zeros()
    u[:, :, 0] = qa
    u[:, :, 1] = qb
    out = dg.facet_term(u)
    expected = dg.zeros()
    normals, lengths = mesh.facet_normals(), mesh.facet_lengths()
    tr = trace_indices(n)
    states = [qa, qb]
    for f in range(mesh.n_facets):
        (c0, c1), (v0, v1) = mesh.facet_cells[f], mesh.facet_local[f]
        qm = states[c0]
        qp = states[c1] if c1 >= 0 else wall_ghost(qm, normals[f])
        val = rusanov_flux(qm, qp, normals[f]) * lengths[f] / (n + 1)
        expected[tr[v0], :, c0] += val
        if c1 >= 0:
            expected[tr[v1], :, c1] -= val
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_facet_contributions_cancel(rng):
    dg = AcousticDG(build_structured_mesh(3, periodic=True), 4)
    u = rng.normal(size=dg.zeros().shape)
    # every facet moment enters the two neighbours with opposite signs, and
    # facet Bernstein moments of the shared flux sum to its integral
    total = dg.facet_term(u).sum(axis=(0, 2))
    np.testing.assert_allclose(total, 0, atol=1e-12)


@pytest.mark.parametrize("flux", ["rusanov", "upwind"])
def test_conservation_and_energy(rng, flux):
    dg = AcousticDG(build_structured_mesh(4, periodic=True), 4, flux=flux)
    for _ in range(5):
        u = rng.normal(size=dg.zeros().shape)
        L = dg.rhs(u)
        assert np.abs(dg.integrals(L)).max() <= 1e-11
        rate = float(np.sum(u * dg.apply_mass(L)))
        assert rate <= 1e-12


def test_block_and_dense_mass_solvers_agree(rng):
    mesh = build_structured_mesh(3, periodic=True)
    for n in (2, 5, 8):
        u = rng.normal(size=(dim(2, n), 3, mesh.n_cells))
        a = AcousticDG(mesh, n, solver="block").rhs(u)
        b = AcousticDG(mesh, n, solver="dense").rhs(u)
        assert np.linalg.norm(a - b) <= 1e-9 * np.linalg.norm(b)


def test_rhs_approximates_time_derivative():
    mesh = build_structured_mesh(4, periodic=True)
    wave = plane_wave()
    errs = []
    for n in (1, 2, 3, 4):
        dg = AcousticDG(mesh, n)
        L = dg.rhs(dg.project(wave, 0.0))
        h = 1e-6
        dqdt = lambda x, y, t: (wave(x, y, t + h) - wave(x, y, t - h)) / (2 * h)
        errs.append(np.linalg.norm(dg.l2_error(L, dqdt, 0.0)))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_projection_reproduces_polynomials():
    dg = AcousticDG(build_structured_mesh(2), 3)
    f = lambda x, y, t: np.stack([x ** 3 - x * y, y ** 2 + 1, x * y * y])
    u = dg.project(f)
    assert np.linalg.norm(dg.l2_error(u, f)) <= 1e-12


# -- time stepping --------------------------------------------------------------

def test_time_steppers():
    u = np.array([1.0, -2.0])
    zero = lambda v: np.zeros_like(v)
    np.testing.assert_array_equal(euler_step(u, 0.1, zero), u)
    np.testing.assert_array_equal(ssprk3_step(u, 0.1, zero), u)
    np.testing.assert_array_equal(euler_step(u, 0.0, lambda v: v), u)
    for z in (-0.3, 0.7, -2.1):
        got = ssprk3_step(np.array([1.0]), z, lambda v: v)[0]
        assert got == pytest.approx(1 + z + z * z / 2 + z ** 3 / 6, abs=1e-14)


def test_constant_run_unchanged():
    dg = AcousticDG(build_structured_mesh(3, periodic=True), 2)
    u0 = dg.project(_constant())
    u, steps = dg.run(u0, 0.2)
    assert steps > 0
    np.testing.assert_allclose(u, u0, atol=1e-12)
    assert dg.run(u0, 0.0) == (u0, 0)


def test_wall_standing_wave_energy_bounded():
    dg = AcousticDG(build_structured_mesh(6), 3)
    u0 = dg.project(standing_wave())
    u, _ = dg.run(u0, 0.25)
    assert dg.energy(u) <= dg.energy(u0) * (1 + 1e-12)
    assert np.linalg.norm(dg.l2_error(u, standing_wave(), 0.25)) < 1e-2


def test_unstable_run_aborts():
    dg = AcousticDG(build_structured_mesh(4, periodic=True), 3)
    u0 = dg.project(plane_wave())
    with pytest.raises(FloatingPointError, match="CFL"):
        dg.run(u0, 2.0, cfl=5.0)


def test_invalid_options():
    mesh = build_structured_mesh(2)
    with pytest.raises(ValueError):
        AcousticDG(mesh, 2, flux="roe")
    with pytest.raises(ValueError):
        AcousticDG(mesh, 2, solver="lu")
    mesh.facet_tags[0] = "inflow"
    with pytest.raises(ValueError):
        AcousticDG(mesh, 2)


def test_state_csv_roundtrip(tmp_path, rng):
    st = AcousticState(2, rng.normal(size=(6, 3, 4)))
    write_state_csv(st, tmp_path / "s.csv")
    back = read_state_csv(tmp_path / "s.csv")
    assert back.n == 2
    np.testing.assert_array_equal(back.coeffs, st.coeffs)
    with pytest.raises(ValueError):
        AcousticState(2, np.zeros((5, 3, 4)))


def test_integrals_of_constant():
    dg = AcousticDG(build_structured_mesh(2), 4)
    u = dg.project(_constant())
    np.testing.assert_allclose(dg.integrals(u), [1.0, 0.5, -0.25], atol=1e-13)
    assert factorial(4) / factorial(6) == pytest.approx(1 / 30)
