import math

import numpy as np
import pytest

from kinwave.errors import GridTooNarrow, NonphysicalState, OverflowSignal
from kinwave.gas import FluidTriple
from kinwave.velocity import (DistributionField, Projector, VelocityGrid,
                              chi_basis, fluid_from_distribution,
                              gram_matrix, grid_for_state, inner, moments,
                              reference_maxwellian, sphere_rule)


def test_sphere_rule_weights_sum():
    for npol, nazi in ((1, 4), (2, 4), (3, 8), (6, 12)):
        _, w = sphere_rule(npol, nazi)
        assert np.sum(w) == pytest.approx(4 * math.pi, abs=1e-10)
        assert np.all(w > 0)


def test_lattice_symmetric_about_center():
    g = VelocityGrid(center=(0.3, -0.2, 0.0), half_width=4.0, counts=(8, 6, 10))
    for i, ax in enumerate(g.axes):
        assert np.allclose(ax + ax[::-1], 2 * g.center[i], atol=1e-14)


def test_moments_of_maxwellian(small_grid):
    s = FluidTriple(v=0.5, u=(1.0, 0.0, 0.0), theta=1.0)
    g = grid_for_state(s, counts=(16,) * 3)
    m = moments(g.maxwellian(s), g)
    assert m.rho == pytest.approx(2.0, rel=1e-7)
    assert m.m[0] == pytest.approx(2.0, rel=1e-7)
    assert m.E == pytest.approx(3.0, rel=1e-7)


def test_moments_zero():
    g = VelocityGrid(half_width=3.0, counts=(6,) * 3)
    m = moments(g.zeros(), g)
    assert m.rho == 0.0 and m.E == 0.0 and m.m == (0.0, 0.0, 0.0)


def test_moments_of_micro_part(base_state, small_grid, rng):
    proj = Projector(base_state, small_grid)
    f = rng.standard_normal(small_grid.counts) * small_grid.maxwellian(base_state)
    g = proj.micro(f)
    m = moments(g, small_grid)
    scale = math.sqrt(inner(f, f, base_state, small_grid))
    assert max(abs(m.rho), abs(m.E), max(abs(x) for x in m.m)) <= 1e-8 * scale


def test_inner_cancellation_and_symmetry(base_state, small_grid, rng):
    M = small_grid.maxwellian(base_state)
    assert inner(M, M, base_state, small_grid) \
        == pytest.approx(base_state.rho, rel=1e-7)
    g = rng.standard_normal(small_grid.counts) * M
    h = rng.standard_normal(small_grid.counts) * M
    assert inner(g, h, base_state, small_grid) \
        == pytest.approx(inner(h, g, base_state, small_grid), rel=1e-14)
    assert inner(g, g, base_state, small_grid) > 0


def test_inner_overflow_signal():
    s = FluidTriple(v=1.0, theta=0.01)     # tiny thermal radius
    g = VelocityGrid(half_width=60.0, counts=(16,) * 3)
    ones = np.ones(g.counts)
    with pytest.raises(OverflowSignal):
        inner(ones, ones, s, g)


def test_chi_orthonormality(base_state):
    g = grid_for_state(base_state, counts=(16,) * 3)
    G = gram_matrix(chi_basis(base_state, g), base_state, g)
    assert np.max(np.abs(G - np.eye(5))) <= 1e-6


def test_chi_parity_and_moment(base_state):
    g = grid_for_state(base_state, counts=(12,) * 3)
    chi = chi_basis(base_state, g)
    flipped = chi[1][::-1, :, :]
    assert np.allclose(flipped, -chi[1], atol=1e-13 * np.abs(chi[1]).max())
    assert g.integrate(chi[4]) == pytest.approx(0.0, abs=1e-6)


def test_grid_too_narrow():
    s = FluidTriple(v=1.0, theta=1.0)
    g = grid_for_state(s, counts=(4,) * 3)
    with pytest.raises(GridTooNarrow):
        chi_basis(s, g)


def test_projection_identity_and_idempotence(base_state, small_grid, rng):
    proj = Projector(base_state, small_grid)
    for _ in range(50):
        f = rng.standard_normal(small_grid.counts)
        recomposed = proj.macro(f) + proj.micro(f)
        assert np.allclose(recomposed, f, rtol=0, atol=1e-14 * np.abs(f).max())
    f = rng.standard_normal(small_grid.counts) * small_grid.maxwellian(base_state)
    m1 = proj.micro(f)
    assert np.allclose(proj.micro(m1), m1, atol=1e-10 * np.abs(m1).max())


def test_project_macro_of_maxwellian(base_state, small_grid):
    M = small_grid.maxwellian(base_state)
    PM = Projector(base_state, small_grid).macro(M)
    assert np.max(np.abs(PM - M)) <= 1e-6 * M.max()


def test_orthonormality_grid_convergence(base_state):
    errs = []
    for counts in ((8,) * 3, (16,) * 3, (32,) * 3):
        g = grid_for_state(base_state, counts=counts, extent_radii=8.5)
        M = g.maxwellian(base_state)
        # raw basis without the narrowness gate
        from kinwave.gas import R_GAS
        rho, a2 = base_state.rho, R_GAS * base_state.theta
        du = [g.node_array(i) - base_state.u[i] for i in range(3)]
        q = du[0] ** 2 + du[1] ** 2 + du[2] ** 2
        chi = [M / math.sqrt(rho)]
        chi += [du[i] / math.sqrt(a2 * rho) * M for i in range(3)]
        chi.append((q / a2 - 3.0) / math.sqrt(6.0 * rho) * M)
        errs.append(np.max(np.abs(gram_matrix(chi, base_state, g) - np.eye(5))))
    assert errs[0] > errs[1] > errs[2]


def test_fluid_from_distribution(base_state, small_grid, rng):
    M = small_grid.maxwellian(base_state)
    s = fluid_from_distribution(M, small_grid)
    assert s.v == pytest.approx(base_state.v, rel=1e-7)
    assert s.theta == pytest.approx(base_state.theta, rel=1e-6)
    # adding microscopic content leaves the moments unchanged
    proj = Projector(base_state, small_grid)
    g = proj.micro(rng.standard_normal(small_grid.counts) * M)
    s2 = fluid_from_distribution(M + 0.1 * g, small_grid)
    assert s2.v == pytest.approx(s.v, rel=1e-12)
    assert s2.theta == pytest.approx(s.theta, rel=1e-10)
    with pytest.raises(NonphysicalState):
        fluid_from_distribution(-M, small_grid)


def test_distribution_field_roundtrip(tmp_path, base_state, small_grid, rng):
    y = np.linspace(-3, 3, 5)
    vals = np.stack([small_grid.maxwellian(base_state)] * 5)
    vals *= rng.uniform(0.5, 1.5, size=(5, 1, 1, 1))
    mref = reference_maxwellian([base_state.theta], [base_state.v],
                                [base_state.u1])
    field = DistributionField(ygrid=y, grid=small_grid, values=vals, mref=mref)
    n0 = field.weighted_norm2()
    assert n0 > 0 and np.isfinite(n0)
    path = tmp_path / "field.bin"
    field.save(path)
    back = DistributionField.load(path)
    assert np.allclose(back.values, vals, rtol=0, atol=0)
    assert back.grid.counts == small_grid.counts
    assert back.mref.theta == pytest.approx(mref.theta)
    # csv flavor
    path2 = tmp_path / "field.csv"
    field.save(path2, binary=False)
    back2 = DistributionField.load(path2)
    assert np.allclose(back2.values, vals, rtol=1e-12, atol=1e-300)


def test_reference_maxwellian_between_half_and_full():
    thetas = [0.9, 1.0, 1.2]
    ref = reference_maxwellian(thetas, [1.0, 1.1, 0.9], [0.0, 0.1, 0.2])
    assert max(thetas) / 2 < ref.theta < max(thetas)
