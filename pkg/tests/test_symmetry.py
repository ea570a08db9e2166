import numpy as np
import pytest

from gnnlab.errors import ValidationError
from gnnlab.fields import axial_linear, constant_nonlinearity
from gnnlab.grid import ScalarField, build_grid
from gnnlab.solver import SolverParams, solve_semilinear
from gnnlab.symmetry import asymmetry, directional_asymmetry

F_ONE = constant_nonlinearity(1.0)


def radial_field(grid):
    # rows built directly from the radius are exactly theta-constant
    vals = np.repeat((1.0 - grid.r_nodes**2)[:, None], grid.n_theta, axis=1)
    return ScalarField(grid, vals)


def axial_field(grid):
    return ScalarField.from_function(grid, lambda p: p[:, 1])


class TestAsymmetry:
    def test_radial_field_zero(self):
        g = build_grid(65, 64)
        rep = asymmetry(radial_field(g))
        assert rep.asymmetry == 0.0
        # d_r u = -2r < 0 everywhere
        assert rep.monotonicity_defect == 0.0
        assert rep.osc_profile.max() == 0.0

    def test_axial_field(self):
        g = build_grid(65, 64)
        rep = asymmetry(axial_field(g))
        # oscillation of x_n over the circle of radius r is 2r, peaking at 1
        assert rep.asymmetry == pytest.approx(2.0, abs=1e-12)
        # d_r x_n = sin(theta), maximal 1 at theta = pi/2 (a node)
        assert rep.monotonicity_defect == pytest.approx(1.0, abs=1e-10)

    def test_asymmetry_is_max_of_profile(self):
        g = build_grid(33, 32)
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(g.shape())
        vals[0, :] = vals[0, 0]
        rep = asymmetry(ScalarField(g, vals))
        assert rep.asymmetry == rep.osc_profile.max()

    def test_theta_shift_invariance(self):
        g = build_grid(33, 32)
        rng = np.random.default_rng(1)
        vals = rng.standard_normal(g.shape())
        vals[0, :] = vals[0, 0]
        f = ScalarField(g, vals)
        a = asymmetry(f)
        b = asymmetry(f.shifted(9))
        assert a.asymmetry == b.asymmetry
        assert a.monotonicity_defect == b.monotonicity_defect

    def test_solved_asymmetry_against_refinement(self):
        # kappa = 1 + 0.1 x_n with f = 1: superposition makes the asymmetry
        # linear in eps; refine radially and extrapolate
        vals = {}
        for n_r in (65, 129, 257):
            g = build_grid(n_r, 64)
            rep = solve_semilinear(
                axial_linear(0.1), F_ONE, g, SolverParams(newton_tol=1e-8)
            )
            vals[n_r] = asymmetry(rep.field).asymmetry
        extrap = vals[257] + (vals[257] - vals[129]) / 3.0
        assert vals[129] == pytest.approx(extrap, rel=0.02)
        # the continuum value is 2 * 0.1 * max r(1-r^2)/8 = 0.2/(4*sqrt(27))
        assert extrap == pytest.approx(0.2 / (4.0 * np.sqrt(27.0)), rel=1e-3)


class TestDirectional:
    def test_radial_zero(self):
        g = build_grid(33, 32)
        u = radial_field(g)
        for th in (0.0, 0.4, 1.9):
            e = (np.cos(th), np.sin(th))
            assert abs(directional_asymmetry(u, e)) <= 1e-12

    def test_axial_along_axis(self):
        g = build_grid(65, 64)
        u = axial_field(g)
        assert directional_asymmetry(u, (0.0, 1.0)) == pytest.approx(2.0, abs=1e-12)

    def test_axial_orthogonal_direction(self):
        g = build_grid(65, 64)
        u = axial_field(g)
        assert abs(directional_asymmetry(u, (1.0, 0.0))) <= 1e-12

    def test_rejects_non_unit(self):
        g = build_grid(17, 16)
        with pytest.raises(ValidationError):
            directional_asymmetry(radial_field(g), (1.0, 1.0))

    def test_directional_bounded_by_asymmetry(self):
        g = build_grid(33, 32)
        rng = np.random.default_rng(3)
        vals = np.cumsum(rng.standard_normal(g.shape()), axis=0) * 0.05
        vals[0, :] = vals[0, 0]
        u = ScalarField(g, vals)
        rep = asymmetry(u)
        for _, v in rep.directional:
            assert v <= rep.asymmetry + 1e-9


class TestReportSerialization:
    def test_json_fields(self):
        g = build_grid(17, 16)
        rep = asymmetry(radial_field(g))
        obj = rep.to_json()
        assert set(obj) == {"asymmetry", "monotonicity_defect", "directional", "osc_profile"}
        assert len(obj["osc_profile"]) == g.n_r
