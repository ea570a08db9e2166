import os

import numpy as np
import pytest
import scipy.sparse as sp

from gnnlab.errors import SingularJacobianError, ValidationError
from gnnlab.fields import (
    RHSSpec,
    affine_power_nonlinearity,
    angular_harmonic,
    axial_linear,
    constant_field,
    constant_nonlinearity,
    field_sum,
    power_nonlinearity,
    radial_polynomial,
)
from gnnlab.grid import ScalarField, build_grid
from gnnlab.solver import (
    GeneralProblem,
    OperatorSpec,
    SemilinearProblem,
    SolverParams,
    _solve_linear,
    field_to_vector,
    general_matrix,
    laplacian_matrix,
    n_unknowns,
    residual,
    solve_general,
    solve_semilinear,
    torsion_field,
    unknown_points,
    dump_solution,
    vector_to_field,
)

F_ONE = constant_nonlinearity(1.0)
K_ONE = constant_field(1.0)

# Richardson extrapolation of u(0) for -lap(u) = u^2 (positive branch)
# across n_r in {65, 129, 257}; second-order ratios observed at 4.00.
U0_SQUARED_BRANCH = 8.534115


def scaled_torsion(grid, scale):
    return vector_to_field(grid, field_to_vector(torsion_field(grid)) * scale)


class TestTorsion:
    def test_center_value_and_residual(self):
        g = build_grid(65, 64)
        rep = solve_semilinear(K_ONE, F_ONE, g, SolverParams(newton_tol=1e-9))
        assert rep.converged
        assert rep.residual_sup <= 1e-9
        assert rep.field.values[0, 0] == pytest.approx(0.25, abs=1e-12)
        # the discrete stencils are exact on the quadratic, so the whole
        # field matches the closed form at solver precision
        analytic = (1.0 - g.r_nodes**2)[:, None] / 4.0
        assert np.abs(rep.field.values - analytic).max() <= 1e-12

    def test_boundary_exactly_zero(self):
        g = build_grid(33, 32)
        rep = solve_semilinear(K_ONE, F_ONE, g)
        assert np.all(rep.field.values[-1, :] == 0.0)

    def test_inf_ratio_matches_torsion_profile(self):
        g = build_grid(65, 64)
        rep = solve_semilinear(K_ONE, F_ONE, g, SolverParams(newton_tol=1e-9))
        # u/(1-r) = (1+r)/4 has minimum 1/4 at the origin
        assert rep.inf_ratio == pytest.approx(0.25, abs=1e-10)


class TestLinearResponse:
    def test_solution_linear_in_eps(self):
        g = build_grid(65, 64)
        p = SolverParams(newton_tol=1e-9)
        u_e = solve_semilinear(axial_linear(0.05), F_ONE, g, p).field.values
        u_2e = solve_semilinear(axial_linear(0.10), F_ONE, g, p).field.values
        u_0 = solve_semilinear(K_ONE, F_ONE, g, p).field.values
        assert np.abs(u_2e - 2.0 * u_e + u_0).max() <= 1e-12

    def test_superposition(self):
        g = build_grid(65, 64)
        p = SolverParams(newton_tol=1e-9)
        k1, k2 = axial_linear(0.1), radial_polynomial([0.5, 0.3])
        u1 = solve_semilinear(k1, F_ONE, g, p).field.values
        u2 = solve_semilinear(k2, F_ONE, g, p).field.values
        u12 = solve_semilinear(field_sum(k1, k2), F_ONE, g, p).field.values
        assert np.abs(u12 - u1 - u2).max() <= 1e-11


class TestQuadraticNonlinearity:
    def test_positive_branch_center_value(self):
        g = build_grid(129, 16)
        rep = solve_semilinear(
            K_ONE,
            power_nonlinearity(1.0, 2.0),
            g,
            SolverParams(newton_tol=1e-8, max_newton_iters=200),
            init=scaled_torsion(g, 40.0),
        )
        assert rep.converged and rep.positive_interior
        assert rep.field.values[0, 0] == pytest.approx(U0_SQUARED_BRANCH, rel=1e-3)

    def test_branch_depends_on_init(self):
        # u = 0 solves the discrete problem exactly; plain torsion init lies
        # in its basin, and the report carries both the flag and the init
        # hash that identify the branch
        g = build_grid(65, 16)
        trivial = solve_semilinear(
            K_ONE,
            power_nonlinearity(1.0, 2.0),
            g,
            SolverParams(newton_tol=1e-9),
            init=torsion_field(g),
        )
        assert trivial.converged and not trivial.positive_interior
        assert trivial.sup_norm <= 1e-8
        positive = solve_semilinear(
            K_ONE,
            power_nonlinearity(1.0, 2.0),
            g,
            SolverParams(newton_tol=1e-9),
            init=scaled_torsion(g, 40.0),
        )
        assert positive.positive_interior
        assert trivial.init_hash != positive.init_hash


class TestGeneralOperator:
    def test_identity_reduction_is_exact(self):
        g = build_grid(65, 64)
        p = SolverParams(newton_tol=1e-9)
        kappa = axial_linear(0.1)
        semi = solve_semilinear(kappa, F_ONE, g, p)
        gen = solve_general(
            OperatorSpec.identity(), RHSSpec.product(kappa, F_ONE), g, p
        )
        assert np.abs(gen.field.values - semi.field.values).max() == 0.0

    def test_rejects_non_elliptic(self):
        def a_fn(pts):
            out = np.zeros((len(pts), 2, 2))
            out[:, 0, 0] = 1.0
            out[:, 1, 1] = -0.5
            return out

        op = OperatorSpec(a_fn, lambda pts: np.zeros((len(pts), 2)), lam=2.0)
        g = build_grid(17, 16)
        with pytest.raises(ValidationError):
            solve_general(op, RHSSpec.product(K_ONE, F_ONE), g)

    def test_rejects_asymmetric(self):
        def a_fn(pts):
            out = np.zeros((len(pts), 2, 2))
            out[:, 0, 0] = 1.0
            out[:, 1, 1] = 1.0
            out[:, 0, 1] = 0.1
            return out

        op = OperatorSpec(a_fn, lambda pts: np.zeros((len(pts), 2)), lam=2.0)
        g = build_grid(17, 16)
        with pytest.raises(ValidationError):
            solve_general(op, RHSSpec.product(K_ONE, F_ONE), g)

    def test_constant_diagonal_matches_analytic(self):
        # -(v_xx + v_yy / a^2) = 1 has the radial solution
        # a^2 (1 - r^2) / (2 (a^2 + 1)), quadratic hence exact
        a = 1.1
        g = build_grid(65, 64)
        op = OperatorSpec.constant_diagonal(1.0, 1.0 / a**2)
        rep = solve_general(op, RHSSpec.product(K_ONE, F_ONE), g, SolverParams(newton_tol=1e-8))
        analytic = a * a * (1.0 - g.r_nodes**2)[:, None] / (2.0 * (a * a + 1.0))
        assert np.abs(rep.field.values - analytic).max() <= 1e-11

    def test_drift_term_enters(self):
        # pure drift b = (0, 1): -lap(u) + u_y = 1 differs from torsion
        def b_fn(pts):
            out = np.zeros((len(pts), 2))
            out[:, 1] = 1.0
            return out

        op = OperatorSpec(OperatorSpec.identity().a_fn, b_fn, lam=1.0)
        g = build_grid(33, 32)
        rep = solve_general(op, RHSSpec.product(K_ONE, F_ONE), g, SolverParams(newton_tol=1e-9))
        assert rep.converged
        t = torsion_field(g)
        assert np.abs(rep.field.values - t.values).max() > 1e-3


class TestResidual:
    def test_convergence_order_on_manufactured_solution(self):
        # u = (1 - r^4)/16 solves -lap(u) = r^2; quartic, so the truncation
        # error is visible and decays at second order
        errs = []
        for n_r in (33, 65, 129):
            g = build_grid(n_r, 32)
            u = ScalarField.from_function(
                g, lambda p: (1.0 - ((p * p).sum(axis=1)) ** 2) / 16.0
            )
            prob = SemilinearProblem(radial_polynomial([0.0, 1.0]), F_ONE)
            errs.append(residual(u, prob))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert orders.min() >= 1.9

    def test_zero_field_residual_is_one(self):
        g = build_grid(17, 16)
        u = ScalarField(g, np.zeros(g.shape()))
        assert residual(u, SemilinearProblem(K_ONE, F_ONE)) == pytest.approx(1.0)

    def test_converged_solve_meets_tolerance(self):
        g = build_grid(33, 32)
        p = SolverParams(newton_tol=1e-9)
        rep = solve_semilinear(axial_linear(0.1), F_ONE, g, p)
        assert residual(rep.field, SemilinearProblem(axial_linear(0.1), F_ONE)) <= 1e-9

    def test_grid_mismatch(self):
        g1, g2 = build_grid(17, 16), build_grid(33, 32)
        u = ScalarField(g1, np.zeros(g1.shape()))
        with pytest.raises(ValidationError):
            residual(u, SemilinearProblem(K_ONE, F_ONE, grid=g2))

    def test_general_problem_residual(self):
        g = build_grid(33, 32)
        op = OperatorSpec.constant_diagonal(1.0, 0.8)
        rhs = RHSSpec.product(K_ONE, F_ONE)
        rep = solve_general(op, rhs, g, SolverParams(newton_tol=1e-9))
        assert residual(rep.field, GeneralProblem(op, rhs)) <= 1e-9


class TestInvariants:
    def test_discrete_maximum_principle(self):
        g = build_grid(65, 64)
        rep = solve_semilinear(axial_linear(0.5), F_ONE, g, SolverParams(newton_tol=1e-9))
        assert rep.field.values.min() >= -1e-10

    def test_rotational_equivariance(self):
        g = build_grid(65, 64)
        p = SolverParams(newton_tol=1e-9)
        k_steps = 7
        base = angular_harmonic(0.2, k=3)
        rotated = angular_harmonic(0.2, k=3, phase=3 * k_steps * g.dtheta)
        ua = solve_semilinear(base, F_ONE, g, p).field.values
        ub = solve_semilinear(rotated, F_ONE, g, p).field.values
        assert np.abs(ub - np.roll(ua, k_steps, axis=1)).max() <= 10 * p.newton_tol

    def test_jacobian_directional_derivative(self):
        g = build_grid(17, 16)
        kappa, f = K_ONE, affine_power_nonlinearity(1.0, 1.0, 2.0)
        rhs = RHSSpec.product(kappa, f)
        pts = unknown_points(g)
        lap = laplacian_matrix(g)
        rng = np.random.default_rng(8)
        x = rng.uniform(0.0, 0.5, n_unknowns(g))
        v = rng.standard_normal(n_unknowns(g))

        def res_vec(z):
            return lap @ z + rhs.value(pts, z)

        jac = lap + sp.diags(rhs.ds(pts, x))
        directional = jac @ v
        for t in (1e-4, 1e-5):
            fd = (res_vec(x + t * v) - res_vec(x)) / t
            # difference quotient error is O(t) for the smooth nonlinearity
            assert np.abs(fd - directional).max() <= 10.0 * t * np.abs(v).max()


class TestFailureModes:
    def test_singular_linear_system_signaled(self):
        mat = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(SingularJacobianError):
            _solve_linear(mat, np.array([1.0, 1.0]), 1e-12)

    def test_non_convergence_flagged(self):
        g = build_grid(33, 32)
        rep = solve_semilinear(
            K_ONE,
            affine_power_nonlinearity(1.0, 1.0, 2.0),
            g,
            SolverParams(newton_tol=1e-12, max_newton_iters=1),
        )
        assert not rep.converged
        assert rep.failure == "max_iterations"

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            SolverParams(newton_tol=0.0)
        with pytest.raises(ValidationError):
            SolverParams(max_newton_iters=0)


class TestGeneralMatrixConsistency:
    def test_identity_matrix_matches_laplacian_to_rounding(self):
        g = build_grid(17, 16)
        lap = laplacian_matrix(g)
        gen = -general_matrix(g, OperatorSpec.identity())
        diff = (lap - gen).toarray()
        scale = np.abs(lap.toarray()).max()
        assert np.abs(diff).max() <= 1e-12 * scale


class TestDump:
    def test_solution_dump(self, tmp_path):
        g = build_grid(17, 16)
        rep = solve_semilinear(K_ONE, F_ONE, g, SolverParams(newton_tol=1e-9))
        sidecar = dump_solution(rep, tmp_path, spec_json={"kappa": "one"})
        csv_lines = (tmp_path / "solution.csv").read_text().splitlines()
        assert len(csv_lines) == 1 + g.n_r * g.n_theta
        assert csv_lines[0] == "i,j,r,theta,value"
        assert sidecar["grid"] == {"n_r": 17, "n_theta": 16}
        assert os.path.exists(tmp_path / "solution.json")
