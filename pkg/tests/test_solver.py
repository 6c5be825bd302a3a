import numpy as np
import pytest

from hjb_torus import (
    ControlSet,
    Field,
    HJBProblem,
    LatticeDirection,
    SchemeParams,
    SigmaColumn,
    SolverError,
    Trajectory,
    apply_operator,
    degeneracy_set,
    long_time_slope,
    make_grid,
    make_scheme_params,
    nr_ergodic_constant,
    oscillation,
    run_cauchy,
    solve_discounted,
)
from hjb_torus import catalog
from hjb_torus.torus_grid import discrete_lipschitz


def problem_H_of_p(fn, dim=1, lip=2.0, sigma=()):
    def H(theta, X, P):
        return fn(P)

    return HJBProblem(dim, ControlSet(("only",)), H, {"only": tuple(sigma)}, lip)


def heat_problem_1d():
    col = SigmaColumn(lambda X: np.ones(X.shape[:-1]), LatticeDirection((1,)))
    return problem_H_of_p(lambda P: 0.0 * P[..., 0], sigma=(col,))


class TestRunCauchy:
    def test_constants_are_exact_solutions(self):
        e = catalog.build("unif_cvx")  # H(x,0) = 0 everywhere
        g = make_grid(2, 12)
        u0 = Field(g, 3.0 * np.ones(g.shape))
        params = make_scheme_params(e.problem, 2.0)
        traj = run_cauchy(e.problem, params, u0, 0.5, 0.1)
        for snap in traj.snapshots:
            assert np.all(snap.values == 3.0)

    def test_heat_decay_rate(self):
        prob = heat_problem_1d()
        g = make_grid(1, 64)
        X = g.coordinates()
        u0 = Field(g, np.sin(2 * np.pi * X[..., 0]))
        params = make_scheme_params(prob, 2 * np.pi * 1.5)
        traj = run_cauchy(prob, params, u0, 0.05, 0.05)
        amp = np.abs(traj.snapshots[-1].values).max()
        expected = np.exp(-4 * np.pi**2 * 0.05)
        assert amp == pytest.approx(expected, rel=0.05)

    def test_counterexample_tracks_exact_solution(self):
        e = catalog.build("counterexample")
        g = make_grid(2, 32)
        u0 = e.make_u0(g)
        params = make_scheme_params(e.problem, max(1.5 * discrete_lipschitz(u0), e.grad_floor))
        traj = run_cauchy(e.problem, params, u0, 1.0, 0.25)
        X = g.coordinates()
        err = max(
            np.abs(s.values - e.exact_solution(X, t)).max()
            for t, s in zip(traj.times, traj.snapshots)
        )
        assert err <= 0.15  # first-order scheme at n=32

    def test_recording_times(self):
        prob = heat_problem_1d()
        g = make_grid(1, 16)
        u0 = Field(g, np.zeros(16))
        params = make_scheme_params(prob, 1.0)
        traj = run_cauchy(prob, params, u0, 0.33, 0.1)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(0.33, abs=1e-9)
        for target in (0.1, 0.2, 0.3):
            assert any(abs(t - target) < 0.01 for t in traj.times)

    def test_aborts_when_gradient_exceeds_range(self):
        e = catalog.build("counterexample")
        g = make_grid(2, 16)
        u0 = e.make_u0(g)  # discrete Lipschitz about 2 pi
        params = SchemeParams(lf_viscosity=1.0, grad_range=1.0)
        with pytest.raises(SolverError, match="grad_range"):
            run_cauchy(e.problem, params, u0, 0.5, 0.1)

    def test_trajectory_invariants(self):
        g = make_grid(1, 8)
        f = Field(g, np.zeros(8))
        with pytest.raises(SolverError):
            Trajectory(grid=g, times=[0.0, 0.0], snapshots=[f, f])
        with pytest.raises(SolverError):
            Trajectory(grid=g, times=[0.0], snapshots=[f, f])


class TestLongTimeSlope:
    def test_stationary_zero(self):
        e = catalog.build("unif_cvx")
        g = make_grid(2, 12)
        u0 = Field(g, np.ones(g.shape))
        params = make_scheme_params(e.problem, 2.0)
        traj = run_cauchy(e.problem, params, u0, 1.0, 0.25)
        assert long_time_slope(traj, (0.5, 1.0)) == 0.0

    def test_linear_in_time_solution(self):
        # H(p) = |p|^2 - 1 with u0 = 0: u(x,t) = t exactly, slope -1 = c
        prob = problem_H_of_p(lambda P: P[..., 0] ** 2 - 1.0, lip=4.0)
        g = make_grid(1, 16)
        u0 = Field(g, np.zeros(16))
        params = make_scheme_params(prob, 2.0)
        traj = run_cauchy(prob, params, u0, 2.0, 0.25)
        slope = long_time_slope(traj, (1.0, 2.0))
        assert slope == pytest.approx(-1.0, abs=1e-12)
        assert traj.c_estimate == slope

    def test_window_outside_recorded_times(self):
        prob = heat_problem_1d()
        g = make_grid(1, 16)
        traj = run_cauchy(prob, make_scheme_params(prob, 1.0), Field(g, np.zeros(16)), 0.2, 0.1)
        with pytest.raises(SolverError):
            long_time_slope(traj, (0.1, 5.0))


class TestSolveDiscounted:
    def test_constant_solution_algebra(self):
        # lambda v + H(0) = 0 with H(0) = -1, lambda = 1: v = 1, c = -1
        prob = problem_H_of_p(lambda P: P[..., 0] ** 2 - 1.0, lip=4.0)
        g = make_grid(1, 16)
        params = make_scheme_params(prob, 2.0)
        res = solve_discounted(prob, params, g, lam=1.0, tol=1e-10)
        assert res.c == pytest.approx(-1.0, abs=1e-9)
        assert np.abs(res.corrector.values).max() <= 1e-9
        assert res.corrector.values.min() == 0.0

    def test_lambda_sweep_cauchy(self):
        e = catalog.build("namah_roquejoffre")
        g = make_grid(1, 32)
        u0 = e.make_u0(g)
        params = make_scheme_params(e.problem, max(1.5 * discrete_lipschitz(u0), e.grad_floor))
        cs = []
        v0 = None
        for lam in (0.1, 0.05, 0.025):
            res = solve_discounted(e.problem, params, g, lam, v0=v0)
            v0 = res.corrector
            cs.append(res.c)
        gap1, gap2 = abs(cs[1] - cs[0]), abs(cs[2] - cs[1])
        assert gap1 / gap2 >= 1.5

    def test_nr_matches_closed_form(self):
        e = catalog.build("namah_roquejoffre")
        g = make_grid(1, 64)
        u0 = e.make_u0(g)
        params = make_scheme_params(e.problem, max(1.5 * discrete_lipschitz(u0), e.grad_floor))
        res = solve_discounted(e.problem, params, g, 0.025)
        mask = degeneracy_set(e.problem, g)
        c_formula = nr_ergodic_constant(e.problem, mask)
        assert abs(res.c - c_formula) <= 1e-2
        assert res.residual <= 1e-8

    def test_corrector_residual_identity(self):
        e = catalog.build("namah_roquejoffre")
        g = make_grid(1, 32)
        params = make_scheme_params(e.problem, e.grad_floor)
        res = solve_discounted(e.problem, params, g, 0.05, tol=1e-9)
        op = apply_operator(e.problem, params, res.corrector)
        osc_v = oscillation(res.corrector)
        bound = 1e-9 + res.lambda_used * osc_v
        assert np.abs(op.values - res.c).max() <= bound + 1e-12

    def test_nonconvergence_reported(self):
        e = catalog.build("namah_roquejoffre")
        g = make_grid(1, 32)
        params = make_scheme_params(e.problem, e.grad_floor)
        with pytest.raises(SolverError, match="residual"):
            solve_discounted(e.problem, params, g, lam=0.025, tol=1e-13, max_pseudo_time=0.001)


class TestNrErgodicConstant:
    def test_catalog_value_exact(self):
        e = catalog.build("namah_roquejoffre")
        g = make_grid(1, 64)
        mask = degeneracy_set(e.problem, g)
        assert nr_ergodic_constant(e.problem, mask) == -1.0

    def test_zero_hamiltonian_on_sigma(self):
        prob = problem_H_of_p(lambda P: np.abs(P[..., 0]), lip=1.5)  # sigma empty: Sigma = torus
        g = make_grid(1, 16)
        mask = degeneracy_set(prob, g)
        assert mask.in_sigma.all()
        assert nr_ergodic_constant(prob, mask) == 0.0

    def test_empty_sigma_raises(self):
        e = catalog.build("counterexample")
        mask = degeneracy_set(e.problem, make_grid(2, 16))
        with pytest.raises(SolverError):
            nr_ergodic_constant(e.problem, mask)
