import numpy as np
import pytest

from hjb_torus import (
    ControlSet,
    Field,
    HJBProblem,
    LatticeDirection,
    SchemeError,
    SchemeParams,
    SigmaColumn,
    apply_operator,
    cyclic_shift,
    discrete_lipschitz,
    make_grid,
    make_scheme_params,
    numerical_hamiltonian,
    stable_timestep,
)
from hjb_torus import catalog
from hjb_torus.scheme import OperatorKernel


def problem_1d_abs():
    def H(theta, X, P):
        return np.abs(P[..., 0])

    return HJBProblem(1, ControlSet(("only",)), H, {"only": ()}, 1.0)


def problem_1d_heat(coeff_value=1.0):
    def H(theta, X, P):
        return 0.0 * P[..., 0]

    col = SigmaColumn(lambda X: np.full(X.shape[:-1], coeff_value), LatticeDirection((1,)))
    return HJBProblem(1, ControlSet(("only",)), H, {"only": (col,)}, 1.0)


class TestNumericalHamiltonian:
    def test_consistency(self):
        prob = problem_1d_abs()
        p = np.array([0.37])
        val = numerical_hamiltonian(prob, "only", np.zeros(1), p, p, alpha=1.0)
        assert val == pytest.approx(abs(0.37), abs=0.0)

    def test_abs_flux_example(self):
        prob = problem_1d_abs()
        val = numerical_hamiltonian(
            prob, "only", np.zeros(1), np.array([-1.0]), np.array([1.0]), alpha=1.0
        )
        assert val == pytest.approx(-1.0)

    def test_monotonicity_probe(self):
        # d flux / d p_minus_i >= 0 and d flux / d p_plus_i <= 0 when alpha
        # dominates the Hamiltonian slope
        def H(theta, X, P):
            return (P * P).sum(axis=-1)

        prob = HJBProblem(2, ControlSet(("only",)), H, {"only": ()}, 8.0)
        rng = np.random.default_rng(5)
        alpha = 2.0 * 2.5  # slope bound over |p| <= 2.5
        eps = 1e-6
        for _ in range(100):
            pm = rng.uniform(-1.5, 1.5, size=2)
            pp = rng.uniform(-1.5, 1.5, size=2)
            x = rng.uniform(0, 1, size=2)
            base = numerical_hamiltonian(prob, "only", x, pm, pp, alpha)
            for i in range(2):
                dm = pm.copy()
                dm[i] += eps
                dp = pp.copy()
                dp[i] += eps
                assert numerical_hamiltonian(prob, "only", x, dm, pp, alpha) >= base - 1e-12
                assert numerical_hamiltonian(prob, "only", x, pm, dp, alpha) <= base + 1e-12


class TestApplyOperator:
    def test_constant_field_zero_operator(self):
        e = catalog.build("unif_cvx")  # H(x, 0) = 0 for all x
        g = make_grid(2, 16)
        u = Field(g, 3.0 * np.ones(g.shape))
        params = make_scheme_params(e.problem, 2.0)
        out = apply_operator(e.problem, params, u)
        assert np.all(out.values == 0.0)

    def test_counterexample_residual_first_order(self):
        e = catalog.build("counterexample")
        resid = {}
        for n in (32, 64):
            g = make_grid(2, n)
            u0 = e.make_u0(g)
            params = make_scheme_params(e.problem, max(1.5 * discrete_lipschitz(u0), e.grad_floor))
            X = g.coordinates()
            t = 0.7
            u = Field(g, e.exact_solution(X, t))
            op = apply_operator(e.problem, params, u)
            dudt = -np.cos(2 * np.pi * (X[..., 0] + X[..., 1]) - t)
            resid[n] = float(np.abs(op.values + dudt).max())
        assert resid[64] <= 0.08
        assert 1.7 <= resid[32] / resid[64] <= 2.3

    def test_1d_heat_operator(self):
        errs = []
        for n in (16, 32, 64):
            prob = problem_1d_heat()
            g = make_grid(1, n)
            X = g.coordinates()
            u = Field(g, np.sin(2 * np.pi * X[..., 0]))
            params = make_scheme_params(prob, 1.0)
            out = apply_operator(prob, params, u)
            exact = (2 * np.pi) ** 2 * np.sin(2 * np.pi * X[..., 0])
            errs.append(float(np.abs(out.values - exact).max()))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.25)

    def test_translation_equivariance(self):
        e = catalog.build("counterexample")  # x-independent coefficients
        g = make_grid(2, 16)
        rng = np.random.default_rng(9)
        u = Field(g, 0.1 * rng.normal(size=g.shape))
        params = SchemeParams(lf_viscosity=1.0, grad_range=50.0)
        a = cyclic_shift(apply_operator(e.problem, params, u), (2, 5))
        b = apply_operator(e.problem, params, cyclic_shift(u, (2, 5)))
        assert np.allclose(a.values, b.values, atol=1e-13)

    def test_constant_invariance(self):
        e = catalog.build("strict_cvx_hjb")
        g = make_grid(2, 12)
        rng = np.random.default_rng(2)
        u = Field(g, 0.2 * rng.normal(size=g.shape))
        params = make_scheme_params(e.problem, 3.0)
        a = apply_operator(e.problem, params, u)
        b = apply_operator(e.problem, params, u + 4.2)
        assert np.allclose(a.values, b.values, atol=1e-12)

    def test_nonfinite_named_node(self):
        def H(theta, X, P):
            return np.where(X[..., 0] > 0.4, np.nan, 0.0)

        prob = HJBProblem(1, ControlSet(("only",)), H, {"only": ()}, 1.0)
        g = make_grid(1, 8)
        u = Field(g, np.zeros(8))
        with pytest.raises(Exception, match="node"):
            apply_operator(prob, SchemeParams(1.0, 1.0), u)


class TestStableTimestep:
    def test_pure_first_order(self):
        prob = problem_1d_abs()
        params = SchemeParams(lf_viscosity=1.0, grad_range=1.0, cfl_safety=0.5)
        dt = stable_timestep(prob, params, make_grid(1, 64))
        assert dt == pytest.approx(0.5 / 64, rel=1e-12)

    def test_pure_diffusion_parabolic(self):
        prob = problem_1d_heat(coeff_value=1.0)
        params = SchemeParams(lf_viscosity=1e-9, grad_range=1.0, cfl_safety=0.5)
        h = 1.0 / 64
        dt = stable_timestep(prob, params, make_grid(1, 64))
        assert dt == pytest.approx(0.5 * h * h / 4.0, rel=1e-6)

    def test_linear_in_safety(self):
        prob = problem_1d_abs()
        g = make_grid(1, 32)
        dt_half = stable_timestep(prob, SchemeParams(1.0, 1.0, 0.5), g)
        dt_full = stable_timestep(prob, SchemeParams(1.0, 1.0, 1.0), g)
        assert dt_full == pytest.approx(2.0 * dt_half, rel=1e-12)


class TestSchemeParams:
    def test_rejects_bad_safety(self):
        with pytest.raises(SchemeError):
            SchemeParams(1.0, 1.0, cfl_safety=0.0)
        with pytest.raises(SchemeError):
            SchemeParams(1.0, 1.0, cfl_safety=1.5)

    def test_factory_enforces_bound(self):
        prob = catalog.build("strict_cvx_hjb").problem
        with pytest.raises(SchemeError):
            make_scheme_params(prob, 3.0, lf_viscosity=0.01)
        params = make_scheme_params(prob, 3.0)
        assert params.lf_viscosity > 0


class TestComparisonPrinciple:
    @pytest.mark.parametrize("name", ["counterexample", "namah_roquejoffre"])
    def test_one_step_preserves_order(self, name):
        e = catalog.build(name)
        g = make_grid(e.dim, 16)
        u0 = e.make_u0(g)
        params = make_scheme_params(e.problem, max(1.5 * discrete_lipschitz(u0), e.grad_floor))
        kern = OperatorKernel(e.problem, params, g)
        dt = kern.monotone_timestep()
        rng = np.random.default_rng(1)
        for _ in range(10):
            a = rng.uniform(-0.5, 0.5, g.shape)
            b = a + rng.uniform(0.0, 0.5, g.shape)
            a2 = a - dt * kern.operator(a)
            b2 = b - dt * kern.operator(b)
            assert (a2 - b2).max() <= 1e-12
