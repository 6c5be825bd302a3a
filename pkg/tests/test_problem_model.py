import numpy as np
import pytest

from hjb_torus import (
    ControlSet,
    HJBProblem,
    LatticeDirection,
    ModelError,
    SigmaColumn,
    degeneracy_set,
    eval_diffusion,
    eval_hamiltonian,
    lipschitz_viscosity,
    make_grid,
)
from hjb_torus import catalog


def quadratic_problem(dim=2):
    def H(theta, X, P):
        return (P * P).sum(axis=-1)

    return HJBProblem(
        dim=dim,
        controls=ControlSet(("only",)),
        hamiltonian=H,
        sigma={"only": ()},
        lipschitz_p_bound=8.0,
    )


def linear_problem(b):
    b = np.asarray(b, dtype=float)

    def H(theta, X, P):
        return (P * b).sum(axis=-1)

    return HJBProblem(
        dim=len(b),
        controls=ControlSet(("only",)),
        hamiltonian=H,
        sigma={"only": ()},
        lipschitz_p_bound=float(np.linalg.norm(b)) + 0.1,
    )


def paper_counterexample_H():
    """The 2pi-torus counterexample Hamiltonian as printed: |p+(1,1)|/sqrt2 - 1."""

    def H(theta, X, P):
        q1 = P[..., 0] + 1.0
        q2 = P[..., 1] + 1.0
        return np.sqrt(q1 * q1 + q2 * q2) / np.sqrt(2.0) - 1.0

    return HJBProblem(
        dim=2,
        controls=ControlSet(("only",)),
        hamiltonian=H,
        sigma={"only": ()},
        lipschitz_p_bound=1.0,
    )


class TestControlSet:
    def test_rejects_empty(self):
        with pytest.raises(ModelError):
            ControlSet(())

    def test_rejects_duplicates(self):
        with pytest.raises(ModelError):
            ControlSet(("a", "a"))


class TestEvalHamiltonian:
    def test_quadratic_at_2_0(self):
        prob = quadratic_problem()
        val = eval_hamiltonian(prob, "only", np.zeros(2), np.array([2.0, 0.0]))
        assert val == pytest.approx(4.0)

    def test_counterexample_zero(self):
        prob = paper_counterexample_H()
        val = eval_hamiltonian(prob, "only", np.zeros(2), np.zeros(2))
        assert val == pytest.approx(0.0, abs=1e-15)

    def test_example33_at_zero_gradient(self):
        e = catalog.build("nonconvex_bs")
        X = np.array([[0.13, 0.4], [0.77, 0.9]])
        vals = eval_hamiltonian(e.problem, "only", X, np.zeros_like(X))
        f = 1.0 - np.cos(2 * np.pi * X[:, 0])
        assert np.allclose(vals, -f, atol=1e-14)

    def test_nonfinite_raises(self):
        def H(theta, X, P):
            return np.where(P[..., 0] > 1.0, np.inf, 0.0)

        prob = HJBProblem(1, ControlSet(("t0",)), H, {"t0": ()}, 1.0)
        with pytest.raises(ModelError, match="t0"):
            eval_hamiltonian(prob, "t0", np.zeros((3, 1)), np.array([[0.0], [2.0], [0.0]]))


class TestEvalDiffusion:
    def test_zero_sigma(self):
        prob = quadratic_problem()
        A = eval_diffusion(prob, "only", np.array([0.3, 0.4]))
        assert np.all(A == 0.0) and A.shape == (2, 2)

    def test_counterexample_matrix(self):
        e = catalog.build("counterexample")
        A = eval_diffusion(e.problem, "only", np.array([0.2, 0.9]))
        assert np.allclose(A, np.array([[1.0, -1.0], [-1.0, 1.0]]), atol=1e-15)

    def test_1d_coefficient_square(self):
        def coeff(X):
            return X[..., 0]

        prob = HJBProblem(
            1,
            ControlSet(("only",)),
            lambda th, X, P: 0.0 * P[..., 0],
            {"only": (SigmaColumn(coeff, LatticeDirection((1,))),)},
            1.0,
        )
        A = eval_diffusion(prob, "only", np.array([0.25]))
        assert A.reshape(()) == pytest.approx(0.0625)

    def test_psd_on_samples(self):
        rng = np.random.default_rng(3)
        for name in catalog.list_names():
            e = catalog.build(name)
            X = rng.uniform(0, 1, size=(1000, e.dim))
            for theta in e.problem.controls.thetas:
                A = eval_diffusion(e.problem, theta, X)
                eigs = np.linalg.eigvalsh(A)
                assert eigs.min() >= -1e-12


class TestDegeneracySet:
    def test_zero_sigma_everywhere(self):
        prob = quadratic_problem(dim=1)
        g = make_grid(1, 16)
        mask = degeneracy_set(prob, g)
        assert mask.in_sigma.all()

    def test_strict_on_sigma_interval(self):
        e = catalog.build("strict_on_sigma_1d")
        g = make_grid(1, 64)
        mask = degeneracy_set(e.problem, g)
        X = g.coordinates()[..., 0]
        expected = (X >= 0.25 - 1e-12) & (X <= 0.75 + 1e-12)
        assert np.array_equal(mask.in_sigma, expected)

    def test_counterexample_empty(self):
        e = catalog.build("counterexample")
        mask = degeneracy_set(e.problem, make_grid(2, 16))
        assert mask.is_empty

    def test_monotone_in_tol(self):
        e = catalog.build("namah_roquejoffre")
        g = make_grid(1, 32)
        m1 = degeneracy_set(e.problem, g, tol=1e-8)
        m2 = degeneracy_set(e.problem, g, tol=1e-2)
        assert np.all(~m1.in_sigma | m2.in_sigma)


class TestLipschitzViscosity:
    def test_linear_unit_drift(self):
        prob = linear_problem(np.array([1.0, 0.0]) @ np.array([[np.cos(0.7), np.sin(0.7)], [-np.sin(0.7), np.cos(0.7)]]))
        bound = lipschitz_viscosity(prob, 2.0)
        assert 1.0 <= bound <= 1.05

    def test_quadratic_range_2(self):
        bound = lipschitz_viscosity(quadratic_problem(), 2.0)
        assert 4.0 <= bound <= 4.2

    def test_counterexample_slope(self):
        bound = lipschitz_viscosity(paper_counterexample_H(), 3.0)
        target = 1.0 / np.sqrt(2.0)
        assert target <= bound <= target * 1.05

    def test_monotone_in_grad_range(self):
        prob = quadratic_problem()
        bounds = [lipschitz_viscosity(prob, r) for r in (0.5, 1.0, 2.0, 4.0)]
        assert all(b1 <= b2 + 1e-12 for b1, b2 in zip(bounds, bounds[1:]))
