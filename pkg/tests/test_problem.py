import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from svrn.errors import ContractViolation, NotStronglyConvex
from svrn.problem import (
    Objective,
    ProblemInstance,
    Task,
    load_csv,
    logistic_component_gradient,
    logistic_component_hessian,
    lsq_component_gradient,
    lsq_component_hessian,
    save_csv,
    strong_smooth_estimates,
)


def _component_loss(inst, i, x):
    a, y = inst.A[i], inst.y[i]
    z = a @ x
    data = np.logaddexp(0.0, -y * z) if inst.task is Task.LOGISTIC else 0.5 * (z - y) ** 2
    return data + 0.5 * inst.gamma * (x @ x)


def _central_diff(fun, x, h):
    d = x.shape[0]
    out = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.array(out)


class TestProblemInstance:
    def test_rejects_bad_labels(self):
        with pytest.raises(ContractViolation):
            ProblemInstance(A=np.eye(2), y=np.array([1.0, 0.0]), gamma=0.0, task=Task.LOGISTIC)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ContractViolation):
            ProblemInstance(A=np.eye(3), y=np.zeros(2), gamma=0.0, task="least_squares")

    def test_rejects_negative_gamma(self):
        with pytest.raises(ContractViolation):
            ProblemInstance(A=np.eye(2), y=np.zeros(2), gamma=-1.0, task="least_squares")

    def test_arrays_are_read_only(self):
        inst = random_instance(5, 2, "least_squares")
        with pytest.raises(ValueError):
            inst.A[0, 0] = 1.0


class TestLogisticComponent:
    def test_zero_row_gives_zero_gradient(self):
        inst = ProblemInstance(A=np.zeros((1, 3)), y=np.ones(1), gamma=0.0, task=Task.LOGISTIC)
        x = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(logistic_component_gradient(inst, 0, x), np.zeros(3))

    def test_gradient_at_origin_is_minus_half_row(self):
        a = np.array([[1.0, -2.0, 0.5]])
        inst = ProblemInstance(A=a, y=np.ones(1), gamma=0.0, task=Task.LOGISTIC)
        np.testing.assert_allclose(logistic_component_gradient(inst, 0, np.zeros(3)), -0.5 * a[0])

    def test_gradient_matches_finite_differences(self):
        inst = random_instance(6, 4, "logistic", gamma=0.1, seed=3)
        x = np.random.default_rng(4).standard_normal(4)
        for i in range(inst.n):
            fd = _central_diff(lambda z: _component_loss(inst, i, z), x, 1e-6)
            g = logistic_component_gradient(inst, i, x)
            np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-9)

    def test_hessian_at_origin_is_quarter_outer(self):
        inst = random_instance(3, 4, "logistic", seed=1)
        a = inst.A[2]
        np.testing.assert_allclose(logistic_component_hessian(inst, 2, np.zeros(4)), 0.25 * np.outer(a, a))

    def test_hessian_of_zero_row_with_unit_gamma_is_identity(self):
        inst = ProblemInstance(A=np.zeros((2, 3)), y=np.ones(2), gamma=1.0, task=Task.LOGISTIC)
        np.testing.assert_array_equal(logistic_component_hessian(inst, 1, np.ones(3)), np.eye(3))

    def test_hessian_matches_finite_differences(self):
        inst = random_instance(6, 4, "logistic", gamma=0.1, seed=5)
        x = np.random.default_rng(6).standard_normal(4)
        for i in range(inst.n):
            H = logistic_component_hessian(inst, i, x)
            fd = _central_diff(lambda z: logistic_component_gradient(inst, i, z), x, 1e-5)
            np.testing.assert_allclose(H, fd, rtol=1e-5, atol=1e-8)
            np.testing.assert_allclose(H, H.T)
            assert np.linalg.eigvalsh(H)[0] >= -1e-14

    def test_stable_for_large_margins(self):
        inst = ProblemInstance(A=np.array([[500.0], [-500.0]]), y=np.array([1.0, 1.0]), gamma=0.0,
                               task=Task.LOGISTIC)
        obj = Objective(inst)
        x = np.ones(1)
        assert np.isfinite(obj.loss(x))
        assert np.all(np.isfinite(obj.full_gradient(x)))
        np.testing.assert_allclose(logistic_component_gradient(inst, 1, x), [500.0])

    @pytest.mark.parametrize("i", [-1, 3])
    def test_index_out_of_range(self, i):
        inst = random_instance(3, 2, "logistic")
        with pytest.raises(ContractViolation):
            logistic_component_gradient(inst, i, np.zeros(2))

    def test_wrong_task(self):
        inst = random_instance(3, 2, "least_squares")
        with pytest.raises(ContractViolation):
            logistic_component_hessian(inst, 0, np.zeros(2))


class TestLeastSquaresComponent:
    def test_hand_arithmetic(self):
        inst = ProblemInstance(A=np.array([[1.0, 0.0]]), y=np.array([2.0]), gamma=0.0,
                               task=Task.LEAST_SQUARES)
        np.testing.assert_array_equal(lsq_component_gradient(inst, 0, np.array([1.0, 0.0])), [-1.0, 0.0])

    def test_zero_at_consistent_solution(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((10, 3))
        x = rng.standard_normal(3)
        inst = ProblemInstance(A=A, y=A @ x, gamma=0.0, task=Task.LEAST_SQUARES)
        for i in range(10):
            np.testing.assert_allclose(lsq_component_gradient(inst, i, x), 0.0, atol=1e-12)

    def test_mean_matches_matrix_form(self):
        inst = random_instance(40, 5, "least_squares", gamma=0.3, seed=2)
        x = np.random.default_rng(1).standard_normal(5)
        mean = np.mean([lsq_component_gradient(inst, i, x) for i in range(inst.n)], axis=0)
        direct = inst.A.T @ (inst.A @ x - inst.y) / inst.n + inst.gamma * x
        np.testing.assert_allclose(mean, direct, rtol=1e-12, atol=1e-14)

    def test_hessian(self):
        inst = random_instance(4, 3, "least_squares", gamma=0.5)
        a = inst.A[1]
        np.testing.assert_allclose(lsq_component_hessian(inst, 1, np.ones(3)),
                                   np.outer(a, a) + 0.5 * np.eye(3))


class TestObjective:
    def test_full_gradient_is_component_mean(self, task):
        inst = random_instance(30, 4, task, gamma=0.2, seed=7)
        obj = Objective(inst)
        x = np.random.default_rng(0).standard_normal(4)
        comps = np.array([obj.component_gradient(i, x) for i in range(inst.n)])
        np.testing.assert_allclose(obj.full_gradient(x), comps.mean(axis=0), rtol=1e-12 * inst.n, atol=1e-15)
        # the regularizer is carried by every component
        np.testing.assert_allclose(obj.full_gradient(x) - inst.gamma * x,
                                   (comps - inst.gamma * x).mean(axis=0), rtol=1e-12 * inst.n, atol=1e-15)

    def test_full_hessian_is_component_mean(self, task):
        inst = random_instance(20, 3, task, gamma=0.2, seed=8)
        obj = Objective(inst)
        x = np.random.default_rng(0).standard_normal(3)
        comps = np.mean([obj.component_hessian(i, x) for i in range(inst.n)], axis=0)
        np.testing.assert_allclose(obj.full_hessian(x), comps, rtol=1e-12, atol=1e-15)

    def test_hessian_finite_difference(self, task):
        inst = random_instance(50, 5, task, gamma=0.1, seed=9)
        obj = Objective(inst)
        rng = np.random.default_rng(10)
        x = rng.standard_normal(5)
        v = rng.standard_normal(5)
        v /= np.linalg.norm(v)
        h = 1e-5
        Hv = obj.full_hessian(x) @ v
        fd = (obj.full_gradient(x + h * v) - obj.full_gradient(x)) / h
        assert np.linalg.norm(fd - Hv) <= 10 * h * np.linalg.norm(Hv)

    def test_hessian_spd_with_gamma(self, task):
        inst = random_instance(3, 6, task, gamma=1e-3, seed=11)
        H = Objective(inst).full_hessian(np.ones(6))
        np.testing.assert_array_equal(H, H.T)
        assert np.linalg.eigvalsh(H)[0] > 0

    def test_importance_weights_reproduce_full_gradient(self, task):
        inst = random_instance(25, 3, task, gamma=0.4, seed=12)
        obj = Objective(inst)
        rng = np.random.default_rng(13)
        p = rng.random(inst.n) + 0.05
        p /= p.sum()
        x = rng.standard_normal(3)
        w = 1.0 / (inst.n * p)
        expectation = sum(p[i] * obj.batch_gradient([i], x, w[[i]]) for i in range(inst.n))
        np.testing.assert_allclose(expectation, obj.full_gradient(x), rtol=1e-12, atol=1e-14)

    def test_batch_gradient_of_all_indices_equals_full(self, task):
        inst = random_instance(17, 3, task, gamma=0.1)
        obj = Objective(inst)
        x = np.ones(3)
        np.testing.assert_allclose(obj.batch_gradient(np.arange(17), x), obj.full_gradient(x), rtol=1e-13)

    def test_cost_counters(self):
        obj = Objective(random_instance(10, 2, "least_squares"))
        x = np.zeros(2)
        obj.full_gradient(x)
        obj.batch_gradient([1, 2, 3], x)
        obj.component_gradient(0, x)
        obj.batch_hessian([0, 1], x)
        assert obj.grad_evals == 14
        assert obj.hess_evals == 2
        assert obj.passes == pytest.approx(1.4)
        with obj.uncounted():
            obj.full_gradient(x)
            obj.full_hessian(x)
        assert (obj.grad_evals, obj.hess_evals) == (14, 2)

    def test_empty_batch(self):
        obj = Objective(random_instance(10, 2, "least_squares"))
        with pytest.raises(ContractViolation):
            obj.batch_gradient([], np.zeros(2))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0.0, 10.0))
    def test_lsq_loss_is_quadratic_form(self, seed, gamma):
        inst = random_instance(12, 3, "least_squares", gamma=gamma, seed=seed)
        x = np.random.default_rng(seed).standard_normal(3)
        r = inst.A @ x - inst.y
        expected = 0.5 * (r @ r) / inst.n + 0.5 * gamma * (x @ x)
        assert Objective(inst).loss(x) == pytest.approx(expected, rel=1e-12)


class TestStrongSmoothEstimates:
    def test_identity_matrix(self):
        n = 6
        inst = ProblemInstance(A=np.eye(n), y=np.zeros(n), gamma=0.0, task=Task.LEAST_SQUARES)
        c = strong_smooth_estimates(inst)
        assert c.mu == pytest.approx(1.0 / n)
        assert c.lam == pytest.approx(1.0)
        assert c.kappa == pytest.approx(n)

    def test_gamma_shift(self):
        base = random_instance(32, 4, "least_squares", seed=1)
        shifted = ProblemInstance(A=base.A, y=base.y, gamma=0.7, task=base.task)
        c0, c1 = strong_smooth_estimates(base), strong_smooth_estimates(shifted)
        assert c1.mu - c0.mu == pytest.approx(0.7)
        assert c1.lam - c0.lam == pytest.approx(0.7)
        assert c1.lam_data == c0.lam_data

    def test_matches_svd(self):
        inst = random_instance(32, 4, "least_squares", seed=2)
        s = np.linalg.svd(inst.A, compute_uv=False)
        lam = np.max(np.sum(inst.A ** 2, axis=1))
        kappa = lam / (s[-1] ** 2 / inst.n)
        assert strong_smooth_estimates(inst).kappa == pytest.approx(kappa, rel=1e-8)

    def test_logistic_curvature_cap(self):
        inst = random_instance(32, 4, "logistic", gamma=1e-3, seed=3)
        c = strong_smooth_estimates(inst)
        assert c.lam == pytest.approx(0.25 * np.max(np.sum(inst.A ** 2, axis=1)) + 1e-3)
        assert 0 < c.mu < c.lam

    def test_not_strongly_convex(self):
        A = np.zeros((4, 2))
        A[:, 0] = 1.0
        inst = ProblemInstance(A=A, y=np.zeros(4), gamma=0.0, task=Task.LEAST_SQUARES)
        with pytest.raises(NotStronglyConvex):
            strong_smooth_estimates(inst)


class TestCsv:
    def test_round_trip(self, tmp_path):
        inst = random_instance(9, 3, "least_squares", seed=4)
        path = tmp_path / "p.csv"
        save_csv(inst, path)
        back = load_csv(path, "least_squares", 0.0)
        np.testing.assert_array_equal(back.A, inst.A)
        np.testing.assert_array_equal(back.y, inst.y)

    def test_logistic_label_coercion(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("0,1.0,2.0\n1,3.0,4.0\n1,0.5,0.5\n")
        inst = load_csv(path, "logistic", 1e-3)
        np.testing.assert_array_equal(inst.y, [-1.0, 1.0, 1.0])

    def test_too_many_classes(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("0,1.0\n1,3.0\n2,0.5\n")
        with pytest.raises(ContractViolation):
            load_csv(path, "logistic", 0.0)
