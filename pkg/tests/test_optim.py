import numpy as np

from covar.numeric import RngStream
from covar.optim import lbfgs, two_loop


def spd(seed, n=5):
    s = RngStream(seed)
    q = s.gaussian((n, n))
    return q @ q.T + n * np.eye(n)


def quadratic(a, b=None):
    b = np.zeros(len(a)) if b is None else b

    def fun(x):
        return 0.5 * x @ a @ x - b @ x, a @ x - b
    return fun


def test_zero_gradient_returns_immediately():
    calls = []

    def fun(x):
        calls.append(1)
        return float(x @ x), 2 * x

    res = lbfgs(fun, np.zeros(3))
    assert res.n_iters == 0 and res.status == "converged"
    assert len(calls) == 1 and res.trajectory == []


def test_spd_quadratic_converges_to_direct_solve():
    for seed in range(5):
        a = spd(seed)
        x0 = RngStream(100 + seed).gaussian(5)
        res = lbfgs(quadratic(a), x0, max_iters=25, gtol=1e-8)
        assert res.grad_norm < 1e-8 and res.n_iters <= 25
        np.testing.assert_allclose(res.x, np.linalg.solve(a, np.zeros(5)), atol=1e-8)


def test_quadratic_with_linear_term():
    a = spd(7)
    b = RngStream(8).gaussian(5)
    res = lbfgs(quadratic(a, b), np.zeros(5), max_iters=50, gtol=1e-10)
    np.testing.assert_allclose(res.x, np.linalg.solve(a, b), atol=1e-9)


def test_every_step_satisfies_armijo():
    def rosen(x):
        f = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
        g = np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])
        return f, g

    c1 = 1e-4
    res = lbfgs(rosen, np.array([-1.2, 1.0]), max_iters=200, c1=c1)
    assert res.steps
    for st in res.steps:
        assert st.slope < 0
        assert st.f_new <= st.f_old + c1 * st.step * st.slope
    assert res.f < 1e-8


def test_trajectory_is_monotone():
    res = lbfgs(quadratic(spd(3, 8)), RngStream(4).gaussian(8), max_iters=30)
    assert all(b <= a for a, b in zip(res.trajectory, res.trajectory[1:]))


def test_two_loop_without_history_is_identity():
    g = RngStream(0).gaussian(4)
    np.testing.assert_array_equal(two_loop(g, [], []), g)


def test_two_loop_satisfies_latest_secant_condition():
    s = RngStream(12)
    a = spd(11, 4)
    s_hist = [s.gaussian(4) for _ in range(3)]
    y_hist = [a @ v for v in s_hist]
    np.testing.assert_allclose(two_loop(y_hist[-1], s_hist, y_hist), s_hist[-1], rtol=1e-10)


def test_line_search_failure_reports_status(caplog):
    # gradient points the wrong way, so no step ever decreases f
    def liar(x):
        return float(x @ x), -2 * x

    res = lbfgs(liar, np.ones(2), max_backtracks=5)
    assert res.status == "line_search_failed"
    np.testing.assert_array_equal(res.x, np.ones(2))
    assert "line search failed" in caplog.text


def test_max_iters_status():
    res = lbfgs(quadratic(spd(2, 10)), np.ones(10), max_iters=2, gtol=1e-14)
    assert res.status == "max_iters" and res.n_iters == 2
