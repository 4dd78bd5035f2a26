import numpy as np
import pytest

import qpush as qp
from qpush import BoxSet, ConstraintTerms, ConvexProgram, CoordinateTerms
from qpush.report import record_schedule
from qpush.solver import AlphaBelowCurvatureWarning

from helpers import (grid_minimize, quiet_alpha_warnings, random_alpha,
                     random_point_in, random_separable_program)


def one_dim_program():
    """f(x) = x, g(x) = x - 1, box [0, 2]."""
    return ConvexProgram.from_terms(
        CoordinateTerms.linear([1.0]),
        ConstraintTerms([[1.0]], [1.0]),
        BoxSet([0.0], [2.0]),
        beta_hint=1.0,
    )


def offset_program(b, lo=-5.0, hi=5.0):
    """Constant-free linear constraints g(x) = x - b on a wide box."""
    m = len(b)
    return ConvexProgram.from_terms(
        CoordinateTerms.linear(np.zeros(m)),
        ConstraintTerms(np.eye(m), np.asarray(b, dtype=float)),
        BoxSet(np.full(m, lo), np.full(m, hi)),
        beta_hint=1.0,
    )


def test_init_from_constraint_values():
    # g(x_init) = (-2, 3) -> Q(0) = (2, 0)
    prog = offset_program([2.0, -3.0])
    state = qp.init(prog, np.zeros(2), 1.0)
    assert np.array_equal(state.Q, [2.0, 0.0])
    assert state.t == 0 and state.x_bar is None
    assert np.array_equal(state.g_prev, [-2.0, 3.0])


def test_init_fig1_queues(fig1_instance):
    state = qp.init(fig1_instance.program, np.zeros(10), 10.0)
    assert np.array_equal(state.Q[:9], np.ones(9))   # = link capacities
    assert np.all(state.Q[9:] == 0.0)
    assert np.array_equal(state.weights, np.zeros(12))


def test_init_zero_constraints_boundary_case():
    prog = offset_program([0.0, 0.0])
    state = qp.init(prog, np.zeros(2), 1.0)
    assert np.array_equal(state.Q, np.zeros(2))
    assert np.linalg.norm(state.Q) == np.linalg.norm(state.g_prev)


def test_init_rejects_bad_inputs():
    prog = one_dim_program()
    with pytest.raises(ValueError):
        qp.init(prog, np.array([3.0]), 1.0)
    with pytest.raises(ValueError):
        qp.init(prog, np.array([1.0]), 0.0)


def test_init_warns_below_curvature():
    prog = one_dim_program()  # beta = 1
    with pytest.warns(AlphaBelowCurvatureWarning):
        qp.init(prog, np.array([0.0]), 0.1)


def test_queue_update_examples():
    assert qp.queue_update([2.0], [-3.0])[0] == 3.0
    assert qp.queue_update([2.0], [1.0])[0] == 3.0
    assert qp.queue_update([0.0], [0.0])[0] == 0.0
    out = qp.queue_update([2.0, 2.0, 0.0], [-3.0, 1.0, 0.0])
    assert np.array_equal(out, [3.0, 3.0, 0.0])
    assert np.all(out >= np.abs([-3.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        qp.queue_update([1.0], [1.0, 2.0])


def test_queue_update_equality_mode():
    assert qp.queue_update([2.0], [-3.0], "equality")[0] == -1.0


def test_one_dim_step_against_grid_search():
    prog = one_dim_program()
    state = qp.init(prog, np.array([0.0]), 1.0)
    state.Q = np.array([1.0])  # puts the weight at W = 1 + (-1) = 0
    qp.step(state, prog)
    # subproblem: x + 0*(x-1) + (x-0)^2 over [0,2]
    ref = grid_minimize(lambda x: x + x * x, 0.0, 2.0)
    assert state.x_prev[0] == pytest.approx(max(ref, 0.0), abs=1e-6)
    assert state.x_prev[0] == 0.0
    assert state.Q[0] == 1.0  # max(1, 1 + (-1))
    assert state.t == 1 and state.x_bar[0] == 0.0


def test_step_fixed_point():
    # g == 0 and f == 0: any interior x_prev is a fixed point
    prog = ConvexProgram.from_terms(
        CoordinateTerms.linear([0.0]),
        ConstraintTerms([[0.0]], [0.0]),
        BoxSet([0.0], [1.0]),
        beta_hint=0.0,
    )
    state = qp.init(prog, np.array([0.5]), 2.0)
    for _ in range(3):
        qp.step(state, prog)
    assert state.x_prev[0] == 0.5
    assert state.Q[0] == 0.0
    assert state.x_bar[0] == pytest.approx(0.5)


def test_run_t1_average_is_first_iterate():
    prog = one_dim_program()
    rep = qp.run(prog, np.array([0.0]), 1.0, 1)
    assert len(rep.t) == 1 and rep.t[0] == 1
    assert np.array_equal(rep.x_bar[0], rep.x[0])
    assert rep.f_xbar[0] == rep.f_x[0]


def test_run_records_schedule_and_lengths():
    prog = one_dim_program()
    rep = qp.run(prog, np.array([0.0]), 1.0, 250, record_every=100)
    assert list(rep.t) == record_schedule(250, 100) == [1, 100, 200, 250]
    rep2 = qp.run(prog, np.array([0.0]), 1.0, 50)
    assert len(rep2.t) == 50  # stride defaults to 1 for short runs


def test_run_determinism_bit_identical(fig1_instance):
    prog = fig1_instance.program
    a = qp.run(prog, np.zeros(10), 10.0, 300, record_every=1)
    b = qp.run(prog, np.zeros(10), 10.0, 300, record_every=1)
    for field in ("x", "x_bar", "Q", "f_x", "f_xbar", "g_x", "g_xbar",
                  "cum_g", "drift", "drift_bound"):
        assert np.array_equal(getattr(a, field), getattr(b, field)), field


def test_averaging_identity():
    prog = qp.fig1_num_instance().program()
    rep = qp.run(prog, np.zeros(10), 10.0, 500, record_every=1)
    means = np.cumsum(rep.x, axis=0) / np.arange(1, 501)[:, None]
    scale = np.maximum(np.abs(means), 1e-30)
    assert (np.abs(rep.x_bar - means) / scale).max() < 1e-10


def test_drift_records_match_recomputation():
    prog = qp.fig1_num_instance().program()
    rep = qp.run(prog, np.zeros(10), 10.0, 200, record_every=1)
    L = 0.5 * (rep.Q ** 2).sum(axis=1)
    state0 = qp.init(prog, np.zeros(10), 10.0)
    L_prev = np.concatenate([[0.5 * float(state0.Q @ state0.Q)], L[:-1]])
    Q_prev = np.vstack([state0.Q, rep.Q[:-1]])
    deltas = L - L_prev
    bounds = (Q_prev * rep.g_x).sum(axis=1) + (rep.g_x ** 2).sum(axis=1)
    assert np.allclose(rep.drift, deltas, atol=1e-12)
    assert np.allclose(rep.drift_bound, bounds, atol=1e-12)
    assert np.all(rep.drift <= rep.drift_bound + 1e-9)


def test_invariants_on_random_programs():
    rng = np.random.default_rng(101)
    with quiet_alpha_warnings():
        for _ in range(25):
            prog = random_separable_program(rng, n_max=10, m_max=4)
            x0 = random_point_in(prog.box, rng)
            rep = qp.run(prog, x0, random_alpha(rng, prog), 200, record_every=1)
            # nonnegative queues and weights
            assert np.all(rep.Q >= 0.0)
            assert np.all(rep.Q + rep.g_x >= -1e-9)
            # queue norm dominates the latest constraint norm
            qn = np.linalg.norm(rep.Q, axis=1)
            gn = np.linalg.norm(rep.g_x, axis=1)
            assert np.all(qn >= gn - 1e-9)
            # queue dominates the cumulative constraint sum
            slack = rep.t[:, None] * 1e-12 + 1e-9
            assert np.all(rep.Q >= rep.cum_g - slack)
            # drift bound
            assert np.all(rep.drift <= rep.drift_bound + 1e-9)


def test_equality_mode_queue_is_running_sum():
    prog = offset_program([0.5, -0.25])
    rep = qp.run(prog, np.zeros(2), 1.0, 50, mode="equality", record_every=1)
    assert np.allclose(rep.Q, rep.cum_g, atol=1e-12)
    assert rep.mode == "equality"
    # equality queues may go negative
    assert rep.Q.min() < 0


def test_mixed_mode_per_constraint():
    prog = offset_program([0.5, -0.25])
    rep = qp.run(prog, np.zeros(2), 1.0, 50, mode=["inequality", "equality"],
                 record_every=1)
    assert np.all(rep.Q[:, 0] >= 0.0)
    assert np.allclose(rep.Q[:, 1], rep.cum_g[:, 1], atol=1e-12)
    assert rep.mode == "mixed"


def test_equality_mode_rejects_nonlinear_rows():
    qpi = qp.generate_qp(2)
    with pytest.raises(qp.ConfigurationError):
        qp.init(qpi.program(), np.zeros(100), 10.0, mode="equality")


def test_oracle_failure_carries_iteration_index():
    prog = one_dim_program()

    def bad_oracle(W, x_prev, alpha):
        raise qp.NonConvergenceError("stuck", iterate=x_prev, residual=1.0,
                                     iterations=7)

    state = qp.init(prog, np.array([0.0]), 1.0)
    qp.step(state, prog)  # one good closed-form step first
    with pytest.raises(qp.NonConvergenceError, match="iteration 1"):
        qp.step(state, prog, oracle=bad_oracle)


def test_run_returns_partial_trace_on_failure():
    prog = one_dim_program()
    good = qp.make_oracle(prog)
    calls = {"n": 0}

    def flaky(W, x_prev, alpha):
        calls["n"] += 1
        if calls["n"] > 5:
            raise qp.NonConvergenceError("gave up", iterate=x_prev,
                                         residual=1.0, iterations=3)
        return good(W, x_prev, alpha)

    with pytest.raises(qp.NonConvergenceError) as err:
        qp.run(prog, np.array([0.0]), 1.0, 20, oracle=flaky, record_every=1)
    partial = err.value.partial_report
    assert len(partial.t) == 5 and partial.iterations == 5


def test_verify_bounds_detects_violation(fig1_instance):
    prog = fig1_instance.program
    rep = qp.run(prog, np.zeros(10), 10.0, 200, record_every=1)
    z_star, lam_star, f_star = qp.fig1_reference()
    good = qp.verify_bounds(rep, f_star, z_star, lam_star, prog.beta_hint)
    assert good.ok
    rep.Q = rep.Q.copy()
    rep.Q[120, 3] = rep.cum_g[120, 3] - 1e-5  # corrupt one queue entry
    bad = qp.verify_bounds(rep, f_star, z_star, lam_star, prog.beta_hint)
    assert bad.passed("queue_lower") is False
    assert bad.worst("queue_lower") == pytest.approx(-1e-5, rel=1e-3)
    idx = int(np.argmin(bad.queue_lower_margin))
    assert bad.t[idx] == rep.t[120]


def test_verify_bounds_skips_when_alpha_too_small(fig1_instance):
    prog = fig1_instance.program
    with quiet_alpha_warnings():
        rep = qp.run(prog, np.zeros(10), 0.5, 100, record_every=1)
    z_star, lam_star, f_star = qp.fig1_reference()
    bounds = qp.verify_bounds(rep, f_star, z_star, lam_star, prog.beta_hint)
    assert bounds.passed("constraint") is None
    assert bounds.passed("queue") is None
    assert "alpha" in bounds.skipped["constraint"]
    assert bounds.passed("queue_lower") is not None  # never skipped
    assert bounds.ok in (True, False)


def test_verify_bounds_t1_instantiation(fig1_instance):
    prog = fig1_instance.program
    rep = qp.run(prog, np.zeros(10), 10.0, 1)
    z_star, lam_star, f_star = qp.fig1_reference()
    bounds = qp.verify_bounds(rep, f_star, z_star, lam_star, prog.beta_hint)
    expect = f_star + 10.0 * float(z_star @ z_star) - rep.f_xbar[0]
    assert bounds.objective_margin[0] == pytest.approx(expect, rel=1e-12)


def test_qp_queue_norm_bounded_by_certificate(qp_seed1):
    program = qp_seed1.program()
    alpha = 0.5 * qp_seed1.beta() ** 2 + 1.0
    rep = qp.run(program, np.zeros(100), alpha, 10_000)
    ref = qp.qp_reference_optimum(qp_seed1)
    bounds = qp.verify_bounds(rep, ref.f, ref.x, np.array([ref.lam]),
                              qp_seed1.beta())
    assert np.isfinite(rep.f_xbar).all() and np.isfinite(rep.queue_norm).all()
    assert bounds.passed("queue") is True
    assert bounds.ok


def test_derive_reference_small_program():
    prog = qp.fig1_num_instance().program()
    ref = qp.derive_reference(prog, 0.5 * prog.beta_hint ** 2 + 1.0, 20_000)
    assert ref.kkt < 1e-6
    z_star, _, f_star = qp.fig1_reference()
    assert ref.f == pytest.approx(f_star, abs=1e-6)
    assert np.abs(ref.x - z_star).max() < 1e-3
