"""Virtual-queue prox solver.

Each iteration observes the previous iterate x(t-1) and the queue vector
Q(t), builds the weights W = Q(t) + g(x(t-1)), and performs

    x(t)      = argmin over the box of  f(x) + W.g(x) + alpha||x - x(t-1)||^2
    Q_k(t+1)  = max(-g_k(x(t)), Q_k(t) + g_k(x(t)))        (inequality rows)
                Q_k(t) + g_k(x(t))                          (equality rows)
    xbar(t+1) = xbar(t) * t/(t+1) + x(t) / (t+1)

with Q_k(0) = max(0, -g_k(x_init)) on inequality rows and 0 on equality
rows (so an equality queue is exactly the running constraint sum).  For
the averaged iterate to carry the O(1/t) guarantees, alpha must be at
least beta^2/2 where beta is the Lipschitz modulus of g on the box; the
solver only warns when that cannot be verified, since exploring smaller
alpha is legitimate.

Runtime invariants maintained on inequality rows (checked each step when
``validate`` is on, with absolute tolerance 1e-9 at desk scale):

* queues stay nonnegative and the weights W stay nonnegative,
* |Q_k(t)| >= |g_k(x(t-1))| for t >= 1 (reversed at t = 0),
* the Lyapunov drift of 0.5||Q||^2 never exceeds Q(t).g(x(t)) + ||g(x(t))||^2,
* Q_k(t) >= sum_{tau<t} g_k(x(tau)).
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NonConvergenceError
from .oracles import make_oracle
from .program import evaluate
from .report import TraceRecorder

__all__ = [
    "SolverState",
    "DriftRecord",
    "AlphaBelowCurvatureWarning",
    "init",
    "queue_update",
    "step",
    "run",
    "BoundReport",
    "verify_bounds",
    "TightReference",
    "derive_reference",
    "kkt_residual",
]

INVARIANT_TOL = 1e-9


class AlphaBelowCurvatureWarning(UserWarning):
    """alpha < beta^2/2 (or beta unknown): O(1/t) guarantees not certified."""


@dataclass(frozen=True)
class DriftRecord:
    """Lyapunov drift of 0.5||Q||^2 over one step and its upper bound."""

    t: int
    L: float
    delta: float
    bound: float


@dataclass
class SolverState:
    """Mutable state owned by a single run; one step depends on the last."""

    t: int
    x_prev: np.ndarray
    g_prev: np.ndarray
    Q: np.ndarray
    x_bar: np.ndarray
    alpha: float
    eq_mask: np.ndarray
    cum_g: np.ndarray
    f_prev: float = float("nan")
    last_drift: DriftRecord = None

    @property
    def mode(self):
        if not self.eq_mask.any():
            return "inequality"
        if self.eq_mask.all():
            return "equality"
        return "mixed"

    @property
    def weights(self):
        return self.Q + self.g_prev


def _parse_mode(mode, m):
    """Accept 'inequality', 'equality', or a per-constraint sequence."""
    if isinstance(mode, str):
        if mode == "inequality":
            return np.zeros(m, dtype=bool)
        if mode == "equality":
            return np.ones(m, dtype=bool)
        raise ValueError(f"unknown mode {mode!r}")
    modes = list(mode)
    if len(modes) != m:
        raise ValueError("per-constraint mode list must have length m")
    return np.array([mm == "equality" for mm in modes], dtype=bool)


def queue_update(Q, g_now, mode="inequality"):
    """One queue transition.

    Inequality rows take max(-g, Q + g), which keeps the queue at least
    |g|; equality rows accumulate Q + g so the queue equals the running
    constraint sum.
    """
    Q = np.asarray(Q, dtype=float)
    g_now = np.asarray(g_now, dtype=float)
    if Q.shape != g_now.shape:
        raise ValueError("queue and constraint vectors must have equal length")
    eq = _parse_mode(mode, Q.shape[0]) if not isinstance(mode, np.ndarray) else mode
    plus = Q + g_now
    out = np.where(eq, plus, np.maximum(-g_now, plus))
    return out


def init(program, x_init, alpha, mode="inequality"):
    """Set up a solver state at t = 0.

    ``x_init`` plays the role of the initial guess x(-1) and must lie in
    the box.  Inequality queues start at max(0, -g_k(x_init)); equality
    queues start at zero.
    """
    x_init = np.asarray(x_init, dtype=float)
    if x_init.shape != (program.n,):
        raise ValueError(f"x_init has shape {x_init.shape}, expected ({program.n},)")
    if not program.box.contains(x_init):
        raise ValueError("x_init lies outside the box")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    eq_mask = _parse_mode(mode, program.m)
    if eq_mask.any() and program.constraint_terms is not None:
        rows = np.flatnonzero(eq_mask)
        ct = program.constraint_terms
        if ct.quad[rows].any() or ct.neglog1p[rows].any():
            raise ConfigurationError("equality mode is only supported on linear constraint rows")
    beta = program.beta_hint
    if beta is None:
        warnings.warn("beta is unknown; cannot verify alpha >= beta^2/2",
                      AlphaBelowCurvatureWarning, stacklevel=2)
    elif alpha < 0.5 * beta * beta:
        warnings.warn(
            f"alpha={alpha:g} < beta^2/2={0.5 * beta * beta:g}; convergence "
            "guarantees are not certified", AlphaBelowCurvatureWarning, stacklevel=2)
    g0 = program.constraint_values(x_init)
    Q0 = np.where(eq_mask, 0.0, np.maximum(0.0, -g0))
    return SolverState(
        t=0,
        x_prev=x_init.copy(),
        g_prev=g0,
        Q=Q0,
        x_bar=None,
        alpha=float(alpha),
        eq_mask=eq_mask,
        cum_g=np.zeros(program.m),
    )


def _check_invariants(state, Q_next, g_now, delta, bound):
    ineq = ~state.eq_mask
    if np.any(state.Q[ineq] < 0):
        raise AssertionError("queue invariant violated: Q_k < 0")
    W = state.Q + state.g_prev
    if np.any(W[ineq] < -INVARIANT_TOL):
        raise AssertionError("weight invariant violated: Q_k + g_k(x_prev) < 0")
    if np.any(np.abs(Q_next[ineq]) < np.abs(g_now[ineq]) - INVARIANT_TOL):
        raise AssertionError("queue lower bound violated: |Q_k(t+1)| < |g_k(x(t))|")
    if delta > bound + INVARIANT_TOL:
        raise AssertionError("drift exceeded its upper bound")
    if np.any(Q_next < state.cum_g + g_now - (state.t + 1) * 1e-12 - INVARIANT_TOL):
        raise AssertionError("queue fell below the cumulative constraint sum")


def step(state, program, oracle=None, validate=True):
    """Advance one iteration in place and return the state.

    The cached g(x(t-1)) is reused for the weights so the subproblem and
    the previous queue update see exactly the same numbers.
    """
    if oracle is None:
        oracle = make_oracle(program)
    W = state.Q + state.g_prev
    try:
        x_new = oracle(W, state.x_prev, state.alpha)
    except NonConvergenceError as exc:
        raise NonConvergenceError(
            f"primal oracle failed at iteration {state.t}: {exc}",
            iterate=exc.iterate, residual=exc.residual,
            iterations=exc.iterations) from exc
    f_new, g_new = evaluate(program, x_new)
    Q_next = queue_update(state.Q, g_new, state.eq_mask)
    L = 0.5 * float(state.Q @ state.Q)
    delta = 0.5 * float(Q_next @ Q_next) - L
    bound = float(state.Q @ g_new) + float(g_new @ g_new)
    if validate:
        _check_invariants(state, Q_next, g_new, delta, bound)
    t = state.t
    if state.x_bar is None:
        state.x_bar = x_new.copy()
    else:
        state.x_bar = state.x_bar * (t / (t + 1.0)) + x_new / (t + 1.0)
    state.cum_g += g_new
    state.last_drift = DriftRecord(t=t, L=L, delta=delta, bound=bound)
    state.x_prev = x_new
    state.g_prev = g_new
    state.f_prev = f_new
    state.Q = Q_next
    state.t = t + 1
    return state


def run(program, x_init, alpha, T, oracle=None, mode="inequality",
        record_every=None, validate=True, label="program"):
    """Run ``T`` iterations and collect a trace.

    Rows are recorded every ``record_every`` iterations (defaults to
    roughly 1000 rows) plus always at t = 1 and t = T.  Row t holds the
    iterate x(t-1), the queue Q(t), the running average xbar(t) and the
    drift of the step that produced them.  Deterministic given inputs.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if oracle is None:
        oracle = make_oracle(program)
    state = init(program, x_init, alpha, mode)
    recorder = TraceRecorder(T, record_every)

    def build(iterations, wall):
        return recorder.build(
            algorithm="vq",
            problem=label,
            alpha=alpha,
            iterations=iterations,
            mode=state.mode,
            oracle=getattr(oracle, "name", type(oracle).__name__),
            x_init=np.asarray(x_init, dtype=float).copy(),
            wall_time=wall,
            program=program,
        )

    started = time.perf_counter()
    for _ in range(T):
        try:
            step(state, program, oracle, validate=validate)
        except NonConvergenceError as exc:
            # hand back whatever was recorded up to the failure
            if recorder.rows:
                exc.partial_report = build(state.t, time.perf_counter() - started)
            raise
        if recorder.wants(state.t):
            f_xbar, g_xbar = evaluate(program, state.x_bar)
            recorder.add(state.t, state.x_prev, state.x_bar, state.Q,
                         state.f_prev, state.g_prev, f_xbar, g_xbar,
                         state.cum_g, state.last_drift.delta,
                         state.last_drift.bound)
    return build(T, time.perf_counter() - started)


# ---------------------------------------------------------------------------
# Certified error bounds for a finished run

@dataclass
class BoundReport:
    """Pass/fail margins of the four a-posteriori bounds per recorded t.

    Margins are bound minus achieved value, so nonnegative (up to the
    slack) means pass.  Bounds whose constants are undefined for the run
    are reported as skipped, not failed.
    """

    t: np.ndarray
    objective_margin: np.ndarray
    constraint_margin: np.ndarray
    queue_margin: np.ndarray
    queue_lower_margin: np.ndarray
    constant: float
    slack: float
    skipped: dict

    _NAMES = ("objective", "constraint", "queue", "queue_lower")

    def margins(self, name):
        return getattr(self, f"{name}_margin")

    def passed(self, name):
        if name in self.skipped:
            return None
        return bool(np.all(self.margins(name) >= -self.slack))

    def worst(self, name):
        if name in self.skipped:
            return float("nan")
        return float(self.margins(name).min())

    @property
    def ok(self):
        return all(self.passed(n) in (True, None) for n in self._NAMES)

    def summary(self):
        return {name: {"passed": self.passed(name), "worst_margin": self.worst(name),
                       "skipped": self.skipped.get(name)}
                for name in self._NAMES}

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,objective_margin,constraint_margin,queue_margin,queue_lower_margin\n")
            for i in range(len(self.t)):
                fh.write(",".join(format(v, ".17g") for v in (
                    self.t[i], self.objective_margin[i], self.constraint_margin[i],
                    self.queue_margin[i], self.queue_lower_margin[i])) + "\n")


def verify_bounds(report, f_star, x_star, lambda_star, beta, slack=1e-9):
    """Check a trace against the certified decay bounds.

    For every recorded t >= 1:

    * objective:   f(xbar(t)) <= f* + alpha ||x* - x(-1)||^2 / t
    * constraint:  max_k g_k(xbar(t)) <= C / t
    * queue:       ||Q(t)|| <= C
    * queue_lower: Q_k(t) >= sum_{tau<t} g_k(x(tau))

    with C = 2||lambda*|| + sqrt(2 alpha)||x* - x(-1)||
           + sqrt(alpha / (alpha - beta^2/2)) ||g(x*)||.

    The reference (f*, x*, lambda*) must come from the literature value
    or an independent derivation.  The constraint and queue bounds need
    alpha > beta^2/2 and the objective bound needs alpha >= beta^2/2;
    otherwise those checks are skipped.
    """
    program = report.program
    if program is None:
        raise ConfigurationError("report carries no program reference")
    x_star = np.asarray(x_star, dtype=float)
    lambda_star = np.asarray(lambda_star, dtype=float)
    alpha = report.alpha
    x_init = report.x_init
    dist = float(np.linalg.norm(x_star - x_init))
    g_star = program.constraint_values(x_star)
    t = report.t.astype(float)
    skipped = {}

    half_beta_sq = 0.5 * beta * beta
    if alpha + 1e-15 >= half_beta_sq:
        obj_bound = f_star + alpha * dist * dist / t
        objective_margin = obj_bound - report.f_xbar
    else:
        objective_margin = np.full_like(t, np.nan)
        skipped["objective"] = "alpha < beta^2/2"

    if alpha > half_beta_sq:
        constant = (2.0 * float(np.linalg.norm(lambda_star))
                    + np.sqrt(2.0 * alpha) * dist
                    + np.sqrt(alpha / (alpha - half_beta_sq)) * float(np.linalg.norm(g_star)))
        constraint_margin = constant / t - report.g_xbar.max(axis=1)
        queue_margin = constant - report.queue_norm
    else:
        constant = float("nan")
        constraint_margin = np.full_like(t, np.nan)
        queue_margin = np.full_like(t, np.nan)
        skipped["constraint"] = "alpha <= beta^2/2"
        skipped["queue"] = "alpha <= beta^2/2"

    queue_lower_margin = (report.Q - report.cum_g).min(axis=1)

    return BoundReport(
        t=report.t.copy(),
        objective_margin=objective_margin,
        constraint_margin=constraint_margin,
        queue_margin=queue_margin,
        queue_lower_margin=queue_lower_margin,
        constant=constant,
        slack=slack,
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Reference derivation: long tight solves and KKT certification

@dataclass(frozen=True)
class TightReference:
    """Primal/dual pair from a long run, with its KKT residual."""

    x: np.ndarray
    lam: np.ndarray
    f: float
    kkt: float


def kkt_residual(program, x, lam, boundary_tol=1e-9):
    """Max violation of the first-order optimality system at (x, lam).

    Checks stationarity of the Lagrangian against the box normal cone,
    primal feasibility, dual feasibility and complementary slackness;
    returns the largest violation.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    g = program.constraint_values(x)
    grad = program.objective_subgradient(x) + program.constraint_jacobian(x).T @ lam
    lo, hi = program.box.lo, program.box.hi
    at_lo = x <= lo + boundary_tol
    at_hi = x >= hi - boundary_tol
    stat = np.abs(grad.copy())
    stat[at_lo] = np.maximum(0.0, -grad[at_lo])
    stat[at_hi & ~at_lo] = np.maximum(0.0, grad[at_hi & ~at_lo])
    residuals = [
        float(stat.max()) if stat.size else 0.0,
        float(np.maximum(g, 0.0).max()) if g.size else 0.0,
        float(np.maximum(-lam, 0.0).max()) if lam.size else 0.0,
        float(np.abs(lam * g).max()) if g.size else 0.0,
        float(np.maximum(lo - x, 0.0).max()),
        float(np.maximum(x - hi, 0.0).max()),
    ]
    return max(residuals)


def derive_reference(program, alpha, T, x_init=None, oracle=None):
    """Derive (x*, lambda*) from a long tight solve.

    Runs ``T`` iterations without recording and returns the final iterate
    with the final weight vector W = Q + g(x) as the multiplier estimate,
    plus the KKT residual of the pair.  Callers decide whether the
    residual is small enough for their purpose.
    """
    if x_init is None:
        x_init = program.box.clamp(np.zeros(program.n))
    if oracle is None:
        oracle = make_oracle(program)
    state = init(program, x_init, alpha)
    for _ in range(T):
        step(state, program, oracle, validate=False)
    lam = state.Q + state.g_prev
    x = state.x_prev
    return TightReference(x=x, lam=lam, f=program.objective_value(x),
                          kkt=kkt_residual(program, x, lam))
