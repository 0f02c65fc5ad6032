"""Four solvers for the constrained stencil-learning quadratic program.

* solve_pg / solve_nag: projected gradient and its Nesterov-accelerated
  variant, applied to the equality-constrained problem only (the box
  bound is deliberately not enforced; sequential projection onto the
  subspace and the box is not the exact projection onto their
  intersection, so requesting it raises).
* solve_admm: operator splitting with an exact KKT solve for the
  w-update (factored once) and componentwise box clipping for z.
* solve_reference: high-accuracy baseline; an equality-constrained KKT
  solve followed by a primal active-set loop over the box constraints.
  Exact for these small, strictly convex problems.

All solvers start from the zero stencil (projected onto the constraints
for PG/NAG) and record per-iteration traces of the objective, equality
residual ||Cw-d||, iterate change, and wall-clock time.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .core import NumericalError
from .regression import (
    ConstraintSet,
    RegressionSystem,
    lipschitz_estimate,
    objective_and_gradient,
    project_affine,
)

PG = "PG"
NAG = "NAG"
ADMM = "ADMM"
REFERENCE = "REFERENCE"

_DEFAULT_MAX_ITERS = {PG: 500, NAG: 500, ADMM: 100}


@dataclass(frozen=True)
class SolverOptions:
    """max_iters=None picks the per-method default (500 for PG/NAG, 100
    for ADMM). tol stops on the iterate change (PG/ADMM) or on the
    projected-gradient mapping (NAG, whose momentum makes raw iterate
    changes an unreliable stationarity measure). step overrides the
    default 1/L stepsize."""

    max_iters: int | None = None
    tol: float = 1e-12
    rho: float = 0.05
    step: float | None = None
    enforce_box: bool = False

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.rho <= 0:
            raise ValueError("ADMM penalty rho must be positive")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")

    def resolve_max_iters(self, method: str) -> int:
        return self.max_iters if self.max_iters is not None else _DEFAULT_MAX_ITERS[method]


@dataclass(frozen=True, eq=False)
class SolverReport:
    """Traces are aligned: entry k holds the state after iteration k+1."""

    w_final: np.ndarray
    objective_trace: np.ndarray
    eq_residual_trace: np.ndarray
    step_diff_trace: np.ndarray
    time_trace: np.ndarray
    iterations: int
    method: str

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "w_final": [float(v) for v in self.w_final],
            "objective_trace": [float(v) for v in self.objective_trace],
            "eq_residual_trace": [float(v) for v in self.eq_residual_trace],
            "step_diff_trace": [float(v) for v in self.step_diff_trace],
            "time_trace": [float(v) for v in self.time_trace],
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "objective", "eq_residual", "step_diff", "elapsed_s"])
            for k in range(self.iterations):
                writer.writerow([
                    k + 1,
                    repr(float(self.objective_trace[k])),
                    repr(float(self.eq_residual_trace[k])),
                    repr(float(self.step_diff_trace[k])),
                    repr(float(self.time_trace[k])),
                ])


class _Trace:
    def __init__(self, method: str):
        self.method = method
        self.objective: list[float] = []
        self.residual: list[float] = []
        self.step_diff: list[float] = []
        self.elapsed: list[float] = []
        self._t0 = time.perf_counter()

    def record(self, f: float, res: float, diff: float) -> None:
        if not np.isfinite(f):
            raise NumericalError(f"{self.method}: objective became non-finite at iteration {len(self.objective) + 1}")
        self.objective.append(f)
        self.residual.append(res)
        self.step_diff.append(diff)
        self.elapsed.append(time.perf_counter() - self._t0)

    def report(self, w_final: np.ndarray) -> SolverReport:
        return SolverReport(
            w_final=np.asarray(w_final, dtype=float).copy(),
            objective_trace=np.array(self.objective),
            eq_residual_trace=np.array(self.residual),
            step_diff_trace=np.array(self.step_diff),
            time_trace=np.array(self.elapsed),
            iterations=len(self.objective),
            method=self.method,
        )


def _stepsize(sys: RegressionSystem, opts: SolverOptions) -> float:
    if opts.step is not None:
        return opts.step
    lip = lipschitz_estimate(sys)
    if lip <= 0.0:
        return 1.0
    return 1.0 / lip


def _reject_box(opts: SolverOptions, method: str) -> None:
    if opts.enforce_box:
        raise ValueError(
            f"{method} enforces only the linear equality constraint; projecting "
            "sequentially onto the constraint subspace and the box is not the exact "
            "Euclidean projection onto their intersection. Use solve_admm or "
            "solve_reference for box-constrained solves."
        )


def solve_pg(sys: RegressionSystem, cs: ConstraintSet, opts: SolverOptions = SolverOptions()) -> SolverReport:
    """Projected gradient: w <- P(w - alpha grad f(w)). Monotone descent
    for alpha <= 1/L; every iterate is feasible by construction."""
    _reject_box(opts, "PG")
    alpha = _stepsize(sys, opts)
    w = project_affine(np.zeros(sys.n_coeffs), cs)
    trace = _Trace(PG)
    for _ in range(opts.resolve_max_iters(PG)):
        f, grad = objective_and_gradient(sys, w)
        w_new = project_affine(w - alpha * grad, cs)
        diff = float(np.linalg.norm(w_new - w))
        f_new, _ = objective_and_gradient(sys, w_new)
        trace.record(f_new, cs.residual(w_new), diff)
        w = w_new
        if diff <= opts.tol:
            break
    return trace.report(w)


def solve_nag(sys: RegressionSystem, cs: ConstraintSet, opts: SolverOptions = SolverOptions()) -> SolverReport:
    """Nesterov-accelerated projected gradient with the standard momentum
    schedule t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2, beta_k = (t_k - 1) / t_{k+1},
    t_0 = 1 (the first extrapolation is null). The objective may
    oscillate; stopping uses the projected-gradient mapping."""
    _reject_box(opts, "NAG")
    alpha = _stepsize(sys, opts)
    w = project_affine(np.zeros(sys.n_coeffs), cs)
    w_prev = w.copy()
    t = 1.0
    trace = _Trace(NAG)
    for _ in range(opts.resolve_max_iters(NAG)):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        y = w + beta * (w - w_prev)
        _, grad_y = objective_and_gradient(sys, y)
        w_new = project_affine(y - alpha * grad_y, cs)
        f_new, grad_new = objective_and_gradient(sys, w_new)
        trace.record(f_new, cs.residual(w_new), float(np.linalg.norm(w_new - w)))
        mapping = float(np.linalg.norm(w_new - project_affine(w_new - alpha * grad_new, cs)))
        w_prev, w, t = w, w_new, t_next
        if mapping <= opts.tol:
            break
    return trace.report(w)


def solve_admm(
    sys: RegressionSystem,
    cs: ConstraintSet,
    opts: SolverOptions = SolverOptions(),
    init: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> SolverReport:
    """ADMM on the split w = z with Cw = d exact and z box-clipped.

    The w-update solves the saddle system
        [A^T A + (lam + rho) I, C^T; C, 0] [w; eta] = [A^T b + rho (z - u); d],
    factored once and reused every iteration. Returns the final z, which
    is feasible for the box by construction. `init` optionally provides
    (w0, z0, u0); the default is all zeros.
    """
    n = sys.n_coeffs
    m = cs.n_constraints
    rho = opts.rho
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = sys.gram + (sys.lam + rho) * np.eye(n)
    kkt[:n, n:] = cs.C.T
    kkt[n:, :n] = cs.C
    try:
        lu = scipy.linalg.lu_factor(kkt)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("ADMM KKT matrix is singular") from exc
    if init is None:
        w = np.zeros(n)
        z = np.zeros(n)
        u = np.zeros(n)
    else:
        w, z, u = (np.asarray(v, dtype=float).copy() for v in init)
    rhs = np.zeros(n + m)
    rhs[n:] = cs.d
    trace = _Trace(ADMM)
    for _ in range(opts.resolve_max_iters(ADMM)):
        rhs[:n] = sys.atb + rho * (z - u)
        w_new = scipy.linalg.lu_solve(lu, rhs)[:n]
        z = np.clip(w_new + u, -sys.M, sys.M)
        u = u + w_new - z
        diff = float(np.linalg.norm(w_new - w))
        f, _ = objective_and_gradient(sys, w_new)
        trace.record(f, cs.residual(w_new), diff)
        w = w_new
        if diff <= opts.tol:
            break
    return trace.report(z)


def solve_reference(sys: RegressionSystem, cs: ConstraintSet, opts: SolverOptions = SolverOptions()) -> SolverReport:
    """Active-set solve of the full equality-plus-box QP to KKT tolerance
    1e-10. When no box constraint is active this reduces to a single
    equality-constrained KKT solve. At stencil dimensions (<= 9 unknowns)
    the method is exact, so it serves as the optimality baseline for the
    first-order solvers."""
    n = sys.n_coeffs
    m = cs.n_constraints
    H = sys.gram + sys.lam * np.eye(n)
    M = sys.M
    kkt_tol = 1e-10
    w = project_affine(np.zeros(n), cs)
    if np.max(np.abs(w)) > M + kkt_tol:
        raise NumericalError("reference solver: projected zero stencil is outside the box")
    working: list[tuple[int, float]] = []  # (coefficient index, bound sign)
    trace = _Trace(REFERENCE)
    cap = 2 ** n
    for _ in range(cap):
        k = len(working)
        kkt = np.zeros((n + m + k, n + m + k))
        kkt[:n, :n] = H
        kkt[:n, n:n + m] = cs.C.T
        kkt[n:n + m, :n] = cs.C
        for a, (j, _) in enumerate(working):
            kkt[:n, n + m + a] = np.eye(n)[j]
            kkt[n + m + a, :n] = np.eye(n)[j]
        rhs = np.zeros(n + m + k)
        rhs[:n] = sys.atb - H @ w
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("reference solver: singular KKT system") from exc
        p = sol[:n]
        nu = sol[n + m:]
        if np.linalg.norm(p) <= kkt_tol * (1.0 + np.linalg.norm(w)):
            # stationary on the working set; check bound multiplier signs
            worst_idx, worst_val = -1, kkt_tol
            for a, (j, sign) in enumerate(working):
                violation = -sign * nu[a]  # multiplier of the inequality must be >= 0
                if violation > worst_val:
                    worst_idx, worst_val = a, violation
            f, _ = objective_and_gradient(sys, w)
            trace.record(f, cs.residual(w), 0.0)
            if worst_idx < 0:
                return trace.report(w)
            working.pop(worst_idx)
            continue
        # step to the nearest blocking box constraint
        alpha = 1.0
        blocker: tuple[int, float] | None = None
        active = {j for j, _ in working}
        for j in range(n):
            if j in active or abs(p[j]) <= kkt_tol:
                continue
            bound = M if p[j] > 0 else -M
            a_j = (bound - w[j]) / p[j]
            if a_j < alpha:
                alpha = max(a_j, 0.0)
                blocker = (j, np.sign(p[j]))
        w_new = w + alpha * p
        if blocker is not None:
            working.append(blocker)
            w_new[blocker[0]] = blocker[1] * M  # pin exactly on the bound
        f, _ = objective_and_gradient(sys, w_new)
        trace.record(f, cs.residual(w_new), float(np.linalg.norm(w_new - w)))
        w = w_new
    raise NumericalError(f"reference solver cycled beyond {cap} active sets")


_SOLVERS = {PG: solve_pg, NAG: solve_nag, ADMM: solve_admm, REFERENCE: solve_reference}


def solve(method: str, sys: RegressionSystem, cs: ConstraintSet, opts: SolverOptions = SolverOptions()) -> SolverReport:
    """Dispatch by method name (case-insensitive; 'ref' is accepted)."""
    key = method.upper()
    if key == "REF":
        key = REFERENCE
    if key not in _SOLVERS:
        raise ValueError(f"unknown solver '{method}'; choose from pg, nag, admm, ref")
    return _SOLVERS[key](sys, cs, opts)
