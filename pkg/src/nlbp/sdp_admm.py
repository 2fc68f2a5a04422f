"""Consensus ADMM solver for the lifted semidefinite program.

The program is

    minimize    trace(X) + lam * sum(abs(X))
    subject to  trace(C_i @ X) == v_i  for every constraint i,
                X positive semidefinite,

split into three blocks: an affine block (trace objective plus the equality
constraints, whose proximal step is an affine projection of a tilted point),
a cone block (projection onto the PSD cone), and an elementwise shrinkage
block for the l1 term. The three blocks are tied together by a consensus
variable and scaled dual variables.

All steps are deterministic: identical problem and config give a bitwise
identical iterate sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .lifting import LiftedProblem


class SolverError(RuntimeError):
    """A numerical kernel failed mid-solve (carries the iteration index)."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class SolveStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible"


@dataclass
class SolverConfig:
    """Solver knobs. ``lam`` is the l1 weight of the objective; the rest is
    ADMM plumbing. Defaults are sized so the reference experiments (basis
    dimension ~21) converge in seconds."""

    lam: float = 0.0
    rho: float = 1.0
    max_iters: int = 20000
    eps_abs: float = 1e-7
    eps_rel: float = 1e-5
    over_relaxation: float = 1.0
    adaptive_rho: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.eps_abs <= 0 or self.eps_rel <= 0:
            raise ValueError("tolerances must be > 0")
        if not 1.0 <= self.over_relaxation <= 1.8:
            raise ValueError("over_relaxation must be in [1, 1.8]")


@dataclass
class SolveReport:
    """Solver output: final consensus iterate plus diagnostics."""

    X: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    constraint_violation: float
    min_eigenvalue: float
    status: SolveStatus
    history: np.ndarray | None = None  # (iters, 2) primal/dual residuals


@dataclass
class AffineCache:
    """Precomputed data for projecting onto {X : trace(C_i X) = v_i for all i}.

    Rows are normalized to unit Frobenius norm (the feasible set, and hence
    the projection, is unchanged) and the constraint Gram matrix is
    eigendecomposed once with a relative cutoff so that linearly dependent
    constraints are handled by pseudo-inversion. ``infeasibility_lb`` is a
    provable lower bound on max_i |trace(C_i X) - v_i| over all X; it is zero
    (up to roundoff) exactly when the constraint system is consistent.
    """

    dim: int
    row_mat: np.ndarray          # (M, dim*dim), normalized vectorized constraints
    rhs: np.ndarray              # (M,) normalized right-hand sides
    row_mat_raw: np.ndarray      # (M, dim*dim), original scaling
    rhs_raw: np.ndarray          # (M,)
    gram_vecs: np.ndarray = field(repr=False)
    gram_inv_vals: np.ndarray = field(repr=False)
    rank: int = 0
    infeasibility_lb: float = 0.0

    @classmethod
    def build(cls, problem: LiftedProblem) -> "AffineCache":
        dim = problem.dim
        rows_raw = np.stack([c.matrix.ravel() for c in problem.constraints])
        rhs_raw = problem.values_vector()
        norms = np.linalg.norm(rows_raw, axis=1)
        scale = np.where(norms > 0, norms, 1.0)
        rows = rows_raw / scale[:, None]
        rhs = rhs_raw / scale

        gram = rows @ rows.T
        vals, vecs = np.linalg.eigh(gram)
        cutoff = 1e-12 * max(vals[-1], 0.0)
        active = vals > cutoff
        inv_vals = np.where(active, 1.0 / np.where(active, vals, 1.0), 0.0)
        rank = int(active.sum())

        # Distance from the raw right-hand side to the range of the raw
        # constraint operator, in the l2 metric; any X violates some
        # constraint by at least this distance / sqrt(M).
        gram_raw = rows_raw @ rows_raw.T
        vals_r, vecs_r = np.linalg.eigh(gram_raw)
        active_r = vals_r > 1e-12 * max(vals_r[-1], 0.0)
        proj = vecs_r[:, active_r] @ (vecs_r[:, active_r].T @ rhs_raw)
        lb = float(np.linalg.norm(rhs_raw - proj)) / np.sqrt(len(rhs_raw))

        return cls(dim=dim, row_mat=rows, rhs=rhs, row_mat_raw=rows_raw,
                   rhs_raw=rhs_raw, gram_vecs=vecs, gram_inv_vals=inv_vals,
                   rank=rank, infeasibility_lb=lb)

    def project(self, X: np.ndarray) -> np.ndarray:
        """Frobenius projection of X onto the affine constraint set."""
        vec = X.ravel()
        resid = self.row_mat @ vec - self.rhs
        mult = self.gram_vecs @ (self.gram_inv_vals * (self.gram_vecs.T @ resid))
        return (vec - self.row_mat.T @ mult).reshape(self.dim, self.dim)

    def violation(self, X: np.ndarray) -> float:
        """max_i |trace(C_i X) - v_i| against the original (unscaled) rows."""
        return float(np.max(np.abs(self.row_mat_raw @ X.ravel() - self.rhs_raw)))


def project_affine(X: np.ndarray, problem: LiftedProblem,
                   cache: AffineCache | None = None) -> np.ndarray:
    """Euclidean projection of X onto the problem's affine constraint set."""
    if cache is None:
        cache = AffineCache.build(problem)
    elif cache.dim != problem.dim:
        raise ValueError("cache was built for a different problem dimension")
    return cache.project(np.asarray(X, dtype=float))


def project_psd(X: np.ndarray) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix: clamp negative
    eigenvalues of the symmetrized input to zero."""
    X = np.asarray(X, dtype=float)
    sym = 0.5 * (X + X.T)
    vals, vecs = np.linalg.eigh(sym)
    out = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return 0.5 * (out + out.T)


def soft_threshold(Z: np.ndarray, t: float) -> np.ndarray:
    """Elementwise sign(z) * max(|z| - t, 0); symmetry is preserved."""
    if t < 0:
        raise ValueError("threshold must be >= 0")
    Z = np.asarray(Z, dtype=float)
    return np.sign(Z) * np.maximum(np.abs(Z) - t, 0.0)


def _feasibility_tolerance(cache: AffineCache) -> float:
    rhs_max = float(np.max(np.abs(cache.rhs_raw))) if len(cache.rhs_raw) else 0.0
    return 1e-6 * (1.0 + rhs_max)


def solve_nlbp(problem: LiftedProblem, config: SolverConfig | None = None,
               record_history: bool = False) -> SolveReport:
    """Run consensus ADMM on the lifted program until the combined primal and
    dual residuals meet the absolute-plus-relative stopping rule, or the
    iteration cap is reached.

    The report carries the final consensus iterate. Status is INFEASIBLE when
    the constraint residual stays above 1e-6 * (1 + max |v_i|) while the ADMM
    residuals have either converged or plateaued; for provably inconsistent
    systems (positive infeasibility lower bound) the plateau exit fires early
    instead of burning the full iteration budget.
    """
    if config is None:
        config = SolverConfig()
    cache = AffineCache.build(problem)
    dim = problem.dim
    rho = config.rho
    alpha = config.over_relaxation

    Z = np.zeros((dim, dim))
    U1 = np.zeros((dim, dim))
    U2 = np.zeros((dim, dim))
    X1 = np.zeros((dim, dim))
    X2 = np.zeros((dim, dim))

    feas_tol = _feasibility_tolerance(cache)
    hopeless = cache.infeasibility_lb > feas_tol
    scale = np.sqrt(2.0) * dim  # sqrt of the stacked primal dimension

    history = [] if record_history else None
    converged = False
    primal = dual = np.inf
    stall_ref = np.inf
    primal_checkpoint = np.inf  # primal residual at 3/4 of the budget
    checkpoint_at = max(1, (3 * config.max_iters) // 4)
    iteration = 0

    for iteration in range(1, config.max_iters + 1):
        X1 = cache.project(Z - U1 - (1.0 / rho) * np.eye(dim))
        try:
            X2 = project_psd(Z - U2)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"eigendecomposition failed: {exc}", iteration) from exc

        if alpha != 1.0:
            X1_mix = alpha * X1 + (1.0 - alpha) * Z
            X2_mix = alpha * X2 + (1.0 - alpha) * Z
        else:
            X1_mix, X2_mix = X1, X2

        Z_prev = Z
        Z = soft_threshold(0.5 * (X1_mix + U1 + X2_mix + U2),
                           config.lam / (2.0 * rho))
        U1 = U1 + X1_mix - Z
        U2 = U2 + X2_mix - Z

        primal = np.sqrt(np.linalg.norm(X1 - Z) ** 2 + np.linalg.norm(X2 - Z) ** 2)
        dual = rho * np.sqrt(2.0) * np.linalg.norm(Z - Z_prev)
        if history is not None:
            history.append((primal, dual))

        eps_pri = scale * config.eps_abs + config.eps_rel * max(
            np.sqrt(np.linalg.norm(X1) ** 2 + np.linalg.norm(X2) ** 2),
            np.sqrt(2.0) * np.linalg.norm(Z),
        )
        eps_dual = scale * config.eps_abs + config.eps_rel * rho * np.sqrt(
            np.linalg.norm(U1) ** 2 + np.linalg.norm(U2) ** 2
        )
        if primal <= eps_pri and dual <= eps_dual:
            converged = True
            break
        if iteration == checkpoint_at:
            primal_checkpoint = primal

        if hopeless and iteration % 200 == 0:
            if primal > 0.999 * stall_ref and iteration >= 600:
                break  # residuals have plateaued; no point burning the budget
            stall_ref = primal

        if config.adaptive_rho and iteration % 10 == 0:
            if primal > 10.0 * dual:
                rho *= 2.0
                U1 *= 0.5
                U2 *= 0.5
            elif dual > 10.0 * primal:
                rho *= 0.5
                U1 *= 2.0
                U2 *= 2.0

    violation = cache.violation(Z)
    # A plateau call needs a meaningful budget: a run cut off after a handful
    # of iterations is just unfinished.
    plateaued = config.max_iters >= 200 and primal >= 0.5 * primal_checkpoint
    if hopeless:
        # No matrix can satisfy the constraints to within the feasibility
        # tolerance; the iterate is the least-squares compromise.
        status = SolveStatus.INFEASIBLE
    elif converged:
        status = SolveStatus.CONVERGED
    elif violation > feas_tol and plateaued:
        # Budget exhausted with residuals plateaued above tolerance.
        status = SolveStatus.INFEASIBLE
    else:
        status = SolveStatus.MAX_ITERS

    objective = float(np.trace(Z) + config.lam * np.sum(np.abs(Z)))
    min_eig = float(np.linalg.eigvalsh(0.5 * (Z + Z.T))[0])
    return SolveReport(
        X=Z,
        iterations=iteration,
        primal_residual=float(primal),
        dual_residual=float(dual),
        objective=objective,
        constraint_violation=violation,
        min_eigenvalue=min_eig,
        status=status,
        history=np.array(history) if history is not None else None,
    )


def report_to_json(report: SolveReport, include_matrix: bool = False) -> dict:
    out = {
        "iterations": report.iterations,
        "primal_residual": report.primal_residual,
        "dual_residual": report.dual_residual,
        "objective": report.objective,
        "constraint_violation": report.constraint_violation,
        "min_eigenvalue": report.min_eigenvalue,
        "status": report.status.value,
    }
    if include_matrix:
        out["X"] = [[float(v) for v in row] for row in report.X]
    return out


def report_from_json(data: dict) -> SolveReport:
    X = np.array(data["X"], dtype=float) if "X" in data else np.zeros((0, 0))
    return SolveReport(
        X=X,
        iterations=int(data["iterations"]),
        primal_residual=float(data["primal_residual"]),
        dual_residual=float(data["dual_residual"]),
        objective=float(data["objective"]),
        constraint_violation=float(data["constraint_violation"]),
        min_eigenvalue=float(data["min_eigenvalue"]),
        status=SolveStatus(data["status"]),
    )
