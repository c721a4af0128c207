"""Common-Lyapunov co-stabilizability feasibility test and bisection over
the perturbation size.

The pair condition "find K, P with (A + B_i K)' P (A + B_i K) < P for both
siblings and P > 0" is convexified by Q = P^-1, Y = K Q: for i in {1, 2}

    [[Q, (A Q + B_i Y)'], [A Q + B_i Y, Q]] > 0,   Q > 0,

with K = Y Q^-1 and P = Q^-1 recovered from any solution.  Feasibility is
decided by maximizing the smallest block eigenvalue with a log-determinant
barrier and damped Newton steps.  Certificates for this family are
intrinsically ill conditioned (their conditioning grows geometrically with
n), so the solver works in congruence-transformed coordinates that keep the
current iterate near the identity, re-preconditioning as it converges; every
returned certificate is re-verified in the original variables by direct
substitution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .synthesis import FeedbackGain
from .systems import HardFamilyParams, HardPair, make_hard_pair

_EPS = np.finfo(float).eps


class BisectionError(RuntimeError):
    """Bisection observed inconsistent feasibility decisions."""


@dataclass(frozen=True)
class CostabLmiProblem:
    """Block data of the convexified pair-feasibility problem."""

    a: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    m: float
    params: HardFamilyParams

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def blocks(self, q: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
        """The three symmetric blocks [M1, M2, Q] evaluated at (Q, Y)."""
        out = []
        y = np.asarray(y, dtype=float).reshape(1, -1)
        for b in (self.b1, self.b2):
            off = self.a @ q + b @ y
            out.append(np.block([[q, off.T], [off, q]]))
        out.append(q)
        return out

    def balance(self) -> np.ndarray:
        """Diagonal scaling d_j = (v/r)^(n-j) that equalizes the family's
        gain ladder; used as the cold-start preconditioner."""
        p = self.params
        return (p.v / p.r) ** (p.n - np.arange(1, p.n + 1, dtype=float))


def build_costab_lmi(pair: HardPair) -> CostabLmiProblem:
    return CostabLmiProblem(
        a=pair.s1.a, b1=pair.s1.b, b2=pair.s2.b, m=pair.m, params=pair.params
    )


@dataclass(frozen=True)
class LmiCertificate:
    """Verified solution: margins are recomputed from the stored (Q, Y) by
    direct substitution, never taken from the solver."""

    q: np.ndarray
    y: np.ndarray
    recovered_k: FeedbackGain
    recovered_p: np.ndarray
    margin: float  # smallest eigenvalue over the three Schur blocks
    p_min_eigenvalue: float
    lyapunov_margins: tuple[float, float]  # -lambda_max((A+B_iK)'P(A+B_iK) - P)
    spectral_radii: tuple[float, float]

    @property
    def feasible(self) -> bool:
        return True


@dataclass(frozen=True)
class InfeasibleReport:
    """No certificate with the required margin; status 'inconclusive' means a
    solver budget ran out while progress was still being made."""

    best_margin: float
    status: str  # "infeasible" | "inconclusive"

    @property
    def feasible(self) -> bool:
        return False


@dataclass(frozen=True)
class BisectionResult:
    largest_feasible_m: float
    bracket: tuple[float, float]
    iterations: int
    certificate: Optional[LmiCertificate]
    sup_bound: float
    theorem_m: float
    conservative: bool
    trace: tuple = ()


def _verify_certificate(
    problem: CostabLmiProblem, q: np.ndarray, y: np.ndarray, tolerance: float
) -> Optional[LmiCertificate]:
    """Direct-substitution check in the original variables.

    Schur blocks must be positive beyond the eigenvalue noise floor and the
    recovered (K, P) must satisfy the strict pair inequalities with margin at
    least tolerance/2.  Feasibility is invariant under (Q, Y) -> (aQ, aY),
    so the certificate is normalized to trace(Q) = n first.
    """
    q = 0.5 * (q + q.T)
    scale = problem.n / float(np.trace(q))
    if not np.isfinite(scale) or scale <= 0:
        return None
    q = scale * q
    y = scale * np.asarray(y, dtype=float)
    blocks = problem.blocks(q, y)
    schur_margin = math.inf
    for block in blocks:
        lam_min = float(np.linalg.eigvalsh(block)[0])
        floor = 50.0 * _EPS * max(1.0, float(np.linalg.norm(block, 2)))
        if lam_min <= floor:
            return None
        schur_margin = min(schur_margin, lam_min)
    try:
        k_row = np.linalg.solve(q, y.reshape(-1, 1)).reshape(1, -1)
        p = np.linalg.inv(q)
    except np.linalg.LinAlgError:
        return None
    p = 0.5 * (p + p.T)
    p_min = float(np.linalg.eigvalsh(p)[0])
    if p_min < tolerance / 2:
        return None
    lyapunov = []
    radii = []
    for b in (problem.b1, problem.b2):
        closed = problem.a + b @ k_row
        decrement = closed.T @ p @ closed - p
        lyapunov.append(-float(np.linalg.eigvalsh(decrement)[-1]))
        radii.append(float(np.max(np.abs(np.linalg.eigvals(closed)))))
    if min(lyapunov) < tolerance / 2 or max(radii) >= 1.0:
        return None
    return LmiCertificate(
        q=q,
        y=np.asarray(y, dtype=float).reshape(1, -1),
        recovered_k=FeedbackGain(k=k_row.ravel(), designed_poles=None),
        recovered_p=p,
        margin=schur_margin,
        p_min_eigenvalue=p_min,
        lyapunov_margins=(lyapunov[0], lyapunov[1]),
        spectral_radii=(radii[0], radii[1]),
    )


class _BarrierState:
    """Margin maximization in congruence-transformed coordinates.

    Variables are x = (svec(Q), Y) with trace(Q) = n fixed; the three blocks
    are affine in x.  ``transform`` maps solver coordinates back to the
    original ones: Q_orig = T Q T', Y_orig = Y T'.
    """

    def __init__(self, problem: CostabLmiProblem, transform: np.ndarray):
        self.problem = problem
        self.n = problem.n
        self.transform = transform
        t_inv = np.linalg.inv(transform)
        self.a_s = t_inv @ problem.a @ transform
        self.b1_s = t_inv @ problem.b1
        self.b2_s = t_inv @ problem.b2
        n = self.n
        self.q_pairs = [(i, j) for i in range(n) for j in range(i, n)]
        self.dim = len(self.q_pairs) + n
        self._build_basis()
        # trace(Q) = n selector
        self.trace_vector = np.zeros(self.dim)
        for a, (i, j) in enumerate(self.q_pairs):
            if i == j:
                self.trace_vector[a] = 1.0

    def _build_basis(self):
        n = self.n
        d = self.dim
        tensors = []
        for b_s in (self.b1_s, self.b2_s):
            g = np.zeros((d, 2 * n, 2 * n))
            for a, (i, j) in enumerate(self.q_pairs):
                e = np.zeros((n, n))
                e[i, j] = 1.0
                e[j, i] = 1.0
                ae = self.a_s @ e
                g[a, :n, :n] = e
                g[a, n:, n:] = e
                g[a, n:, :n] = ae
                g[a, :n, n:] = ae.T
            for k in range(n):
                a = len(self.q_pairs) + k
                be = np.zeros((n, n))
                be[:, k] = b_s.ravel()
                g[a, n:, :n] = be
                g[a, :n, n:] = be.T
            tensors.append(g)
        gq = np.zeros((d, n, n))
        for a, (i, j) in enumerate(self.q_pairs):
            gq[a, i, j] = 1.0
            gq[a, j, i] = 1.0
        tensors.append(gq)
        self.basis = tensors
        self.basis_flat = [g.reshape(self.dim, -1) for g in tensors]

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        q = np.zeros((n, n))
        for a, (i, j) in enumerate(self.q_pairs):
            q[i, j] = x[a]
            q[j, i] = x[a]
        y = x[len(self.q_pairs):].reshape(1, n)
        return q, y

    def pack(self, q: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.zeros(self.dim)
        for a, (i, j) in enumerate(self.q_pairs):
            x[a] = q[i, j]
        x[len(self.q_pairs):] = np.asarray(y).ravel()
        return x

    def block_matrices(self, x: np.ndarray) -> list[np.ndarray]:
        q, y = self.unpack(x)
        out = []
        for b_s in (self.b1_s, self.b2_s):
            off = self.a_s @ q + b_s @ y
            out.append(np.block([[q, off.T], [off, q]]))
        out.append(q)
        return out

    def margin(self, x: np.ndarray) -> float:
        return min(float(np.linalg.eigvalsh(m)[0]) for m in self.block_matrices(x))

    def to_original(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        q, y = self.unpack(x)
        t = self.transform
        return t @ q @ t.T, y @ t.T

    def _barrier_value(self, x: np.ndarray, level: float) -> Optional[float]:
        """-(sum of log dets) of the shifted blocks, or None outside the cone."""
        value = 0.0
        for m in self.block_matrices(x):
            shifted = m - level * np.eye(m.shape[0])
            try:
                chol = np.linalg.cholesky(shifted)
            except np.linalg.LinAlgError:
                return None
            diag = np.diag(chol)
            if np.any(diag <= 0):
                return None
            value -= 2.0 * float(np.sum(np.log(diag)))
        return value

    def center(self, x: np.ndarray, level: float, max_newton: int = 60) -> np.ndarray:
        """Damped Newton minimization of the barrier at the given level,
        staying on the trace(Q) = n plane."""
        value = self._barrier_value(x, level)
        if value is None:
            raise ValueError("centering started outside the level set")
        for _ in range(max_newton):
            grad = np.zeros(self.dim)
            hess = np.zeros((self.dim, self.dim))
            for m, basis, basis_flat in zip(
                self.block_matrices(x), self.basis, self.basis_flat
            ):
                shifted = m - level * np.eye(m.shape[0])
                inv = np.linalg.inv(shifted)
                inv = 0.5 * (inv + inv.T)
                grad -= basis_flat @ inv.ravel()
                w = np.matmul(inv[None, :, :], basis)
                side = m.shape[0]
                w_flat = w.reshape(self.dim, side * side)
                wt_flat = w.transpose(0, 2, 1).reshape(self.dim, side * side)
                hess += w_flat @ wt_flat.T
            kkt = np.zeros((self.dim + 1, self.dim + 1))
            kkt[: self.dim, : self.dim] = hess
            kkt[: self.dim, self.dim] = self.trace_vector
            kkt[self.dim, : self.dim] = self.trace_vector
            rhs = np.concatenate([-grad, [0.0]])
            try:
                step = np.linalg.solve(kkt, rhs)[: self.dim]
            except np.linalg.LinAlgError:
                jitter = 1e-12 * (1.0 + np.trace(hess) / self.dim)
                kkt[: self.dim, : self.dim] += jitter * np.eye(self.dim)
                step = np.linalg.solve(kkt, rhs)[: self.dim]
            decrement = float(step @ hess @ step)
            if decrement <= 2e-10:
                break
            slope = float(grad @ step)
            alpha = 1.0
            improved = False
            for _ in range(60):
                candidate = x + alpha * step
                cand_value = self._barrier_value(candidate, level)
                if cand_value is not None and cand_value <= value + 0.01 * alpha * slope:
                    x = candidate
                    value = cand_value
                    improved = True
                    break
                alpha *= 0.5
            if not improved:
                break
        return x


def _initial_state(
    problem: CostabLmiProblem, warm: Optional[tuple[np.ndarray, np.ndarray]]
) -> _BarrierState:
    n = problem.n
    if warm is not None:
        q_w, y_w = warm
        q_w = 0.5 * (q_w + q_w.T)
        try:
            t = np.linalg.cholesky(q_w)
            state = _BarrierState(problem, t)
            y_s = y_w @ np.linalg.inv(t).T
            state.start = state.pack(np.eye(n), y_s)
            return state
        except np.linalg.LinAlgError:
            pass
    # cold start: balance the gain ladder and seed with the uniform
    # balanced deadbeat gain -r/v
    t = np.diag(problem.balance())
    state = _BarrierState(problem, t)
    k_s = np.full((1, n), -problem.params.r / problem.params.v)
    state.start = state.pack(np.eye(n), k_s)
    return state


def check_feasible(
    problem: CostabLmiProblem,
    tolerance: float = 1e-6,
    warm_start: Optional[tuple[np.ndarray, np.ndarray]] = None,
    max_levels: int = 400,
    stall_limit: int = 50,
) -> LmiCertificate | InfeasibleReport:
    """Decide strict feasibility of the convexified pair problem.

    Returns a verified LmiCertificate, or an InfeasibleReport whose status
    distinguishes a converged negative maximum margin ("infeasible") from an
    exhausted budget ("inconclusive").  The margin is climbed level by level:
    each level re-centers the log-det barrier of the shifted blocks, then the
    level moves 85% of the remaining gap.  When the iterate's conditioning
    grows, coordinates are re-preconditioned so the current certificate
    becomes the identity.
    """
    state = _initial_state(problem, warm_start)
    x = state.start
    g = state.margin(x)
    level = g - max(1.0, 0.25 * abs(g))
    best_margin = -math.inf
    stall = 0
    progressing = True

    for _ in range(max_levels):
        x = state.center(x, level)
        g = state.margin(x)
        gap = g - level
        if g > 0:
            q_orig, y_orig = state.to_original(x)
            certificate = _verify_certificate(problem, q_orig, y_orig, tolerance)
            if certificate is not None:
                return certificate
        if g > best_margin + max(1e-14, 1e-7 * abs(g)):
            best_margin = max(best_margin, g)
            stall = 0
        else:
            stall += 1
            if stall >= stall_limit:
                progressing = False
                break
        # the level-set collapse means the maximized margin has converged;
        # a collapsed negative margin is a confident infeasibility
        if gap <= max(1e-13, 1e-7 * abs(g)) or (
            g < -1e-12 and gap <= 0.02 * abs(g)
        ):
            progressing = False
            break
        # re-precondition once the certificate drifts far from the identity
        q_s, _ = state.unpack(x)
        eigs = np.linalg.eigvalsh(q_s)
        if eigs[0] <= 0:
            break
        if eigs[-1] / eigs[0] > 1e6:
            q_orig, y_orig = state.to_original(x)
            refreshed = _initial_state(problem, (q_orig, y_orig))
            state = refreshed
            x = state.start
            g = state.margin(x)
            level = g - max(1e-12, 0.5 * abs(g))
            continue
        level = g - 0.15 * gap
    else:
        return InfeasibleReport(best_margin=best_margin, status="inconclusive")

    if progressing:
        return InfeasibleReport(best_margin=best_margin, status="inconclusive")
    return InfeasibleReport(best_margin=best_margin, status="infeasible")


def bisect_largest_m(
    params: HardFamilyParams,
    tolerance: float = 1e-3,
    feasibility_tolerance: float = 1e-6,
) -> BisectionResult:
    """Largest perturbation for which the pair problem stays feasible.

    The bracket starts at [0, 2 (2v/(r-1))^n]; the upper end cannot admit a
    common gain at all, so it is infeasible without solving.  Probes treat an
    inconclusive solver status as infeasible and flag the result as
    conservative.  The feasible endpoint's certificate warm-starts each probe.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    sup_bound = (2 * params.v / (params.r - 1.0)) ** params.n
    theorem_m = 2.0 * sup_bound

    lo = 0.0
    outcome = check_feasible(
        build_costab_lmi(make_hard_pair(params, 0.0)), feasibility_tolerance
    )
    if not outcome.feasible:
        raise RuntimeError(
            f"could not certify feasibility at m = 0 for n = {params.n}; "
            f"solver status {outcome.status}"
        )
    certificate = outcome
    warm = (certificate.q, certificate.y)

    hi = theorem_m
    trace = [(0.0, "feasible"), (theorem_m, "infeasible-analytic")]
    conservative = False
    iterations = 0
    while hi - lo > tolerance * max(lo, theorem_m * 1e-9):
        mid = 0.5 * (lo + hi)
        outcome = check_feasible(
            build_costab_lmi(make_hard_pair(params, mid)),
            feasibility_tolerance,
            warm_start=warm,
        )
        iterations += 1
        if outcome.feasible:
            lo = mid
            certificate = outcome
            warm = (certificate.q, certificate.y)
            trace.append((mid, "feasible"))
        else:
            hi = mid
            conservative = conservative or outcome.status == "inconclusive"
            trace.append((mid, outcome.status))
        if iterations > 200:
            break

    feasible_ms = [m for m, status in trace if status == "feasible"]
    infeasible_ms = [m for m, status in trace if status != "feasible"]
    if feasible_ms and infeasible_ms and max(feasible_ms) >= min(infeasible_ms):
        raise BisectionError(
            f"non-monotone feasibility observed: feasible at {max(feasible_ms)} "
            f"but infeasible at {min(infeasible_ms)}"
        )

    return BisectionResult(
        largest_feasible_m=lo,
        bracket=(lo, hi),
        iterations=iterations,
        certificate=certificate,
        sup_bound=sup_bound,
        theorem_m=theorem_m,
        conservative=conservative,
        trace=tuple(trace),
    )
