"""Gain synthesis and stability analysis for single-input systems: pole
placement, Jury necessary conditions, closed-loop characteristic polynomials,
and the co-stabilizability ceiling of the hard family."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .numerics import (
    CONDITIONING_DIMENSION,
    poly_roots,
    poly_trim,
    solve_dare,
    spectral_radius,
)
from .systems import HardFamilyParams, LtiSystem, controllability_matrix, hard_matrices


class IllConditionedError(RuntimeError):
    """Controllability matrix too ill conditioned for reliable placement."""


class PoleSetError(ValueError):
    """Requested pole set is not closed under conjugation or not stable."""


_CONJUGATE_TOL = 1e-9


def _validate_conjugate_closed(poles: Sequence[complex]) -> np.ndarray:
    """Return the poles as a complex array, failing unless the multiset is
    closed under conjugation (required for a real gain)."""
    p = np.atleast_1d(np.asarray(poles, dtype=complex))
    scale = max(1.0, float(np.max(np.abs(p))))
    remaining = list(p)
    while remaining:
        z = remaining.pop()
        if abs(z.imag) <= _CONJUGATE_TOL * scale:
            continue
        match = None
        for i, w in enumerate(remaining):
            if abs(w - np.conj(z)) <= _CONJUGATE_TOL * scale:
                match = i
                break
        if match is None:
            raise PoleSetError(f"pole set is not conjugate-closed: unmatched {z}")
        remaining.pop(match)
    return p


def _warn_if_large(n: int) -> None:
    if n > CONDITIONING_DIMENSION:
        warnings.warn(
            f"gain magnitudes grow geometrically with dimension; float64 results "
            f"are unreliable past n = {CONDITIONING_DIMENSION} (requested n = {n})",
            RuntimeWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class FeedbackGain:
    """Row gain K (u = K x) with the closed-loop poles it was designed for."""

    k: np.ndarray
    designed_poles: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "k", np.asarray(self.k, dtype=float).ravel())
        if self.designed_poles is not None:
            object.__setattr__(
                self, "designed_poles", np.asarray(self.designed_poles, dtype=complex)
            )

    @property
    def n(self) -> int:
        return self.k.size


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    spectral_radius: float


@dataclass(frozen=True)
class JuryReport:
    """The two Jury necessary quantities; pass needs both strictly positive."""

    passed: bool
    at_one: float
    signed_at_minus_one: float


@dataclass(frozen=True)
class CostabBoundReport:
    """Pole-specific perturbation ceiling with its supremum and the doubled
    theorem value used to rule out co-stabilization outright."""

    bound: float
    sup_bound: float
    theorem_m: float


def closed_loop_matrix_polynomial(a: np.ndarray, poles: np.ndarray) -> np.ndarray:
    """prod_i (A - p_i I), pairing conjugate poles so intermediates stay real."""
    n = a.shape[0]
    result = np.eye(n)
    reals = []
    complexes = []
    for p in poles:
        if abs(p.imag) <= _CONJUGATE_TOL * max(1.0, abs(p)):
            reals.append(p.real)
        else:
            complexes.append(p)
    for p in reals:
        result = result @ (a - p * np.eye(n))
    used = [False] * len(complexes)
    for i, p in enumerate(complexes):
        if used[i]:
            continue
        used[i] = True
        for j in range(i + 1, len(complexes)):
            if not used[j] and abs(complexes[j] - np.conj(p)) <= _CONJUGATE_TOL * max(1.0, abs(p)):
                used[j] = True
                break
        quadratic = a @ a - 2 * p.real * a + (abs(p) ** 2) * np.eye(n)
        result = result @ quadratic
    return result


def ackermann_gain(sys: LtiSystem, poles: Sequence[complex]) -> FeedbackGain:
    """Unique state feedback placing the closed-loop poles, via
    K = -e_n' Ctr^-1 Delta_cl(A) with the inverse row obtained from a solve."""
    p = _validate_conjugate_closed(poles)
    if p.size != sys.n:
        raise PoleSetError(f"need {sys.n} poles, got {p.size}")
    _warn_if_large(sys.n)
    ctr = controllability_matrix(sys)
    condition = np.linalg.cond(ctr)
    if not np.isfinite(condition) or condition > 1e12:
        raise IllConditionedError(
            f"controllability matrix condition {condition:.2e} exceeds 1e12"
        )
    e_n = np.zeros(sys.n)
    e_n[-1] = 1.0
    last_row = np.linalg.solve(ctr.T, e_n)
    k = -(last_row @ closed_loop_matrix_polynomial(sys.a, p))
    return FeedbackGain(k=k, designed_poles=p)


def k1_closed_form(params: HardFamilyParams, poles: Sequence[complex]) -> float:
    """First gain element -prod_i (r - p_i) / v^n for the b1 = 0 family."""
    p = _validate_conjugate_closed(poles)
    if p.size != params.n:
        raise PoleSetError(f"need {params.n} poles, got {p.size}")
    if np.any(np.abs(p) >= 1):
        raise PoleSetError("closed-loop poles must lie strictly inside the unit circle")
    _warn_if_large(params.n)
    product = complex(np.prod(params.r - p))
    return -product.real / params.v**params.n


def closed_loop_charpoly(params: HardFamilyParams, gain: FeedbackGain) -> np.ndarray:
    """Ascending coefficients of det(zI - A - B1 K) for the b1 = 0 family."""
    n = params.n
    if gain.n != n:
        raise ValueError(f"gain length {gain.n} does not match dimension {n}")
    r, v = params.r, params.v
    k = gain.k
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    coeffs[n - 1] = -(r + v * k[n - 1])
    for j in range(n - 1):
        coeffs[j] = v ** (n - j - 1) * (r * k[j + 1] - v * k[j])
    return coeffs


def perturbed_charpoly(base: np.ndarray, m: float, k1: float) -> np.ndarray:
    """Shift the z^(n-1) coefficient by -m*k1: det(zI - A - B2 K) from the
    b1 = 0 polynomial."""
    coeffs = np.asarray(base, dtype=float).copy()
    degree = poly_trim(coeffs).size - 1
    if degree < 1 or abs(coeffs[-1] - 1.0) > 1e-12 or coeffs.size != degree + 1:
        raise ValueError("base polynomial must be monic")
    coeffs[degree - 1] -= m * k1
    return coeffs


def jury_necessary(p: np.ndarray) -> JuryReport:
    """Necessary stability conditions Delta(1) > 0 and (-1)^n Delta(-1) > 0."""
    coeffs = poly_trim(p)
    if coeffs[-1] <= 0:
        raise ValueError("leading coefficient must be positive; normalize first")
    n = coeffs.size - 1
    at_one = float(np.polyval(coeffs[::-1], 1.0))
    signed_at_minus_one = float((-1) ** n * np.polyval(coeffs[::-1], -1.0))
    return JuryReport(
        passed=at_one > 0 and signed_at_minus_one > 0,
        at_one=at_one,
        signed_at_minus_one=signed_at_minus_one,
    )


def costab_bound(params: HardFamilyParams, poles: Sequence[complex]) -> CostabBoundReport:
    """Perturbation ceiling v^n prod (1 + p_i)/(r - p_i) for the given stable
    closed-loop poles, with its supremum (2v/(r-1))^n over all stable sets."""
    p = _validate_conjugate_closed(poles)
    if p.size != params.n:
        raise PoleSetError(f"need {params.n} poles, got {p.size}")
    if np.any(np.abs(p) >= 1):
        raise PoleSetError("closed-loop poles must lie strictly inside the unit circle")
    r, v, n = params.r, params.v, params.n
    bound = complex(np.prod((1 + p) / (r - p))) * v**n
    sup_bound = (2 * v / (r - 1)) ** n
    return CostabBoundReport(bound=bound.real, sup_bound=sup_bound, theorem_m=2 * sup_bound)


def is_stabilizing(sys: LtiSystem, gain: FeedbackGain) -> StabilityReport:
    """Strict spectral-radius test of A + B K."""
    if gain.n != sys.n:
        raise ValueError(f"gain length {gain.n} does not match dimension {sys.n}")
    rho = spectral_radius(sys.a + sys.b @ gain.k.reshape(1, -1))
    return StabilityReport(stable=rho < 1.0, spectral_radius=rho)


def ce_lqr_gain(
    params: HardFamilyParams,
    b1_hat: float,
    q: Optional[np.ndarray] = None,
    r_cost: float = 1.0,
) -> FeedbackGain:
    """Certainty-equivalent LQR gain for (A, B(b1_hat)) with Q = I, R = 1.

    The Riccati solve uses a scale-aware residual tolerance because the cost
    matrix norm grows like (r/v)^(2n); see solve_dare.  Synthesis succeeding
    says nothing about stability on the true system.
    """
    a, b = hard_matrices(params.n, params.r, params.v, b1_hat)
    _warn_if_large(params.n)
    if q is None:
        q = np.eye(params.n)
    solution = solve_dare(
        a, b, q, np.array([[r_cost]]), tolerance=1e-9, rel_tolerance=1e-8
    )
    return FeedbackGain(k=solution.gain.ravel(), designed_poles=None)


def recovered_poles(params: HardFamilyParams, gain: FeedbackGain) -> np.ndarray:
    """Closed-loop poles of the b1 = 0 loop recovered from the characteristic
    polynomial; carries root-finding error for externally supplied gains."""
    return poly_roots(closed_loop_charpoly(params, gain))


__all__ = [
    "CostabBoundReport",
    "FeedbackGain",
    "IllConditionedError",
    "JuryReport",
    "PoleSetError",
    "StabilityReport",
    "ackermann_gain",
    "ce_lqr_gain",
    "closed_loop_charpoly",
    "costab_bound",
    "is_stabilizing",
    "jury_necessary",
    "k1_closed_form",
    "perturbed_charpoly",
    "recovered_poles",
]
