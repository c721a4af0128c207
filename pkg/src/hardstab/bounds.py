"""Information-theoretic quantities: the trajectory-distribution KL upper
bound, a Monte-Carlo KL estimator, and the Birgé-based sample-complexity
lower bound.

All divergences are in nats.  Log plots elsewhere use base 10; convert at
presentation time only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import Prng
from .systems import HardFamilyParams, HardPair, InputPolicy, simulate


class DegenerateNoiseError(ValueError):
    """KL quantities need nondegenerate process noise (sigma_w^2 > 0)."""


@dataclass(frozen=True)
class KlReport:
    """Analytic KL bound beside its Monte-Carlo estimate (both in nats)."""

    analytic_bound: float
    mc_estimate: Optional[float]
    mc_std_error: Optional[float]
    horizon: int
    m: float
    sigma_u2: float
    sigma_w2: float
    trials: int = 0
    seed: int = 0

    CSV_HEADER = "horizon,m,sigma_u2,sigma_w2,analytic,mc,mc_se,trials,seed"

    def csv_row(self) -> str:
        fields = [
            str(self.horizon),
            "%.17g" % self.m,
            "%.17g" % self.sigma_u2,
            "%.17g" % self.sigma_w2,
            "%.17g" % self.analytic_bound,
            "" if self.mc_estimate is None else "%.17g" % self.mc_estimate,
            "" if self.mc_std_error is None else "%.17g" % self.mc_std_error,
            str(self.trials),
            str(self.seed),
        ]
        return ",".join(fields)


@dataclass(frozen=True)
class BirgeSpec:
    """Inputs of the sample-complexity lower bound."""

    delta: float
    params: HardFamilyParams
    sigma_u2: float
    sigma_w2: float

    def __post_init__(self):
        if not 0 < self.delta < 0.5:
            raise ValueError(f"confidence level delta must lie in (0, 1/2), got {self.delta}")
        if self.sigma_u2 <= 0 or self.sigma_w2 <= 0:
            raise ValueError("sigma_u2 and sigma_w2 must be positive")


@dataclass(frozen=True)
class BirgeThreshold:
    exact: float
    relaxed: float


@dataclass(frozen=True)
class BirgeBound:
    min_samples: float
    theorem_m: float


def kl_upper_bound(horizon: int, m: float, sigma_u2: float, sigma_w2: float) -> float:
    """N m^2 sigma_u^2 / (2 sigma_w^2), in nats."""
    if sigma_w2 <= 0:
        raise DegenerateNoiseError("sigma_w2 must be positive for the KL bound")
    if horizon < 0 or sigma_u2 < 0:
        raise ValueError("horizon and sigma_u2 must be nonnegative")
    return horizon * m * m * sigma_u2 / (2.0 * sigma_w2)


def _policy_sigma_u2(policy: InputPolicy, horizon: int) -> float:
    if policy.kind == "iid-gaussian":
        return policy.sigma_u2
    if policy.kind == "zero":
        return 0.0
    if policy.kind == "impulse":
        return policy.amplitude**2 / horizon
    return float("nan")


def kl_monte_carlo(
    pair: HardPair,
    policy: InputPolicy,
    horizon: int,
    trials: int,
    rng: Prng,
    batch: int = 4096,
) -> KlReport:
    """Monte-Carlo estimate of KL between the trajectory laws of the pair.

    Samples under the b1 = 0 system and averages per-trajectory
    log-likelihood ratios.  Only the first coordinate's transition density
    differs between the siblings, so the ratio reduces to the residual form
    ((w - m u)^2 - w^2) / (2 sigma_w^2) summed over steps.  Trial i draws
    from stream index rng.stream + i; the reduction over trials uses
    pairwise summation so chunked and serial runs agree.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    sigma_w2 = pair.s1.noise_variance
    if sigma_w2 <= 0:
        raise DegenerateNoiseError("pair noise variance must be positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")

    m = pair.m
    sigma_w = math.sqrt(sigma_w2)
    n = pair.s1.n
    log_ratios = np.empty(trials)

    if policy.kind in ("iid-gaussian", "zero", "impulse"):
        # State feedback never enters the ratio, so states need not be formed;
        # the (1 + n) draws per step keep streams aligned with simulate().
        u_draws = 1 if policy.kind == "iid-gaussian" else 0
        sigma_u = math.sqrt(policy.sigma_u2) if u_draws else 0.0
        for i in range(trials):
            gen = rng.spawn(rng.stream + i).generator
            block = gen.standard_normal((horizon, u_draws + n))
            if policy.kind == "iid-gaussian":
                u = sigma_u * block[:, 0]
            elif policy.kind == "impulse":
                u = np.zeros(horizon)
                if 0 <= policy.impulse_time < horizon:
                    u[policy.impulse_time] = policy.amplitude
            else:
                u = np.zeros(horizon)
            w1 = sigma_w * block[:, u_draws]
            terms = ((w1 - m * u) ** 2 - w1**2) / (2.0 * sigma_w2)
            log_ratios[i] = terms.sum()
    else:
        for i in range(trials):
            stream = rng.spawn(rng.stream + i)
            traj = simulate(pair.s1, policy, horizon, stream)
            w1 = traj.first_coord_residuals  # b1 = 0 under s1
            u = traj.inputs
            terms = ((w1 - m * u) ** 2 - w1**2) / (2.0 * sigma_w2)
            log_ratios[i] = terms.sum()

    estimate = float(np.mean(log_ratios))
    std_error = float(np.std(log_ratios, ddof=1) / math.sqrt(trials))
    sigma_u2 = _policy_sigma_u2(policy, horizon)
    return KlReport(
        analytic_bound=kl_upper_bound(horizon, m, sigma_u2, sigma_w2)
        if not math.isnan(sigma_u2)
        else float("nan"),
        mc_estimate=estimate,
        mc_std_error=std_error,
        horizon=horizon,
        m=m,
        sigma_u2=sigma_u2,
        sigma_w2=sigma_w2,
        trials=trials,
        seed=rng.seed,
    )


def birge_kl_threshold(delta: float) -> BirgeThreshold:
    """Birgé's two-point KL threshold and its log(1/(3 delta)) relaxation."""
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    exact = (1 - delta) * math.log((1 - delta) / delta) + delta * math.log(delta / (1 - delta))
    relaxed = math.log(1.0 / (3.0 * delta))
    return BirgeThreshold(exact=exact, relaxed=relaxed)


def birge_min_samples(spec: BirgeSpec) -> BirgeBound:
    """Minimum trajectory length (sigma_w^2 / (2 sigma_u^2)) ((r-1)/(2v))^(2n)
    log(1/(3 delta)) below which high-confidence stabilization is impossible."""
    params = spec.params
    ratio = (params.r - 1.0) / (2.0 * params.v)
    min_samples = (
        spec.sigma_w2
        / (2.0 * spec.sigma_u2)
        * ratio ** (2 * params.n)
        * math.log(1.0 / (3.0 * spec.delta))
    )
    theorem_m = 2.0 * (2.0 * params.v / (params.r - 1.0)) ** params.n
    return BirgeBound(min_samples=min_samples, theorem_m=theorem_m)
