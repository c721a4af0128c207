"""The parametric hard-to-stabilize family, trajectory simulation under
pluggable input policies, and single-parameter least-squares estimation.

The family is x_{t+1} = A x_t + B u_t + w_t with A carrying ``r`` in the
top-left corner and ``v`` on the superdiagonal, B = (b1, 0, ..., 0, v)',
w_t i.i.d. N(0, sigma_w^2 I), and x_0 = 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .numerics import Prng

DIVERGENCE_LIMIT = 1e300


class ParameterError(ValueError):
    """Family parameters outside their admissible range."""


class NoExcitationError(RuntimeError):
    """Least-squares estimation attempted on an all-zero input sequence."""


class DivergedTrajectoryError(RuntimeError):
    """State magnitude exceeded the divergence guard during simulation."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"trajectory diverged (|state| > {DIVERGENCE_LIMIT:g}) at step {step}")


@dataclass(frozen=True)
class LtiSystem:
    """System matrices plus isotropic process-noise variance (per coordinate)."""

    a: np.ndarray
    b: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(a.shape[0], 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got shape {a.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("system matrices must be finite")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class HardFamilyParams:
    """Parameters (n, r, v, b1) of the hard family; validated on construction."""

    n: int
    r: float
    v: float
    b1: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"dimension must be >= 2, got {self.n}")
        if self.r <= 1:
            raise ParameterError(f"r must exceed 1, got {self.r}")
        if not 0 < self.v < (self.r - 1) / 2:
            raise ParameterError(
                f"v must lie in (0, (r-1)/2) = (0, {(self.r - 1) / 2}), got {self.v}"
            )
        if self.b1 < 0:
            raise ParameterError(f"b1 must be nonnegative, got {self.b1}")


def hard_matrices(n: int, r: float, v: float, b1: float) -> tuple[np.ndarray, np.ndarray]:
    """Raw (A, B) of the family; does not enforce the parameter range."""
    a = np.zeros((n, n))
    a[0, 0] = r
    for i in range(n - 1):
        a[i, i + 1] = v
    b = np.zeros((n, 1))
    b[0, 0] = b1
    b[-1, 0] = v
    return a, b


def hard_system(params: HardFamilyParams, noise_variance: float = 0.0) -> LtiSystem:
    a, b = hard_matrices(params.n, params.r, params.v, params.b1)
    return LtiSystem(a=a, b=b, noise_variance=noise_variance)


@dataclass(frozen=True)
class HardPair:
    """Sibling systems sharing A, with b1 = 0 and b1 = m respectively."""

    s1: LtiSystem
    s2: LtiSystem
    m: float
    params: HardFamilyParams


def make_hard_pair(params: HardFamilyParams, m: float, noise_variance: float = 0.0) -> HardPair:
    if m < 0:
        raise ParameterError(f"perturbation m must be nonnegative, got {m}")
    a, b1 = hard_matrices(params.n, params.r, params.v, 0.0)
    _, b2 = hard_matrices(params.n, params.r, params.v, m)
    return HardPair(
        s1=LtiSystem(a=a, b=b1, noise_variance=noise_variance),
        s2=LtiSystem(a=a, b=b2, noise_variance=noise_variance),
        m=m,
        params=params,
    )


def controllability_matrix(sys: LtiSystem) -> np.ndarray:
    """[B, AB, ..., A^(n-1)B] stacked as columns."""
    cols = [sys.b]
    for _ in range(sys.n - 1):
        cols.append(sys.a @ cols[-1])
    return np.hstack(cols)


@dataclass(frozen=True)
class InputPolicy:
    """Exploration input law: i.i.d. Gaussian, zero, impulse, or a custom
    history map, plus an optional terminal gain map applied after exploration."""

    kind: str
    sigma_u2: float = 0.0
    impulse_time: int = 0
    amplitude: float = 1.0
    history_map: Optional[Callable] = None
    terminal_map: Optional[Callable] = None

    @staticmethod
    def iid_gaussian(sigma_u2: float, terminal_map=None) -> "InputPolicy":
        if sigma_u2 < 0:
            raise ValueError("sigma_u2 must be nonnegative")
        return InputPolicy(kind="iid-gaussian", sigma_u2=sigma_u2, terminal_map=terminal_map)

    @staticmethod
    def zero() -> "InputPolicy":
        return InputPolicy(kind="zero")

    @staticmethod
    def impulse(time: int = 0, amplitude: float = 1.0) -> "InputPolicy":
        return InputPolicy(kind="impulse", impulse_time=time, amplitude=amplitude)

    @staticmethod
    def custom(history_map: Callable, terminal_map=None) -> "InputPolicy":
        """history_map(t, inputs_so_far, states_so_far, generator) -> u_t."""
        return InputPolicy(kind="custom", history_map=history_map, terminal_map=terminal_map)


@dataclass(frozen=True)
class Trajectory:
    """Input/state sample path with its (seed, stream) provenance.

    ``first_coord_residuals[t-1]`` records x_t^(1) - (A x_{t-1})^(1) =
    b1 u_{t-1} + w^(1)_{t-1} exactly as realized during simulation.  For
    unstable open-loop rollouts the same quantity re-derived from stored
    states loses all accuracy once |x| passes ~1/eps, so estimators prefer
    this channel when present.
    """

    inputs: np.ndarray
    states: np.ndarray
    seed_record: tuple[int, int]
    first_coord_residuals: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return len(self.inputs)


def _policy_draws_per_step(policy: InputPolicy) -> int:
    return 1 if policy.kind == "iid-gaussian" else 0


def simulate(sys: LtiSystem, policy: InputPolicy, horizon: int, rng: Prng) -> Trajectory:
    """Roll the dynamics forward from x_0 = 0 for ``horizon`` steps.

    Per step the stream is consumed in a fixed order (input draw first, then
    the n noise coordinates), so a longer simulation's prefix matches a
    shorter one on the same stream bitwise.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = sys.n
    sigma_w = float(np.sqrt(sys.noise_variance))
    b_col = sys.b.ravel()
    b1 = float(b_col[0])
    gen = rng.generator

    states = np.zeros((horizon + 1, n))
    inputs = np.zeros(horizon)
    residuals = np.zeros(horizon)

    if policy.kind == "custom":
        if policy.history_map is None:
            raise ValueError("custom policy requires a history map")
        x = states[0]
        for t in range(horizon):
            u = float(policy.history_map(t, inputs[:t], states[: t + 1], gen))
            w = sigma_w * gen.standard_normal(n)
            x = sys.a @ x + b_col * u + w
            if np.max(np.abs(x)) > DIVERGENCE_LIMIT:
                raise DivergedTrajectoryError(t + 1)
            inputs[t] = u
            states[t + 1] = x
            residuals[t] = b1 * u + w[0]
    else:
        u_draws = _policy_draws_per_step(policy)
        block = gen.standard_normal((horizon, u_draws + n))
        if policy.kind == "iid-gaussian":
            inputs = np.sqrt(policy.sigma_u2) * block[:, 0]
        elif policy.kind == "impulse":
            if 0 <= policy.impulse_time < horizon:
                inputs[policy.impulse_time] = policy.amplitude
        elif policy.kind != "zero":
            raise ValueError(f"unknown policy kind {policy.kind!r}")
        noise = sigma_w * block[:, u_draws:]
        x = states[0]
        for t in range(horizon):
            x = sys.a @ x + b_col * inputs[t] + noise[t]
            if np.max(np.abs(x)) > DIVERGENCE_LIMIT:
                raise DivergedTrajectoryError(t + 1)
            states[t + 1] = x
        residuals = b1 * inputs + noise[:, 0]

    return Trajectory(
        inputs=inputs,
        states=states,
        seed_record=(rng.seed, rng.stream),
        first_coord_residuals=residuals,
    )


def ls_estimate_b1(traj: Trajectory, params: HardFamilyParams) -> float:
    """Least-squares estimate of b1 with (r, v) known.

    Exact minimizer of sum_t (res_t - b u_{t-1})^2 where
    res_t = x_t^(1) - r x_{t-1}^(1) - v x_{t-1}^(2).
    """
    u = traj.inputs
    denominator = float(u @ u)
    if denominator == 0.0:
        raise NoExcitationError("all inputs are zero; b1 is unidentifiable")
    if traj.first_coord_residuals is not None:
        res = traj.first_coord_residuals
    else:
        x = traj.states
        res = x[1:, 0] - params.r * x[:-1, 0] - params.v * x[:-1, 1]
    return float(u @ res) / denominator


TRAJECTORY_CSV_FLOAT = "%.17g"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV with header t,u,x1,...,xn; row t carries u_t and x_t (u empty at t = N)."""
    n = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u"] + [f"x{i + 1}" for i in range(n)])
        for t in range(traj.states.shape[0]):
            u_field = TRAJECTORY_CSV_FLOAT % traj.inputs[t] if t < traj.horizon else ""
            writer.writerow(
                [t, u_field] + [TRAJECTORY_CSV_FLOAT % value for value in traj.states[t]]
            )


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = len(header) - 2
        inputs, states = [], []
        for row in reader:
            if row[1] != "":
                inputs.append(float(row[1]))
            states.append([float(value) for value in row[2:]])
    return Trajectory(
        inputs=np.array(inputs),
        states=np.array(states).reshape(-1, n),
        seed_record=(0, 0),
        first_coord_residuals=None,
    )
