"""Finite-arm stochastic linear bandit environment.

The environment holds the hidden parameter and generates noisy linear
rewards; policies never see the hidden parameter. Regret is scored
against the true optimal arm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_NORM_SLACK = 1e-9


class NoiseFamily:
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    RADEMACHER = "rademacher"

    ALL = (GAUSSIAN, UNIFORM, RADEMACHER)


@dataclass(frozen=True)
class NoiseModel:
    """A sigma-sub-Gaussian reward-noise distribution.

    ``gaussian`` is N(0, sigma^2); ``uniform`` is Unif[-sigma, sigma]
    (variance sigma^2/3, proxy sigma); ``rademacher`` is +/- sigma with
    equal probability.
    """

    family: str = NoiseFamily.GAUSSIAN
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in NoiseFamily.ALL:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def sample(self, rng: np.random.Generator, size=None):
        if self.sigma == 0.0:
            return 0.0 if size is None else np.zeros(size)
        if self.family == NoiseFamily.GAUSSIAN:
            return rng.normal(0.0, self.sigma, size=size)
        if self.family == NoiseFamily.UNIFORM:
            return rng.uniform(-self.sigma, self.sigma, size=size)
        return self.sigma * (2.0 * rng.integers(0, 2, size=size) - 1.0)


class LinearBanditEnv:
    """Fixed arm set, hidden parameter, and noisy linear rewards.

    All arms must lie in the unit ball and the hidden parameter's norm
    must not exceed ``param_bound``.
    """

    def __init__(
        self,
        arms: np.ndarray,
        theta_star: np.ndarray,
        noise: NoiseModel,
        param_bound: float,
    ):
        arms = np.atleast_2d(np.asarray(arms, dtype=np.float64))
        theta_star = np.asarray(theta_star, dtype=np.float64)
        if arms.ndim != 2 or arms.shape[0] < 1:
            raise ValueError("arms must be a non-empty (K, d) array")
        if theta_star.shape != (arms.shape[1],):
            raise ValueError("theta_star dimension must match the arms")
        if param_bound <= 0:
            raise ValueError("param_bound must be positive")
        norms = np.linalg.norm(arms, axis=1)
        if np.any(norms > 1.0 + _NORM_SLACK):
            raise ValueError("every arm must satisfy ||x|| <= 1")
        if np.linalg.norm(theta_star) > param_bound + _NORM_SLACK:
            raise ValueError("||theta_star|| must not exceed param_bound")
        self.arms = arms
        self.theta_star = theta_star
        self.noise = noise
        self.param_bound = float(param_bound)
        self.dim = arms.shape[1]
        self.arm_count = arms.shape[0]
        self._means = arms @ theta_star
        # ties broken toward the smallest index (argmax returns the first max)
        self.optimal_arm_index = int(np.argmax(self._means))
        self.optimal_value = float(self._means[self.optimal_arm_index])

    def best_arm(self) -> tuple[int, float]:
        """Index and value of the arm maximizing the true mean reward."""
        return self.optimal_arm_index, self.optimal_value

    def mean_reward(self, arm_index: int) -> float:
        self._check_index(arm_index)
        return float(self._means[arm_index])

    def sample_reward(self, arm_index: int, rng: np.random.Generator) -> float:
        """Mean reward of the arm plus one noise draw from ``rng``."""
        self._check_index(arm_index)
        return float(self._means[arm_index]) + float(self.noise.sample(rng))

    def _check_index(self, arm_index: int) -> None:
        if not 0 <= arm_index < self.arm_count:
            raise ValueError(f"arm index {arm_index} out of range [0, {self.arm_count})")

    @classmethod
    def random(
        cls,
        dim: int,
        arm_count: int,
        noise: NoiseModel,
        param_bound: float,
        rng: np.random.Generator,
    ) -> "LinearBanditEnv":
        """Seeded random instance: unit-ball arms and a hidden parameter
        rescaled to ``param_bound * u`` with ``u ~ Unif[0.5, 1]``."""
        directions = rng.standard_normal((arm_count, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = rng.uniform(0.0, 1.0, size=arm_count) ** (1.0 / dim)
        arms = directions * radii[:, None]
        theta_dir = rng.standard_normal(dim)
        theta_dir /= np.linalg.norm(theta_dir)
        theta_star = theta_dir * param_bound * rng.uniform(0.5, 1.0)
        return cls(arms, theta_star, noise, param_bound)


@dataclass
class RegretLedger:
    """Per-step and cumulative regret of one replication."""

    env: LinearBanditEnv
    per_step: list = field(default_factory=list)
    cumulative: float = 0.0

    def record(self, arm_index: int) -> float:
        """Append the regret of pulling ``arm_index``; returns the increment."""
        gap = self.env.optimal_value - self.env.mean_reward(arm_index)
        self.per_step.append(gap)
        self.cumulative += gap
        return gap
