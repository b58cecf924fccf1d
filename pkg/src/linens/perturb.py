"""Perturbation calibration and keyed random streams.

This module holds the confidence-radius formulas, the perturbation
distribution families with their anti-concentration floors, the
ensemble-size rule, and a counter-based random stream in which every
draw is a pure function of ``(base_seed, structured key)``. Purity makes
draws replayable and order-independent, which the round-robin-ensemble /
perturbed-history equivalence test relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

# stream purpose tags (first component of every key)
TAG_INIT = 0xA1
TAG_REWARD = 0xA2
TAG_NOISE = 0xA3
TAG_POLICY = 0xA4
TAG_ENV = 0xA5
TAG_PHE = 0xA6
TAG_REPLICATION = 0xA7


def _splitmix64(z: int) -> int:
    """One round of the splitmix64 mixing function."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_key(base_seed: int, *parts: int) -> int:
    """Deterministically mix a base seed with integer key parts."""
    h = _splitmix64(base_seed & _MASK64)
    for p in parts:
        h = _splitmix64(h ^ _splitmix64(p & _MASK64))
    return h


def keyed_generator(base_seed: int, *parts: int) -> np.random.Generator:
    """Counter-based generator that is a pure function of its key.

    The key parts are folded into a 128-bit Philox key via splitmix64, so
    identical keys reproduce identical streams across runs and processes.
    """
    h = mix_key(base_seed, *parts)
    key = np.array([h, _splitmix64(h)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ConfidenceParams:
    """Inputs to the confidence radii: noise level, regularization,
    parameter bound, dimension, horizon, and failure probability."""

    sigma: float
    lam: float
    s_bound: float
    dim: int
    horizon: int
    delta: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.s_bound <= 0:
            raise ValueError("s_bound must be positive")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")


def beta(params: ConfidenceParams, t: int) -> float:
    """Confidence radius of the ridge estimator after ``t`` steps."""
    if t < 0:
        raise ValueError("t must be non-negative")
    log_term = params.dim * math.log1p(t / (params.dim * params.lam))
    return params.sigma * math.sqrt(log_term + 2.0 * math.log(1.0 / params.delta)) + math.sqrt(
        params.lam
    ) * params.s_bound


def gamma_tilde(params: ConfidenceParams) -> float:
    """Horizon-level confidence radius of the perturbation component."""
    d, t_hor = params.dim, params.horizon
    log_ratio = math.log(2.0 * t_hor / params.delta)
    inner = (
        math.sqrt(d * math.log1p(t_hor / (d * params.lam)) + 2.0 * log_ratio)
        + math.sqrt(d)
        + math.sqrt(2.0 * log_ratio)
    )
    return beta(params, t_hor) * inner


def gamma(params: ConfidenceParams) -> float:
    """Horizon-level confidence radius of the perturbed estimator."""
    return gamma_tilde(params) + beta(params, params.horizon)


def p_n() -> float:
    """Upper-tail probability P(z >= 1) of a standard normal."""
    return 0.5 * math.erfc(1.0 / math.sqrt(2.0))


def ensemble_size(params: ConfidenceParams, arm_count: int) -> int:
    """Ensemble size sufficient for the regret guarantee, clamped at 1."""
    if arm_count < 1:
        raise ValueError("arm_count must be at least 1")
    pn = p_n()
    raw = (8.0 / pn**2) * (
        arm_count * math.log(params.horizon) + math.log(1.0 / params.delta)
    )
    return max(1, math.ceil(raw))


class PerturbationFamily:
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    RADEMACHER = "rademacher"
    SPHERICAL = "spherical"
    BINOMIAL = "binomial"

    ALL = (GAUSSIAN, UNIFORM, RADEMACHER, SPHERICAL, BINOMIAL)


def _sample_normalized(family: str, rng: np.random.Generator, size) -> np.ndarray:
    """Draw from the family normalized to be symmetric, 1-sub-Gaussian,
    with variance at least 1/2.

    gaussian:   N(0, 1)
    uniform:    Unif[-sqrt(3), sqrt(3)]          (variance 1, proxy 1)
    rademacher: +/- 1                            (variance 1, proxy 1)
    spherical:  sqrt(2) * cos(2*pi*U)            (circle coordinate; variance 1)
    binomial:   Binomial(2, 1/2) - 1             (variance 1/2, proxy <= 1)
    """
    if family == PerturbationFamily.GAUSSIAN:
        return rng.standard_normal(size)
    if family == PerturbationFamily.UNIFORM:
        bound = math.sqrt(3.0)
        return rng.uniform(-bound, bound, size=size)
    if family == PerturbationFamily.RADEMACHER:
        return 2.0 * rng.integers(0, 2, size=size) - 1.0
    if family == PerturbationFamily.SPHERICAL:
        return math.sqrt(2.0) * np.cos(2.0 * math.pi * rng.random(size))
    if family == PerturbationFamily.BINOMIAL:
        return rng.binomial(2, 0.5, size=size) - 1.0
    raise ValueError(f"unknown perturbation family {family!r}")


@dataclass(frozen=True)
class PerturbationSpec:
    """A perturbation distribution: family plus per-coordinate scale.

    ``anti_conc_threshold`` and ``anti_conc_floor`` give the guaranteed
    directional anti-concentration P(u^T Z >= threshold * ||u||) >= floor.
    The Gaussian floor is the standard-normal upper tail at 1; the other
    families, normalized to 1-sub-Gaussian with variance >= 1/2, carry
    the generic floor 0.01 at threshold scale/3.
    """

    family: str = PerturbationFamily.GAUSSIAN
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in PerturbationFamily.ALL:
            raise ValueError(f"unknown perturbation family {self.family!r}")
        if self.scale < 0:
            raise ValueError("scale must be non-negative")

    @property
    def anti_conc_threshold(self) -> float:
        if self.family == PerturbationFamily.GAUSSIAN:
            return self.scale
        return self.scale / 3.0

    @property
    def anti_conc_floor(self) -> float:
        if self.family == PerturbationFamily.GAUSSIAN:
            return p_n()
        return 0.01

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.scale * _sample_normalized(self.family, rng, size)


class Keying:
    """How reward perturbations are keyed in a stream."""

    BY_STEP = "by_step"
    BY_ARM_COUNT = "by_arm_count"

    ALL = (BY_STEP, BY_ARM_COUNT)


class PerturbationStream:
    """Keyed source of perturbation draws shared by an ensemble.

    Every draw is a pure function of ``(base_seed, key)``. Reward
    perturbations for all models are produced as one vector per key;
    model ``j`` owns component ``j``, so a draw depends only on
    ``(base_seed, j, key)`` regardless of the ensemble size.
    """

    def __init__(self, base_seed: int, keying: str = Keying.BY_STEP):
        if keying not in Keying.ALL:
            raise ValueError(f"unknown keying mode {keying!r}")
        self.base_seed = int(base_seed)
        self.keying = keying

    def generator(self, *parts: int) -> np.random.Generator:
        return keyed_generator(self.base_seed, *parts)

    def initial_matrix(
        self, spec: PerturbationSpec, n_models: int, dim: int, lam: float
    ) -> np.ndarray:
        """(n_models, dim) matrix of initial perturbations; per-coordinate
        standard-deviation target is ``sqrt(lam) * scale``."""
        rng = self.generator(TAG_INIT)
        return math.sqrt(lam) * spec.sample(rng, (n_models, dim))

    def initial_vector(
        self, spec: PerturbationSpec, model: int, dim: int, lam: float
    ) -> np.ndarray:
        """Initial perturbation of one model (row ``model`` of the matrix)."""
        return self.initial_matrix(spec, model + 1, dim, lam)[model]

    def _reward_key(self, key: tuple) -> tuple:
        if self.keying == Keying.BY_STEP:
            if len(key) != 1:
                raise ValueError("by-step keying expects a single step key")
        else:
            if len(key) != 2:
                raise ValueError("by-arm-count keying expects an (arm, count) key")
        return key

    def reward_vector(self, spec: PerturbationSpec, n_models: int, *key: int) -> np.ndarray:
        """(n_models,) vector of reward perturbations for one key."""
        parts = self._reward_key(key)
        rng = self.generator(TAG_REWARD, *parts)
        return spec.sample(rng, n_models)

    def reward_perturbation(self, spec: PerturbationSpec, model: int, *key: int) -> float:
        """Reward perturbation of one model for one key."""
        return float(self.reward_vector(spec, model + 1, *key)[model])
