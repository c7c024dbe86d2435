"""Forward-diffusion corruption of conditioning vectors.

The clean conditioning vector is mixed with Gaussian noise along a fixed
variance schedule: ``x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps``
with ``abar_t`` the cumulative product of ``1 - beta``.  The betas rise
linearly from 1e-4 to 0.02, so late steps retain almost no signal while
still leaving a faint imprint of the original vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BETA_START = 1e-4
BETA_END = 0.02
DEFAULT_NUM_STEPS = 1000
DEFAULT_NOISE_STEP = 900


@dataclass(frozen=True)
class NoiseSchedule:
    num_steps: int
    betas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self) -> None:
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        if len(self.betas) != self.num_steps or len(self.alpha_bars) != self.num_steps:
            raise ValueError("schedule arrays must have num_steps entries")
        if np.any(self.betas <= 0.0) or np.any(self.betas >= 1.0):
            raise ValueError("betas must lie in (0, 1)")
        if np.any(np.diff(self.alpha_bars) >= 0.0):
            raise ValueError("alpha_bars must be strictly decreasing")
        self.betas.setflags(write=False)
        self.alpha_bars.setflags(write=False)


def make_schedule(num_steps: int = DEFAULT_NUM_STEPS) -> NoiseSchedule:
    """Linear beta schedule with cumulative signal coefficients."""
    if num_steps < 1:
        raise ValueError(f"num_steps must be >= 1, got {num_steps}")
    betas = np.linspace(BETA_START, BETA_END, num_steps)
    alpha_bars = np.cumprod(1.0 - betas)
    return NoiseSchedule(num_steps=num_steps, betas=betas, alpha_bars=alpha_bars)


def corrupt(
    x0: np.ndarray,
    step: int,
    schedule: NoiseSchedule | None = None,
    rng_seed: int = 0,
) -> np.ndarray:
    """Noise ``x0`` to the given step; step 0 returns ``x0`` unchanged.

    Identical ``(x0, step, rng_seed)`` always yields the identical vector,
    so independent pipeline stages can reproduce each other's draws.
    """
    if schedule is None:
        schedule = make_schedule()
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.size == 0:
        raise ValueError("x0 must be non-empty")
    if not (0 <= step <= schedule.num_steps):
        raise ValueError(f"step must lie in [0, {schedule.num_steps}], got {step}")
    if step == 0:
        return x0.copy()
    abar = schedule.alpha_bars[step - 1]
    eps = np.random.default_rng(rng_seed).standard_normal(x0.shape)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps
