"""Learning-rate schedule arithmetic for linear-warmup / inverse-sqrt-decay training.

The schedule ramps linearly from zero over the warmup phase and then decays
with the inverse square root of the step count, peaking exactly at the warmup
boundary.  Because the decay is parameterized by optimizer steps rather than
examples seen, enlarging the effective batch k times while keeping the rate
parameter fixed implicitly raises the per-example rate by sqrt(k); the helpers
here make that relationship explicit and computable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class ScheduleKind(str, Enum):
    LINEAR_WARMUP_RSQRT_DECAY = "linear_warmup_rsqrt_decay"


class ScalingPolicy(str, Enum):
    KEEP_PARAMETER = "keep_parameter"
    LINEAR = "linear"
    SQRT = "sqrt"


@dataclass(frozen=True)
class ScheduleConfig:
    """Parameters of the rate schedule.

    ``learning_rate`` is the dimensionless rate parameter (e.g. 0.20), not the
    rate actually applied at any step.  ``scale_constant`` is a uniform
    multiplier left at 1.0 unless a framework's hidden normalization constant
    must be matched; every ratio-based property is invariant to it.
    """

    learning_rate: float = 0.20
    warmup_steps: int = 16000
    scale_constant: float = 1.0
    kind: ScheduleKind = ScheduleKind.LINEAR_WARMUP_RSQRT_DECAY

    def __post_init__(self) -> None:
        if not math.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be finite and > 0, got {self.learning_rate}")
        if self.warmup_steps < 1:
            raise ValueError(f"warmup_steps must be >= 1, got {self.warmup_steps}")
        if not math.isfinite(self.scale_constant) or self.scale_constant <= 0:
            raise ValueError(f"scale_constant must be finite and > 0, got {self.scale_constant}")


@dataclass(frozen=True)
class GpuScalingPolicy:
    """How to adapt the rate parameter when moving to k times more GPUs."""

    policy: ScalingPolicy
    k: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"GPU multiplier k must be >= 1, got {self.k}")


def actual_lr(config: ScheduleConfig, step):
    """Rate applied at ``step``: lr * C * min(step * w**-1.5, step**-0.5).

    Accepts a scalar step or an array of steps (returns an array then).
    Step 0 is defined as 0 by continuity of the warmup ramp; negative steps
    are rejected.
    """
    steps = np.asarray(step, dtype=float)
    if np.any(steps < 0):
        raise ValueError("step must be >= 0")
    w = float(config.warmup_steps)
    with np.errstate(divide="ignore"):
        # min(warmup ramp, decay); at step 0 the ramp side is 0 and wins
        rate = np.minimum(steps * w**-1.5, steps**-0.5)
    rate = config.learning_rate * config.scale_constant * rate
    if np.ndim(step) == 0:
        return float(rate)
    return rate


def peak_lr(config: ScheduleConfig) -> float:
    """Maximum rate over the whole schedule, reached at step == warmup_steps."""
    return actual_lr(config, config.warmup_steps)


def scale_for_gpus(config: ScheduleConfig, scaling: GpuScalingPolicy) -> ScheduleConfig:
    """Return the config to use on ``scaling.k`` times more GPUs.

    ``keep_parameter`` leaves the config untouched (the step-parameterized
    decay then yields an implicit sqrt(k) per-example rate increase);
    ``linear`` multiplies the rate parameter by k, ``sqrt`` by sqrt(k).
    warmup_steps is never modified here; shortening warmup is a separate,
    deliberate decision because it also raises the peak rate.
    """
    if scaling.policy is ScalingPolicy.KEEP_PARAMETER:
        return config
    if scaling.policy is ScalingPolicy.LINEAR:
        factor = float(scaling.k)
    elif scaling.policy is ScalingPolicy.SQRT:
        factor = math.sqrt(scaling.k)
    else:
        raise ValueError(f"unknown scaling policy: {scaling.policy!r}")
    return replace(config, learning_rate=config.learning_rate * factor)


def equivalent_example_rate_ratio(config: ScheduleConfig, k: int, step: int) -> float:
    """actual_lr(step) / actual_lr(step * k), valid only in the decay region.

    In the decay region the ratio equals sqrt(k) exactly: a run on k GPUs
    reaches the same rate after k times fewer steps, i.e. after the same
    number of training examples the rate is sqrt(k) times higher.  Inside
    warmup the ratio has no such meaning, so asking for it is an error.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if step < config.warmup_steps:
        raise ValueError(
            f"step {step} is inside warmup (< {config.warmup_steps}); "
            "the rate ratio is only sqrt(k) in the decay region"
        )
    return actual_lr(config, step) / actual_lr(config, step * k)


def gradient_noise_scale(learning_rate: float, corpus_size: float, effective_batch: float) -> float:
    """Noise scale g = lr * (N/B - 1) for corpus size N and effective batch B."""
    if learning_rate <= 0:
        raise ValueError(f"learning_rate must be > 0, got {learning_rate}")
    if effective_batch <= 0:
        raise ValueError(f"effective_batch must be > 0, got {effective_batch}")
    if effective_batch > corpus_size:
        raise ValueError(
            f"effective_batch ({effective_batch}) cannot exceed corpus size ({corpus_size})"
        )
    return learning_rate * (corpus_size / effective_batch - 1.0)


def effective_batch_size(batch_size: int, gpus: int) -> int:
    """Subwords consumed per optimizer step: per-GPU batch size times GPU count."""
    if batch_size <= 0:
        raise ValueError(f"batch_size must be > 0, got {batch_size}")
    if gpus < 1:
        raise ValueError(f"gpus must be >= 1, got {gpus}")
    return batch_size * gpus
