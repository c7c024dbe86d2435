"""Per-token visual dependence and the three-way token classification.

The dependence of a token on the conditioning input is the relative
change of its probability when the clean input is replaced by a noised
one::

    d = (p_clean - p_noisy) / max(p_clean, p_noisy)

``d`` lies in [-1, 1]: close to 1 the token leaned on the clean input,
close to -1 it became more likely once the input was destroyed, and
around 0 the input made no difference.  Tokens are bucketed into three
classes with fixed boundaries at +/-0.25.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .trace import TokenTrace

POSITIVE_THRESHOLD = 0.25
NEGATIVE_THRESHOLD = -0.25


class TokenClass(Enum):
    IMAGE_POSITIVE = "positive"
    IMAGE_INVARIANT = "invariant"
    IMAGE_NEGATIVE = "negative"


def visual_dependence(p_clean: float, p_noisy: float) -> float:
    """Relative probability change between clean and noised conditioning.

    Both probabilities of exactly zero carry no signal either way and map
    to 0 by definition.
    """
    p_clean = float(p_clean)
    p_noisy = float(p_noisy)
    for name, p in (("p_clean", p_clean), ("p_noisy", p_noisy)):
        if not math.isfinite(p) or p < 0.0 or p > 1.0:
            raise ValueError(f"{name} = {p!r} outside [0, 1]")
    m = p_clean if p_clean >= p_noisy else p_noisy
    if m == 0.0:
        return 0.0
    return (p_clean - p_noisy) / m


def dependence_array(p_clean: np.ndarray, p_noisy: np.ndarray) -> np.ndarray:
    """Vectorized ``visual_dependence`` over parallel probability arrays."""
    pc = np.asarray(p_clean, dtype=np.float64)
    pn = np.asarray(p_noisy, dtype=np.float64)
    if pc.shape != pn.shape:
        raise ValueError("p_clean and p_noisy must have the same shape")
    for name, arr in (("p_clean", pc), ("p_noisy", pn)):
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError(f"{name} contains values outside [0, 1]")
    m = np.maximum(pc, pn)
    return np.where(m > 0.0, (pc - pn) / np.where(m > 0.0, m, 1.0), 0.0)


def classify(d: float) -> TokenClass:
    """Bucket a dependence value; boundaries go to the upper class."""
    if not math.isfinite(d) or d < -1.0 or d > 1.0:
        raise ValueError(f"dependence value {d!r} outside [-1, 1]")
    if d >= POSITIVE_THRESHOLD:
        return TokenClass.IMAGE_POSITIVE
    if d < NEGATIVE_THRESHOLD:
        return TokenClass.IMAGE_NEGATIVE
    return TokenClass.IMAGE_INVARIANT


@dataclass(frozen=True)
class DependenceProfile:
    """Dependence values and classes for every token of one trace."""

    sample_id: str
    d: tuple[float, ...]
    classes: tuple[TokenClass, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", tuple(float(v) for v in self.d))
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.d) < 1:
            raise ValueError(f"profile {self.sample_id!r}: must cover at least one token")
        if len(self.classes) != len(self.d):
            raise ValueError(f"profile {self.sample_id!r}: d and classes lengths differ")
        for i, (v, cls) in enumerate(zip(self.d, self.classes)):
            if classify(v) is not cls:
                raise ValueError(
                    f"profile {self.sample_id!r}: classes[{i}] = {cls} inconsistent with d = {v}"
                )

    def __len__(self) -> int:
        return len(self.d)


def profile_trace(trace: TokenTrace) -> DependenceProfile:
    """Compute per-token dependence values and classes for a trace."""
    d = tuple(visual_dependence(pc, pn) for pc, pn in zip(trace.p_clean, trace.p_noisy))
    return DependenceProfile(
        sample_id=trace.sample_id,
        d=d,
        classes=tuple(classify(v) for v in d),
    )


def sample_dependence(profile: DependenceProfile) -> float:
    """Sequence-level score: the plain sum of per-token dependence."""
    return float(sum(profile.d))
