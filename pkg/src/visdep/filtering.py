"""Rank training samples by summed visual dependence and filter the corpus.

Each sample is scored with a trained model: one teacher-forced pass under
the clean feature vector, one under a single fixed noise draw, then the
per-token dependence values are summed.  A manifest records which samples
a strategy keeps and removes, so filtered retraining is reproducible.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dependence import profile_trace, sample_dependence
from .diffusion import DEFAULT_NOISE_STEP, NoiseSchedule, corrupt, make_schedule
from .seeding import derive_seed, rng_for
from .toymodel import ModelParams, teacher_forced_probs
from .trace import TokenTrace
from . import synth

MANIFEST_FORMAT = "visdep-filter-manifest"
MANIFEST_VERSION = 1


class FilterStrategy(Enum):
    REMOVE_HIGHEST = "highest"
    REMOVE_LOWEST = "lowest"
    REMOVE_RANDOM = "random"


@dataclass(frozen=True)
class FilterManifest:
    strategy: FilterStrategy
    fraction: float
    kept: tuple[str, ...]
    removed: tuple[str, ...]
    scores: dict

    def __post_init__(self) -> None:
        object.__setattr__(self, "kept", tuple(self.kept))
        object.__setattr__(self, "removed", tuple(self.removed))
        kept_set = set(self.kept)
        removed_set = set(self.removed)
        if kept_set & removed_set:
            raise ValueError("kept and removed overlap")
        if kept_set | removed_set != set(self.scores):
            raise ValueError("kept + removed must partition the scored sample ids")
        expected = int(round(self.fraction * len(self.scores)))
        if len(self.removed) != expected:
            raise ValueError(
                f"removed count {len(self.removed)} != round(fraction * n) = {expected}"
            )

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "strategy": self.strategy.value,
            "fraction": self.fraction,
            "kept": list(self.kept),
            "removed": list(self.removed),
            "scores": dict(self.scores),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterManifest":
        if d.get("format") != MANIFEST_FORMAT:
            raise ValueError(f"not a {MANIFEST_FORMAT} object")
        return cls(
            strategy=FilterStrategy(d["strategy"]),
            fraction=d["fraction"],
            kept=d["kept"],
            removed=d["removed"],
            scores=d["scores"],
        )


def save_manifest(manifest: FilterManifest, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_manifest(path: str | os.PathLike) -> FilterManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return FilterManifest.from_dict(json.load(fh))


def score_corpus(
    scenes: list,
    params: ModelParams,
    noise_step: int = DEFAULT_NOISE_STEP,
    seed: int = 42,
    schedule: NoiseSchedule | None = None,
) -> dict[str, float]:
    """Summed per-token dependence for every scene, in corpus order.

    Uses one fixed noise draw per sample, derived from ``(seed,
    scene_id)``, so scores are stable across runs and batch sizes.
    """
    if not scenes:
        raise ValueError("cannot score an empty corpus")
    if schedule is None:
        schedule = make_schedule()
    features = np.array([s.feature for s in scenes])
    targets = [list(s.caption[1:]) for s in scenes]
    clean_p = teacher_forced_probs(params, features, targets)
    noisy = np.stack(
        [
            corrupt(np.array(s.feature), noise_step, schedule, derive_seed(seed, "filternoise", s.scene_id))
            for s in scenes
        ]
    )
    noisy_p = teacher_forced_probs(params, noisy, targets)
    scores: dict[str, float] = {}
    v_obj = params.v_obj
    for i, s in enumerate(scenes):
        target = s.caption[1:]
        trace = TokenTrace(
            sample_id=s.scene_id,
            tokens=target,
            surfaces=synth.surfaces_for(target, v_obj),
            p_clean=tuple(float(x) for x in clean_p[i]),
            p_noisy=tuple(float(x) for x in noisy_p[i]),
            eos_index=len(target) - 1,
        )
        scores[s.scene_id] = sample_dependence(profile_trace(trace))
    return scores


def apply_filter(
    scores: dict[str, float],
    strategy: FilterStrategy,
    fraction: float,
    seed: int = 42,
) -> FilterManifest:
    """Partition sample ids into kept and removed under a strategy.

    ``round(fraction * n)`` samples are removed; score ties break by
    sample id.  Both output lists preserve the input (corpus) order.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    for sid, sc in scores.items():
        if not math.isfinite(sc):
            raise ValueError(f"non-finite score for sample {sid!r}")
    ids = list(scores)
    n_remove = int(round(fraction * len(ids)))
    if strategy is FilterStrategy.REMOVE_HIGHEST:
        ranked = sorted(ids, key=lambda s: (-scores[s], s))
    elif strategy is FilterStrategy.REMOVE_LOWEST:
        ranked = sorted(ids, key=lambda s: (scores[s], s))
    elif strategy is FilterStrategy.REMOVE_RANDOM:
        rng = rng_for(seed, "filter-random")
        ranked = [ids[int(i)] for i in rng.permutation(len(ids))]
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    removed_set = set(ranked[:n_remove])
    return FilterManifest(
        strategy=strategy,
        fraction=fraction,
        kept=tuple(s for s in ids if s not in removed_set),
        removed=tuple(s for s in ids if s in removed_set),
        scores={s: float(scores[s]) for s in ids},
    )
