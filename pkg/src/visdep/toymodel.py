"""Small conditional autoregressive generator with hand-written gradients.

A single gated recurrent (GRU) cell over learned token embeddings.  The
conditioning feature vector is projected into embedding space and pushed
through the cell once before BOS, which installs it in the initial
hidden state.  Forward, backward and both optimizers are written out by
hand in numpy so the weighted-loss gradient path stays fully auditable;
per-token loss weights enter the gradients as constants.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from . import synth
from .dependence import TokenClass, profile_trace
from .diffusion import DEFAULT_NOISE_STEP, NoiseSchedule, corrupt, make_schedule
from .reweight import LossMode, ReweightConfig, training_weights
from .seeding import derive_seed, rng_for
from .trace import TokenTrace

D_EMB = 32
D_HID = 64
# Conditions are rescaled to this L2 norm before projection; it matches the
# typical norm of a clean scene feature, so corrupted conditions land on the
# scale the cell was trained on.
CONDITION_NORM = 2.0

CKPT_FORMAT = "visdep-ckpt"
CKPT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class ModelParams:
    """All parameter blocks; shapes are validated on construction."""

    emb: np.ndarray      # (vocab, d_emb) token embeddings
    cond: np.ndarray     # (v_obj, d_emb) condition projection
    w_xz: np.ndarray     # (d_emb, d_hid) update gate, input half
    w_hz: np.ndarray     # (d_hid, d_hid)
    b_z: np.ndarray      # (d_hid,)
    w_xr: np.ndarray     # (d_emb, d_hid) reset gate
    w_hr: np.ndarray     # (d_hid, d_hid)
    b_r: np.ndarray      # (d_hid,)
    w_xc: np.ndarray     # (d_emb, d_hid) candidate state
    w_hc: np.ndarray     # (d_hid, d_hid)
    b_c: np.ndarray      # (d_hid,)
    w_out: np.ndarray    # (d_hid, vocab) output projection
    b_out: np.ndarray    # (vocab,)

    def __post_init__(self) -> None:
        vocab, d_emb = self.emb.shape
        d_hid = self.w_xz.shape[1]
        expected = _block_shapes(vocab, self.cond.shape[0], d_emb, d_hid)
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"parameter {name}: expected shape {shape}, got {arr.shape}")

    @property
    def vocab_size(self) -> int:
        return self.emb.shape[0]

    @property
    def v_obj(self) -> int:
        return self.cond.shape[0]

    @property
    def d_emb(self) -> int:
        return self.emb.shape[1]

    @property
    def d_hid(self) -> int:
        return self.w_xz.shape[1]

    def blocks(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.blocks().items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams(**{k: np.zeros_like(v) for k, v in self.blocks().items()})


def _block_shapes(vocab: int, v_obj: int, d_emb: int, d_hid: int) -> dict[str, tuple[int, ...]]:
    return {
        "emb": (vocab, d_emb),
        "cond": (v_obj, d_emb),
        "w_xz": (d_emb, d_hid),
        "w_hz": (d_hid, d_hid),
        "b_z": (d_hid,),
        "w_xr": (d_emb, d_hid),
        "w_hr": (d_hid, d_hid),
        "b_r": (d_hid,),
        "w_xc": (d_emb, d_hid),
        "w_hc": (d_hid, d_hid),
        "b_c": (d_hid,),
        "w_out": (d_hid, vocab),
        "b_out": (vocab,),
    }


# Update-gate bias starts negative so the cell carries state by default
# (the conditioning is injected once, before BOS, and has to survive the
# whole sequence); the condition projection starts wider than the token
# embeddings for the same reason.
INIT_UPDATE_BIAS = -2.5
INIT_COND_STD = 0.5


def init_params(
    vocab_size: int,
    v_obj: int,
    seed: int,
    d_emb: int = D_EMB,
    d_hid: int = D_HID,
) -> ModelParams:
    rng = np.random.default_rng(seed)
    sx = 1.0 / math.sqrt(d_emb)
    sh = 1.0 / math.sqrt(d_hid)
    return ModelParams(
        emb=rng.normal(0.0, 0.1, (vocab_size, d_emb)),
        cond=rng.normal(0.0, INIT_COND_STD, (v_obj, d_emb)),
        w_xz=rng.normal(0.0, sx, (d_emb, d_hid)),
        w_hz=rng.normal(0.0, sh, (d_hid, d_hid)),
        b_z=np.full(d_hid, INIT_UPDATE_BIAS),
        w_xr=rng.normal(0.0, sx, (d_emb, d_hid)),
        w_hr=rng.normal(0.0, sh, (d_hid, d_hid)),
        b_r=np.zeros(d_hid),
        w_xc=rng.normal(0.0, sx, (d_emb, d_hid)),
        w_hc=rng.normal(0.0, sh, (d_hid, d_hid)),
        b_c=np.zeros(d_hid),
        w_out=rng.normal(0.0, sh, (d_hid, vocab_size)),
        b_out=np.zeros(vocab_size),
    )


def _normalized_conditions(conditions: np.ndarray) -> np.ndarray:
    """Rescale each condition row to a fixed L2 norm.

    Scene features all have similar norms, so this barely changes clean
    inputs, but it pulls heavily corrupted conditions back into the range
    the recurrent cell saw during training instead of letting the noise
    blow up the input scale. An all-zero row is left untouched.
    """
    norms = np.linalg.norm(conditions, axis=1, keepdims=True)
    return conditions * (CONDITION_NORM / np.maximum(norms, 1e-12))


def _cond_embed(p: ModelParams, conditions: np.ndarray) -> np.ndarray:
    """Project the (normalized) condition into embedding space.

    The tanh squash bounds the projected condition per coordinate, so the
    first recurrent step always sees an input on the token-embedding scale.
    """
    return np.tanh(_normalized_conditions(conditions) @ p.cond)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _cell_forward(p: ModelParams, h: np.ndarray, x: np.ndarray):
    """One GRU step for a (B, d) batch; returns new state and the cache."""
    z = _sigmoid(x @ p.w_xz + h @ p.w_hz + p.b_z)
    r = _sigmoid(x @ p.w_xr + h @ p.w_hr + p.b_r)
    hr = r * h
    c = np.tanh(x @ p.w_xc + hr @ p.w_hc + p.b_c)
    h_new = (1.0 - z) * h + z * c
    return h_new, (x, h, z, r, hr, c)


def _cell_backward(p: ModelParams, g: ModelParams, dh_new: np.ndarray, cache):
    """Backprop one GRU step; accumulates into ``g``, returns (dx, dh_prev)."""
    x, h_prev, z, r, hr, c = cache
    dz = dh_new * (c - h_prev)
    dc = dh_new * z
    dh_prev = dh_new * (1.0 - z)

    da_c = dc * (1.0 - c * c)
    g.w_xc += x.T @ da_c
    g.w_hc += hr.T @ da_c
    g.b_c += da_c.sum(axis=0)
    dx = da_c @ p.w_xc.T
    dhr = da_c @ p.w_hc.T
    dh_prev += dhr * r
    dr = dhr * h_prev

    da_r = dr * r * (1.0 - r)
    g.w_xr += x.T @ da_r
    g.w_hr += h_prev.T @ da_r
    g.b_r += da_r.sum(axis=0)
    dx += da_r @ p.w_xr.T
    dh_prev += da_r @ p.w_hr.T

    da_z = dz * z * (1.0 - z)
    g.w_xz += x.T @ da_z
    g.w_hz += h_prev.T @ da_z
    g.b_z += da_z.sum(axis=0)
    dx += da_z @ p.w_xz.T
    dh_prev += da_z @ p.w_hz.T
    return dx, dh_prev


def _pad_targets(targets: list) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack variable-length targets into (B, T) ids, lengths and a mask."""
    lengths = np.array([len(t) for t in targets], dtype=np.int64)
    if np.any(lengths < 1):
        raise ValueError("every target sequence must contain at least one token")
    t_max = int(lengths.max())
    ids = np.zeros((len(targets), t_max), dtype=np.int64)
    for i, t in enumerate(targets):
        ids[i, : len(t)] = t
    mask = np.arange(t_max)[None, :] < lengths[:, None]
    return ids, lengths, mask


class _ForwardCache:
    """Everything the backward pass needs from one teacher-forced forward."""

    __slots__ = ("inputs", "targets", "lengths", "mask", "caches", "hs", "probs", "target_p", "target_logp")

    def __init__(self, inputs, targets, lengths, mask, caches, hs, probs, target_p, target_logp):
        self.inputs = inputs
        self.targets = targets
        self.lengths = lengths
        self.mask = mask
        self.caches = caches
        self.hs = hs
        self.probs = probs
        self.target_p = target_p
        self.target_logp = target_logp


def _forward_batch(
    p: ModelParams,
    conditions: np.ndarray,
    targets: list,
    keep_cache: bool = True,
) -> _ForwardCache:
    """Teacher-forced pass over a batch; targets exclude BOS."""
    b = conditions.shape[0]
    ids, lengths, mask = _pad_targets(targets)
    t_max = ids.shape[1]
    inputs = np.concatenate([np.full((b, 1), synth.BOS_ID, dtype=np.int64), ids[:, :-1]], axis=1)

    cond_emb = _cond_embed(p, conditions)
    h = np.zeros((b, p.d_hid))
    h, cache0 = _cell_forward(p, h, cond_emb)
    caches = [cache0] if keep_cache else None
    hs = [] if keep_cache else None
    probs = np.empty((b, t_max, p.vocab_size)) if keep_cache else None
    target_p = np.empty((b, t_max))
    target_logp = np.empty((b, t_max))
    rows = np.arange(b)
    for t in range(t_max):
        x = p.emb[inputs[:, t]]
        h, cache = _cell_forward(p, h, x)
        logits = h @ p.w_out + p.b_out
        logits = logits - logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        denom = expl.sum(axis=1)
        pt = expl / denom[:, None]
        target_p[:, t] = pt[rows, ids[:, t]]
        target_logp[:, t] = logits[rows, ids[:, t]] - np.log(denom)
        if keep_cache:
            caches.append(cache)
            hs.append(h)
            probs[:, t, :] = pt
    return _ForwardCache(inputs, ids, lengths, mask, caches, hs, probs, target_p, target_logp)


def _loss_and_grads(
    p: ModelParams,
    conditions: np.ndarray,
    fwd: _ForwardCache,
    weights: np.ndarray,
) -> tuple[float, ModelParams]:
    """Weighted loss (mean over sequences) and gradients for the batch.

    ``weights`` is (B, T_max) with zeros beyond each sequence length; it is
    treated as a constant throughout.
    """
    b, t_max = fwd.targets.shape
    coef = np.where(fwd.mask, weights / (fwd.lengths[:, None] * b), 0.0)
    loss = float(-(coef * np.where(fwd.mask, fwd.target_logp, 0.0)).sum())

    g = p.zeros_like()
    rows = np.arange(b)
    dh_next = np.zeros((b, p.d_hid))
    for t in range(t_max - 1, -1, -1):
        dlogits = fwd.probs[:, t, :] * coef[:, t][:, None]
        dlogits[rows, fwd.targets[:, t]] -= coef[:, t]
        h_t = fwd.hs[t]
        g.w_out += h_t.T @ dlogits
        g.b_out += dlogits.sum(axis=0)
        dh = dh_next + dlogits @ p.w_out.T
        dx, dh_next = _cell_backward(p, g, dh, fwd.caches[t + 1])
        np.add.at(g.emb, fwd.inputs[:, t], dx)
    dx_cond, _ = _cell_backward(p, g, dh_next, fwd.caches[0])
    cond_emb = fwd.caches[0][0]
    g.cond += _normalized_conditions(conditions).T @ (dx_cond * (1.0 - cond_emb * cond_emb))
    return loss, g


def forward(p: ModelParams, condition, prefix) -> np.ndarray:
    """Next-token distribution after consuming ``prefix`` (starting at BOS)."""
    condition = np.asarray(condition, dtype=np.float64)
    if condition.shape != (p.v_obj,):
        raise ValueError(f"condition must have shape ({p.v_obj},), got {condition.shape}")
    prefix = list(prefix)
    if not prefix or prefix[0] != synth.BOS_ID:
        raise ValueError("prefix must begin with BOS")
    if any(not 0 <= t < p.vocab_size for t in prefix):
        raise ValueError("prefix contains out-of-vocabulary token ids")
    h = np.zeros((1, p.d_hid))
    h, _ = _cell_forward(p, h, _cond_embed(p, condition[None, :]))
    for t in prefix:
        h, _ = _cell_forward(p, h, p.emb[[t]])
    logits = (h @ p.w_out + p.b_out)[0]
    logits = logits - logits.max()
    e = np.exp(logits)
    return e / e.sum()


def sequence_loss(p: ModelParams, condition, target, weights) -> tuple[float, ModelParams]:
    """Weighted teacher-forced loss of one sequence plus its gradients.

    ``target`` excludes BOS; ``weights`` is parallel to it and is treated
    as a constant with respect to differentiation.
    """
    condition = np.asarray(condition, dtype=np.float64)
    target = [int(t) for t in target]
    w = np.asarray(weights, dtype=np.float64)
    if len(target) == 0:
        raise ValueError("target must contain at least one token")
    if w.shape != (len(target),):
        raise ValueError(f"weights must have shape ({len(target)},), got {w.shape}")
    if any(not 0 <= t < p.vocab_size for t in target):
        raise ValueError("target contains out-of-vocabulary token ids")
    fwd = _forward_batch(p, condition[None, :], [target])
    return _loss_and_grads(p, condition[None, :], fwd, w[None, :])


def teacher_forced_probs(p: ModelParams, conditions: np.ndarray, targets: list) -> list[np.ndarray]:
    """Per-position probability of each target token, batched."""
    fwd = _forward_batch(p, np.asarray(conditions, dtype=np.float64), targets, keep_cache=False)
    return [fwd.target_p[i, : len(t)].copy() for i, t in enumerate(targets)]


def generate_batch(p: ModelParams, conditions: np.ndarray, max_len: int = 40) -> list[tuple[int, ...]]:
    """Greedy decode for a batch of conditions, BOS through EOS or max_len."""
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    conditions = np.asarray(conditions, dtype=np.float64)
    b = conditions.shape[0]
    h = np.zeros((b, p.d_hid))
    h, _ = _cell_forward(p, h, _cond_embed(p, conditions))
    tokens = np.full((b, 1), synth.BOS_ID, dtype=np.int64)
    seqs = [[synth.BOS_ID] for _ in range(b)]
    done = np.zeros(b, dtype=bool)
    current = tokens[:, 0]
    while not done.all() and max(len(s) for s in seqs) < max_len:
        h_new, _ = _cell_forward(p, h, p.emb[current])
        h = np.where(done[:, None], h, h_new)
        logits = h @ p.w_out + p.b_out
        nxt = logits.argmax(axis=1)
        for i in range(b):
            if not done[i]:
                seqs[i].append(int(nxt[i]))
                if nxt[i] == synth.EOS_ID:
                    done[i] = True
        current = nxt
    return [tuple(s) for s in seqs]


def generate(p: ModelParams, condition, max_len: int = 40) -> tuple[int, ...]:
    """Greedy decode for a single condition vector."""
    return generate_batch(p, np.asarray(condition, dtype=np.float64)[None, :], max_len)[0]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2
    batch_size: int = 128
    learning_rate: float = 3e-3
    optimizer: str = "adam"
    seed: int = 42
    reweight: ReweightConfig = field(default_factory=ReweightConfig)
    noise_step: int = DEFAULT_NOISE_STEP
    d_emb: int = D_EMB
    d_hid: int = D_HID

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.noise_step < 0:
            raise ValueError(f"noise_step must be >= 0, got {self.noise_step}")


@dataclass(frozen=True)
class TrainLogRecord:
    step: int
    loss: float
    mean_w_pos: float
    mean_w_inv: float
    mean_w_neg: float


class _Adam:
    def __init__(self, params: ModelParams, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.blocks().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.blocks().items()}

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, g in grads.blocks().items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            getattr(params, name)[...] -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class _SGD:
    def __init__(self, params: ModelParams, lr: float):
        self.lr = lr

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        for name, g in grads.blocks().items():
            getattr(params, name)[...] -= self.lr * g


def batch_weights(
    p: ModelParams,
    scenes: list,
    fwd: _ForwardCache,
    noisy_p: list[np.ndarray],
    cfg: TrainConfig,
    progress: float,
) -> tuple[np.ndarray, list]:
    """Per-token weights for a batch, built through the trace/profile path.

    Returns the padded (B, T_max) weight matrix plus the per-sequence
    dependence profiles used to build it.
    """
    b, t_max = fwd.targets.shape
    weights = np.zeros((b, t_max))
    profiles = []
    v_obj = p.v_obj
    for i, scene in enumerate(scenes):
        target = scene.caption[1:]
        length = len(target)
        trace = TokenTrace(
            sample_id=scene.scene_id,
            tokens=target,
            surfaces=synth.surfaces_for(target, v_obj),
            p_clean=tuple(float(x) for x in fwd.target_p[i, :length]),
            p_noisy=tuple(float(x) for x in noisy_p[i]),
            eos_index=length - 1,
        )
        prof = profile_trace(trace)
        wv = training_weights(prof, cfg.reweight, progress, eos_index=length - 1)
        weights[i, :length] = wv.weights
        profiles.append(prof)
    return weights, profiles


def _class_means(weights: np.ndarray, profiles: list) -> dict[TokenClass, float]:
    sums = {cls: 0.0 for cls in TokenClass}
    counts = {cls: 0 for cls in TokenClass}
    for i, prof in enumerate(profiles):
        for t, cls in enumerate(prof.classes):
            sums[cls] += weights[i, t]
            counts[cls] += 1
    return {
        cls: (sums[cls] / counts[cls]) if counts[cls] else float("nan")
        for cls in TokenClass
    }


def train(scenes: list, cfg: TrainConfig) -> tuple[ModelParams, list[TrainLogRecord]]:
    """Train on synthetic scenes; deterministic in ``(scenes, cfg)``.

    Every batch runs a clean and a noised teacher-forced pass to build
    dependence profiles (logged throughout), but the resulting weights
    only deviate from all-ones once ``start_fraction`` of the total steps
    has elapsed and the mode is not vanilla.
    """
    if not scenes:
        raise ValueError("cannot train on an empty corpus")
    v_obj = len(scenes[0].feature)
    vocab = synth.vocab_size(v_obj)
    schedule = make_schedule()
    if cfg.noise_step > schedule.num_steps:
        raise ValueError(f"noise_step {cfg.noise_step} exceeds schedule length {schedule.num_steps}")
    params = init_params(vocab, v_obj, seed=derive_seed(cfg.seed, "init"), d_emb=cfg.d_emb, d_hid=cfg.d_hid)
    opt = _Adam(params, cfg.learning_rate) if cfg.optimizer == "adam" else _SGD(params, cfg.learning_rate)

    n = len(scenes)
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    log: list[TrainLogRecord] = []
    global_step = 0
    for epoch in range(cfg.epochs):
        order = rng_for(cfg.seed, "shuffle", epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = [scenes[int(i)] for i in order[start : start + cfg.batch_size]]
            features = np.array([s.feature for s in batch])
            targets = [list(s.caption[1:]) for s in batch]

            fwd = _forward_batch(params, features, targets)
            noisy = np.stack(
                [
                    corrupt(
                        np.array(s.feature),
                        cfg.noise_step,
                        schedule,
                        derive_seed(cfg.seed, "noise", global_step, s.scene_id),
                    )
                    for s in batch
                ]
            )
            noisy_p = teacher_forced_probs(params, noisy, targets)

            progress = global_step / total_steps
            weights, profiles = batch_weights(params, batch, fwd, noisy_p, cfg, progress)
            loss, grads = _loss_and_grads(params, features, fwd, weights)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss} at step {global_step}")
            opt.step(params, grads)

            means = _class_means(weights, profiles)
            log.append(
                TrainLogRecord(
                    step=global_step,
                    loss=loss,
                    mean_w_pos=means[TokenClass.IMAGE_POSITIVE],
                    mean_w_inv=means[TokenClass.IMAGE_INVARIANT],
                    mean_w_neg=means[TokenClass.IMAGE_NEGATIVE],
                )
            )
            global_step += 1
    return params, log


def write_train_log(log: list[TrainLogRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,loss,mean_w_pos,mean_w_inv,mean_w_neg\n")
        for rec in log:
            fh.write(
                f"{rec.step},{rec.loss!r},{rec.mean_w_pos!r},{rec.mean_w_inv!r},{rec.mean_w_neg!r}\n"
            )


def save_params(p: ModelParams, path: str | os.PathLike) -> None:
    """Versioned JSON checkpoint with a shape header per block."""
    payload = {
        "format": CKPT_FORMAT,
        "version": CKPT_VERSION,
        "vocab_size": p.vocab_size,
        "v_obj": p.v_obj,
        "d_emb": p.d_emb,
        "d_hid": p.d_hid,
        "blocks": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in p.blocks().items()
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_params(path: str | os.PathLike) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CKPT_FORMAT:
        raise ValueError(f"{os.fspath(path)}: not a {CKPT_FORMAT} checkpoint")
    if payload.get("version") != CKPT_VERSION:
        raise ValueError(f"{os.fspath(path)}: unsupported checkpoint version {payload.get('version')!r}")
    expected = _block_shapes(payload["vocab_size"], payload["v_obj"], payload["d_emb"], payload["d_hid"])
    blocks = {}
    for name, shape in expected.items():
        entry = payload["blocks"].get(name)
        if entry is None:
            raise ValueError(f"{os.fspath(path)}: checkpoint missing block {name!r}")
        if tuple(entry["shape"]) != shape:
            raise ValueError(
                f"{os.fspath(path)}: block {name!r} has shape {entry['shape']}, expected {list(shape)}"
            )
        blocks[name] = np.array(entry["data"], dtype=np.float64).reshape(shape)
    return ModelParams(**blocks)
