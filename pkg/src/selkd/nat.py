"""Minimal non-autoregressive model trained with a CTC objective.

The model predicts every decoder frame in parallel from the source
alone: frame t of T reads source position c = floor(t*N/T) and a
+-window neighborhood around it, and its feature vector concatenates the
center embedding, the window's embedding average, the frame's phase
(one-hot of t mod upsample) and its normalized position t/(T-1). That
feeds a two-layer tanh perceptron and an output projection over the
target vocabulary plus blank. The extra features matter: a bare window
average is permutation-invariant, so the center token would be
indistinguishable from its neighbors, and without the phase one-hot the
frames inside one neighborhood would collapse to a single distribution
and token order could not be learned at all. There is no length
predictor; the blank symbol absorbs length variation, and the positional
scoring variant simply runs the decoder at exactly the reference length.

All dynamic programming (loss, alignment) runs in log space over the
blank-interleaved extended label sequence, in double precision. The
deliberately tiny architecture keeps a full train/score/select cycle in
seconds while leaving every quantity exact enough for finite-difference
and enumeration checks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import BLANK_ID, Sentence, UNK_ID, Vocabulary
from .rng import Rng

NEG_INF = float("-inf")

PARAM_NAMES = ("emb", "w1", "b1", "w2", "b2", "w_out", "b_out")


class CtcInfeasibleError(ValueError):
    """Target cannot be emitted within the available frames."""


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 16
    hidden_dim: int = 32
    upsample: int = 2
    window: int = 1
    learning_rate: float = 0.15
    epochs: int = 5
    batch_size: int = 32
    clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.upsample < 2:
            raise ValueError(f"upsample must be >= 2, got {self.upsample}")
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ValueError("embed_dim and hidden_dim must be >= 1")
        if self.window < 0:
            raise ValueError("window must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise ValueError("learning_rate and clip_norm must be positive")


@dataclass(frozen=True)
class EmissionMatrix:
    """Per-frame log-probabilities over the target vocabulary (incl. blank)."""

    log_probs: np.ndarray  # (T, V) float64, rows log-sum-exp to 0
    source_len: int

    @property
    def frames(self) -> int:
        return self.log_probs.shape[0]

    def validate(self, tol: float = 1e-9) -> None:
        if not np.all(np.isfinite(self.log_probs)):
            raise ValueError("emission matrix contains non-finite entries")
        lse = _logsumexp_rows(self.log_probs)
        if np.max(np.abs(lse)) > tol:
            raise ValueError(f"emission rows not normalized (max |lse| = {np.max(np.abs(lse))})")


def collapse(frames) -> Sentence:
    """CTC collapse: merge adjacent duplicate frames, then drop blanks.

    The order matters: a blank between two equal labels keeps them as a
    genuine repeated token ([a, blank, a] -> [a, a]), while [a, a] merges
    to [a].
    """
    out = []
    prev = None
    for f in frames:
        if f != prev:
            if f != BLANK_ID:
                out.append(f)
            prev = f
    return tuple(out)


@dataclass(frozen=True)
class FramePath:
    frames: tuple[int, ...]

    @property
    def collapsed(self) -> Sentence:
        return collapse(self.frames)


@dataclass(frozen=True)
class GreedyDecode:
    path: FramePath
    output: Sentence
    is_empty: bool


class NatModel:
    """Parameter container; forward passes are pure functions of it."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray],
                 src_vocab_size: int, tgt_vocab_size: int,
                 src_vocab_hash: str, tgt_vocab_hash: str):
        self.config = config
        self.params = params
        self.src_vocab_size = src_vocab_size
        self.tgt_vocab_size = tgt_vocab_size
        self.src_vocab_hash = src_vocab_hash
        self.tgt_vocab_hash = tgt_vocab_hash

    @classmethod
    def initialize(cls, config: ModelConfig, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> "NatModel":
        rng = Rng(config.seed)
        e, h = config.embed_dim, config.hidden_dim
        # center embedding + window average + phase one-hot + position
        feat = 2 * e + config.upsample + 1
        vs, vt = len(src_vocab), len(tgt_vocab)
        shapes = {
            "emb": (vs, e),
            "w1": (feat, h),
            "b1": (h,),
            "w2": (h, h),
            "b2": (h,),
            "w_out": (h, vt),
            "b_out": (vt,),
        }
        params = {}
        for name, shape in shapes.items():
            if name.startswith("b"):
                params[name] = np.zeros(shape, dtype=np.float64)
                continue
            fan_in = shape[0]
            fan_out = shape[1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            flat = np.array([rng.uniform(-bound, bound) for _ in range(fan_in * fan_out)], dtype=np.float64)
            params[name] = flat.reshape(shape)
        return cls(config, params, vs, vt, src_vocab.content_hash(), tgt_vocab.content_hash())

    def copy(self) -> "NatModel":
        return NatModel(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            self.src_vocab_size,
            self.tgt_vocab_size,
            self.src_vocab_hash,
            self.tgt_vocab_hash,
        )

def _logsumexp_rows(m: np.ndarray) -> np.ndarray:
    mx = m.max(axis=1, keepdims=True)
    return (mx + np.log(np.exp(m - mx).sum(axis=1, keepdims=True))).ravel()


def _window_bounds(source_len: int, frames: int, window: int):
    centers = (np.arange(frames) * source_len) // frames
    lo = np.maximum(centers - window, 0)
    hi = np.minimum(centers + window, source_len - 1) + 1
    return centers, lo, hi


def _forward_cached(model: NatModel, source: Sentence, frames: int | None = None) -> dict:
    cfg = model.config
    n = len(source)
    if n == 0:
        raise ValueError("cannot run the decoder on an empty source")
    t_frames = cfg.upsample * n if frames is None else frames
    if t_frames < 1:
        raise ValueError(f"frame count must be >= 1, got {t_frames}")
    ids = np.array([tok if 0 <= tok < model.src_vocab_size else UNK_ID for tok in source], dtype=np.int64)
    p = model.params
    emb_rows = p["emb"][ids]
    prefix = np.vstack([np.zeros((1, cfg.embed_dim)), np.cumsum(emb_rows, axis=0)])
    centers, lo, hi = _window_bounds(n, t_frames, cfg.window)
    widths = (hi - lo).astype(np.float64)
    avg = (prefix[hi] - prefix[lo]) / widths[:, None]
    phase = np.zeros((t_frames, cfg.upsample))
    phase[np.arange(t_frames), np.arange(t_frames) % cfg.upsample] = 1.0
    pos = (np.arange(t_frames) / max(t_frames - 1, 1))[:, None]
    ctx = np.hstack([emb_rows[centers], avg, phase, pos])
    h1 = np.tanh(ctx @ p["w1"] + p["b1"])
    h2 = np.tanh(h1 @ p["w2"] + p["b2"])
    logits = h2 @ p["w_out"] + p["b_out"]
    logp = logits - _logsumexp_rows(logits)[:, None]
    return {
        "ids": ids, "centers": centers, "lo": lo, "hi": hi, "widths": widths,
        "ctx": ctx, "h1": h1, "h2": h2, "logp": logp,
        "source_len": n,
    }


def forward(model: NatModel, source: Sentence, frames: int | None = None) -> EmissionMatrix:
    """Emission lattice for a source sentence; T = upsample * |source|
    unless an explicit frame count is requested."""
    cache = _forward_cached(model, source, frames)
    return EmissionMatrix(log_probs=cache["logp"], source_len=cache["source_len"])


def _backprop(model: NatModel, cache: dict, dlogp: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. parameters, given dL/dlogp."""
    p = model.params
    probs = np.exp(cache["logp"])
    dlogits = dlogp - probs * dlogp.sum(axis=1, keepdims=True)
    grads: dict[str, np.ndarray] = {}
    grads["w_out"] = cache["h2"].T @ dlogits
    grads["b_out"] = dlogits.sum(axis=0)
    dh2 = dlogits @ p["w_out"].T
    dpre2 = dh2 * (1.0 - cache["h2"] ** 2)
    grads["w2"] = cache["h1"].T @ dpre2
    grads["b2"] = dpre2.sum(axis=0)
    dh1 = dpre2 @ p["w2"].T
    dpre1 = dh1 * (1.0 - cache["h1"] ** 2)
    grads["w1"] = cache["ctx"].T @ dpre1
    grads["b1"] = dpre1.sum(axis=0)
    dctx = dpre1 @ p["w1"].T
    e = model.config.embed_dim
    dcenter = dctx[:, :e]
    davg = dctx[:, e:2 * e]  # phase/position features are constants
    demb = np.zeros_like(p["emb"])
    ids, centers = cache["ids"], cache["centers"]
    lo, hi, widths = cache["lo"], cache["hi"], cache["widths"]
    np.add.at(demb, ids[centers], dcenter)
    for t in range(davg.shape[0]):
        np.add.at(demb, ids[lo[t]:hi[t]], davg[t] / widths[t])
    grads["emb"] = demb
    return grads


# ---------------------------------------------------------------------------
# CTC dynamic programming over the extended (blank-interleaved) sequence.
# ---------------------------------------------------------------------------

def extend_with_blanks(target: Sentence) -> np.ndarray:
    ext = np.full(2 * len(target) + 1, BLANK_ID, dtype=np.int64)
    ext[1::2] = target
    return ext


def min_frames(target: Sentence) -> int:
    """Fewest frames that can emit the target: one per token plus one
    blank between each adjacent repeat."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _check_feasible(n_frames: int, target: Sentence) -> None:
    if len(target) == 0:
        raise ValueError("CTC target must be nonempty")
    need = min_frames(target)
    if n_frames < need:
        raise CtcInfeasibleError(
            f"target needs at least {need} frames ({len(target)} tokens incl. repeats), lattice has {n_frames}"
        )


def _skip_mask(ext: np.ndarray) -> np.ndarray:
    """States reachable from s-2: label states whose previous label differs."""
    s_count = len(ext)
    mask = np.zeros(s_count, dtype=bool)
    for s in range(3, s_count, 2):
        mask[s] = ext[s] != ext[s - 2]
    return mask


def _unwrap(emissions) -> np.ndarray:
    return emissions.log_probs if isinstance(emissions, EmissionMatrix) else np.asarray(emissions, dtype=np.float64)


def ctc_loss(emissions, target: Sentence) -> float:
    """Negative log-probability that the lattice emits the target."""
    return ctc_loss_and_grad(emissions, target)[0]


def ctc_loss_and_grad(emissions, target: Sentence) -> tuple[float, np.ndarray]:
    """Forward/backward over the extended sequence.

    Returns the loss -log p(target | emissions) and its gradient with
    respect to each log-probability entry (same shape as the lattice).
    The gradient at (t, v) is minus the posterior probability that frame
    t emits v on a path collapsing to the target.
    """
    e = _unwrap(emissions)
    t_frames = e.shape[0]
    target = tuple(target)
    _check_feasible(t_frames, target)
    ext = extend_with_blanks(target)
    s_count = len(ext)
    skip = _skip_mask(ext)
    em_ext = e[:, ext]  # (T, S)

    alpha = np.full((t_frames, s_count), NEG_INF)
    alpha[0, 0] = em_ext[0, 0]
    if s_count > 1:
        alpha[0, 1] = em_ext[0, 1]
    for t in range(1, t_frames):
        prev = alpha[t - 1]
        stay = prev
        step = np.concatenate(([NEG_INF], prev[:-1]))
        jump = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))
        jump = np.where(skip, jump, NEG_INF)
        alpha[t] = np.logaddexp(np.logaddexp(stay, step), jump) + em_ext[t]

    log_p = np.logaddexp(alpha[t_frames - 1, s_count - 1],
                         alpha[t_frames - 1, s_count - 2] if s_count > 1 else NEG_INF)
    if log_p == NEG_INF:
        raise CtcInfeasibleError("no feasible path despite frame-count check")
    loss = -float(log_p)

    # beta excludes the emission at t, so alpha + beta is the log-mass of
    # all full paths through state s at time t.
    beta = np.full((t_frames, s_count), NEG_INF)
    beta[t_frames - 1, s_count - 1] = 0.0
    if s_count > 1:
        beta[t_frames - 1, s_count - 2] = 0.0
    back_skip = np.concatenate((skip[2:], [False, False]))  # s -> s+2 allowed
    for t in range(t_frames - 2, -1, -1):
        nxt = beta[t + 1] + em_ext[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [NEG_INF]))
        jump = np.concatenate((nxt[2:], [NEG_INF, NEG_INF]))
        jump = np.where(back_skip, jump, NEG_INF)
        beta[t] = np.logaddexp(np.logaddexp(stay, step), jump)

    with np.errstate(invalid="ignore"):
        gamma = np.exp(alpha + beta + loss)
    gamma = np.nan_to_num(gamma, nan=0.0, posinf=0.0, neginf=0.0)
    grad = np.zeros_like(e)
    for s in range(s_count):
        grad[:, ext[s]] -= gamma[:, s]
    return loss, grad


def viterbi_align(emissions, target: Sentence) -> FramePath:
    """Highest-log-probability frame path whose collapse equals the target.

    Max-plus recursion over the extended sequence with backtrace. Ties
    prefer the smaller extended-state index at every choice, which places
    blanks at the earliest possible frames; the rule is deterministic.
    """
    e = _unwrap(emissions)
    t_frames = e.shape[0]
    target = tuple(target)
    _check_feasible(t_frames, target)
    ext = extend_with_blanks(target)
    s_count = len(ext)
    skip = _skip_mask(ext)
    em_ext = e[:, ext]

    score = np.full((t_frames, s_count), NEG_INF)
    back = np.zeros((t_frames, s_count), dtype=np.int64)
    score[0, 0] = em_ext[0, 0]
    if s_count > 1:
        score[0, 1] = em_ext[0, 1]
    back[0, 0] = 0
    if s_count > 1:
        back[0, 1] = 1
    for t in range(1, t_frames):
        prev = score[t - 1]
        jump = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))
        jump = np.where(skip, jump, NEG_INF)
        step = np.concatenate(([NEG_INF], prev[:-1]))
        stay = prev
        # Candidate rows ordered by predecessor index; argmax takes the
        # first maximum, i.e. the smallest predecessor state on ties.
        cands = np.stack([jump, step, stay])
        choice = np.argmax(cands, axis=0)
        best = cands[choice, np.arange(s_count)]
        score[t] = best + em_ext[t]
        back[t] = np.arange(s_count) - 2 + choice

    if s_count > 1 and score[t_frames - 1, s_count - 2] >= score[t_frames - 1, s_count - 1]:
        state = s_count - 2
    else:
        state = s_count - 1
    if score[t_frames - 1, state] == NEG_INF:
        raise CtcInfeasibleError("no feasible alignment despite frame-count check")

    states = np.empty(t_frames, dtype=np.int64)
    states[t_frames - 1] = state
    for t in range(t_frames - 1, 0, -1):
        state = back[t, state]
        states[t - 1] = state
    return FramePath(frames=tuple(int(ext[s]) for s in states))


def frame_path_logprob(emissions, path: FramePath) -> float:
    e = _unwrap(emissions)
    return float(sum(e[t, f] for t, f in enumerate(path.frames)))


def decode_greedy(emissions) -> GreedyDecode:
    """Per-frame argmax and its collapse; argmax ties go to the lowest id."""
    e = _unwrap(emissions)
    frame_labels = tuple(int(v) for v in np.argmax(e, axis=1))
    out = collapse(frame_labels)
    return GreedyDecode(path=FramePath(frames=frame_labels), output=out, is_empty=len(out) == 0)


def decode_positional(model: NatModel, source: Sentence, length: int) -> Sentence:
    """Positional decode for the plain scoring variant: run the decoder at
    exactly ``length`` frames and take the best non-blank token per frame."""
    em = forward(model, source, frames=length)
    logp = em.log_probs.copy()
    logp[:, BLANK_ID] = NEG_INF
    return tuple(int(v) for v in np.argmax(logp, axis=1))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainResult:
    model: NatModel
    epoch_losses: tuple[float, ...]
    skipped: int
    updates: int
    snapshot: NatModel | None = None


def sentence_loss_and_grads(model: NatModel, source: Sentence, target: Sentence):
    """CTC loss of one pair plus parameter gradients."""
    cache = _forward_cached(model, source)
    loss, dlogp = ctc_loss_and_grad(cache["logp"], target)
    return loss, _backprop(model, cache, dlogp)


def batch_step(model: NatModel, batch: list[tuple[Sentence, Sentence]],
               learning_rate: float, clip_norm: float) -> tuple[float | None, int]:
    """One SGD update on the mean loss over the feasible pairs of a batch.

    Returns (mean loss, number of skipped infeasible pairs). When every
    pair is infeasible no update happens and the loss is None.
    """
    total = {name: np.zeros_like(p) for name, p in model.params.items()}
    loss_sum = 0.0
    counted = 0
    skipped = 0
    for source, target in batch:
        try:
            loss, grads = sentence_loss_and_grads(model, source, target)
        except CtcInfeasibleError:
            skipped += 1
            continue
        loss_sum += loss
        counted += 1
        for name in total:
            total[name] += grads[name]
    if counted == 0:
        return None, skipped
    norm_sq = 0.0
    for name in total:
        total[name] /= counted
        norm_sq += float(np.sum(total[name] ** 2))
    norm = np.sqrt(norm_sq)
    scale = clip_norm / norm if norm > clip_norm else 1.0
    for name, p in model.params.items():
        p -= learning_rate * scale * total[name]
        if not np.all(np.isfinite(p)):
            raise TrainingError(f"parameter {name} became non-finite during an update")
    return loss_sum / counted, skipped


def train(pairs: list[tuple[Sentence, Sentence]], config: ModelConfig,
          src_vocab: Vocabulary, tgt_vocab: Vocabulary,
          snapshot_at: int | None = None,
          progress=None) -> TrainResult:
    """Mini-batch SGD on the mean CTC loss.

    Batch order per epoch comes from the seeded portable shuffle, so a
    seed fixes the whole trajectory. Pairs whose target cannot fit the
    frame count are skipped and counted. ``snapshot_at`` captures a copy
    of the parameters after that many optimizer updates (for warm-starting
    students).
    """
    if not pairs:
        raise TrainingError("empty training set")
    upsample = config.upsample
    if all(min_frames(t) > upsample * len(s) for s, t in pairs):
        raise TrainingError("every training pair is infeasible for the configured upsample factor")

    model = NatModel.initialize(config, src_vocab, tgt_vocab)
    rng = Rng(config.seed ^ 0x5E1ECD)
    order = list(range(len(pairs)))
    epoch_losses = []
    skipped_total = 0
    updates = 0
    snapshot = None
    for epoch in range(config.epochs):
        rng.shuffle(order)
        loss_sum = 0.0
        counted = 0
        for start in range(0, len(order), config.batch_size):
            batch = [pairs[i] for i in order[start:start + config.batch_size]]
            loss, skipped = batch_step(model, batch, config.learning_rate, config.clip_norm)
            skipped_total += skipped
            if loss is None:
                continue
            loss_sum += loss * (len(batch) - skipped)
            counted += len(batch) - skipped
            updates += 1
            if snapshot_at is not None and updates == snapshot_at:
                snapshot = model.copy()
        epoch_losses.append(loss_sum / counted if counted else float("nan"))
        if progress is not None:
            progress(epoch, epoch_losses[-1])
    if snapshot_at is not None and snapshot is None:
        snapshot = model.copy()  # fewer total updates than requested
    return TrainResult(model=model, epoch_losses=tuple(epoch_losses),
                       skipped=skipped_total, updates=updates, snapshot=snapshot)


# ---------------------------------------------------------------------------
# Checkpoints: versioned text format, exact float round-trip via hex.
# ---------------------------------------------------------------------------

_CKPT_MAGIC = "selkd-checkpoint v1"


def serialize_model(model: NatModel) -> str:
    lines = [_CKPT_MAGIC]
    cfg = asdict(model.config)
    lines.append("config\t" + json.dumps(cfg, sort_keys=True))
    lines.append(f"src_vocab\t{model.src_vocab_hash}\t{model.src_vocab_size}")
    lines.append(f"tgt_vocab\t{model.tgt_vocab_hash}\t{model.tgt_vocab_size}")
    for name in PARAM_NAMES:
        arr = model.params[name]
        shape = ",".join(str(d) for d in arr.shape)
        values = " ".join(float(v).hex() for v in arr.ravel())
        lines.append(f"param\t{name}\t{shape}\t{values}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def model_digest(model: NatModel) -> str:
    return hashlib.sha256(serialize_model(model).encode("utf-8")).hexdigest()


def save_checkpoint(model: NatModel, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_model(model))


def load_checkpoint(path: str, src_vocab: Vocabulary | None = None,
                    tgt_vocab: Vocabulary | None = None) -> NatModel:
    """Load a checkpoint; vocabulary hashes must match when vocabularies
    are supplied."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a {_CKPT_MAGIC!r} file")
    if lines[-1] != "end":
        raise CheckpointError(f"{path}: truncated checkpoint")
    config = None
    hashes: dict[str, tuple[str, int]] = {}
    params: dict[str, np.ndarray] = {}
    for line in lines[1:-1]:
        kind, _, rest = line.partition("\t")
        if kind == "config":
            config = ModelConfig(**json.loads(rest))
        elif kind in ("src_vocab", "tgt_vocab"):
            digest, size = rest.split("\t")
            hashes[kind] = (digest, int(size))
        elif kind == "param":
            name, shape_s, values = rest.split("\t")
            shape = tuple(int(d) for d in shape_s.split(","))
            arr = np.array([float.fromhex(v) for v in values.split(" ")], dtype=np.float64)
            params[name] = arr.reshape(shape)
        else:
            raise CheckpointError(f"{path}: unknown record {kind!r}")
    if config is None or set(params) != set(PARAM_NAMES) or set(hashes) != {"src_vocab", "tgt_vocab"}:
        raise CheckpointError(f"{path}: incomplete checkpoint")
    if src_vocab is not None and src_vocab.content_hash() != hashes["src_vocab"][0]:
        raise CheckpointError(f"{path}: source vocabulary hash mismatch")
    if tgt_vocab is not None and tgt_vocab.content_hash() != hashes["tgt_vocab"][0]:
        raise CheckpointError(f"{path}: target vocabulary hash mismatch")
    return NatModel(config, params,
                    hashes["src_vocab"][1], hashes["tgt_vocab"][1],
                    hashes["src_vocab"][0], hashes["tgt_vocab"][0])
