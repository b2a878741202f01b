"""EM-trained word alignment with a diagonal position preference.

A lexical translation table over co-occurring token pairs, reweighted by
a fixed diagonal prior: the prior mass for linking target position j to
source position i is proportional to exp(-tension * |i/N - j/L|) with a
reserved share for the NULL link. Only the lexical table is re-estimated,
so every EM iteration provably cannot decrease the corpus
log-likelihood. Positions are 1-based in the distance ratios; NULL links
are encoded as source position 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .corpus import Sentence

NULL_LINK = 0  # per-target link value meaning "aligned to nothing"
NULL_TOKEN = -1  # key of the NULL source word in the lexical table

DEFAULT_TENSION = 4.0
DEFAULT_NULL_PROB = 0.08


class AlignmentError(ValueError):
    pass


AlignmentLinks = tuple[int, ...]  # one entry per target position: 0 or 1-based source position


@dataclass
class AlignmentModel:
    trans: dict[int, dict[int, float]]  # source token id (or NULL_TOKEN) -> {target id: prob}
    tension: float = DEFAULT_TENSION
    null_prob: float = DEFAULT_NULL_PROB
    log_likelihood: tuple[float, ...] = field(default_factory=tuple)
    unseen_fallbacks: int = 0


@lru_cache(maxsize=4096)
def _prior_row(n_src: int, j: int, tgt_len: int, tension: float, null_prob: float) -> np.ndarray:
    """Prior over [NULL, 1..n_src] for target position j (1-based)."""
    i = np.arange(1, n_src + 1, dtype=np.float64)
    delta = np.exp(-tension * np.abs(i / n_src - j / tgt_len))
    row = np.empty(n_src + 1)
    row[0] = null_prob
    row[1:] = (1.0 - null_prob) * delta / delta.sum()
    return row


def _pair_trans_matrix(model: AlignmentModel, src: Sentence, tgt: Sentence) -> np.ndarray:
    """t(y_j | x_i) with row 0 for NULL; shape (|src|+1, |tgt|)."""
    mat = np.zeros((len(src) + 1, len(tgt)))
    null_row = model.trans.get(NULL_TOKEN, {})
    for j, y in enumerate(tgt):
        mat[0, j] = null_row.get(y, 0.0)
    for i, x in enumerate(src, start=1):
        row = model.trans.get(x)
        if row is None:
            continue
        for j, y in enumerate(tgt):
            mat[i, j] = row.get(y, 0.0)
    return mat


def em_train(bitext: list[tuple[Sentence, Sentence]], iterations: int,
             tension: float = DEFAULT_TENSION, null_prob: float = DEFAULT_NULL_PROB) -> AlignmentModel:
    """Estimate the lexical table by expectation-maximization.

    The logged log-likelihood at iteration r is the corpus likelihood
    under the parameters entering that iteration; the sequence is
    nondecreasing up to renormalization noise.
    """
    if not bitext:
        raise AlignmentError("empty bitext")
    if iterations < 1:
        raise AlignmentError("iterations must be >= 1")
    if tension < 0:
        raise AlignmentError(f"tension must be >= 0, got {tension}")
    if not 0.0 <= null_prob < 1.0:
        raise AlignmentError(f"null_prob must be in [0, 1), got {null_prob}")

    # Uniform initialization over each source type's co-occurring targets;
    # NULL co-occurs with every target type.
    support: dict[int, set[int]] = {NULL_TOKEN: set()}
    for src, tgt in bitext:
        support[NULL_TOKEN].update(tgt)
        for x in src:
            support.setdefault(x, set()).update(tgt)
    trans = {x: {y: 1.0 / len(ys) for y in sorted(ys)} for x, ys in support.items()}
    model = AlignmentModel(trans=trans, tension=tension, null_prob=null_prob)

    lls = []
    for _ in range(iterations):
        counts: dict[int, dict[int, float]] = {}
        ll = 0.0
        for src, tgt in bitext:
            tmat = _pair_trans_matrix(model, src, tgt)
            for j, y in enumerate(tgt):
                prior = _prior_row(len(src), j + 1, len(tgt), tension, null_prob)
                weights = prior * tmat[:, j]
                z = weights.sum()
                ll += np.log(z)
                post = weights / z
                counts.setdefault(NULL_TOKEN, {})
                counts[NULL_TOKEN][y] = counts[NULL_TOKEN].get(y, 0.0) + post[0]
                for i, x in enumerate(src, start=1):
                    row = counts.setdefault(x, {})
                    row[y] = row.get(y, 0.0) + post[i]
        lls.append(float(ll))
        trans = {}
        for x, row in counts.items():
            total = sum(row.values())
            trans[x] = {y: c / total for y, c in sorted(row.items())}
        model = AlignmentModel(trans=trans, tension=tension, null_prob=null_prob)

    model.log_likelihood = tuple(lls)
    return model


def align_pair(model: AlignmentModel, src: Sentence, tgt: Sentence) -> AlignmentLinks:
    """Argmax link (or NULL) for every target position.

    Candidates are scanned NULL first, then source positions left to
    right, replacing only on strictly greater posterior, so ties resolve
    toward NULL and then the smaller position. Target tokens never seen
    in training fall back to NULL and bump the model's fallback counter.
    """
    links = []
    tmat = _pair_trans_matrix(model, src, tgt)
    for j, y in enumerate(tgt):
        prior = _prior_row(len(src), j + 1, len(tgt), model.tension, model.null_prob)
        weights = prior * tmat[:, j]
        if weights.sum() == 0.0:
            model.unseen_fallbacks += 1
            links.append(NULL_LINK)
            continue
        best, best_w = NULL_LINK, weights[0]
        for i in range(1, len(src) + 1):
            if weights[i] > best_w:
                best, best_w = i, weights[i]
        links.append(best)
    return tuple(links)


def write_pharaoh(links_per_pair: list[AlignmentLinks], path: str) -> None:
    """Pharaoh dump: "i-j" pairs, 0-based, one line per sentence, NULL
    links omitted."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for links in links_per_pair:
            cells = [f"{i - 1}-{j}" for j, i in enumerate(links) if i != NULL_LINK]
            fh.write(" ".join(cells))
            fh.write("\n")
