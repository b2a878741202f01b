"""Viterbi alignment against brute-force enumeration."""

import numpy as np
import pytest

from selkd.nat import (
    CtcInfeasibleError,
    collapse,
    ctc_loss,
    frame_path_logprob,
    min_frames,
    viterbi_align,
)

from conftest import random_lattice
from oracles import brute_best_paths


def test_certain_path_is_recovered():
    # Probability ~1 on the path [a, blank, b].
    eps = 1e-12
    rows = [
        [eps, 1.0, eps],  # a
        [1.0, eps, eps],  # blank
        [eps, eps, 1.0],  # b
    ]
    e = np.log(np.array(rows))
    e -= np.log(np.exp(e).sum(axis=1, keepdims=True))
    path = viterbi_align(e, (1, 2))
    assert path.frames == (1, 0, 2)


def test_best_path_never_beats_path_sum(np_rng):
    for _ in range(50):
        vocab = int(np_rng.integers(2, 5))
        frames = int(np_rng.integers(1, 7))
        tgt = tuple(int(x) for x in np_rng.integers(1, vocab, size=np_rng.integers(1, 4)))
        if frames < min_frames(tgt):
            continue
        e = random_lattice(np_rng, frames, vocab)
        best = frame_path_logprob(e, viterbi_align(e, tgt))
        assert best <= -ctc_loss(e, tgt) + 1e-12


def test_matches_bruteforce_argmax(np_rng):
    checked = 0
    for _ in range(200):
        vocab = int(np_rng.integers(2, 5))
        frames = int(np_rng.integers(1, 7))
        tgt = tuple(int(x) for x in np_rng.integers(1, vocab, size=np_rng.integers(1, 4)))
        e = random_lattice(np_rng, frames, vocab)
        best_lp, best_set = brute_best_paths(e.tolist(), tgt)
        if not best_set:
            with pytest.raises(CtcInfeasibleError):
                viterbi_align(e, tgt)
            continue
        path = viterbi_align(e, tgt)
        assert frame_path_logprob(e, path) == pytest.approx(best_lp, abs=1e-9)
        assert path.frames in best_set
        checked += 1
    assert checked >= 80


def test_collapse_equals_target(np_rng):
    for _ in range(40):
        vocab = int(np_rng.integers(3, 6))
        tgt = tuple(int(x) for x in np_rng.integers(1, vocab, size=3))
        e = random_lattice(np_rng, 10, vocab)
        path = viterbi_align(e, tgt)
        assert collapse(path.frames) == tgt


def test_tie_break_puts_blanks_early():
    # Fully uniform lattice: every valid path ties, so the documented rule
    # (prefer the smaller extended state) must emit blanks first.
    e = np.full((3, 2), np.log(0.5))
    path = viterbi_align(e, (1,))
    assert path.frames == (0, 0, 1)
    e4 = np.full((4, 3), np.log(1 / 3))
    path = viterbi_align(e4, (1, 2))
    assert path.frames == (0, 0, 1, 2)


def test_infeasible_raises():
    e = np.full((1, 3), np.log(1 / 3))
    with pytest.raises(CtcInfeasibleError):
        viterbi_align(e, (1, 2))
