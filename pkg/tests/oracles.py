"""Independent reference implementations used by the tests.

Each oracle is deliberately naive: plain loops, exhaustive search and exact
rational arithmetic, sharing no code with the package beyond data types.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def brute_force_mapping(score) -> tuple[float, list[tuple[int, int]]]:
    """Best total score and lexicographically smallest optimal injective mapping."""
    score = np.asarray(score)
    R, H = score.shape
    k = min(R, H)
    best_val, best_pairs = -math.inf, []
    for rows in itertools.combinations(range(R), k):
        for cols in itertools.permutations(range(H), k):
            pairs = sorted(zip(rows, cols))
            val = sum(score[i, j] for i, j in pairs)
            if val > best_val or (val == best_val and pairs < best_pairs):
                best_val, best_pairs = val, pairs
    return (0.0 if k == 0 else best_val), best_pairs


def brute_force_pit(p, y) -> float:
    """Mean BCE minimized over all output-slot permutations, with explicit loops."""
    p = np.asarray(p, float)
    y = np.asarray(y, float)
    T, S = p.shape
    if y.shape[1] < S:
        y = np.hstack([y, np.zeros((T, S - y.shape[1]))])
    best = math.inf
    for perm in itertools.permutations(range(S)):
        total = 0.0
        for t in range(T):
            for i in range(S):
                q = min(max(p[t, i], 1e-7), 1 - 1e-7)
                target = y[t, perm[i]]
                total -= target * math.log(q) + (1 - target) * math.log(1 - q)
        best = min(best, total)
    return best / (S * T)


def frame_der_oracle(ref_segments, hyp_segments, duration, collar, frame_period=0.01):
    """Count (miss, fa, confusion, ref_speech) by enumerating every frame.

    Segments are ``(speaker, onset, offset)`` triples.  A frame is active for
    a segment when onset <= center < offset; a frame is skipped when its
    center is strictly within ``collar`` of any reference boundary.
    """
    T = max(0, math.ceil(duration / frame_period - 1e-9))
    ref_spk = sorted({s for s, _, _ in ref_segments})
    hyp_spk = sorted({s for s, _, _ in hyp_segments})
    bounds = [b for _, a, e in ref_segments for b in (a, e)]
    scored = []
    for t in range(T):
        c = (t + 0.5) * frame_period
        if collar > 0 and any(abs(c - b) < collar for b in bounds):
            continue
        r = {s for s, a, e in ref_segments if a <= c < e}
        h = {s for s, a, e in hyp_segments if a <= c < e}
        scored.append((r, h))
    co = np.zeros((len(ref_spk), len(hyp_spk)), dtype=int)
    for r, h in scored:
        for i, a in enumerate(ref_spk):
            for j, b in enumerate(hyp_spk):
                co[i, j] += (a in r) and (b in h)
    correct, _ = brute_force_mapping(co)
    miss = sum(max(0, len(r) - len(h)) for r, h in scored)
    fa = sum(max(0, len(h) - len(r)) for r, h in scored)
    conf = sum(min(len(r), len(h)) for r, h in scored) - int(correct)
    speech = sum(len(r) for r, _ in scored)
    return miss, fa, conf, speech


def vote_oracle(members, weights=None):
    """Per-frame vote with exact fractions.

    ``members`` is a list of lists of per-frame sets of global labels.
    Returns a list of per-frame sets.
    """
    n = len(members)
    w = [Fraction(1, n)] * n if weights is None else [Fraction(x) / sum(map(Fraction, weights))
                                                     for x in weights]
    T = len(members[0])
    out = []
    for t in range(T):
        expected = sum(wi * len(m[t]) for wi, m in zip(w, members))
        # round half down: nearest integer, exact halves go down
        count = math.floor(expected)
        if expected - count > Fraction(1, 2):
            count += 1
        votes = {}
        for wi, m in zip(w, members):
            for s in m[t]:
                votes[s] = votes.get(s, 0) + wi
        ranked = sorted(votes, key=lambda s: (-votes[s], s))
        out.append(set(ranked[:count]))
    return out


def finite_difference_gradient(loss_fn, params, step=1e-4):
    """Central differences of ``loss_fn()`` w.r.t. every entry of every array in ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up = loss_fn()
            p[idx] = old - step
            down = loss_fn()
            p[idx] = old
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return grads
