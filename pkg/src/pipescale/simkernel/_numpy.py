"""Vectorized numpy lane of the run-simulation kernel.

Implements the same keyed-draw protocol as the compiled lane with dense
precomputation: draws for every potential candidate are hashed in bulk,
then retention masks select the branches a sequential execution would
keep.  Counts are bit-identical to the compiled lane; scores agree to
float64 roundoff of identically-ordered operations (in practice, exactly).
"""

from __future__ import annotations

import numpy as np

from . import protocol as proto

_U64 = np.uint64
_GOLDEN = _U64(proto._GOLDEN)
_M1 = _U64(proto._MIX1)
_M2 = _U64(proto._MIX2)
_INV53 = 1.0 / 9007199254740992.0

LANE_NAME = "numpy"


def _fmix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = z ^ (z >> _U64(30))
    z = z * _M1
    z = z ^ (z >> _U64(27))
    z = z * _M2
    z = z ^ (z >> _U64(31))
    return z


def _combine(h: np.ndarray, v) -> np.ndarray:
    return _fmix(h ^ np.asarray(v, dtype=_U64))


def _unit(rs: np.ndarray, kind: int, i, j, k, draw) -> np.ndarray:
    h = rs
    for v in (kind, i, j, k, draw):
        h = _combine(h, v)
    h = _fmix(h)
    return (h >> _U64(11)).astype(np.float64) * _INV53


def _run_seeds(master_seed: int, leg: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.int64).astype(_U64)
    h = np.full(count, master_seed & proto.MASK64, dtype=_U64)
    for v in (proto.K_RUN, leg):
        h = _combine(h, v)
    h = _fmix(h ^ idx)
    for v in (0, 0):
        h = _combine(h, v)
    return h


def _clamp(x: np.ndarray) -> np.ndarray:
    return np.minimum(100.0, np.maximum(0.0, x))


def _perceived(q: np.ndarray, noise: np.ndarray, corr: float) -> np.ndarray:
    return corr * q + ((1.0 - abs(corr)) * proto.EVAL_NOISE_SCALE) * noise


def _top_indices(perceived: np.ndarray, keep: int, ranked: bool) -> np.ndarray:
    """Original indices of the retained candidates, in retained order.

    With pruning active, retained order follows the evaluator ranking
    (stable argsort on negated scores: best first, ties by index); with
    pruning off no evaluator runs, so candidates keep file order.
    """
    if not ranked:
        shape = perceived.shape[:-1] + (keep,)
        return np.broadcast_to(np.arange(keep, dtype=np.int64), shape).copy()
    return np.argsort(-perceived, axis=-1, kind="stable")[..., :keep]


def simulate_batch(
    master_seed: int,
    leg: int,
    start: int,
    count: int,
    branching: int,
    n_prime: int,
    pruning: bool,
    pass_prob: float,
    root_mean: float,
    root_spread: float,
    child_spread: float,
    eval_corr: float,
    judge_bias: float,
    judge_noise: float,
    n_traits: int,
    repeats: int,
):
    """Simulate ``count`` runs; returns per-run totals plus flattened scores."""
    b, n = branching, n_prime
    rs = _run_seeds(master_seed, leg, start, count)  # (R,)
    rs_col = rs[:, None]

    iv = np.arange(b, dtype=_U64)
    # profiles: quality and evaluator noise, (R, b)
    q_p = _clamp(root_mean + root_spread * (2.0 * _unit(rs_col, proto.K_PROFILE, iv, 0, 0, proto.D_QUALITY) - 1.0))
    e_p = 2.0 * _unit(rs_col, proto.K_PROFILE, iv, 0, 0, proto.D_EVAL_NOISE) - 1.0
    rp = _top_indices(_perceived(q_p, e_p, eval_corr), n, pruning)  # (R, n) original profile indices

    # directions: dense (R, b, b) keyed by (i, j), parented on profile i
    rs_3 = rs[:, None, None]
    i3 = iv[None, :, None]
    j3 = iv[None, None, :]
    u_dq = _unit(rs_3, proto.K_DIRECTION, i3, j3, 0, proto.D_QUALITY)
    q_d_dense = _clamp(q_p[:, :, None] + child_spread * (2.0 * u_dq - 1.0))
    e_d_dense = 2.0 * _unit(rs_3, proto.K_DIRECTION, i3, j3, 0, proto.D_EVAL_NOISE) - 1.0
    pass_dense = _unit(rs_3, proto.K_CHART, i3, j3, 0, proto.D_QUALITY) < pass_prob

    # gather rows for retained profiles -> (R, n, b)
    rp_exp = rp[:, :, None]
    q_d = np.take_along_axis(q_d_dense, rp_exp, axis=1)
    e_d = np.take_along_axis(e_d_dense, rp_exp, axis=1)
    rd = _top_indices(_perceived(q_d, e_d, eval_corr), n, pruning)  # (R, n, n) original j indices
    q_d_sel = np.take_along_axis(q_d, rd, axis=2)  # (R, n, n)

    passes = np.take_along_axis(np.take_along_axis(pass_dense, rp_exp, axis=1), rd, axis=2)  # (R, n, n)
    v_i = passes.sum(axis=2)  # (R, n)
    v_sum = v_i.sum(axis=1).astype(np.int64)  # (R,)

    # insights: keyed by (i, j, k) with original indices, parented on direction
    rs_4 = rs[:, None, None, None]
    i4 = rp[:, :, None, None].astype(_U64)  # original profile index
    j4 = rd[:, :, :, None].astype(_U64)  # original direction index
    k4 = iv[None, None, None, :]
    u_kq = _unit(rs_4, proto.K_INSIGHT, i4, j4, k4, proto.D_QUALITY)
    q_k = _clamp(q_d_sel[:, :, :, None] + child_spread * (2.0 * u_kq - 1.0))  # (R, n, n, b)
    e_k = 2.0 * _unit(rs_4, proto.K_INSIGHT, i4, j4, k4, proto.D_EVAL_NOISE) - 1.0
    rk = _top_indices(_perceived(q_k, e_k, eval_corr), n, pruning)  # (R, n, n, n) original k indices
    q_k_sel = np.take_along_axis(q_k, rk, axis=3)  # (R, n, n, n)

    # judge repeats on selected insights
    i5 = i4[..., None]
    j5 = j4[..., None]
    k5 = rk[..., None].astype(_U64)
    t5 = np.arange(repeats, dtype=_U64)[None, None, None, None, :]
    u_j = _unit(rs[:, None, None, None, None], proto.K_JUDGE, i5, j5, k5, t5)
    center = _clamp((q_k_sel[..., None] + judge_bias) + judge_noise * (2.0 * u_j - 1.0))
    totals = np.floor(n_traits * center + 0.5)
    finals = (totals / n_traits).sum(axis=4) / repeats  # (R, n, n, n)

    # flatten scores in ranking order, masking unverified charts
    mask = np.broadcast_to(passes[:, :, :, None], finals.shape)
    scores = finals[mask]
    scores_per_run = (v_sum * n).astype(np.int64)

    pruning_i = 1 if pruning else 0
    gen_calls = b + n * (1 + 2 * n) + v_sum * (1 + repeats * n)
    prune_calls = pruning_i * (1 + n + v_sum)
    gen_tokens = (
        b * proto.TOKENS_PROFILE
        + n * proto.TOKENS_DIRECTION
        + n * n * (proto.TOKENS_CODEGEN + proto.TOKENS_VERIFY)
        + v_sum * (proto.TOKENS_INSIGHT + repeats * n * proto.TOKENS_JUDGE)
    )
    prune_tokens = prune_calls * proto.TOKENS_PRUNE
    return (
        gen_calls.astype(np.int64),
        prune_calls if pruning else np.zeros(count, dtype=np.int64),
        gen_tokens.astype(np.int64),
        prune_tokens.astype(np.int64),
        v_sum,
        scores.astype(np.float64),
        scores_per_run,
    )
