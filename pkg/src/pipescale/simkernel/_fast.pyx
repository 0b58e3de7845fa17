# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled lane of the run-simulation kernel.

Scalar translation of the keyed-draw protocol; see protocol.py for the
draw definitions and _numpy.py for the vectorized fallback.  Expressions
are kept literally parallel with the other lanes so floating-point results
match bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor

cnp.import_array()

from . import protocol as _proto

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL
cdef unsigned long long M1 = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long M2 = 0x94D049BB133111EBULL
cdef double INV53 = 1.0 / 9007199254740992.0
cdef double EVAL_NOISE_SCALE = 50.0

cdef int K_RUN = 0
cdef int K_PROFILE = 1
cdef int K_DIRECTION = 2
cdef int K_CHART = 3
cdef int K_INSIGHT = 4
cdef int K_JUDGE = 5
cdef int D_QUALITY = 0
cdef int D_EVAL_NOISE = 1

cdef long TOKENS_PROFILE = _proto.TOKENS_PROFILE
cdef long TOKENS_DIRECTION = _proto.TOKENS_DIRECTION
cdef long TOKENS_CODEGEN = _proto.TOKENS_CODEGEN
cdef long TOKENS_VERIFY = _proto.TOKENS_VERIFY
cdef long TOKENS_INSIGHT = _proto.TOKENS_INSIGHT
cdef long TOKENS_JUDGE = _proto.TOKENS_JUDGE
cdef long TOKENS_PRUNE = _proto.TOKENS_PRUNE

LANE_NAME = "compiled"

cdef inline unsigned long long fmix64(unsigned long long z) nogil:
    z = z + GOLDEN
    z ^= z >> 30
    z = z * M1
    z ^= z >> 27
    z = z * M2
    z ^= z >> 31
    return z


cdef inline unsigned long long combine(unsigned long long h, unsigned long long v) nogil:
    return fmix64(h ^ v)


cdef inline unsigned long long stream_key(unsigned long long rs, int kind, long i, long j, long k, int draw) nogil:
    cdef unsigned long long h = rs
    h = combine(h, <unsigned long long> kind)
    h = combine(h, <unsigned long long> i)
    h = combine(h, <unsigned long long> j)
    h = combine(h, <unsigned long long> k)
    h = combine(h, <unsigned long long> draw)
    return h


cdef inline double unit(unsigned long long key) nogil:
    return <double> (fmix64(key) >> 11) * INV53


cdef inline double clamp_score(double x) nogil:
    if x > 100.0:
        return 100.0
    if x < 0.0:
        return 0.0
    return x


cdef inline void rank_desc(double* perceived, int m, int* order, int ranked) nogil:
    """Retained-order indices: evaluator ranking when pruning is active
    (best perceived first, ties keep index order), file order otherwise."""
    cdef int i, j, idx
    for i in range(m):
        order[i] = i
    if not ranked:
        return
    for i in range(1, m):
        idx = order[i]
        j = i - 1
        while j >= 0 and perceived[order[j]] < perceived[idx]:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = idx


def simulate_batch(
    master_seed,
    leg,
    start,
    count,
    branching,
    n_prime,
    pruning,
    pass_prob,
    root_mean,
    root_spread,
    child_spread,
    eval_corr,
    judge_bias,
    judge_noise,
    n_traits,
    repeats,
):
    """Simulate ``count`` runs; same contract as the numpy lane."""
    cdef int b = branching
    cdef int n = n_prime
    cdef int prune_flag = 1 if pruning else 0
    cdef int traits = n_traits
    cdef int reps = repeats
    cdef double p_v = pass_prob
    cdef double mu0 = root_mean
    cdef double sig0 = root_spread
    cdef double sig = child_spread
    cdef double corr = eval_corr
    cdef double noise_w = (1.0 - fabs(corr)) * EVAL_NOISE_SCALE
    cdef double jb = judge_bias
    cdef double jn = judge_noise
    cdef unsigned long long seed = <unsigned long long> (int(master_seed) & _proto.MASK64)
    cdef long leg_l = leg
    cdef long start_l = start
    cdef long n_runs = count

    if b > 64:
        raise ValueError(f"branching factor {b} exceeds compiled-lane limit 64")

    cdef cnp.ndarray[cnp.int64_t, ndim=1] gen_calls = np.zeros(n_runs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prune_calls = np.zeros(n_runs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] gen_tokens = np.zeros(n_runs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prune_tokens = np.zeros(n_runs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] v_sums = np.zeros(n_runs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] scores_per_run = np.zeros(n_runs, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scores = np.empty(n_runs * n * n * n, dtype=np.float64)

    cdef double q_p[64]
    cdef double perc[64]
    cdef double q_d[64]
    cdef double q_k[64]
    cdef int order_p[64]
    cdef int order_d[64]
    cdef int order_k[64]

    cdef unsigned long long rs
    cdef long r, v_sum
    cdef int i, j, k, pi, di, ki, t, total
    cdef long score_pos = 0
    cdef double parent_q, dir_q, ins_q, u, center, acc
    cdef int run_reports

    with nogil:
        for r in range(n_runs):
            rs = seed
            rs = combine(rs, <unsigned long long> K_RUN)
            rs = combine(rs, <unsigned long long> leg_l)
            rs = combine(rs, <unsigned long long> (start_l + r))
            rs = combine(rs, 0)
            rs = combine(rs, 0)

            v_sum = 0
            run_reports = 0

            for i in range(b):
                u = unit(stream_key(rs, K_PROFILE, i, 0, 0, D_QUALITY))
                q_p[i] = clamp_score(mu0 + sig0 * (2.0 * u - 1.0))
                u = unit(stream_key(rs, K_PROFILE, i, 0, 0, D_EVAL_NOISE))
                perc[i] = corr * q_p[i] + noise_w * (2.0 * u - 1.0)
            rank_desc(perc, b, order_p, prune_flag)

            for pi in range(n):
                i = order_p[pi]
                parent_q = q_p[i]
                for j in range(b):
                    u = unit(stream_key(rs, K_DIRECTION, i, j, 0, D_QUALITY))
                    q_d[j] = clamp_score(parent_q + sig * (2.0 * u - 1.0))
                    u = unit(stream_key(rs, K_DIRECTION, i, j, 0, D_EVAL_NOISE))
                    perc[j] = corr * q_d[j] + noise_w * (2.0 * u - 1.0)
                rank_desc(perc, b, order_d, prune_flag)

                for di in range(n):
                    j = order_d[di]
                    if unit(stream_key(rs, K_CHART, i, j, 0, D_QUALITY)) >= p_v:
                        continue
                    v_sum += 1
                    dir_q = q_d[j]
                    for k in range(b):
                        u = unit(stream_key(rs, K_INSIGHT, i, j, k, D_QUALITY))
                        q_k[k] = clamp_score(dir_q + sig * (2.0 * u - 1.0))
                        u = unit(stream_key(rs, K_INSIGHT, i, j, k, D_EVAL_NOISE))
                        perc[k] = corr * q_k[k] + noise_w * (2.0 * u - 1.0)
                    rank_desc(perc, b, order_k, prune_flag)

                    for ki in range(n):
                        k = order_k[ki]
                        ins_q = q_k[k]
                        acc = 0.0
                        for t in range(reps):
                            u = unit(stream_key(rs, K_JUDGE, i, j, k, t))
                            center = clamp_score((ins_q + jb) + jn * (2.0 * u - 1.0))
                            total = <int> floor(traits * center + 0.5)
                            acc += (<double> total) / (<double> traits)
                        scores[score_pos] = acc / reps
                        score_pos += 1
                        run_reports += 1

            v_sums[r] = v_sum
            scores_per_run[r] = run_reports
            gen_calls[r] = b + n * (1 + 2 * n) + v_sum * (1 + reps * n)
            prune_calls[r] = prune_flag * (1 + n + v_sum)
            gen_tokens[r] = (
                b * TOKENS_PROFILE
                + n * TOKENS_DIRECTION
                + n * n * (TOKENS_CODEGEN + TOKENS_VERIFY)
                + v_sum * (TOKENS_INSIGHT + reps * n * TOKENS_JUDGE)
            )
            prune_tokens[r] = prune_calls[r] * TOKENS_PRUNE

    return (
        gen_calls,
        prune_calls,
        gen_tokens,
        prune_tokens,
        v_sums,
        scores[:score_pos].copy(),
        scores_per_run,
    )
