"""Deterministic draw protocol for the simulated generation backend.

Every stochastic quantity in a simulated run (candidate latent quality,
evaluator noise, chart-verification pass, judge ratings) is a pure function
of a 64-bit key built from (run seed, draw kind, candidate indices, draw
index).  The simulated text backend, the vectorized numpy kernel, and the
compiled kernel all evaluate the same functions on the same keys, so a run
is reproducible regardless of lane, batching, or scheduling order.

All arithmetic here is restricted to operations that are bit-identical
between scalar Python, numpy, and C: 64-bit modular integer mixing,
float64 +,*,-,/ with fixed association, min/max clamping, and
floor(x + 0.5) rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

MASK64 = (1 << 64) - 1

# splitmix64 constants
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# draw kinds (first key component after the run seed)
K_RUN = 0
K_PROFILE = 1
K_DIRECTION = 2
K_CHART = 3
K_INSIGHT = 4
K_JUDGE = 5

# draw index within a candidate's stream
D_QUALITY = 0
D_EVAL_NOISE = 1

# spread of the evaluator's private noise term, in score units
EVAL_NOISE_SCALE = 50.0

# per-call output-token charge used by the kernels (the text simulator
# instead derives tokens from rendered text length)
TOKENS_PROFILE = 180
TOKENS_DIRECTION = 320
TOKENS_CODEGEN = 260
TOKENS_VERIFY = 40
TOKENS_INSIGHT = 300
TOKENS_JUDGE = 150
TOKENS_PRUNE = 60


def fmix64(z: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit value."""
    z = (z + _GOLDEN) & MASK64
    z ^= z >> 30
    z = (z * _MIX1) & MASK64
    z ^= z >> 27
    z = (z * _MIX2) & MASK64
    z ^= z >> 31
    return z


def combine(h: int, v: int) -> int:
    """Fold one key component into a running 64-bit hash."""
    return fmix64((h ^ (v & MASK64)) & MASK64)


def stream_key(run_seed: int, kind: int, i: int = 0, j: int = 0, k: int = 0, draw: int = 0) -> int:
    h = run_seed & MASK64
    for v in (kind, i, j, k, draw):
        h = combine(h, v)
    return h


def unit(key: int) -> float:
    """Map a key to a float64 uniform in [0, 1)."""
    return (fmix64(key) >> 11) * (1.0 / 9007199254740992.0)


def run_seed(master_seed: int, leg: int, run_index: int) -> int:
    return stream_key(master_seed & MASK64, K_RUN, leg, run_index)


def centered(u: float) -> float:
    """[0,1) uniform -> (-1,1) uniform."""
    return 2.0 * u - 1.0


def clamp_score(x: float) -> float:
    return min(100.0, max(0.0, x))


@dataclass(frozen=True)
class JudgeProfile:
    """Per-level judge behaviour in simulation: a leniency bias plus rating noise."""

    bias: float
    noise: float


@dataclass(frozen=True)
class SimulatorModel:
    """Parameters of the stochastic pipeline stand-in.

    ``pass_prob`` is the probability that a generated chart survives the
    legibility filter; chart survivals are independent, so the number of
    verified charts per retained profile is Binomial(n', pass_prob).
    ``evaluator_judge_correlation`` mixes true latent quality with private
    noise in the stage evaluators' perceived scores: 1 means the evaluator
    ranks exactly like the final judge, 0 is uninformed, -1 is adversarial.
    """

    pass_prob: float = 1.0
    root_mean: float = 50.0
    root_spread: float = 15.0
    child_spread: float = 12.0
    evaluator_judge_correlation: float = 1.0
    judge_noise: float = 2.0
    judge_profiles: dict[str, JudgeProfile] = field(
        default_factory=lambda: {
            "easy": JudgeProfile(bias=8.0, noise=6.0),
            "moderate": JudgeProfile(bias=3.0, noise=4.0),
            "harsh": JudgeProfile(bias=0.0, noise=0.0),
        }
    )

    def __post_init__(self) -> None:
        if not 0.0 <= self.pass_prob <= 1.0:
            raise ValueError(f"pass_prob must be in [0,1], got {self.pass_prob}")
        if not -1.0 <= self.evaluator_judge_correlation <= 1.0:
            raise ValueError("evaluator_judge_correlation must be in [-1,1]")


def profile_quality(rs: int, i: int, model: SimulatorModel) -> float:
    u = unit(stream_key(rs, K_PROFILE, i, 0, 0, D_QUALITY))
    return clamp_score(model.root_mean + model.root_spread * centered(u))


def direction_quality(rs: int, i: int, j: int, parent_q: float, model: SimulatorModel) -> float:
    u = unit(stream_key(rs, K_DIRECTION, i, j, 0, D_QUALITY))
    return clamp_score(parent_q + model.child_spread * centered(u))


def insight_quality(rs: int, i: int, j: int, k: int, parent_q: float, model: SimulatorModel) -> float:
    u = unit(stream_key(rs, K_INSIGHT, i, j, k, D_QUALITY))
    return clamp_score(parent_q + model.child_spread * centered(u))


def chart_passes(rs: int, i: int, j: int, model: SimulatorModel) -> bool:
    return unit(stream_key(rs, K_CHART, i, j, 0, D_QUALITY)) < model.pass_prob


def perceived_quality(rs: int, kind: int, i: int, j: int, k: int, true_q: float, model: SimulatorModel) -> float:
    """Quality as seen by a stage-local evaluator (used only for ranking)."""
    c = model.evaluator_judge_correlation
    e = centered(unit(stream_key(rs, kind, i, j, k, D_EVAL_NOISE)))
    return c * true_q + ((1.0 - abs(c)) * EVAL_NOISE_SCALE) * e


def rank_descending(perceived: list[float]) -> list[int]:
    """Indices sorted by perceived quality, best first; ties keep input order."""
    return sorted(range(len(perceived)), key=lambda idx: (-perceived[idx], idx))


def judge_trait_total(
    rs: int, i: int, j: int, k: int, repeat: int, latent_q: float, n_traits: int,
    bias: float, noise: float,
) -> int:
    """Integer sum of simulated per-trait ratings for one judge repeat.

    The repeat's target scalar is the latent quality plus the level's bias
    and noise; trait integers are chosen so their mean reproduces the
    target to the closest 1/n_traits.
    """
    u = unit(stream_key(rs, K_JUDGE, i, j, k, repeat))
    center = clamp_score(latent_q + bias + noise * centered(u))
    return int(math.floor(n_traits * center + 0.5))


def split_trait_total(total: int, n_traits: int) -> list[int]:
    """Integer trait ratings in [0,100] whose sum is exactly ``total``."""
    base, rem = divmod(total, n_traits)
    return [base + 1 if t < rem else base for t in range(n_traits)]
