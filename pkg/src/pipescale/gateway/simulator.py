"""Seeded simulation backend producing parseable completions.

The simulator renders the deterministic draw protocol as text obeying each
prompt's output contract, so the engine exercises its real parse paths.
Candidate addressing arrives in ``request.sim``; content is recomputed
statelessly from (run seed, indices), which keeps concurrent calls and
replays bit-identical.

Fault injection corrupts selected calls (by template and occurrence index)
to drive the engine's drop/repair/rectify paths in tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..judging import TRAIT_SCHEMAS
from ..simkernel import protocol as proto
from .requests import GenerationBackend, GenerationRequest, GenerationResponse, estimate_tokens

_CHART_TYPES = ("bar", "line", "scatter", "histogram", "boxplot", "heatmap")

_QUALITY_BANDS = (
    (80.0, "sharp, quantified and clearly traceable"),
    (60.0, "specific and mostly well grounded"),
    (40.0, "plausible but only loosely tied to the marks"),
    (0.0, "generic and weakly supported"),
)


def _band(quality: float) -> str:
    for floor_value, phrase in _QUALITY_BANDS:
        if quality >= floor_value:
            return phrase
    return _QUALITY_BANDS[-1][1]


@dataclass
class SimFaults:
    """Corrupt the Nth call of a template: mode in {empty, malformed, bad_ranking}."""

    rules: dict[str, dict[int, str]] = field(default_factory=dict)

    def mode_for(self, template_id: str, occurrence: int) -> str | None:
        return self.rules.get(template_id, {}).get(occurrence)


class SimulatedBackend(GenerationBackend):
    def __init__(self, model: proto.SimulatorModel | None = None, faults: SimFaults | None = None):
        self.model = model or proto.SimulatorModel()
        self.faults = faults or SimFaults()
        self._call_counts: dict[str, int] = {}

    # -- latent-quality chains (stateless recomputation from indices) -----

    def _profile_q(self, rs: int, i: int) -> float:
        return proto.profile_quality(rs, i, self.model)

    def _direction_q(self, rs: int, i: int, j: int) -> float:
        return proto.direction_quality(rs, i, j, self._profile_q(rs, i), self.model)

    def _insight_q(self, rs: int, i: int, j: int, k: int) -> float:
        return proto.insight_quality(rs, i, j, k, self._direction_q(rs, i, j), self.model)

    # -- completion dispatch ----------------------------------------------

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        occurrence = self._call_counts.get(request.template_id, 0)
        self._call_counts[request.template_id] = occurrence + 1
        fault = self.faults.mode_for(request.template_id, occurrence)
        if fault == "empty":
            return self._respond("")
        if fault == "malformed":
            return self._respond("```json\n{broken\n```")

        sim = request.sim
        rs = sim["run_seed"]
        kind = sim["kind"]
        if kind == "profile":
            text = self._profile_text(rs, sim)
        elif kind == "direction":
            text = self._direction_text(rs, sim, int(request.fills["num_directions"]))
        elif kind == "codegen":
            text = self._code_text(request.fills)
        elif kind == "rectify":
            text = self._code_text(request.fills)
        elif kind == "chart":
            text = self._chart_filter_text(rs, sim)
        elif kind == "insight":
            text = self._insight_text(rs, sim, int(request.fills["num_insights"]))
        elif kind == "judge":
            text = self._judge_text(rs, sim)
        elif kind == "eval":
            text = self._eval_text(rs, sim, fault)
        else:
            raise ValueError(f"simulator cannot serve request kind {kind!r}")
        return self._respond(text)

    @staticmethod
    def _respond(text: str) -> GenerationResponse:
        return GenerationResponse(
            text=text,
            output_tokens=estimate_tokens(text),
            latency_ms=0,
            tokens_estimated=True,
        )

    # -- per-template renderers -------------------------------------------

    def _profile_text(self, rs: int, sim: dict) -> str:
        i = sim["i"]
        quality = self._profile_q(rs, i)
        columns = sim.get("columns", [])
        lines = [
            "## About Dataset",
            f"- Shape: {sim.get('shape', '? x ?')}. Mixed numeric and categorical fields.",
            f"- High-level summary: table `{sim.get('dataset', 'data')}` appears to describe "
            f"records over columns {', '.join(columns)}.",
            "",
            "## Schema Summary",
            "Column, Detected Type, Example, Likely Meaning, Suggested Role",
        ]
        lines += [f"{c}, inferred, \"...\", likely {c.replace('_', ' ')}, feature" for c in columns]
        lines += [
            "",
            "## Potential Uses & Analysis Directions",
            f"- Candidate profile {i}: the write-up is {_band(quality)}.",
            "- Compare categorical frequencies and numeric distributions across segments.",
        ]
        return "\n".join(lines)

    def _direction_text(self, rs: int, sim: dict, count: int) -> str:
        i = sim["i"]
        columns = sim.get("columns") or ["value"]
        directions = []
        for j in range(count):
            quality = self._direction_q(rs, i, j)
            x = columns[(i + j) % len(columns)]
            y = columns[(i + j + 1) % len(columns)]
            directions.append(
                {
                    "topic": f"Relation of {y} across {x} (branch {i}.{j})",
                    "chart_type": _CHART_TYPES[(i + j) % len(_CHART_TYPES)],
                    "variables": [x, y] if x != y else [x],
                    "explanation": f"A view of {y} against {x}; expected to be {_band(quality)}.",
                    "parameters": {"aggregation": "mean", "sort": "descending"},
                }
            )
        return "```json\n" + json.dumps(directions, indent=2) + "\n```"

    @staticmethod
    def _code_text(fills: dict) -> str:
        data_path = fills.get("data_path", "data.csv")
        output_path = fills.get("output_path", "chart.png")
        code = (
            "import matplotlib\n"
            "matplotlib.use(\"Agg\")\n"
            "import matplotlib.pyplot as plt\n"
            "import pandas as pd\n"
            f"df = pd.read_csv(\"{data_path}\")\n"
            "plt.figure(figsize=(8, 6))\n"
            "df.select_dtypes(\"number\").iloc[:, 0].plot(kind=\"hist\")\n"
            "plt.title(\"Distribution\")\n"
            "plt.xlabel(\"value\")\n"
            "plt.ylabel(\"count\")\n"
            "plt.tight_layout()\n"
            f"plt.savefig(\"{output_path}\")\n"
            "plt.close()\n"
        )
        return "```python\n" + code + "```"

    def _chart_filter_text(self, rs: int, sim: dict) -> str:
        passed = proto.chart_passes(rs, sim["i"], sim["j"], self.model)
        doc = {
            "is_legible": bool(passed),
            "evidences": [
                "axes and title are readable" if passed else "figure is degenerate or unreadable",
            ],
        }
        return "```json\n" + json.dumps(doc) + "\n```"

    def _insight_text(self, rs: int, sim: dict, count: int) -> str:
        i, j = sim["i"], sim["j"]
        insights = []
        for k in range(count):
            quality = self._insight_q(rs, i, j, k)
            insights.append(
                {
                    "description": (
                        f"Across branch {i}.{j}.{k} the plotted series shifts visibly; "
                        f"the claim is {_band(quality)} and ties to the highlighted marks."
                    )
                }
            )
        return "```json\n" + json.dumps({"insights": insights}, indent=1) + "\n```"

    def _judge_text(self, rs: int, sim: dict) -> str:
        level = sim["level"]
        traits = TRAIT_SCHEMAS[level]
        judge_profile = self.model.judge_profiles[level]
        total = proto.judge_trait_total(
            rs,
            sim["i"],
            sim["j"],
            sim["k"],
            sim["repeat"],
            self._insight_q(rs, sim["i"], sim["j"], sim["k"]),
            len(traits),
            judge_profile.bias,
            self.model.judge_noise * judge_profile.noise,
        )
        values = proto.split_trait_total(total, len(traits))
        doc = {
            "insight": sim.get("insight_text", ""),
            "scores": dict(zip(traits, values)),
            "evidence": "scores follow the visible evidence strength",
            "conclusion": "overall quality consistent with the chart",
        }
        return "```json\n" + json.dumps(doc) + "\n```"

    def _eval_text(self, rs: int, sim: dict, fault: str | None) -> str:
        candidates = sim["candidates"]  # list of (kind, i, j, k) index tuples
        perceived = []
        for kind_name, i, j, k in candidates:
            if kind_name == "profile":
                true_q = self._profile_q(rs, i)
                key_kind = proto.K_PROFILE
            elif kind_name == "direction":
                true_q = self._direction_q(rs, i, j)
                key_kind = proto.K_DIRECTION
            else:
                true_q = self._insight_q(rs, i, j, k)
                key_kind = proto.K_INSIGHT
            perceived.append(proto.perceived_quality(rs, key_kind, i, j, k, true_q, self.model))
        order = proto.rank_descending(perceived)
        ranking = [idx + 1 for idx in order]
        if fault == "bad_ranking" and len(ranking) >= 2:
            ranking = [ranking[0]] * 2 + ranking[2:]
        doc = {"ranking": ranking, "evidence": "ranked by grounding and specificity"}
        return "```json\n" + json.dumps(doc) + "\n```"
