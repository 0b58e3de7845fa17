"""Run-simulation kernels: compiled lane with a vectorized numpy fallback.

The compiled extension is preferred when present; set ``PIPESCALE_PURE=1``
to force the numpy lane (used by the lane-equivalence tests and the
benchmark).  Both lanes implement the identical keyed-draw protocol, so
swapping lanes never changes simulated counts or scores.
"""

from __future__ import annotations

import os

from . import _numpy

_FORCE_PURE = os.environ.get("PIPESCALE_PURE", "") not in ("", "0")

if not _FORCE_PURE:
    try:
        from . import _fast as _lane  # type: ignore[attr-defined]
    except ImportError:  # extension not built; the fallback is fully featured
        _lane = _numpy
else:
    _lane = _numpy

simulate_batch = _lane.simulate_batch
LANE_NAME = _lane.LANE_NAME


def available_lanes() -> dict[str, object]:
    lanes: dict[str, object] = {"numpy": _numpy}
    try:
        from . import _fast  # type: ignore[attr-defined]

        lanes["compiled"] = _fast
    except ImportError:
        pass
    return lanes
