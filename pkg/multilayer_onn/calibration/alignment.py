# multilayer_onn/calibration/alignment.py
# Purpose: Coordinate-descent search for per-window pixel shifts

"""
Module: alignment.py
Purpose: Move weight windows away from their idealized positions, one pixel at a time, to
maximize power on the intended detector while penalizing crosstalk.
"""

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from multilayer_onn.calibration.system import SimulatedSystem
from multilayer_onn.errors import InvalidArgumentError
from multilayer_onn.geometry.layout import window_rects
from multilayer_onn.utils.logger import get_logger, log_stage_summary
from multilayer_onn.utils.seeding import STREAM_ALIGNMENT, derive_rng

logger = get_logger(__name__)

MOVES = np.array([(-1, 0), (1, 0), (0, -1), (0, 1)])


@dataclass(frozen=True)
class AlignmentObjective:
    """Per-window score: own-detector power minus crosstalk_weight times power on other detectors."""

    crosstalk_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.crosstalk_weight < 0:
            raise InvalidArgumentError("crosstalk_weight must be nonnegative", module="calibration")

    def window_scores(self, coupling: np.ndarray) -> np.ndarray:
        """(n, p) scores from an (n, p, p) coupling tensor."""
        own = np.einsum("ijj->ij", coupling)
        return own - self.crosstalk_weight * (coupling.sum(axis=-1) - own)

    def score(self, row: np.ndarray, j: int) -> float:
        """Score of one window from its (p,) coupling row."""
        return float(row[j] - self.crosstalk_weight * (row.sum() - row[j]))


@dataclass
class AlignmentResult:
    shifts: np.ndarray
    trace: List[float] = field(default_factory=list)
    sweeps: int = 0


def _collides(rects: np.ndarray, i: int, j: int, candidate: np.ndarray, height: int, width: int) -> bool:
    r0, c0, h, w = candidate
    if r0 < 0 or c0 < 0 or r0 + h > height or c0 + w > width:
        return True
    flat = rects.reshape(-1, 4)
    hit = (
        (flat[:, 0] < r0 + h) & (r0 < flat[:, 0] + flat[:, 2])
        & (flat[:, 1] < c0 + w) & (c0 < flat[:, 1] + flat[:, 3])
    )
    hit[i * rects.shape[1] + j] = False
    return bool(hit.any())


def optimize_weight_shifts(
    system: SimulatedSystem,
    objective: Optional[AlignmentObjective] = None,
    max_shift: int = 3,
    seed: int = 0,
    max_sweeps: int = 100,
    run_id: Optional[str] = None,
) -> AlignmentResult:
    """
    Coordinate descent over integer (drow, dcol) window shifts.

    Every sweep visits all windows in a seeded order and applies the best strictly improving
    single-pixel move that keeps the window inside the aperture, within max_shift and disjoint
    from every other window. Window scores are independent, so the total objective never
    decreases; the search stops after a sweep without improvement.

    Args:
        system (SimulatedSystem): Stage whose spot coupling is measured.
        objective (Optional[AlignmentObjective]): Scoring rule.
        max_shift (int): Bound on |drow| and |dcol|.
        seed (int): Seed of the visiting order.
        max_sweeps (int): Safety cap on sweeps.
        run_id (Optional[str]): Run ID for log records.

    Returns:
        AlignmentResult: (n, p, 2) shift map and the objective after each sweep (first entry is the start).
    """
    if max_shift < 0:
        raise InvalidArgumentError(f"max_shift must be >= 0, got {max_shift}", module="calibration")
    geom = system.geometry
    objective = objective or AlignmentObjective()
    n, p = geom.n_in, geom.n_out
    shifts = np.zeros((n, p, 2), dtype=int)
    rects = window_rects(geom, system.guard)
    height, width = geom.mask.height, geom.mask.width
    scores = objective.window_scores(system.coupling(shifts))
    result = AlignmentResult(shifts=shifts, trace=[float(scores.sum())])

    start = time.time()
    for sweep in range(max_sweeps):
        order = derive_rng(seed, STREAM_ALIGNMENT, sweep).permutation(n * p)
        improved = False
        for flat in order:
            i, j = divmod(int(flat), p)
            best_move, best_score = None, scores[i, j]
            for move in MOVES:
                cand = shifts[i, j] + move
                if np.any(np.abs(cand) > max_shift):
                    continue
                rect = rects[i, j].copy()
                rect[:2] += move
                if _collides(rects, i, j, rect, height, width):
                    continue
                score = objective.score(system.window_row(i, j, cand), j)
                if score > best_score + 1e-12:
                    best_move, best_score = move, score
            if best_move is not None:
                shifts[i, j] += best_move
                rects[i, j, :2] += best_move
                scores[i, j] = best_score
                improved = True
        result.sweeps = sweep + 1
        result.trace.append(float(scores.sum()))
        if not improved:
            break

    log_stage_summary("alignment_sweep", time.time() - start, run_id=run_id, sweeps=result.sweeps, objective=result.trace[-1])
    return result

