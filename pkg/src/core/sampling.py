#!/usr/bin/env python3

"""State sampling inside abstraction cells, used for falsification checks.

A cell is a tuple of per-coordinate signs in {-1, 0, +1}. Samples are drawn
uniformly from [-SAMPLE_RADIUS, SAMPLE_RADIUS]^d intersected with the cell and
the state domain. Deterministic probes come first:

* corner probes put magnitude 1 (clipped to the domain) on every support
  coordinate,
* boundary probes put the largest admissible magnitude on every support
  coordinate,
* kernel probes choose magnitudes so one row of a given matrix maps the
  state to exactly zero, which exposes region boundaries of measure zero.
"""

from typing import Iterable, List, Sequence, Tuple

import numpy as np

from core.models import EPS_ZERO, StateDomain

SAMPLE_RADIUS = 10.0

Cell = Tuple[int, ...]


def magnitude_bound(domain: StateDomain, k: int, sign: int) -> float:
    lo, hi = domain.bounds(k)
    bound = hi if sign > 0 else -lo
    return min(SAMPLE_RADIUS, bound)


def cell_state(cell: Cell, magnitudes: Sequence[float]) -> np.ndarray:
    return np.array([s * m for s, m in zip(cell, magnitudes)], dtype=float)


def corner_probe(domain: StateDomain, cell: Cell) -> np.ndarray:
    mags = [min(1.0, magnitude_bound(domain, k, s)) if s else 0.0 for k, s in enumerate(cell)]
    return cell_state(cell, mags)


def boundary_probe(domain: StateDomain, cell: Cell) -> np.ndarray:
    mags = [magnitude_bound(domain, k, s) if s else 0.0 for k, s in enumerate(cell)]
    return cell_state(cell, mags)


def kernel_probes(domain: StateDomain, cell: Cell, M: np.ndarray, eps: float = EPS_ZERO) -> List[np.ndarray]:
    probes = []
    support = [k for k, s in enumerate(cell) if s]
    for row in M:
        weights = {j: row[j] * cell[j] for j in support if abs(row[j]) > eps}
        pos = [j for j, w in weights.items() if w > 0]
        neg = [j for j, w in weights.items() if w < 0]
        if not pos or not neg:
            continue
        mags = {j: 1.0 for j in support}
        s_pos = sum(weights[j] for j in pos)
        s_neg = -sum(weights[j] for j in neg)
        scaled, ratio = (neg, s_pos / s_neg) if s_pos > s_neg else (pos, s_neg / s_pos)
        for j in scaled:
            mags[j] *= ratio
        shrink = max(mags[j] / magnitude_bound(domain, j, cell[j]) for j in support)
        if shrink > 1.0:
            mags = {j: m / shrink for j, m in mags.items()}
        probes.append(cell_state(cell, [mags.get(k, 0.0) for k in range(len(cell))]))
    return probes


def random_state(domain: StateDomain, cell: Cell, rng: np.random.Generator) -> np.ndarray:
    # 1 - U[0,1) lies in (0, 1], so support coordinates stay nonzero.
    mags = [magnitude_bound(domain, k, s) * (1.0 - rng.random()) if s else 0.0 for k, s in enumerate(cell)]
    return cell_state(cell, mags)


def cell_samples(
    domain: StateDomain,
    cells: Sequence[Cell],
    n_samples: int,
    rng: np.random.Generator,
    matrices: Iterable[np.ndarray] = (),
    eps: float = EPS_ZERO,
) -> List[np.ndarray]:
    """Probes for every cell followed by `n_samples` random states spread over the cells."""
    if not cells:
        return []
    matrices = list(matrices)
    states: List[np.ndarray] = []
    for cell in cells:
        states.append(corner_probe(domain, cell))
        states.append(boundary_probe(domain, cell))
        for M in matrices:
            states.extend(kernel_probes(domain, cell, M, eps))
    for m in range(n_samples):
        states.append(random_state(domain, cells[m % len(cells)], rng))
    return states
