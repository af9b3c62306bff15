#!/usr/bin/env python3

from typing import FrozenSet, Iterable, Sequence, Set, Tuple

import numpy as np

from core.errors import ModelError
from core.models import (
    EPS_ZERO,
    HybridControlSequence,
    SparsityCount,
    SwitchedSystem,
    Trajectory,
)


def delta(nu: Sequence[int]) -> Tuple[int, ...]:
    """Successive differences nu[m+1] - nu[m]; empty for a single entry."""
    return tuple(int(b) - int(a) for a, b in zip(nu[:-1], nu[1:]))


def sparsity(seq: HybridControlSequence, eps: float = EPS_ZERO) -> SparsityCount:
    """Number of discrete switches plus number of nonzero continuous controls."""
    n_switch = sum(1 for step in delta(seq.nu) if step != 0)
    n_control = sum(1 for mu in seq.mu if abs(mu) > eps)
    return SparsityCount(n_switch, n_control, n_switch + n_control)


def _check_indices(system: SwitchedSystem, nu: Iterable[int]) -> None:
    for t, i in enumerate(nu):
        if not 1 <= i <= system.N:
            raise ModelError(
                "MALFORMED_SEQUENCE",
                f"nu({t}) = {i} is not a subsystem index in 1..{system.N}",
                {"t": t},
            )


def is_admissible(system: SwitchedSystem, seq: HybridControlSequence, eps: float = 0.0) -> bool:
    _check_indices(system, seq.nu)
    if any(pair not in system.switch_set for pair in zip(seq.nu[:-1], seq.nu[1:])):
        return False
    return all(system.control_set.contains(mu, eps) for mu in seq.mu)


def simulate(system: SwitchedSystem, xi: Sequence[float], seq: HybridControlSequence) -> Trajectory:
    """Run the recursion from x(0) = xi. Admissibility is not enforced here."""
    x = np.asarray(xi, dtype=float)
    if x.shape != (system.d,):
        raise ModelError("DIMENSION_MISMATCH", f"initial state has shape {x.shape}, expected ({system.d},)")
    _check_indices(system, seq.nu)
    states = [x]
    for i, mu in zip(seq.nu, seq.mu):
        x = system.subsystems[i - 1].step(x, mu)
        states.append(x)
    return Trajectory(states)


def reaches_origin(traj: Trajectory, eps: float = EPS_ZERO) -> bool:
    return float(np.max(np.abs(traj.final_state), initial=0.0)) <= eps


def self_loop_indices(switch_set: Iterable[Tuple[int, int]]) -> FrozenSet[int]:
    loops: Set[int] = {i for i, j in switch_set if i == j}
    return frozenset(loops)
