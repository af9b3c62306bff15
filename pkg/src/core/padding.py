#!/usr/bin/env python3

"""Discrete tails for horizons longer than the chosen walk.

Once the state sits at the origin, mu = 0 keeps it there under every
subsystem, so only the switching signal has to be extended. The rule tries,
from the previous index: staying put, moving to the smallest index that has
a self-loop, and finally moving to the smallest admissible successor.
"""

from typing import AbstractSet, Iterable, Optional, Tuple

from core.dynamics import self_loop_indices
from core.errors import ControlError
from core.models import SwitchedSystem

SwitchSet = AbstractSet[Tuple[int, int]]


def _successors(switch_set: SwitchSet, i: int) -> Tuple[int, ...]:
    return tuple(sorted(j for a, j in switch_set if a == i))


def pad_discrete(switch_set: SwitchSet, self_loops: Iterable[int], last: int, L: int) -> Tuple[int, ...]:
    if L < 0:
        raise ControlError("INVALID_ARGUMENT", f"padding length must be nonnegative, got {L}")
    loops = sorted(self_loops)
    tail = []
    prev = last
    for _ in range(L):
        successors = _successors(switch_set, prev)
        if not successors:
            raise ControlError(
                "NO_ADMISSIBLE_SUCCESSOR",
                f"subsystem {prev} has no admissible successor",
                {"subsystem": prev, "position": len(tail)},
            )
        if prev in successors:
            nxt = prev
        else:
            nxt = next((i for i in loops if i in successors), successors[0])
        tail.append(nxt)
        prev = nxt
    return tuple(tail)


def padding_switches(last: int, tail: Iterable[int]) -> int:
    """Switches contributed by `tail`, counting the step away from `last`."""
    count = 0
    prev = last
    for i in tail:
        count += i != prev
        prev = i
    return count


def padding_cost(switch_set: SwitchSet, self_loops: Iterable[int], last: int, L: int) -> Optional[int]:
    """Switches of the tail `pad_discrete` would append, or None when no tail exists."""
    try:
        tail = pad_discrete(switch_set, self_loops, last, L)
    except ControlError:
        return None
    return padding_switches(last, tail)


def can_pad(switch_set: SwitchSet, self_loops: Iterable[int], last: int, L: int) -> bool:
    return padding_cost(switch_set, self_loops, last, L) is not None


def choose_initial_index(system: SwitchedSystem, L: int) -> int:
    """First index of an all-padding sequence of length L (a start at the origin)."""
    if L < 1:
        raise ControlError("INVALID_ARGUMENT", f"sequence length must be at least 1, got {L}")
    loops = self_loop_indices(system.switch_set)
    if loops:
        return min(loops)
    for i in system.indices():
        if can_pad(system.switch_set, loops, i, L - 1):
            return i
    raise ControlError("NO_ADMISSIBLE_SUCCESSOR", f"no admissible discrete sequence of length {L} exists")
