#!/usr/bin/env python3

import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.errors import ModelError


# Absolute tolerance for "is this entry zero" tests.
EPS_ZERO = 1e-9


class ConfigStatus(Enum):
    SUCCESS = "success"
    ERROR = "error"
    WARNING = "warning"


class DomainKind(Enum):
    ALL = "reals"
    BOX = "box"
    ORTHANT = "orthant"


def _frozen_array(values: Any, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateDomain:
    """The state set X: all of R^d, a box containing 0, or a closed orthant."""

    kind: DomainKind = DomainKind.ALL
    lower: Tuple[float, ...] = ()
    upper: Tuple[float, ...] = ()
    signs: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind is DomainKind.BOX:
            if len(self.lower) != len(self.upper) or not self.lower:
                raise ModelError("INVALID_DOMAIN", "box bounds must be non-empty and of equal length")
            for k, (lo, hi) in enumerate(zip(self.lower, self.upper)):
                if lo > hi:
                    raise ModelError("INVALID_DOMAIN", f"box lower bound exceeds upper bound at coordinate {k + 1}")
                if lo > 0 or hi < 0:
                    raise ModelError("INVALID_DOMAIN", f"box does not contain 0 at coordinate {k + 1}")
        elif self.kind is DomainKind.ORTHANT:
            if not self.signs or any(s not in (1, -1) for s in self.signs):
                raise ModelError("INVALID_DOMAIN", "orthant signs must be +1 or -1")

    @classmethod
    def reals(cls) -> "StateDomain":
        return cls(DomainKind.ALL)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "StateDomain":
        return cls(DomainKind.BOX, tuple(float(v) for v in lower), tuple(float(v) for v in upper))

    @classmethod
    def orthant(cls, signs: Sequence[int]) -> "StateDomain":
        return cls(DomainKind.ORTHANT, signs=tuple(int(s) for s in signs))

    @property
    def dimension(self) -> Optional[int]:
        if self.kind is DomainKind.BOX:
            return len(self.lower)
        if self.kind is DomainKind.ORTHANT:
            return len(self.signs)
        return None

    def bounds(self, k: int) -> Tuple[float, float]:
        """Closed interval of coordinate k (0-based)."""
        if self.kind is DomainKind.BOX:
            return self.lower[k], self.upper[k]
        if self.kind is DomainKind.ORTHANT:
            return (0.0, math.inf) if self.signs[k] > 0 else (-math.inf, 0.0)
        return -math.inf, math.inf

    def allowed_signs(self, k: int) -> Tuple[int, ...]:
        lo, hi = self.bounds(k)
        return tuple(s for s, ok in ((1, hi > 0), (-1, lo < 0)) if ok)

    def contains(self, x: np.ndarray, eps: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind is DomainKind.ALL:
            return bool(np.all(np.isfinite(x)))
        lo, hi = zip(*(self.bounds(k) for k in range(len(x))))
        return bool(np.all(x >= np.array(lo) - eps) and np.all(x <= np.array(hi) + eps))

    def to_dict(self) -> Dict[str, Any]:
        if self.kind is DomainKind.BOX:
            return {"type": "box", "lower": list(self.lower), "upper": list(self.upper)}
        if self.kind is DomainKind.ORTHANT:
            return {"type": "orthant", "signs": ["+" if s > 0 else "-" for s in self.signs]}
        return {"type": "reals"}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StateDomain":
        kind = DomainKind(data.get("type", "reals"))
        if kind is DomainKind.BOX:
            return cls.box(data["lower"], data["upper"])
        if kind is DomainKind.ORTHANT:
            return cls.orthant([_parse_sign(s) for s in data["signs"]])
        return cls.reals()


def _parse_sign(value: Any) -> int:
    if value in ("+", 1, "1", "+1"):
        return 1
    if value in ("-", -1, "-1"):
        return -1
    raise ModelError("INVALID_DOMAIN", f"orthant sign must be '+' or '-', got {value!r}")


@dataclass(frozen=True)
class ControlSet:
    """Closed interval U of admissible continuous control values; must contain 0."""

    lower: float = -math.inf
    upper: float = math.inf
    free_nonzero_default: Optional[float] = None

    def __post_init__(self):
        if self.lower > self.upper:
            raise ModelError("INVALID_CONTROL_SET", "control set lower bound exceeds upper bound")
        if not self.lower <= 0.0 <= self.upper:
            raise ModelError("ZERO_NOT_IN_CONTROL_SET", "the control set must contain 0")
        if self.free_nonzero_default is not None:
            if self.free_nonzero_default == 0.0 or not self.contains(self.free_nonzero_default):
                raise ModelError("INVALID_CONTROL_SET", "free_nonzero_default must be a nonzero member of the control set")

    def contains(self, mu: float, eps: float = 0.0) -> bool:
        return self.lower - eps <= mu <= self.upper + eps

    def contains_interval(self, lo: float, hi: float, eps: float = 0.0) -> bool:
        return self.contains(lo, eps) and self.contains(hi, eps)

    def default_nonzero(self) -> float:
        """Value used for labels that accept any nonzero control."""
        if self.free_nonzero_default is not None:
            return self.free_nonzero_default
        if self.contains(1.0):
            return 1.0
        candidates = []
        if self.upper > 0.0:
            candidates.append(self.upper / 2.0)
        if self.lower < 0.0:
            candidates.append(self.lower / 2.0 if math.isfinite(self.lower) else -1.0)
        if not candidates:
            raise ModelError("NO_NONZERO_CONTROL", "the control set is {0}")
        return min(candidates, key=lambda v: (abs(v), v < 0))


class SubsystemDynamics:
    """One mode x -> A x + b mu."""

    __slots__ = ("A", "b")

    def __init__(self, A: Any, b: Any):
        A_arr = _frozen_array(A)
        b_arr = _frozen_array(b).reshape(-1)
        if A_arr.ndim != 2 or A_arr.shape[0] != A_arr.shape[1]:
            raise ModelError("DIMENSION_MISMATCH", f"A must be square, got shape {A_arr.shape}")
        if b_arr.shape[0] != A_arr.shape[0]:
            raise ModelError("DIMENSION_MISMATCH", f"b has length {b_arr.shape[0]}, expected {A_arr.shape[0]}")
        b_arr.setflags(write=False)
        object.__setattr__(self, "A", A_arr)
        object.__setattr__(self, "b", b_arr)

    def __setattr__(self, name, value):
        raise AttributeError("SubsystemDynamics is immutable")

    def __reduce__(self):
        return SubsystemDynamics, (self.A, self.b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubsystemDynamics):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.b, other.b)

    def __hash__(self):
        return hash((self.A.tobytes(), self.b.tobytes()))

    def __repr__(self) -> str:
        return f"SubsystemDynamics(A={self.A.tolist()}, b={self.b.tolist()})"

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    def step(self, x: np.ndarray, mu: float) -> np.ndarray:
        return self.A @ x + self.b * mu


@dataclass(frozen=True)
class SwitchedSystem:
    """x(t+1) = A_nu(t) x(t) + b_nu(t) mu(t); subsystem indices are 1-based."""

    subsystems: Tuple[SubsystemDynamics, ...]
    switch_set: FrozenSet[Tuple[int, int]]
    control_set: ControlSet = field(default_factory=ControlSet)
    domain: StateDomain = field(default_factory=StateDomain)

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        object.__setattr__(self, "switch_set", frozenset((int(i), int(j)) for i, j in self.switch_set))
        if not self.subsystems:
            raise ModelError("DIMENSION_MISMATCH", "at least one subsystem is required")
        d = self.subsystems[0].dimension
        for i, sub in enumerate(self.subsystems, start=1):
            if sub.dimension != d:
                raise ModelError("DIMENSION_MISMATCH", f"subsystem {i} has dimension {sub.dimension}, expected {d}")
        if self.domain.dimension is not None and self.domain.dimension != d:
            raise ModelError("DIMENSION_MISMATCH", f"domain has dimension {self.domain.dimension}, expected {d}")
        for pair in self.switch_set:
            if not all(1 <= p <= len(self.subsystems) for p in pair):
                raise ModelError("INVALID_SWITCH_PAIR", f"switch pair {pair} references an unknown subsystem")

    @property
    def d(self) -> int:
        return self.subsystems[0].dimension

    @property
    def N(self) -> int:
        return len(self.subsystems)

    def A(self, i: int) -> np.ndarray:
        return self.subsystems[i - 1].A

    def b(self, i: int) -> np.ndarray:
        return self.subsystems[i - 1].b

    def indices(self) -> range:
        return range(1, self.N + 1)

    def successors(self, i: int) -> Tuple[int, ...]:
        return tuple(j for j in self.indices() if (i, j) in self.switch_set)

    def with_changes(self, **changes) -> "SwitchedSystem":
        data = {
            "subsystems": self.subsystems,
            "switch_set": self.switch_set,
            "control_set": self.control_set,
            "domain": self.domain,
        }
        data.update(changes)
        return SwitchedSystem(**data)


@dataclass(frozen=True)
class HybridControlSequence:
    nu: Tuple[int, ...]
    mu: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(int(i) for i in self.nu))
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        if len(self.nu) != len(self.mu):
            raise ModelError("MALFORMED_SEQUENCE", f"nu has length {len(self.nu)} but mu has length {len(self.mu)}")
        if not self.nu:
            raise ModelError("MALFORMED_SEQUENCE", "sequences must have length at least 1")

    @property
    def T(self) -> int:
        return len(self.nu)


class Trajectory:
    """States x(0), ..., x(T) stacked row-wise."""

    __slots__ = ("states",)

    def __init__(self, states: Iterable[Any]):
        arr = _frozen_array([np.asarray(s, dtype=float) for s in states])
        object.__setattr__(self, "states", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Trajectory is immutable")

    def __reduce__(self):
        return Trajectory, (self.states,)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return np.array_equal(self.states, other.states)

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, t: int) -> np.ndarray:
        return self.states[t]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


class SparsityCount(NamedTuple):
    n_switch: int
    n_control: int
    total: int


@dataclass
class SolverSettings:
    epsilon: float = EPS_ZERO
    oracle_epsilon: float = 1e-7
    samples: int = 200
    seed: int = 0
    cap: int = 100_000
    budget: int = 1_000_000
    max_horizon: int = 10
    jobs: int = 1

    @classmethod
    def from_env(cls):
        return cls(
            epsilon=float(os.environ.get("HANDSOFF_EPSILON", str(EPS_ZERO))),
            oracle_epsilon=float(os.environ.get("HANDSOFF_ORACLE_EPSILON", "1e-7")),
            samples=int(os.environ.get("HANDSOFF_SAMPLES", "200")),
            seed=int(os.environ.get("HANDSOFF_SEED", "0")),
            cap=int(os.environ.get("HANDSOFF_CAP", "100000")),
            budget=int(os.environ.get("HANDSOFF_BUDGET", "1000000")),
            max_horizon=int(os.environ.get("HANDSOFF_MAX_HORIZON", "10")),
            jobs=int(os.environ.get("HANDSOFF_JOBS", "1")),
        )
