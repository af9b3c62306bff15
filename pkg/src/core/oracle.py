#!/usr/bin/env python3

"""Exhaustive reference solver for small horizons.

For a fixed switching signal nu the final state is affine in the continuous
controls, x(T) = (prod A) xi + Phi mu, so the sparsest mu is found by trying
supports of growing size. The outer search walks every admissible nu
depth first and keeps the lexicographically first optimum.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.controller import SolveResult
from core.errors import OracleError
from core.models import HybridControlSequence, SwitchedSystem

logger = logging.getLogger(__name__)

ORACLE_EPS = 1e-7

OracleOptimum = Tuple[int, HybridControlSequence]


@dataclass(frozen=True)
class TransitionMatrix:
    Phi: np.ndarray
    rhs: np.ndarray

    def final_state(self, mu: Sequence[float]) -> np.ndarray:
        return self.Phi @ np.asarray(mu, dtype=float) - self.rhs


def transition_matrix(system: SwitchedSystem, nu: Sequence[int], xi: Sequence[float], T: int) -> TransitionMatrix:
    if len(nu) != T:
        raise OracleError("INVALID_ARGUMENT", f"nu has length {len(nu)}, expected {T}")
    d = system.d
    Phi = np.zeros((d, T))
    P = np.eye(d)
    for k in range(T - 1, -1, -1):
        Phi[:, k] = P @ system.b(nu[k])
        P = P @ system.A(nu[k])
    rhs = -(P @ np.asarray(xi, dtype=float))
    return TransitionMatrix(Phi, rhs)


def min_l0_continuous(
    system: SwitchedSystem,
    nu: Sequence[int],
    xi: Sequence[float],
    T: int,
    eps: float = ORACLE_EPS,
    max_size: Optional[int] = None,
) -> Optional[Tuple[Tuple[float, ...], int]]:
    """Sparsest mu driving x(T) to zero for this nu, or None.

    Supports are tried by size, then lexicographically. `max_size` caps the
    support size searched.
    """
    tm = transition_matrix(system, nu, xi, T)
    limit = T if max_size is None else min(T, max_size)
    if float(np.max(np.abs(tm.rhs), initial=0.0)) <= eps:
        return (0.0,) * T, 0
    for size in range(1, limit + 1):
        for support in itertools.combinations(range(T), size):
            cols = list(support)
            sol = np.linalg.lstsq(tm.Phi[:, cols], tm.rhs, rcond=None)[0]
            residual = tm.Phi[:, cols] @ sol - tm.rhs
            if float(np.max(np.abs(residual))) > eps:
                continue
            if not all(system.control_set.contains(float(v), eps) for v in sol):
                continue
            mu = np.zeros(T)
            mu[cols] = sol
            return tuple(float(v) for v in mu), size
    return None


def _viability(system: SwitchedSystem, T: int) -> List[Dict[int, bool]]:
    """viable[L][i]: some admissible sequence of L more indices follows i."""
    viable = [{i: True for i in system.indices()}]
    for _ in range(1, T):
        prev = viable[-1]
        viable.append({i: any(prev[j] for j in system.successors(i)) for i in system.indices()})
    return viable


class _Search:
    def __init__(self, system: SwitchedSystem, xi: Sequence[float], T: int, eps: float):
        self.system = system
        self.xi = xi
        self.T = T
        self.eps = eps
        self.viable = _viability(system, T)
        self.best: Optional[Tuple[int, Tuple[int, ...], Tuple[float, ...]]] = None
        self.evaluated = 0

    def run(self, first: int) -> None:
        if self.viable[self.T - 1][first]:
            self._extend([first], 0)

    def _extend(self, prefix: List[int], switches: int) -> None:
        if self.best is not None and switches >= self.best[0]:
            return
        if len(prefix) == self.T:
            self._evaluate(tuple(prefix), switches)
            return
        remaining = self.T - len(prefix) - 1
        last = prefix[-1]
        for j in self.system.successors(last):
            if not self.viable[remaining][j]:
                continue
            prefix.append(j)
            self._extend(prefix, switches + (j != last))
            prefix.pop()

    def _evaluate(self, nu: Tuple[int, ...], switches: int) -> None:
        self.evaluated += 1
        max_size = None if self.best is None else self.best[0] - switches - 1
        if max_size is not None and max_size < 0:
            return
        found = min_l0_continuous(self.system, nu, self.xi, self.T, self.eps, max_size)
        if found is None:
            return
        mu, k = found
        total = switches + k
        if self.best is None or total < self.best[0]:
            logger.debug("Oracle improvement: nu=%s total=%d", nu, total)
            self.best = (total, nu, mu)


def brute_force_optimum(
    system: SwitchedSystem,
    xi: Sequence[float],
    T: int,
    eps: float = ORACLE_EPS,
    budget: int = 1_000_000,
    max_horizon: int = 10,
    jobs: int = 1,
) -> Optional[OracleOptimum]:
    """Global minimum of switches plus nonzero controls over admissible sequences."""
    if T < 1:
        raise OracleError("INVALID_ARGUMENT", f"horizon must be at least 1, got {T}")
    if T > max_horizon or system.N ** T > budget:
        raise OracleError(
            "BUDGET_EXCEEDED",
            f"{system.N}^{T} switching sequences exceed the budget",
            {"N": system.N, "T": T, "budget": budget, "max_horizon": max_horizon},
        )

    def search_from(first: int) -> _Search:
        search = _Search(system, xi, T, eps)
        search.run(first)
        return search

    firsts = list(system.indices())
    if jobs > 1 and len(firsts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            searches = list(pool.map(search_from, firsts))
    else:
        searches = [search_from(i) for i in firsts]

    results = [s.best for s in searches if s.best is not None]
    evaluated = sum(s.evaluated for s in searches)
    if not results:
        logger.info("Oracle: no feasible sequence among %d evaluated", evaluated)
        return None
    total, nu, mu = min(results, key=lambda r: (r[0], r[1]))
    logger.info("Oracle optimum %d (%d switching sequences evaluated)", total, evaluated)
    return total, HybridControlSequence(nu, mu)


class ComparisonVerdict(Enum):
    MATCH = "match"
    GRAPH_SUBOPTIMAL = "graph_suboptimal"
    GRAPH_INFEASIBLE_ORACLE_FEASIBLE = "graph_infeasible_oracle_feasible"
    BOTH_INFEASIBLE = "both_infeasible"
    ORACLE_INCONSISTENT = "oracle_inconsistent"


@dataclass(frozen=True)
class ComparisonReport:
    verdict: ComparisonVerdict
    graph_total: Optional[int]
    oracle_total: Optional[int]
    difference: Optional[int]
    graph_status: str
    oracle_witness: Optional[HybridControlSequence] = None

    def to_dict(self) -> Dict[str, Any]:
        witness = None
        if self.oracle_witness is not None:
            witness = {"nu": list(self.oracle_witness.nu), "mu": list(self.oracle_witness.mu)}
        return {
            "verdict": self.verdict.value,
            "graph_total": self.graph_total,
            "oracle_total": self.oracle_total,
            "difference": self.difference,
            "graph_status": self.graph_status,
            "oracle_witness": witness,
        }


def compare(result: SolveResult, oracle: Optional[OracleOptimum]) -> ComparisonReport:
    graph_total = result.total
    oracle_total = oracle[0] if oracle is not None else None
    witness = oracle[1] if oracle is not None else None
    difference = None
    if graph_total is None and oracle_total is None:
        verdict = ComparisonVerdict.BOTH_INFEASIBLE
    elif graph_total is None:
        verdict = ComparisonVerdict.GRAPH_INFEASIBLE_ORACLE_FEASIBLE
    elif oracle_total is None:
        verdict = ComparisonVerdict.ORACLE_INCONSISTENT
    else:
        difference = graph_total - oracle_total
        if difference == 0:
            verdict = ComparisonVerdict.MATCH
        elif difference > 0:
            verdict = ComparisonVerdict.GRAPH_SUBOPTIMAL
        else:
            verdict = ComparisonVerdict.ORACLE_INCONSISTENT
    if verdict not in (ComparisonVerdict.MATCH, ComparisonVerdict.BOTH_INFEASIBLE):
        logger.warning("Graph result and oracle disagree: %s", verdict.value)
    return ComparisonReport(verdict, graph_total, oracle_total, difference, result.status.value, witness)
