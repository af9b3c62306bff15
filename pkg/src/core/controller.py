#!/usr/bin/env python3

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.abstraction import (
    Abstraction,
    ValidationReport,
    ValidationVerdict,
    build_support_abstraction,
    build_support_lattice,
    classify,
    validate_abstraction,
)
from core.dynamics import is_admissible, reaches_origin, self_loop_indices, simulate, sparsity
from core.errors import ControlError, GraphError, RegionError
from core.models import (
    EPS_ZERO,
    HybridControlSequence,
    SolverSettings,
    SparsityCount,
    SwitchedSystem,
    Trajectory,
)
from core.padding import choose_initial_index, pad_discrete, padding_switches
from core.transition_graph import BetaKind, Edge, EdgeLabel, TransitionGraph, build_graph
from core.walk_search import Walk, find_hands_off_walk, is_T_walk, walk_vertices, walk_weight

logger = logging.getLogger(__name__)

__all__ = [
    "SolveReport",
    "SolveResult",
    "SolveStatus",
    "build_abstraction",
    "choose_initial_index",
    "pad_discrete",
    "realize",
    "solve",
]

AbstractionChoice = Union[str, Abstraction]


@dataclass(frozen=True)
class SolveReport:
    sequence: HybridControlSequence
    trajectory: Trajectory
    walk: Walk
    walk_edges: Tuple[Edge, ...]
    walk_weight: int
    sparsity: SparsityCount
    reached_origin: bool
    start_region: int
    padding_switches: int = 0
    notes: Tuple[str, ...] = ()

    def with_notes(self, notes: Iterable[str]) -> "SolveReport":
        return SolveReport(
            self.sequence, self.trajectory, self.walk, self.walk_edges, self.walk_weight,
            self.sparsity, self.reached_origin, self.start_region, self.padding_switches,
            self.notes + tuple(notes),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nu": list(self.sequence.nu),
            "mu": list(self.sequence.mu),
            "T": self.sequence.T,
            "trajectory": self.trajectory.states.tolist(),
            "walk": {
                "start": self.walk.start,
                "edges": [
                    {"id": e.id, "src": e.src, "dst": e.dst, "alpha": e.alpha, "beta": e.label.render_beta()}
                    for e in self.walk_edges
                ],
            },
            "walk_weight": self.walk_weight,
            "sparsity": {
                "switches": self.sparsity.n_switch,
                "controls": self.sparsity.n_control,
                "total": self.sparsity.total,
            },
            "padding_switches": self.padding_switches,
            "reached_origin": self.reached_origin,
            "start_region": self.start_region,
            "notes": list(self.notes),
        }


class SolveStatus(Enum):
    SOLVED = "solved"
    INFEASIBLE_NO_WALK = "infeasible_no_walk"
    INFEASIBLE_INVALID_ABSTRACTION = "infeasible_invalid_abstraction"


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    report: Optional[SolveReport] = None
    validation: Optional[ValidationReport] = None
    graph: Optional[TransitionGraph] = field(default=None, compare=False)
    start_region: Optional[int] = None
    notes: Tuple[str, ...] = ()

    @property
    def solved(self) -> bool:
        return self.status is SolveStatus.SOLVED

    @property
    def total(self) -> Optional[int]:
        return self.report.sparsity.total if self.report is not None else None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "status": self.status.value,
            "start_region": self.start_region,
            "notes": list(self.notes),
            "validation": self.validation.verdict.value if self.validation is not None else None,
        }
        if self.report is not None:
            data.update(self.report.to_dict())
        return data


def _label_control(label: EdgeLabel, x: np.ndarray, system: SwitchedSystem) -> float:
    default = system.control_set.default_nonzero() if label.kind is BetaKind.FREE_NONZERO else None
    return label.control(x, default)


def realize(
    system: SwitchedSystem,
    graph: TransitionGraph,
    walk: Walk,
    xi: Sequence[float],
    T: int,
    eps: float = EPS_ZERO,
) -> SolveReport:
    """Turn a hands-off walk into a hybrid control sequence of length T.

    Labels are evaluated on forward-simulated states. After the walk the
    discrete signal is padded and the continuous control is zero.
    """
    abstraction = graph.abstraction
    if abstraction is None:
        raise GraphError("INVALID_ABSTRACTION", "the transition graph carries no abstraction")
    if T < 1:
        raise ControlError("INVALID_ARGUMENT", f"horizon must be at least 1, got {T}")
    x = np.asarray(xi, dtype=float)
    start = classify(abstraction, x, eps)
    if start != walk.start:
        raise ControlError(
            "START_REGION_MISMATCH",
            f"initial state lies in v{start} but the walk starts at v{walk.start}",
            {"state_region": start, "walk_start": walk.start},
        )
    vertices = walk_vertices(graph, walk)
    if not is_T_walk(graph, system, walk, T):
        raise ControlError("INVALID_WALK", f"walk is not a {T}-walk of the switch set")

    nu: List[int] = []
    mu: List[float] = []
    for t, edge in enumerate(walk.edges(graph)):
        u = _label_control(edge.label, x, system)
        if not system.control_set.contains(u, eps):
            raise ControlError(
                "CONTROL_OUT_OF_BOUNDS",
                f"edge {edge.id} asks for mu({t}) = {u:.12g} outside the control set",
                {"t": t, "edge": edge.id, "mu": u},
            )
        x = system.subsystems[edge.alpha - 1].step(x, u)
        try:
            reached = classify(abstraction, x, eps)
        except RegionError as exc:
            raise ControlError("REGION_DEVIATION", f"x({t + 1}) left the abstraction: {exc.message}", {"t": t + 1}) from exc
        if reached != vertices[t + 1]:
            raise ControlError(
                "REGION_DEVIATION",
                f"x({t + 1}) lies in v{reached} but edge {edge.id} leads to v{vertices[t + 1]}",
                {"t": t + 1, "edge": edge.id, "region": reached},
            )
        nu.append(edge.alpha)
        mu.append(u)

    L = T - walk.r
    loops = self_loop_indices(system.switch_set)
    if walk.r:
        tail = pad_discrete(system.switch_set, loops, nu[-1], L)
        tail_switches = padding_switches(nu[-1], tail)
    else:
        first = choose_initial_index(system, L)
        tail = (first,) + pad_discrete(system.switch_set, loops, first, L - 1)
        tail_switches = padding_switches(first, tail)
    nu.extend(tail)
    mu.extend([0.0] * L)

    sequence = HybridControlSequence(tuple(nu), tuple(mu))
    trajectory = simulate(system, xi, sequence)
    report = SolveReport(
        sequence=sequence,
        trajectory=trajectory,
        walk=walk,
        walk_edges=walk.edges(graph),
        walk_weight=walk_weight(graph, walk),
        sparsity=sparsity(sequence, eps),
        reached_origin=reaches_origin(trajectory, eps),
        start_region=start,
        padding_switches=tail_switches,
    )
    logger.debug("Realized nu=%s mu=%s", sequence.nu, sequence.mu)
    return report


def build_abstraction(system: SwitchedSystem, choice: AbstractionChoice, eps: float = EPS_ZERO) -> Abstraction:
    if isinstance(choice, Abstraction):
        return choice
    if choice == "support":
        return build_support_abstraction(system)
    if choice == "lattice":
        return build_support_lattice(system, eps)
    raise RegionError("UNKNOWN_ABSTRACTION", f"unknown abstraction {choice!r}; use 'support', 'lattice' or explicit regions")


def erratum_notes(published_total: Optional[int], total: int) -> Tuple[str, ...]:
    if published_total is None or published_total == total:
        return ()
    return (
        f"published total {published_total} differs from the realized sparsity {total}; "
        "the count here is switches plus nonzero controls of the returned sequence",
    )


def solve(
    system: SwitchedSystem,
    abstraction_choice: AbstractionChoice,
    xi: Sequence[float],
    T: int,
    settings: Optional[SolverSettings] = None,
    extra_edges: Iterable[Tuple[int, int, EdgeLabel]] = (),
    published_total: Optional[int] = None,
) -> SolveResult:
    """Abstraction, validation, graph, walk search and realization in one pass."""
    settings = settings or SolverSettings()
    eps = settings.epsilon
    if T < 1:
        raise ControlError("INVALID_ARGUMENT", f"horizon must be at least 1, got {T}")

    abstraction = build_abstraction(system, abstraction_choice, eps)
    logger.info("Abstraction '%s' with %d regions", abstraction.name, len(abstraction.regions))
    validation = validate_abstraction(system, abstraction, settings.samples, settings.seed, eps)
    start = classify(abstraction, xi, eps)
    if validation.verdict is ValidationVerdict.INVALID:
        logger.warning("Abstraction '%s' is invalid for this system", abstraction.name)
        return SolveResult(SolveStatus.INFEASIBLE_INVALID_ABSTRACTION, validation=validation, start_region=start)

    try:
        graph = build_graph(system, abstraction, extra_edges, eps, settings.samples, settings.seed)
    except GraphError as exc:
        if exc.code != "INVALID_ABSTRACTION":
            raise
        logger.warning("Graph construction rejected the abstraction: %s", exc.message)
        return SolveResult(SolveStatus.INFEASIBLE_INVALID_ABSTRACTION, validation=validation, start_region=start)

    found = find_hands_off_walk(graph, system, start, T, count_padding=True)
    if found is None:
        logger.warning("No hands-off walk from v%d within horizon %d", start, T)
        return SolveResult(SolveStatus.INFEASIBLE_NO_WALK, validation=validation, graph=graph, start_region=start)

    walk, _ = found
    report = realize(system, graph, walk, xi, T, eps)
    if not is_admissible(system, report.sequence, eps) or not report.reached_origin:
        raise ControlError(
            "VERIFICATION_FAILED",
            "realized sequence is not admissible or misses the origin",
            {"reached_origin": report.reached_origin},
        )
    notes = erratum_notes(published_total, report.sparsity.total)
    for note in notes:
        logger.warning(note)
    report = report.with_notes(notes)
    logger.info("Solved: walk weight %d, sparsity %d", report.walk_weight, report.sparsity.total)
    return SolveResult(SolveStatus.SOLVED, report, validation, graph, start, notes)
