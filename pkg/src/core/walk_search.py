#!/usr/bin/env python3

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import networkx as nx

from core.dynamics import self_loop_indices
from core.errors import WalkError
from core.models import SwitchedSystem
from core.padding import can_pad, padding_cost
from core.transition_graph import Edge, TransitionGraph

logger = logging.getLogger(__name__)

ORIGIN_VERTEX = 0


@dataclass(frozen=True)
class Walk:
    """A chain of edge ids; `start` fixes the vertex when the chain is empty."""

    start: int
    edge_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edge_ids", tuple(int(e) for e in self.edge_ids))

    @property
    def r(self) -> int:
        return len(self.edge_ids)

    def edges(self, graph: TransitionGraph) -> Tuple[Edge, ...]:
        return tuple(graph.edge(e) for e in self.edge_ids)

    def alphas(self, graph: TransitionGraph) -> Tuple[int, ...]:
        return tuple(graph.edge(e).alpha for e in self.edge_ids)


def walk_vertices(graph: TransitionGraph, walk: Walk) -> Tuple[int, ...]:
    vertices = [walk.start]
    for m, edge in enumerate(walk.edges(graph)):
        if edge.src != vertices[-1]:
            raise WalkError(
                "INCONSISTENT_WALK",
                f"edge {edge.id} leaves v{edge.src} but the walk is at v{vertices[-1]}",
                {"position": m},
            )
        vertices.append(edge.dst)
    return tuple(vertices)


def is_T_walk(graph: TransitionGraph, system: SwitchedSystem, walk: Walk, T: int) -> bool:
    if walk.r > T:
        return False
    alphas = walk.alphas(graph)
    return all(pair in system.switch_set for pair in zip(alphas[:-1], alphas[1:]))


def is_paddable(graph: TransitionGraph, system: SwitchedSystem, walk: Walk, T: int) -> bool:
    """True when the walk ends at step T or its last subsystem can be held until T."""
    if walk.r == 0 or walk.r >= T:
        return True
    last = graph.edge(walk.edge_ids[-1]).alpha
    return can_pad(system.switch_set, self_loop_indices(system.switch_set), last, T - walk.r)


def _edge_cost(edge: Edge, last_alpha: Optional[int]) -> int:
    switch = int(last_alpha is not None and edge.alpha != last_alpha)
    return switch + int(not edge.label.is_zero)


def walk_weight(graph: TransitionGraph, walk: Walk) -> int:
    weight = 0
    last = None
    for edge in walk.edges(graph):
        weight += _edge_cost(edge, last)
        last = edge.alpha
    return weight


def _distances_to(graph: TransitionGraph, dst: int) -> Dict[int, int]:
    reverse = graph.to_networkx().reverse(copy=True)
    if dst not in reverse:
        return {}
    return nx.single_source_shortest_path_length(reverse, dst)


def enumerate_T_walks(
    graph: TransitionGraph,
    system: SwitchedSystem,
    src: int,
    dst: int,
    T: int,
    cap: int = 100_000,
) -> List[Walk]:
    """Every T-walk from `src` to `dst`, ordered by length and then by edge ids."""
    if cap < 1:
        raise WalkError("INVALID_ARGUMENT", "cap must be at least 1")
    dist = _distances_to(graph, dst)
    found: List[Walk] = []
    if src == dst == ORIGIN_VERTEX:
        found.append(Walk(src))
    if src not in dist:
        return found

    def extend(vertex: int, path: List[int], last_alpha: Optional[int]) -> None:
        for edge in graph.out_edges(vertex):
            if last_alpha is not None and (last_alpha, edge.alpha) not in system.switch_set:
                continue
            remaining = dist.get(edge.dst)
            if remaining is None or len(path) + 1 + remaining > T:
                continue
            path.append(edge.id)
            if edge.dst == dst:
                found.append(Walk(src, tuple(path)))
                if len(found) > cap:
                    raise WalkError(
                        "CAP_EXCEEDED",
                        f"more than {cap} walks from v{src} to v{dst}",
                        {"cap": cap, "reached": len(found)},
                    )
            if len(path) < T:
                extend(edge.dst, path, edge.alpha)
            path.pop()

    extend(src, [], None)
    found.sort(key=lambda w: (w.r, w.edge_ids))
    return found


Label = Tuple[int, Tuple[int, ...]]


def find_hands_off_walk(
    graph: TransitionGraph,
    system: SwitchedSystem,
    src: int,
    T: int,
    count_padding: bool = False,
) -> Optional[Tuple[Walk, int]]:
    """Minimum-weight T-walk from `src` to the origin vertex.

    Dynamic programming over (step, vertex, last alpha) keeps the best
    (weight, edge ids) per state. Ties go to the shorter walk, then to the
    lexicographically smallest id sequence. A walk shorter than T is only
    accepted when its last subsystem can be padded to the horizon.

    With `count_padding` the candidates are ranked by walk weight plus the
    switches of their padding tail, which depends only on the last alpha
    and the step. The returned weight is the walk weight either way.
    """
    if src == ORIGIN_VERTEX:
        return Walk(src), 0

    loops = self_loop_indices(system.switch_set)
    layer: Dict[Tuple[int, Optional[int]], Label] = {(src, None): (0, ())}
    best: Optional[Tuple[int, int, Tuple[int, ...], int]] = None
    for step in range(1, T + 1):
        nxt: Dict[Tuple[int, Optional[int]], Label] = {}
        for (vertex, last), (weight, ids) in layer.items():
            if vertex == ORIGIN_VERTEX:
                continue
            for edge in graph.out_edges(vertex):
                if last is not None and (last, edge.alpha) not in system.switch_set:
                    continue
                label = (weight + _edge_cost(edge, last), ids + (edge.id,))
                key = (edge.dst, edge.alpha)
                if key not in nxt or label < nxt[key]:
                    nxt[key] = label
        for (vertex, alpha), (weight, ids) in nxt.items():
            if vertex != ORIGIN_VERTEX:
                continue
            tail = padding_cost(system.switch_set, loops, alpha, T - step)
            if tail is None:
                logger.debug("Walk %s ends in subsystem %d, which cannot be padded by %d steps", ids, alpha, T - step)
                continue
            cost = weight + tail if count_padding else weight
            candidate = (cost, step, ids, weight)
            if best is None or candidate < best:
                best = candidate
        layer = nxt
        if not layer:
            break

    if best is None:
        logger.info("No hands-off walk from v%d within %d steps", src, T)
        return None
    cost, _, ids, weight = best
    logger.info("Hands-off walk from v%d: %d edges, weight %d, ranked at %d", src, len(ids), weight, cost)
    return Walk(src, ids), weight
