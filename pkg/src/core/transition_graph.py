#!/usr/bin/env python3

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from core.abstraction import (
    Abstraction,
    RegionKind,
    abstraction_from_dict,
    check_partition,
    certified_target,
    classify,
    coordinate_range,
)
from core.errors import GraphError, ModelError, RegionError
from core.models import EPS_ZERO, StateDomain, SwitchedSystem
from core.sampling import cell_samples

logger = logging.getLogger(__name__)


def fmt_number(value: float) -> str:
    return format(float(value), ".12g")


class BetaKind(Enum):
    ZERO = "zero"
    FEEDBACK = "feedback"
    FREE_NONZERO = "free_nonzero"


@dataclass(frozen=True)
class EdgeLabel:
    """(alpha, beta): the subsystem index and the continuous-control rule."""

    alpha: int
    kind: BetaKind = BetaKind.ZERO
    c: Tuple[float, ...] = ()
    e: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        object.__setattr__(self, "e", float(self.e))
        if self.kind is BetaKind.FEEDBACK and not self.c:
            raise GraphError("INVALID_EDGE", "feedback labels need a coefficient vector")

    @classmethod
    def zero(cls, alpha: int) -> "EdgeLabel":
        return cls(alpha)

    @classmethod
    def feedback(cls, alpha: int, c: Sequence[float], e: float = 0.0) -> "EdgeLabel":
        return cls(alpha, BetaKind.FEEDBACK, tuple(c), e)

    @classmethod
    def free_nonzero(cls, alpha: int) -> "EdgeLabel":
        return cls(alpha, BetaKind.FREE_NONZERO)

    @property
    def is_zero(self) -> bool:
        return self.kind is BetaKind.ZERO

    def control(self, x: np.ndarray, default_nonzero: Optional[float] = None) -> float:
        if self.kind is BetaKind.ZERO:
            return 0.0
        if self.kind is BetaKind.FEEDBACK:
            return float(np.dot(self.c, x) + self.e)
        if default_nonzero is None:
            raise GraphError("INVALID_EDGE", "a free nonzero label needs a default control value")
        return float(default_nonzero)

    def render_beta(self) -> str:
        if self.kind is BetaKind.ZERO:
            return "0"
        if self.kind is BetaKind.FREE_NONZERO:
            return "μ≠0"
        terms = [f"{fmt_number(v)}*x{j + 1}" for j, v in enumerate(self.c) if v != 0.0]
        if self.e != 0.0 or not terms:
            terms.append(fmt_number(self.e))
        return " + ".join(terms)

    def render(self) -> str:
        return f"{self.alpha} / {self.render_beta()}"

    def beta_dict(self) -> Dict[str, Any]:
        if self.kind is BetaKind.FEEDBACK:
            return {"kind": "feedback", "c": list(self.c), "e": self.e}
        return {"kind": self.kind.value}

    @classmethod
    def from_dicts(cls, alpha: int, beta: Dict[str, Any]) -> "EdgeLabel":
        kind = BetaKind(beta["kind"])
        if kind is BetaKind.FEEDBACK:
            return cls.feedback(alpha, beta["c"], beta.get("e", 0.0))
        return cls(alpha, kind)


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    dst: int
    label: EdgeLabel

    @property
    def alpha(self) -> int:
        return self.label.alpha

    def sort_key(self) -> Tuple[int, int, int, str]:
        return self.src, self.dst, self.alpha, self.label.render_beta()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "src": self.src,
            "dst": self.dst,
            "alpha": self.alpha,
            "beta": self.label.beta_dict(),
        }


@dataclass(frozen=True)
class TransitionGraph:
    """Labelled directed multigraph; one vertex per region, vertex id = region id."""

    vertices: Tuple[int, ...]
    edges: Tuple[Edge, ...]
    abstraction: Optional[Abstraction] = field(default=None, compare=False, hash=False)
    _out: Dict[int, Tuple[Edge, ...]] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        out: Dict[int, List[Edge]] = {v: [] for v in self.vertices}
        for edge in self.edges:
            out.setdefault(edge.src, []).append(edge)
        object.__setattr__(self, "_out", {v: tuple(es) for v, es in out.items()})

    def out_edges(self, vertex: int) -> Tuple[Edge, ...]:
        return self._out.get(vertex, ())

    def edge(self, edge_id: int) -> Edge:
        return self.edges[edge_id]

    def to_networkx(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.vertices)
        for edge in self.edges:
            graph.add_edge(edge.src, edge.dst, key=edge.id, alpha=edge.alpha, label=edge.label)
        return graph


def _finalize(vertices: Iterable[int], triples: Iterable[Tuple[int, int, EdgeLabel]], abstraction: Optional[Abstraction]) -> TransitionGraph:
    unique = {(src, dst, label) for src, dst, label in triples}
    ordered = sorted(unique, key=lambda t: (t[0], t[1], t[2].alpha, t[2].render_beta()))
    edges = tuple(Edge(n, src, dst, label) for n, (src, dst, label) in enumerate(ordered))
    return TransitionGraph(tuple(vertices), edges, abstraction)


def _feedback_range(abstraction: Abstraction, region_id: int, j: int, gain: float) -> Tuple[float, float]:
    lows, highs = [], []
    for cell in abstraction.cells_of(region_id):
        lo, hi = coordinate_range(abstraction.domain, j, cell[j])
        lows.append(lo)
        highs.append(hi)
    ends = (gain * min(lows), gain * max(highs))
    return min(ends), max(ends)


def _discover(system: SwitchedSystem, abstraction: Abstraction, eps: float) -> List[Tuple[int, int, EdgeLabel]]:
    found = []
    for region in abstraction.regions:
        if region.kind is RegionKind.ORIGIN:
            continue
        for i in system.indices():
            A, b = system.A(i), system.b(i)
            target = certified_target(abstraction, region.id, A, eps)
            if target is not None:
                found.append((region.id, target, EdgeLabel.zero(i)))
            elif abstraction.name == "lattice":
                raise GraphError(
                    "INVALID_ABSTRACTION",
                    f"region {region.id} has no constant mu=0 target under subsystem {i}",
                    {"region": region.id, "subsystem": i},
                )
            else:
                logger.debug("No constant mu=0 target from region %d under subsystem %d", region.id, i)
            if region.kind is not RegionKind.PATTERN:
                continue
            for j in region.free_coords:
                for k in range(system.d):
                    if abs(b[k]) <= eps or abs(A[k, j]) <= eps:
                        continue
                    ratio = A[k, j] / b[k]
                    c = np.zeros(system.d)
                    c[j] = -ratio
                    target = certified_target(abstraction, region.id, A + np.outer(b, c), eps)
                    if target is None:
                        logger.debug("Cancelling x%d via row %d from region %d (subsystem %d) has no constant target",
                                     j + 1, k + 1, region.id, i)
                        continue
                    mu_lo, mu_hi = _feedback_range(abstraction, region.id, j, -ratio)
                    if not system.control_set.contains_interval(mu_lo, mu_hi, eps):
                        logger.debug("Feedback %g*x%d from region %d leaves the control set", -ratio, j + 1, region.id)
                        continue
                    found.append((region.id, target, EdgeLabel.feedback(i, c)))
    return found


def build_graph(
    system: SwitchedSystem,
    abstraction: Abstraction,
    extra_edges: Iterable[Tuple[int, int, EdgeLabel]] = (),
    eps: float = EPS_ZERO,
    n_samples: int = 200,
    seed: int = 0,
) -> TransitionGraph:
    """Discover mu=0 edges and coordinate-cancelling feedback edges, then append checked extras."""
    issues = check_partition(abstraction)
    if issues:
        raise GraphError("INVALID_ABSTRACTION", f"abstraction is not a partition of the domain ({issues[0].reason})")
    triples = _discover(system, abstraction, eps)
    for src, dst, label in extra_edges:
        candidate = Edge(-1, src, dst, label)
        if validate_edge(system, abstraction, candidate, n_samples, seed, eps):
            triples.append((src, dst, label))
        else:
            logger.warning("Rejected extra edge v%d -> v%d labelled %s", src, dst, label.render())
    graph = _finalize((r.id for r in abstraction.regions), triples, abstraction)
    logger.info("Transition graph: %d vertices, %d edges", len(graph.vertices), len(graph.edges))
    return graph


def validate_edge(
    system: SwitchedSystem,
    abstraction: Abstraction,
    edge: Edge,
    n_samples: int = 200,
    seed: int = 0,
    eps: float = EPS_ZERO,
) -> bool:
    """Sample the source region and check every image lands in the destination region."""
    if n_samples < 1:
        raise ModelError("INVALID_ARGUMENT", "n_samples must be at least 1")
    label = edge.label
    n_regions = len(abstraction.regions)
    if not 1 <= label.alpha <= system.N or not 0 <= edge.src < n_regions or not 0 <= edge.dst < n_regions:
        return False
    if label.kind is BetaKind.FEEDBACK and len(label.c) != system.d:
        return False
    A, b = system.A(label.alpha), system.b(label.alpha)
    default = None
    if label.kind is BetaKind.FREE_NONZERO:
        try:
            default = system.control_set.default_nonzero()
        except ModelError:
            return False
    M = A + np.outer(b, label.c) if label.kind is BetaKind.FEEDBACK else A
    rng = np.random.default_rng([seed, edge.src, edge.dst, label.alpha])
    states = cell_samples(system.domain, abstraction.cells_of(edge.src), n_samples, rng, [M], eps)
    for x in states:
        mu = label.control(x, default)
        if not system.control_set.contains(mu, eps):
            return False
        if not label.is_zero and abs(mu) <= eps:
            return False
        y = A @ x + b * mu
        if not system.domain.contains(y, eps):
            return False
        try:
            if classify(abstraction, y, eps) != edge.dst:
                return False
        except RegionError:
            return False
    return True


def export_graph(graph: TransitionGraph, fmt: str = "dot") -> str:
    fmt = fmt.lower()
    if fmt == "json":
        return json.dumps(graph_to_dict(graph), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if fmt != "dot":
        raise GraphError("UNKNOWN_FORMAT", f"unsupported graph format {fmt!r}")
    lines = ["digraph transition_graph {"]
    for v in graph.vertices:
        text = f"v{v}"
        if graph.abstraction is not None:
            text += f": {graph.abstraction.region(v).describe()}"
        lines.append(f'  v{v} [label="{text}"];')
    for edge in sorted(graph.edges, key=Edge.sort_key):
        lines.append(f'  v{edge.src} -> v{edge.dst} [label="{edge.label.render()}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dict(graph: TransitionGraph) -> Dict[str, Any]:
    return {
        "vertices": list(graph.vertices),
        "edges": [e.to_dict() for e in graph.edges],
        "abstraction": graph.abstraction.to_dict() if graph.abstraction is not None else None,
    }


def graph_from_json(text: str) -> TransitionGraph:
    data = json.loads(text)
    abstraction = None
    if data.get("abstraction"):
        abs_data = data["abstraction"]
        domain = StateDomain.from_dict(abs_data["domain"])
        abstraction = abstraction_from_dict(abs_data, int(abs_data["d"]), domain)
    edges = tuple(
        Edge(int(e["id"]), int(e["src"]), int(e["dst"]), EdgeLabel.from_dicts(int(e["alpha"]), e["beta"]))
        for e in data["edges"]
    )
    return TransitionGraph(tuple(int(v) for v in data["vertices"]), edges, abstraction)
