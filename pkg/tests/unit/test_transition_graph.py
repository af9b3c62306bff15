#!/usr/bin/env python3

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'src'))

import json
import logging

import numpy as np
import pytest

from core.abstraction import Abstraction, Region, RegionKind, Sign, build_support_abstraction, build_support_lattice
from core.errors import GraphError
from core.models import ControlSet, StateDomain, SubsystemDynamics, SwitchedSystem
from core.transition_graph import (
    BetaKind,
    Edge,
    EdgeLabel,
    TransitionGraph,
    build_graph,
    export_graph,
    graph_from_json,
    validate_edge,
)


def first_example() -> SwitchedSystem:
    return SwitchedSystem(
        (SubsystemDynamics(np.eye(2), [1, 0]), SubsystemDynamics([[0, 1], [1, 0]], [0, 1])),
        frozenset({(1, 2), (2, 1)}),
        ControlSet(-10.0, 10.0),
        StateDomain.box([-10, -10], [10, 10]),
    )


def second_example() -> SwitchedSystem:
    return SwitchedSystem(
        (SubsystemDynamics([[1, 2], [2, 4]], [1, 2]), SubsystemDynamics([[1, 2], [3, 4]], [1, 1])),
        frozenset({(1, 1), (1, 2), (2, 1), (2, 2)}),
        ControlSet(),
        StateDomain.orthant([1, 1]),
    )


def summary(graph: TransitionGraph):
    return [(e.src, e.dst, e.alpha, e.label.render_beta()) for e in graph.edges]


class TestEdgeLabel:
    """Test edge labels."""

    @pytest.mark.parametrize("label,text", [
        (EdgeLabel.zero(1), "0"),
        (EdgeLabel.feedback(1, (0.0, -2.0)), "-2*x2"),
        (EdgeLabel.feedback(2, (0.5, 0.0), 1.0), "0.5*x1 + 1"),
        (EdgeLabel.free_nonzero(1), "μ≠0"),
    ])
    def test_render_beta(self, label, text):
        assert label.render_beta() == text

    def test_control_values(self):
        x = np.array([3.0, 4.0])
        assert EdgeLabel.zero(1).control(x) == 0.0
        assert EdgeLabel.feedback(1, (0.0, -2.0), 1.0).control(x) == -7.0
        assert EdgeLabel.free_nonzero(1).control(x, 2.5) == 2.5

    def test_free_label_needs_default(self):
        with pytest.raises(GraphError):
            EdgeLabel.free_nonzero(1).control(np.zeros(2))

    def test_feedback_needs_coefficients(self):
        with pytest.raises(GraphError):
            EdgeLabel(1, BetaKind.FEEDBACK)

    def test_labels_are_hashable(self):
        assert len({EdgeLabel.feedback(1, [0, -2]), EdgeLabel.feedback(1, (0.0, -2.0))}) == 1


class TestBuildGraph:
    """Test transition graph construction."""

    def test_first_example_edges(self):
        system = first_example()
        graph = build_graph(system, build_support_abstraction(system))
        assert graph.vertices == (0, 1, 2, 3)
        assert summary(graph) == [
            (1, 0, 1, "-1*x1"),
            (1, 0, 2, "-1*x1"),
            (1, 1, 1, "0"),
            (1, 2, 2, "0"),
            (2, 1, 2, "0"),
            (2, 2, 1, "0"),
            (3, 3, 1, "0"),
            (3, 3, 2, "0"),
        ]
        assert [e.id for e in graph.edges] == list(range(8))
        assert graph.edge(0).label.c == (-1.0, 0.0)

    def test_second_example_edges(self):
        system = second_example()
        graph = build_graph(system, build_support_abstraction(system))
        assert summary(graph) == [
            (1, 0, 1, "-1*x1"),
            (1, 2, 2, "-1*x1"),
            (1, 3, 1, "0"),
            (1, 3, 2, "0"),
            (2, 0, 1, "-2*x2"),
            (2, 2, 2, "-2*x2"),
            (2, 3, 1, "0"),
            (2, 3, 2, "0"),
            (3, 3, 1, "0"),
            (3, 3, 2, "0"),
        ]

    def test_no_edges_leave_the_origin(self):
        for system in (first_example(), second_example()):
            graph = build_graph(system, build_support_abstraction(system))
            assert graph.out_edges(0) == ()

    def test_bounded_controls_drop_unbounded_feedback(self):
        system = second_example().with_changes(control_set=ControlSet(-10.0, 10.0))
        graph = build_graph(system, build_support_abstraction(system))
        assert not any(e.src == 2 and not e.label.is_zero for e in graph.edges)

    def test_lattice_edges_cancel_one_coordinate(self):
        system = SwitchedSystem(
            (SubsystemDynamics(np.diag([2.0, 0.5]), [1, 0]), SubsystemDynamics(np.diag([1.0, -1.0]), [0, 1])),
            frozenset({(1, 1), (1, 2), (2, 1), (2, 2)}),
        )
        graph = build_graph(system, build_support_lattice(system))
        feedback = [(e.src, e.dst, e.alpha, e.label.render_beta()) for e in graph.edges if not e.label.is_zero]
        assert feedback == [
            (1, 0, 1, "-2*x1"),
            (2, 0, 2, "1*x2"),
            (3, 1, 2, "1*x2"),
            (3, 2, 1, "-2*x1"),
        ]

    def test_overlapping_regions_are_rejected(self):
        system = first_example()
        regions = (
            Region(0, RegionKind.ORIGIN),
            Region(1, RegionKind.PATTERN, (0,), (Sign.ANY,)),
            Region(2, RegionKind.PATTERN, (0,), (Sign.POS,)),
            Region(3, RegionKind.OTHER),
        )
        with pytest.raises(GraphError) as exc:
            build_graph(system, Abstraction(2, system.domain, regions))
        assert exc.value.code == "INVALID_ABSTRACTION"

    def test_lattice_with_coupled_dynamics_is_rejected(self):
        clean = SwitchedSystem(
            (SubsystemDynamics(np.diag([2.0, 0.5]), [1, 0]), SubsystemDynamics(np.diag([1.0, 2.0]), [0, 1])),
            frozenset({(1, 2), (2, 1)}),
        )
        lattice = build_support_lattice(clean)
        coupled = clean.with_changes(
            subsystems=(SubsystemDynamics([[2.0, 1.0], [0.0, 0.5]], [1, 0]), clean.subsystems[1])
        )
        with pytest.raises(GraphError) as exc:
            build_graph(coupled, lattice)
        assert exc.value.code == "INVALID_ABSTRACTION"

    def test_extra_edges_are_validated(self, caplog):
        system = first_example()
        abstraction = build_support_abstraction(system)
        extras = [
            (2, 3, EdgeLabel.free_nonzero(1)),
            (2, 1, EdgeLabel.zero(1)),
        ]
        with caplog.at_level(logging.WARNING):
            graph = build_graph(system, abstraction, extras)
        assert len(graph.edges) == 9
        assert (2, 3, 1, "μ≠0") in summary(graph)
        assert (2, 1, 1, "0") not in summary(graph)
        assert "Rejected extra edge" in caplog.text

    def test_networkx_view(self):
        system = first_example()
        nx_graph = build_graph(system, build_support_abstraction(system)).to_networkx()
        assert nx_graph.number_of_nodes() == 4
        assert nx_graph.number_of_edges() == 8
        assert nx_graph.has_edge(2, 1)


class TestValidateEdge:
    """Test sampled edge validation."""

    def test_feedback_edge_with_unbounded_controls(self):
        system = second_example()
        abstraction = build_support_abstraction(system)
        edge = Edge(0, 2, 0, EdgeLabel.feedback(1, (0.0, -2.0)))
        assert validate_edge(system, abstraction, edge)

    def test_feedback_edge_exceeding_control_bounds(self):
        system = second_example().with_changes(control_set=ControlSet(-10.0, 10.0))
        abstraction = build_support_abstraction(system)
        edge = Edge(0, 2, 0, EdgeLabel.feedback(1, (0.0, -2.0)))
        assert not validate_edge(system, abstraction, edge)

    def test_wrong_destination(self):
        system = first_example()
        edge = Edge(0, 2, 2, EdgeLabel.zero(2))
        assert not validate_edge(system, build_support_abstraction(system), edge)

    def test_unknown_subsystem(self):
        system = first_example()
        edge = Edge(0, 2, 1, EdgeLabel.zero(3))
        assert not validate_edge(system, build_support_abstraction(system), edge)


class TestExport:
    """Test DOT and JSON export."""

    def setup_method(self):
        system = first_example()
        self.graph = build_graph(system, build_support_abstraction(system))

    def test_dot(self):
        text = export_graph(self.graph, "dot")
        lines = text.strip().splitlines()
        assert lines[0] == "digraph transition_graph {"
        assert lines[-1] == "}"
        assert sum(1 for line in lines if "[label=\"v" in line) == 4
        assert '  v1 -> v0 [label="1 / -1*x1"];' in lines
        assert '  v3 [label="v3: other"];' in lines

    def test_json_round_trip(self):
        text = export_graph(self.graph, "json")
        data = json.loads(text)
        assert len(data["edges"]) == 8
        restored = graph_from_json(text)
        assert restored == self.graph
        assert restored.abstraction == self.graph.abstraction

    def test_export_is_deterministic(self):
        assert export_graph(self.graph, "json") == export_graph(self.graph, "json")

    def test_unknown_format(self):
        with pytest.raises(GraphError):
            export_graph(self.graph, "svg")
