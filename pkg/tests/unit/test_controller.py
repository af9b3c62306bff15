#!/usr/bin/env python3

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'src'))

import logging

import numpy as np
import pytest

from core.abstraction import ValidationVerdict, build_support_abstraction
from core.controller import (
    SolveStatus,
    build_abstraction,
    erratum_notes,
    realize,
    solve,
)
from core.errors import ControlError, RegionError
from core.models import ControlSet, SolverSettings, StateDomain, SubsystemDynamics, SwitchedSystem
from core.transition_graph import build_graph
from core.walk_search import Walk


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


def decoupled_system() -> SwitchedSystem:
    return SwitchedSystem(
        (SubsystemDynamics(np.diag([2.0, 0.5]), [1, 0]), SubsystemDynamics(np.diag([1.0, 2.0]), [0, 1])),
        frozenset({(1, 1), (1, 2), (2, 1), (2, 2)}),
    )


class TestRealize:
    """Test turning walks into hybrid control sequences."""

    def setup_method(self):
        self.system = first_example()
        self.graph = build_graph(self.system, build_support_abstraction(self.system))

    def test_first_example(self):
        report = realize(self.system, self.graph, Walk(2, (4, 0)), [0, 10], 5)
        assert report.sequence.nu == (2, 1, 2, 1, 2)
        assert report.sequence.mu == (0.0, -10.0, 0.0, 0.0, 0.0)
        assert tuple(report.sparsity) == (4, 1, 5)
        assert report.walk_weight == 2
        assert report.padding_switches == 3
        assert report.reached_origin
        np.testing.assert_allclose(report.trajectory[1], [10.0, 0.0])

    def test_second_example(self):
        system = second_example()
        graph = build_graph(system, build_support_abstraction(system))
        report = realize(system, graph, Walk(2, (4,)), [0, 10], 5)
        assert report.sequence.nu == (1, 1, 1, 1, 1)
        assert report.sequence.mu == (-20.0, 0.0, 0.0, 0.0, 0.0)
        assert report.sparsity.total == 1
        assert report.padding_switches == 0

    def test_start_at_origin(self):
        report = realize(self.system, self.graph, Walk(0), [0, 0], 5)
        assert report.sequence.nu == (1, 2, 1, 2, 1)
        assert report.sequence.mu == (0.0,) * 5
        assert tuple(report.sparsity) == (4, 0, 4)
        assert report.padding_switches == 4

    def test_walk_fills_the_horizon(self):
        report = realize(self.system, self.graph, Walk(2, (4, 0)), [0, 10], 2)
        assert report.sequence.nu == (2, 1)
        assert report.padding_switches == 0

    def test_start_region_mismatch(self):
        with pytest.raises(ControlError) as exc:
            realize(self.system, self.graph, Walk(1, (0,)), [0, 10], 5)
        assert exc.value.code == "START_REGION_MISMATCH"
        assert exc.value.details == {"state_region": 2, "walk_start": 1}

    def test_walk_outside_switch_set(self):
        with pytest.raises(ControlError) as exc:
            realize(self.system, self.graph, Walk(2, (4, 1)), [0, 10], 5)
        assert exc.value.code == "INVALID_WALK"

    def test_control_out_of_bounds(self):
        narrow = self.system.with_changes(control_set=ControlSet(-5.0, 5.0))
        with pytest.raises(ControlError) as exc:
            realize(narrow, self.graph, Walk(2, (4, 0)), [0, 10], 5)
        assert exc.value.code == "CONTROL_OUT_OF_BOUNDS"
        assert exc.value.details["t"] == 1

    def test_region_deviation(self):
        drifted = self.system.with_changes(
            subsystems=(self.system.subsystems[0], SubsystemDynamics([[0, 1], [1, 1]], [0, 1]))
        )
        with pytest.raises(ControlError) as exc:
            realize(drifted, self.graph, Walk(2, (4, 0)), [0, 10], 5)
        assert exc.value.code == "REGION_DEVIATION"


class TestBuildAbstraction:
    """Test abstraction selection."""

    def test_named_choices(self):
        system = decoupled_system()
        assert build_abstraction(system, "support").name == "support"
        assert build_abstraction(system, "lattice").name == "lattice"

    def test_explicit_abstraction_passes_through(self):
        system = first_example()
        abstraction = build_support_abstraction(system)
        assert build_abstraction(system, abstraction) is abstraction

    def test_unknown_choice(self):
        with pytest.raises(RegionError) as exc:
            build_abstraction(first_example(), "grid")
        assert exc.value.code == "UNKNOWN_ABSTRACTION"


class TestSolve:
    """Test the end-to-end solver."""

    def test_first_example(self):
        result = solve(first_example(), "support", [0, 10], 5, published_total=5)
        assert result.status is SolveStatus.SOLVED
        assert result.total == 5
        assert result.notes == ()
        assert result.validation.verdict is ValidationVerdict.VALID_STRUCTURAL
        assert result.start_region == 2

    def test_second_example_records_erratum(self, caplog):
        with caplog.at_level(logging.WARNING):
            result = solve(second_example(), "support", [0, 10], 5, published_total=2)
        assert result.solved
        assert result.total == 1
        assert len(result.notes) == 1
        assert "published total 2" in result.notes[0]
        assert result.report.notes == result.notes
        assert "published total 2" in caplog.text

    def test_start_at_origin(self):
        result = solve(first_example(), "support", [0, 0], 5)
        assert result.solved
        assert result.report.walk.r == 0
        assert result.total == 4

    def test_no_walk(self):
        result = solve(decoupled_system(), "support", [1, 1], 5)
        assert result.status is SolveStatus.INFEASIBLE_NO_WALK
        assert result.start_region == 3
        assert result.total is None
        assert result.graph is not None

    def test_lattice_finds_a_walk(self):
        result = solve(decoupled_system(), "lattice", [1, 1], 5)
        assert result.solved
        assert result.total == 3

    def test_walk_choice_includes_padding_switches(self):
        # Both subsystems cancel x1 in one step; only subsystem 2 can hold afterwards.
        system = SwitchedSystem(
            (SubsystemDynamics(np.eye(2), [1, 0]), SubsystemDynamics(np.eye(2), [1, 0])),
            frozenset({(1, 2), (2, 1), (2, 2)}),
        )
        result = solve(system, "lattice", [1, 0], 3)
        assert result.status is SolveStatus.SOLVED
        assert result.report.sequence.nu == (2, 2, 2)
        assert result.report.sequence.mu == (-1.0, 0.0, 0.0)
        assert result.total == 1
        assert result.report.padding_switches == 0

    def test_invalid_abstraction(self):
        system = SwitchedSystem((SubsystemDynamics([[1, 1], [0, 1]], [1, 0]),), frozenset({(1, 1)}))
        result = solve(system, "support", [1, 1], 3)
        assert result.status is SolveStatus.INFEASIBLE_INVALID_ABSTRACTION
        assert result.validation.verdict is ValidationVerdict.INVALID
        assert result.graph is None

    def test_horizon_must_be_positive(self):
        with pytest.raises(ControlError):
            solve(first_example(), "support", [0, 10], 0)

    def test_settings_seed_is_reported(self):
        result = solve(first_example(), "support", [0, 10], 5, SolverSettings(seed=11))
        assert result.validation.seed == 11

    def test_result_serialization(self):
        data = solve(first_example(), "support", [0, 10], 5).to_dict()
        assert data["status"] == "solved"
        assert data["nu"] == [2, 1, 2, 1, 2]
        assert data["sparsity"] == {"switches": 4, "controls": 1, "total": 5}
        assert data["walk"]["edges"][1]["beta"] == "-1*x1"
        assert data["validation"] == "valid_structural"


class TestErratumNotes:
    """Test published-total notes."""

    @pytest.mark.parametrize("published,total,count", [
        (None, 3, 0),
        (5, 5, 0),
        (2, 1, 1),
    ])
    def test_notes(self, published, total, count):
        assert len(erratum_notes(published, total)) == count
