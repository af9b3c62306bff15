#!/usr/bin/env python3

import io
import csv
import json
import math
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from core.abstraction import ValidationVerdict, validate_abstraction
from core.config_manager import ProblemConfig
from core.errors import WalkError
from core.controller import SolveResult, build_abstraction, solve
from core.dynamics import is_admissible, reaches_origin, simulate, sparsity
from core.models import HybridControlSequence, SolverSettings, Trajectory
from core.oracle import ComparisonVerdict, OracleOptimum, brute_force_optimum, compare
from core.transition_graph import build_graph, export_graph
from core.walk_search import ORIGIN_VERTEX, enumerate_T_walks, is_paddable, walk_weight

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_MISMATCH = 4


def clean_number(value: float) -> Any:
    """12 significant digits; infinities become strings so the output stays valid JSON."""
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    rounded = float(format(value, ".12g"))
    return 0.0 if rounded == 0.0 else rounded


def clean(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return clean_number(obj)
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return clean(obj.tolist())
    return obj


def render_json(report: Dict[str, Any]) -> str:
    return json.dumps(clean(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def trajectory_csv(trajectory: Trajectory, sequence: HybridControlSequence) -> str:
    d = trajectory.states.shape[1]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["t"] + [f"x{k + 1}" for k in range(d)] + ["nu", "mu"])
    for t, state in enumerate(trajectory.states):
        row: List[Any] = [t] + [format(clean_number(float(v)), ".12g") for v in state]
        if t < sequence.T:
            row += [sequence.nu[t], format(clean_number(sequence.mu[t]), ".12g")]
        else:
            row += ["", ""]
        writer.writerow(row)
    return buffer.getvalue()


@dataclass
class Output:
    """One presenter result: the files to write, the stdout text and the exit code."""

    files: Dict[str, str]
    stdout: str
    exit_code: int


class ReportPresenter:
    """Runs one subcommand against a problem and turns the result into report files."""

    def __init__(self, config: ProblemConfig, settings: SolverSettings, stem: str):
        self.config = config
        self.settings = settings
        self.stem = stem

    def _header(self, command: str) -> Dict[str, Any]:
        return {
            "command": command,
            "problem": self.config.name,
            "T": self.config.T,
            "xi": list(self.config.xi),
            "seed": self.settings.seed,
        }

    def _solve(self) -> SolveResult:
        return solve(
            self.config.system,
            self.config.abstraction_choice(),
            self.config.xi,
            self.config.T,
            self.settings,
            self.config.extra_edges,
            self.config.published_total,
        )

    def _oracle(self) -> Optional[OracleOptimum]:
        return brute_force_optimum(
            self.config.system,
            self.config.xi,
            self.config.T,
            self.settings.oracle_epsilon,
            self.settings.budget,
            self.settings.max_horizon,
            self.settings.jobs,
        )

    @staticmethod
    def _oracle_dict(oracle: Optional[OracleOptimum]) -> Dict[str, Any]:
        if oracle is None:
            return {"feasible": False, "total": None, "nu": None, "mu": None}
        total, witness = oracle
        return {"feasible": True, "total": total, "nu": list(witness.nu), "mu": list(witness.mu)}

    def _enumeration_dict(self, result: SolveResult) -> Dict[str, Any]:
        """Minimum weight over exhaustively enumerated walks, bounded by the cap."""
        if result.graph is None or result.start_region is None:
            return {"walks": None, "min_weight": None}
        system = self.config.system
        try:
            walks = enumerate_T_walks(result.graph, system, result.start_region, ORIGIN_VERTEX, self.config.T, self.settings.cap)
        except WalkError as e:
            logger.warning("Walk enumeration stopped: %s", e.message)
            return {"walks": None, "min_weight": None, "error": e.code}
        weights = [walk_weight(result.graph, w) for w in walks if is_paddable(result.graph, system, w, self.config.T)]
        return {"walks": len(walks), "min_weight": min(weights) if weights else None}

    def _json_name(self, command: str) -> str:
        return f"{self.stem}.{command}.json"

    def present_solve(self) -> Output:
        result = self._solve()
        report = {**self._header("solve"), **result.to_dict()}
        text = render_json(report)
        files = {self._json_name("solve"): text}
        if result.report is not None:
            files[f"{self.stem}.trajectory.csv"] = trajectory_csv(result.report.trajectory, result.report.sequence)
        return Output(files, text, EXIT_OK if result.solved else EXIT_INFEASIBLE)

    def present_oracle(self) -> Output:
        oracle = self._oracle()
        report = {**self._header("oracle"), **self._oracle_dict(oracle)}
        text = render_json(report)
        return Output({self._json_name("oracle"): text}, text, EXIT_OK if oracle is not None else EXIT_INFEASIBLE)

    def present_compare(self) -> Output:
        result = self._solve()
        oracle = self._oracle()
        comparison = compare(result, oracle)
        report = {
            **self._header("compare"),
            "solve": result.to_dict(),
            "oracle": self._oracle_dict(oracle),
            "comparison": comparison.to_dict(),
            "enumeration": self._enumeration_dict(result),
        }
        text = render_json(report)
        if comparison.verdict is ComparisonVerdict.MATCH:
            code = EXIT_OK
        elif comparison.verdict is ComparisonVerdict.BOTH_INFEASIBLE:
            code = EXIT_INFEASIBLE
        else:
            code = EXIT_MISMATCH
        return Output({self._json_name("compare"): text}, text, code)

    def present_graph(self, fmt: str = "dot") -> Output:
        system = self.config.system
        abstraction = build_abstraction(system, self.config.abstraction_choice(), self.settings.epsilon)
        graph = build_graph(
            system, abstraction, self.config.extra_edges,
            self.settings.epsilon, self.settings.samples, self.settings.seed,
        )
        text = export_graph(graph, fmt)
        return Output({f"{self.stem}.graph.{fmt}": text}, text, EXIT_OK)

    def present_validate(self) -> Output:
        system = self.config.system
        abstraction = build_abstraction(system, self.config.abstraction_choice(), self.settings.epsilon)
        validation = validate_abstraction(system, abstraction, self.settings.samples, self.settings.seed, self.settings.epsilon)
        report = {**self._header("validate"), **validation.to_dict()}
        text = render_json(report)
        code = EXIT_INVALID if validation.verdict is ValidationVerdict.INVALID else EXIT_OK
        return Output({self._json_name("validate"): text}, text, code)

    def present_simulate(self, nu: Sequence[int], mu: Sequence[float]) -> Output:
        system = self.config.system
        sequence = HybridControlSequence(tuple(nu), tuple(mu))
        trajectory = simulate(system, self.config.xi, sequence)
        eps = self.settings.epsilon
        count = sparsity(sequence, eps)
        report = {
            **self._header("simulate"),
            "T": sequence.T,
            "nu": list(sequence.nu),
            "mu": list(sequence.mu),
            "admissible": is_admissible(system, sequence, eps),
            "reached_origin": reaches_origin(trajectory, eps),
            "sparsity": {"switches": count.n_switch, "controls": count.n_control, "total": count.total},
            "trajectory": trajectory.states.tolist(),
        }
        text = render_json(report)
        files = {self._json_name("simulate"): text, f"{self.stem}.trajectory.csv": trajectory_csv(trajectory, sequence)}
        return Output(files, text, EXIT_OK)


def write_outputs(output: Output, out_dir: Path) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(output.files.items()):
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
        logger.debug("Wrote %s", path)
    return written


def error_json(payload: Dict[str, Any]) -> str:
    return json.dumps(clean(payload), sort_keys=True, ensure_ascii=False)
