#!/usr/bin/env python3

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from core.abstraction import Abstraction, abstraction_from_dict
from core.errors import ConfigError, HandsOffError
from core.models import (
    ConfigStatus,
    ControlSet,
    SolverSettings,
    StateDomain,
    SubsystemDynamics,
    SwitchedSystem,
)
from core.transition_graph import EdgeLabel


CONFIG_FILE = Path.home() / ".handsoff_config.json"
SCHEMA_VERSION = 1

ExtraEdge = Tuple[int, int, EdgeLabel]


@dataclass(frozen=True)
class ProblemConfig:
    name: str
    system: SwitchedSystem
    xi: Tuple[float, ...]
    T: int
    epsilon: float = 1e-9
    abstraction: Union[str, Dict[str, Any]] = "support"
    extra_edges: Tuple[ExtraEdge, ...] = ()
    published_total: Optional[int] = None
    free_nonzero_default: Optional[float] = field(default=None)

    @property
    def d(self) -> int:
        return self.system.d

    @property
    def N(self) -> int:
        return self.system.N

    def abstraction_choice(self) -> Union[str, Abstraction]:
        if isinstance(self.abstraction, str):
            return self.abstraction
        return abstraction_from_dict(self.abstraction, self.d, self.system.domain)


def _bound(value: Any, path: str) -> float:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("-inf", "-infinity"):
            return -math.inf
        if text in ("+inf", "inf", "infinity", "+infinity"):
            return math.inf
        raise ConfigError("SCHEMA_ERROR", f"expected a number or '-inf'/'+inf', got {value!r}", path)
    return _number(value, path)


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("SCHEMA_ERROR", f"expected a number, got {value!r}", path)
    return float(value)


def _integer(value: Any, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("SCHEMA_ERROR", f"expected an integer, got {value!r}", path)
    if minimum is not None and value < minimum:
        raise ConfigError("SCHEMA_ERROR", f"expected an integer >= {minimum}, got {value}", path)
    return value


def _vector(value: Any, length: int, path: str) -> Tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError("SCHEMA_ERROR", "expected an array of numbers", path)
    if len(value) != length:
        raise ConfigError("SCHEMA_ERROR", f"expected {length} entries, got {len(value)}", path)
    return tuple(_number(v, f"{path}[{n}]") for n, v in enumerate(value))


def _require(data: Dict[str, Any], key: str, path: str = "$") -> Any:
    if key not in data:
        raise ConfigError("SCHEMA_ERROR", f"missing required field '{key}'", f"{path}.{key}")
    return data[key]


def _parse_subsystems(value: Any, d: int, N: int) -> List[SubsystemDynamics]:
    if not isinstance(value, list) or len(value) != N:
        raise ConfigError("SCHEMA_ERROR", f"expected {N} subsystems", "$.subsystems")
    subsystems = []
    for k, entry in enumerate(value):
        path = f"$.subsystems[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError("SCHEMA_ERROR", "expected an object with 'A' and 'b'", path)
        A = _vector(_require(entry, "A", path), d * d, f"{path}.A")
        b = _vector(_require(entry, "b", path), d, f"{path}.b")
        subsystems.append(SubsystemDynamics([A[r * d:(r + 1) * d] for r in range(d)], b))
    return subsystems


def _parse_switch_set(value: Any, N: int) -> List[Tuple[int, int]]:
    if not isinstance(value, list):
        raise ConfigError("SCHEMA_ERROR", "expected a list of index pairs", "$.switch_set")
    pairs = []
    for k, pair in enumerate(value):
        path = f"$.switch_set[{k}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError("SCHEMA_ERROR", "expected a pair [i, j]", path)
        i, j = (_integer(p, path, 1) for p in pair)
        if i > N or j > N:
            raise ConfigError("SCHEMA_ERROR", f"pair ({i}, {j}) references a subsystem beyond N={N}", path)
        pairs.append((i, j))
    return pairs


def _parse_control_set(value: Any, free_nonzero_default: Optional[float]) -> ControlSet:
    value = value or {}
    if not isinstance(value, dict):
        raise ConfigError("SCHEMA_ERROR", "expected an object with 'lo' and 'hi'", "$.control_set")
    lo = _bound(value.get("lo", "-inf"), "$.control_set.lo")
    hi = _bound(value.get("hi", "+inf"), "$.control_set.hi")
    try:
        return ControlSet(lo, hi, free_nonzero_default)
    except HandsOffError as exc:
        raise ConfigError("SCHEMA_ERROR", exc.message, "$.control_set") from exc


def _parse_domain(value: Any, d: int) -> StateDomain:
    value = value or {"type": "reals"}
    if not isinstance(value, dict):
        raise ConfigError("SCHEMA_ERROR", "expected a domain object", "$.domain")
    kind = value.get("type", "reals")
    try:
        if kind == "box":
            lower = [_bound(v, f"$.domain.lower[{n}]") for n, v in enumerate(_require(value, "lower", "$.domain"))]
            upper = [_bound(v, f"$.domain.upper[{n}]") for n, v in enumerate(_require(value, "upper", "$.domain"))]
            domain = StateDomain.box(lower, upper)
        elif kind in ("orthant", "reals"):
            domain = StateDomain.from_dict(value)
        else:
            raise ConfigError("SCHEMA_ERROR", f"unknown domain type {kind!r}", "$.domain.type")
    except ConfigError:
        raise
    except (HandsOffError, KeyError, ValueError) as exc:
        raise ConfigError("SCHEMA_ERROR", str(exc), "$.domain") from exc
    if domain.dimension is not None and domain.dimension != d:
        raise ConfigError("SCHEMA_ERROR", f"domain has dimension {domain.dimension}, expected {d}", "$.domain")
    return domain


def _parse_extra_edges(value: Any) -> Tuple[ExtraEdge, ...]:
    if value is None:
        return ()
    if not isinstance(value, list):
        raise ConfigError("SCHEMA_ERROR", "expected a list of edges", "$.extra_edges")
    edges = []
    for k, entry in enumerate(value):
        path = f"$.extra_edges[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError("SCHEMA_ERROR", "expected an edge object", path)
        try:
            label = EdgeLabel.from_dicts(_integer(_require(entry, "alpha", path), f"{path}.alpha", 1), _require(entry, "beta", path))
        except ConfigError:
            raise
        except (HandsOffError, KeyError, ValueError, TypeError) as exc:
            raise ConfigError("SCHEMA_ERROR", f"malformed edge label: {exc}", f"{path}.beta") from exc
        src = _integer(_require(entry, "src", path), f"{path}.src", 0)
        dst = _integer(_require(entry, "dst", path), f"{path}.dst", 0)
        edges.append((src, dst, label))
    return tuple(edges)


def _parse_abstraction(value: Any, d: int, domain: StateDomain) -> Union[str, Dict[str, Any]]:
    if value is None:
        return "support"
    if isinstance(value, str):
        if value not in ("support", "lattice"):
            raise ConfigError("SCHEMA_ERROR", f"unknown abstraction {value!r}", "$.abstraction")
        return value
    if not isinstance(value, dict) or "regions" not in value:
        raise ConfigError("SCHEMA_ERROR", "expected 'support', 'lattice' or an object with 'regions'", "$.abstraction")
    try:
        abstraction_from_dict(value, d, domain)
    except (HandsOffError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError("SCHEMA_ERROR", f"malformed regions: {exc}", "$.abstraction.regions") from exc
    return value


def config_from_dict(data: Any) -> ProblemConfig:
    if not isinstance(data, dict):
        raise ConfigError("SCHEMA_ERROR", "top level must be an object")
    schema = data.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError("SCHEMA_ERROR", f"unsupported schema version {schema!r}", "$.schema")
    d = _integer(_require(data, "d"), "$.d", 1)
    N = _integer(_require(data, "N"), "$.N", 1)
    subsystems = _parse_subsystems(_require(data, "subsystems"), d, N)
    switch_set = _parse_switch_set(_require(data, "switch_set"), N)
    fnd = data.get("free_nonzero_default")
    free_nonzero_default = None if fnd is None else _number(fnd, "$.free_nonzero_default")
    control_set = _parse_control_set(data.get("control_set"), free_nonzero_default)
    domain = _parse_domain(data.get("domain"), d)
    system = SwitchedSystem(tuple(subsystems), frozenset(switch_set), control_set, domain)

    xi = _vector(_require(data, "xi"), d, "$.xi")
    if not domain.contains(xi):
        raise ConfigError("SCHEMA_ERROR", "initial state lies outside the state domain", "$.xi")
    T = _integer(_require(data, "T"), "$.T", 1)
    epsilon = _number(data.get("epsilon", 1e-9), "$.epsilon")
    if epsilon <= 0.0:
        raise ConfigError("SCHEMA_ERROR", "epsilon must be positive", "$.epsilon")
    published = data.get("published_total")
    return ProblemConfig(
        name=str(data.get("name", "problem")),
        system=system,
        xi=xi,
        T=T,
        epsilon=epsilon,
        abstraction=_parse_abstraction(data.get("abstraction"), d, domain),
        extra_edges=_parse_extra_edges(data.get("extra_edges")),
        published_total=None if published is None else _integer(published, "$.published_total", 0),
        free_nonzero_default=free_nonzero_default,
    )


def parse_config(text: str) -> ProblemConfig:
    """Parse and validate a problem config; errors carry a JSON path."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("PARSE_ERROR", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)


def load_problem(path: Union[str, Path]) -> ProblemConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("PARSE_ERROR", f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def _emit_bound(value: float) -> Union[float, str]:
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return value


def _domain_dict(domain: StateDomain) -> Dict[str, Any]:
    data = domain.to_dict()
    if "lower" in data:
        data["lower"] = [_emit_bound(v) for v in data["lower"]]
        data["upper"] = [_emit_bound(v) for v in data["upper"]]
    return data


def config_to_dict(config: ProblemConfig) -> Dict[str, Any]:
    system = config.system
    data: Dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "name": config.name,
        "d": system.d,
        "N": system.N,
        "subsystems": [{"A": sub.A.reshape(-1).tolist(), "b": sub.b.tolist()} for sub in system.subsystems],
        "switch_set": [list(p) for p in sorted(system.switch_set)],
        "control_set": {"lo": _emit_bound(system.control_set.lower), "hi": _emit_bound(system.control_set.upper)},
        "domain": _domain_dict(system.domain),
        "xi": list(config.xi),
        "T": config.T,
        "epsilon": config.epsilon,
        "abstraction": config.abstraction,
    }
    if config.extra_edges:
        data["extra_edges"] = [
            {"src": s, "dst": t, "alpha": label.alpha, "beta": label.beta_dict()} for s, t, label in config.extra_edges
        ]
    if config.free_nonzero_default is not None:
        data["free_nonzero_default"] = config.free_nonzero_default
    if config.published_total is not None:
        data["published_total"] = config.published_total
    return data


def dump_config(config: ProblemConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"


def save_settings(settings: SolverSettings) -> Tuple[str, ConfigStatus]:
    """Save solver settings to file."""
    try:
        with open(CONFIG_FILE, "w") as f:
            json.dump(asdict(settings), f, indent=2)
        return f"Settings saved to {CONFIG_FILE}", ConfigStatus.SUCCESS
    except Exception as e:
        return f"Failed to save settings: {str(e)}", ConfigStatus.ERROR


def load_settings() -> Tuple[SolverSettings, ConfigStatus]:
    """Load solver settings from file, falling back to the environment."""
    defaults = SolverSettings.from_env()
    try:
        if not CONFIG_FILE.exists():
            return defaults, ConfigStatus.WARNING
        with open(CONFIG_FILE, "r") as f:
            stored = json.load(f)
        known = {k: v for k, v in stored.items() if k in asdict(defaults)}
        merged = {**asdict(defaults), **known}
        return SolverSettings(**merged), ConfigStatus.SUCCESS
    except Exception:
        return defaults, ConfigStatus.ERROR


def reset_settings() -> Tuple[SolverSettings, ConfigStatus]:
    """Remove stored settings and return the environment defaults."""
    try:
        if CONFIG_FILE.exists():
            CONFIG_FILE.unlink()
        return SolverSettings.from_env(), ConfigStatus.SUCCESS
    except Exception:
        return SolverSettings.from_env(), ConfigStatus.ERROR


def apply_overrides(settings: SolverSettings, overrides: Dict[str, Any]) -> SolverSettings:
    values = asdict(settings)
    values.update({k: v for k, v in overrides.items() if v is not None and k in values})
    return SolverSettings(**values)


def merge_epsilon(settings: SolverSettings, config: ProblemConfig) -> SolverSettings:
    return apply_overrides(settings, {"epsilon": config.epsilon})
