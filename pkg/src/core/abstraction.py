#!/usr/bin/env python3

"""Finite state-space abstractions.

Every state x has a *cell*: the tuple of signs of its coordinates, with
|x_k| <= eps read as zero. A region is a union of cells:

* ORIGIN holds the all-zero cell,
* PATTERN holds the cells whose support is exactly `free_coords` and whose
  signs agree with `signs`,
* OTHER holds every cell of the domain not held by another region.

Membership is always intersected with the state domain of the system.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ModelError, RegionError
from core.models import EPS_ZERO, DomainKind, StateDomain, SwitchedSystem
from core.sampling import Cell, cell_samples, corner_probe

logger = logging.getLogger(__name__)


class RegionKind(Enum):
    ORIGIN = "origin"
    PATTERN = "pattern"
    OTHER = "other"


class Sign(Enum):
    POS = "+"
    NEG = "-"
    ANY = "*"

    def admits(self, s: int) -> bool:
        if self is Sign.ANY:
            return s != 0
        return s == (1 if self is Sign.POS else -1)


@dataclass(frozen=True)
class Region:
    id: int
    kind: RegionKind
    free_coords: Tuple[int, ...] = ()
    signs: Tuple[Sign, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "free_coords", tuple(sorted(self.free_coords)))
        if self.kind is RegionKind.PATTERN:
            if not self.free_coords:
                raise RegionError("MALFORMED_ABSTRACTION", f"pattern region {self.id} has no free coordinates")
            if len(self.signs) != len(self.free_coords):
                raise RegionError("MALFORMED_ABSTRACTION", f"pattern region {self.id} needs one sign per free coordinate")

    def matches(self, cell: Cell) -> bool:
        if self.kind is RegionKind.ORIGIN:
            return not any(cell)
        if self.kind is RegionKind.PATTERN:
            support = tuple(k for k, s in enumerate(cell) if s)
            return support == self.free_coords and all(
                sign.admits(cell[k]) for k, sign in zip(self.free_coords, self.signs)
            )
        return False

    def describe(self) -> str:
        if self.kind is RegionKind.ORIGIN:
            return "0"
        if self.kind is RegionKind.OTHER:
            return "other"
        parts = []
        for k, sign in zip(self.free_coords, self.signs):
            parts.append(f"x{k + 1}{'!=0' if sign is Sign.ANY else ('>0' if sign is Sign.POS else '<0')}")
        return ",".join(parts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "free_coords": [k + 1 for k in self.free_coords],
            "signs": [s.value for s in self.signs],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Region":
        return cls(
            id=int(data["id"]),
            kind=RegionKind(data["kind"]),
            free_coords=tuple(int(k) - 1 for k in data.get("free_coords", [])),
            signs=tuple(Sign(s) for s in data.get("signs", [])),
        )


@dataclass(frozen=True)
class Abstraction:
    d: int
    domain: StateDomain
    regions: Tuple[Region, ...]
    name: str = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions or self.regions[0].kind is not RegionKind.ORIGIN:
            raise RegionError("MALFORMED_ABSTRACTION", "region 0 must be the origin region")
        for pos, region in enumerate(self.regions):
            if region.id != pos:
                raise RegionError("MALFORMED_ABSTRACTION", f"region at position {pos} has id {region.id}")
            if pos and region.kind is RegionKind.ORIGIN:
                raise RegionError("MALFORMED_ABSTRACTION", "only region 0 may be the origin region")
            if any(not 0 <= k < self.d for k in region.free_coords):
                raise RegionError("MALFORMED_ABSTRACTION", f"region {region.id} references a coordinate outside 1..{self.d}")
        if sum(1 for r in self.regions if r.kind is RegionKind.OTHER) > 1:
            raise RegionError("MALFORMED_ABSTRACTION", "at most one OTHER region is allowed")

    @property
    def other_id(self) -> Optional[int]:
        return next((r.id for r in self.regions if r.kind is RegionKind.OTHER), None)

    def region(self, region_id: int) -> Region:
        return self.regions[region_id]

    def matching_regions(self, cell: Cell) -> List[int]:
        return [r.id for r in self.regions if r.matches(cell)]

    def region_of_cell(self, cell: Cell) -> int:
        matches = self.matching_regions(cell)
        if len(matches) == 1:
            return matches[0]
        if not matches and self.other_id is not None:
            return self.other_id
        raise RegionError(
            "AMBIGUOUS_REGION",
            f"cell {cell} belongs to {len(matches)} regions",
            {"cell": list(cell), "regions": matches},
        )

    def domain_permits(self, cell: Cell) -> bool:
        return all(s == 0 or s in self.domain.allowed_signs(k) for k, s in enumerate(cell))

    def domain_cells(self) -> Iterator[Cell]:
        options = [(0,) + self.domain.allowed_signs(k) for k in range(self.d)]
        return itertools.product(*options)

    def cells_of(self, region_id: int) -> Tuple[Cell, ...]:
        return _cells_of(self, region_id)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "d": self.d,
            "domain": self.domain.to_dict(),
            "regions": [r.to_dict() for r in self.regions],
        }


@lru_cache(maxsize=256)
def _cells_of(abstraction: Abstraction, region_id: int) -> Tuple[Cell, ...]:
    region = abstraction.region(region_id)
    if region.kind is RegionKind.OTHER:
        return tuple(c for c in abstraction.domain_cells() if not abstraction.matching_regions(c))
    return tuple(c for c in abstraction.domain_cells() if region.matches(c))


def state_cell(x: np.ndarray, eps: float = EPS_ZERO) -> Cell:
    return tuple(0 if abs(v) <= eps else (1 if v > 0 else -1) for v in np.asarray(x, dtype=float))


def classify(abstraction: Abstraction, x: Sequence[float], eps: float = EPS_ZERO) -> int:
    x = np.asarray(x, dtype=float)
    if x.shape != (abstraction.d,):
        raise RegionError("DIMENSION_MISMATCH", f"state has shape {x.shape}, expected ({abstraction.d},)")
    if not abstraction.domain.contains(x, eps):
        raise RegionError("STATE_OUTSIDE_DOMAIN", f"state {x.tolist()} is outside the state domain", {"state": x.tolist()})
    return abstraction.region_of_cell(state_cell(x, eps))


def _pattern_sign(domain: StateDomain, k: int) -> Sign:
    if domain.kind is DomainKind.ORTHANT:
        return Sign.POS if domain.signs[k] > 0 else Sign.NEG
    return Sign.ANY


def build_support_abstraction(system: SwitchedSystem) -> Abstraction:
    """Origin, one region per coordinate axis, and the remainder."""
    d, domain = system.d, system.domain
    regions = [Region(0, RegionKind.ORIGIN)]
    for k in range(d):
        regions.append(Region(k + 1, RegionKind.PATTERN, (k,), (_pattern_sign(domain, k),)))
    if d > 1:
        regions.append(Region(d + 1, RegionKind.OTHER))
    logger.debug("Support abstraction with %d regions", len(regions))
    return Abstraction(d, domain, tuple(regions), name="support")


def is_diagonal(A: np.ndarray, eps: float = EPS_ZERO) -> bool:
    off = A - np.diag(np.diag(A))
    return bool(np.all(np.abs(off) <= eps) and np.all(np.abs(np.diag(A)) > eps))


def is_anti_diagonal(A: np.ndarray, eps: float = EPS_ZERO) -> bool:
    return is_diagonal(np.fliplr(A), eps)


def is_sign_preserving(A: np.ndarray, domain: StateDomain) -> bool:
    """Entrywise nonnegative after flipping coordinates to the orthant's signs."""
    if domain.kind is not DomainKind.ORTHANT:
        return False
    s = np.array(domain.signs, dtype=float)
    return bool(np.all(np.outer(s, s) * A >= 0.0))


def structure_class(A: np.ndarray, domain: StateDomain, eps: float = EPS_ZERO) -> str:
    if is_diagonal(A, eps):
        return "diagonal"
    if is_anti_diagonal(A, eps):
        return "anti_diagonal"
    if is_sign_preserving(A, domain):
        return "nonnegative"
    return "general"


def build_support_lattice(system: SwitchedSystem, eps: float = EPS_ZERO) -> Abstraction:
    """One region per exact support set; needs diagonal A_i and single-entry b_i."""
    for i in system.indices():
        if not is_diagonal(system.A(i), eps):
            raise RegionError("UNSUPPORTED_STRUCTURE", f"A_{i} is not diagonal with nonzero diagonal", {"subsystem": i})
        if int(np.sum(np.abs(system.b(i)) > eps)) != 1:
            raise RegionError("UNSUPPORTED_STRUCTURE", f"b_{i} is not a scaled standard basis vector", {"subsystem": i})
    d, domain = system.d, system.domain
    regions = [Region(0, RegionKind.ORIGIN)]
    for size in range(1, d + 1):
        for support in itertools.combinations(range(d), size):
            signs = tuple(_pattern_sign(domain, k) for k in support)
            regions.append(Region(len(regions), RegionKind.PATTERN, support, signs))
    logger.debug("Support lattice with %d regions", len(regions))
    return Abstraction(d, domain, tuple(regions), name="lattice")


def coordinate_range(domain: StateDomain, k: int, sign: int) -> Tuple[float, float]:
    lo, hi = domain.bounds(k)
    if sign > 0:
        return 0.0, hi
    if sign < 0:
        return lo, 0.0
    return 0.0, 0.0


def _leaves_box(domain: StateDomain, cell: Cell, M: np.ndarray, eps: float) -> bool:
    if domain.kind is not DomainKind.BOX:
        return False
    ranges = [coordinate_range(domain, j, s) for j, s in enumerate(cell)]
    for k, row in enumerate(M):
        lo = sum(min(m * a, m * b) for m, (a, b) in zip(row, ranges) if m)
        hi = sum(max(m * a, m * b) for m, (a, b) in zip(row, ranges) if m)
        box_lo, box_hi = domain.bounds(k)
        if lo < box_lo - eps or hi > box_hi + eps:
            return True
    return False


def image_cells(cell: Cell, M: np.ndarray, eps: float = EPS_ZERO) -> List[Cell]:
    """Every cell M x can occupy for x in `cell` (a superset when signs mix)."""
    options = []
    for row in M:
        signs = {int(np.sign(row[j])) * s for j, s in enumerate(cell) if s and abs(row[j]) > eps}
        if not signs:
            options.append((0,))
        elif len(signs) == 1:
            options.append((signs.pop(),))
        else:
            options.append((-1, 0, 1))
    return list(itertools.product(*options))


def image_targets(abstraction: Abstraction, region_id: int, M: np.ndarray, eps: float = EPS_ZERO) -> FrozenSet[Optional[int]]:
    """Regions reachable from `region_id` under x -> M x; None marks leaving the domain."""
    targets = set()
    for cell in abstraction.cells_of(region_id):
        if _leaves_box(abstraction.domain, cell, M, eps):
            targets.add(None)
        for image in image_cells(cell, M, eps):
            if not abstraction.domain_permits(image):
                targets.add(None)
                continue
            try:
                targets.add(abstraction.region_of_cell(image))
            except RegionError:
                targets.add(None)
    return frozenset(targets)


def certified_target(abstraction: Abstraction, region_id: int, M: np.ndarray, eps: float = EPS_ZERO) -> Optional[int]:
    targets = image_targets(abstraction, region_id, M, eps)
    if len(targets) == 1 and None not in targets:
        return next(iter(targets))
    return None


@dataclass(frozen=True)
class PartitionIssue:
    cell: Cell
    regions: Tuple[int, ...]
    reason: str


def check_partition(abstraction: Abstraction) -> List[PartitionIssue]:
    """Disjointness and coverage of the domain, checked cell by cell."""
    issues = []
    for cell in abstraction.domain_cells():
        matches = tuple(abstraction.matching_regions(cell))
        if len(matches) > 1:
            issues.append(PartitionIssue(cell, matches, "overlap"))
        elif not matches and abstraction.other_id is None:
            issues.append(PartitionIssue(cell, (), "uncovered"))
    return issues


class ValidationVerdict(Enum):
    VALID_STRUCTURAL = "valid_structural"
    VALID_SAMPLED = "valid_sampled"
    INVALID = "invalid"


@dataclass(frozen=True)
class Violation:
    region_id: int
    subsystem: Optional[int]
    witness: Tuple[float, ...]
    witness_target: Optional[int]
    reference: Optional[Tuple[float, ...]]
    reference_target: Optional[int]
    observed_targets: Tuple[Optional[int], ...]
    reason: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "region": self.region_id,
            "subsystem": self.subsystem,
            "witness": list(self.witness),
            "witness_target": self.witness_target,
            "reference": list(self.reference) if self.reference is not None else None,
            "reference_target": self.reference_target,
            "observed_targets": list(self.observed_targets),
            "reason": self.reason,
        }


@dataclass(frozen=True)
class ValidationReport:
    verdict: ValidationVerdict
    violations: Tuple[Violation, ...] = ()
    certified: Tuple[Tuple[int, int], ...] = ()
    sampled: Tuple[Tuple[int, int], ...] = ()
    structure: Tuple[str, ...] = ()
    samples: int = 0
    seed: int = 0
    abstraction: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "abstraction": self.abstraction,
            "structure": list(self.structure),
            "certified_pairs": [list(p) for p in self.certified],
            "sampled_pairs": [list(p) for p in self.sampled],
            "samples": self.samples,
            "seed": self.seed,
            "violations": [v.to_dict() for v in self.violations],
        }


def _target_of(system: SwitchedSystem, abstraction: Abstraction, y: np.ndarray, eps: float) -> Optional[int]:
    if not system.domain.contains(y, eps):
        return None
    try:
        return classify(abstraction, y, eps)
    except RegionError:
        return None


def _sampled_violation(
    system: SwitchedSystem,
    abstraction: Abstraction,
    region_id: int,
    i: int,
    n_samples: int,
    seed: int,
    eps: float,
) -> Optional[Violation]:
    rng = np.random.default_rng([seed, region_id, i])
    A = system.A(i)
    states = cell_samples(system.domain, abstraction.cells_of(region_id), n_samples, rng, [A], eps)
    reference = reference_target = None
    witness = witness_target = None
    observed: List[Optional[int]] = []
    for x in states:
        target = _target_of(system, abstraction, A @ x, eps)
        if target not in observed:
            observed.append(target)
        if reference is None:
            reference, reference_target = x, target
        elif witness is None and target != reference_target:
            witness, witness_target = x, target
    if witness is None:
        return None
    return Violation(
        region_id=region_id,
        subsystem=i,
        witness=tuple(float(v) for v in witness),
        witness_target=witness_target,
        reference=tuple(float(v) for v in reference),
        reference_target=reference_target,
        observed_targets=tuple(observed),
        reason="target region under mu=0 is not constant",
    )


def validate_abstraction(
    system: SwitchedSystem,
    abstraction: Abstraction,
    n_samples: int = 200,
    seed: int = 0,
    eps: float = EPS_ZERO,
) -> ValidationReport:
    """Check partition properties and region-constant mu=0 transitions.

    A (region, subsystem) pair is certified when sign-pattern image analysis
    proves a single target; otherwise it is falsified by sampling. Sampling
    can only show INVALID or VALID_SAMPLED.
    """
    if n_samples < 1:
        raise ModelError("INVALID_ARGUMENT", "n_samples must be at least 1")
    if abstraction.d != system.d or abstraction.domain != system.domain:
        raise RegionError("DOMAIN_MISMATCH", "abstraction and system disagree on dimension or domain")

    violations: List[Violation] = []
    for issue in check_partition(abstraction):
        witness = tuple(float(v) for v in corner_probe(system.domain, issue.cell))
        violations.append(
            Violation(issue.regions[0] if issue.regions else -1, None, witness, None, None, None, issue.regions, issue.reason)
        )

    certified, sampled = [], []
    if not violations:
        for region in abstraction.regions:
            for i in system.indices():
                if certified_target(abstraction, region.id, system.A(i), eps) is not None:
                    certified.append((region.id, i))
                    continue
                sampled.append((region.id, i))
                found = _sampled_violation(system, abstraction, region.id, i, n_samples, seed, eps)
                if found is not None:
                    violations.append(found)

    if violations:
        verdict = ValidationVerdict.INVALID
    elif sampled:
        verdict = ValidationVerdict.VALID_SAMPLED
    else:
        verdict = ValidationVerdict.VALID_STRUCTURAL
    structure = tuple(structure_class(system.A(i), system.domain, eps) for i in system.indices())
    logger.info("Abstraction '%s' validation: %s (%d certified, %d sampled pairs)",
                abstraction.name, verdict.value, len(certified), len(sampled))
    return ValidationReport(
        verdict=verdict,
        violations=tuple(violations),
        certified=tuple(certified),
        sampled=tuple(sampled),
        structure=structure,
        samples=n_samples,
        seed=seed,
        abstraction=abstraction.name,
    )


def abstraction_from_dict(data: Dict[str, Any], d: int, domain: StateDomain, name: str = "explicit") -> Abstraction:
    regions = tuple(Region.from_dict(r) for r in data["regions"])
    return Abstraction(d, domain, regions, name=data.get("name", name))
