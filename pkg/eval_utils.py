import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Union

from numerics import BallReal

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
UNCERTIFIED = "uncertified"
STATUSES = (PASS, FAIL, UNCERTIFIED)


@dataclass
class CheckResult:
    description: str
    status: str
    witness: str = ""


class VerificationReport:
    def __init__(self, name, params=None):
        self.name = name
        self.params = dict(params or {})
        self.artifacts = {}
        self.init()

    def init(self):
        self.checks: List[CheckResult] = []

    def update(self, description, status, witness=""):
        if isinstance(status, bool):
            status = PASS if status else FAIL
        if status not in STATUSES:
            raise ValueError(f"unknown check status {status!r}")
        self.checks.append(CheckResult(description, status, str(witness)))
        log = logger.warning if status != PASS else logger.debug
        log("[%s] %s: %s (%s)", self.name, description, status, witness)

    def compute(self):
        counts = {status: 0 for status in STATUSES}
        for check in self.checks:
            counts[check.status] += 1
        return {**counts, "total": len(self.checks), "passed": counts[FAIL] == 0}

    @property
    def passed(self) -> bool:
        return all(check.status != FAIL for check in self.checks)

    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_lines(self) -> List[str]:
        return [
            f"CHECK {self.name} {check.status} {check.description}: {check.witness}"
            for check in self.checks
        ]

    def to_text(self) -> str:
        summary = self.compute()
        lines = [f"== {self.name} =="]
        lines.extend(f"  {key} = {value}" for key, value in self.params.items())
        lines.extend(f"  [{check.status:>11}] {check.description}  {check.witness}" for check in self.checks)
        lines.append(
            f"  {summary['pass']} pass, {summary['fail']} fail, {summary['uncertified']} uncertified"
        )
        return "\n".join(lines)


def closeness_status(value: BallReal, target: Union[int, Fraction], tol: float) -> str:
    """pass: ball holds target and midpoint is within tol; fail: ball excludes target."""
    if not value.contains(target):
        return FAIL
    if abs(float(value.midpoint) - float(target)) <= tol:
        return PASS
    return UNCERTIFIED


def overlap_status(a: BallReal, b: BallReal, rel_tol: float = 1e-3) -> str:
    """pass: balls overlap and are narrow relative to their size; fail: disjoint."""
    if not a.overlaps(b):
        return FAIL
    scale = max(1.0, abs(float(a.midpoint)), abs(float(b.midpoint)))
    if float(a.radius) + float(b.radius) <= rel_tol * scale:
        return PASS
    return UNCERTIFIED


def relative_status(value: BallReal, target: Union[int, Fraction], rel_tol: float) -> str:
    """pass: |value - target| <= rel_tol |target| everywhere in the ball (absolute when target is 0)."""
    scale = abs(Fraction(target)) or Fraction(1)
    mid, rad = value.as_fractions()
    worst = abs(mid - Fraction(target)) + rad
    if worst <= Fraction(rel_tol) * scale:
        return PASS
    if value.contains(target):
        return UNCERTIFIED
    return FAIL


def trend_status(densities: Sequence[Fraction], small: float = 0.05) -> str:
    """Downward trend of a density curve sampled at increasing X."""
    pairs = list(zip(densities, densities[1:]))
    if all(a > b for a, b in pairs):
        return PASS
    if all(a >= b for a, b in pairs) and densities[-1] == 0:
        return PASS
    if densities[-1] < densities[0] or densities[-1] <= small:
        return UNCERTIFIED
    return FAIL


def ball_summary(values: Dict[int, BallReal]) -> str:
    return ", ".join(f"{n}: {value}" for n, value in sorted(values.items()))
