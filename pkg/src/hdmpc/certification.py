#!/usr/bin/env python3
"""
Certification checklist

Runs every structural check an instance must pass before it is solved and
collects the outcomes in one report. Checks never raise for a failed
condition; they record it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .condense import condense
from .config_manager import SolverOptions
from .error_handler import CertificationError
from .inner_jacobi import certify_contraction
from .instance import ConfigDocument
from .model import check_schur, check_terminal_invariance
from .tighten import initial_norm_bound, slater_certificate

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
RUNTIME = "runtime-checked"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str = ""
    value: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.status != FAIL


@dataclass
class CertificationReport:
    """Outcome of all checks; ``passed`` ignores runtime-checked rows."""

    checks: List[CheckResult] = field(default_factory=list)
    gamma: Optional[float] = None
    phi: Optional[float] = None
    L0: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "gamma": self.gamma,
            "phi": self.phi,
            "L0": self.L0,
            "checks": [
                {"name": c.name, "status": c.status, "detail": c.detail, "value": c.value}
                for c in self.checks
            ],
        }


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def certify_instance(
    doc: ConfigDocument, options: Optional[SolverOptions] = None
) -> CertificationReport:
    """Schur, terminal invariance, terminal input admissibility, Slater at
    t = 0, L_0 and weak coupling; the cost-decrease assumption is reported as
    runtime-checked."""
    opts = options or SolverOptions()
    network = doc.network
    report = CertificationReport()

    try:
        schur = check_schur(network, doc.K)
        report.checks.append(
            CheckResult("schur", _status(schur.passed), "spectral radius of A+BK", schur.radius)
        )
    except CertificationError as e:
        report.checks.append(CheckResult("schur", FAIL, e.message))

    try:
        inv = check_terminal_invariance(network, doc.K)
        report.checks.append(
            CheckResult(
                "terminal_invariance",
                _status(inv.passed),
                f"worst slack over {inv.vertex_count} vertices",
                inv.worst_margin,
            )
        )
        report.checks.append(
            CheckResult(
                "terminal_inputs",
                _status(inv.admissible),
                "worst slack of K v against the input constraints",
                inv.input_margin,
            )
        )
    except CertificationError as e:
        report.checks.append(CheckResult("terminal_invariance", FAIL, e.message))

    p = condense(network)
    slater = slater_certificate(p, doc.u_bar0, doc.x0)
    report.checks.append(
        CheckResult("slater", _status(slater.is_strict), "minimum margin at t=0", slater.min_margin)
    )

    L0 = initial_norm_bound(p, doc.x0, opts.l0_vertex_limit)
    report.L0 = L0
    report.checks.append(CheckResult("norm_bound", _status(math.isfinite(L0)), "L0", L0))

    cert = certify_contraction(p, strict=False)
    if cert.passed:
        report.gamma = cert.gamma
        report.phi = cert.phi
        report.checks.append(CheckResult("weak_coupling", PASS, "contraction modulus phi", cert.phi))
    else:
        err = cert.failure()
        report.checks.append(CheckResult("weak_coupling", FAIL, err.message, err.coupling))

    report.checks.append(CheckResult("cost_decrease", RUNTIME, "verified at every step"))
    logger.debug("certification passed=%s", report.passed)
    return report
