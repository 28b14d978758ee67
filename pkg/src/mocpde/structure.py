"""Monte Carlo falsification of the structure condition for an (F, f) pair.

For each sample: jet, direction, admissible tuple, time; then

    lhs = F(t, y, r, phi' e, Y) - F(t, x, v, phi' e, X)
    rhs = -2 f(t, s, phi, phi', phi'')

and a violation is recorded when lhs > rhs + tol (1 + |rhs|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


from .admissible import sample_tuples
from .errors import EvaluationError, MocPdeError
from .operators import BOX, BUILTIN_NAMES, OneDimOp, OperatorSpec, eval_F, eval_f, get_pair

DEFAULT_P_EXPONENTS = (1.5, 2.0, 3.0, 4.0)
# pairs whose default instantiation is swept over p
_P_SWEPT = ("quasilinear-isotropic", "lipschitz-general")


@dataclass
class Violation:
    index: int
    tuple: object
    lhs: float
    rhs: float

    def to_dict(self):
        return {"index": self.index, "lhs": self.lhs, "rhs": self.rhs, "tuple": self.tuple.to_dict()}


@dataclass
class SCReport:
    samples: int
    violations: list = field(default_factory=list)
    worst_slack: float = math.inf
    config: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self):
        return self.error is None and not self.violations

    def merge(self, other: "SCReport") -> "SCReport":
        offset = self.samples
        shifted = [Violation(v.index + offset, v.tuple, v.lhs, v.rhs) for v in other.violations]
        return SCReport(self.samples + other.samples, self.violations + shifted,
                        min(self.worst_slack, other.worst_slack), dict(self.config),
                        self.error or other.error)

    def to_dict(self):
        return {
            "samples": self.samples,
            "violations": len(self.violations),
            "worst_slack": self.worst_slack,
            "ok": self.ok,
            "error": self.error,
            "config": self.config,
            "counterexamples": [v.to_dict() for v in self.violations[:20]],
        }


def sc_sides(F: OperatorSpec, f: OneDimOp, tup, t):
    jet = tup.jet
    p = jet.dphi * tup.e
    lhs = eval_F(F, t, tup.y, tup.r, p, tup.Y) - eval_F(F, t, tup.x, tup.v, p, tup.X)
    rhs = -2.0 * eval_f(f, jet)
    return lhs, rhs


def check_pair(F: OperatorSpec, f: OneDimOp, n: int, samples: int, seed: int = 0, tol: float = 1e-8,
               grad_sign="nonneg", mode="mixed", box=BOX, jet_filter=None) -> SCReport:
    """Sample the structure condition; ``mode`` is mixed (50/50), interior or boundary.

    ``jet_filter`` optionally rejects jets (redrawn from the same sample stream).
    """
    if samples < 1:
        raise MocPdeError("samples >= 1 required")
    if n < 1:
        raise MocPdeError("dimension n >= 1 required")
    report = SCReport(samples, config=dict(F=F.name or F.kind.value, f=f.name or f.kind.value, n=n,
                                           seed=seed, tol=tol, grad_sign=grad_sign, mode=mode))
    stream = sample_tuples(samples, n, seed, mode, box, grad_sign, jet_filter)
    for i, tup in enumerate(stream):
        try:
            lhs, rhs = sc_sides(F, f, tup, tup.jet.t)
        except Exception as exc:  # attach the offending tuple
            raise EvaluationError(f"evaluation failed at sample {i}: {exc}", tup) from exc
        slack = rhs - lhs
        report.worst_slack = min(report.worst_slack, slack)
        if lhs > rhs + tol * (1 + abs(rhs)):
            report.violations.append(Violation(i, tup, lhs, rhs))
    return report


def check_all_builtin(samples=10_000, seed=0, tol=1e-8, dims=(2, 3), p_exponents=DEFAULT_P_EXPONENTS):
    """Run check_pair on every catalog pair; errors are recorded, not raised.

    Samples are split evenly over ``dims`` and, for the p-dependent pairs, over
    ``p_exponents``; the per-pair report aggregates the pieces.
    """
    if samples < 1:
        raise MocPdeError("samples >= 1 required")
    out = {}
    for name in BUILTIN_NAMES:
        variants = [dict(p=p) for p in p_exponents] if name in _P_SWEPT else [{}]
        pieces = [(n, kw) for n in dims for kw in variants]
        chunk = max(1, samples // len(pieces))
        report = None
        for j, (n, kw) in enumerate(pieces):
            F, f = get_pair(name, **kw)
            sub_seed = seed * 1000 + j
            try:
                piece = check_pair(F, f, n, chunk, sub_seed, tol)
            except Exception as exc:
                piece = SCReport(0, error=f"{type(exc).__name__}: {exc}")
            report = piece if report is None else report.merge(piece)
        report.config["pieces"] = [dict(n=n, **kw) for n, kw in pieces]
        out[name] = report
    return out
