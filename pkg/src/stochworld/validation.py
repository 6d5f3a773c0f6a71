"""Per-kind model validation.

``validate`` is pure and idempotent.  It separates three severities:
structural problems (the graph itself is broken), kind violations (the
graph does not satisfy its declared kind), and warnings.  Outgoing-sum
deficits are warnings rather than violations when they sit inside a white
peak, which is the one place removing redundant states may legally leave
the sums short of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import (
    KINDS,
    SINGLE_LABEL_KINDS,
    TOL,
    TRUE_LABEL,
    Model,
    ProbInterval,
)

_SUM_TOL = 1e-6


@dataclass
class ValidationReport:
    structural: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.structural and not self.violations


def _is_smdp_interval(iv: ProbInterval) -> bool:
    for lo, hi in ((0.0, 0.0), (0.0, 1.0), (1.0, 1.0)):
        if abs(iv.lo - lo) <= TOL and abs(iv.hi - hi) <= TOL:
            return True
    return False


def validate(model: Model) -> ValidationReport:
    report = ValidationReport()
    _check_structure(model, report)
    if report.structural:
        return report
    _check_kind(model, report)
    return report


def _check_structure(model: Model, report: ValidationReport) -> None:
    out = report.structural
    if model.kind not in KINDS:
        out.append(f"unknown kind {model.kind!r}")
        return
    if not model.obs:
        out.append("empty observation alphabet")
    if not model.labels:
        out.append("empty label alphabet")
    ids = [s.id for s in model.states]
    if not ids:
        out.append("model has no states")
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        out.append(f"duplicate state ids: {sorted(dup)}")
    initials = [s.id for s in model.states if s.initial]
    if len(initials) != 1:
        out.append(f"expected exactly one initial state, found {len(initials)}")
    known = set(ids)
    seen_arrows = set()
    for a in model.arrows:
        if a.source not in known:
            out.append(f"arrow from undeclared state {a.source!r}")
        if a.target not in known:
            out.append(f"arrow to undeclared state {a.target!r}")
        if a.label not in model.labels:
            out.append(f"arrow label {a.label!r} not in the label alphabet")
        if a.key in seen_arrows:
            out.append(f"duplicate arrow {a.source} {a.label} {a.target}")
        seen_arrows.add(a.key)
    for s in model.states:
        for o in s.trace.probs:
            if o not in model.obs:
                out.append(f"state {s.id}: trace observation {o!r} not in the alphabet")
    if model.priorities and model.kind != "ed":
        report.violations.append("event priorities are only meaningful for ed models")
    for e in model.priorities:
        if e not in model.labels:
            out.append(f"priority for unknown event {e!r}")


def _check_kind(model: Model, report: ValidationReport) -> None:
    bad = report.violations
    kind = model.kind

    if kind in SINGLE_LABEL_KINDS and model.labels != (TRUE_LABEL,):
        bad.append(f'{kind} models have the single label "{TRUE_LABEL}"')

    if kind == "fomm":
        if set(model.obs) != {s.id for s in model.states}:
            bad.append("fomm states must coincide with the observation alphabet")
        for s in model.states:
            if s.trace.is_empty:
                continue  # empty trace defaults to the state's own symbol
            if s.trace.deterministic_obs != s.id:
                bad.append(f"fomm state {s.id} must observe exactly itself")

    if kind == "hmm":
        for s in model.states:
            if s.trace.deterministic_obs is None:
                bad.append(f"hmm state {s.id} needs one deterministic observation")

    if kind in ("mdp", "mdp-fixed"):
        for s in model.states:
            _check_point_trace(model, s, bad)

    # label probabilities must agree across same-label arrows from a state
    for (src, label), arrows in model.out_by_label.items():
        first = arrows[0].label_prob
        for a in arrows[1:]:
            if abs(a.label_prob.lo - first.lo) > TOL or abs(a.label_prob.hi - first.hi) > TOL:
                bad.append(f"inconsistent label probability for {label!r} out of {src}")
                break

    point_lp = kind in ("fomm", "hmm", "mdp-fixed")
    point_ap = kind in ("fomm", "hmm", "mdp", "mdp-fixed")
    for a in model.arrows:
        if kind == "smdp":
            if not _is_smdp_interval(a.label_prob) or not _is_smdp_interval(a.arrow_prob):
                bad.append(
                    f"smdp arrow {a.source} {a.label} {a.target}: intervals must be "
                    "[0,0], [0,1] or [1,1]"
                )
            continue
        if kind == "mdp" and not (a.label_prob.lo <= TOL and a.label_prob.hi >= 1.0 - TOL):
            bad.append(f"mdp agent interval out of {a.source} must be [0,1]")
        if point_lp and not a.label_prob.is_point:
            bad.append(f"arrow {a.source} {a.label} {a.target}: label probability must be a point")
        if point_ap and not a.arrow_prob.is_point:
            bad.append(f"arrow {a.source} {a.label} {a.target}: arrow probability must be a point")
        if kind in SINGLE_LABEL_KINDS and not (
            a.label_prob.is_point and a.label_prob.lo >= 1.0 - TOL
        ):
            bad.append(f"arrow {a.source} {a.label} {a.target}: the event \"true\" has probability 1")

    _check_sums(model, report)


def _check_point_trace(model: Model, s, bad: list) -> None:
    if s.trace.is_empty:
        bad.append(f"state {s.id} needs a trace with point probabilities summing to 1")
        return
    total = 0.0
    for o, p in s.trace.probs.items():
        if not p.is_point:
            bad.append(f"state {s.id}: trace probability for {o!r} must be a point")
            return
        total += p.mid
    if abs(total - 1.0) > _SUM_TOL:
        bad.append(f"state {s.id}: trace probabilities sum to {total:g}, expected 1")


def _check_sums(model: Model, report: ValidationReport) -> None:
    from .analysis import find_white_peak

    kind = model.kind
    if kind == "smdp":
        return
    white = find_white_peak(model)
    groups: dict = {}
    for a in model.arrows:
        groups.setdefault((a.source, a.label), []).append(a)

    def note_deficit(src: str, detail: str) -> None:
        if src in white:
            report.warnings.append(f"{detail} (inside a white peak)")
        else:
            report.violations.append(detail)

    for (src, label), arrows in groups.items():
        lo = sum(a.arrow_prob.lo for a in arrows)
        hi = sum(a.arrow_prob.hi for a in arrows)
        where = f"state {src}" if len(model.labels) == 1 else f"state {src}, {label!r}"
        if kind in ("fomm", "hmm", "mdp", "mdp-fixed"):
            if hi < 1.0 - _SUM_TOL:
                note_deficit(src, f"{where}: outgoing probabilities sum to {hi:g}")
            elif lo > 1.0 + _SUM_TOL:
                report.violations.append(
                    f"{where}: outgoing probabilities sum to {lo:g}, above 1"
                )
        else:  # mdp-plus, ed interval feasibility
            if lo > 1.0 + _SUM_TOL:
                report.violations.append(
                    f"{where}: interval sums exclude any world policy (sum of lower bounds {lo:g} above 1)"
                )
            if hi < 1.0 - _SUM_TOL:
                note_deficit(
                    src,
                    f"{where}: interval sums exclude any world policy (sum of upper bounds {hi:g} below 1)",
                )

    # per-state action mass: fixed agents must sum to 1, interval agents must admit a policy
    if kind in ("mdp-fixed", "mdp-plus"):
        for s in model.states:
            labels = model.labels_from(s.id)
            if not labels:
                continue
            lo = sum(model.agent_interval(s.id, l).lo for l in labels)
            hi = sum(model.agent_interval(s.id, l).hi for l in labels)
            if kind == "mdp-fixed":
                if hi < 1.0 - _SUM_TOL:
                    note_deficit(s.id, f"state {s.id}: action probabilities sum to {hi:g}")
                elif lo > 1.0 + _SUM_TOL:
                    report.violations.append(
                        f"state {s.id}: action probabilities sum to {lo:g}, above 1"
                    )
            else:
                if lo > 1.0 + _SUM_TOL:
                    report.violations.append(
                        f"state {s.id}: interval sums exclude any policy (lower bounds sum to {lo:g})"
                    )
                if hi < 1.0 - _SUM_TOL:
                    note_deficit(
                        s.id,
                        f"state {s.id}: interval sums exclude any policy (upper bounds sum to {hi:g})",
                    )

    # imperfect traces must admit a distribution over the listed observations
    if kind in ("smdp", "mdp-plus", "ed"):
        for s in model.states:
            if s.trace.is_empty:
                continue
            lo = sum(p.lo for p in s.trace.probs.values())
            hi = sum(p.hi for p in s.trace.probs.values())
            if lo > 1.0 + _SUM_TOL or hi < 1.0 - _SUM_TOL:
                report.violations.append(
                    f"state {s.id}: trace intervals exclude any observation distribution"
                )
