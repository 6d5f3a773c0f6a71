"""Line-oriented text formats for models, trajectories and companions.

The model document::

    model <kind> [<name>]
    obs <sym> ...
    act <sym> ...            # action kinds; "event <sym> ..." for ed
    state <id> [initial] [memory] [trace <obs>=<p|[lo,hi]> ...] [phenomena <name> ...]
    arrow <from> <label> <to> [lp=<p|[lo,hi]>] [ap=<p|[lo,hi]>]
    priority <event> <rank>  # ed only
    # comments and blank lines are ignored

Numbers are decimal with up to 12 significant digits; point intervals print
without brackets.  Serialization is canonical (sorted alphabets, states and
arrows), so serialize . parse . serialize is byte-stable.
"""

from __future__ import annotations

from typing import Optional

from .core import (
    ACTION_KINDS,
    KINDS,
    SINGLE_LABEL_KINDS,
    TRUE_LABEL,
    Arrow,
    Model,
    Partition,
    Policy,
    Preference,
    ProbInterval,
    State,
    Step,
    TraceSpec,
    Trajectory,
    canonical,
)
from .errors import FormatError, ModelError
from .validation import validate


def fmt_num(x: float) -> str:
    out = f"{x:.12g}"
    return "0" if out == "-0" else out


def fmt_interval(iv: ProbInterval) -> str:
    if iv.is_point:
        return fmt_num(iv.lo)
    return f"[{fmt_num(iv.lo)},{fmt_num(iv.hi)}]"


def parse_interval(token: str, line: Optional[int] = None) -> ProbInterval:
    try:
        if token.startswith("[") and token.endswith("]"):
            lo_s, hi_s = token[1:-1].split(",")
            return ProbInterval(float(lo_s), float(hi_s))
        p = float(token)
        return ProbInterval(p, p)
    except (ValueError, ModelError) as exc:
        raise FormatError(f"bad probability {token!r} ({exc})", line) from exc


def _default_lp(kind: str) -> Optional[ProbInterval]:
    if kind in SINGLE_LABEL_KINDS:
        return ProbInterval(1.0, 1.0)
    if kind in ("mdp", "smdp", "ed"):
        return ProbInterval(0.0, 1.0)
    return None  # mdp-fixed and mdp-plus must spell the agent interval out


def _default_ap(kind: str) -> ProbInterval:
    return ProbInterval(0.0, 1.0) if kind == "smdp" else ProbInterval(1.0, 1.0)


def _lines(text: str):
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield num, line.split()


def parse_model(text: str) -> Model:
    """Parse a model document; structural problems raise, kind violations do not."""
    kind = None
    name = ""
    obs: list = []
    labels: list = []
    states: list = []
    arrows: list = []
    priorities: dict = {}

    for num, tokens in _lines(text):
        head = tokens[0]
        if head == "model":
            if kind is not None:
                raise FormatError("duplicate model line", num)
            if len(tokens) not in (2, 3):
                raise FormatError("expected: model <kind> [<name>]", num)
            kind = tokens[1]
            if kind not in KINDS:
                raise FormatError(f"unknown kind {kind!r}", num)
            if len(tokens) == 3:
                name = tokens[2]
            continue
        if kind is None:
            raise FormatError("the model line must come first", num)
        if head == "obs":
            obs.extend(tokens[1:])
        elif head in ("act", "event"):
            expected = "event" if kind == "ed" else "act"
            if kind in SINGLE_LABEL_KINDS:
                raise FormatError(f"{kind} models have no {head} alphabet", num)
            if head != expected:
                raise FormatError(f"{kind} models declare labels with {expected!r}", num)
            labels.extend(tokens[1:])
        elif head == "state":
            states.append(_parse_state(tokens, num))
        elif head == "arrow":
            arrows.append(_parse_arrow(tokens, num, kind))
        elif head == "priority":
            if len(tokens) != 3:
                raise FormatError("expected: priority <event> <rank>", num)
            try:
                priorities[tokens[1]] = int(tokens[2])
            except ValueError:
                raise FormatError(f"bad priority rank {tokens[2]!r}", num)
        else:
            raise FormatError(f"unknown directive {head!r}", num)

    if kind is None:
        raise FormatError("missing model line")
    if kind in SINGLE_LABEL_KINDS:
        labels = [TRUE_LABEL]
    elif not labels:
        raise FormatError("missing act/event alphabet")

    model = Model(
        kind=kind,
        obs=tuple(obs),
        labels=tuple(labels),
        states=tuple(states),
        arrows=tuple(arrows),
        priorities=priorities,
        name=name,
    )
    report = validate(model)
    if report.structural:
        raise FormatError("; ".join(report.structural))
    return model


def _parse_state(tokens: list, num: int) -> State:
    if len(tokens) < 2:
        raise FormatError("expected: state <id> ...", num)
    sid = tokens[1]
    initial = False
    memory = False
    probs: dict = {}
    phenomena: list = []
    i = 2
    while i < len(tokens):
        t = tokens[i]
        if t == "initial":
            initial = True
            i += 1
        elif t == "memory":
            memory = True
            i += 1
        elif t == "trace":
            i += 1
            while i < len(tokens) and "=" in tokens[i]:
                o, _, val = tokens[i].partition("=")
                if o in probs:
                    raise FormatError(f"duplicate trace entry for {o!r}", num)
                probs[o] = parse_interval(val, num)
                i += 1
        elif t == "phenomena":
            phenomena = tokens[i + 1 :]
            i = len(tokens)
        else:
            raise FormatError(f"unexpected token {t!r} in state line", num)
    return State(sid, initial, TraceSpec(probs, memory, tuple(phenomena)))


def _parse_arrow(tokens: list, num: int, kind: str) -> Arrow:
    if len(tokens) < 4:
        raise FormatError("expected: arrow <from> <label> <to> ...", num)
    src, label, dst = tokens[1], tokens[2], tokens[3]
    lp = _default_lp(kind)
    ap = _default_ap(kind)
    for t in tokens[4:]:
        key, _, val = t.partition("=")
        if key == "lp":
            lp = parse_interval(val, num)
        elif key == "ap":
            ap = parse_interval(val, num)
        else:
            raise FormatError(f"unexpected token {t!r} in arrow line", num)
    if lp is None:
        raise FormatError(f"{kind} arrows must declare lp=<interval>", num)
    return Arrow(src, label, dst, lp, ap)


def serialize_model(model: Model) -> str:
    """Canonical text form; round-trips through parse_model."""
    m = canonical(model)
    lines = [f"model {m.kind} {m.name}".rstrip()]
    lines.append("obs " + " ".join(m.obs))
    if m.kind == "ed":
        lines.append("event " + " ".join(m.labels))
    elif m.kind in ACTION_KINDS:
        lines.append("act " + " ".join(m.labels))
    for s in m.states:
        parts = ["state", s.id]
        if s.initial:
            parts.append("initial")
        if s.trace.memory:
            parts.append("memory")
        if s.trace.probs:
            parts.append("trace")
            for o in sorted(s.trace.probs):
                parts.append(f"{o}={fmt_interval(s.trace.probs[o])}")
        if s.trace.phenomena:
            parts.append("phenomena")
            parts.extend(sorted(s.trace.phenomena))
        lines.append(" ".join(parts))
    for a in m.arrows:
        lines.append(
            f"arrow {a.source} {a.label} {a.target} "
            f"lp={fmt_interval(a.label_prob)} ap={fmt_interval(a.arrow_prob)}"
        )
    for e, rank in m.priorities.items():
        lines.append(f"priority {e} {rank}")
    return "\n".join(lines) + "\n"


# -- trajectories ------------------------------------------------------------


def parse_trajectory(text: str, model: Optional[Model] = None) -> Trajectory:
    """Parse a trajectory document.

    Symbols are checked against the model (or inline obs/act headers) when
    either is given; bare documents declare their symbols by use.  A missing
    t0 header defaults to the end: all recorded data is past.
    """
    steps: list = []
    t0 = None
    obs_alpha = set(model.obs) if model else None
    act_alpha = set(model.labels) if model else None

    for num, tokens in _lines(text):
        head = tokens[0]
        if head == "t0" and len(tokens) == 2 and not steps:
            try:
                t0 = int(tokens[1])
            except ValueError:
                raise FormatError(f"bad t0 {tokens[1]!r}", num)
            continue
        if head == "obs" and not steps:
            obs_alpha = (obs_alpha or set()) | set(tokens[1:])
            continue
        if head == "act" and not steps:
            act_alpha = (act_alpha or set()) | set(tokens[1:])
            continue
        if len(tokens) > 2:
            raise FormatError("expected: <obs> [<act>|-]", num)
        o = tokens[0]
        a = tokens[1] if len(tokens) == 2 else "-"
        if obs_alpha is not None and o not in obs_alpha:
            raise FormatError(f"unknown observation {o!r}", num)
        act = None if a == "-" else a
        if act is not None and act_alpha is not None and act not in act_alpha:
            raise FormatError(f"unknown action {a!r}", num)
        steps.append(Step(o, act))

    if t0 is None:
        t0 = len(steps)
    if not 0 <= t0 <= len(steps):
        raise FormatError(f"t0 = {t0} outside [0, {len(steps)}]")
    return Trajectory(tuple(steps), t0)


def serialize_trajectory(trajectory: Trajectory) -> str:
    lines = [f"t0 {trajectory.t0}"]
    for s in trajectory.steps:
        lines.append(f"{s.obs} {s.act if s.act is not None else '-'}")
    return "\n".join(lines) + "\n"


# -- graphviz ----------------------------------------------------------------

_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#e377c2",
    "#17becf",
    "#bcbd22",
    "#7f7f7f",
)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(model: Model) -> str:
    """Render the model as a Graphviz digraph, one edge colour per label."""
    m = canonical(model)
    colour = {label: _PALETTE[i % len(_PALETTE)] for i, label in enumerate(m.labels)}
    initial = {s.id for s in m.states if s.initial}
    lines = ["digraph model {", "  rankdir=LR;"]
    for s in m.states:
        shape = ", peripheries=2" if s.id in initial else ""
        lines.append(f"  {_quote(s.id)} [shape=circle{shape}];")
    for a in m.arrows:
        text = f"{a.label} {fmt_interval(a.label_prob)} {fmt_interval(a.arrow_prob)}"
        lines.append(
            f"  {_quote(a.source)} -> {_quote(a.target)} "
            f"[label={_quote(text)}, color={_quote(colour[a.label])}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- companion file formats ----------------------------------------------------


def parse_partition(text: str, model: Optional[Model] = None) -> Partition:
    """One line per class, state ids whitespace-separated."""
    classes = [frozenset(tokens) for _, tokens in _lines(text)]
    partition = Partition(tuple(classes))
    if model is not None:
        partition.check(model)
    return partition


def serialize_partition(partition: Partition) -> str:
    lines = [" ".join(sorted(c)) for c in partition.classes]
    return "\n".join(sorted(lines)) + "\n"


def parse_preference(text: str) -> Preference:
    """Lines of the form: state <id>: a1 > a2 > a3"""
    order: dict = {}
    for num, tokens in _lines(text):
        line = " ".join(tokens)
        if tokens[0] != "state" or ":" not in line:
            raise FormatError("expected: state <id>: a1 > a2 > ...", num)
        head, _, rest = line.partition(":")
        sid = head.split()[1]
        ranked = tuple(t.strip() for t in rest.split(">") if t.strip())
        if not ranked:
            raise FormatError(f"no actions ranked for state {sid}", num)
        order[sid] = ranked
    return Preference(order)


def serialize_preference(pref: Preference) -> str:
    lines = [f"state {s}: " + " > ".join(ranked) for s, ranked in sorted(pref.order.items())]
    return "\n".join(lines) + "\n"


def parse_policy(text: str) -> Policy:
    """Lines of the form: <state> <action> <probability>"""
    probs: dict = {}
    for num, tokens in _lines(text):
        if len(tokens) != 3:
            raise FormatError("expected: <state> <action> <probability>", num)
        try:
            probs[(tokens[0], tokens[1])] = float(tokens[2])
        except ValueError:
            raise FormatError(f"bad probability {tokens[2]!r}", num)
    return Policy(probs)


def serialize_policy(policy: Policy) -> str:
    lines = [f"{s} {a} {fmt_num(p)}" for (s, a), p in sorted(policy.probs.items())]
    return "\n".join(lines) + "\n"


def parse_event_arrows(text: str, model: Model, name: str = "event"):
    """Arrow triples `<from> <label> <to>`, resolved against the model."""
    from .constructions import EventSet

    by_key = {a.key: a for a in model.arrows}
    picked = []
    for num, tokens in _lines(text):
        if len(tokens) != 3:
            raise FormatError("expected: <from> <label> <to>", num)
        key = (tokens[0], tokens[1], tokens[2])
        if key not in by_key:
            raise FormatError(f"no arrow {' '.join(key)} in the model", num)
        picked.append(by_key[key])
    return EventSet(name, frozenset(picked))
