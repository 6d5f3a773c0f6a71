"""Event-driven runtime over recorded trajectories.

Direct detection evaluates characteristic functions on bounded past/future
windows around each step; indirect detection compares the observation
distributions of two adjacent sliding windows and flags distribution
shifts.  Tracking advances a belief over an ED model's states only when a
monitored event occurs, conditioning on each step's observation in
between; trace memory remembers the last observation per memory-flagged
state.  Hierarchies compose through derived events: a tracked model's
state becoming dominant is itself an event another model can monitor.

Step semantics match the simulator: the observation at step t is seen
first, then the step's events fire and move the state, taking effect from
step t+1 on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from .core import (
    FULL,
    Belief,
    EventOccurrence,
    EventStream,
    Model,
    ProbInterval,
    Trajectory,
)
from .errors import FormatError, ModelError, TrackingError

#: Last observation per memory-flagged state, absent until first visit.
TraceMemory = Dict[str, str]


@dataclass(frozen=True)
class CharFn:
    """Interval-valued event detector over past and future windows.

    Returns [0, 1] whenever a window sticks out of the recorded data: no
    data means no knowledge.  Action and observation matchers return the
    points [1,1] or [0,0].
    """

    name: str
    kind: str  # action-match | obs-match | pattern | table
    past_len: int = 0
    future_len: int = 1
    action: Optional[str] = None
    obs: Optional[str] = None
    past_pattern: Optional[str] = None
    future_pattern: Optional[str] = None
    table: Mapping[tuple, ProbInterval] = field(default_factory=dict)

    @property
    def window(self) -> int:
        return self.past_len + self.future_len

    def evaluate(self, trajectory: Trajectory, t: int) -> ProbInterval:
        if t - self.past_len < 0 or t + self.future_len > len(trajectory):
            return FULL
        past = trajectory.steps[t - self.past_len : t]
        future = trajectory.steps[t : t + self.future_len]
        if self.kind == "action-match":
            act = future[0].act
            if act is None:
                return FULL
            return ProbInterval.point(1.0 if act == self.action else 0.0)
        if self.kind == "obs-match":
            return ProbInterval.point(1.0 if future[0].obs == self.obs else 0.0)
        if self.kind == "pattern":
            past_word = ",".join(s.obs for s in past)
            future_word = ",".join(s.obs for s in future)
            ok = True
            if self.past_pattern is not None:
                ok = ok and re.fullmatch(self.past_pattern, past_word) is not None
            if self.future_pattern is not None:
                ok = ok and re.fullmatch(self.future_pattern, future_word) is not None
            return ProbInterval.point(1.0 if ok else 0.0)
        if self.kind == "table":
            key = (tuple(s.obs for s in past), tuple(s.obs for s in future))
            return self.table.get(key, FULL)
        raise ModelError(f"unknown characteristic function kind {self.kind!r}")


def detect_direct(
    trajectory: Trajectory, fns, threshold: float = 0.5
) -> EventStream:
    """Evaluate characteristic functions at every step; an occurrence is
    emitted when the interval's lower bound clears the threshold.

    When same-named functions disagree at a step, the verdict of the one
    with the longer combined window stands.
    """
    by_name: dict = {}
    for fn in fns:
        by_name.setdefault(fn.name, []).append(fn)
    occurrences = []
    for t in range(len(trajectory)):
        for name in sorted(by_name):
            variants = sorted(by_name[name], key=lambda f: -f.window)
            value = variants[0].evaluate(trajectory, t)
            if value.lo >= threshold:
                occurrences.append(EventOccurrence(t, name, value, "direct"))
    return EventStream(tuple(occurrences))


def _distribution(window) -> dict:
    counts: dict = {}
    for o in window:
        counts[o] = counts.get(o, 0) + 1
    total = len(window)
    return {o: c / total for o, c in counts.items()}


def _tv_distance(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def detect_indirect(
    trajectory: Trajectory, window: int, threshold: float
) -> Tuple[EventStream, List[Tuple[int, int]]]:
    """Sliding two-window total-variation change-point scan.

    Boundary hits closer than `window` steps merge into the maximal-distance
    point, so detection latency is up to `window` steps.  Two regimes with
    identical observation distributions are invisible to this method: loops
    cannot be found indirectly.
    """
    n = len(trajectory)
    if n < 2 * window:
        raise ModelError(f"trajectory of {n} steps is too short for window {window}")
    obs = trajectory.observations()
    hits = []
    for t in range(window, n - window + 1):
        tv = _tv_distance(
            _distribution(obs[t - window : t]), _distribution(obs[t : t + window])
        )
        if tv > threshold:
            hits.append((t, tv))
    merged: list = []
    for t, tv in hits:
        if merged and t - merged[-1][-1][0] <= window:
            merged[-1].append((t, tv))
        else:
            merged.append([(t, tv)])
    occurrences = []
    boundaries = []
    for cluster in merged:
        t, tv = max(cluster, key=lambda item: (item[1], -item[0]))
        lo = (tv - threshold) / (1.0 - threshold) if threshold < 1.0 else 1.0
        occurrences.append(
            EventOccurrence(t, "invisible", ProbInterval(min(max(lo, 0.0), 1.0), 1.0), "indirect")
        )
        boundaries.append(t)
    cuts = [0] + boundaries + [n]
    segments = [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]
    return EventStream(tuple(occurrences)), segments


# -- tracking ---------------------------------------------------------------------


@dataclass
class TrackResult:
    """Per-step beliefs (after that step's observation, before its events),
    the belief after everything processed, trace memory, warnings."""

    beliefs: List[Belief]
    final_belief: Belief
    memory: TraceMemory
    warnings: List[str]


def _event_rank(model: Model, label: str) -> tuple:
    return (model.priorities.get(label, float("inf")), label)


def _apply_event(model: Model, belief: dict, label: str, warnings: list, t: int) -> tuple:
    """Move belief mass through the event's arrows; mass in states the event
    cannot leave stays put (with a warning)."""
    moved: dict = {}
    stuck = []
    approx = False
    for sid, mass in belief.items():
        arrows = model.out_by_label.get((sid, label), ())
        if not arrows:
            stuck.append(sid)
            moved[sid] = moved.get(sid, 0.0) + mass
            continue
        weights = [a.arrow_prob.mid for a in arrows]
        if any(not a.arrow_prob.is_point for a in arrows):
            approx = True
        total = sum(weights)
        if total <= 0.0:
            stuck.append(sid)
            moved[sid] = moved.get(sid, 0.0) + mass
            continue
        for a, w in zip(arrows, weights):
            if w > 0.0:
                moved[a.target] = moved.get(a.target, 0.0) + mass * (w / total)
    if stuck:
        warnings.append(
            f"step {t}: event {label!r} impossible in {' '.join(sorted(stuck))}; belief kept"
        )
    return moved, approx


def _track(
    model: Model,
    trajectory: Trajectory,
    events: EventStream,
    start: int = 0,
    initial: Optional[dict] = None,
    collision: Optional[str] = None,
) -> tuple:
    """Run the tracker from `start`; returns (beliefs, final_belief, memory,
    warnings, failed_at) where failed_at is None on full success."""
    if model.kind != "ed":
        raise ModelError("tracking needs an event-driven model")
    if collision is None:
        collision = "priority" if model.priorities else "both-arrows"
    if collision not in ("priority", "both-arrows"):
        raise ModelError(f"unknown collision rule {collision!r}")
    belief = dict(initial) if initial is not None else {model.initial_state.id: 1.0}
    approx = False
    beliefs: list = []
    memory: TraceMemory = {}
    warnings: list = []
    by_time: dict = {}
    for occ in events.occurrences:
        if occ.label not in model.labels:
            warnings.append(f"step {occ.time}: unknown event label {occ.label!r} ignored")
            continue
        by_time.setdefault(occ.time, []).append(occ.label)
    for t in range(start, len(trajectory)):
        obs = trajectory.steps[t].obs
        conditioned = {
            sid: mass
            for sid, mass in belief.items()
            if model.by_id[sid].trace.prob(obs).hi > 0.0
        }
        if len(conditioned) != len(belief):
            approx = True
        total = sum(conditioned.values())
        if total <= 0.0:
            return beliefs, None, memory, warnings, t
        belief = {sid: mass / total for sid, mass in conditioned.items()}
        beliefs.append(Belief(belief, approximate=approx))
        top = min(belief, key=lambda s: (-belief[s], s))
        if model.by_id[top].trace.memory:
            memory[top] = obs
        labels = sorted(set(by_time.get(t, ())), key=lambda l: _event_rank(model, l))
        if labels and collision == "priority":
            labels = labels[:1]
        for label in labels:
            belief, moved_approx = _apply_event(model, belief, label, warnings, t)
            approx = approx or moved_approx
    return beliefs, Belief(belief, approximate=approx), memory, warnings, None


def track(
    model: Model,
    trajectory: Trajectory,
    events: EventStream,
    collision: Optional[str] = None,
) -> TrackResult:
    """Belief tracking over an ED model: the state changes only on monitored
    events, each step's observation filters the belief in between."""
    beliefs, final, memory, warnings, failed = _track(
        model, trajectory, events, collision=collision
    )
    if failed is not None:
        raise TrackingError(failed)
    return TrackResult(beliefs, final, memory, warnings)


@dataclass(frozen=True)
class ValiditySpan:
    start: int
    end: int  # exclusive
    permanent_so_far: bool = False


def phenomenon_validity(
    model: Model, trajectory: Trajectory, events: EventStream
) -> List[ValiditySpan]:
    """Maximal step intervals on which the model tracks the trajectory.

    Restarts use a uniform belief (the phenomenon may re-emerge in any
    state).  A span covering everything recorded is flagged permanent so
    far; whether it stays permanent beyond the data is unknowable.
    """
    n = len(trajectory)
    uniform = {s.id: 1.0 / len(model.states) for s in model.states}

    def run(i: int) -> int:
        _, _, _, _, failed = _track(model, trajectory, events, start=i, initial=uniform)
        return n if failed is None else failed

    spans = []
    best = -1
    for i in range(n):
        end = run(i)
        if end > i and end > best:
            spans.append(ValiditySpan(i, end, permanent_so_far=(i == 0 and end == n)))
            best = end
    return spans


def derived_events(model: Model, beliefs, threshold: float = 0.5) -> EventStream:
    """Events of the form "<model>.<state>": the state's belief mass crossed
    above the threshold at that step.  These streams feed higher-level
    models' track calls."""
    name = model.name or "ed"
    occurrences = []
    for t in range(1, len(beliefs)):
        for s in model.states:
            now = beliefs[t].mass(s.id)
            before = beliefs[t - 1].mass(s.id)
            if now > threshold >= before:
                occurrences.append(
                    EventOccurrence(t, f"{name}.{s.id}", ProbInterval.point(now), "derived")
                )
    return EventStream(tuple(occurrences))


# -- companion file formats ----------------------------------------------------------


def parse_charfns(text: str, base_dir=None) -> List[CharFn]:
    """Characteristic function documents::

        charfn <name> action=<a>
        charfn <name> obs=<o>
        charfn <name> pattern [past=<regex>] [future=<regex>] [plen=<n>] [flen=<n>]
        charfn <name> table <file>
        charfn <name> table plen=<n> flen=<n>
        row <past-csv|-> <future-csv|-> <p|[lo,hi]>   # rows attach to the table above

    Pattern regexes match the comma-joined observation word of the window.
    Table rows live inline or in a referenced file of the same row syntax
    (resolved against ``base_dir``); window lengths default to the longest row.
    """
    from pathlib import Path

    from .format import parse_interval

    fns: list = []
    pending_table: Optional[dict] = None

    def parse_row(tokens, num):
        if len(tokens) != 3:
            raise FormatError("expected: <past-csv|-> <future-csv|-> <interval>", num)
        past = tuple(tokens[0].split(",")) if tokens[0] != "-" else ()
        future = tuple(tokens[1].split(",")) if tokens[1] != "-" else ()
        return (past, future), parse_interval(tokens[2], num)

    def flush():
        nonlocal pending_table
        if pending_table is not None:
            rows = pending_table["rows"]
            plen = pending_table["plen"] or max((len(p) for p, _ in rows), default=0)
            flen = pending_table["flen"] or max((len(f) for _, f in rows), default=0)
            fns.append(CharFn(pending_table["name"], "table", plen, flen, table=rows))
            pending_table = None

    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "row":
            if pending_table is None:
                raise FormatError("row outside a table charfn", num)
            key, value = parse_row(tokens[1:], num)
            pending_table["rows"][key] = value
            continue
        flush()
        if tokens[0] != "charfn" or len(tokens) < 3:
            raise FormatError("expected: charfn <name> <spec>", num)
        name = tokens[1]
        spec = tokens[2]
        if spec.startswith("action="):
            fns.append(CharFn(name, "action-match", 0, 1, action=spec[len("action=") :]))
        elif spec.startswith("obs="):
            fns.append(CharFn(name, "obs-match", 0, 1, obs=spec[len("obs=") :]))
        elif spec == "pattern":
            past = future = None
            plen = 0
            flen = 1
            for t in tokens[3:]:
                key, _, val = t.partition("=")
                if key == "past":
                    past = val
                elif key == "future":
                    future = val
                elif key == "plen":
                    plen = int(val)
                elif key == "flen":
                    flen = int(val)
                else:
                    raise FormatError(f"unexpected token {t!r}", num)
            if past is None and future is None:
                raise FormatError("pattern needs past= or future=", num)
            fns.append(
                CharFn(name, "pattern", plen, flen, past_pattern=past, future_pattern=future)
            )
        elif spec == "table":
            pending_table = {"name": name, "plen": 0, "flen": 0, "rows": {}}
            for t in tokens[3:]:
                key, _, val = t.partition("=")
                if key == "plen":
                    pending_table["plen"] = int(val)
                elif key == "flen":
                    pending_table["flen"] = int(val)
                elif not val:  # a bare token names the row file
                    path = Path(base_dir) / t if base_dir else Path(t)
                    for rnum, rline in enumerate(path.read_text().splitlines(), start=1):
                        rline = rline.strip()
                        if not rline or rline.startswith("#"):
                            continue
                        rkey, rvalue = parse_row(rline.split(), rnum)
                        pending_table["rows"][rkey] = rvalue
                else:
                    raise FormatError(f"unexpected token {t!r}", num)
        else:
            raise FormatError(f"unknown charfn spec {spec!r}", num)
    flush()
    return fns


def parse_event_stream(text: str) -> EventStream:
    """Lines of the form `<time> <label> <interval> <provenance>`."""
    from .format import parse_interval

    occurrences = []
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) not in (3, 4):
            raise FormatError("expected: <time> <label> <interval> [<provenance>]", num)
        try:
            time = int(tokens[0])
        except ValueError:
            raise FormatError(f"bad time {tokens[0]!r}", num)
        confidence = parse_interval(tokens[2], num)
        provenance = tokens[3] if len(tokens) == 4 else "direct"
        occurrences.append(EventOccurrence(time, tokens[1], confidence, provenance))
    occurrences.sort(key=lambda o: o.time)
    return EventStream(tuple(occurrences))


def serialize_event_stream(stream: EventStream) -> str:
    from .format import fmt_num

    lines = []
    for o in stream.occurrences:
        iv = f"[{fmt_num(o.confidence.lo)},{fmt_num(o.confidence.hi)}]"
        lines.append(f"{o.time} {o.label} {iv} {o.provenance}")
    return "\n".join(lines) + "\n"
