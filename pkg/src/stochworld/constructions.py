"""Model-to-model transformations.

Facts are state sets, events are arrow sets; the doubling constructions
turn an event into a fact of an equivalent model (one step delayed) or into
an even/odd occurrence counter.  Quotients collapse a generator onto an
event-driven model when the monitored events cover every class-crossing
arrow.  Belief determinization plus bisimulation minimization, applied
forward and through the inverse, assemble the minimal-model pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .core import (
    TOL,
    Arrow,
    Model,
    Partition,
    ProbInterval,
    State,
    TraceSpec,
    canonical,
)
from .errors import CapExceededError, CoverageError, ModelError
from .inversion import invert_chain


@dataclass(frozen=True)
class EventSet:
    """A named event: a set of arrows of its host model."""

    name: str
    arrows: frozenset

    def check(self, model: Model) -> None:
        host = set(model.arrows)
        for a in self.arrows:
            if a not in host:
                raise ModelError(f"event {self.name!r}: arrow {a.key} not in the model")

    def keys(self) -> frozenset:
        return frozenset(a.key for a in self.arrows)


@dataclass(frozen=True)
class FactSet:
    """A named fact: a set of states of its host model."""

    name: str
    states: frozenset

    def check(self, model: Model) -> None:
        known = set(model.by_id)
        unknown = self.states - known
        if unknown:
            raise ModelError(f"fact {self.name!r}: unknown states {sorted(unknown)}")


def fact_to_event(model: Model, fact: FactSet) -> EventSet:
    """The event "the fact is true now": all arrows leaving the fact's states."""
    fact.check(model)
    return EventSet(fact.name, frozenset(a for a in model.arrows if a.source in fact.states))


def _doubled_kind(kind: str) -> str:
    return "hmm" if kind == "fomm" else kind


def _double(model: Model, event: EventSet, parity: bool):
    """Shared doubling: copies s' and s'', arrows rerouted by event membership."""
    event.check(model)
    keys = event.keys()
    prime = {s.id: s.id + "'" for s in model.states}
    dprime = {s.id: s.id + "''" for s in model.states}
    s0 = model.initial_state.id
    states = []
    for s in model.states:
        states.append(State(prime[s.id], initial=(s.id == s0), trace=s.trace))
        states.append(State(dprime[s.id], initial=False, trace=s.trace))
    arrows = []
    for a in model.arrows:
        if a.key in keys:
            if parity:  # crossing an event arrow flips the parity class
                pairs = ((prime[a.source], dprime[a.target]), (dprime[a.source], prime[a.target]))
            else:  # using an event arrow lands in the double-primed class
                pairs = ((prime[a.source], dprime[a.target]), (dprime[a.source], dprime[a.target]))
        else:
            if parity:
                pairs = ((prime[a.source], prime[a.target]), (dprime[a.source], dprime[a.target]))
            else:
                pairs = ((prime[a.source], prime[a.target]), (dprime[a.source], prime[a.target]))
        for src, dst in pairs:
            arrows.append(replace(a, source=src, target=dst))
    doubled = replace(
        model,
        kind=_doubled_kind(model.kind),
        states=tuple(states),
        arrows=tuple(arrows),
        meta=("doubled: initial state is the unprimed copy",),
    )
    return doubled, frozenset(dprime.values())


def event_to_fact(model: Model, event: EventSet):
    """Express an event as a fact of an equivalent doubled model.

    The fact (the double-primed copies) is true exactly one step after each
    occurrence of the event.  The new initial state is the unprimed copy of
    the old one; the construction leaves that choice open, so it is recorded
    in the model's metadata.
    """
    doubled, dprimed = _double(model, event, parity=False)
    return doubled, FactSet(event.name, dprimed)


def parity_model(model: Model, event: EventSet) -> Model:
    """Equivalent doubled model tracking whether the event occurred an even
    number of times: unprimed copies are the even class."""
    doubled, _ = _double(model, event, parity=True)
    return doubled


# -- quotient ---------------------------------------------------------------------


def _interval_sum(intervals) -> ProbInterval:
    lo = min(sum(i.lo for i in intervals), 1.0)
    hi = min(sum(i.hi for i in intervals), 1.0)
    return ProbInterval(lo, hi)


def quotient(model: Model, partition: Partition, monitored) -> Model:
    """Collapse the model onto its partition classes as an event-driven model.

    Requires the coverage condition: every arrow that crosses classes must
    belong to some monitored event.  Per-class event and transition
    probabilities, and class traces, are interval hulls over the members.
    """
    partition.check(model)
    monitored = list(monitored)
    names = [e.name for e in monitored]
    if len(set(names)) != len(names):
        raise ModelError("monitored events must have distinct names")
    for e in monitored:
        e.check(model)
    covered = set()
    for e in monitored:
        covered |= e.keys()
    uncovered = [
        a
        for a in model.arrows
        if a.effective().hi > 0.0
        and partition.class_of(a.source) != partition.class_of(a.target)
        and a.key not in covered
    ]
    if uncovered:
        raise CoverageError(sorted(uncovered, key=lambda a: a.key))

    def class_id(c: frozenset) -> str:
        return "+".join(sorted(c))

    s0_class = class_id(partition.class_of(model.initial_state.id))
    states = []
    for c in sorted(partition.classes, key=class_id):
        members = [model.by_id[m] for m in sorted(c)]
        probs: dict = {}
        if all(not m.trace.is_empty for m in members):
            for o in model.obs:
                hull = ProbInterval.hull(m.trace.prob(o) for m in members)
                if hull.hi > 0.0:
                    probs[o] = hull
        memory = any(m.trace.memory for m in members)
        phenomena = tuple(sorted({p for m in members for p in m.trace.phenomena}))
        states.append(
            State(class_id(c), initial=(class_id(c) == s0_class), trace=TraceSpec(probs, memory, phenomena))
        )

    arrows = []
    for e in monitored:
        keys = e.keys()
        for c in partition.classes:
            fires = {}  # member -> interval probability the event fires there
            to_class: dict = {}  # target class -> member -> interval mass
            for m in sorted(c):
                own = [a for a in model.out_index.get(m, ()) if a.key in keys]
                if not own:
                    fires[m] = ProbInterval.point(0.0)
                    continue
                fires[m] = _interval_sum([a.effective() for a in own])
                for a in own:
                    d = class_id(partition.class_of(a.target))
                    to_class.setdefault(d, {}).setdefault(m, []).append(a)
            lp = ProbInterval.hull(fires.values())
            if lp.hi <= 0.0:
                continue
            for d, per_member in sorted(to_class.items()):
                conds = []
                for m, q in fires.items():
                    if q.hi <= 0.0:
                        continue
                    own = per_member.get(m, [])
                    mass = _interval_sum([a.effective() for a in own]) if own else ProbInterval.point(0.0)
                    if q.is_point and q.lo > 0.0 and all(a.effective().is_point for a in own):
                        conds.append(ProbInterval.point(min(mass.lo / q.lo, 1.0)))
                    elif not own:
                        conds.append(ProbInterval.point(0.0))
                    elif mass.lo >= q.hi - TOL:  # every firing arrow leads to d
                        conds.append(ProbInterval.point(1.0))
                    else:
                        conds.append(ProbInterval(0.0, 1.0))
                arrows.append(Arrow(class_id(c), e.name, d, lp, ProbInterval.hull(conds)))

    return canonical(
        Model(
            kind="ed",
            obs=model.obs,
            labels=tuple(sorted(names)),
            states=tuple(states),
            arrows=tuple(arrows),
            name=model.name,
        )
    )


# -- belief determinization -------------------------------------------------------


def _det_obs(model: Model, sid: str) -> str:
    obs = model.by_id[sid].trace.deterministic_obs
    if obs is None:
        raise ModelError(
            f"belief determinization needs deterministic traces (state {sid} has none)"
        )
    return obs


def belief_determinize(model: Model, depth: int, cap: int = 4096) -> Model:
    """Expand the reachable beliefs up to `depth` steps into a deterministic
    model; equal beliefs are merged (exact rational comparison).

    Arrows out of the deepest layer that would lead to unexplored beliefs
    are dropped and noted in the metadata.
    """
    if not model.has_point_probs():
        raise ModelError("belief determinization needs point probabilities")
    for s in model.states:
        _det_obs(model, s.id)

    start = ((model.initial_state.id, Fraction(1)),)
    names = {start: "q0"}
    order = [start]
    arrows = []
    frontier = [start]
    truncated = False
    for _ in range(depth):
        if not frontier:
            break
        layer, frontier = frontier, []
        for belief in layer:
            support = [sid for sid, _ in belief]
            for label in model.labels:
                if not all((sid, label) in model.out_by_label for sid in support):
                    continue
                lp = _belief_label_prob(model, belief, label)
                weight: dict = {}
                for sid, mass in belief:
                    for a in model.out_by_label[(sid, label)]:
                        w = mass * Fraction(a.arrow_prob.lo)
                        if w:
                            weight[a.target] = weight.get(a.target, Fraction(0)) + w
                by_obs: dict = {}
                for tgt, w in weight.items():
                    by_obs.setdefault(_det_obs(model, tgt), {})[tgt] = w
                for obs in sorted(by_obs):
                    bucket = by_obs[obs]
                    total = sum(bucket.values())
                    successor = tuple(sorted((t, w / total) for t, w in bucket.items()))
                    if successor not in names:
                        if len(names) >= cap:
                            raise CapExceededError(
                                f"belief expansion exceeds the cap of {cap} states"
                            )
                        names[successor] = f"q{len(names)}"
                        order.append(successor)
                        frontier.append(successor)
                    arrows.append(
                        Arrow(
                            names[belief],
                            label,
                            names[successor],
                            lp,
                            ProbInterval.point(float(total)),
                        )
                    )
        if not frontier:
            break
    if frontier:
        # deepest-layer beliefs stay unexpanded: they keep no outgoing arrows
        truncated = True

    states = tuple(
        State(
            names[b],
            initial=(b == start),
            trace=TraceSpec({_belief_obs(model, b): ProbInterval.point(1.0)}),
        )
        for b in order
    )
    meta = tuple(
        f"{names[b]} = " + " ".join(f"{sid}:{mass}" for sid, mass in b) for b in order
    )
    if truncated:
        meta += ("frontier truncated at depth; outgoing sums may fall short",)
    return Model(
        kind=_doubled_kind(model.kind),
        obs=model.obs,
        labels=model.labels,
        states=states,
        arrows=tuple(arrows),
        priorities=model.priorities,
        name=model.name,
        meta=meta,
    )


def _belief_obs(model: Model, belief) -> str:
    return _det_obs(model, belief[0][0])


def _belief_label_prob(model: Model, belief, label: str) -> ProbInterval:
    first = model.agent_interval(belief[0][0], label)
    if first.is_point:
        value = sum(
            mass * Fraction(model.agent_interval(sid, label).lo) for sid, mass in belief
        )
        return ProbInterval.point(float(value))
    return first  # free-will kinds keep their interval (e.g. mdp's [0,1])


# -- minimization -----------------------------------------------------------------


def _trace_signature(s: State):
    return (
        frozenset((o, p.lo, p.hi) for o, p in s.trace.probs.items()),
        s.trace.memory,
    )


def minimize_forward(model: Model, depth: int = 1_000):
    """Partition refinement: start from trace classes, split by per-label
    successor distributions until stable (or `depth` rounds); quotient by
    the result.  Returns (model, partition witness)."""
    if not model.has_point_probs():
        raise ModelError("minimization needs point probabilities")
    block: dict = {}
    groups: dict = {}
    for s in model.states:
        groups.setdefault(_trace_signature(s), []).append(s.id)
    for i, sig in enumerate(sorted(groups, key=lambda g: sorted(groups[g])[0])):
        for sid in groups[sig]:
            block[sid] = i

    for _ in range(depth):
        signatures: dict = {}
        for s in model.states:
            per_label = []
            for label in model.labels:
                arrows = model.out_by_label.get((s.id, label), ())
                if not arrows:
                    continue
                mass: dict = {}
                for a in arrows:
                    mass[block[a.target]] = mass.get(block[a.target], Fraction(0)) + Fraction(
                        a.arrow_prob.lo
                    )
                lp = arrows[0].label_prob
                per_label.append((label, (lp.lo, lp.hi), tuple(sorted(mass.items()))))
            signatures[s.id] = (block[s.id], tuple(per_label))
        regroup: dict = {}
        for sid, sig in signatures.items():
            regroup.setdefault(sig, []).append(sid)
        if len(regroup) == len(set(block.values())):
            break
        block = {}
        for i, sig in enumerate(sorted(regroup, key=lambda g: sorted(regroup[g])[0])):
            for sid in regroup[sig]:
                block[sid] = i

    classes: dict = {}
    for sid, b in block.items():
        classes.setdefault(b, set()).add(sid)
    partition = Partition(tuple(frozenset(c) for c in classes.values()))

    def class_id(c) -> str:
        return "+".join(sorted(c))

    id_of = {sid: class_id(partition.class_of(sid)) for sid in block}
    s0 = model.initial_state.id
    merged_any = any(len(c) > 1 for c in partition.classes)
    states = []
    for c in sorted(partition.classes, key=class_id):
        rep = model.by_id[min(c)]
        memory = any(model.by_id[m].trace.memory for m in c)
        phenomena = tuple(sorted({p for m in c for p in model.by_id[m].trace.phenomena}))
        states.append(
            State(
                class_id(c),
                initial=(s0 in c),
                trace=TraceSpec(dict(rep.trace.probs), memory, phenomena),
            )
        )
    arrows = []
    for c in sorted(partition.classes, key=class_id):
        rep = min(c)
        for label in model.labels:
            outgoing = model.out_by_label.get((rep, label), ())
            if not outgoing:
                continue
            mass: dict = {}
            for a in outgoing:
                mass[id_of[a.target]] = mass.get(id_of[a.target], 0.0) + a.arrow_prob.lo
            for tgt, p in sorted(mass.items()):
                arrows.append(Arrow(class_id(c), label, tgt, outgoing[0].label_prob, ProbInterval.point(p)))

    kind = model.kind
    if kind == "fomm" and merged_any:
        kind = "hmm"
    reduced = Model(
        kind=kind,
        obs=model.obs,
        labels=model.labels,
        states=tuple(states),
        arrows=tuple(arrows),
        priorities=model.priorities,
        name=model.name,
    )
    return reduced, partition


# -- the minimal-model pipeline -----------------------------------------------------


@dataclass(frozen=True)
class MinimalModelResult:
    """The joined minimal model plus its two oriented halves.

    ``forward_part`` predicts the future from the fresh initial state;
    ``backward_part`` is past-oriented: its future set reads as developments
    of the past, most recent step first.
    """

    joined: Model
    forward_part: Model
    backward_part: Model


def _fresh_initial(model: Model, base: str = "now") -> Model:
    """Duplicate the initial state's exits into a fresh initial state that
    nothing points at."""
    fresh = base
    while fresh in model.by_id:
        fresh += "'"
    init = model.initial_state
    states = tuple(
        [State(fresh, initial=True, trace=init.trace)]
        + [replace(s, initial=False) for s in model.states]
    )
    arrows = model.arrows + tuple(
        replace(a, source=fresh) for a in model.out_index.get(init.id, ())
    )
    return replace(model, states=states, arrows=arrows)


def minimal_model_parts(model: Model, depth: int) -> MinimalModelResult:
    """Three-step minimal model: forward-minimal part, backward-minimal part
    from the inverse, joined at a fresh initial state.

    The forward part is a black hole of the joined model and the backward
    part a white peak: once the walk leaves the fresh initial state it can
    never return.
    """
    forward0, _ = minimize_forward(belief_determinize(model, depth))
    backward1, _ = minimize_forward(belief_determinize(invert_chain(model), depth))
    backflow = invert_chain(backward1)  # forward orientation of the past fabric

    forward_part = _fresh_initial(forward0)
    backward_part = _fresh_initial(backward1)

    init_f = forward0.initial_state
    init_b = backflow.initial_state
    fut = {s.id: f"fut:{s.id}" for s in forward0.states}
    past = {s.id: f"past:{s.id}" for s in backflow.states}
    states = [State("now", initial=True, trace=init_f.trace)]
    states += [State(fut[s.id], trace=s.trace) for s in forward0.states]
    states += [State(past[s.id], trace=s.trace) for s in backflow.states]
    arrows = [
        replace(a, source="now", target=fut[a.target])
        for a in forward0.out_index.get(init_f.id, ())
    ]
    arrows += [
        replace(a, source=fut[a.source], target=fut[a.target]) for a in forward0.arrows
    ]
    for a in backflow.arrows:
        target = "now" if a.target == init_b.id else past[a.target]
        arrows.append(replace(a, source=past[a.source], target=target))
    joined = Model(
        kind="hmm",
        obs=tuple(sorted(set(forward0.obs) | set(backflow.obs))),
        labels=forward0.labels,
        states=tuple(states),
        arrows=tuple(arrows),
        name=model.name,
        meta=("minimal: forward part predicts the future, backward part the past",),
    )
    return MinimalModelResult(joined, forward_part, backward_part)


def minimal_model(model: Model, depth: int) -> Model:
    return minimal_model_parts(model, depth).joined
