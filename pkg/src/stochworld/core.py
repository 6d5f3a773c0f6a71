"""Domain types for stochastic world models.

A model is a labeled stochastic graph: states carry traces (what is
observable there), arrows carry a pair of probability intervals — the
probability that the labeled event/action is chosen at all, and the
probability of this particular arrow among same-label arrows.  All seven
model kinds share this one representation; ``validation.validate`` enforces
the kind-specific constraints.

Everything here is immutable after construction and safe to share across
threads; operations build new models instead of mutating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

from .errors import InconsistentObservationError, ModelError

TOL = 1e-9

KINDS = ("fomm", "hmm", "mdp", "mdp-fixed", "smdp", "mdp-plus", "ed")
#: Kinds whose only label is the always-occurring event "true".
SINGLE_LABEL_KINDS = ("fomm", "hmm")
#: Kinds whose labels are agent actions.
ACTION_KINDS = ("mdp", "mdp-fixed", "smdp", "mdp-plus")
TRUE_LABEL = "true"


def check_symbol(sym: str, what: str = "symbol") -> str:
    if not sym or any(c.isspace() for c in sym):
        raise ModelError(f"invalid {what}: {sym!r}")
    return sym


@dataclass(frozen=True)
class ProbInterval:
    """Closed subinterval of [0, 1]; a point value p is stored as [p, p]."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        # forgive sub-tolerance float drift from products and hulls
        lo = min(max(lo, 0.0), 1.0) if -TOL <= lo <= 1.0 + TOL else lo
        hi = min(max(hi, 0.0), 1.0) if -TOL <= hi <= 1.0 + TOL else hi
        if not (0.0 <= lo <= hi <= 1.0):
            raise ModelError(f"invalid probability interval [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, p: float) -> "ProbInterval":
        return cls(p, p)

    @property
    def is_point(self) -> bool:
        return self.hi - self.lo <= TOL

    @property
    def mid(self) -> float:
        return (self.lo + self.hi) / 2.0

    def times(self, other: "ProbInterval") -> "ProbInterval":
        """Interval product [lo*lo, hi*hi] (monotone on [0,1])."""
        return ProbInterval(self.lo * other.lo, self.hi * other.hi)

    def contains(self, p: float, tol: float = TOL) -> bool:
        return self.lo - tol <= p <= self.hi + tol

    @staticmethod
    def hull(intervals: Iterable["ProbInterval"]) -> "ProbInterval":
        items = list(intervals)
        if not items:
            raise ModelError("hull of no intervals")
        return ProbInterval(min(i.lo for i in items), max(i.hi for i in items))


POINT_ONE = ProbInterval(1.0, 1.0)
POINT_ZERO = ProbInterval(0.0, 0.0)
FULL = ProbInterval(0.0, 1.0)


def interval_product(a: ProbInterval, b: ProbInterval) -> ProbInterval:
    """Product of the two per-arrow probabilities, as an interval."""
    return a.times(b)


@dataclass(frozen=True)
class Arrow:
    """Labeled transition with its dual probabilities.

    ``label_prob`` is the probability the labeled event/action is chosen in
    ``source`` at all; ``arrow_prob`` the probability of this arrow among
    same-label arrows out of ``source``.  Their product is the probability
    of the arrow actually being used.
    """

    source: str
    label: str
    target: str
    label_prob: ProbInterval = POINT_ONE
    arrow_prob: ProbInterval = POINT_ONE

    def effective(self) -> ProbInterval:
        return self.label_prob.times(self.arrow_prob)

    @property
    def key(self) -> tuple:
        return (self.source, self.label, self.target)


@dataclass(frozen=True)
class TraceSpec:
    """What is observable in a state.

    Listed observations carry probability intervals; unlisted ones are
    implicitly impossible ([0, 0]).  An entirely empty trace means the state
    is untraced: nothing is known, every observation gets [0, 1].
    """

    probs: Mapping[str, ProbInterval] = field(default_factory=dict)
    memory: bool = False
    phenomena: tuple = ()

    @property
    def is_empty(self) -> bool:
        return not self.probs

    def prob(self, obs: str) -> ProbInterval:
        if self.is_empty:
            return FULL
        return self.probs.get(obs, POINT_ZERO)

    def support(self) -> frozenset:
        return frozenset(o for o, p in self.probs.items() if p.hi > 0.0)

    @property
    def deterministic_obs(self) -> Optional[str]:
        """The single certain observation, or None if the trace is not that."""
        certain = [o for o, p in self.probs.items() if p.is_point and p.lo >= 1.0 - TOL]
        if len(certain) == 1 and len(self.support()) == 1:
            return certain[0]
        return None

    def colour(self):
        """Deterministic observation if there is one, else the support set."""
        det = self.deterministic_obs
        return det if det is not None else self.support()


@dataclass(frozen=True)
class State:
    id: str
    initial: bool = False
    trace: TraceSpec = field(default_factory=TraceSpec)


@dataclass(frozen=True)
class Model:
    """Labeled stochastic graph covering all seven model kinds."""

    kind: str
    obs: tuple
    labels: tuple
    states: tuple
    arrows: tuple
    priorities: Mapping[str, int] = field(default_factory=dict)
    name: str = ""
    meta: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "obs", tuple(self.obs))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "arrows", tuple(self.arrows))

    @cached_property
    def by_id(self) -> Mapping[str, State]:
        return {s.id: s for s in self.states}

    @cached_property
    def initial_state(self) -> State:
        initials = [s for s in self.states if s.initial]
        if len(initials) != 1:
            raise ModelError(f"model must have exactly one initial state, found {len(initials)}")
        return initials[0]

    @cached_property
    def out_index(self) -> Mapping[str, tuple]:
        index: dict = {s.id: [] for s in self.states}
        for a in self.arrows:
            index.setdefault(a.source, []).append(a)
        return {k: tuple(v) for k, v in index.items()}

    @cached_property
    def out_by_label(self) -> Mapping[tuple, tuple]:
        index: dict = {}
        for a in self.arrows:
            index.setdefault((a.source, a.label), []).append(a)
        return {k: tuple(v) for k, v in index.items()}

    @cached_property
    def in_index(self) -> Mapping[str, tuple]:
        index: dict = {s.id: [] for s in self.states}
        for a in self.arrows:
            index.setdefault(a.target, []).append(a)
        return {k: tuple(v) for k, v in index.items()}

    @property
    def single_label(self) -> bool:
        return len(self.labels) == 1

    def state_ids(self) -> tuple:
        return tuple(s.id for s in self.states)

    def labels_from(self, state_id: str) -> tuple:
        """Labels with at least one arrow out of the state, in alphabet order."""
        present = {a.label for a in self.out_index.get(state_id, ())}
        return tuple(l for l in self.labels if l in present)

    def agent_interval(self, state_id: str, label: str) -> ProbInterval:
        """The label probability shared by same-label arrows out of a state."""
        arrows = self.out_by_label.get((state_id, label))
        if not arrows:
            raise ModelError(f"no {label!r} arrows out of {state_id!r}")
        return arrows[0].label_prob

    def has_point_probs(self) -> bool:
        return all(a.label_prob.is_point and a.arrow_prob.is_point for a in self.arrows)

    def with_meta(self, *notes: str) -> "Model":
        return replace(self, meta=self.meta + tuple(notes))


def canonical(model: Model) -> Model:
    """Sort alphabets, states, arrows and priorities into canonical order."""
    return replace(
        model,
        obs=tuple(sorted(model.obs)),
        labels=tuple(sorted(model.labels)),
        states=tuple(sorted(model.states, key=lambda s: s.id)),
        arrows=tuple(sorted(model.arrows, key=lambda a: a.key)),
        priorities=dict(sorted(model.priorities.items())),
    )


@dataclass(frozen=True)
class Belief:
    """Probability distribution over model states; entries strictly positive."""

    probs: Mapping[str, float]
    approximate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "probs", dict(self.probs))
        total = sum(self.probs.values())
        if any(p <= 0.0 for p in self.probs.values()):
            raise ModelError("belief entries must be strictly positive")
        if abs(total - 1.0) > 1e-6:
            raise ModelError(f"belief must sum to 1, got {total}")
        if abs(total - 1.0) > TOL:
            object.__setattr__(
                self, "probs", {s: p / total for s, p in self.probs.items()}
            )

    @classmethod
    def point(cls, state_id: str) -> "Belief":
        return cls({state_id: 1.0})

    def mass(self, state_id: str) -> float:
        return self.probs.get(state_id, 0.0)

    def top(self) -> str:
        """State with maximal mass; ties broken by smallest id."""
        return min(self.probs, key=lambda s: (-self.probs[s], s))

    def support(self) -> frozenset:
        return frozenset(self.probs)


@dataclass(frozen=True)
class Development:
    """Finite word that begins a possible future or ends a possible past.

    ``word`` is a chronological tuple of (label, observation) steps; for the
    future the first step leaves the current state, for the past the last
    step arrives at it.
    """

    direction: str
    word: tuple

    def __post_init__(self):
        if self.direction not in ("past", "future"):
            raise ModelError(f"bad direction {self.direction!r}")
        object.__setattr__(self, "word", tuple(tuple(step) for step in self.word))

    def obs_word(self) -> tuple:
        return tuple(o for _, o in self.word)

    def render(self, elide_label: bool = True) -> str:
        if not self.word:
            return "-"
        if elide_label and all(l == TRUE_LABEL for l, _ in self.word):
            return ",".join(o for _, o in self.word)
        return ",".join(f"{l}:{o}" for l, o in self.word)


@dataclass(frozen=True)
class FutureSet:
    """Truncated (quasi-)perfect description of the future or the past."""

    depth: int
    direction: str
    entries: Mapping[Development, ProbInterval]

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    def probability(self, word) -> ProbInterval:
        dev = Development(self.direction, tuple(word))
        return self.entries.get(dev, POINT_ZERO)

    def obs_marginal(self) -> dict:
        """Interval-sum of entries grouped by observation word."""
        out: dict = {}
        for dev, p in self.entries.items():
            w = dev.obs_word()
            if w in out:
                q = out[w]
                out[w] = ProbInterval(min(q.lo + p.lo, 1.0), min(q.hi + p.hi, 1.0))
            else:
                out[w] = p
        return out


@dataclass(frozen=True)
class Partition:
    """Disjoint non-empty state classes covering all states."""

    classes: tuple

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(frozenset(c) for c in self.classes))

    def check(self, model: Model) -> None:
        seen: set = set()
        for c in self.classes:
            if not c:
                raise ModelError("empty partition class")
            if c & seen:
                raise ModelError("partition classes overlap")
            seen |= c
        ids = set(model.by_id)
        if seen != ids:
            missing = ids - seen
            extra = seen - ids
            raise ModelError(
                f"partition does not cover the states (missing {sorted(missing)}, unknown {sorted(extra)})"
            )

    def class_of(self, state_id: str) -> frozenset:
        for c in self.classes:
            if state_id in c:
                return c
        raise ModelError(f"state {state_id!r} not in partition")


@dataclass(frozen=True)
class Policy:
    """Map (state, action) -> probability, one distribution per state."""

    probs: Mapping[tuple, float]
    adjusted: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "probs", dict(self.probs))

    def of(self, state_id: str, action: str) -> float:
        return self.probs.get((state_id, action), 0.0)

    def check(self, model: Model) -> None:
        """Require per-state sums of 1 inside the model's agent intervals."""
        from .errors import PolicyError

        per_state: dict = {}
        for (s, a), p in self.probs.items():
            per_state.setdefault(s, []).append((a, p))
        for s, pairs in per_state.items():
            total = sum(p for _, p in pairs)
            if abs(total - 1.0) > 1e-6:
                raise PolicyError(f"policy for state {s} sums to {total}")
            for a, p in pairs:
                if (s, a) not in model.out_by_label:
                    if p > TOL:
                        raise PolicyError(f"policy gives mass to missing action {a} in {s}")
                    continue
                iv = model.agent_interval(s, a)
                if not iv.contains(p, tol=1e-6):
                    raise PolicyError(
                        f"policy({s}, {a}) = {p} outside agent interval [{iv.lo}, {iv.hi}]"
                    )


@dataclass(frozen=True)
class Preference:
    """Per-state action ranking, most wanted first."""

    order: Mapping[str, tuple]

    def __post_init__(self):
        object.__setattr__(self, "order", {s: tuple(v) for s, v in self.order.items()})

    def check(self, model: Model) -> None:
        for s, ranked in self.order.items():
            if s not in model.by_id:
                raise ModelError(f"preference for unknown state {s!r}")
            available = set(model.labels_from(s))
            if set(ranked) != available or len(set(ranked)) != len(ranked):
                raise ModelError(
                    f"preference for {s} must rank exactly the available actions {sorted(available)}"
                )


@dataclass(frozen=True)
class Step:
    obs: str
    act: Optional[str] = None


@dataclass(frozen=True)
class Trajectory:
    """Recorded observation/action word with a designated current moment.

    Steps before ``t0`` are the past, steps at and after it the future.
    """

    steps: tuple
    t0: int

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not 0 <= self.t0 <= len(self.steps):
            raise ModelError(f"t0 = {self.t0} outside [0, {len(self.steps)}]")

    @classmethod
    def of(cls, pairs: Sequence, t0: Optional[int] = None) -> "Trajectory":
        steps = tuple(p if isinstance(p, Step) else Step(*p) for p in pairs)
        return cls(steps, len(steps) if t0 is None else t0)

    def __len__(self) -> int:
        return len(self.steps)

    def observations(self) -> tuple:
        return tuple(s.obs for s in self.steps)

    def actions(self) -> tuple:
        return tuple(s.act for s in self.steps)


@dataclass(frozen=True)
class EventOccurrence:
    """One detected event: when, what, how confident, and found how."""

    time: int
    label: str
    confidence: ProbInterval
    provenance: str = "direct"  # direct | indirect | derived


@dataclass(frozen=True)
class EventStream:
    occurrences: tuple

    def __post_init__(self):
        occs = tuple(self.occurrences)
        times = [o.time for o in occs]
        if times != sorted(times):
            raise ModelError("event stream times must be non-decreasing")
        for o in occs:
            if o.confidence.hi <= 0.0:
                raise ModelError(f"occurrence of {o.label!r} at {o.time} has confidence [0,0]")
        object.__setattr__(self, "occurrences", occs)

    def __len__(self) -> int:
        return len(self.occurrences)

    def at(self, time: int) -> tuple:
        return tuple(o for o in self.occurrences if o.time == time)

    def labels(self) -> tuple:
        return tuple(o.label for o in self.occurrences)


def memory_bits(model: Model) -> int:
    """Dynamic-memory size: ceil(log2 of the largest same-colour state group).

    Colour is the state's deterministic observation where the trace has one,
    otherwise the trace's support set.
    """
    groups: dict = {}
    for s in model.states:
        colour = s.trace.colour()
        if model.kind == "fomm" and s.trace.is_empty:
            colour = s.id
        groups[colour] = groups.get(colour, 0) + 1
    m = max(groups.values(), default=1)
    return math.ceil(math.log2(m)) if m > 1 else 0


def step_belief(model: Model, belief: Belief, label: str, obs: str) -> Belief:
    """Bayes-filter one step: traverse label arrows, then condition on obs.

    Interval probabilities are collapsed to their midpoints and the result
    is flagged approximate.
    """
    if obs not in model.obs:
        raise ModelError(f"observation {obs!r} not in the model's alphabet")
    if label not in model.labels:
        raise ModelError(f"label {label!r} not in the model's alphabet")
    approx = belief.approximate
    posterior: dict = {}
    for src, mass in belief.probs.items():
        if src not in model.by_id:
            raise ModelError(f"belief over unknown state {src!r}")
        for a in model.out_by_label.get((src, label), ()):
            eff = a.effective()
            trace_p = model.by_id[a.target].trace.prob(obs)
            if not (eff.is_point and trace_p.is_point):
                approx = True
            w = mass * eff.mid * trace_p.mid
            if w > 0.0:
                posterior[a.target] = posterior.get(a.target, 0.0) + w
    total = sum(posterior.values())
    if total <= 0.0:
        raise InconsistentObservationError(
            f"observation {obs!r} impossible under the current belief"
        )
    return Belief({s: p / total for s, p in posterior.items()}, approximate=approx)
