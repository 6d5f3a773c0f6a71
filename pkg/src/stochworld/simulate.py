"""Ground-truth machinery: simulation, truncated future/past sets,
estimation of standard chains, Royal preference policies, and a statistical
test of the Markov property.

Step convention shared with the tracker: at step t the agent sees the
current state's observation, then the action happens (or the step's events
fire), then the state changes.  Future developments therefore start with
the step leaving the current state and do not repeat the current
observation.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import stats as scipy_stats

from .core import (
    ACTION_KINDS,
    SINGLE_LABEL_KINDS,
    TOL,
    TRUE_LABEL,
    Arrow,
    Development,
    EventOccurrence,
    EventStream,
    FutureSet,
    Model,
    Policy,
    Preference,
    ProbInterval,
    State,
    Step,
    TraceSpec,
    Trajectory,
)
from .errors import CapExceededError, JourneyError, ModelError, PolicyError
from .inversion import compose_policy, invert_chain


@dataclass(frozen=True)
class SimulationConfig:
    steps: int
    seed: int
    policy: Optional[Policy] = None
    preference: Optional[Preference] = None
    collision: str = "priority"  # or "both-arrows"


def _point(iv: ProbInterval, what: str) -> float:
    if not iv.is_point:
        raise ModelError(f"unresolved interval for {what}; supply a policy or resolution")
    return iv.mid


def _resolve_agent(model: Model, config: SimulationConfig) -> Model:
    if model.kind == "ed" or model.kind in SINGLE_LABEL_KINDS:
        if config.policy or config.preference:
            raise ModelError(f"{model.kind} generators take no policy or preference")
        return model
    if config.policy and config.preference:
        raise ModelError("give either a policy or a preference, not both")
    if config.preference:
        return compose_policy(model, preference_to_policy(model, config.preference))
    if config.policy:
        return compose_policy(model, config.policy)
    if all(a.label_prob.is_point for a in model.arrows):
        return model
    raise ModelError("interval agent probabilities need a policy or preference")


def _sample_trace(model: Model, state: State, rng) -> str:
    probs = [(o, _point(p, f"trace of {state.id}")) for o, p in sorted(state.trace.probs.items())]
    if not probs:
        raise ModelError(f"state {state.id} has no trace to observe")
    u = rng.random()
    acc = 0.0
    for o, p in probs:
        acc += p
        if u < acc:
            return o
    return probs[-1][0]


def _sample(pairs, rng):
    u = rng.random()
    acc = 0.0
    for item, p in pairs:
        acc += p
        if u < acc:
            return item
    return pairs[-1][0]


def _event_order(model: Model) -> tuple:
    ranked = sorted(model.labels, key=lambda e: (model.priorities.get(e, float("inf")), e))
    return tuple(ranked)


def simulate_events(model: Model, config: SimulationConfig):
    """Walk the generator; returns the trajectory and, for ed, the events fired."""
    if config.collision not in ("priority", "both-arrows"):
        raise ModelError(f"unknown collision rule {config.collision!r}")
    resolved = _resolve_agent(model, config)
    rng = np.random.default_rng(config.seed)
    state = resolved.initial_state
    order = _event_order(resolved)
    steps = []
    occurrences = []
    for t in range(config.steps):
        obs = _sample_trace(resolved, state, rng)
        if resolved.kind == "ed":
            fired = []
            for e in order:
                arrows = resolved.out_by_label.get((state.id, e))
                if not arrows:
                    continue
                if rng.random() < _point(arrows[0].label_prob, f"event {e} in {state.id}"):
                    fired.append(e)
            if fired and config.collision == "priority":
                fired = fired[:1]
            for e in fired:
                arrows = resolved.out_by_label.get((state.id, e))
                if not arrows:
                    continue  # the walk moved; the event cannot fire here
                pairs = [(a, _point(a.arrow_prob, "arrow")) for a in sorted(arrows, key=lambda a: a.key)]
                chosen = _sample(pairs, rng)
                occurrences.append(EventOccurrence(t, e, ProbInterval.point(1.0), "direct"))
                state = resolved.by_id[chosen.target]
            steps.append(Step(obs, None))
            continue
        act = None
        if resolved.kind in ACTION_KINDS:
            labels = resolved.labels_from(state.id)
            if not labels:
                raise JourneyError(f"state {state.id} has no outgoing actions")
            pairs = [(l, _point(resolved.agent_interval(state.id, l), f"agent in {state.id}")) for l in labels]
            act = _sample(pairs, rng)
            label = act
        else:
            label = TRUE_LABEL
        arrows = resolved.out_by_label.get((state.id, label))
        if not arrows:
            raise JourneyError(f"state {state.id} has no {label!r} arrows")
        pairs = [(a, _point(a.arrow_prob, "arrow")) for a in sorted(arrows, key=lambda a: a.key)]
        chosen = _sample(pairs, rng)
        steps.append(Step(obs, act))
        state = resolved.by_id[chosen.target]
    return Trajectory(tuple(steps), len(steps)), EventStream(tuple(occurrences))


def simulate(model: Model, config: SimulationConfig) -> Trajectory:
    """Deterministic-by-seed generator walk recording (observation, action) steps."""
    trajectory, _ = simulate_events(model, config)
    return trajectory


# -- future and past enumeration -------------------------------------------------


def _frac(x: float) -> Fraction:
    return Fraction(x)  # exact binary expansion of the stored double


def exact_future(
    model: Model, depth: int, policy: Optional[Policy] = None, cap: int = 200_000
) -> dict:
    """Exact development distribution of a point-probability model.

    Returns {(label, obs) word tuple: Fraction}; rational arithmetic keeps
    desk-scale comparisons exact.
    """
    m = compose_policy(model, policy) if policy is not None else model
    if not m.has_point_probs():
        raise ModelError("exact enumeration needs point probabilities")
    layer = {(): {m.initial_state.id: Fraction(1)}}
    for _ in range(depth):
        nxt: dict = {}
        for word, dist in layer.items():
            for sid, mass in dist.items():
                for a in m.out_index.get(sid, ()):
                    eff = _frac(a.label_prob.lo) * _frac(a.arrow_prob.lo)
                    if eff == 0:
                        continue
                    trace = m.by_id[a.target].trace
                    for obs in sorted(trace.probs):
                        tp = _frac(trace.probs[obs].lo)
                        if tp == 0:
                            continue
                        w = word + ((a.label, obs),)
                        bucket = nxt.setdefault(w, {})
                        bucket[a.target] = bucket.get(a.target, Fraction(0)) + mass * eff * tp
        layer = nxt
        if len(layer) > cap:
            raise CapExceededError(f"future enumeration exceeds {cap} developments")
    return {word: sum(dist.values()) for word, dist in layer.items()}


def _interval_future(model: Model, depth: int, cap: int) -> dict:
    """Sound interval bounds per development word, multiplicative per step."""
    layer = {(): {model.initial_state.id: (1.0, 1.0)}}
    for _ in range(depth):
        nxt: dict = {}
        for word, dist in layer.items():
            for sid, (lo, hi) in dist.items():
                for a in model.out_index.get(sid, ()):
                    eff = a.effective()
                    if eff.hi <= 0.0:
                        continue
                    trace = model.by_id[a.target].trace
                    for obs in model.obs:
                        tp = trace.prob(obs)
                        if tp.hi <= 0.0:
                            continue
                        w = word + ((a.label, obs),)
                        nlo = lo * eff.lo * tp.lo
                        nhi = hi * eff.hi * tp.hi
                        bucket = nxt.setdefault(w, {})
                        old = bucket.get(a.target, (0.0, 0.0))
                        bucket[a.target] = (old[0] + nlo, min(old[1] + nhi, 1.0))
        layer = nxt
        if len(layer) > cap:
            raise CapExceededError(f"future enumeration exceeds {cap} developments")
    out = {}
    for word, dist in layer.items():
        lo = min(sum(v[0] for v in dist.values()), 1.0)
        hi = min(sum(v[1] for v in dist.values()), 1.0)
        out[word] = (lo, hi)
    return out


def enumerate_future(
    model: Model, depth: int, policy: Optional[Policy] = None, cap: int = 200_000
) -> FutureSet:
    """Perfect or quasi-perfect description of the future to the given depth.

    Point models (after an optional policy) get exact probabilities; interval
    models get sound multiplicative bounds.  Developments with an upper
    probability of zero are absent.
    """
    m = compose_policy(model, policy) if policy is not None else model
    if m.has_point_probs() and all(
        p.is_point for s in m.states for p in s.trace.probs.values()
    ):
        dist = exact_future(m, depth, cap=cap)
        entries = {
            Development("future", w): ProbInterval.point(float(p))
            for w, p in dist.items()
            if p > 0
        }
    else:
        dist = _interval_future(m, depth, cap)
        entries = {
            Development("future", w): ProbInterval(lo, hi)
            for w, (lo, hi) in dist.items()
            if hi > 0.0
        }
    return FutureSet(depth, "future", entries)


def enumerate_past(model: Model, depth: int, cap: int = 200_000) -> FutureSet:
    """Developments of the past: the future of the inverse model, reversed
    into chronological order."""
    inverse = invert_chain(model)
    fs = enumerate_future(inverse, depth, cap=cap)
    entries = {
        Development("past", tuple(reversed(dev.word))): p for dev, p in fs.entries.items()
    }
    return FutureSet(depth, "past", entries)


# -- estimation -------------------------------------------------------------------


def estimate_fomm(trajectory: Trajectory) -> Model:
    """Standard chain over the observed symbols, counted from the trajectory.

    The model describes exactly the statistics period; transitions never
    observed are structurally absent.  The initial (current) state is the
    observation at the current moment, or the last one when all data is past.
    """
    obs_seq = trajectory.observations()
    if len(obs_seq) < 2:
        raise ModelError("trajectory too short to estimate (need at least 2 steps)")
    counts: Counter = Counter(zip(obs_seq, obs_seq[1:]))
    totals: Counter = Counter(obs_seq[:-1])
    symbols = sorted(set(obs_seq))
    current = obs_seq[trajectory.t0] if trajectory.t0 < len(obs_seq) else obs_seq[-1]
    states = tuple(
        State(o, initial=(o == current), trace=TraceSpec({o: ProbInterval.point(1.0)}))
        for o in symbols
    )
    arrows = tuple(
        Arrow(i, TRUE_LABEL, j, ProbInterval.point(1.0), ProbInterval.point(c / totals[i]))
        for (i, j), c in sorted(counts.items())
    )
    return Model("fomm", tuple(symbols), (TRUE_LABEL,), states, arrows)


# -- preference -------------------------------------------------------------------


def preference_to_policy(model: Model, preference: Preference) -> Policy:
    """Royal policy: each action takes the top of its allowed interval, in
    preference order, and the least preferred absorbs the remainder.

    Probabilities falling below an action's lower bound are raised to it and
    the shortfall is taken from the remaining mass; such states are flagged
    as adjusted.
    """
    preference.check(model)
    probs: dict = {}
    adjusted: set = set()
    for sid, ranked in preference.order.items():
        bounds = [model.agent_interval(sid, a) for a in ranked]
        lo_sum = sum(b.lo for b in bounds)
        hi_sum = sum(b.hi for b in bounds)
        if lo_sum > 1.0 + 1e-9 or hi_sum < 1.0 - 1e-9:
            raise PolicyError(
                f"state {sid}: no feasible policy within the agent intervals"
            )
        n = len(ranked)
        remaining = 1.0
        values = []
        for k in range(n):
            if k == n - 1:
                p = remaining
            else:
                reserve = sum(b.lo for b in bounds[k + 1 :])
                p = bounds[k].hi * remaining
                cap = remaining - reserve
                if p > cap + TOL:
                    p = cap
                    adjusted.add(sid)
                if p < bounds[k].lo - TOL:
                    p = bounds[k].lo
                    adjusted.add(sid)
            values.append(p)
            remaining -= p
        overflow = values[-1] - bounds[-1].hi
        if overflow > TOL:
            adjusted.add(sid)
            values[-1] = bounds[-1].hi
            for k in range(n - 1):
                room = bounds[k].hi - values[k]
                take = min(room, overflow)
                values[k] += take
                overflow -= take
                if overflow <= TOL:
                    break
            if overflow > 1e-9:
                raise PolicyError(f"state {sid}: no feasible policy within the agent intervals")
        for a, p in zip(ranked, values):
            probs[(sid, a)] = p
    return Policy(probs, frozenset(adjusted))


# -- Markov property --------------------------------------------------------------


@dataclass(frozen=True)
class SymbolTest:
    symbol: str
    p_value: Optional[float]
    flagged: bool
    contexts_tested: int
    contexts_skipped: int


@dataclass(frozen=True)
class MarkovReport:
    order: int
    significance: float
    tests: tuple = ()
    inconclusive: bool = False

    @property
    def flagged(self) -> tuple:
        return tuple(t for t in self.tests if t.flagged)

    @property
    def improvable(self) -> bool:
        """True when some longer context significantly improves prediction."""
        return bool(self.flagged)


def check_markov(
    trajectory: Trajectory,
    order: int = 1,
    significance: float = 0.01,
    min_count: int = 50,
) -> MarkovReport:
    """Chi-squared comparison of next-symbol distributions conditioned on
    one symbol versus a longer context ending in it.

    A flagged symbol means the standard chain can be improved by splitting
    that state.  Contexts with fewer than ``min_count`` occurrences are
    skipped; if every context is skipped the report is inconclusive.
    """
    seq = trajectory.observations()
    tests = []
    for sym in sorted(set(seq)):
        rows: dict = {}
        for i in range(order, len(seq) - 1):
            if seq[i] != sym:
                continue
            ctx = tuple(seq[i - order : i + 1])
            rows.setdefault(ctx, Counter())[seq[i + 1]] += 1
        usable = {c: cnt for c, cnt in rows.items() if sum(cnt.values()) >= min_count}
        skipped = len(rows) - len(usable)
        if len(usable) < 2:
            tests.append(SymbolTest(sym, None, False, 0, len(rows)))
            continue
        cols = sorted({o for cnt in usable.values() for o in cnt})
        if len(cols) < 2:
            tests.append(SymbolTest(sym, None, False, 0, len(rows)))
            continue
        table = np.array([[cnt.get(o, 0) for o in cols] for _, cnt in sorted(usable.items())])
        result = scipy_stats.chi2_contingency(table, correction=False)
        p_value = float(result.pvalue)
        tests.append(SymbolTest(sym, p_value, p_value < significance, len(usable), skipped))
    inconclusive = all(t.p_value is None for t in tests) if tests else True
    return MarkovReport(order, significance, tuple(tests), inconclusive)
