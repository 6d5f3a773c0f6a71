"""Shared test helpers: model builders and checked-in model loading."""

from __future__ import annotations

import random
from pathlib import Path

from stochworld import Arrow, Model, ProbInterval, State, TraceSpec, parse_model

MODELS_DIR = Path(__file__).resolve().parent.parent / "models"


def load_model(name: str) -> Model:
    return parse_model((MODELS_DIR / f"{name}.model").read_text())


def chain_model(transitions: dict, initial: str, obs_of: dict | None = None) -> Model:
    """Single-label chain from {state: {target: prob}}; fomm unless obs_of maps
    states onto shared colours (then hmm)."""
    states = sorted(transitions)
    obs_of = obs_of or {s: s for s in states}
    kind = "fomm" if len(set(obs_of.values())) == len(states) and all(
        obs_of[s] == s for s in states
    ) else "hmm"
    model_states = tuple(
        State(s, initial=(s == initial), trace=TraceSpec({obs_of[s]: ProbInterval.point(1.0)}))
        for s in states
    )
    arrows = tuple(
        Arrow(src, "true", dst, ProbInterval.point(1.0), ProbInterval.point(p))
        for src in states
        for dst, p in sorted(transitions[src].items())
        if p > 0.0
    )
    return Model(kind, tuple(sorted(set(obs_of.values()))), ("true",), model_states, arrows)


def random_connected_chain(rng: random.Random, n_states: int) -> Model:
    """Strongly connected random chain (no white peaks, no black holes) with
    dyadic probabilities, so float and rational arithmetic agree exactly."""
    names = [f"s{i}" for i in range(n_states)]
    targets: dict = {s: set() for s in names}
    ring = names[1:] + names[:1]
    for src, dst in zip(names, ring):  # a covering cycle keeps it connected
        targets[src].add(dst)
    for src in names:
        for _ in range(rng.randint(0, 2)):
            targets[src].add(rng.choice(names))
    transitions = {}
    for src in names:
        tgts = sorted(targets[src])
        weights = [rng.randint(1, 16) for _ in tgts]
        # probabilities in 256ths: exactly representable doubles
        total = sum(weights)
        probs = [round(w / total * 256) for w in weights]
        probs[-1] = 256 - sum(probs[:-1])
        while min(probs) <= 0:  # keep every chosen arrow structurally present
            hi = probs.index(max(probs))
            lo = probs.index(min(probs))
            probs[lo] += 1
            probs[hi] -= 1
        transitions[src] = {t: p / 256.0 for t, p in zip(tgts, probs)}
    return chain_model(transitions, initial="s0")


def walk(model: Model, steps: int, seed: int):
    """Independent reference walker: list of visited state ids (length steps+1)
    and the arrows taken.  Deliberately unrelated to the package simulator."""
    rng = random.Random(seed)
    state = model.initial_state.id
    visited = [state]
    taken = []
    for _ in range(steps):
        arrows = sorted(model.out_index[state], key=lambda a: a.key)
        u = rng.random()
        acc = 0.0
        chosen = arrows[-1]
        for a in arrows:
            acc += a.effective().mid
            if u < acc:
                chosen = a
                break
        taken.append(chosen)
        state = chosen.target
        visited.append(state)
    return visited, taken
