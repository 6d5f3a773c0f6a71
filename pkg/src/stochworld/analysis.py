"""Reachability structure: white peaks, black holes, redundant states.

A black hole is a state set no path leaves; a white peak one no path
enters; both exclude the initial state.  Any qualifying set is contained in
the maximal one, so the maximal sets are what these functions return.  An
arrow counts as an edge whenever its effective probability can be positive
(upper bound > 0): possibly-zero intervals still connect.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .core import Model


def _edges(model: Model, reverse: bool = False) -> dict:
    adj: dict = {s.id: set() for s in model.states}
    for a in model.arrows:
        if a.effective().hi > 0.0:
            if reverse:
                adj[a.target].add(a.source)
            else:
                adj[a.source].add(a.target)
    return adj


def _closure(adj: dict, start: str) -> set:
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def find_white_peak(model: Model) -> frozenset:
    """Maximal white peak: states the initial state cannot reach."""
    reachable = _closure(_edges(model), model.initial_state.id)
    return frozenset(s.id for s in model.states if s.id not in reachable)


def find_black_hole(model: Model) -> frozenset:
    """Maximal black hole: states that cannot reach the initial state."""
    coreachable = _closure(_edges(model, reverse=True), model.initial_state.id)
    return frozenset(s.id for s in model.states if s.id not in coreachable)


@dataclass(frozen=True)
class StructureReport:
    white_peak: frozenset
    black_hole: frozenset

    @property
    def redundant(self) -> frozenset:
        return self.white_peak & self.black_hole


def analyze(model: Model) -> StructureReport:
    return StructureReport(find_white_peak(model), find_black_hole(model))


def remove_redundant(model: Model) -> Model:
    """Drop states that are both white peak and black hole, with their arrows.

    The resulting outgoing-probability deficits can only sit inside white
    peaks, where the validator downgrades them to warnings.
    """
    redundant = analyze(model).redundant
    if not redundant:
        return model
    obs = model.obs
    if model.kind == "fomm":  # states are the observations; keep the bijection
        obs = tuple(o for o in obs if o not in redundant)
    return replace(
        model,
        obs=obs,
        states=tuple(s for s in model.states if s.id not in redundant),
        arrows=tuple(
            a for a in model.arrows if a.source not in redundant and a.target not in redundant
        ),
    )
