"""Multi-objective taxi grid world.

One reward dimension per origin/destination pair. Passengers are unlimited at
every origin, the taxi carries at most one at a time, and the task never
terminates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..momdp import MomdpError, TabularMomdp

ACTIONS = ("north", "south", "east", "west", "pick", "drop")
NORTH, SOUTH, EAST, WEST, PICK, DROP = range(6)
_MOVES = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1)}

Cell = tuple[int, int]  # (row, col); row 0 is the northern edge

# Documented default layout. Pair 1 is the short trip, pair 2 the long one.
# The fourth pair is only used when n = 4 is requested.
DEFAULT_PAIRS: tuple[tuple[Cell, Cell], ...] = (
    ((0, 0), (0, 4)),
    ((4, 4), (4, 2)),
    ((4, 0), (0, 2)),
    ((2, 4), (2, 0)),
)


@dataclass(frozen=True)
class TaxiConfig:
    width: int = 5
    height: int = 5
    pairs: tuple[tuple[Cell, Cell], ...] = DEFAULT_PAIRS[:3]
    start: Cell = (2, 2)
    penalty: float = -10.0
    delivery: float = 30.0
    gamma: float = 0.97

    def __post_init__(self):
        pairs = tuple((tuple(o), tuple(d)) for o, d in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "start", tuple(self.start))

    @classmethod
    def with_pairs(cls, n: int, **kwargs) -> "TaxiConfig":
        if not 1 <= n <= len(DEFAULT_PAIRS):
            raise MomdpError(f"default layout supports 1..{len(DEFAULT_PAIRS)} pairs")
        return cls(pairs=DEFAULT_PAIRS[:n], **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "TaxiConfig":
        doc = dict(doc)
        if "n" in doc:
            n = doc.pop("n")
            doc.setdefault("pairs", DEFAULT_PAIRS[:n])
        return cls(**doc)

    @property
    def dim(self) -> int:
        return len(self.pairs)

    def check(self) -> None:
        if self.width < 1 or self.height < 1:
            raise MomdpError("grid must be at least 1x1")
        if not self.pairs:
            raise MomdpError("taxi needs at least one origin/destination pair")
        cells = [self.start] + [c for pair in self.pairs for c in pair]
        for r, c in cells:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise MomdpError(f"cell {(r, c)} lies outside the grid")
        origins = [o for o, _ in self.pairs]
        if len(set(origins)) != len(origins):
            raise MomdpError("origins must be distinct")
        for o, d in self.pairs:
            if o == d:
                raise MomdpError(f"pair {(o, d)} has origin equal to destination")


@dataclass(frozen=True)
class TaxiState:
    cell: Cell
    cargo: int | None = None  # index of the pair whose passenger is aboard


@dataclass
class Taxi:
    """Builder and state codec for the taxi MOMDP."""

    cfg: TaxiConfig = field(default_factory=TaxiConfig)

    def __post_init__(self):
        self.cfg.check()
        self.n_cargo = self.cfg.dim + 1

    @property
    def n_states(self) -> int:
        return self.cfg.width * self.cfg.height * self.n_cargo

    def encode(self, state: TaxiState) -> int:
        r, c = state.cell
        code = 0 if state.cargo is None else state.cargo + 1
        return (r * self.cfg.width + c) * self.n_cargo + code

    def decode(self, s: int) -> TaxiState:
        cell, code = divmod(s, self.n_cargo)
        r, c = divmod(cell, self.cfg.width)
        return TaxiState((r, c), None if code == 0 else code - 1)

    def transition(self, state: TaxiState, a: int) -> tuple[TaxiState, np.ndarray]:
        """Deterministic successor and reward for one action."""
        cfg = self.cfg
        reward = np.zeros(cfg.dim)
        if a in _MOVES:
            dr, dc = _MOVES[a]
            r = min(max(state.cell[0] + dr, 0), cfg.height - 1)
            c = min(max(state.cell[1] + dc, 0), cfg.width - 1)
            return TaxiState((r, c), state.cargo), reward
        if a == PICK:
            if state.cargo is None:
                for k, (origin, _) in enumerate(cfg.pairs):
                    if origin == state.cell:
                        return TaxiState(state.cell, k), reward
            return state, reward + cfg.penalty
        if a == DROP:
            if state.cargo is not None and cfg.pairs[state.cargo][1] == state.cell:
                reward[state.cargo] = cfg.delivery
                return TaxiState(state.cell, None), reward
            return state, reward + cfg.penalty
        raise MomdpError(f"unknown taxi action {a}")

    def build(self) -> TabularMomdp:
        S, A, n = self.n_states, len(ACTIONS), self.cfg.dim
        P = np.zeros((S, A, S))
        R = np.zeros((S, A, n))
        names = []
        for s in range(S):
            state = self.decode(s)
            names.append(f"{state.cell}|{'-' if state.cargo is None else state.cargo}")
            for a in range(A):
                nxt, r = self.transition(state, a)
                P[s, a, self.encode(nxt)] = 1.0
                R[s, a] = r
        start = self.encode(TaxiState(self.cfg.start))
        return TabularMomdp(
            [list(range(A))] * S,
            P,
            R,
            start,
            (),
            self.cfg.gamma,
            state_names=names,
            action_names=list(ACTIONS),
        )


def build_taxi(cfg: TaxiConfig | None = None) -> TabularMomdp:
    return Taxi(cfg or TaxiConfig()).build()
