"""Resource Gathering: a 5x5 grid with randomly (re)spawning resources.

Each reward dimension is one resource type (gold, gem, sword). The state is
the agent cell plus a presence bit per resource site, encoded as a dense id.
The resource map evolves stochastically, so this is a stepping environment
rather than a flattened :class:`TabularMomdp`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..momdp import InvalidActionError, MomdpError

ACTIONS = ("up", "down", "left", "right")
_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
RESOURCE_TYPES = ("gold", "gem", "sword")

Cell = tuple[int, int]

# Gold and gem sites sit near the centre, swords in two far corners.
DEFAULT_SITES: tuple[tuple[Cell, int], ...] = (
    ((1, 1), 0),
    ((3, 3), 0),
    ((1, 3), 1),
    ((3, 1), 1),
    ((0, 4), 2),
    ((4, 0), 2),
)


@dataclass(frozen=True)
class RgConfig:
    size: int = 5
    sites: tuple[tuple[Cell, int], ...] = DEFAULT_SITES
    p_spawn: float = 0.9999
    p_disappear: float = 0.1
    values: tuple[float, ...] = (10.0, 10.0, 10.0)
    start: Cell = (2, 2)
    gamma: float = 0.99

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple((tuple(c), int(k)) for c, k in self.sites))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "start", tuple(self.start))

    @classmethod
    def scaled(cls, sword: float = 50.0, **kwargs) -> "RgConfig":
        return cls(values=(10.0, 10.0, sword), **kwargs)

    def check(self) -> None:
        if self.size != 5:
            raise MomdpError("resource gathering uses a 5x5 grid")
        for p in (self.p_spawn, self.p_disappear):
            if not 0.0 <= p <= 1.0:
                raise MomdpError("spawn/disappear probabilities must lie in [0, 1]")
        if len(self.values) != len(RESOURCE_TYPES) or min(self.values) <= 0:
            raise MomdpError("need one positive value per resource type")
        cells = [c for c, _ in self.sites]
        if len(set(cells)) != len(cells):
            raise MomdpError("resource sites must be distinct")
        for (r, c), k in self.sites:
            if not (0 <= r < self.size and 0 <= c < self.size):
                raise MomdpError(f"site {(r, c)} lies outside the grid")
            if not 0 <= k < len(RESOURCE_TYPES):
                raise MomdpError(f"unknown resource type {k}")


class ResourceGathering:
    """Functional stepping environment; the dense state id carries everything.

    A resource is collected when the agent moves into its cell (bumping a wall
    does not count). After the move, every other site updates independently:
    a present resource vanishes with ``p_disappear`` and a vacant site spawns
    with ``p_spawn``. The collected site stays vacant for that step.
    """

    n_actions = len(ACTIONS)
    dim = len(RESOURCE_TYPES)
    episodic = False
    terminals = frozenset()

    def __init__(self, cfg: RgConfig | None = None):
        self.cfg = cfg or RgConfig()
        self.cfg.check()
        self.n_sites = len(self.cfg.sites)
        self._n_maps = 1 << self.n_sites
        self._site_at = {cell: i for i, (cell, _) in enumerate(self.cfg.sites)}
        self._site_type = [k for _, k in self.cfg.sites]
        self._actions = np.arange(self.n_actions)
        self._bits = 1 << np.arange(self.n_sites)
        self.gamma = self.cfg.gamma

    @property
    def n_states(self) -> int:
        return self.cfg.size * self.cfg.size * self._n_maps

    def encode(self, cell: Cell, present: int) -> int:
        return (cell[0] * self.cfg.size + cell[1]) * self._n_maps + present

    def decode(self, s: int) -> tuple[Cell, int]:
        cell, present = divmod(s, self._n_maps)
        return divmod(cell, self.cfg.size), present

    def present_sites(self, s: int) -> list[int]:
        _, present = self.decode(s)
        return [i for i in range(self.n_sites) if present >> i & 1]

    def is_terminal(self, s: int) -> bool:
        return False

    def actions(self, s: int) -> np.ndarray:
        return self._actions

    def start_state(self, rng=None) -> int:
        return self.encode(self.cfg.start, self._n_maps - 1)

    def step(self, s: int, a: int, rng) -> tuple[int, np.ndarray]:
        """One step; consumes a single ``rng.random(n_sites)`` draw."""
        if not 0 <= a < self.n_actions:
            raise InvalidActionError(f"action {a} not available")
        (r, c), present = self.decode(s)
        dr, dc = _MOVES[a]
        size = self.cfg.size
        nr, nc = min(max(r + dr, 0), size - 1), min(max(c + dc, 0), size - 1)
        reward = np.zeros(self.dim)
        collected = -1
        if (nr, nc) != (r, c):
            site = self._site_at.get((nr, nc))
            if site is not None and present >> site & 1:
                k = self._site_type[site]
                reward[k] = self.cfg.values[k]
                present &= ~(1 << site)
                collected = site
        u = rng.random(self.n_sites)
        is_on = (present & self._bits) != 0
        flip = np.where(is_on, u < self.cfg.p_disappear, u < self.cfg.p_spawn)
        if collected >= 0:
            flip[collected] = False
        present ^= int(self._bits[flip].sum())
        return self.encode((nr, nc), present), reward


def build_rg(cfg: RgConfig | None = None) -> ResourceGathering:
    return ResourceGathering(cfg)
