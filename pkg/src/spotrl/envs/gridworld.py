"""Lava-crossing grid world with a distance-field progress signal.

A 9x9 bordered grid: the agent starts in the top-left interior corner
facing east, the goal sits in the opposite corner, and two vertical lava
walls each leave a single random gap. Progress toward the goal is read
off a BFS distance field computed from the goal over passable cells
(the wavefront), normalized so the start is 0 and the goal is 1.

The action mask forbids moving forward into lava (fatal) or into a wall
(a guaranteed no-op), leaving turns always available.
"""
from __future__ import annotations

import random
from collections import deque
from typing import Optional

from ..rewards import StepOutcome

EMPTY, WALL, LAVA, GOAL = ".", "#", "L", "G"

# Headings in clockwise order; index is the heading id.
HEADINGS = ("N", "E", "S", "W")
HEADING_GLYPHS = {"N": "^", "E": ">", "S": "v", "W": "<"}
DELTAS = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}

FORWARD, TURN_LEFT, TURN_RIGHT = 0, 1, 2
ACTION_TYPES = ("forward", "turn_left", "turn_right")

# Lava wall columns and the rows a gap may occupy. The gap band is kept
# narrow so the layout family stays small enough for a tabular policy to
# master every layout within a modest action budget: wider bands admit
# deep zigzag layouts (first gap low, second gap high) that undirected
# exploration essentially never completes inside the 100-action limit.
LAVA_COLUMNS = (3, 5)
GAP_ROWS = (4, 5)

GridState = tuple  # (x, y, heading, layout key) — pose plus the full observable grid


class GenerationError(RuntimeError):
    """Layout generation produced an unsolvable grid."""


class GridWorld:
    """Single-owner, seedable lava-crossing environment."""

    n_actions = 3
    action_types = ACTION_TYPES
    name = "gridworld"

    def __init__(
        self,
        width: int = 9,
        height: int = 9,
        action_limit: int = 100,
        start: tuple[int, int] = (1, 1),
        goal: tuple[int, int] = (7, 7),
    ):
        self.width = width
        self.height = height
        self.action_limit = action_limit
        self.start = start
        self.goal = goal
        self.cells: list[list[str]] = []
        self.agent_x, self.agent_y = start
        self.heading = "E"
        self.consecutive_turns = 0
        self.step_count = 0
        self.terminal = False
        self.last_event: Optional[str] = None
        self._dist: dict[tuple[int, int], int] = {}
        self._layout_key: tuple[tuple, tuple] = ((), ())

    # -- layout -----------------------------------------------------------

    @classmethod
    def generate(cls, seed: int, **kwargs) -> "GridWorld":
        g = cls(**kwargs)
        g.reset(seed)
        return g

    def reset(self, seed: Optional[int] = None) -> GridState:
        """Reset the agent (and, when a seed is given, draw a new layout)."""
        if seed is not None:
            rng = random.Random(seed)
            while True:
                self._build_layout(rng)
                if self._solvable():
                    break
        elif not self.cells:
            raise GenerationError("no layout: reset needs a seed the first time")
        self._dist = self._wavefront_from(self.goal)
        if self._dist.get(self.start) is None:
            raise GenerationError("start unreachable from goal")
        self._layout_key = self._compute_layout_key()
        self.agent_x, self.agent_y = self.start
        self.heading = "E"
        self.consecutive_turns = 0
        self.step_count = 0
        self.terminal = False
        self.last_event = None
        return self.state()

    def _build_layout(self, rng: random.Random) -> None:
        w, h = self.width, self.height
        cells = [[EMPTY] * w for _ in range(h)]
        for x in range(w):
            cells[0][x] = cells[h - 1][x] = WALL
        for y in range(h):
            cells[y][0] = cells[y][w - 1] = WALL
        for col in LAVA_COLUMNS:
            gap_y = rng.choice(GAP_ROWS)
            for y in range(1, h - 1):
                if y != gap_y:
                    cells[y][col] = LAVA
        gx, gy = self.goal
        cells[gy][gx] = GOAL
        self.cells = cells

    def _solvable(self) -> bool:
        return self._wavefront_from(self.goal).get(self.start) is not None

    def _compute_layout_key(self) -> tuple[tuple, tuple]:
        """(interior walls, lava cells), each sorted — the observable layout."""
        walls = []
        lavas = []
        for y in range(1, self.height - 1):
            for x in range(1, self.width - 1):
                if self.cells[y][x] == WALL:
                    walls.append((x, y))
                elif self.cells[y][x] == LAVA:
                    lavas.append((x, y))
        return (tuple(sorted(walls)), tuple(sorted(lavas)))

    # -- geometry ---------------------------------------------------------

    def cell(self, x: int, y: int) -> str:
        return self.cells[y][x]

    def passable(self, x: int, y: int) -> bool:
        return self.cell(x, y) in (EMPTY, GOAL)

    def _wavefront_from(self, origin: tuple[int, int]) -> dict[tuple[int, int], int]:
        """BFS distances over passable cells; unreachable cells are absent."""
        if not self.passable(*origin):
            return {}
        dist = {origin: 0}
        queue = deque([origin])
        while queue:
            x, y = queue.popleft()
            for dx, dy in DELTAS.values():
                nxt = (x + dx, y + dy)
                if nxt not in dist and self.passable(*nxt):
                    dist[nxt] = dist[(x, y)] + 1
                    queue.append(nxt)
        return dist

    def distance_field(self) -> dict[tuple[int, int], int]:
        return dict(self._dist)

    def progress_at(self, x: int, y: int) -> float:
        """1 - remaining/initial distance: 0 at the start cell, 1 at the goal.

        Clamped below at 0 for cells even farther from the goal than the
        start is (wandering backwards past the start cell).
        """
        return max(0.0, 1.0 - self._dist[(x, y)] / self._dist[self.start])

    def progress(self) -> float:
        return self.progress_at(self.agent_x, self.agent_y)

    def state(self) -> GridState:
        """Agent pose plus a canonical key for everything observable in the
        layout (interior walls and lava cells). The whole grid is part of
        the state, so values learned under one layout never bleed into
        another, and masks can be recomputed from a stored state alone."""
        return (self.agent_x, self.agent_y, self.heading, self._layout_key)

    # -- dynamics ---------------------------------------------------------

    def step(self, action: int) -> tuple[GridState, StepOutcome, Optional[str]]:
        if self.terminal:
            raise RuntimeError("step on a terminal environment")
        before = self.progress()
        event: Optional[str] = None
        task_complete = False
        if action == FORWARD:
            self.consecutive_turns = 0
            dx, dy = DELTAS[self.heading]
            nx, ny = self.agent_x + dx, self.agent_y + dy
            target = self.cell(nx, ny)
            if target == LAVA:
                self.agent_x, self.agent_y = nx, ny
                self.terminal = True
                event = "lava"
            elif target != WALL:
                self.agent_x, self.agent_y = nx, ny
                if target == GOAL:
                    self.terminal = True
                    task_complete = True
                    event = "goal"
        elif action == TURN_LEFT:
            self.heading = HEADINGS[(HEADINGS.index(self.heading) - 1) % 4]
            self.consecutive_turns += 1
        elif action == TURN_RIGHT:
            self.heading = HEADINGS[(HEADINGS.index(self.heading) + 1) % 4]
            self.consecutive_turns += 1
        else:
            raise ValueError(f"unknown action {action}")

        self.step_count += 1
        if not self.terminal and self.step_count >= self.action_limit:
            self.terminal = True
            event = "limit"

        # A step into lava leaves progress pinned at its pre-step value:
        # there is no distance defined on a lava cell.
        after = before if event == "lava" else self.progress()
        outcome = StepOutcome(
            action_type=ACTION_TYPES[action],
            success=after > before,
            progress_before=before,
            progress_after=after,
            terminal=self.terminal,
            task_complete=task_complete,
        )
        return self.state(), outcome, event

    def situation_removal_check(self, progress_before: float, progress_after: float) -> bool:
        """Training-time hard-reset trigger: progress lost, or spinning in place."""
        return progress_after < progress_before or self.consecutive_turns > 2

    def instant_reward_override(self, outcome: StepOutcome, reward_kind: str) -> Optional[float]:
        """The environment's own sparse reward — 1 only at the goal — used in
        place of the shaped family for the plain and discounted kinds."""
        if reward_kind in ("base", "discounted"):
            return 1.0 if outcome.task_complete else 0.0
        return None

    # -- masking ----------------------------------------------------------

    def mask_for(self, state: GridState) -> list[bool]:
        """Forward is disallowed into lava (fatal) and into walls (certain
        no-op); turning is always allowed. Computed from the state alone so
        replayed states keep the mask of the layout they came from."""
        x, y, heading, (walls, lavas) = state
        dx, dy = DELTAS[heading]
        fx, fy = x + dx, y + dy
        blocked = (
            fx in (0, self.width - 1)
            or fy in (0, self.height - 1)
            or (fx, fy) in walls
            or (fx, fy) in lavas
        )
        return [not blocked, True, True]

    def mask(self) -> list[bool]:
        return self.mask_for(self.state())

    # -- planning ---------------------------------------------------------

    def ideal_actions(self) -> int:
        """Fewest actions (moves + turns) from the start pose to the goal,
        by BFS over (x, y, heading) poses."""
        start_pose = (*self.start, "E")
        dist = {start_pose: 0}
        queue = deque([start_pose])
        while queue:
            x, y, heading = queue.popleft()
            if (x, y) == self.goal:
                return dist[(x, y, heading)]
            idx = HEADINGS.index(heading)
            succs = [(x, y, HEADINGS[(idx - 1) % 4]), (x, y, HEADINGS[(idx + 1) % 4])]
            dx, dy = DELTAS[heading]
            if self.passable(x + dx, y + dy):
                succs.append((x + dx, y + dy, heading))
            for pose in succs:
                if pose not in dist:
                    dist[pose] = dist[(x, y, heading)] + 1
                    queue.append(pose)
        raise GenerationError("goal unreachable in pose graph")

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        """One character per cell; the agent is drawn as ^ > v <."""
        rows = []
        for y in range(self.height):
            row = []
            for x in range(self.width):
                if (x, y) == (self.agent_x, self.agent_y):
                    row.append(HEADING_GLYPHS[self.heading])
                else:
                    row.append(self.cell(x, y))
            rows.append("".join(row))
        return "\n".join(rows)

    @classmethod
    def from_text(cls, text: str, action_limit: int = 100) -> "GridWorld":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        height = len(lines)
        width = len(lines[0])
        glyph_heading = {v: k for k, v in HEADING_GLYPHS.items()}
        agent = None
        heading = "E"
        goal = None
        cells = []
        for y, line in enumerate(lines):
            if len(line) != width:
                raise ValueError("ragged grid text")
            row = []
            for x, ch in enumerate(line):
                if ch in glyph_heading:
                    agent = (x, y)
                    heading = glyph_heading[ch]
                    row.append(EMPTY)
                    continue
                if ch == GOAL:
                    goal = (x, y)
                if ch not in (EMPTY, WALL, LAVA, GOAL):
                    raise ValueError(f"unknown cell character {ch!r}")
                row.append(ch)
            cells.append(row)
        if agent is None or goal is None:
            raise ValueError("grid text needs an agent glyph and a goal")
        g = cls(width=width, height=height, action_limit=action_limit,
                start=agent, goal=goal)
        g.cells = cells
        g.reset()
        g.heading = heading
        return g
