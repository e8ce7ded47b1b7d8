"""Lava-crossing grid world: layouts, wavefront progress, masking, dynamics."""

import random

import pytest

from spotrl.envs.gridworld import (
    FORWARD,
    GAP_ROWS,
    LAVA_COLUMNS,
    TURN_LEFT,
    TURN_RIGHT,
    GenerationError,
    GridWorld,
)

from oracles import cell_distance_field, pose_graph_shortest

OPEN_9X9 = "\n".join(
    ["#" * 11]
    + ["#>" + "." * 8 + "#"]
    + ["#" + "." * 9 + "#" for _ in range(7)]
    + ["#" + "." * 8 + "G#"]
    + ["#" * 11]
)

SMALL = """
#####
#>.G#
#...#
#####
"""


# -- layout generation ------------------------------------------------------


def test_generate_is_deterministic():
    a, b = GridWorld.generate(7), GridWorld.generate(7)
    assert a.to_text() == b.to_text()
    assert a.state() == b.state()


def test_every_seed_yields_a_solvable_layout():
    """1000 consecutive seeds all generate layouts where the goal is
    reachable from the start (checked by the independent distance oracle)."""
    for seed in range(1000):
        g = GridWorld.generate(seed)
        assert g.start in cell_distance_field(g)


def test_seeds_vary_the_gap_positions():
    layouts = {GridWorld.generate(seed).state()[3] for seed in range(10)}
    assert len(layouts) >= 2


def test_layout_structure():
    """Bordered 9x9 grid, two full-height lava columns with one gap each."""
    g = GridWorld.generate(3)
    for x in range(9):
        assert g.cell(x, 0) == "#" and g.cell(x, 8) == "#"
    for y in range(9):
        assert g.cell(0, y) == "#" and g.cell(8, y) == "#"
    assert g.cell(*g.goal) == "G" and g.goal == (7, 7)
    assert g.start == (1, 1)
    walls, lavas = g.state()[3]
    assert walls == ()
    assert len(lavas) == 12  # 2 columns x (7 interior rows - 1 gap)
    for col in LAVA_COLUMNS:
        gaps = [y for y in range(1, 8) if (col, y) not in lavas]
        assert len(gaps) == 1 and gaps[0] in GAP_ROWS


# -- wavefront and progress -------------------------------------------------


def test_wavefront_matches_distance_oracle():
    """The env's BFS distance field equals an independent Dijkstra solve,
    cell for cell, on 100 generated layouts."""
    for seed in range(100):
        g = GridWorld.generate(seed)
        assert g.distance_field() == cell_distance_field(g)


def test_open_grid_corner_to_corner_distance():
    """On an obstacle-free 9x9 area the corner-to-corner distance is the
    Manhattan distance 16, and a cell 8 steps out sits at progress 0.5."""
    g = GridWorld.from_text(OPEN_9X9)
    field = g.distance_field()
    assert field[g.start] == 16
    assert field[(9, 1)] == 8
    assert g.progress_at(9, 1) == 0.5
    assert g.progress_at(*g.start) == 0.0
    assert g.progress_at(*g.goal) == 1.0


def test_progress_clamps_behind_the_start():
    """Cells farther from the goal than the start read progress 0, not a
    negative value."""
    g = GridWorld.from_text(SMALL)
    field = g.distance_field()
    assert field[g.start] == 2 and field[(1, 2)] == 3
    assert g.progress_at(1, 2) == 0.0


def test_ideal_actions_matches_pose_oracle():
    """Fewest move/turn actions to the goal equals an independent Dijkstra
    over the pose graph, on 100 generated layouts."""
    for seed in range(100):
        g = GridWorld.generate(seed)
        assert g.ideal_actions() == pose_graph_shortest(g)


# -- dynamics ---------------------------------------------------------------


def test_forward_moves_and_reports_success():
    g = GridWorld.from_text(SMALL)
    state, outcome, event = g.step(FORWARD)
    assert (g.agent_x, g.agent_y) == (2, 1)
    assert state[:3] == (2, 1, "E")
    assert outcome.success and not outcome.terminal and event is None
    assert outcome.progress_after == 0.5


def test_turns_change_heading_only():
    g = GridWorld.from_text(SMALL)
    _, outcome, _ = g.step(TURN_LEFT)
    assert g.heading == "N" and not outcome.success
    assert outcome.progress_before == outcome.progress_after
    g.step(TURN_RIGHT)
    assert g.heading == "E"
    assert g.consecutive_turns == 2
    g.step(FORWARD)
    assert g.consecutive_turns == 0


def test_forward_into_wall_is_a_noop():
    g = GridWorld.from_text(SMALL)
    g.step(TURN_LEFT)  # face the top border
    _, outcome, event = g.step(FORWARD)
    assert (g.agent_x, g.agent_y) == (1, 1)
    assert not outcome.success and event is None and not outcome.terminal


def test_forward_into_goal_completes():
    g = GridWorld.from_text(SMALL)
    g.step(FORWARD)
    state, outcome, event = g.step(FORWARD)
    assert event == "goal"
    assert outcome.terminal and outcome.task_complete
    assert outcome.progress_after == 1.0
    with pytest.raises(RuntimeError):
        g.step(FORWARD)


def test_forward_into_lava_kills_with_pinned_progress():
    """Unmasked lava entry terminates without completion; progress_after
    stays at the pre-step value (no distance exists on a lava cell) and
    the built-in sparse reward stays 0."""
    g = GridWorld.from_text("""
#####
#>LG#
#...#
#####
""")
    state, outcome, event = g.step(FORWARD)
    assert event == "lava"
    assert outcome.terminal and not outcome.task_complete
    assert not outcome.success
    assert outcome.progress_after == outcome.progress_before
    assert g.instant_reward_override(outcome, "base") == 0.0


def test_action_limit_terminates():
    g = GridWorld.from_text(SMALL, action_limit=3)
    g.step(TURN_LEFT)
    g.step(TURN_RIGHT)
    _, outcome, event = g.step(TURN_LEFT)
    assert event == "limit"
    assert outcome.terminal and not outcome.task_complete


def test_unknown_action_rejected():
    g = GridWorld.from_text(SMALL)
    with pytest.raises(ValueError):
        g.step(7)


# -- situation-removal trigger and reward override --------------------------


def test_situation_removal_check():
    g = GridWorld.from_text(SMALL)
    assert g.situation_removal_check(0.5, 0.25) is True  # progress lost
    assert g.situation_removal_check(0.25, 0.5) is False
    g.step(TURN_LEFT)
    g.step(TURN_LEFT)
    assert g.situation_removal_check(0.0, 0.0) is False  # two turns: fine
    g.step(TURN_LEFT)
    assert g.situation_removal_check(0.0, 0.0) is True  # spinning in place


def test_builtin_reward_override_kinds():
    """The env's own sparse goal reward replaces the shaped family for the
    plain and discounted kinds only."""
    g = GridWorld.from_text(SMALL)
    g.step(FORWARD)
    _, outcome, _ = g.step(FORWARD)  # reaches the goal
    assert g.instant_reward_override(outcome, "base") == 1.0
    assert g.instant_reward_override(outcome, "discounted") == 1.0
    for kind in ("sr", "progress", "trial_sr", "trial_progress"):
        assert g.instant_reward_override(outcome, kind) is None


# -- masking ----------------------------------------------------------------


def test_mask_blocks_walls_and_lava_only():
    g = GridWorld.from_text("""
#####
#>LG#
#...#
#####
""")
    assert g.mask() == [False, True, True]  # lava dead ahead
    g.step(TURN_RIGHT)  # face south: empty cell
    assert g.mask() == [True, True, True]
    g.step(TURN_RIGHT)  # face west: border wall
    assert g.mask() == [False, True, True]


def test_mask_is_a_pure_function_of_the_state():
    """mask_for agrees with the grid content ahead of the pose for every
    passable pose on 20 layouts — and querying it never moves the agent."""
    deltas = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}
    for seed in range(20):
        g = GridWorld.generate(seed)
        walls, lavas = g.state()[3]
        for y in range(1, 8):
            for x in range(1, 8):
                if not g.passable(x, y):
                    continue
                for heading in "NESW":
                    mask = g.mask_for((x, y, heading, (walls, lavas)))
                    dx, dy = deltas[heading]
                    ahead = g.cell(x + dx, y + dy)
                    assert mask == [ahead in (".", "G"), True, True]


def test_masked_random_walk_never_enters_lava():
    """Following any policy that respects the mask, lava death is
    impossible: random masked walks over 30 seeds never see a lava event."""
    for seed in range(30):
        g = GridWorld.generate(seed)
        rng = random.Random(seed)
        while True:
            allowed = [a for a, ok in enumerate(g.mask()) if ok]
            _, outcome, event = g.step(rng.choice(allowed))
            assert event != "lava"
            assert g.cell(g.agent_x, g.agent_y) != "L"
            if outcome.terminal:
                assert event in ("goal", "limit")
                break


# -- serialization ----------------------------------------------------------


def test_text_round_trip():
    g = GridWorld.generate(5)
    g.step(TURN_LEFT)  # non-default heading must survive the round trip
    text = g.to_text()
    h = GridWorld.from_text(text)
    assert h.to_text() == text
    assert h.state() == g.state()
    assert h.distance_field() == g.distance_field()


def test_reset_without_layout_fails():
    with pytest.raises(GenerationError):
        GridWorld().reset()


def test_reset_reuses_layout_without_seed():
    g = GridWorld.generate(4)
    layout = g.state()[3]
    g.step(FORWARD)
    state = g.reset()
    assert state[:3] == (1, 1, "E")
    assert state[3] == layout


def test_from_text_rejects_bad_grids():
    with pytest.raises(ValueError):
        GridWorld.from_text("####\n#.G#\n####")  # no agent glyph
    with pytest.raises(ValueError):
        GridWorld.from_text("####\n#>.#\n####")  # no goal
    with pytest.raises(ValueError):
        GridWorld.from_text("####\n#>G\n####")  # ragged
    with pytest.raises(ValueError):
        GridWorld.from_text("####\n#>?#\n####")  # unknown cell character
