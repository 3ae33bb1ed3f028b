import os
from itertools import permutations
from pathlib import Path

import pytest

import shapkit

DATA = Path(os.environ.get("SHAPKIT_DATA", Path(__file__).resolve().parents[2] / "data"))


def brute_shapley(n, table):
    phi = [0.0] * n
    perms = list(permutations(range(n)))
    for order in perms:
        mask = 0
        for i in order:
            before = table[mask]
            mask |= 1 << i
            phi[i] += table[mask] - before
    return [p / len(perms) for p in phi]


def test_escape_room_values():
    assert shapkit.shapley_two_agent(0, 0, 9) == (4.5, 4.5)
    assert shapkit.shapley_exact(2, [0, 0, 0, 9]) == [4.5, 4.5]
    assert shapkit.shapley_game_file(str(DATA / "escape_room_game.json")) == [4.5, 4.5]
    plan = shapkit.side_payments([-1, 10], [4.5, 4.5])
    assert plan == [[0, 0], [5.5, 0]]


def test_exact_matches_permutations():
    table = [0, 1, 2, 4, 3, 5, 6, 11]
    assert shapkit.shapley_exact(3, table) == pytest.approx(brute_shapley(3, table), abs=1e-12)
    est = shapkit.shapley_sampled(3, table, 50000, 7)
    assert sum(est) == pytest.approx(11)
    assert est == pytest.approx(brute_shapley(3, table), abs=0.1)


def test_bad_table_is_a_usage_error():
    with pytest.raises(shapkit.ShapkitError):
        shapkit.shapley_exact(2, [0, 1, 2])
    with pytest.raises(shapkit.DataError):
        shapkit.shapley_game_file("/nonexistent.json")


def test_message_round_trip():
    text = "<s>I propose transferring 5.5 because you paid the lever cost</s>"
    msg = shapkit.parse_message(text)
    assert msg == {"type": "transfer", "amount": 5.5, "reasoning": "you paid the lever cost"}
    assert shapkit.render_message(msg) == text
    counter = shapkit.parse_message("<s>I counter-propose transferring 3 because meet halfway</s>")
    assert counter["stance"] == "counter-propose"
    assert shapkit.render_message(counter).startswith("<s>I counter-propose transferring 3")
    with pytest.raises(shapkit.ShapkitError):
        shapkit.parse_message("<s>whatever</s>")


def test_wev_report():
    rep = shapkit.wev_report(DATA / "wev_bmi.csv")
    prog = next(r for r in rep["rows"] if r["role"] == "Programmer")
    assert prog["lo"] == pytest.approx(30.9, abs=0.1)
    assert prog["adjustment"] == pytest.approx(5.9)
    assert "Programmer" in rep["text"]


def test_escape_episode_settles_on_shapley():
    res = shapkit.run_episode("escape_room", ["shapley_negotiator"] * 2, "SC", 0)
    assert not res["aborted"]
    assert res["settlement"]["allocation"] == [4.5, 4.5]
    greedy = shapkit.run_episode("escape_room", ["greedy_selfish"] * 2, "LLM_ONLY", 0)
    assert greedy["settlement"]["allocation"] == [-1, -1]


def test_raid_trajectory_shapley_is_efficient():
    res = shapkit.run_episode("raid_battle", ["role_balanced"] * 4, "LLM_ONLY", 1)
    phi = shapkit.trajectory_shapley(res["trajectory"])
    total = sum(res["settlement"]["realized"])
    assert sum(phi) == pytest.approx(total, abs=1e-9)
    again = shapkit.run_episode("raid_battle", ["role_balanced"] * 4, "LLM_ONLY", 1)
    assert again["trajectory"] == res["trajectory"]
    with pytest.raises(shapkit.UsageError):
        shapkit.trajectory_shapley(res["trajectory"], mode="guess")
