"""Smoke test for the wallswarm Python module.

Install first:  pip install --no-build-isolation ./crates/py
"""

import csv
import io
import json
import math

import wallswarm


def check_design():
    assert abs(wallswarm.ramp_arc_radius(40.0, 0.8) - 250.0) < 1e-9
    theta = wallswarm.critical_tilt_angle(5.0, 25.8)
    assert abs(theta - math.acos((5.0 / 25.8) ** (1 / 3))) < 1e-12
    assert abs(wallswarm.min_push_width(5.0, 25.8) - wallswarm.required_push_width(theta, 25.8, 5.0)) < 1e-12
    assert len(wallswarm.sample_profile(n=1.0, count=2)) == 3
    sweep = wallswarm.optimize_exponent()
    assert 1.1 <= sweep["best_n"] <= 1.5
    peaks = {n: wallswarm.max_required_force(n)["max_force"] for n in (1.0, 1.3, 2.4)}
    assert peaks[1.0] > peaks[2.4] > peaks[1.3]
    assert "<svg" in wallswarm.export_profile(format="svg")
    try:
        wallswarm.ramp_arc_radius(40.0, 0.0)
    except wallswarm.WallswarmError as e:
        assert "h_wheel" in str(e)
    else:
        raise AssertionError("zero wheel clearance accepted")


def check_world():
    w = wallswarm.World(seed=3)
    w.spawn(1, "table", 275.0, 470.0, 90.0)
    w.spawn(2, "table", 150.0, 300.0, 90.0)
    assert w.go_to(2, "table", 120.0, 200.0)
    report = w.transition(1)
    assert report["success"] and report["direction"] == "table_to_wall"
    assert w.pose(1)[0] == "wall"
    w.command(json.dumps({"type": "move_to", "id": 2, "x": 200.0, "y": 200.0, "setting": 50}))
    before = w.tick
    w.step(30)
    assert w.tick == before + 30
    assert w.events().count("\n") > 0

    replay = wallswarm.World(seed=3)
    replay.spawn(1, "table", 275.0, 470.0, 90.0)
    replay.spawn(2, "table", 150.0, 300.0, 90.0)
    replay.go_to(2, "table", 120.0, 200.0)
    replay.transition(1)
    replay.command(json.dumps({"type": "move_to", "id": 2, "x": 200.0, "y": 200.0, "setting": 50}))
    replay.step(30)
    assert replay.state_hash() == w.state_hash()


def check_batch():
    names = wallswarm.scenario_names()
    assert len(names) == 7
    for name in names:
        run = wallswarm.scenario(name, seed=1)
        assert run["succeeded"], (name, run["status"])
    assert wallswarm.scenario("peak-heights")["log"] == wallswarm.scenario("peak-heights")["log"]

    result = wallswarm.experiment(trials=10, exponents=[1.3], directions=["table_to_wall"])
    rows = list(csv.DictReader(io.StringIO(result["csv"])))
    assert len(rows) == 10 and all(r["outcome"] == "success" for r in rows)
    assert result["cells"][0]["successes"] == 10

    report = wallswarm.stability(hours=0.05)
    assert report["robots"] == 6 and report["collisions"] == 0


if __name__ == "__main__":
    check_design()
    check_world()
    check_batch()
    print("smoke test passed")
