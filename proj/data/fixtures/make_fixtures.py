#!/usr/bin/env python3
"""Regenerates the bundled scenario fixtures in this directory."""

import json
import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DT = 0.1
H = 10


def r(x):
    return round(x, 6)


def line(p0, p1, n=2):
    return [[r(p0[0] + (p1[0] - p0[0]) * i / (n - 1)), r(p0[1] + (p1[1] - p0[1]) * i / (n - 1))]
            for i in range(n)]


def arc(center, radius, phi0, phi1, n=12):
    return [[r(center[0] + radius * math.cos(phi0 + (phi1 - phi0) * i / (n - 1))),
             r(center[1] + radius * math.sin(phi0 + (phi1 - phi0) * i / (n - 1)))]
            for i in range(n)]


def lane(lid, pts, speed, succ, **kw):
    out = {"id": lid, "centerline": pts, "speed_limit": speed, "successors": succ}
    out.update(kw)
    return out


def history(x, y, theta, v):
    """Constant-velocity history ending at (x, y)."""
    states = []
    for k in range(H):
        back = (H - 1 - k) * DT * v
        states.append([r(x - back * math.cos(theta)), r(y - back * math.sin(theta)), r(theta), r(v)])
    return states


def entity(eid, role, x, y, theta, v):
    return {"id": eid, "role": role, "states": history(x, y, theta, v)}


def scenario(lanes, agents, route, policies, horizon=80):
    return {"map": {"lanes": lanes},
            "history": {"dt": DT, "agents": agents},
            "ego_route": route,
            "policies": policies,
            "sim": {"horizon_steps": horizon, "dt": DT}}


def write(name, data):
    with open(os.path.join(HERE, name), "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def rot(p, k):
    x, y = p
    for _ in range(k % 4):
        x, y = -y, x
    return [r(x), r(y)]


def four_way(speed=10.0):
    """Right-hand-traffic 4-way junction, approaches 92 m long, exits 92 m long."""
    sides_in = ["S", "E", "N", "W"]  # approach side for rotation 0..3
    out_side = {0: "N", 1: "W", 2: "S", 3: "E"}  # side reached going straight
    left_of = {0: "W", 1: "S", 2: "E", 3: "N"}
    right_of = {0: "E", 1: "N", 2: "W", 3: "S"}
    lanes = []
    for k, side in enumerate(sides_in):
        def R(pts):
            return [rot(p, k) for p in pts]
        lanes.append(lane(side + "_in", R(line((2, -100), (2, -8), 5)), speed,
                          [side + "_left", side + "_right", side + "_straight"]))
        lanes.append(lane(side + "_straight", R(line((2, -8), (2, 8), 3)), speed,
                          [out_side[k] + "_out"]))
        lanes.append(lane(side + "_left", R(arc((-8, -8), 10, 0.0, math.pi / 2)), speed,
                          [left_of[k] + "_out"]))
        lanes.append(lane(side + "_right", R(arc((8, -8), 6, math.pi, math.pi / 2)), speed,
                          [right_of[k] + "_out"]))
    for k, side in enumerate(["N", "W", "S", "E"]):
        lanes.append(lane(side + "_out", [rot(p, k) for p in line((2, 8), (2, 100), 5)], speed, []))
    return lanes


def t_junction(speed=10.0):
    """Main road east-west with a stem to the south."""
    return [
        lane("wb_in", line((92, 2), (8, 2), 5), speed, ["wb_left", "wb_straight"]),
        lane("wb_straight", line((8, 2), (-8, 2), 3), speed, ["wb_out"]),
        lane("wb_left", arc((8, -8), 10, math.pi / 2, math.pi), speed, ["sb_out"]),
        lane("wb_out", line((-8, 2), (-100, 2), 5), speed, []),
        lane("eb_in", line((-92, -2), (-8, -2), 5), speed, ["eb_right", "eb_straight"]),
        lane("eb_straight", line((-8, -2), (8, -2), 3), speed, ["eb_out"]),
        lane("eb_right", arc((-8, -8), 6, math.pi / 2, 0.0), speed, ["sb_out"]),
        lane("eb_out", line((8, -2), (100, -2), 5), speed, []),
        lane("sb_out", line((-2, -8), (-2, -100), 5), speed, []),
    ]


def main():
    # Straight road: ego closing on a slower lead vehicle.
    lanes = [lane("road", line((0, 0), (400, 0), 9), 12.0, [])]
    write("straight_road.json", scenario(
        lanes,
        [entity("ego", "ego", 20, 0, 0, 8), entity("lead", "agent", 42, 0, 0, 5)],
        ["road"],
        [{"agent_id": "lead", "kind": "lane-follow", "params": {"target_speed": 5.0}}]))

    # Merge: ramp joins the main road at x = 100.
    lanes = [
        lane("main_a", line((0, 0), (100, 0), 5), 12.0, ["main_b"]),
        lane("main_b", line((100, 0), (400, 0), 7), 12.0, []),
        lane("ramp", [[0, -40], [40, -26], [70, -12], [90, -3.5], [100, 0]], 12.0, ["main_b"]),
    ]
    write("merge.json", scenario(
        lanes,
        [entity("ego", "ego", 45, 0, 0, 9),
         entity("ramp_car", "agent", 43.0, -25.0, math.atan2(14, 30), 9)],
        ["main_a", "main_b"],
        [{"agent_id": "ramp_car", "kind": "lane-follow",
          "params": {"target_speed": 9.0, "route": ["ramp", "main_b"]}}]))

    # T-intersection: ego turns left across one oncoming vehicle.
    write("t_intersection.json", scenario(
        t_junction(),
        [entity("ego", "ego", 40, 2, math.pi, 8), entity("oncoming", "agent", -40, -2, 0, 8)],
        ["wb_in", "wb_left", "sb_out"],
        [{"agent_id": "oncoming", "kind": "lane-follow",
          "params": {"target_speed": 8.0, "route": ["eb_in", "eb_straight", "eb_out"]}}]))

    # 4-way intersection: ego from the south, oncoming from the north.
    write("intersection_4way.json", scenario(
        four_way(),
        [entity("ego", "ego", 2, -40, math.pi / 2, 8), entity("north_car", "agent", -2, 40, -math.pi / 2, 8)],
        ["S_in", "S_left", "W_out"],
        [{"agent_id": "north_car", "kind": "lane-follow",
          "params": {"target_speed": 8.0, "route": ["N_in", "N_straight", "S_out"]}}]))

    # Adversarial T-intersection: the oncoming car creeps, then floors it.
    write("adversarial_intersection.json", scenario(
        t_junction(),
        [entity("ego", "ego", 40, 2, math.pi, 8), entity("oncoming", "agent", -45, -2, 0, 6)],
        ["wb_in", "wb_left", "sb_out"],
        [{"agent_id": "oncoming", "kind": "adversarial-trigger",
          "params": {"target_speed": 6.0, "route": ["eb_in", "eb_straight", "eb_out"],
                     "trigger_time": 2.0, "action": "accelerate", "accel": 2.5,
                     "duration": 3.0, "jitter": {"trigger_time": 0.5, "speed": 0.1}}}],
        horizon=90))

    # Empty single-lane road for open-road planning.
    lanes = [lane("road", line((0, 0), (400, 0), 9), 15.0, [])]
    write("empty_road.json", scenario(
        lanes, [entity("ego", "ego", 10, 0, 0, 4)], ["road"], [], horizon=60))

    # Scripted ego: +1 m/s^2 for 2 s, then -1 m/s^2 for 2 s.
    steps = 40
    v0 = 5.0
    traj = []
    x, v = 10.0, v0
    for k in range(steps + 1):
        traj.append([r(x), 0.0, 0.0, r(v)])
        a = 1.0 if k < steps // 2 else -1.0
        x += DT * v
        v += DT * a
    write("playback.json", scenario(
        lanes, [entity("ego", "ego", 10, 0, 0, v0)], ["road"],
        [{"agent_id": "ego", "kind": "playback", "params": {"trajectory": traj}}], horizon=steps))

    # Collision: a crossing car scripted straight through the ego's position.
    lanes = [lane("road", line((0, 0), (400, 0), 9), 15.0, []),
             lane("cross", line((30, -60), (30, 60), 5), 15.0, [])]
    write("collision.json", scenario(
        lanes,
        [entity("ego", "ego", 10, 0, 0, 5), entity("crosser", "agent", 30, -30, math.pi / 2, 7.5)],
        ["road"],
        [{"agent_id": "ego", "kind": "lane-follow", "params": {"target_speed": 5.0}},
         {"agent_id": "crosser", "kind": "lane-follow", "params": {"target_speed": 7.5}}],
        horizon=80))


if __name__ == "__main__":
    main()
