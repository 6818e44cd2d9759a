#!/usr/bin/env python3
"""Generates the small-city scenario: 13 airports, 45 nodes, 67 two-way airways at 120 m, 100 demands."""

import argparse
import json
import math
import random

ROWS, COLS = 5, 9
SPACING = 150.0
ALTITUDE = 120.0
AIRPORT_OFFSET = 45.0

# Grid edges dropped to get from 76 to 67 airways; the graph stays connected.
DROPPED = {
    ((0, 1), (1, 1)), ((0, 6), (0, 7)), ((1, 3), (1, 4)), ((1, 7), (2, 7)), ((2, 1), (2, 2)),
    ((2, 5), (3, 5)), ((3, 3), (3, 4)), ((3, 7), (4, 7)), ((4, 1), (4, 2)),
}

AIRPORT_CELLS = [(0, 0), (0, 4), (0, 8), (2, 0), (2, 4), (2, 8), (4, 0), (4, 4), (4, 8),
                 (1, 2), (1, 6), (3, 2), (3, 6)]


def node_id(r, c):
    return r * COLS + c + 1


def build(seed, demands, pads, capacity, spread):
    rng = random.Random(seed)
    nodes = []
    for r in range(ROWS):
        for c in range(COLS):
            nodes.append({"id": node_id(r, c), "e": c * SPACING, "n": r * SPACING, "u": ALTITUDE})

    airways = []
    for r in range(ROWS):
        for c in range(COLS):
            for dr, dc in ((0, 1), (1, 0)):
                r2, c2 = r + dr, c + dc
                if r2 >= ROWS or c2 >= COLS or ((r, c), (r2, c2)) in DROPPED:
                    continue
                airways.append({"id": len(airways) + 1, "a": node_id(r, c), "b": node_id(r2, c2),
                                "radius": 10.0, "bidirectional": True, "capacity": capacity})

    airports = []
    for i, (r, c) in enumerate(AIRPORT_CELLS):
        # Diagonal offset pointing away from the grid center keeps pads clear of corridors.
        de = -1.0 if c < COLS / 2 else 1.0
        dn = -1.0 if r < ROWS / 2 else 1.0
        if c == COLS // 2:
            de = 1.0
        if r == ROWS // 2:
            dn = 1.0
        k = AIRPORT_OFFSET / math.sqrt(2.0)
        airports.append({"id": i + 1, "e": c * SPACING + de * k, "n": r * SPACING + dn * k, "u": 0.0,
                         "node": node_id(r, c), "pads": pads})

    demand_list = []
    for d in range(demands):
        o = rng.randrange(len(airports))
        t = rng.randrange(len(airports) - 1)
        if t >= o:
            t += 1
        demand_list.append({"id": d + 1, "origin": o + 1, "destination": t + 1,
                            "departure": rng.randrange(spread + 1) if spread else 0,
                            "payload": rng.choice(["parcel", "medical", "food"])})

    fleet = [{"id": d["id"], "home": d["origin"]} for d in demand_list]
    return {
        "name": "smallcity_100",
        "seed": seed,
        "datum": {"lat": 30.52, "lon": 114.36, "alt": 20.0},
        "map": "smallcity",
        "network": {"nodes": nodes, "airports": airports, "airways": airways},
        "fleet": fleet,
        "demands": demand_list,
        "clock": {"tick_rate": 30, "substeps": 8, "telemetry_every": 3, "max_ticks": 54000},
        "policy": {"max_airway_occupancy_fraction": 1.0, "departure_separation": 60},
        "traffic": {},
        "links": {},
        "anomalies": [],
    }


def center_airways(doc):
    center = node_id(ROWS // 2, COLS // 2)
    west, east = node_id(ROWS // 2, COLS // 2 - 1), node_id(ROWS // 2, COLS // 2 + 1)
    return [a["id"] for a in doc["network"]["airways"]
            if {a["a"], a["b"]} in ({center, west}, {center, east})]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--demands", type=int, default=100)
    ap.add_argument("--pads", type=int, default=4)
    ap.add_argument("--capacity", type=int, default=24)
    ap.add_argument("--spread", type=int, default=300, help="requested departures drawn from [0, spread] ticks")
    ap.add_argument("--anomalies", action="store_true", help="add a motor failure and a mid-run airway closure")
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args()
    doc = build(args.seed, args.demands, args.pads, args.capacity, args.spread)
    if args.anomalies:
        doc["name"] = "smallcity_100_anomaly"
        doc["anomalies"] = [
            {"id": "motor-1", "category": "uav", "kind": "motor_failure", "onset": 1500, "duration": "permanent",
             "params": {"uav": 1, "motor": 2, "residual": 0.5}},
            {"id": "close-center", "category": "control", "kind": "close_airway", "onset": 2400, "duration": 3600,
             "params": {"airways": center_airways(doc)}},
        ]
    with open(args.output, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
