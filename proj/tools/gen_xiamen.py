#!/usr/bin/env python3
"""Generates the obstacle-avoidance scenario: one VFH-guided UAV on an 18 m route of four obstacle sections."""

import argparse
import json

ALTITUDE = 18.0
LEG = 120.0

# Route corners; each consecutive pair is one obstacle section.
CORNERS = [(0.0, 0.0), (LEG, 0.0), (LEG, LEG), (2 * LEG, LEG), (2 * LEG, 2 * LEG)]


def obstacles():
    # Lanes sit 5 m right of travel: y = -5 on leg 1, x = 125 on leg 2,
    # y = 115 on leg 3, x = 245 on leg 4.
    return [
        # Section 1: a lamp post and a tree trunk.
        {"id": 1, "shape": "cylinder", "base": [50.0, -5.0, 0.0], "radius": 1.0, "height": 25.0},
        {"id": 2, "shape": "cylinder", "base": [80.0, -3.5, 0.0], "radius": 2.0, "height": 30.0},
        # Section 2: a building block straddling the lane.
        {"id": 3, "shape": "box", "min": [119.0, 50.0, 0.0], "max": [131.0, 62.0, 35.0]},
        # Section 3: staggered columns.
        {"id": 4, "shape": "cylinder", "base": [160.0, 116.5, 0.0], "radius": 1.5, "height": 40.0},
        {"id": 5, "shape": "cylinder", "base": [190.0, 113.0, 0.0], "radius": 1.5, "height": 40.0},
        {"id": 6, "shape": "cylinder", "base": [215.0, 116.0, 0.0], "radius": 1.5, "height": 40.0},
        # Section 4: a canopy and a wall segment.
        {"id": 7, "shape": "sphere", "center": [245.0, 165.0, 18.0], "radius": 3.0},
        {"id": 8, "shape": "box", "min": [240.0, 200.0, 0.0], "max": [247.5, 201.0, 30.0]},
    ]


def build(seed):
    nodes = [{"id": i + 1, "e": e, "n": n, "u": ALTITUDE} for i, (e, n) in enumerate(CORNERS)]
    airways = [{"id": i + 1, "a": i + 1, "b": i + 2, "radius": 8.0, "bidirectional": True, "capacity": 4}
               for i in range(len(CORNERS) - 1)]
    airports = [
        {"id": 1, "e": -40.0, "n": 0.0, "u": 0.0, "node": 1, "pads": 1},
        {"id": 2, "e": 2 * LEG, "n": 2 * LEG + 40.0, "u": 0.0, "node": len(CORNERS), "pads": 1},
    ]
    lidar = {"channels": 12, "vertical_fov": [-5.0, 5.0], "horizontal_resolution": 1.0, "max_range": 30.0,
             "scan_rate": 1}
    return {
        "name": "xiamen_vfh",
        "seed": seed,
        "datum": {"lat": 24.48, "lon": 118.09, "alt": 5.0},
        "map": {"name": "xiamen_district", "obstacles": obstacles(), "no_fly_zones": []},
        "network": {"nodes": nodes, "airports": airports, "airways": airways},
        "fleet": [{"id": 1, "home": 1, "lidar": lidar, "avoidance": "vfh"}],
        "demands": [{"id": 1, "origin": 1, "destination": 2, "departure": 0, "payload": "parcel"}],
        "clock": {"tick_rate": 30, "substeps": 8, "telemetry_every": 1, "max_ticks": 9000},
        "policy": {},
        "traffic": {},
        "links": {},
        "anomalies": [],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args()
    with open(args.output, "w") as f:
        json.dump(build(args.seed), f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
