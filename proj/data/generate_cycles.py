#!/usr/bin/env python3
"""Regenerates the synthetic drive-cycle CSVs in this directory.

The real UDDS / HWFET / US06 schedules are not redistributable here, so these
are synthetic stand-ins that preserve the properties the simulator cares
about: the official total distances (7.45 / 10.26 / 8.01 miles, combined
25.72), 1 Hz sampling, and urban / highway / aggressive speed character.
Accelerations stay within [-3.0, +1.5] m/s^2 so a driver model bounded by the
corridor limits can track them exactly.
"""

import pathlib

MPH = 0.44704
ACCEL = 1.3   # m/s^2
DECEL = 2.2   # m/s^2 (magnitude)


def build(segments):
    """segments: list of (target_mph, hold_seconds) -> 1 Hz speed list (m/s)."""
    v = 0.0
    vs = [0.0]
    for target_mph, hold in segments:
        vt = target_mph * MPH
        while abs(v - vt) > 1e-9:
            dv = vt - v
            v += min(ACCEL, dv) if dv > 0 else max(-DECEL, dv)
            vs.append(v)
        vs.extend([v] * hold)
    while v > 0.0:
        v = max(0.0, v - DECEL)
        vs.append(v)
    return vs


def distance(vs):
    return sum(0.5 * (a + b) for a, b in zip(vs, vs[1:]))


def close_distance(vs, target_miles, cruise_mph):
    """Pads or trims cruise samples at cruise_mph until the distance closes."""
    target = target_miles * 1609.344
    vc = cruise_mph * MPH
    idx = max(i for i, v in enumerate(vs) if abs(v - vc) < 1e-9)
    while distance(vs) < target - 0.5 * vc:
        vs.insert(idx, vc)
    while distance(vs) > target + 0.5 * vc:
        del vs[idx]
        idx -= 1
    return vs


def write(name, vs):
    path = pathlib.Path(__file__).parent / f"{name}.csv"
    with open(path, "w") as f:
        f.write("seconds,mph\n")
        for t, v in enumerate(vs):
            f.write(f"{t},{v / MPH:.4f}\n")
    print(f"{name}: {len(vs)} samples, {distance(vs) / 1609.344:.4f} miles")


def main():
    urban = []
    for rep in range(8):
        urban += [(22, 25), (0, 8), (30, 40), (12, 10), (0, 6), (34, 55), (0, 10)]
    udds = close_distance(build(urban), 7.45, 34)

    highway = [(45, 60), (52, 180), (58, 240), (48, 120), (55, 240), (40, 30), (50, 120)]
    hwfet = close_distance(build(highway), 10.26, 55)

    aggressive = [(35, 15), (65, 60), (75, 90), (30, 10), (70, 120), (45, 20), (72, 90),
                  (0, 5), (60, 60)]
    us06 = close_distance(build(aggressive), 8.01, 72)

    write("udds", udds)
    write("hwfet", hwfet)
    write("us06", us06)


if __name__ == "__main__":
    main()
