#!/usr/bin/env python3
"""Writes hourly consumer load profiles for 2021 (supermarket, hotel)."""
import math
import pathlib
import sys
from datetime import datetime, timedelta

Q_PER_P = 0.329
PEAK_MW = {"supermarket": 0.3, "hotel": 0.2}


def supermarket(t):
    open_day = t.weekday() < 6
    h = t.hour
    base = 0.35
    if open_day and 7 <= h < 21:
        shape = 0.85 + 0.15 * math.sin(math.pi * (h - 7) / 14)
    elif open_day and h in (6, 21):
        shape = 0.6
    else:
        shape = base
    cooling = 1.0 + 0.08 * math.cos(2 * math.pi * (t.timetuple().tm_yday - 200) / 365)
    return min(1.0, shape * cooling)


def hotel(t):
    h = t.hour
    shape = 0.45
    shape += 0.35 * math.exp(-((h - 8) ** 2) / 2.0)
    shape += 0.5 * math.exp(-((h - 20) ** 2) / 4.0)
    season = 1.0 + 0.1 * math.cos(2 * math.pi * (t.timetuple().tm_yday - 15) / 365)
    return min(1.0, shape * season / 1.1)


def write(path, channel, unit, values, start):
    with open(path, "w") as f:
        f.write(f"# channel={channel} unit={unit}\n")
        for i, v in enumerate(values):
            ts = (start + timedelta(hours=i)).strftime("%Y-%m-%dT%H:%M:%S")
            f.write(f"{ts}, {v:.6f}\n")


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/profiles")
    out.mkdir(parents=True, exist_ok=True)
    start = datetime(2021, 1, 1)
    hours = 365 * 24 + 1
    for name, fn in (("supermarket", supermarket), ("hotel", hotel)):
        p = [PEAK_MW[name] * fn(start + timedelta(hours=i)) for i in range(hours)]
        write(out / f"{name}_p.csv", "load_p", "MW", p, start)
        write(out / f"{name}_q.csv", "load_q", "MVAr", [Q_PER_P * x for x in p], start)


if __name__ == "__main__":
    main()
