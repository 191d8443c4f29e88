#!/usr/bin/env python3
"""Print a landscape.csv as an ASCII bar chart of mean profit per second."""

import csv
import sys

rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else "landscape.csv")))
vals = [float(r["pps_mean"]) for r in rows]
top = max(vals) or 1.0
for r, v in zip(rows, vals):
    print(f"{float(r['s']):+.2f} {v:9.3f} " + "#" * int(50 * v / top))
