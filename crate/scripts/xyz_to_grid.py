#!/usr/bin/env python3
"""Convert an XYZ elevation dump (lon, lat, elevation per line) into the
grid CSV read by `spherefield simulate-earth`.

Points are averaged into cells of --step degrees. Cells are centred in
latitude and start at longitude -180. A cell is land when its mean
elevation is at least --sea-level, unless --mask supplies a second XYZ
file whose third column is 1 for land and 0 for sea.

    python3 scripts/xyz_to_grid.py etopo.xyz --step 1 -o earth_1deg.csv
"""

import argparse
import csv
import math
import re
import sys


def read_xyz(path):
    split = re.compile(r"[,\s]+")
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = split.split(line)
            try:
                lon, lat, value = (float(p) for p in parts[:3])
            except ValueError:
                if lineno == 1:
                    continue  # header
                sys.exit(f"{path}:{lineno}: expected three numbers")
            yield lon, lat, value


def cell_of(lon, lat, step, n_lon, n_lat):
    lon = (lon + 180.0) % 360.0 - 180.0
    j = min(int(math.floor((lon + 180.0) / step + 0.5)) % n_lon, n_lon - 1)
    i = min(int((lat + 90.0) / step), n_lat - 1)
    return i, j


def average(path, step, n_lon, n_lat):
    total = [[0.0] * n_lon for _ in range(n_lat)]
    count = [[0] * n_lon for _ in range(n_lat)]
    for lon, lat, value in read_xyz(path):
        i, j = cell_of(lon, lat, step, n_lon, n_lat)
        total[i][j] += value
        count[i][j] += 1
    return total, count


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("xyz", help="input with lon_deg, lat_deg, elevation_m columns")
    ap.add_argument("--step", type=float, default=1.0, help="cell size in degrees (must divide 180)")
    ap.add_argument("--sea-level", type=float, default=0.0)
    ap.add_argument("--mask", help="optional XYZ land mask (1 land, 0 sea)")
    ap.add_argument("-o", "--output", default="-")
    args = ap.parse_args()

    if args.step <= 0 or abs(180.0 / args.step - round(180.0 / args.step)) > 1e-9:
        sys.exit("--step must divide 180")
    n_lat = round(180.0 / args.step)
    n_lon = 2 * n_lat
    total, count = average(args.xyz, args.step, n_lon, n_lat)
    if args.mask:
        mask_total, mask_count = average(args.mask, args.step, n_lon, n_lat)

    out = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["lon_deg", "lat_deg", "elev_m", "land"])
    empty = 0
    for i in range(n_lat):
        lat = -90.0 + (i + 0.5) * args.step
        for j in range(n_lon):
            lon = -180.0 + j * args.step
            if count[i][j] == 0:
                empty += 1
                continue
            elev = total[i][j] / count[i][j]
            if args.mask:
                land = mask_count[i][j] > 0 and mask_total[i][j] / mask_count[i][j] >= 0.5
            else:
                land = elev >= args.sea_level
            w.writerow([f"{lon:g}", f"{lat:g}", repr(elev), int(land)])
    if out is not sys.stdout:
        out.close()
    if empty:
        sys.exit(f"{empty} cells received no data; use a coarser --step")


if __name__ == "__main__":
    main()
