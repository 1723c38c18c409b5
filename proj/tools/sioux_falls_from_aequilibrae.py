#!/usr/bin/env python3
"""Rebuild data/SiouxFalls/*.tntp from the Sioux Falls reference project that
ships inside the aequilibrae wheel (aequilibrae/reference_files/sioux_falls.zip).

    pip download --no-deps aequilibrae==1.6.2 -d /tmp/pk
    python3 tools/sioux_falls_from_aequilibrae.py /tmp/pk/aequilibrae-*.whl data/SiouxFalls

Links come from the project database (capacity_ab, free_flow_time, b, power;
length is set to the free-flow time), demand from matrices/demand.omx.
Needs h5py and numpy.
"""
import io
import os
import sqlite3
import sys
import tempfile
import zipfile

import h5py
import numpy as np


def extract_project(wheel, dest):
    with zipfile.ZipFile(wheel) as whl:
        name = next(n for n in whl.namelist() if n.endswith("reference_files/sioux_falls.zip"))
        with zipfile.ZipFile(io.BytesIO(whl.read(name))) as sf:
            sf.extractall(dest)


def fmt(v):
    return f"{v:.10g}"


def write_network(project, out):
    con = sqlite3.connect(os.path.join(project, "project_database.sqlite"))
    rows = con.execute(
        "select a_node, b_node, capacity_ab, free_flow_time, b, power from links order by link_id"
    ).fetchall()
    nodes = max(max(a, b) for a, b, *_ in rows)
    with open(out, "w") as f:
        f.write(f"<NUMBER OF ZONES> {nodes}\n<NUMBER OF NODES> {nodes}\n<FIRST THRU NODE> 1\n")
        f.write(f"<NUMBER OF LINKS> {len(rows)}\n")
        f.write("<ORIGINAL HEADER>~ \tInit node \tTerm node \tCapacity \tLength \tFree Flow Time \tB\tPower\t"
                "Speed limit \tToll \tType\t;\n<END OF METADATA>\n\n\n")
        f.write("~ \tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n")
        for a, b, cap, fft, alpha, power in rows:
            f.write(f"\t{a}\t{b}\t{fmt(cap)}\t{fmt(fft)}\t{fmt(fft)}\t{fmt(alpha)}\t{fmt(power)}\t0\t0\t1\t;\n")


def write_trips(project, out):
    with h5py.File(os.path.join(project, "matrices", "demand.omx"), "r") as omx:
        key = sorted(omx["data"].keys())[0]
        demand = np.asarray(omx["data"][key])
    zones = demand.shape[0]
    with open(out, "w") as f:
        f.write(f"<NUMBER OF ZONES> {zones}\n<TOTAL OD FLOW> {demand.sum():.1f}\n<END OF METADATA>\n\n\n")
        for o in range(zones):
            f.write(f"Origin  \t{o + 1}\n")
            for start in range(0, zones, 5):
                cells = [f"{d + 1:5d} : {demand[o, d]:8.1f};" for d in range(start, min(start + 5, zones))]
                f.write("  ".join(cells) + "\n")
            f.write("\n")


def main(argv):
    if len(argv) != 3:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    os.makedirs(argv[2], exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        extract_project(argv[1], tmp)
        write_network(tmp, os.path.join(argv[2], "SiouxFalls_net.tntp"))
        write_trips(tmp, os.path.join(argv[2], "SiouxFalls_trips.tntp"))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
