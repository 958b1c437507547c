#!/usr/bin/env python3
"""Systolic design-space sweep driver.

Builds a sweep description for `eqsim sweep` covering array geometries,
convolution shapes, and the three dataflows, then runs it and prints (or
saves) the CSV table: cycles, loop iterations, and peak read bandwidth per
configuration.

The full space is 4,050 combinations (3 dataflows x 25 array geometries x 54
convolution shapes) and takes a while; the default desk scale is a 96-point
subset with the same axes, which is enough to see the iteration-count
proportionality and the per-dataflow bandwidth ordering.
"""

import argparse
import itertools
import json
import pathlib
import subprocess
import sys
import tempfile

SCALES = {
    "desk": {
        "dataflows": ["ws", "is", "os"],
        "a_h": [2, 4],
        "a_w": [2, 4],
        "h": [8, 12],
        "f": [3],
        "c": [1, 2],
        "n": [4, 8],
    },
    "full": {
        "dataflows": ["ws", "is", "os"],
        "a_h": [1, 2, 4, 8, 16],
        "a_w": [1, 2, 4, 8, 16],
        "h": [8, 12, 16],
        "f": [2, 3],
        "c": [1, 2, 4],
        "n": [4, 8, 16],
    },
}


def specs(scale):
    s = SCALES[scale]
    for df, a_h, a_w, h, f, c, n in itertools.product(
        s["dataflows"], s["a_h"], s["a_w"], s["h"], s["f"], s["c"], s["n"]
    ):
        yield (
            f"systolic:df={df},ah={a_h},aw={a_w},"
            f"h={h},w={h},fh={f},fw={f},c={c},n={n}"
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eqsim", default="build/eqsim", help="path to the eqsim binary")
    parser.add_argument("--scale", choices=sorted(SCALES), default="desk")
    parser.add_argument("-o", "--output", help="CSV output file (default: stdout)")
    args = parser.parse_args()

    configs = list(specs(args.scale))
    print(f"sweeping {len(configs)} configurations ({args.scale} scale)", file=sys.stderr)

    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as f:
        json.dump({"configs": configs}, f)
        sweep_file = f.name
    try:
        cmd = [args.eqsim, "sweep", sweep_file]
        if args.output:
            cmd += ["-o", args.output]
        return subprocess.call(cmd)
    finally:
        pathlib.Path(sweep_file).unlink(missing_ok=True)


if __name__ == "__main__":
    sys.exit(main())
