"""Adapter executable: ``pydisc --algorithm {directlingam,rcd} --input CSV --output JSON``.

Conforms to the adapter protocol of the ``lovo`` CLI: exit 0 with a graph
JSON whose node set equals the CSV columns, exit 2 on usage errors, and a
non-zero exit with a stderr diagnostic (and no partial output file) on
algorithm failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from .lingam import direct_lingam
from .rcd import rcd

_ALGORITHMS = {"directlingam": direct_lingam, "rcd": rcd}


def _read_csv(path: str) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV")
        rows = [[float(v) for v in row] for row in reader if row]
    if not header or len(set(header)) != len(header):
        raise ValueError("missing or duplicate column names")
    if any(len(r) != len(header) for r in rows):
        raise ValueError("ragged CSV rows")
    if not rows:
        raise ValueError("CSV has no data rows")
    data = np.asarray(rows, dtype=float)
    if not np.isfinite(data).all():
        raise ValueError("non-finite values in CSV")
    return data, header


def _write_atomic(path: str, payload: dict) -> None:
    """Write via a temp file so a failure never leaves a partial output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pydisc", description=__doc__)
    parser.add_argument("--algorithm", "-a", choices=sorted(_ALGORITHMS), required=True)
    parser.add_argument("--input", required=True, help="numeric CSV with header")
    parser.add_argument("--output", required=True, help="graph JSON destination")
    parser.add_argument("--alpha", type=float, default=0.01,
                        help="significance level for edge tests (default 0.01)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code else 0
    if not (0.0 < args.alpha < 1.0):
        print("pydisc: --alpha must be in (0, 1)", file=sys.stderr)
        return 2
    try:
        data, columns = _read_csv(args.input)
    except (OSError, ValueError) as err:
        print(f"pydisc: cannot read input: {err}", file=sys.stderr)
        return 2
    if len(columns) < 2:
        print("pydisc: need at least 2 columns", file=sys.stderr)
        return 2
    try:
        graph = _ALGORITHMS[args.algorithm](data, columns, alpha=args.alpha)
    except Exception as err:  # algorithm failure: diagnostic, no partial file
        print(f"pydisc: {args.algorithm} failed: {err}", file=sys.stderr)
        return 1
    graph["metadata"] = {
        "algorithm": args.algorithm,
        "alpha": args.alpha,
        "n": int(data.shape[0]),
    }
    try:
        _write_atomic(args.output, graph)
    except OSError as err:
        print(f"pydisc: cannot write output: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
