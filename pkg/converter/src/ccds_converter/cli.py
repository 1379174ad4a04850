"""Command-line entry: convert TFRecord CSI archives into a CCDS container.

Exit codes: 0 success, 2 bad arguments, 3 conversion failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .convert import ArchiveSpec, convert
from .errors import ConvertError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccds-convert", description=__doc__)
    parser.add_argument("--in", dest="sources", nargs="+", required=True, help="source archives")
    parser.add_argument("--out", required=True, help="output CCDS path")
    parser.add_argument("--antennas", default=None, help="comma-separated antenna subset indices")
    parser.add_argument("--csi-field", default="csi")
    parser.add_argument("--position-field", default="pos-tachy")
    parser.add_argument("--time-field", default="time")
    parser.add_argument("--no-verify-crc", action="store_true", help="skip checksum validation")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    antennas = None
    if args.antennas:
        try:
            antennas = tuple(int(v) for v in args.antennas.split(",") if v != "")
        except ValueError:
            print(f"error: bad antenna list {args.antennas!r}", file=sys.stderr)
            return 2
    try:
        spec = ArchiveSpec(
            sources=tuple(args.sources),
            out_path=args.out,
            csi_field=args.csi_field,
            position_field=args.position_field,
            time_field=args.time_field,
            antenna_indices=antennas,
            verify_crc=not args.no_verify_crc,
        )
    except ConvertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = convert(spec)
    except (ConvertError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(
        json.dumps(
            {
                "out_path": summary.out_path,
                "n": summary.n,
                "b": summary.b,
                "w": summary.w,
                "d": summary.d,
                "duplicate_timestamps": summary.duplicate_timestamps,
            },
            indent=2,
        )
    )
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
