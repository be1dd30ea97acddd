"""Entry point: figplots <spec.json> [more specs...]."""

from __future__ import annotations

import sys

from .csvdata import FigplotsError
from .render import render
from .spec import load_spec


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if not args or args[0] in ("-h", "--help"):
        print("usage: figplots <spec.json> [spec2.json ...]", file=sys.stderr)
        return 0 if args else 1
    for path in args:
        try:
            out = render(load_spec(path))
        except (FigplotsError, OSError) as exc:
            print(f"figplots: {exc}", file=sys.stderr)
            return 1
        print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
