"""Command-line entry point.

One declarative JSON config drives everything; subcommands run a single
stage or the whole pipeline. Individual keys can be overridden on the
command line with dotted paths, e.g.::

    instrefine run --config run.json --set expansion.rounds=3 \\
        --set variety.keep_fraction=0.25

Exit status is 0 on success; on failure a machine-readable error object
is printed to stderr and the status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline

_COMMANDS = {
    "expand": pipeline.stage_expand,
    "embed": pipeline.stage_embed,
    "variety": pipeline.stage_variety,
    "score": pipeline.stage_score,
    "quality": pipeline.stage_quality,
    "report": pipeline.stage_report,
    "run": pipeline.run_all,
}


def _parse_override(text: str) -> tuple[list[str], object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ValueError(f"override {text!r} must look like dotted.key=value")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value  # bare strings need no quoting
    return key.split("."), parsed


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    for text in overrides:
        path, value = _parse_override(text)
        node = raw
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"cannot override through non-object key {part!r}")
        node[path[-1]] = value
    return raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="instrefine",
        description="Expand and curate an instruction-tuning dataset.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log at DEBUG level"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "expand": "rewrite rounds + merge into expanded.jsonl",
        "embed": "embed every expanded record",
        "variety": "variety curation by reduced-space row variance",
        "score": "rubric + length scoring",
        "quality": "keep the top-scored records",
        "report": "composition, histogram, and cost reports",
        "run": "all stages in sequence",
    }
    for name, description in descriptions.items():
        sub = subparsers.add_parser(name, help=description)
        sub.add_argument("--config", required=True, help="JSON pipeline config file")
        sub.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (dotted path, JSON value)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with open(args.config, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        raw = _apply_overrides(raw, args.overrides)
        config = pipeline.PipelineConfig.from_dict(raw)
        manifest = _COMMANDS[args.command](config)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not crashes
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(error, ensure_ascii=False), file=sys.stderr)
        return 1
    print(json.dumps(manifest, ensure_ascii=False, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
