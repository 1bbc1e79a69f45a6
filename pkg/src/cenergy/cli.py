"""Command-line entry point: generate scenes, serve the API, record fixtures."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from cenergy import scene
from cenergy.pipeline import ModelStats, PipelineConfig, PipelineError, generate
from cenergy.providers import ProviderError

API_KEY_ENV = "CENERGY_OPENTOPO_KEY"

# Pinned browser renderer for self-contained HTML export.
PLOTLY_CDN = "https://cdn.plot.ly/plotly-2.29.1.min.js"

HTML_TEMPLATE = """<!doctype html>
<html>
<head>
  <meta charset="utf-8">
  <title>{title}</title>
  <script src="{cdn}"></script>
  <style>body{{margin:0}} #plot{{width:100vw;height:100vh;}}</style>
</head>
<body>
  <div id="plot"></div>
  <script>
    var fig = {figure_json};
    Plotly.newPlot("plot", fig.data, fig.layout || {{}});
  </script>
</body>
</html>
"""


def render_html(figure_bytes: bytes, title: str = "3D urban energy model") -> str:
    """Self-contained HTML page embedding the figure JSON."""
    return HTML_TEMPLATE.format(
        title=title, cdn=PLOTLY_CDN, figure_json=figure_bytes.decode("utf-8")
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cenergy",
        description="Generate interactive 3D urban-energy scenes from open data.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--place", required=False, help="target place name "
                       "(hyphen or comma separated, e.g. 'Rousay-Orkney Islands-Scotland')")
        p.add_argument("--api-key", default=None,
                       help=f"OpenTopography API key (or set {API_KEY_ENV})")
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config file mirroring the pipeline configuration")
        p.add_argument("--fixtures", type=Path, default=None,
                       help="fixture directory for offline replay or recording")
        group = p.add_mutually_exclusive_group()
        group.add_argument("--offline", action="store_true",
                           help="replay from fixtures, never touch the network")
        group.add_argument("--record", action="store_true",
                           help="run live and record all HTTP exchanges to --fixtures")
        p.add_argument("--verbose", action="store_true")

    gen = sub.add_parser("generate", help="generate a figure JSON for a place")
    add_common(gen)
    gen.add_argument("--out", default=None, help="output path for figure JSON, or - for stdout")
    gen.add_argument("--html", type=Path, default=None,
                     help="also write a self-contained HTML viewer page")

    srv = sub.add_parser("serve", help="run the HTTP service")
    add_common(srv)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)

    rec = sub.add_parser("record-fixtures", help="generate in record mode to populate fixtures")
    add_common(rec)
    rec.add_argument("--out", default=None, help="optional figure JSON output path")

    return parser


def _load_config(args) -> PipelineConfig:
    values = {}
    if args.config is not None:
        values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(values) - set(PipelineConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if args.offline:
        values["offline"] = True
    if getattr(args, "record", False) or args.subcommand == "record-fixtures":
        values["record"] = True
        values.pop("offline", None)
    if args.fixtures is not None:
        values["fixture_dir"] = str(args.fixtures)
    return PipelineConfig(**values)


def _resolve_key(args) -> str:
    if args.api_key is not None:
        return args.api_key
    return os.environ.get(API_KEY_ENV, "")


def _run_generate(args) -> int:
    if not args.place:
        print("error: --place is required", file=sys.stderr)
        return 2
    try:
        config = _load_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: bad configuration: {e}", file=sys.stderr)
        return 2
    try:
        fig, stats = generate(args.place, _resolve_key(args), config)
        payload = scene.serialize(fig)
    except PipelineError as e:
        print(f"error in stage {e.stage}: {e.message}", file=sys.stderr)
        return 1
    except ProviderError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    out = getattr(args, "out", None)
    if out == "-":
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
    elif out:
        Path(out).write_bytes(payload)
    if getattr(args, "html", None):
        args.html.write_text(render_html(payload), encoding="utf-8")
    print(stats.log_line(), file=sys.stderr)
    return 0


def _run_serve(args) -> int:
    import uvicorn

    from cenergy.service import create_app

    try:
        config = _load_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: bad configuration: {e}", file=sys.stderr)
        return 2
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def run(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 2

    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    if args.subcommand in ("generate", "record-fixtures"):
        if args.subcommand == "record-fixtures" and not args.fixtures:
            print("error: record-fixtures requires --fixtures", file=sys.stderr)
            return 2
        return _run_generate(args)
    if args.subcommand == "serve":
        return _run_serve(args)
    return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
