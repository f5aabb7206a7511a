"""cdforge command line: serve, import, export, render, check."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .store import Repository
from .wiki import CdWiki, WikiConfig


def _open_wiki(args: argparse.Namespace) -> CdWiki:
    config = WikiConfig.load(args.config) if getattr(args, "config", None) else WikiConfig()
    repo = Repository(args.repo, lock_ttl=config.lock_ttl)
    return CdWiki(repo, config=config)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="cdforge")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the wiki service")
    serve.add_argument("--repo", required=True, help="repository directory")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--config", default=None, help="JSON config file")
    serve.add_argument("--static", default=None, help="directory with the web client build")

    imp = sub.add_parser("import", help="bulk-load .ocd/.sts/.ntn files")
    imp.add_argument("directory")
    imp.add_argument("--repo", required=True)
    imp.add_argument("--author", default="importer")

    exp = sub.add_parser("export", help="write the head tree as plain files")
    exp.add_argument("directory")
    exp.add_argument("--repo", required=True)

    render = sub.add_parser("render", help="static render of wiki pages")
    render.add_argument("--repo", required=True)
    render.add_argument("--all", action="store_true", help="render every fragment page")
    render.add_argument("--out", default="site")

    check = sub.add_parser("check", help="validate every CD in the repository")
    check.add_argument("--repo", required=True)

    args = parser.parse_args(argv)

    if args.command == "import":
        wiki = _open_wiki(args)
        rev = wiki.import_dir(args.directory, args.author)
        print(f"imported {len(rev.changed_paths)} files as r{rev.number}")
        return 0

    if args.command == "export":
        wiki = _open_wiki(args)
        written = wiki.export_dir(args.directory)
        print(f"exported {len(written)} files to {args.directory}")
        return 0

    if args.command == "render":
        wiki = _open_wiki(args)
        if not args.all:
            print("nothing to do (pass --all)", file=sys.stderr)
            return 2
        written = wiki.render_all(args.out)
        print(f"rendered {len(written)} pages into {args.out}")
        return 0

    if args.command == "check":
        wiki = _open_wiki(args)
        diagnostics = wiki.check()
        for d in diagnostics:
            print(f"{d.severity}: {d.subject}: {d.message} [{d.code}]")
        errors = sum(1 for d in diagnostics if d.severity == "error")
        print(f"{len(diagnostics)} diagnostics, {errors} errors")
        return 1 if errors else 0

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        wiki = _open_wiki(args)
        static = args.static
        if static is None:
            default_static = Path(__file__).resolve().parents[2] / "frontend" / "dist"
            static = str(default_static) if default_static.exists() else None
        app = create_app(wiki, static)
        port = args.port if args.port is not None else wiki.config.port
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
