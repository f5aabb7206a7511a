"""HTTP/JSON facade over the wiki: browse, edit, discuss, query."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Header, Request, Response
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse, PlainTextResponse

from .fragments import (
    DanglingInclude,
    FragmentId,
    FragmentParseError,
    GranularityViolation,
    InvalidName,
    ReassemblyParseError,
    UnknownFragment,
)
from .forum import (
    AlreadyDecided,
    MissingDecidedIdea,
    MissingPolarity,
    Polarity,
    PostType,
    TypeNotAllowed,
    UnknownPost,
    corpus_stats,
)
from .graph import ParseError as QueryParseError
from .notation import AmbiguousTable
from .om import SchemaError
from .store import Conflict, EmptyCommit, LockHeld, NoSuchRevision, NotFound
from .wiki import ROLES_ORDER, CdWiki
from .xmlscan import XmlError

__all__ = ["create_app", "ApiError"]


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str,
                 position: tuple[int, int] | None = None):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail
        self.position = position

    def response(self) -> JSONResponse:
        body: dict[str, object] = {"code": self.code, "detail": self.detail}
        if self.position is not None:
            body["position"] = {"line": self.position[0], "column": self.position[1]}
        return JSONResponse(body, status_code=self.status)


def _map_error(exc: Exception) -> ApiError:
    if isinstance(exc, (UnknownFragment, NotFound, UnknownPost, NoSuchRevision, InvalidName)):
        return ApiError(404, type(exc).__name__, str(exc))
    if isinstance(exc, Conflict):
        return ApiError(409, "Conflict", str(exc))
    if isinstance(exc, LockHeld):
        return ApiError(423, "LockHeld", str(exc))
    if isinstance(exc, FragmentParseError):
        return ApiError(422, "FragmentParseError", str(exc), (exc.line, exc.column))
    if isinstance(exc, XmlError):
        return ApiError(422, "XmlError", str(exc), (exc.line, exc.column))
    if isinstance(exc, (GranularityViolation, SchemaError, ReassemblyParseError,
                        DanglingInclude, AmbiguousTable)):
        return ApiError(422, type(exc).__name__, str(exc))
    if isinstance(exc, QueryParseError):
        return ApiError(400, type(exc).__name__, str(exc), (exc.line, exc.column))
    if isinstance(exc, (TypeNotAllowed, MissingPolarity, MissingDecidedIdea,
                        AlreadyDecided, EmptyCommit, ValueError)):
        return ApiError(422, type(exc).__name__, str(exc))
    raise exc


def create_app(wiki: CdWiki, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="cdforge", docs_url=None, redoc_url=None)
    locks: dict[str, object] = {}

    def identify(token: str | None, needed: str) -> str:
        entry = wiki.config.identify(token)
        if entry is None:
            raise ApiError(401, "BadToken", "unknown or missing auth token")
        user, role = entry
        if ROLES_ORDER[role] < ROLES_ORDER[needed]:
            raise ApiError(403, "Forbidden", f"{needed} role required")
        return user

    @app.exception_handler(Exception)
    async def on_error(_request: Request, exc: Exception):  # pragma: no cover
        try:
            return _map_error(exc).response()
        except Exception:
            return JSONResponse({"code": "InternalError", "detail": str(exc)}, status_code=500)

    @app.exception_handler(ApiError)
    async def on_api_error(_request: Request, exc: ApiError):
        return exc.response()

    def fragment_id(raw: str) -> FragmentId:
        try:
            return FragmentId.parse(raw)
        except InvalidName as exc:
            raise ApiError(404, "InvalidName", str(exc)) from exc

    # -- pages ------------------------------------------------------------

    @app.get("/page/{fid}/history")
    def page_history(fid: str):
        pid = fragment_id(fid)
        try:
            revisions = wiki.repo.history(f"cd/{pid.cd}.ocd")
        except NotFound as exc:
            raise _map_error(exc)
        return [
            {
                "revision": r.number,
                "author": r.author,
                "timestamp": r.timestamp.isoformat(),
                "message": r.message,
                "header": r.header_line(),
                "changed_paths": list(r.changed_paths),
            }
            for r in revisions
        ]

    @app.post("/page/{fid}/lock")
    def page_lock(fid: str, x_auth_token: str | None = Header(None)):
        user = identify(x_auth_token, "cd-editor")
        pid = fragment_id(fid)
        try:
            token = wiki.repo.lock(f"cd/{pid.cd}.ocd", user)
        except (NotFound, LockHeld) as exc:
            raise _map_error(exc)
        locks[token.token] = token
        return {"token": token.token, "path": token.path, "user": token.user}

    @app.delete("/page/{fid}/lock")
    def page_unlock(fid: str, token: str, x_auth_token: str | None = Header(None)):
        identify(x_auth_token, "cd-editor")
        fragment_id(fid)
        held = locks.pop(token, None)
        if held is not None:
            wiki.repo.unlock(held)  # type: ignore[arg-type]
        return {"unlocked": held is not None}

    @app.get("/page/{fid}/discussion")
    def page_discussion(fid: str):
        pid = fragment_id(fid)
        wiki.snapshot.node(pid)
        return [
            {
                "id": p.id,
                "parent": p.parent,
                "author": p.author,
                "timestamp": p.timestamp.isoformat(),
                "type": p.ptype.value,
                "polarity": p.polarity.value if p.polarity else None,
                "decided_idea": p.decided_idea,
                "body": p.body,
            }
            for p in wiki.forums.forum_posts(pid)
        ]

    @app.get("/page/{fid}/discussion/reply-types")
    def page_reply_types(fid: str, parent: str | None = None):
        pid = fragment_id(fid)
        try:
            return {"parent": parent, "types": wiki.reply_types(pid, parent)}
        except (UnknownFragment, UnknownPost) as exc:
            raise _map_error(exc)

    @app.post("/page/{fid}/discussion")
    async def page_post(fid: str, request: Request,
                        x_auth_token: str | None = Header(None)):
        user = identify(x_auth_token, "visitor")
        pid = fragment_id(fid)
        body = await request.json()
        try:
            ptype = PostType(body.get("type", "Untyped"))
            polarity = Polarity(body["polarity"]) if body.get("polarity") else None
        except ValueError as exc:
            raise ApiError(422, "BadPostType", str(exc)) from exc
        try:
            post = wiki.add_post(
                pid,
                body.get("parent"),
                ptype,
                body.get("body", ""),
                body.get("author") or user,
                polarity,
                body.get("decided_idea"),
            )
        except Exception as exc:
            raise _map_error(exc)
        return JSONResponse({"id": post.id, "type": post.ptype.value}, status_code=201)

    @app.get("/page/{fid}")
    def page_get(fid: str, format: str = "html"):
        pid = fragment_id(fid)
        try:
            if format == "html":
                return HTMLResponse(wiki.page_html(pid))
            if format == "source":
                return PlainTextResponse(
                    wiki.page_source(pid), media_type="application/xml"
                )
            if format == "om":
                return PlainTextResponse(wiki.page_om(pid), media_type="application/xml")
        except UnknownFragment as exc:
            raise _map_error(exc)
        raise ApiError(400, "BadFormat", f"unknown format {format!r}")

    @app.put("/page/{fid}")
    async def page_put(
        fid: str,
        request: Request,
        x_auth_token: str | None = Header(None),
        x_author: str | None = Header(None),
        x_summary: str = Header("edited"),
        x_base_revision: int | None = Header(None),
    ):
        user = identify(x_auth_token, "cd-editor")
        if not wiki.config.tokens and x_author:
            user = x_author
        pid = fragment_id(fid)
        source = await request.body()
        try:
            rev = wiki.edit_fragment(pid, source, user, x_summary, x_base_revision)
        except Exception as exc:
            raise _map_error(exc)
        if rev is None:
            return {"revision": wiki.repo.head_revision, "changed": False}
        return {"revision": rev.number, "changed": True, "message": rev.message}

    # -- collections ---------------------------------------------------------

    @app.get("/cds")
    def list_cds():
        snap = wiki.snapshot
        return [
            {
                "name": name,
                "page": f"cd:{name}",
                "symbols": [s.name for s in snap.cds[name].symbols],
            }
            for name in sorted(snap.cds)
        ]

    @app.post("/cds")
    async def create_cd(request: Request, x_auth_token: str | None = Header(None)):
        user = identify(x_auth_token, "administrator")
        body = await request.json()
        name = body.get("name", "")
        try:
            rev = wiki.create_cd(name, body.get("description", ""), user)
        except Exception as exc:
            raise _map_error(exc)
        return JSONResponse({"revision": rev.number, "page": f"cd:{name}"}, status_code=201)

    @app.post("/notation/{cd_name}")
    async def put_notation(cd_name: str, request: Request,
                           x_auth_token: str | None = Header(None),
                           x_summary: str = Header("edited notation"),
                           x_base_revision: int | None = Header(None)):
        user = identify(x_auth_token, "cd-editor")
        content = await request.body()
        try:
            rev, evicted = wiki.update_notation(
                cd_name, content, user, x_summary, x_base_revision
            )
        except Exception as exc:
            raise _map_error(exc)
        return {"revision": rev.number, "evicted": sorted(str(f) for f in evicted)}

    @app.post("/query")
    async def run_query(request: Request):
        text = (await request.body()).decode("utf-8")
        try:
            rows = wiki.run_query(text)
        except QueryParseError as exc:
            raise _map_error(exc)
        return {"rows": rows}

    @app.get("/dashboard/open-issues")
    def dashboard(symbols_only: bool = False):
        pages = wiki.open_issue_pages(symbols_only)
        return [{"page": str(p), "href": f"/page/{p}"} for p in pages]

    @app.get("/stats")
    def stats():
        report = corpus_stats(wiki.forums)
        return {
            "by_type": report.by_type,
            "cd_level": report.cd_level,
            "symbol_level": report.symbol_level,
            "item_level": report.item_level,
            "unclassified": report.unclassified,
            "total": report.total,
        }

    @app.get("/metrics")
    def metrics():
        return wiki.metrics()

    # -- static client ----------------------------------------------------------

    if static_dir is not None:
        static_dir = Path(static_dir)

        @app.get("/")
        def index() -> Response:
            index_file = static_dir / "index.html"
            if index_file.exists():
                return FileResponse(index_file)
            return HTMLResponse("<html><body>cdforge</body></html>")

        @app.get("/app.js")
        def app_js() -> Response:
            bundle = static_dir / "app.js"
            if bundle.exists():
                return FileResponse(bundle, media_type="text/javascript")
            return PlainTextResponse("// no client built", media_type="text/javascript")

        @app.get("/app.css")
        def app_css() -> Response:
            sheet = static_dir / "app.css"
            if sheet.exists():
                return FileResponse(sheet, media_type="text/css")
            return PlainTextResponse("", media_type="text/css")

    return app
