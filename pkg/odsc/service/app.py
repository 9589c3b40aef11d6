"""
HTTP service exposing the store and the check engine.

Only four OpenFGA routes exist: create store, write authorization model, write
tuples and check. Every other path answers 404 with the usual error body.
"""

from __future__ import annotations

import secrets
import threading
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Optional

import anyio
import anyio.to_thread
from fastapi import Depends, FastAPI, Header, Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool
from starlette.datastructures import Headers
from starlette.exceptions import HTTPException as StarletteHTTPException
from starlette.types import ASGIApp, Message, Receive, Scope, Send

from ..check.engine import CheckRequest, check
from ..errors import (
    AbsentDelete,
    DuplicateAdd,
    InvalidModel,
    ModelNotFound,
    OdsError,
    StoreBusy,
    StoreNotFound,
    UnknownTypeOrRelation,
)
from ..preferences import ServiceConfig
from ..rebac.interchange import import_model
from ..rebac.model import ObjectRef, UserRef
from ..store.tuple_store import META_FILE, TupleStore, create_store, open_store
from ..utils.logging import get_logger
from .schemas import (
    CheckRequestBody,
    CheckResponse,
    CreateStoreRequest,
    CreateStoreResponse,
    ErrorBody,
    WriteAuthorizationModelResponse,
    WriteRequest,
)

logger = get_logger(__name__)

# First match wins, so subclasses come before their bases
ERROR_STATUS: tuple[tuple[type[OdsError], int, str], ...] = (
    (StoreNotFound, status.HTTP_404_NOT_FOUND, "store_id_not_found"),
    (ModelNotFound, status.HTTP_404_NOT_FOUND, "latest_authorization_model_not_found"),
    (UnknownTypeOrRelation, status.HTTP_404_NOT_FOUND, "relation_not_found"),
    (DuplicateAdd, status.HTTP_409_CONFLICT, "write_failed_due_to_invalid_input"),
    (AbsentDelete, status.HTTP_409_CONFLICT, "write_failed_due_to_invalid_input"),
    (StoreBusy, status.HTTP_409_CONFLICT, "store_busy"),
    (InvalidModel, status.HTTP_422_UNPROCESSABLE_ENTITY, "invalid_authorization_model"),
    (OdsError, status.HTTP_400_BAD_REQUEST, "validation_error"),
)


def error_status(error: OdsError) -> tuple[int, str]:
    for error_type, status_code, code in ERROR_STATUS:
        if isinstance(error, error_type):
            return status_code, code
    return status.HTTP_400_BAD_REQUEST, "validation_error"


def _error_response(status_code: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status_code, content=ErrorBody(code=code, message=message).model_dump())


class BodyLimitMiddleware:
    """
    Answer 413 for any request body over the limit.

    A declared Content-Length is refused up front. Chunked bodies are counted
    while they arrive and replayed to the application once complete.
    """

    def __init__(self, app: ASGIApp, limit: int):
        self.app = app
        self.limit = limit

    async def __call__(self, scope: Scope, receive: Receive, send: Send) -> None:
        if scope["type"] != "http":
            await self.app(scope, receive, send)
            return
        length = Headers(scope=scope).get("content-length")
        if length is not None and length.isdigit() and int(length) > self.limit:
            await self._refuse(scope, receive, send)
            return

        messages: list[Message] = []
        received = 0
        while True:
            message = await receive()
            messages.append(message)
            if message["type"] != "http.request":
                break
            received += len(message.get("body", b""))
            if received > self.limit:
                await self._refuse(scope, receive, send)
                return
            if not message.get("more_body", False):
                break

        async def replay() -> Message:
            if messages:
                return messages.pop(0)
            return await receive()

        await self.app(scope, replay, send)

    async def _refuse(self, scope: Scope, receive: Receive, send: Send) -> None:
        logger.info(f"Refused {scope.get('path', '')}: body over {self.limit} bytes")
        response = _error_response(
            status.HTTP_413_REQUEST_ENTITY_TOO_LARGE, "request_too_large", f"Body exceeds {self.limit} bytes"
        )
        await response(scope, receive, send)


class StoreRegistry:
    """The stores under one data directory, each held open for writing."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.stores: dict[str, TupleStore] = {}
        self._lock = threading.Lock()

    def load(self) -> None:
        self.data_dir.mkdir(parents=True, exist_ok=True)
        for path in sorted(self.data_dir.iterdir()):
            if (path / META_FILE).is_file():
                store = open_store(path)
                self.stores[store.store_id] = store
        logger.info(f"Serving {len(self.stores)} store(s) from {self.data_dir}")

    def create(self, name: str) -> TupleStore:
        store = create_store(self.data_dir, name)
        with self._lock:
            self.stores[store.store_id] = store
        return store

    def get(self, store_id: str) -> TupleStore:
        store = self.stores.get(store_id)
        if store is None:
            raise StoreNotFound(f"Store {store_id} not found")
        return store

    def close(self) -> None:
        with self._lock:
            for store in self.stores.values():
                store.close()
            self.stores.clear()


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    registry = StoreRegistry(config.data_dir)
    registry.load()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        # checks run on their own worker threads, at most max_concurrent_checks at once
        app.state.check_limiter = anyio.CapacityLimiter(config.max_concurrent_checks)
        yield
        registry.close()

    app = FastAPI(title="odsc", lifespan=lifespan)
    app.state.config = config
    app.state.registry = registry

    @app.exception_handler(OdsError)
    async def ods_error_handler(_request: Request, error: OdsError) -> JSONResponse:
        status_code, code = error_status(error)
        logger.info(f"{type(error).__name__}: {error.message}")
        return _error_response(status_code, code, error.message)

    @app.exception_handler(RequestValidationError)
    async def request_validation_handler(_request: Request, error: RequestValidationError) -> JSONResponse:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in e.get('loc', ()))}: {e.get('msg', '')}" for e in error.errors()
        )
        return _error_response(status.HTTP_400_BAD_REQUEST, "validation_error", problems or "Malformed request")

    @app.exception_handler(StarletteHTTPException)
    async def http_error_handler(_request: Request, error: StarletteHTTPException) -> JSONResponse:
        if error.status_code in (status.HTTP_404_NOT_FOUND, status.HTTP_405_METHOD_NOT_ALLOWED):
            return _error_response(status.HTTP_404_NOT_FOUND, "undefined_endpoint", "Route not supported")
        code = "unauthenticated" if error.status_code == status.HTTP_401_UNAUTHORIZED else "error"
        return _error_response(error.status_code, code, str(error.detail))

    app.add_middleware(BodyLimitMiddleware, limit=config.request_body_limit)

    async def require_token(authorization: Optional[str] = Header(default=None)) -> None:
        if not config.bearer_token:
            return
        scheme, _, token = (authorization or "").partition(" ")
        if scheme.lower() != "bearer" or not secrets.compare_digest(token.strip(), config.bearer_token):
            raise StarletteHTTPException(status.HTTP_401_UNAUTHORIZED, "Missing or wrong bearer token")

    guarded = [Depends(require_token)]

    @app.post("/stores", status_code=status.HTTP_201_CREATED, response_model=CreateStoreResponse,
              dependencies=guarded)
    def post_store(body: CreateStoreRequest) -> CreateStoreResponse:
        store = registry.create(body.name)
        return CreateStoreResponse(id=store.store_id, name=store.name)

    @app.post("/stores/{store_id}/authorization-models", status_code=status.HTTP_201_CREATED,
              response_model=WriteAuthorizationModelResponse, dependencies=guarded)
    async def post_model(store_id: str, request: Request) -> WriteAuthorizationModelResponse:
        store = registry.get(store_id)
        document = await request.body()
        model = import_model(document)
        model_id = await run_in_threadpool(store.put_model, model)
        return WriteAuthorizationModelResponse(authorization_model_id=model_id)

    @app.post("/stores/{store_id}/write", dependencies=guarded)
    def post_write(store_id: str, body: WriteRequest) -> dict:
        store = registry.get(store_id)
        adds = [key.to_tuple() for key in (body.writes.tuple_keys if body.writes else ())]
        deletes = []
        for key in body.deletes.tuple_keys if body.deletes else ():
            # Deletes name a key; the stored tuple may carry a condition
            matches = store.read(object=ObjectRef.parse(key.object), relation=key.relation,
                                 user=UserRef.parse(key.user))
            if not matches:
                raise AbsentDelete(f"Tuple not present: {key.user} {key.relation} {key.object}")
            deletes.extend(matches)
        store.write(adds=adds, deletes=deletes, model_id=body.authorization_model_id)
        return {}

    @app.post("/stores/{store_id}/check", response_model=CheckResponse, dependencies=guarded)
    async def post_check(store_id: str, body: CheckRequestBody) -> CheckResponse:
        store = registry.get(store_id)
        request = CheckRequest(
            object=ObjectRef.parse(body.tuple_key.object),
            relation=body.tuple_key.relation,
            user=UserRef.parse(body.tuple_key.user),
            context=body.context,
            contextual_tuples=tuple(
                key.to_tuple() for key in (body.contextual_tuples.tuple_keys if body.contextual_tuples else ())
            ),
        )

        def decide():
            snapshot = store.snapshot()
            return snapshot, check(snapshot, snapshot.model(body.authorization_model_id), request)

        snapshot, decision = await anyio.to_thread.run_sync(decide, limiter=app.state.check_limiter)
        logger.info(
            f"Store {store_id} r{snapshot.revision}: check {request.user} {request.relation} "
            f"{request.object} -> {'allowed' if decision.allowed else 'denied'}"
        )
        return CheckResponse(allowed=decision.allowed)

    return app
