"""
Durable store for authorization models and relationship tuples.

Layout of a store directory:

    meta                  JSON: store_id, name, revision
    models/<id>.fga.json  one file per uploaded model, never rewritten
    tuples.log            append-only operation log (see store.log)
    lock                  advisory single-writer lock

Readers work on immutable StoreState snapshots; a write builds the next state
and swaps it in only after the log block is durable.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

from ulid import ULID

from ..errors import AbsentDelete, DuplicateAdd, InvalidModel, MalformedDocument, ModelNotFound, StoreBusy, StoreNotFound
from ..policy.validation import has_errors
from ..rebac.interchange import export_model, import_model
from ..rebac.model import AuthorizationModel, ObjectRef, RelationshipTuple, UserRef, sort_tuples
from ..rebac.tuples import check_tuple
from ..rebac.validation import validate_model
from ..utils import get_next_sequence_id
from ..utils.logging import get_logger
from .log import TupleLog, write_atomically

try:
    import fcntl
except ImportError:  # pragma: no cover
    fcntl = None

logger = get_logger(__name__)

META_FILE = "meta"
MODELS_DIR = "models"
LOG_FILE = "tuples.log"
LOCK_FILE = "lock"
MODEL_SUFFIX = ".fga.json"


@dataclass(frozen=True)
class StoreState:
    """One committed revision of a store. Never mutated after construction."""

    store_id: str
    models: Mapping[str, AuthorizationModel] = field(default_factory=dict)
    tuples: frozenset = frozenset()
    revision: int = 0

    def __post_init__(self):
        object.__setattr__(self, "models", MappingProxyType(dict(sorted(self.models.items()))))
        object.__setattr__(self, "tuples", frozenset(self.tuples))

    @classmethod
    def of(cls, tuples: Iterable[RelationshipTuple], model: Optional[AuthorizationModel] = None,
           store_id: str = "local") -> "StoreState":
        """A detached snapshot over in-memory tuples, e.g. a tuple file."""
        models = {"00000001": model} if model is not None else {}
        return cls(store_id=store_id, models=models, tuples=frozenset(tuples), revision=0)

    @property
    def latest_model_id(self) -> Optional[str]:
        return max(self.models) if self.models else None

    def model(self, model_id: Optional[str] = None) -> AuthorizationModel:
        """
        Raises:
            ModelNotFound: If the store has no model (or no model with that id).
        """
        key = model_id or self.latest_model_id
        if key is None or key not in self.models:
            raise ModelNotFound(f"Store {self.store_id} has no model{' ' + model_id if model_id else ''}")
        return self.models[key]

    @cached_property
    def _index(self) -> Mapping[tuple[ObjectRef, str], tuple[RelationshipTuple, ...]]:
        index: dict[tuple[ObjectRef, str], list[RelationshipTuple]] = {}
        for relationship in sort_tuples(self.tuples):
            index.setdefault((relationship.object, relationship.relation), []).append(relationship)
        return MappingProxyType({key: tuple(value) for key, value in index.items()})

    def tuples_for(self, object_ref: ObjectRef, relation: str) -> tuple[RelationshipTuple, ...]:
        return self._index.get((object_ref, relation), ())

    def read(self, object: Optional[ObjectRef] = None, relation: Optional[str] = None,
             user: Optional[UserRef] = None) -> list[RelationshipTuple]:
        """All tuples matching every given filter, in canonical order."""
        matches = (
            t for t in self.tuples
            if (object is None or t.object == object)
            and (relation is None or t.relation == relation)
            and (user is None or t.user == user)
        )
        return sort_tuples(matches)


def _read_meta(path: Path) -> dict:
    meta_path = path / META_FILE
    if not meta_path.is_file():
        raise StoreNotFound(f"No store at {path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedDocument(f"Corrupt store meta in {path}: {e}")
    if not isinstance(meta, dict) or not isinstance(meta.get("store_id"), str):
        raise MalformedDocument(f"Corrupt store meta in {path}")
    return meta


def _write_meta(path: Path, store_id: str, name: str, revision: int) -> None:
    meta = {"store_id": store_id, "name": name, "revision": revision}
    write_atomically(path / META_FILE, (json.dumps(meta, indent=2) + "\n").encode("utf-8"))


class TupleStore:
    """A store directory opened for reading, or for reading and writing."""

    def __init__(self, path: Path, name: str, state: StoreState, log: TupleLog,
                 lock_handle=None, writable: bool = True):
        self.path = Path(path)
        self.name = name
        self._state = state
        self._log = log
        self._lock_handle = lock_handle
        self.writable = writable
        self._write_lock = threading.Lock()

    def __repr__(self):
        return f"TupleStore({self.store_id!r}, revision={self.revision})"

    def __enter__(self) -> "TupleStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def store_id(self) -> str:
        return self._state.store_id

    @property
    def revision(self) -> int:
        return self._state.revision

    def snapshot(self) -> StoreState:
        return self._state

    def read(self, object: Optional[ObjectRef] = None, relation: Optional[str] = None,
             user: Optional[UserRef] = None) -> list[RelationshipTuple]:
        return self._state.read(object=object, relation=relation, user=user)

    def _require_writable(self) -> None:
        if not self.writable:
            raise StoreBusy(f"Store {self.store_id} is open read-only")

    def put_model(self, model: AuthorizationModel) -> str:
        """
        Store a model under the next sequence id.

        Raises:
            InvalidModel: If validation reports Errors; nothing is stored.
        """
        self._require_writable()
        diagnostics = validate_model(model)
        if has_errors(diagnostics):
            raise InvalidModel("Model failed validation", diagnostics)
        with self._write_lock:
            state = self._state
            model_id = get_next_sequence_id(state.models)
            write_atomically(self.path / MODELS_DIR / f"{model_id}{MODEL_SUFFIX}", export_model(model))
            self._state = StoreState(state.store_id, {**state.models, model_id: model}, state.tuples, state.revision)
        logger.info(f"Store {self.store_id}: stored model {model_id}")
        return model_id

    def write(
        self,
        adds: Iterable[RelationshipTuple] = (),
        deletes: Iterable[RelationshipTuple] = (),
        model_id: Optional[str] = None,
    ) -> int:
        """
        Apply deletes then adds as one revision.

        Tuples are checked against the model named by model_id, or the latest
        model when none is given.

        Returns:
            The new revision.

        Raises:
            ModelNotFound: If there is no such model.
            UnknownTypeOrRelation: If a tuple does not fit the model.
            DuplicateAdd: If an added tuple is already present.
            AbsentDelete: If a deleted tuple is not present.
        """
        self._require_writable()
        adds, deletes = list(adds), list(deletes)
        if not adds and not deletes:
            raise MalformedDocument("A write needs at least one tuple to add or delete")
        with self._write_lock:
            state = self._state
            model = state.model(model_id)
            for relationship in (*deletes, *adds):
                check_tuple(model, relationship)

            remaining = set(state.tuples)
            for relationship in deletes:
                if relationship not in remaining:
                    raise AbsentDelete(f"Tuple not present: {relationship}")
                remaining.discard(relationship)
            for relationship in adds:
                if relationship in remaining:
                    raise DuplicateAdd(f"Tuple already present: {relationship}")
                remaining.add(relationship)

            revision = state.revision + 1
            self._log.append(revision, deletes, adds)
            self._state = StoreState(state.store_id, state.models, frozenset(remaining), revision)
            try:
                _write_meta(self.path, state.store_id, self.name, revision)
            except OSError as e:
                # the log stays authoritative
                logger.warning(f"Could not update store meta: {e}")
        logger.info(f"Store {self.store_id}: revision {revision} (+{len(adds)} -{len(deletes)})")
        return revision

    def close(self) -> None:
        if self._lock_handle is not None:
            if fcntl is not None:
                fcntl.flock(self._lock_handle.fileno(), fcntl.LOCK_UN)
            self._lock_handle.close()
            self._lock_handle = None


def _acquire_lock(path: Path):
    handle = open(path / LOCK_FILE, "a+")
    if fcntl is None:
        return handle
    try:
        fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
    except BlockingIOError:
        handle.close()
        raise StoreBusy(f"Store at {path} is locked by another writer")
    return handle


def _load_models(path: Path) -> dict[str, AuthorizationModel]:
    models = {}
    models_dir = path / MODELS_DIR
    if models_dir.is_dir():
        for model_file in sorted(models_dir.glob(f"*{MODEL_SUFFIX}")):
            model_id = model_file.name[: -len(MODEL_SUFFIX)]
            if model_id.isdigit():
                models[model_id] = import_model(model_file.read_bytes())
    return models


def open_store(path: Path | str, writable: bool = True) -> TupleStore:
    """
    Open an existing store directory.

    A writable open takes the single-writer lock and compacts the log.

    Raises:
        StoreNotFound: If `path` holds no store.
        StoreBusy: If another writer holds the lock.
    """
    path = Path(path)
    meta = _read_meta(path)
    lock_handle = _acquire_lock(path) if writable else None
    try:
        log = TupleLog(path / LOG_FILE)
        replay = log.replay()
        if writable and (replay.commits > 1 or not replay.clean):
            log.compact(replay.revision, replay.tuples)
        state = StoreState(meta["store_id"], _load_models(path), replay.tuples, replay.revision)
    except BaseException:
        if lock_handle is not None:
            lock_handle.close()
        raise
    logger.debug(f"Opened store {state.store_id} at revision {state.revision}")
    return TupleStore(path, meta.get("name", ""), state, log, lock_handle, writable)


def init_store(path: Path | str, name: str = "") -> TupleStore:
    """Create a store in `path` (which may already exist but must not hold a store)."""
    path = Path(path)
    if (path / META_FILE).exists():
        raise MalformedDocument(f"A store already exists at {path}")
    (path / MODELS_DIR).mkdir(parents=True, exist_ok=True)
    (path / LOG_FILE).touch()
    _write_meta(path, str(ULID()), name, 0)
    store = open_store(path)
    logger.info(f"Created store {store.store_id} at {path}")
    return store


def create_store(root: Path | str, name: str = "") -> TupleStore:
    """Create a new store in a fresh ULID-named directory under `root`."""
    store_id = str(ULID())
    path = Path(root) / store_id
    (path / MODELS_DIR).mkdir(parents=True)
    (path / LOG_FILE).touch()
    _write_meta(path, store_id, name, 0)
    store = open_store(path)
    logger.info(f"Created store {store_id} ({name or 'unnamed'})")
    return store


def open_or_init_store(path: Path | str, writable: bool = True) -> TupleStore:
    path = Path(path)
    if (path / META_FILE).exists():
        return open_store(path, writable=writable)
    return init_store(path, name=path.name)
