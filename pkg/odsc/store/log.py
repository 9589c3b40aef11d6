"""
Append-only tuple log.

Each successful write appends one block:

    <revision> DEL <tuple json>
    <revision> ADD <tuple json>
    <revision> COMMIT

Replay applies a block only once its COMMIT line is complete, so a process
killed part way through an append leaves the previous revision intact. A
final line without its newline is torn and ignored.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..errors import MalformedDocument
from ..rebac.model import RelationshipTuple, sort_tuples
from ..rebac.tuples import render_tuple
from ..utils.logging import get_logger

logger = get_logger(__name__)

ADD = "ADD"
DEL = "DEL"
COMMIT = "COMMIT"


@dataclass(frozen=True)
class Replay:
    revision: int
    tuples: frozenset
    commits: int
    # Size of the log up to and including the last COMMIT line
    committed_size: int
    clean: bool


def _parse_line(line: str, number: int) -> tuple[int, str, RelationshipTuple | None]:
    revision_text, _, rest = line.partition(" ")
    operation, _, payload = rest.partition(" ")
    if not revision_text.isdigit() or operation not in (ADD, DEL, COMMIT):
        raise MalformedDocument(f"Corrupt tuple log at line {number}")
    if operation == COMMIT:
        return int(revision_text), operation, None
    try:
        relationship = RelationshipTuple.from_record(json.loads(payload))
    except (json.JSONDecodeError, MalformedDocument) as e:
        raise MalformedDocument(f"Corrupt tuple log at line {number}: {e}")
    return int(revision_text), operation, relationship


def render_block(revision: int, deletes: Iterable[RelationshipTuple], adds: Iterable[RelationshipTuple]) -> bytes:
    lines = [f"{revision} {DEL} {render_tuple(t)}" for t in sort_tuples(deletes)]
    lines += [f"{revision} {ADD} {render_tuple(t)}" for t in sort_tuples(adds)]
    lines.append(f"{revision} {COMMIT}")
    return "".join(f"{line}\n" for line in lines).encode("utf-8")


def _fsync_directory(path: Path) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def write_atomically(path: Path, data: bytes) -> None:
    """Write to a sibling temp file, fsync, then rename over `path`."""
    temp = path.with_name(path.name + ".tmp")
    with open(temp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(temp, path)
    _fsync_directory(path.parent)


class TupleLog:
    def __init__(self, path: Path):
        self.path = Path(path)

    def replay(self) -> Replay:
        """
        Rebuild the committed tuple set.

        Raises:
            MalformedDocument: If a complete line cannot be read.
        """
        if not self.path.exists():
            return Replay(0, frozenset(), 0, 0, True)
        data = self.path.read_bytes()
        tuples: set[RelationshipTuple] = set()
        pending: list[tuple[str, RelationshipTuple]] = []
        revision = commits = committed_size = 0
        offset = 0
        number = 0
        while offset < len(data):
            end = data.find(b"\n", offset)
            if end < 0:
                logger.warning(f"Ignoring torn final line in {self.path}")
                break
            number += 1
            line = data[offset:end].decode("utf-8")
            offset = end + 1
            if not line.strip():
                continue
            line_revision, operation, relationship = _parse_line(line, number)
            if operation != COMMIT:
                pending.append((operation, relationship))
                continue
            for op, item in pending:
                if op == DEL:
                    tuples.discard(item)
                else:
                    tuples.add(item)
            pending.clear()
            revision = line_revision
            commits += 1
            committed_size = offset
        if pending:
            logger.warning(f"Ignoring {len(pending)} uncommitted log line(s) in {self.path}")
        clean = committed_size == len(data)
        return Replay(revision, frozenset(tuples), commits, committed_size, clean)

    def append(self, revision: int, deletes: Iterable[RelationshipTuple], adds: Iterable[RelationshipTuple]) -> None:
        """Append one committed block. A failed append is cut back off the log."""
        block = render_block(revision, deletes, adds)
        size = self.path.stat().st_size if self.path.exists() else 0
        try:
            with open(self.path, "ab") as f:
                f.write(block)
                f.flush()
                os.fsync(f.fileno())
        except BaseException:
            if self.path.exists():
                self.truncate(size)
            raise

    def truncate(self, size: int) -> None:
        """Cut the log back to size bytes, durably."""
        with open(self.path, "r+b") as f:
            f.truncate(size)
            f.flush()
            os.fsync(f.fileno())

    def compact(self, revision: int, tuples: Iterable[RelationshipTuple]) -> None:
        """Replace the log with a single block holding the current state."""
        data = render_block(revision, (), tuples) if revision else b""
        write_atomically(self.path, data)
        logger.debug(f"Compacted {self.path} at revision {revision}")
