import argparse
import json
import sys
from pathlib import Path
from typing import Any, Iterable

from ..errors import (
    MalformedContext,
    MalformedDocument,
    OdsError,
    StoreNotFound,
)
from ..policy.data import Timestamp
from ..policy.validation import Diagnostic, render_diagnostics
from ..preferences import CliConfig
from ..rebac.interchange import import_model
from ..rebac.model import AuthorizationModel, ObjectRef, UserRef
from ..rebac.tuples import read_tuple_file
from ..store.tuple_store import StoreState, open_store
from ..utils.logging import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_DENIED = 1
EXIT_ERROR = 2
EXIT_UNREADABLE = 3

_REPORT_LEVELS = {"INFO": logger.info, "WARNING": logger.warning, "ERROR": logger.error}


class Unreadable(Exception):
    """An input file could not be read at all."""


def read_input(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise Unreadable(f"Cannot read {path}: {e.strerror or e}")


def parse_context_value(text: str) -> Any:
    """Shell input is untyped: RFC 3339 text becomes a timestamp, digits an integer, anything else text."""
    try:
        return Timestamp.parse(text)
    except MalformedDocument:
        pass
    if text.isdigit():
        return int(text)
    return text


def parse_context(pairs: Iterable[str]) -> dict:
    context = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise MalformedContext(f"Expected key=value, got '{pair}'")
        context[key.strip()] = parse_context_value(value)
    return context


def parse_object(text: str) -> ObjectRef:
    return ObjectRef.parse(text)


def parse_user(text: str) -> UserRef:
    return UserRef.parse(text)


class Operator:
    """
    Base class for odsc subcommands.

    Subclasses set `bl_idname` (the subcommand name) and `bl_label` (its help
    line), declare their arguments in `add_arguments` and implement `execute`,
    which returns the exit status.
    """

    bl_idname: str = ""
    bl_label: str = ""
    bl_description: str = ""

    def __init__(self, prefs: CliConfig):
        self.prefs = prefs

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        pass

    @property
    def machine(self) -> bool:
        return self.prefs.output_format == "machine"

    def execute(self, args: argparse.Namespace) -> int:
        """Override this method in subclasses to run the command."""
        raise NotImplementedError("Subclasses must implement this method.")

    def invoke(self, args: argparse.Namespace) -> int:
        """Run `execute`, turning errors into messages and exit codes."""
        try:
            return self.execute(args)
        except Unreadable as e:
            self.report({"ERROR"}, str(e))
            return EXIT_UNREADABLE
        except OdsError as e:
            self.report({"ERROR"}, f"{type(e).__name__}: {e.message}")
            diagnostics = getattr(e, "diagnostics", None)
            if diagnostics:
                self.error_output(diagnostics)
            return EXIT_ERROR

    def report(self, level: set, message: str) -> None:
        for name in level:
            _REPORT_LEVELS.get(name, logger.info)(message)

    def write(self, text: str) -> None:
        print(text, end="" if text.endswith("\n") else "\n")

    def write_record(self, record: Any) -> None:
        print(json.dumps(record, ensure_ascii=False))

    def error_output(self, diagnostics: list[Diagnostic]) -> None:
        if self.machine:
            self.write_record({"diagnostics": [d.to_record() for d in diagnostics]})
        else:
            sys.stderr.write(render_diagnostics(diagnostics))


class SnapshotMixin:
    """Arguments and loading for commands that read a model and tuples."""

    @classmethod
    def add_source_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--model", dest="model_file", help="Interchange model file (instead of a store)")
        parser.add_argument("--tuples", dest="tuples_file", help="Tuple file to check against (with --model)")

    def load_snapshot(self, args: argparse.Namespace) -> tuple[StoreState, AuthorizationModel]:
        if args.model_file:
            model = import_model(read_input(args.model_file))
            tuples = read_tuple_file(read_input(args.tuples_file)).tuples if args.tuples_file else ()
            return StoreState.of(tuples, model), model
        if args.tuples_file:
            raise MalformedDocument("--tuples needs --model")
        try:
            store = open_store(self.prefs.store_dir, writable=False)
        except StoreNotFound:
            raise StoreNotFound(f"No store at {self.prefs.store_dir}; run 'odsc write --model ...' first")
        snapshot = store.snapshot()
        return snapshot, snapshot.model()
