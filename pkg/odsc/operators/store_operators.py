import argparse

from ..errors import MalformedDocument
from ..rebac.interchange import import_model
from ..rebac.tuples import read_tuple_file, render_tuple
from ..store.tuple_store import open_or_init_store, open_store
from ..utils.logging import get_logger
from .common import EXIT_OK, Operator, parse_object, parse_user, read_input

logger = get_logger(__name__)


class ODSC_OT_Write(Operator):
    bl_idname = "write"
    bl_label = "Store a model and write tuples"
    bl_description = "Upload a model (--model) and/or apply a tuple file to the store, printing the new revision"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("tuple_file", nargs="?", help="Tuple file whose tuples are added")
        parser.add_argument("--model", dest="model_file", help="Interchange model file to store first")
        parser.add_argument("--delete", dest="delete_file", help="Tuple file whose tuples are deleted")

    def execute(self, args: argparse.Namespace) -> int:
        if not (args.tuple_file or args.model_file or args.delete_file):
            raise MalformedDocument("Nothing to write: give a tuple file, --model or --delete")
        model = import_model(read_input(args.model_file)) if args.model_file else None
        adds = read_tuple_file(read_input(args.tuple_file)).tuples if args.tuple_file else ()
        deletes = read_tuple_file(read_input(args.delete_file)).tuples if args.delete_file else ()

        record = {}
        with open_or_init_store(self.prefs.store_dir) as store:
            if model is not None:
                record["authorization_model_id"] = store.put_model(model)
                if not self.machine:
                    self.write(f"model {record['authorization_model_id']}")
            if adds or deletes:
                record["revision"] = store.write(adds=adds, deletes=deletes)
                if not self.machine:
                    self.write(f"revision {record['revision']}")
            record["store_id"] = store.store_id
        if self.machine:
            self.write_record(record)
        return EXIT_OK


class ODSC_OT_Read(Operator):
    bl_idname = "read"
    bl_label = "List stored tuples"
    bl_description = "Print the tuples matching every given filter"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--object", help="Filter on object, e.g. asset:ds1")
        parser.add_argument("--relation", help="Filter on relation")
        parser.add_argument("--user", help="Filter on user, e.g. user:alice or asset:ds1#consumer")

    def execute(self, args: argparse.Namespace) -> int:
        with open_store(self.prefs.store_dir, writable=False) as store:
            snapshot = store.snapshot()
        tuples = snapshot.read(
            object=parse_object(args.object) if args.object else None,
            relation=args.relation or None,
            user=parse_user(args.user) if args.user else None,
        )
        if self.machine:
            self.write_record({"revision": snapshot.revision, "tuples": [t.to_record() for t in tuples]})
        else:
            for relationship in tuples:
                self.write(render_tuple(relationship))
        return EXIT_OK


classes = (
    ODSC_OT_Write,
    ODSC_OT_Read,
)
