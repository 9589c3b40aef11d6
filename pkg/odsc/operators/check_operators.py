import argparse

from ..check.engine import CheckRequest, ExpandNode, check, expand, flatten
from ..rebac.tuples import read_tuple_file
from .common import (
    EXIT_DENIED,
    EXIT_OK,
    Operator,
    SnapshotMixin,
    parse_context,
    parse_object,
    parse_user,
    read_input,
)


class ODSC_OT_Check(SnapshotMixin, Operator):
    bl_idname = "check"
    bl_label = "Ask whether a user has a relation on an object"
    bl_description = "Exit 0 when allowed and 1 when denied, unless the exit policy is status_always_zero"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        cls.add_source_arguments(parser)
        parser.add_argument("--user", required=True, help="e.g. user:alice")
        parser.add_argument("--relation", required=True, help="e.g. can_train")
        parser.add_argument("--object", required=True, help="e.g. asset:ds1")
        parser.add_argument("--context", action="append", default=[], metavar="KEY=VALUE",
                            help="Request context; repeatable")
        parser.add_argument("--contextual-tuples", help="Tuple file evaluated as if stored")

    def execute(self, args: argparse.Namespace) -> int:
        snapshot, model = self.load_snapshot(args)
        contextual = read_tuple_file(read_input(args.contextual_tuples)).tuples if args.contextual_tuples else ()
        request = CheckRequest(
            object=parse_object(args.object),
            relation=args.relation,
            user=parse_user(args.user),
            context=parse_context(args.context),
            contextual_tuples=tuple(contextual),
        )
        decision = check(snapshot, model, request)
        if self.machine:
            self.write_record(decision.to_record())
        else:
            line = "allowed" if decision.allowed else "denied"
            if decision.missing_context:
                line += f" (missing context: {', '.join(decision.missing_context)})"
            self.write(line)
        if decision.allowed or self.prefs.exit_policy == "status_always_zero":
            return EXIT_OK
        return EXIT_DENIED


def render_tree(node: ExpandNode, indent: int = 0) -> list[str]:
    label = node.kind
    if node.object or node.relation:
        label += f" {node.object or ''}#{node.relation or ''}"
    if node.users:
        label += f": {', '.join(node.users)}"
    lines = ["  " * indent + label]
    for child in node.children:
        lines.extend(render_tree(child, indent + 1))
    return lines


class ODSC_OT_Expand(SnapshotMixin, Operator):
    bl_idname = "expand"
    bl_label = "Show the userset tree of an object relation"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        cls.add_source_arguments(parser)
        parser.add_argument("--relation", required=True)
        parser.add_argument("--object", required=True)
        parser.add_argument("--max-depth", type=int, default=25)

    def execute(self, args: argparse.Namespace) -> int:
        snapshot, model = self.load_snapshot(args)
        tree = expand(snapshot, model, parse_object(args.object), args.relation, args.max_depth)
        if self.machine:
            self.write_record({"tree": tree.to_record(), "users": sorted(flatten(tree))})
        else:
            self.write("\n".join(render_tree(tree)))
        return EXIT_OK


classes = (
    ODSC_OT_Check,
    ODSC_OT_Expand,
)
