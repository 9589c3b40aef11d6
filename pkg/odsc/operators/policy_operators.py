import argparse
import sys
from pathlib import Path

from ..compiler import compile_policy_set, get_backend
from ..compiler.backends import BACKENDS
from ..errors import MalformedDocument, MissingRequired
from ..policy.parser import parse_policy
from ..policy.validation import analyze_document, has_errors, render_diagnostics
from ..utils.logging import get_logger
from .common import EXIT_ERROR, EXIT_OK, Operator, read_input

logger = get_logger(__name__)


class ODSC_OT_Validate(Operator):
    bl_idname = "validate"
    bl_label = "Check policies against the ODS profile"
    bl_description = "Parse each policy and list its diagnostics; exit 2 if any is an Error"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("policy_files", nargs="+", metavar="POLICY", help="Policy JSON file(s)")

    def execute(self, args: argparse.Namespace) -> int:
        failed = False
        several = len(args.policy_files) > 1
        for policy_file in args.policy_files:
            document = read_input(policy_file)
            try:
                _, diagnostics = analyze_document(document)
            except (MalformedDocument, MissingRequired) as e:
                self.report({"ERROR"}, f"{policy_file}: {e.message}")
                failed = True
                if self.machine:
                    self.write_record({"file": policy_file, "valid": False, "error": e.message, "diagnostics": []})
                continue
            errors = has_errors(diagnostics)
            failed = failed or errors
            if self.machine:
                self.write_record({
                    "file": policy_file,
                    "valid": not errors,
                    "diagnostics": [d.to_record() for d in diagnostics],
                })
            elif diagnostics:
                rendered = render_diagnostics(diagnostics)
                if several:
                    rendered = "".join(f"{policy_file}: {line}\n" for line in rendered.splitlines())
                self.write(rendered)
        return EXIT_ERROR if failed else EXIT_OK


class ODSC_OT_Compile(Operator):
    bl_idname = "compile"
    bl_label = "Compile policies into a model, tuples and obligations"
    bl_description = "Lower one or more policies; without --out-model or --out-dir the model is printed"

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("policy_files", nargs="+", metavar="POLICY", help="Policy JSON file(s)")
        parser.add_argument("--out-model", help="Where to write the model")
        parser.add_argument("--out-tuples", help="Where to write the tuple file")
        parser.add_argument("--out-obligations", help="Where to write the obligation records")
        parser.add_argument("--out-dir", help="Write all three files here, named after the first policy file")
        parser.add_argument("--backend", choices=sorted(BACKENDS), default="openfga", help="Executable target")

    def execute(self, args: argparse.Namespace) -> int:
        policies = [parse_policy(read_input(policy_file)) for policy_file in args.policy_files]
        result = compile_policy_set(policies)
        if result.diagnostics:
            sys.stderr.write(render_diagnostics(result.diagnostics))

        backend = get_backend(args.backend)
        files = backend.emit(result)
        targets = {}
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            targets = backend.output_paths(args.out_dir, Path(args.policy_files[0]).stem)
        # explicit paths win over --out-dir
        for key, target in (("model", args.out_model), ("tuples", args.out_tuples), ("obligations", args.out_obligations)):
            if target:
                targets[key] = target
        written = {}
        for key, target in targets.items():
            Path(target).write_bytes(files[key])
            written[key] = str(target)
            logger.info(f"Wrote {key} to {target}")

        if self.machine:
            self.write_record({
                "policies": len(policies),
                "types": [t.name for t in result.model.type_definitions],
                "tuples": len(result.tuples),
                "obligations": len(result.obligations),
                "written": written,
                "diagnostics": [d.to_record() for d in result.diagnostics],
            })
        elif "model" not in targets:
            sys.stdout.write(files["model"].decode("utf-8"))
        return EXIT_OK


classes = (
    ODSC_OT_Validate,
    ODSC_OT_Compile,
)
