from __future__ import annotations

from pathlib import Path
from typing import Dict, Type

from ..rebac.interchange import export_model
from ..rebac.tuples import render_tuple_file
from .core import CompilationResult
from .obligations import render_obligations


class CompilerBackend:
    """
    Renders a compilation result into the files of one executable target.

    Subclasses set `name` and the file suffixes and override `render_model`;
    tuples and obligations default to the line-delimited JSON forms.
    """

    name: str = ""
    model_suffix: str = ".json"
    tuples_suffix: str = ".tuples.jsonl"
    obligations_suffix: str = ".obligations.jsonl"

    def render_model(self, result: CompilationResult) -> bytes:
        """Override this method in subclasses to render the model."""
        raise NotImplementedError("Subclasses must implement this method.")

    def render_tuples(self, result: CompilationResult) -> bytes:
        return render_tuple_file(result.tuples, result.iri_map)

    def render_obligations(self, result: CompilationResult) -> bytes:
        return render_obligations(result.obligations)

    def output_paths(self, directory: Path, stem: str) -> Dict[str, Path]:
        """File names for `emit`'s outputs, keyed the same way."""
        directory = Path(directory)
        return {
            "model": directory / f"{stem}{self.model_suffix}",
            "tuples": directory / f"{stem}{self.tuples_suffix}",
            "obligations": directory / f"{stem}{self.obligations_suffix}",
        }

    def emit(self, result: CompilationResult) -> Dict[str, bytes]:
        return {
            "model": self.render_model(result),
            "tuples": self.render_tuples(result),
            "obligations": self.render_obligations(result),
        }


class OpenFgaBackend(CompilerBackend):
    name = "openfga"
    model_suffix = ".fga.json"

    def render_model(self, result: CompilationResult) -> bytes:
        return export_model(result.model)


# A second target registers here
BACKENDS: Dict[str, Type[CompilerBackend]] = {
    OpenFgaBackend.name: OpenFgaBackend,
}


def get_backend(name: str = OpenFgaBackend.name) -> CompilerBackend:
    if name not in BACKENDS:
        raise ValueError(f"Unknown compiler backend '{name}' (available: {', '.join(sorted(BACKENDS))})")
    return BACKENDS[name]()
