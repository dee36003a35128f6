#!/usr/bin/env python3
"""
Generate the configuration reference from the scenario config models.
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Type

from pydantic import BaseModel

from rigid_filament.models.coefficients import InertiaSpec
from rigid_filament.models.config import (
    CurveSpec,
    MeshSpec,
    NumericsSpec,
    OutputSpec,
    ProbeSpec,
    QuadratureSpec,
    ScenarioConfig,
    VorticitySpec,
)

logger = logging.getLogger(__name__)

SECTIONS: List[Tuple[str, Type[BaseModel]]] = [
    ("Top level", ScenarioConfig),
    ("curve", CurveSpec),
    ("inertia", InertiaSpec),
    ("vorticity", VorticitySpec),
    ("mesh", MeshSpec),
    ("mesh.quadrature", QuadratureSpec),
    ("numerics", NumericsSpec),
    ("probes", ProbeSpec),
    ("output", OutputSpec),
]


def _type_name(annotation: object) -> str:
    name = getattr(annotation, "__name__", None)
    text = name if name and not hasattr(annotation, "__args__") else str(annotation)
    return text.replace("typing.", "")


def _default(model: Type[BaseModel], name: str) -> str:
    field = model.model_fields[name]
    if field.is_required():
        return "required"
    if field.default_factory is not None:
        value = field.default_factory()  # type: ignore[call-arg]
        if isinstance(value, BaseModel):
            return "see section"
    else:
        value = field.default
    return f"`{value!r}`"


def render_section(title: str, model: Type[BaseModel]) -> str:
    """Render one model as a markdown table."""
    lines = [f"## {title}", "", (model.__doc__ or "").strip(), ""]
    lines.append("| Field | Type | Default | Description |")
    lines.append("| --- | --- | --- | --- |")
    for name, field in model.model_fields.items():
        description = (field.description or "").replace("|", "\\|")
        type_name = _type_name(field.annotation).replace("|", "\\|")
        lines.append(f"| `{name}` | `{type_name}` | {_default(model, name)} | {description} |")
    return "\n".join(lines)


def generate_reference(output_path: Optional[Path] = None) -> str:
    """
    Render every scenario config field with its default and description.

    Args:
        output_path: Where to write the markdown, if given

    Returns:
        The markdown text
    """
    sections = [
        "# Configuration Reference",
        "Scenario files are YAML mappings validated against these models. "
        "Nested sections are mappings under the key named in the heading.",
    ]
    sections.extend(render_section(title, model) for title, model in SECTIONS)
    text = "\n\n".join(sections) + "\n"
    if output_path is not None:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(text, encoding="utf-8")
        logger.info(f"Configuration reference written to {output_path}")
    return text


def main() -> None:
    """Main entry point for the reference generator."""
    parser = argparse.ArgumentParser(description="Generate the configuration reference")
    parser.add_argument(
        "--output",
        type=Path,
        default=Path("docs/configuration-reference.md"),
        help="Output markdown file (default: docs/configuration-reference.md)",
    )
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    generate_reference(args.output)


if __name__ == "__main__":
    main()
