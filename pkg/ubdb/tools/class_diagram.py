"""
Class Diagram Rendering

Draws the class diagram of a machine (classes, attributes, associations and
inheritance) as a PNG image.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import base64
import io
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

from ubdb.model import ast
from ubdb.model.chain import ResolvedMachine
from ubdb.utils.logger import get_logger

logger = get_logger()

# Try to import matplotlib for image generation
try:
    import matplotlib

    matplotlib.use("Agg")  # Non-interactive backend
    import matplotlib.pyplot as plt
    from matplotlib.patches import FancyArrowPatch, FancyBboxPatch

    HAS_MATPLOTLIB = True
except ImportError:
    HAS_MATPLOTLIB = False
    logger.warning("matplotlib not available - diagram rendering disabled")

KIND_COLORS = {
    "primary": "#2E86C1",
    "secondary": "#28B463",
    "attribute": "#D68910",
    "historical": "#7D3C98",
}


def class_diagram_data(machine: ResolvedMachine) -> Dict[str, Any]:
    """
    Layout-independent description of a machine's class diagram.

    Returns:
        {"machine", "classes": [{name, kind, carrier, supertype, attributes}],
         "associations": [{name, source, target, arrow}]}
    """
    classes = []
    for name in machine.class_names:
        annotation = machine.annotation(name)
        attributes = [
            f"{d.name} {ast.kind_to_arrow(d.typing.kind)} {d.typing.target}"
            for d in machine.relations
            if d.role == ast.ROLE_ATTRIBUTE and d.typing.source == name
        ]
        classes.append(
            {
                "name": name,
                "kind": annotation.kind if annotation else "primary",
                "carrier": machine.carrier_of(name),
                "supertype": annotation.supertype if annotation else None,
                "attributes": attributes,
            }
        )
    associations = [
        {
            "name": d.name,
            "source": d.typing.source,
            "target": d.typing.target,
            "arrow": ast.kind_to_arrow(d.typing.kind),
        }
        for d in machine.relations
        if d.role == ast.ROLE_ASSOCIATION
    ]
    return {"machine": machine.name, "classes": classes, "associations": associations}


def _grid_positions(names: List[str]) -> Dict[str, tuple]:
    columns = max(1, math.ceil(math.sqrt(len(names))))
    rows = max(1, math.ceil(len(names) / columns))
    positions = {}
    for index, name in enumerate(names):
        row, col = divmod(index, columns)
        x = 100 * (col + 0.5) / columns
        y = 90 - 80 * (row + 0.5) / rows
        positions[name] = (x, y)
    return positions


def render_class_diagram(machine: ResolvedMachine, output_path: Optional[Path] = None) -> Optional[str]:
    """
    Render the class diagram of a machine.

    Args:
        machine: Resolved machine to draw
        output_path: Optional path to save the image. If None, returns base64 encoded image.

    Returns:
        Base64 encoded PNG if output_path is None, otherwise None (also None on failure)
    """
    if not HAS_MATPLOTLIB:
        logger.error("matplotlib not available - cannot render diagram")
        return None

    data = class_diagram_data(machine)
    try:
        fig, ax = plt.subplots(figsize=(16, 11))
        ax.set_xlim(0, 100)
        ax.set_ylim(0, 100)
        ax.axis("off")
        ax.text(50, 98, f"Class diagram - {data['machine']}", ha="center", va="top", fontsize=18, fontweight="bold")

        positions = _grid_positions([c["name"] for c in data["classes"]])
        box_width, box_height = 18, 10
        for cls in data["classes"]:
            x, y = positions[cls["name"]]
            box = FancyBboxPatch(
                (x - box_width / 2, y - box_height / 2),
                box_width,
                box_height,
                boxstyle="round,pad=0.3",
                facecolor=KIND_COLORS.get(cls["kind"], "#95A5A6"),
                edgecolor="black",
                alpha=0.85,
                linewidth=1.5,
            )
            ax.add_patch(box)
            ax.text(x, y + box_height / 2 - 1.5, cls["name"], ha="center", va="center", fontsize=11, fontweight="bold", color="white")
            ax.text(x, y + box_height / 2 - 3.2, f"<<{cls['kind']}>> : {cls['carrier']}", ha="center", va="center", fontsize=8, color="white")
            for line, attribute in enumerate(cls["attributes"][:4]):
                ax.text(x, y + box_height / 2 - 5 - 1.4 * line, attribute, ha="center", va="center", fontsize=7, color="white")

        for cls in data["classes"]:
            if cls["supertype"] and cls["supertype"] in positions:
                arrow = FancyArrowPatch(
                    positions[cls["name"]],
                    positions[cls["supertype"]],
                    arrowstyle="-|>",
                    mutation_scale=20,
                    color="black",
                    linewidth=1.5,
                    linestyle="--",
                    zorder=5,
                )
                ax.add_patch(arrow)

        for association in data["associations"]:
            start = positions.get(association["source"])
            end = positions.get(association["target"])
            if start is None or end is None:
                continue
            arrow = FancyArrowPatch(
                start,
                end,
                arrowstyle="->",
                mutation_scale=18,
                color="#C0392B",
                linewidth=2,
                alpha=0.8,
                zorder=6,
                connectionstyle="arc3,rad=0.2" if start != end else "arc3,rad=1.5",
            )
            ax.add_patch(arrow)
            mid_x, mid_y = (start[0] + end[0]) / 2, (start[1] + end[1]) / 2
            ax.text(mid_x, mid_y + 1.5, f"{association['name']} {association['arrow']}", ha="center", va="center", fontsize=8, color="#C0392B")

        legend_x = 3
        for kind, color in KIND_COLORS.items():
            ax.add_patch(
                FancyBboxPatch((legend_x, 2), 2, 1.2, boxstyle="round,pad=0.1", facecolor=color, edgecolor="black", linewidth=0.8)
            )
            ax.text(legend_x + 2.6, 2.6, kind, ha="left", va="center", fontsize=9)
            legend_x += 14

        plt.tight_layout()

        if output_path:
            plt.savefig(output_path, dpi=120, bbox_inches="tight")
            plt.close()
            logger.info(f"Class diagram of {machine.name} saved to {output_path}")
            return None
        buf = io.BytesIO()
        plt.savefig(buf, format="png", dpi=120, bbox_inches="tight")
        plt.close()
        buf.seek(0)
        img_base64 = base64.b64encode(buf.read()).decode("utf-8")
        buf.close()
        return img_base64

    except Exception as e:
        logger.error(f"Failed to render class diagram: {e}", exc_info=True)
        if "fig" in locals():
            plt.close()
        return None
