import math
import os
from typing import Any, List, Optional

import pandas as pd
from jinja2 import Environment, FileSystemLoader
from pandas.api.types import is_numeric_dtype


class ReportBuilder:
    """Renders result tables as aligned plain text through Jinja2 templates."""

    def __init__(self, templates_dir: Optional[str] = None, digits: int = 4):
        base = os.path.dirname(os.path.abspath(__file__))
        self.templates_dir = templates_dir or os.path.join(base, "templates")
        self.digits = digits
        self.jinja = Environment(
            loader=FileSystemLoader(self.templates_dir),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
        )

    def format_cell(self, value: Any) -> str:
        if value is None:
            return "-"
        if isinstance(value, bool):
            return str(value)
        if isinstance(value, int) or (hasattr(value, "dtype") and getattr(value.dtype, "kind", "") in "iu"):
            return str(int(value))
        if isinstance(value, float) or hasattr(value, "dtype"):
            value = float(value)
            if math.isnan(value):
                return "-"
            return f"{value:.{self.digits}f}"
        return str(value)

    def layout(self, table: pd.DataFrame) -> List[str]:
        """Header followed by one line per row; numeric columns right-aligned."""
        columns = [str(c) for c in table.columns]
        cells = [[self.format_cell(v) for v in row] for row in table.itertuples(index=False, name=None)]
        numeric = [is_numeric_dtype(table[c]) for c in table.columns]
        widths = [
            max([len(columns[j])] + [len(row[j]) for row in cells]) for j in range(len(columns))
        ]

        def line(values: List[str]) -> str:
            parts = [
                v.rjust(widths[j]) if numeric[j] else v.ljust(widths[j]) for j, v in enumerate(values)
            ]
            return "  ".join(parts).rstrip()

        return [line(columns)] + [line(row) for row in cells]

    def render(self, table: pd.DataFrame, title: str = "", template: str = "table.txt") -> str:
        lines = self.layout(table)
        width = max(len(l) for l in lines) if lines else 0
        text = self.jinja.get_template(template).render(
            title=title,
            rule="-" * width,
            header=lines[0] if lines else "",
            rows=lines[1:],
        )
        return text + "\n"
