"""Deterministic text reports: a ``key=value`` header block, then CSV tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def fmt(value) -> str:
    """Shortest round-trip formatting so equal inputs give byte-equal reports."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        return f"{z.real!r},{z.imag!r}"
    if value is None:
        return "none"
    return str(value)


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def add(self, *row) -> None:
        self.rows.append(list(row))

    def render(self) -> str:
        def cell(v):
            if isinstance(v, (complex, np.complexfloating)):
                z = complex(v)
                sign = "-" if np.signbit(z.imag) else "+"
                return f"{z.real!r}{sign}{abs(z.imag)!r}j"
            return fmt(v)

        out = [f"# table={self.name}", ",".join(self.columns)]
        out += [",".join(cell(v) for v in row) for row in self.rows]
        return "\n".join(out)


@dataclass
class Report:
    title: str
    header: dict = field(default_factory=dict)
    tables: list[Table] = field(default_factory=list)

    def set(self, key: str, value) -> None:
        self.header[key] = value

    def update(self, mapping: dict, prefix: str = "") -> None:
        for k, v in mapping.items():
            self.header[prefix + k] = v

    def table(self, name: str, columns) -> Table:
        t = Table(name, list(columns))
        self.tables.append(t)
        return t

    def render(self) -> str:
        lines = [f"report={self.title}"]
        lines += [f"{k}={fmt(v)}" for k, v in self.header.items()]
        for t in self.tables:
            lines.append("")
            lines.append(t.render())
        return "\n".join(lines) + "\n"
