"""Log-log convergence fits for mesh-refinement studies."""

from dataclasses import dataclass, field

import numpy as np

from src.errors import ConfigError

MIN_ROWS = 3


@dataclass
class ConvergenceTable:
    edge_lengths: np.ndarray                   # strictly decreasing
    errors: dict[str, np.ndarray]
    slopes: dict[str, float] = field(default_factory=dict)
    intercepts: dict[str, float] = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return list(self.errors)

    def to_rows(self) -> list[dict]:
        rows = []
        for i, dx in enumerate(self.edge_lengths):
            row = {"edge_length": float(dx)}
            for name, values in self.extra.items():
                row[name] = float(values[i])
            for name, values in self.errors.items():
                row[f"{name}_error"] = float(values[i])
            rows.append(row)
        return rows

    def slope_rows(self) -> list[dict]:
        return [{"column": name, "slope": self.slopes[name], "intercept": self.intercepts[name]}
                for name in self.errors]


def fit_convergence(rows: list[dict], columns: tuple[str, ...] = ("velocity", "thickness"),
                    extra: tuple[str, ...] = ()) -> ConvergenceTable:
    """
    Fit log(error) = slope * log(edge_length) + c per error column.

    rows are dicts with "edge_length" and one "<column>_error" key per column;
    they may come in any order (parallel runs) and are sorted by decreasing
    edge length.
    """
    if len(rows) < MIN_ROWS:
        raise ConfigError(f"need at least {MIN_ROWS} mesh levels, got {len(rows)}")
    ordered = sorted(rows, key=lambda r: -r["edge_length"])
    dx = np.array([r["edge_length"] for r in ordered], dtype=float)
    if np.any(dx <= 0) or np.any(np.diff(dx) >= 0):
        raise ConfigError(f"edge lengths must be positive and distinct, got {dx.tolist()}")

    table = ConvergenceTable(edge_lengths=dx, errors={})
    for name in extra:
        table.extra[name] = np.array([r[name] for r in ordered], dtype=float)

    log_dx = np.log(dx)
    for name in columns:
        err = np.array([r[f"{name}_error"] for r in ordered], dtype=float)
        if np.any(~np.isfinite(err)) or np.any(err <= 0):
            raise ConfigError(f"{name} errors must be finite and positive, got {err.tolist()}")
        coeffs = np.polyfit(log_dx, np.log(err), 1)
        table.errors[name] = err
        table.slopes[name] = float(coeffs[0])
        table.intercepts[name] = float(coeffs[1])
    return table
