"""CSV dataset handle: schema, shape, and sample rows for prompt context."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from .artifacts import ConfigError


@dataclass(frozen=True)
class DatasetHandle:
    path: str
    name: str
    columns: tuple[str, ...]
    dtypes: tuple[str, ...]
    n_rows: int
    sample_rows: tuple[tuple, ...]

    @property
    def shape_text(self) -> str:
        return f"{self.n_rows} x {len(self.columns)}"

    def metadata_block(self) -> str:
        """Schema + sample context handed to profiling and planning prompts."""
        lines = [
            f"Dataset: {self.name}",
            f"Shape: {self.shape_text}",
            "Columns (name: detected type):",
        ]
        lines += [f"  {c}: {t}" for c, t in zip(self.columns, self.dtypes)]
        lines.append("Sample rows:")
        for row in self.sample_rows:
            lines.append("  " + ", ".join(str(v) for v in row))
        return "\n".join(lines)

    def validate_variables(self, variables: list[str]) -> bool:
        return all(v in self.columns for v in variables)


def load_dataset(path: str | Path, sample_rows: int = 2) -> DatasetHandle:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"dataset not readable: {path}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise ConfigError(f"dataset not readable: {path}: {exc}") from exc
    if frame.shape[1] == 0:
        raise ConfigError(f"dataset has no columns: {path}")
    head = frame.head(sample_rows)
    return DatasetHandle(
        path=str(path),
        name=path.stem,
        columns=tuple(str(c) for c in frame.columns),
        dtypes=tuple(str(t) for t in frame.dtypes),
        n_rows=int(frame.shape[0]),
        sample_rows=tuple(tuple(row) for row in head.itertuples(index=False, name=None)),
    )
