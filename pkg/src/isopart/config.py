"""Run configuration shared by the command line tools."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

OUT_DIR_ENV = "ISOPART_OUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    tol: float = 1e-9
    grid_n: int = 256
    sweeps: int = 200
    t_start: float = 0.6
    t_end: float = 0.01
    out_dir: Path | None = None

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.out_dir is None:
            env = os.environ.get(OUT_DIR_ENV)
            object.__setattr__(self, "out_dir", Path(env) if env else None)

    def resolve(self, path: str | os.PathLike | None) -> Path | None:
        """Relative output paths land in the configured output directory."""
        if path is None:
            return None
        path = Path(path)
        if self.out_dir is not None and not path.is_absolute():
            self.out_dir.mkdir(parents=True, exist_ok=True)
            return self.out_dir / path
        return path

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)
