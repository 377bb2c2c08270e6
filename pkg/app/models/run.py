from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from app.config.settings import settings


class Command(str, Enum):
    SIMULATE = "simulate"
    FIT = "fit"
    MODES = "modes"
    REGRESS = "regress"


class RunConfig(BaseModel):
    """One CLI invocation: subcommand, files and overrides"""

    command: Command
    input: Optional[Path] = None
    output: Path
    trace: Optional[Path] = None
    overlay: Optional[Path] = None
    seed: Optional[int] = None
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)
    tolerance: Optional[float] = Field(default=None, gt=0)
    quiet: bool = False

    @model_validator(mode="after")
    def _paths(self) -> "RunConfig":
        if self.input is None and self.command != Command.REGRESS:
            raise ValueError(f"{self.command.value} needs --input")
        if self.command == Command.FIT and self.trace is None:
            raise ValueError("fit needs --trace")
        for name in ("input", "trace"):
            path = getattr(self, name)
            if path is not None and not path.is_file():
                raise ValueError(f"--{name} {path} does not exist")
        for name in ("output", "overlay"):
            path = getattr(self, name)
            if path is not None and not path.resolve().parent.is_dir():
                raise ValueError(f"--{name} {path}: directory does not exist")
        return self
