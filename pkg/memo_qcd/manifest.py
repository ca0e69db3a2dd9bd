"""Run manifests and tabular run logs."""
import hashlib
import json
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional, Union

import pandas as pd

from . import __version__


def file_hash(path: Union[str, Path]) -> str:
    """
    Get the SHA-256 hash of a file.

    :param path: File path
    :return: hex digest
    """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Provenance of a single command run: configuration, seeds and the hashes of all produced files."""

    command: str
    config: Dict = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    started_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))
    wall_clock: float = 0.0
    _start: float = field(default_factory=time.perf_counter, repr=False)

    def add_artifact(self, path: Union[str, Path]) -> str:
        """
        Register a produced file with its content hash.

        :param path: File path
        :return: hex digest
        """
        digest = file_hash(path)
        self.artifacts[str(path)] = digest
        return digest

    def finish(self) -> None:
        """
        Record the elapsed wall-clock time.

        :return: None
        """
        self.wall_clock = time.perf_counter() - self._start

    def to_dict(self) -> Dict:
        """
        Get the manifest as JSON-compatible dictionary.

        :return: dict representation
        """
        return {
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "artifacts": self.artifacts,
            "tool_version": self.tool_version,
            "started_at": self.started_at,
            "wall_clock": self.wall_clock,
        }

    def to_frame(self) -> pd.DataFrame:
        """
        Get the manifest as flat key/value table.

        :return: DataFrame with columns section, key, value
        """
        rows = [
            ("run", "command", self.command),
            ("run", "tool_version", self.tool_version),
            ("run", "started_at", self.started_at),
            ("run", "wall_clock", f"{self.wall_clock:.3f}"),
        ]
        rows += [("config", key, str(value)) for key, value in sorted(self.config.items())]
        rows += [("seeds", key, str(value)) for key, value in sorted(self.seeds.items())]
        rows += [("artifacts", key, value) for key, value in sorted(self.artifacts.items())]
        return pd.DataFrame(rows, columns=["section", "key", "value"])

    def save(self, path: Union[str, Path]) -> None:
        """
        Write the manifest as JSON document.

        :param path: File path
        :return: None
        """
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, default=str)
            f.write("\n")


def store_log(manifest: RunManifest, log_path: Path, results: Optional[pd.DataFrame] = None) -> Path:
    """
    Store the manifest of a run (and optionally its result table) in tabular format.

    The tables are written to an excel file and a markdown file named after the command and the current time.

    :param manifest: Manifest of the run
    :param log_path: Directory where log files are stored
    :param results: Optional result table (trace, report) appended to the log
    :return: base path of the written files (without extension)
    """
    log_path = Path(log_path)
    log_path.mkdir(parents=True, exist_ok=True)
    log_basename = log_path / (manifest.command + "_" + datetime.now().strftime("%y%m%dT%H%M%S"))

    df = manifest.to_frame()

    with pd.ExcelWriter(str(log_basename) + ".xlsx") as writer:
        df.to_excel(writer, sheet_name="manifest", index=False)
        if results is not None:
            results.to_excel(writer, sheet_name="results", index=False)

    markdown = df.to_markdown(index=False)
    if results is not None:
        markdown += "\n\n" + results.to_markdown(index=False)
    with open(str(log_basename) + ".md", "w") as f:
        f.write(markdown + "\n")

    return log_basename
