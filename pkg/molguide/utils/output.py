"""Artifact writers: every output file starts with a ``#`` header.

Header lines:
    # molguide <version>
    # command: <subcommand>
    # config: <canonical RunConfig JSON>

No timestamps are written, so identical runs give identical files.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable, Sequence

import pandas as pd

from molguide import __app_name__, __version__
from molguide.chem.fingerprint import Fingerprint, format_fingerprints
from molguide.utils.config import RunConfig
from molguide.utils.logger import get_logger

log = get_logger(__name__)


def config_echo(config: RunConfig | dict | None) -> str:
    if config is None:
        return "{}"
    if isinstance(config, RunConfig):
        return config.echo()
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def artifact_header(command: str, config: RunConfig | dict | None) -> str:
    return (
        f"# {__app_name__} {__version__}\n"
        f"# command: {command}\n"
        f"# config: {config_echo(config)}\n"
    )


def _write(path: str | os.PathLike, body: str, command: str, config) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(artifact_header(command, config))
        fh.write(body)
    log.debug("Wrote %s", path)
    return path


def write_lines(path, lines: Iterable[str], command: str, config=None) -> Path:
    body = "".join(f"{line}\n" for line in lines)
    return _write(path, body, command, config)


def write_smiles_file(path, smiles: Sequence[str], command: str, config=None) -> Path:
    """One SMILES per line after the header."""
    return write_lines(path, smiles, command, config)


def write_csv(path, frame: pd.DataFrame, command: str, config=None) -> Path:
    """RFC-4180 CSV (pandas quoting) after the header; the index is not written."""
    return _write(path, frame.to_csv(index=False, lineterminator="\n"), command, config)


def write_fingerprint_file(
    path, fps: Sequence[Fingerprint], labels: Sequence[str], command: str, config=None
) -> Path:
    return _write(path, format_fingerprints(fps, labels), command, config)


def write_loss_trace(path, trace: Sequence[tuple[int, float]], command: str, config=None) -> Path:
    """Loss per optimizer step as ``step,loss`` CSV (full float precision)."""
    frame = pd.DataFrame(trace, columns=["step", "loss"])
    return _write(
        path, frame.to_csv(index=False, lineterminator="\n", float_format="%.17g"), command, config
    )
