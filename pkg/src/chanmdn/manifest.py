"""Run manifests: the resolved configuration snapshot written beside outputs.

Every CLI command records what it ran with — command name, resolved option
values, master seed, input and output paths, tool version — so any run can
be replayed bit-for-bit via `--config <manifest>`.  Manifests deliberately
carry no timestamps.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import __version__
from .errors import DataFormatError

MANIFEST_VERSION = 1


def manifest_path(out: str | Path) -> Path:
    """Sibling manifest for file outputs, member manifest for directories."""
    out = Path(out)
    if out.is_dir():
        return out / "manifest.json"
    return out.with_name(out.name + ".manifest.json")


def write_manifest(
    path: str | Path,
    command: str,
    config: dict,
    inputs: dict,
    outputs: list[str],
    extra: dict | None = None,
) -> None:
    doc = {
        "format_version": MANIFEST_VERSION,
        "tool": "chanmdn",
        "tool_version": __version__,
        "command": command,
        "seed": config.get("seed"),
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_config_file(path: str | Path) -> dict:
    """Read a key-value config file; manifests contribute their snapshot."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: not a valid config document: {exc}") from None
    if not isinstance(doc, dict):
        raise DataFormatError(f"{path}: config must be a JSON object")
    if "command" in doc and "config" in doc:
        snapshot = doc["config"]
        if not isinstance(snapshot, dict):
            raise DataFormatError(f"{path}: manifest config snapshot must be an object")
        return snapshot
    return doc
