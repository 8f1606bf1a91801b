#!/usr/bin/env python3
"""
Report Generator Module

Writes run directories: manifest.json, fixed-schema CSV files and a markdown
summary of the run.
"""

import json
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from polyheat import __version__
from polyheat.utils.config import RunConfig, save_config

MANIFEST_SCHEMA_VERSION = 1


def _jsonable(value: Any) -> Any:
    """Replace non-finite floats (invalid JSON) with strings, recursively."""
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else "-inf" if value < 0 else "nan"
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist") and callable(value.tolist):
        return _jsonable(value.tolist())
    return value


def format_value(value: Any) -> str:
    """CSV cell: round-trip repr for floats, str otherwise, empty for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item") and callable(value.item):
        return format_value(value.item())
    return str(value)


class ReportGenerator:
    """Persist the outputs of one run into its output directory."""

    def __init__(self, output_dir: str):
        self.output_dir = Path(output_dir)
        self.files: List[str] = []

    def prepare(self) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir

    def path(self, name: str) -> Path:
        self.prepare()
        if name not in self.files:
            self.files.append(name)
        return self.output_dir / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """Write a CSV with a fixed header; floats keep full precision."""
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(",".join(header) + "\n")
            for row in rows:
                f.write(",".join(format_value(v) for v in row) + "\n")
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(payload), f, indent=2)
        return path

    def write_manifest(self, config: RunConfig, results: Dict[str, Any],
                       diagnostics: Optional[Dict[str, Any]] = None, status: str = "ok") -> Path:
        """
        Write manifest.json and the config echo needed to re-run.

        Args:
            config: The run configuration
            results: Command results
            diagnostics: Boundary ratios, timings and similar side information
            status: "ok", "hypothesis_violation" or "error"
        """
        save_config(config, self.path("config.yaml"))
        manifest = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "polyheat_version": __version__,
            "created": datetime.now().isoformat(timespec="seconds"),
            "command": config.command,
            "status": status,
            "config": config.to_flat(),
            "results": results,
            "diagnostics": diagnostics or {},
            "files": sorted(set(self.files) | {"manifest.json", "summary.md"}),
        }
        return self.write_json("manifest.json", manifest)

    def generate_markdown_report(self, config: RunConfig, results: Dict[str, Any],
                                 status: str = "ok") -> Path:
        """Write summary.md for the run."""
        path = self.path("summary.md")
        with open(path, "w", encoding="utf-8") as f:
            f.write(self._build_markdown_report(config, results, status))
        return path

    def _build_markdown_report(self, config: RunConfig, results: Dict[str, Any], status: str) -> str:
        md = f"""# polyheat run: {config.command}

**Generated:** {datetime.now().strftime("%Y-%m-%d %H:%M:%S")}
**Status:** {status}
**Output directory:** {self.output_dir}

---

## Results

| Quantity | Value |
|----------|-------|
"""
        for key, value in _flatten_results(results):
            md += f"| {key} | {value} |\n"

        md += """
---

## Configuration

| Key | Value |
|-----|-------|
"""
        for key, value in sorted(config.to_flat().items()):
            md += f"| {key} | {value} |\n"

        if self.files:
            md += "\n---\n\n## Files\n\n"
            for name in sorted(set(self.files) - {"summary.md"}):
                md += f"- `{name}`\n"
        return md


def _flatten_results(results: Dict[str, Any], prefix: str = "") -> List[tuple]:
    rows = []
    for key, value in results.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_flatten_results(value, f"{name}."))
        elif isinstance(value, (list, tuple)) and len(value) > 8:
            rows.append((name, f"{len(value)} values"))
        else:
            rows.append((name, _jsonable(value)))
    return rows
