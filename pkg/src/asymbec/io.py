"""Deterministic file output: tables, wavefunctions, manifests and plot scripts."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .extended import Grid1D, Wavefunction1D

MANIFEST = "manifest.json"


class GridMismatchError(ValueError):
    pass


class WavefunctionFormatError(ValueError):
    pass


def fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def write_csv(path, header: Sequence[str], rows) -> int:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(fmt_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
    return len(lines) - 1


def write_json_table(path, header: Sequence[str], rows) -> int:
    records = [{k: _json_value(v) for k, v in zip(header, row)} for row in rows]
    Path(path).write_text(json.dumps({"columns": list(header), "rows": records}, indent=1) + "\n")
    return len(records)


def read_csv(path):
    """``(header, rows)`` with every field as a string."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


# ---------------------------------------------------------------------------
# wavefunctions


def write_wavefunction(psi: Wavefunction1D, path) -> int:
    g = psi.grid
    lines = ["# x_min x_max n", "# %.17g %.17g %d" % (g.x_min, g.x_max, g.n)]
    for x, v in zip(g.x, psi.values):
        lines.append("%.17g %.17g %.17g" % (x, v.real, v.imag))
    Path(path).write_text("\n".join(lines) + "\n")
    return g.n


def read_wavefunction(path, grid: Optional[Grid1D] = None) -> Wavefunction1D:
    """Read a wavefunction file; with ``grid`` given, its grid must match exactly."""
    lines = Path(path).read_text().splitlines()
    headers = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    try:
        spec = headers[-1][1:].split()
        file_grid = Grid1D(float(spec[0]), float(spec[1]), int(spec[2]))
    except (IndexError, ValueError) as exc:
        raise WavefunctionFormatError(f"{path}: bad grid header ({exc})") from None
    if grid is not None and (grid.x_min, grid.x_max, grid.n) != (file_grid.x_min, file_grid.x_max, file_grid.n):
        raise GridMismatchError(
            f"{path}: file grid ({file_grid.x_min}, {file_grid.x_max}, {file_grid.n}) "
            f"differs from ({grid.x_min}, {grid.x_max}, {grid.n})")
    try:
        data = np.array([[float(t) for t in ln.split()] for ln in body])
    except ValueError as exc:
        raise WavefunctionFormatError(f"{path}: {exc}") from None
    if data.shape != (file_grid.n, 3):
        raise WavefunctionFormatError(f"{path}: expected {file_grid.n} rows of 'x re im', got shape {data.shape}")
    if not np.allclose(data[:, 0], file_grid.x, rtol=0, atol=1e-12 * file_grid.dx):
        raise GridMismatchError(f"{path}: x column does not match the header grid")
    values = np.empty(file_grid.n, dtype=complex)
    # assign parts directly: re + 1j*im arithmetic would lose signed zeros
    values.real = data[:, 1]
    values.imag = data[:, 2]
    return Wavefunction1D(file_grid, values)


# ---------------------------------------------------------------------------
# run directory bookkeeping


@dataclass
class RunOutput:
    """Tracks every file written into one run directory."""

    directory: Path
    command: str
    config: Dict[str, Any]
    fmt: str = "csv"
    files: List[Dict[str, Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.directory = Path(self.directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        # a manifest marks a completed run, so a stale one must go first
        stale = self.directory / MANIFEST
        if stale.exists():
            stale.unlink()

    def _record(self, name: str, rows: int) -> None:
        self.files = [f for f in self.files if f["name"] != name]
        self.files.append({"name": name, "rows": rows})

    def table(self, stem: str, header: Sequence[str], rows) -> str:
        name = f"{stem}.{self.fmt}"
        path = self.directory / name
        n = write_csv(path, header, rows) if self.fmt == "csv" else write_json_table(path, header, rows)
        self._record(name, n)
        return name

    def wavefunction(self, name: str, psi: Wavefunction1D) -> str:
        path = self.directory / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self._record(name, write_wavefunction(psi, path))
        return name

    def text(self, name: str, content: str) -> str:
        (self.directory / name).write_text(content)
        self._record(name, content.count("\n"))
        return name

    def manifest(self, status: str = "complete", error: Optional[str] = None) -> Path:
        doc = {
            "command": self.command,
            "config": self.config,
            "version": __version__,
            "status": status,
            "files": sorted(self.files, key=lambda f: f["name"]),
            "metadata": _jsonable(self.metadata),
        }
        if error is not None:
            doc["error"] = error
        path = self.directory / MANIFEST
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [_json_value(obj.real), _json_value(obj.imag)]
    return _json_value(obj)


def read_manifest(directory) -> Dict[str, Any]:
    return json.loads((Path(directory) / MANIFEST).read_text())


# ---------------------------------------------------------------------------
# plot scripts (matplotlib is needed only to run them)

_PLOT_HEAD = '''"""Plot {title} from {data}."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "{data}") as fh:
    rows = list(csv.DictReader(fh))
'''

_PLOT_BODIES = {
    "spectrum": '''
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
for branch in sorted({r["branch"] for r in rows}):
    sel = [r for r in rows if r["branch"] == branch]
    g = [float(r["gamma"]) for r in sel]
    ax1.plot(g, [float(r["mu_im"]) for r in sel], ".", ms=3, label=branch)
    ax2.plot(g, [float(r["norm"]) for r in sel], ".", ms=3, label=branch)
ax1.set_xlabel("gamma"); ax1.set_ylabel("Im mu")
ax2.set_xlabel("gamma"); ax2.set_ylabel("norm")
ax1.legend()
''',
    "bdg": '''
fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot([float(r["gamma"]) for r in rows], [float(r["omega_im"]) for r in rows], ".", ms=3)
ax.axhline(0, color="k", lw=0.5)
ax.set_xlabel("gamma"); ax.set_ylabel("Im omega")
''',
    "trajectory": '''
fig, axes = plt.subplots(4, 1, sharex=True, figsize=(6, 7))
t = [float(r["t"]) for r in rows]
for ax, key in zip(axes, ("R", "theta", "phi", "norm")):
    ax.plot(t, [float(r[key]) for r in rows], lw=0.8)
    ax.set_ylabel(key)
axes[-1].set_xlabel("t")
''',
    "separatrix": '''
radii = sorted({float(r["R"]) for r in rows})
colours = {"convergent": 0, "undecided": 1, "divergent": 2}
fig, axes = plt.subplots(1, len(radii), figsize=(3 * len(radii), 3), squeeze=False)
for ax, R in zip(axes[0], radii):
    sel = [r for r in rows if float(r["R"]) == R]
    ax.scatter([float(r["phi"]) for r in sel], [float(r["theta"]) for r in sel],
               c=[colours[r["verdict"]] for r in sel], s=4, cmap="coolwarm", vmin=0, vmax=2)
    ax.set_title(f"R = {R:g}"); ax.set_xlabel("phi"); ax.set_ylabel("theta")
''',
}

_PLOT_TAIL = '''
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else str(here / "{stem}.png")
fig.savefig(out, dpi=150)
'''


def plot_script(kind: str, data: str, title: str) -> str:
    stem = Path(data).stem
    return (_PLOT_HEAD.format(title=title, data=data) + _PLOT_BODIES[kind]
            + _PLOT_TAIL.format(stem=stem))
