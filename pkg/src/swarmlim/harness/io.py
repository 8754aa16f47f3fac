"""File output: CSV tables, JSON sidecars, and the run manifest.

All numeric fields are written as decimal with 17 significant digits,
which round-trips IEEE doubles, so identical arrays always produce
identical bytes.  Newlines are fixed to LF regardless of platform.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..diagnostics import DiagnosticsSeries
from ..ensemble import MultiSpeciesState, SpeciesEnsemble
from ..errors import OutputError
from ..grids import DensityGrid1D


def fmt(x) -> str:
    """17-significant-digit decimal; integers pass through unchanged."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path, header, rows) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row))
            fh.write("\n")


def write_json(path, payload) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def snapshot_header(dimension: int, has_velocities: bool) -> list:
    header = ["species", "index", "weight"]
    header += [f"x{k}" for k in range(dimension)]
    if has_velocities:
        header += [f"v{k}" for k in range(dimension)]
    return header


def write_snapshot(path, state: MultiSpeciesState) -> None:
    """One state: rows `species, index, weight, x0.., v0..`."""
    d = state.dimension
    has_v = state.has_velocities
    rows = []
    for i, ens in enumerate(state.species):
        for k in range(ens.count):
            row = [i, k, ens.weights[k], *ens.positions[k]]
            if has_v:
                row += list(ens.velocities[k])
            rows.append(row)
    write_csv(path, snapshot_header(d, has_v), rows)


def read_snapshot(path) -> MultiSpeciesState:
    """Inverse of write_snapshot (the stored time is not part of the format)."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        body = fh.read().strip()
    if header[:3] != ["species", "index", "weight"]:
        raise OutputError(f"{path} is not a snapshot table")
    d = sum(1 for name in header if name.startswith("x"))
    has_v = any(name.startswith("v") for name in header)
    if d < 1 or not body:
        raise OutputError(f"{path} holds no particle rows")
    data = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
    species = []
    for i in np.unique(data[:, 0]).astype(int):
        rows = data[data[:, 0].astype(int) == i]
        rows = rows[np.argsort(rows[:, 1], kind="stable")]
        pos = rows[:, 3 : 3 + d]
        vel = rows[:, 3 + d : 3 + 2 * d] if has_v else None
        species.append(SpeciesEnsemble(positions=pos, weights=rows[:, 2], velocities=vel))
    return MultiSpeciesState(time=0.0, species=tuple(species))


def write_snapshot_series(out_dir, times, states) -> list:
    """One snapshot file per sampled time plus a times index table."""
    out_dir = Path(out_dir)
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    index_rows = []
    for k, (t, state) in enumerate(zip(times, states)):
        name = f"snapshot_{k:05d}.csv"
        write_snapshot(snap_dir / name, state)
        paths.append(snap_dir / name)
        index_rows.append([k, t, f"snapshots/{name}"])
    index_path = snap_dir / "times.csv"
    write_csv(index_path, ["k", "t", "file"], index_rows)
    paths.append(index_path)
    return paths


_UNIT_PREFIXES = (
    ("alignment", "momentum"),
    ("free_energy", "energy"),
    ("interaction", "energy"),
    ("second_moment", "energy"),
    ("ekin_mod", "energy"),
    ("eint_mod", "energy"),
    ("etotal_mod", "energy"),
    ("w1", "length"),
    ("support_radius", "length"),
)


def channel_unit(name: str) -> str:
    for prefix, unit in _UNIT_PREFIXES:
        if name.startswith(prefix):
            return unit
    return "dimensionless"


def write_diagnostics(out_dir, series: DiagnosticsSeries, config_hash: str) -> list:
    """CSV of t + channels plus a JSON sidecar naming channels and units."""
    out_dir = Path(out_dir)
    names = list(series.channels)
    csv_path = out_dir / "diagnostics.csv"
    rows = (
        [t, *(series.channels[name][k] for name in names)]
        for k, t in enumerate(series.times)
    )
    write_csv(csv_path, ["t", *names], rows)
    sidecar = {
        "channels": names,
        "units": {name: channel_unit(name) for name in names},
        "config_hash": config_hash,
    }
    json_path = out_dir / "diagnostics.json"
    write_json(json_path, sidecar)
    return [csv_path, json_path]


def write_grids(path, sampled, matrix) -> None:
    """sampled: list of (time, DensityGrid1D); one row per (time, cell).

    Columns: t, cell_index, x_center, the per-species densities, then the
    per-species velocity field sampled at the cell centers.
    """
    from ..macro import velocity_field

    first: DensityGrid1D = sampled[0][1]
    n = first.n_species
    header = (
        ["t", "cell_index", "x_center"]
        + [f"rho_{i + 1}" for i in range(n)]
        + [f"u_{i + 1}" for i in range(n)]
    )
    rows = []
    for t, grid in sampled:
        centers = grid.centers
        u = velocity_field(grid, matrix, centers).values[:, :, 0]
        for c in range(grid.n_cells):
            rows.append([t, c, centers[c], *grid.values[:, c], *u[:, c]])
    write_csv(path, header, rows)


def write_picard_distances(path, distances) -> None:
    """Iterate-distance sequences, one row per iterate: iter, sup_w1.

    distances is a sequence of per-window sequences; the iterate counter
    runs over the concatenation.
    """
    rows = []
    k = 0
    for window in distances:
        for value in window:
            k += 1
            rows.append([k, value])
    write_csv(path, ["iter", "sup_w1"], rows)


def sweep_header(n_species: int) -> list:
    return ["param", "t", "w1"] + [f"I_{i + 1}" for i in range(n_species)] + ["E_K"]


@dataclass(frozen=True)
class RunManifest:
    """What a run produced: hashes of the config and of every emitted file."""

    config_hash: str
    code_version: str
    seed: int
    files: tuple = ()
    wall_clock_s: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "seed": self.seed,
            "files": [list(rec) for rec in self.files],
            "wall_clock_s": self.wall_clock_s,
            "error": self.error,
        }

    @staticmethod
    def from_dict(payload: dict) -> "RunManifest":
        return RunManifest(
            config_hash=payload["config_hash"],
            code_version=payload["code_version"],
            seed=payload["seed"],
            files=tuple(tuple(rec) for rec in payload["files"]),
            wall_clock_s=payload["wall_clock_s"],
            error=payload.get("error"),
        )

    def save(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        write_json(path, self.to_dict())
        return path

    def verify(self, out_dir) -> None:
        """Recompute checksums of every listed file; raise on any mismatch."""
        out_dir = Path(out_dir)
        for rel, digest, size in self.files:
            target = out_dir / rel
            if not target.is_file():
                raise OutputError(f"manifest lists missing file {rel}")
            if target.stat().st_size != size:
                raise OutputError(f"size mismatch for {rel}")
            if sha256_file(target) != digest:
                raise OutputError(f"checksum mismatch for {rel}")


def load_manifest(path) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return RunManifest.from_dict(json.load(fh))


def finish_manifest(
    out_dir, paths, config_hash: str, code_version: str, seed: int, t_start: float,
    error: str | None = None,
) -> RunManifest:
    """Checksum the emitted files (paths relative to out_dir) and save."""
    out_dir = Path(out_dir)
    records = []
    for p in paths:
        p = Path(p)
        try:
            rel = str(p.relative_to(out_dir))
        except ValueError:
            rel = str(p)
        full = out_dir / rel
        records.append((rel, sha256_file(full), full.stat().st_size))
    manifest = RunManifest(
        config_hash=config_hash,
        code_version=code_version,
        seed=seed,
        files=tuple(records),
        wall_clock_s=time.perf_counter() - t_start,
        error=error,
    )
    manifest.save(out_dir)
    return manifest
