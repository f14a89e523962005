"""CSV export of trajectories and run manifests."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import NetkinError
from .stepping import Trajectory

__all__ = ["export_csv", "write_table", "write_manifest", "read_manifest", "fmt"]


class ExportError(NetkinError, OSError):
    pass


def fmt(x) -> str:
    """Round-trippable float formatting (17 significant digits)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _layout(traj: Trajectory):
    """Header and a row generator for the trajectory's shape."""
    fields = traj.meta.get("fields")
    if traj.positions is not None:
        obs = traj.observables
        dim = obs["mean_state"].shape[-1] if len(traj) else traj.meta.get("state_dim", 1)
        header = ["t", "site", "eta"] + [f"Vbar_{k}" for k in range(dim)] + ["quadratic_variation"]

        def rows():
            for k, t in enumerate(traj.times):
                qv = obs["quadratic_variation"][k]
                for site, (eta, vbar) in enumerate(zip(obs["eta"][k], obs["mean_state"][k])):
                    yield [t, site, eta, *vbar, qv]
        return header, rows

    if fields is not None:
        header = ["t", "site", "x", *fields]
        x = np.asarray(traj.meta.get("x", []), dtype=float)

        def rows():
            for t, y in zip(traj.times, traj.states):
                for site in range(y.shape[1]):
                    xs = x[site] if x.size else site
                    yield [t, site, xs, *y[:, site]]
        return header, rows

    dim = traj.states.shape[-1] if len(traj) else traj.meta.get("state_dim", 1)
    extra = "s" in traj.observables
    header = ["t", "site"] + [f"V_{k}" for k in range(dim)] + (["s"] if extra else [])

    def rows():
        for k, (t, V) in enumerate(zip(traj.times, traj.states)):
            for site, v in enumerate(V):
                tail = [traj.observables["s"][k][site]] if extra else []
                yield [t, site, *v, *tail]
    return header, rows


def export_csv(traj: Trajectory, path) -> Path:
    """Write one row per (snapshot time, site).

    Layouts: particle runs give ``t, site, eta, Vbar_*, quadratic_variation``;
    SIR runs ``t, site, x, u, v, r``; other field runs ``t, site, V_*``
    (plus ``s`` for the norms model).
    """
    path = Path(path)
    header, rows = _layout(traj)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows():
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    return path


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return path


def write_manifest(path, config: dict, seed: int, version: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"netkin_version": version, "seed": seed, "config": config}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    doc = json.loads(Path(path).read_text())
    return doc["config"] if "config" in doc else doc
