# core/data/storage.py
"""Artifact files: JSON reports, CSV tables, the mesh text format and the output-directory lock."""
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union
import os
import time
import numpy as np
import pandas as pd
import psutil
from pydantic import BaseModel
from pydantic_core import to_json

from core.errors import OutputLocked
from core.mesh.generator import TriangleMesh
from core.oracle.radial import RadialSolution
from core.solver.fields import ScalarField
from core.utils.logging import get_logger
from core.verify.levels import LevelCurve

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"
LOCK_NAME = ".lane-emden.lock"
# an empty lock file is a writer between open and write; wait this long before calling it stale
LOCK_SETTLE_SECONDS = 1.0
LOCK_POLL_SECONDS = 0.01

DEFAULT_DIR = Path.cwd()


def set_default_dir(dir_path: Union[str, Path]) -> None:
    """Set the default directory for file operations."""
    global DEFAULT_DIR
    DEFAULT_DIR = Path(dir_path).resolve()


def resolve_filepath(filename: str, dir: Optional[Path] = None) -> Path:
    if Path(filename).is_absolute():
        return Path(filename)
    return Path(dir or DEFAULT_DIR) / filename


def _prepare(filename: str, dir: Optional[Path]) -> Path:
    filepath = resolve_filepath(filename, dir)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    return filepath


def _g(x: float) -> str:
    return FLOAT_FORMAT % x


def save_text(content: str, filename: str = "data.txt", dir: Optional[Path] = None) -> Path:
    filepath = _prepare(filename, dir)
    # newline="" keeps the bytes identical across platforms
    with filepath.open("w", encoding="utf-8", newline="") as f:
        f.write(content)
    logger.message("Finished").subject("storage").details(path=str(filepath)).log("debug")
    return filepath


def read_text(filename: str = "data.txt", dir: Optional[Path] = None) -> str:
    filepath = resolve_filepath(filename, dir)
    if filepath.exists():
        return filepath.read_text(encoding="utf-8")
    return ""


def save_json(data: Union[BaseModel, dict, list], filename: str = "data.json", dir: Optional[Path] = None) -> Path:
    """Pydantic models go through model_dump_json, so excluded fields never reach the file."""
    if isinstance(data, BaseModel):
        text = data.model_dump_json(indent=2, by_alias=True)
    else:
        text = to_json(data, indent=2).decode("utf-8")
    return save_text(text + "\n", filename, dir)


def save_csv(
    data: Union[pd.DataFrame, list[dict]],
    filename: str = "data.csv",
    dir: Optional[Path] = None,
    header_lines: Optional[list[str]] = None,
) -> Path:
    df = data if isinstance(data, pd.DataFrame) else pd.DataFrame(data)
    body = df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    head = "".join(f"# {line}\n" for line in header_lines or [])
    return save_text(head + body, filename, dir)


def read_csv(filename: str = "data.csv", dir: Optional[Path] = None) -> pd.DataFrame:
    filepath = resolve_filepath(filename, dir)
    if filepath.exists():
        return pd.read_csv(filepath, comment="#")
    return pd.DataFrame()


# mesh text format

def mesh_to_text(mesh: TriangleMesh) -> str:
    lines = [f"{mesh.n_vertices} {len(mesh.triangles)} {len(mesh.boundary_vertices)}"]
    lines += [f"{_g(x)} {_g(y)}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [
        f"{idx} {_g(k)} {_g(nx)} {_g(ny)}"
        for idx, k, (nx, ny) in zip(mesh.boundary_vertices, mesh.boundary_kappa_E, mesh.boundary_nu_E)
    ]
    return "\n".join(lines) + "\n"


def write_mesh(mesh: TriangleMesh, filename: str = "mesh.txt", dir: Optional[Path] = None) -> Path:
    return save_text(mesh_to_text(mesh), filename, dir)


def mesh_from_text(text: str, h: Optional[float] = None, label: str = "") -> TriangleMesh:
    """Inverse of mesh_to_text. The format carries no size parameter, so h defaults to the mean
    boundary edge length."""
    rows = [line.split() for line in text.splitlines() if line.strip()]
    try:
        V, T, B = (int(x) for x in rows[0])
        vertices = np.array(rows[1:1 + V], dtype=float).reshape(V, 2)
        triangles = np.array(rows[1 + V:1 + V + T], dtype=int).reshape(T, 3)
        boundary = np.array(rows[1 + V + T:1 + V + T + B], dtype=float).reshape(B, 4)
    except (IndexError, ValueError) as e:
        raise ValueError(f"malformed mesh text: {e}") from e
    if len(rows) != 1 + V + T + B:
        raise ValueError(f"mesh text has {len(rows)} lines, header promises {1 + V + T + B}")
    bv = boundary[:, 0].astype(int)
    if h is None:
        ring = vertices[bv]
        h = float(np.mean(np.linalg.norm(ring - np.roll(ring, -1, axis=0), axis=1)))
    return TriangleMesh(
        vertices=vertices, triangles=triangles, boundary_vertices=bv,
        boundary_kappa_E=boundary[:, 1], boundary_nu_E=boundary[:, 2:4], h=h, label=label,
    )


def read_mesh(filename: str = "mesh.txt", dir: Optional[Path] = None, h: Optional[float] = None) -> TriangleMesh:
    filepath = resolve_filepath(filename, dir)
    return mesh_from_text(filepath.read_text(encoding="utf-8"), h, label=filepath.stem)


# tables

def field_frame(field: ScalarField) -> pd.DataFrame:
    mesh = field.mesh
    return pd.DataFrame({
        "X": mesh.vertices[:, 0],
        "Y": mesh.vertices[:, 1],
        "z_sphere": mesh.chart_sphere_points[:, 2],
        "u": field.values,
        "quantity": field.quantity,
        "p": np.nan if field.p is None else field.p,
    })


def save_field_csv(field: ScalarField, filename: str = "field.csv", dir: Optional[Path] = None) -> Path:
    return save_csv(field_frame(field), filename, dir)


def save_radial_csv(radial: RadialSolution, filename: str = "radial.csv", dir: Optional[Path] = None) -> Path:
    lam = "none" if radial.lambda_ is None else _g(radial.lambda_)
    df = pd.DataFrame({"r": radial.r_grid, "u": radial.values, "u_prime": radial.derivative})
    return save_csv(df, filename, dir, header_lines=[f"R={_g(radial.R)}", f"p={_g(radial.p)}", f"lambda={lam}"])


def save_level_csv(curves: list[LevelCurve], filename: str = "levels.csv", dir: Optional[Path] = None) -> Path:
    frames = [
        pd.DataFrame({"c": c.c, "X": c.points[:, 0], "Y": c.points[:, 1], "kappa_g": c.kappa_g})
        for c in curves
    ]
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["c", "X", "Y", "kappa_g"])
    return save_csv(df, filename, dir)


# lock

def _holder(lock: Path) -> Optional[int]:
    """PID recorded in the lock file; None while the file is empty or unreadable."""
    try:
        return int(lock.read_text(encoding="utf-8").strip())
    except (OSError, ValueError):
        return None


def _settled_holder(lock: Path) -> Optional[int]:
    deadline = time.monotonic() + LOCK_SETTLE_SECONDS
    while True:
        pid = _holder(lock)
        if pid is not None or not lock.exists() or time.monotonic() >= deadline:
            return pid
        time.sleep(LOCK_POLL_SECONDS)


def _create(lock: Path) -> None:
    fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    try:
        os.write(fd, str(os.getpid()).encode("utf-8"))
    finally:
        os.close(fd)


@contextmanager
def output_lock(dir: Path) -> Iterator[Path]:
    """Exclusive use of an output directory for the lifetime of the context.

    A lock naming this process or another live one is held. A lock naming a dead process, or one
    still empty after LOCK_SETTLE_SECONDS, is stale and reclaimed.
    """
    dir = Path(dir)
    dir.mkdir(parents=True, exist_ok=True)
    lock = dir / LOCK_NAME
    for _ in range(2):
        try:
            _create(lock)
            break
        except FileExistsError:
            pid = _settled_holder(lock)
            if pid is not None and (pid == os.getpid() or psutil.pid_exists(pid)):
                raise OutputLocked(f"{dir} is in use by process {pid}")
            logger.message("Processing").subject("storage").details(stale_lock=str(lock), pid=pid).log("warning")
            lock.unlink(missing_ok=True)
    else:
        raise OutputLocked(f"could not acquire {lock}")
    try:
        yield dir
    finally:
        lock.unlink(missing_ok=True)
