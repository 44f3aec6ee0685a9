"""Checkpoint container I/O, averaging, and directory watching.

The container is a little-endian binary format: magic ``TLCK``, u32 version,
u64 step, u32 tensor count, then per tensor a u32 name length, the UTF-8
name, a u8 dtype code (0 = f32, 1 = f64), a u32 rank, u64 dims and the raw
row-major data.  Averaging accumulates in double precision regardless of the
storage dtype, and works equally on checkpoints from one run or from forked
runs sharing the same tensor schema.
"""

from __future__ import annotations

import logging
import os
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

MAGIC = b"TLCK"
VERSION = 1

_DTYPE_BY_CODE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_BY_KIND = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class CheckpointFormatError(ValueError):
    """Raised for a malformed or truncated checkpoint file."""


@dataclass
class Checkpoint:
    """A step-stamped, ordered collection of named float tensors."""

    step: int
    tensors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if self.step < 0:
            raise ValueError(f"negative step: {self.step}")
        if not self.tensors:
            raise ValueError("a checkpoint must contain at least one tensor")
        for name, arr in self.tensors.items():
            if np.dtype(arr.dtype) not in _CODE_BY_KIND:
                raise ValueError(f"tensor {name!r}: dtype must be float32 or float64, got {arr.dtype}")


@dataclass(frozen=True)
class AveragingWindow:
    """Sliding-window policy: how many checkpoints, spaced how far apart."""

    window_size: int = 8
    min_interval: float = 3600.0

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {self.window_size}")
        if self.min_interval < 0:
            raise ValueError(f"min_interval must be >= 0, got {self.min_interval}")


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    """Serialize a checkpoint; the file appears atomically via temp + rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQI", VERSION, ckpt.step, len(ckpt.tensors)))
        for name, arr in ckpt.tensors.items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<BI", _CODE_BY_KIND[np.dtype(arr.dtype)], arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            # tobytes() serializes row-major regardless of the array's layout
            f.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())
    os.replace(tmp, path)


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointFormatError(f"truncated file while reading {what}")
    return data


def read_checkpoint(path) -> Checkpoint:
    """Parse a checkpoint container, verifying magic, version and tensor sizes."""
    path = Path(path)
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise CheckpointFormatError(f"{path}: bad magic, not a checkpoint file")
        version, step, count = struct.unpack("<IQI", _read_exact(f, 16, "header"))
        if version != VERSION:
            raise CheckpointFormatError(f"{path}: unsupported version {version}")
        if count == 0:
            raise CheckpointFormatError(f"{path}: checkpoint contains no tensors")
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4, "tensor name length"))
            name = _read_exact(f, name_len, "tensor name").decode("utf-8")
            code, rank = struct.unpack("<BI", _read_exact(f, 5, f"tensor {name!r} dtype/rank"))
            if code not in _DTYPE_BY_CODE:
                raise CheckpointFormatError(f"{path}: tensor {name!r}: unknown dtype code {code}")
            dims = struct.unpack(f"<{rank}Q", _read_exact(f, 8 * rank, f"tensor {name!r} dims"))
            dtype = _DTYPE_BY_CODE[code]
            nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
            data = _read_exact(f, nbytes, f"tensor {name!r} data")
            if name in tensors:
                raise CheckpointFormatError(f"{path}: duplicate tensor name {name!r}")
            tensors[name] = np.frombuffer(data, dtype=dtype).reshape(dims).copy()
        if f.read(1):
            raise CheckpointFormatError(f"{path}: trailing bytes after last tensor")
    return Checkpoint(step=step, tensors=tensors)


def _check_same_schema(ckpts: Sequence[Checkpoint]) -> None:
    first = ckpts[0]
    for i, other in enumerate(ckpts[1:], start=1):
        problems = []
        if set(other.tensors) != set(first.tensors):
            missing = sorted(set(first.tensors) - set(other.tensors))
            extra = sorted(set(other.tensors) - set(first.tensors))
            problems.append(f"tensor names differ (missing {missing}, extra {extra})")
        else:
            for name, ref in first.tensors.items():
                arr = other.tensors[name]
                if arr.shape != ref.shape:
                    problems.append(f"{name!r}: shape {arr.shape} != {ref.shape}")
                if arr.dtype != ref.dtype:
                    problems.append(f"{name!r}: dtype {arr.dtype} != {ref.dtype}")
        if problems:
            raise ValueError(f"checkpoint #{i} does not match #0: " + "; ".join(problems))


def average_checkpoints(ckpts: Sequence[Checkpoint]) -> Checkpoint:
    """Elementwise arithmetic mean of the tensors, stamped with the newest step.

    All inputs must share tensor names, shapes and dtypes; mismatches are
    reported per tensor.  Accumulation happens in float64 and the result is
    cast back to each tensor's storage dtype.
    """
    if not ckpts:
        raise ValueError("need at least one checkpoint to average")
    _check_same_schema(ckpts)
    averaged: dict[str, np.ndarray] = {}
    for name, ref in ckpts[0].tensors.items():
        acc = np.zeros(ref.shape, dtype=np.float64)
        for c in ckpts:
            acc += c.tensors[name]
        averaged[name] = (acc / len(ckpts)).astype(ref.dtype)
    return Checkpoint(step=max(c.step for c in ckpts), tensors=averaged)


def select_window(
    dir_listing: Sequence[tuple], window: AveragingWindow
) -> list:
    """Pick up to window_size recent checkpoints spaced >= min_interval apart.

    ``dir_listing`` holds (path, step, mtime) entries.  Walking from newest to
    oldest, a checkpoint is kept when it is at least min_interval older than
    the previously kept one, which thins denser save intervals without
    touching any files.  Returns the kept paths oldest first.
    """
    if not dir_listing:
        raise ValueError("no checkpoints to select from")
    ordered = sorted(dir_listing, key=lambda e: (e[2], e[1], str(e[0])), reverse=True)
    kept = [ordered[0]]
    for entry in ordered[1:]:
        if len(kept) >= window.window_size:
            break
        if kept[-1][2] - entry[2] >= window.min_interval:
            kept.append(entry)
    return [entry[0] for entry in reversed(kept)]


@dataclass
class _WatchState:
    steps: dict[Path, tuple[float, int]] = field(default_factory=dict)
    bad: dict[Path, float] = field(default_factory=dict)
    known: set = field(default_factory=set)


def _scan_dir(directory: Path, state: _WatchState) -> list[tuple[Path, int, float]]:
    listing = []
    for path in sorted(directory.glob("*.tlck")):
        try:
            mtime = path.stat().st_mtime
        except OSError:
            continue
        cached = state.steps.get(path)
        if cached and cached[0] == mtime:
            listing.append((path, cached[1], mtime))
            continue
        if state.bad.get(path) == mtime:
            continue
        try:
            step = _read_step(path)
        except (OSError, CheckpointFormatError) as exc:
            log.warning("skipping unreadable checkpoint %s: %s", path, exc)
            state.bad[path] = mtime
            continue
        state.steps[path] = (mtime, step)
        listing.append((path, step, mtime))
    return listing


def _read_step(path: Path) -> int:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise CheckpointFormatError(f"{path}: bad magic")
        version, step, count = struct.unpack("<IQI", _read_exact(f, 16, "header"))
        if version != VERSION:
            raise CheckpointFormatError(f"{path}: unsupported version {version}")
        if count == 0:
            raise CheckpointFormatError(f"{path}: checkpoint contains no tensors")
    return step


def watch_and_average(
    directory,
    window: AveragingWindow,
    poll_interval: float = 60.0,
    patience: float = 7200.0,
    out_dir=None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[Path]:
    """Watch a directory and yield a fresh windowed average on every new checkpoint.

    Each time the selected window changes, the current window is averaged and
    written (atomically) to ``out_dir`` as ``avg-<newest step>.tlck``, and the
    output path is yielded.  Unreadable checkpoints are logged and skipped.
    The watch ends once ``patience`` seconds pass without any new checkpoint
    appearing.  ``clock`` and ``sleep`` exist so tests can drive the loop with
    a simulated timeline.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"not a directory: {directory}")
    out_dir = Path(out_dir) if out_dir is not None else directory / "averaged"
    state = _WatchState()
    last_window: tuple = ()
    deadline = clock() + patience
    while True:
        listing = _scan_dir(directory, state)
        new_paths = {e[0] for e in listing} - state.known
        if new_paths:
            state.known |= new_paths
            deadline = clock() + patience
        if listing:
            selected = tuple(select_window(listing, window))
            if selected != last_window:
                try:
                    avg = average_checkpoints([read_checkpoint(p) for p in selected])
                except (OSError, ValueError) as exc:
                    log.warning("skipping window %s: %s", [str(p) for p in selected], exc)
                else:
                    out_dir.mkdir(parents=True, exist_ok=True)
                    out_path = out_dir / f"avg-{avg.step}.tlck"
                    write_checkpoint(avg, out_path)
                    last_window = selected
                    yield out_path
        if clock() >= deadline:
            return
        sleep(poll_interval)
