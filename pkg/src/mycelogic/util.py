"""Shared helpers: deterministic seed derivation and atomic file writes."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def child_seed(master: int, *key: int) -> int:
    """Derive a 64-bit child seed from a master seed and an integer key path.

    The derivation is a fixed function of (master, *key), so ensemble members
    and pipeline stages can be re-run independently with stable streams.
    """
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in key]])
    return int(ss.generate_state(1, np.uint64)[0])


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write a file via temp-file-then-rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
