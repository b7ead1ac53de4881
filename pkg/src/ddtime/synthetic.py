"""The learnable synthetic dataset and its on-disk format.

A synthetic dataset is a single float64 tensor ``[S, d, t_in + t_out]``;
the leading ``t_in`` steps of each sample are the model input, the rest the
forecasting target. Files use the ``DDTS`` framing: magic ``DDTS``, u16
version, u32 S, u32 d, u32 t_in, u32 t_out, the tensor as little-endian
float64, then a CRC32 of the payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, VersionMismatchError
from .serial import Cursor, read_framed, write_framed

MAGIC = b"DDTS"
VERSION = 1


@dataclass(eq=False)
class SyntheticDataset:
    """Learnable windows: ``data`` is ``[S, d, t_in + t_out]`` float64."""

    data: np.ndarray
    t_in: int
    t_out: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ShapeMismatchError(f"expected [S, d, T] data, got {self.data.shape}")
        if self.data.shape[0] < 1:
            raise ShapeMismatchError("need at least one synthetic sample")
        if self.data.shape[2] != self.t_in + self.t_out:
            raise ShapeMismatchError(
                f"time axis {self.data.shape[2]} != t_in + t_out = {self.t_in + self.t_out}"
            )

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_vars(self) -> int:
        return self.data.shape[1]

    @property
    def inputs(self) -> np.ndarray:
        """View of the input slice ``[S, d, t_in]``."""
        return self.data[:, :, : self.t_in]

    @property
    def targets(self) -> np.ndarray:
        """View of the target slice ``[S, d, t_out]``."""
        return self.data[:, :, self.t_in :]

    def copy(self) -> "SyntheticDataset":
        return SyntheticDataset(data=self.data.copy(), t_in=self.t_in, t_out=self.t_out)


def save_synthetic(dataset: SyntheticDataset, path: str) -> None:
    """Write a ``DDTS`` file (bit-exact round trip)."""
    s, d, _ = dataset.data.shape
    header = struct.pack("<HIIII", VERSION, s, d, dataset.t_in, dataset.t_out)
    body = np.ascontiguousarray(dataset.data, dtype="<f8").tobytes()
    write_framed(path, MAGIC, header + body)


def load_synthetic(path: str) -> SyntheticDataset:
    """Read a ``DDTS`` file, verifying magic, version, CRC, and size."""
    payload = read_framed(path, MAGIC)
    cur = Cursor(payload, str(path))
    version, s, d, t_in, t_out = cur.unpack("<HIIII")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: DDTS version {version}, expected {VERSION}")
    count = s * d * (t_in + t_out)
    raw = cur.take(count * 8)
    data = np.frombuffer(raw, dtype="<f8").reshape(s, d, t_in + t_out).astype(np.float64)
    return SyntheticDataset(data=data, t_in=int(t_in), t_out=int(t_out))
