"""FNV-1a 64 checksums over little-endian voxel bytes.

Pinned as the manifest/record integrity hash; must match in every
implementation, so the byte order is fixed to f32 little-endian.
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def voxel_checksum(voxels: np.ndarray) -> int:
    """Checksum of a voxel grid, independent of host endianness."""
    le = np.ascontiguousarray(voxels, dtype="<f4")
    return fnv1a64(le.tobytes())


def checksum_hex(value: int) -> str:
    return f"{value:016x}"
