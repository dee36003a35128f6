"""
Binary cache of assembled boundary element matrices.

Each entry is one file: magic bytes, a format version, the number of matrices, then
for every matrix its rank, shape and row-major float64 payload (little endian).
"""

import hashlib
import logging
import struct
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from rigid_filament.errors import IOFailure
from rigid_filament.models.config import QuadratureSpec
from rigid_filament.models.geometry import TubeMesh

MAGIC = b"RFMC"
FORMAT_VERSION = 1


class MatrixCache:
    """
    Directory of cached matrices keyed by mesh and quadrature settings.

    Args:
        directory: Cache directory, created on first save
        log_level: Logging level
    """

    def __init__(self, directory: Union[str, Path], log_level: int = logging.INFO):
        self.directory = Path(directory)
        self.logger = logging.getLogger(__name__)
        self.logger.setLevel(log_level)

    def key_for(self, mesh: TubeMesh, quadrature: QuadratureSpec) -> str:
        """Key from the curve hash, eps, resolution and quadrature settings."""
        digest = hashlib.sha256(mesh.curve.content_hash().encode("ascii"))
        digest.update(f"{mesh.eps!r}:{mesh.n_t}:{mesh.n_theta}".encode("ascii"))
        digest.update(quadrature.model_dump_json().encode("utf-8"))
        return digest.hexdigest()[:32]

    def path_for(self, key: str) -> Path:
        return self.directory / f"{key}.bin"

    def save(self, key: str, matrices: Sequence[np.ndarray]) -> Path:
        """
        Write matrices under a key.

        Raises:
            IOFailure: The file cannot be written
        """
        path = self.path_for(key)
        header = MAGIC + struct.pack("<II", FORMAT_VERSION, len(matrices))
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            with open(path, "wb") as handle:
                handle.write(header)
                for matrix in matrices:
                    array = np.ascontiguousarray(matrix, dtype="<f8")
                    handle.write(struct.pack("<I", array.ndim))
                    handle.write(struct.pack(f"<{array.ndim}Q", *array.shape))
                    handle.write(array.tobytes(order="C"))
        except OSError as e:
            raise IOFailure(f"Cannot write matrix cache {path}: {e}")
        self.logger.info(f"Cached {len(matrices)} matrices in {path}")
        return path

    def load(self, key: str) -> Optional[Tuple[np.ndarray, ...]]:
        """Matrices stored under a key, or None when absent or unreadable."""
        path = self.path_for(key)
        if not path.exists():
            return None
        data = path.read_bytes()
        if data[:4] != MAGIC:
            self.logger.warning(f"Ignoring cache file with bad magic: {path}")
            return None
        version, count = struct.unpack_from("<II", data, 4)
        if version != FORMAT_VERSION:
            self.logger.warning(f"Ignoring cache file with version {version}: {path}")
            return None
        offset = 12
        matrices: List[np.ndarray] = []
        try:
            for _ in range(count):
                (ndim,) = struct.unpack_from("<I", data, offset)
                offset += 4
                shape = struct.unpack_from(f"<{ndim}Q", data, offset)
                offset += 8 * ndim
                size = int(np.prod(shape)) if ndim else 1
                array = np.frombuffer(data, dtype="<f8", count=size, offset=offset)
                offset += 8 * size
                matrices.append(array.reshape(shape).astype(np.float64))
        except (struct.error, ValueError) as e:
            self.logger.warning(f"Ignoring truncated cache file {path}: {e}")
            return None
        self.logger.debug(f"Loaded {count} matrices from {path}")
        return tuple(matrices)

    def entries(self) -> List[Path]:
        if not self.directory.exists():
            return []
        return sorted(self.directory.glob("*.bin"))

    def clear(self) -> int:
        """Delete every cache entry, returning how many were removed."""
        removed = 0
        for path in self.entries():
            path.unlink()
            removed += 1
        return removed


def main() -> None:
    """Command line interface for inspecting and clearing the matrix cache."""
    import argparse

    parser = argparse.ArgumentParser(description="Inspect or clear the BEM matrix cache.")
    parser.add_argument("directory", type=Path, help="Cache directory")
    parser.add_argument("--clear", action="store_true", help="Delete all cache entries")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    args = parser.parse_args()

    log_level = logging.DEBUG if args.verbose else logging.INFO
    logger = logging.getLogger(__name__)
    logger.setLevel(log_level)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
        logger.addHandler(handler)

    cache = MatrixCache(args.directory, log_level)
    if args.clear:
        logger.info(f"Removed {cache.clear()} cache entries")
        return
    for path in cache.entries():
        logger.info(f"{path.name}: {path.stat().st_size} bytes")


if __name__ == "__main__":
    main()
