"""On-disk cache of eigendecompositions.

The directory comes from ``NLKG_LAB_CACHE`` (unset disables caching).  Entries
are ``.npz`` files named by :func:`grid_spectral.cache_key`, so a hit returns
bit-identical arrays.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .grid_spectral import SpectralData, assemble_operator, cache_key, spectral_decompose

ENV_VAR = "NLKG_LAB_CACHE"
log = logging.getLogger(__name__)


def cache_dir() -> Optional[Path]:
    d = os.environ.get(ENV_VAR)
    return Path(d) if d else None


def cached_spectrum(grid, pot, m: float, tol_edge=None, directory: Optional[Path] = None) -> SpectralData:
    directory = cache_dir() if directory is None else Path(directory)
    key = cache_key(grid, pot, m)
    if directory is not None:
        path = directory / f"spectrum_{key}.npz"
        if path.exists():
            with np.load(path) as data:
                log.info("spectral cache hit %s", path)
                return SpectralData(grid, pot, m, data["energies"], data["vectors"], tol_edge)
    S = spectral_decompose(assemble_operator(grid, pot, m), tol_edge=tol_edge)
    if directory is not None:
        directory.mkdir(parents=True, exist_ok=True)
        tmp = directory / f".spectrum_{key}.{os.getpid()}.npz"
        np.savez(tmp, energies=S.energies, vectors=S.vectors)
        os.replace(tmp, directory / f"spectrum_{key}.npz")
    return S
