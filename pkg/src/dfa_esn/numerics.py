"""Dense linear algebra helpers, seeded randomness, and spectral-radius estimation.

Matrices and vectors are plain float64 numpy arrays (row-major). The helpers
here add the shape/finiteness checking and the deterministic random streams
that the rest of the package relies on; heavy lifting is numpy's.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, ShapeError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 10_000


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/Inf."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name}: expected 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericsError(f"{name}: contains non-finite entries")
    return m


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting NaN/Inf."""
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"{name}: expected 1-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericsError(f"{name}: contains non-finite entries")
    return x


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check.

    Raises ShapeError naming both shapes when the inner dimensions differ.
    """
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def outer(u, v) -> np.ndarray:
    """Outer product u v^T of two vectors; shape (len(u), len(v))."""
    u = as_vector(u, "left vector")
    v = as_vector(v, "right vector")
    return np.outer(u, v)


@dataclass(frozen=True)
class PowerIterationResult:
    """Spectral-radius estimate plus convergence information."""

    value: float
    converged: bool
    iterations: int


def power_iteration(
    m, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS
) -> PowerIterationResult:
    """Estimate the largest |eigenvalue| of a square matrix by power iteration.

    Starts from a fixed all-ones direction, so the result is deterministic.
    When the dominant eigenvalue is a complex pair the iteration never settles;
    in that case the estimate is the geometric mean of the per-step norm growth
    over the trailing half of the run, which averages the rotation out, and
    ``converged`` is False.
    """
    m = as_matrix(m)
    n, cols = m.shape
    if n != cols:
        raise NumericsError(f"spectral radius needs a square matrix, got {n}x{cols}")
    if max_iters < 1:
        raise NumericsError("max_iters must be >= 1")
    if not np.any(m):
        return PowerIterationResult(0.0, True, 0)

    # work at unit entry scale so extreme magnitudes cannot under/overflow;
    # this also makes the estimate exactly homogeneous in the matrix scale
    scale = float(np.max(np.abs(m)))
    work = m / scale

    x = np.full(n, 1.0 / np.sqrt(n))
    estimate = 0.0
    log_growth: list[float] = []
    for k in range(1, max_iters + 1):
        y = work @ x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            # Start vector fell in the kernel; nudge deterministically.
            x = np.zeros(n)
            x[k % n] = 1.0
            continue
        log_growth.append(np.log(norm))
        previous, estimate = estimate, norm
        x = y / norm
        if previous > 0.0 and abs(estimate - previous) <= tol * estimate:
            return PowerIterationResult(scale * estimate, True, k)
    if not log_growth:
        return PowerIterationResult(0.0, False, max_iters)
    tail = log_growth[len(log_growth) // 2 :]
    return PowerIterationResult(scale * float(np.exp(np.mean(tail))), False, max_iters)


def spectral_radius(
    m, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS
) -> float:
    """Largest absolute eigenvalue of ``m``, estimated by power iteration.

    Logs a warning when the iteration hits ``max_iters`` without converging
    (typical for matrices whose dominant eigenvalues are a complex pair); the
    averaged estimate is still returned and is adequate for sub-unit rescaling.
    """
    result = power_iteration(m, tol=tol, max_iters=max_iters)
    if not result.converged:
        log.warning(
            "power iteration did not converge in %d iterations; "
            "using averaged growth estimate %.6g",
            result.iterations,
            result.value,
        )
    return result.value


def scale_to_radius(
    m, target_rho: float, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS
) -> np.ndarray:
    """Rescale a square matrix so its spectral radius becomes ``target_rho``."""
    m = as_matrix(m)
    if target_rho <= 0:
        raise NumericsError(f"target spectral radius must be > 0, got {target_rho}")
    rho = spectral_radius(m, tol=tol, max_iters=max_iters)
    if rho == 0.0:
        raise NumericsError("cannot rescale a matrix with zero spectral radius")
    return m * (target_rho / rho)


@dataclass(frozen=True)
class Uniform:
    """Uniform(lo, hi) entries; ``density`` < 1 zeroes entries independently.

    An entry is kept with probability ``density`` (the keep mask is drawn
    after the values, from the same stream).
    """

    lo: float = -1.0
    hi: float = 1.0
    density: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise NumericsError(f"uniform bounds need lo < hi, got [{self.lo}, {self.hi}]")
        if not 0.0 < self.density <= 1.0:
            raise NumericsError(f"density must be in (0, 1], got {self.density}")


class SeededRng:
    """Reproducible random streams split by string label.

    Each label yields an independent PCG64 generator whose seed is derived
    from (root seed, sha256(label)), so equal seeds and labels reproduce
    bit-identical streams across runs and platforms.
    """

    algorithm = "pcg64-sha256-labels"

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def stream(self, label: str) -> np.random.Generator:
        digest = hashlib.sha256(label.encode("utf-8")).digest()
        words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
        ss = np.random.SeedSequence([self.seed, *words])
        return np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"


def rng_matrix(rng: SeededRng, rows: int, cols: int, dist: Uniform, label: str) -> np.ndarray:
    """Draw a (rows, cols) matrix; deterministic given (seed, label, shape, dist)."""
    if rows < 1 or cols < 1:
        raise NumericsError(f"matrix shape must be positive, got {rows}x{cols}")
    stream = rng.stream(label)
    values = stream.uniform(dist.lo, dist.hi, size=(rows, cols))
    if dist.density < 1.0:
        keep = stream.random(size=(rows, cols)) < dist.density
        values *= keep
    return values
