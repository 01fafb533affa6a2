"""Truncated proper orthogonal decomposition of centered snapshot matrices.

The thin SVD is computed through the Gram matrix of the smaller dimension
(method of snapshots), which is the cheap route when the number of snapshots
is far below the number of spatial DOFs. The recovered left vectors are
polished with a QR factorization plus a small dense SVD so that both factor
matrices are orthonormal to machine precision even when the spectrum spans
many orders of magnitude.
"""

from dataclasses import dataclass

import numpy as np

from . import containers as io
from .errors import NumericalError, ValidationError
from .snapshot import CenteredSet, SnapshotSet

POD_MAGIC = b"POD1"

#: singular values below this fraction of the largest are treated as zero
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class ThinSvd:
    """Rank-revealing thin SVD: ``input = left @ diag(singular) @ right.T``."""

    left: np.ndarray  # (N, R)
    singular: np.ndarray  # (R,), nonincreasing, positive
    right: np.ndarray  # (M, R)

    def __post_init__(self):
        s = np.asarray(self.singular, dtype=np.float64)
        object.__setattr__(self, "singular", s)
        object.__setattr__(self, "left", np.asarray(self.left, dtype=np.float64))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=np.float64))
        if np.any(np.diff(s) > 0):
            raise ValueError("singular values must be nonincreasing")
        if s.size and s[-1] <= 0:
            raise ValueError("singular values must be positive")
        if self.left.shape[1] != s.size or self.right.shape[1] != s.size:
            raise ValueError("factor widths do not match the singular values")

    @property
    def rank(self) -> int:
        return self.singular.size


@dataclass(frozen=True)
class PodBasis:
    """Truncated POD basis plus the temporal mean it was centered against."""

    modes: np.ndarray  # (N, m), orthonormal columns
    singular: np.ndarray  # (m,)
    mean: np.ndarray  # (N,)
    tolerance_used: float | None = None
    component: str = "u"

    @property
    def m(self) -> int:
        return self.modes.shape[1]

    @property
    def mesh_size(self) -> int:
        return self.modes.shape[0]


@dataclass(frozen=True)
class LatentTrajectory:
    """Time-indexed modal coefficients; one column per time instant."""

    coeffs: np.ndarray  # (m, M)
    times: np.ndarray  # (M,)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "times", times)
        if coeffs.ndim != 2:
            raise ValidationError("latent coefficients must be a 2-D matrix")
        if times.shape != (coeffs.shape[1],):
            raise ValidationError("times length does not match coefficient columns")
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("latent coefficients contain non-finite values")

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_steps(self) -> int:
        return self.coeffs.shape[1]


def _gram_svd(s: np.ndarray):
    """Thin SVD of s (n x m, m <= n) via eigendecomposition of s.T @ s."""
    try:
        w, v = np.linalg.eigh(s.T @ s)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Gram eigendecomposition failed: {exc}") from exc
    w = np.maximum(w[::-1], 0.0)
    v = v[:, ::-1]
    sigma = np.sqrt(w)
    if sigma.size == 0 or sigma[0] == 0.0:
        n, m = s.shape
        return np.zeros((n, 0)), np.zeros(0), np.zeros((m, 0))
    keep = sigma > RANK_RTOL * sigma[0]
    sigma, v = sigma[keep], v[:, keep]

    # Recovered left vectors lose orthogonality roughly as sigma[0]/sigma[i];
    # polish with QR and an exact small SVD of the triangular residue.
    u0 = (s @ v) / sigma
    q, r = np.linalg.qr(u0)
    p, d, wt = np.linalg.svd(r * sigma)
    left = q @ p
    right = v @ wt.T
    keep = d > RANK_RTOL * d[0]
    return left[:, keep], d[keep], right[:, keep]


def _signed(left: np.ndarray, sigma: np.ndarray, right: np.ndarray) -> ThinSvd:
    """Fix the sign ambiguity: the largest-magnitude entry of each left
    vector (lowest index on ties) is made nonnegative."""
    for j in range(sigma.size):
        i = int(np.argmax(np.abs(left[:, j])))
        if left[i, j] < 0:
            left[:, j] = -left[:, j]
            right[:, j] = -right[:, j]
    return ThinSvd(left, sigma, right)


def thin_svd_matrix(s: np.ndarray) -> ThinSvd:
    """Deterministic thin SVD of an arbitrary real matrix."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, m = s.shape
    if m <= n:
        left, sigma, right = _gram_svd(s)
    else:
        right, sigma, left = _gram_svd(s.T)
    return _signed(left, sigma, right)


def thin_svd(centered: CenteredSet) -> ThinSvd:
    return thin_svd_matrix(centered.deviations)


def residual_energies(singular: np.ndarray) -> np.ndarray:
    """Entry i: fraction of squared singular values discarded when keeping
    the first i+1 modes. The final entry is exactly zero."""
    sq = singular**2
    tail = np.concatenate([np.cumsum(sq[::-1])[::-1][1:], [0.0]])
    return tail / sq.sum()


def energy_spectrum(svd: ThinSvd) -> np.ndarray:
    """Cumulative energy fractions; the final entry equals 1."""
    sq = svd.singular**2
    cum = np.cumsum(sq)
    return cum / cum[-1]


def truncate(
    svd: ThinSvd,
    mean: np.ndarray,
    rank: int | None = None,
    tol: float | None = None,
    component: str = "u",
) -> PodBasis:
    """Keep the first ``rank`` modes, or the smallest count whose residual
    energy fraction is at most ``tol``."""
    if (rank is None) == (tol is None):
        raise ValueError("specify exactly one of rank or tol")
    if svd.rank == 0:
        raise ValueError("cannot truncate a rank-zero decomposition")
    if rank is not None:
        if not 1 <= rank <= svd.rank:
            raise ValueError(
                f"rank must be in [1, {svd.rank}], got {rank}"
            )
        m = rank
    else:
        if not 0.0 < tol < 1.0:
            raise ValueError(f"energy tolerance must be in (0, 1), got {tol}")
        m = int(np.argmax(residual_energies(svd.singular) <= tol)) + 1
    return PodBasis(
        svd.left[:, :m].copy(),
        svd.singular[:m].copy(),
        np.asarray(mean, dtype=np.float64),
        tolerance_used=tol,
        component=component,
    )


def project(basis: PodBasis, centered: CenteredSet) -> LatentTrajectory:
    """Modal coefficients of the deviations: ``modes.T @ deviations``."""
    if basis.mesh_size != centered.mesh_size:
        raise ValueError(
            f"basis has {basis.mesh_size} DOFs, data has {centered.mesh_size}"
        )
    return LatentTrajectory(basis.modes.T @ centered.deviations, centered.times)


def reconstruct(basis: PodBasis, traj: LatentTrajectory) -> SnapshotSet:
    """Lift latent coefficients back to the full space and re-add the mean."""
    if traj.dim != basis.m:
        raise ValueError(
            f"trajectory has {traj.dim} coefficients, basis rank is {basis.m}"
        )
    data = basis.mean[:, None] + basis.modes @ traj.coeffs
    return SnapshotSet(data, traj.times, basis.component)


# ---------------------------------------------------------------------------
# POD1 container: magic, u32 version=1, u32 N, u32 m, u16 label, f64
# tolerance (NaN when truncated by rank), mean (N), singular values (m),
# modes (N x m column-major).
# ---------------------------------------------------------------------------


def save_basis(basis: PodBasis, path) -> None:
    with open(path, "wb") as f:
        io.write_header(f, POD_MAGIC)
        io.write_u32(f, basis.mesh_size)
        io.write_u32(f, basis.m)
        io.write_label(f, basis.component)
        io.write_f64(f, np.nan if basis.tolerance_used is None else basis.tolerance_used)
        io.write_f64_vector(f, basis.mean)
        io.write_f64_vector(f, basis.singular)
        io.write_f64_matrix(f, basis.modes)


def load_basis(path) -> PodBasis:
    with open(path, "rb") as f:
        io.read_header(f, POD_MAGIC)
        n = io.read_u32(f)
        m = io.read_u32(f)
        label = io.read_label(f)
        tol = io.read_f64(f)
        mean = io.read_f64_vector(f, n)
        singular = io.read_f64_vector(f, m)
        modes = io.read_f64_matrix(f, n, m)
        io.expect_eof(f, "POD1")
    return PodBasis(
        modes, singular, mean,
        tolerance_used=None if np.isnan(tol) else tol,
        component=label,
    )
