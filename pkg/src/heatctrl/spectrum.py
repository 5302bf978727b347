"""Eigen-system of d^2/dx^2 on (0,1) with y'(0)=0 and y'(1)+alpha*y(1)=0.

The eigenfunctions are cos(rho_n x) where the rho_n are the non-negative
solutions of ``rho*tan(rho) = alpha``, one per branch of the tangent:
rho_n lies in ((n-1)*pi, (n-1)*pi + pi/2) for alpha > 0.  For alpha = 0 the
roots collapse to (n-1)*pi, including the constant mode rho_1 = 0 whose
normalizer is 1 instead of 1/2.

Numerical note: for large n the roots sit close to multiples of pi, and the
residual rho*tan(rho) - alpha evaluated at a rounded double loses about
rho^2 * eps of absolute accuracy (~2e-12 at n = 64).  The basis therefore
stores the branch offsets theta_n = rho_n - (n-1)*pi as the authoritative
quantities; since tan has period pi, tan(rho_n) == tan(theta_n) exactly, and
all residuals and normalizers are evaluated through the offsets.  This keeps
root residuals at the 1e-15 level across all branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_BRACKET_SHRINK = 1e-9 * math.pi  # keep away from the tan pole at (n-1/2)*pi
_MAX_ROOT_ITERS = 200
DEFAULT_TOL = 1e-13
DEFAULT_COUNT = 64


class SpectrumError(RuntimeError):
    """Eigenvalue computation failed (carries the offending branch index)."""

    def __init__(self, message: str, branch: int | None = None):
        self.branch = branch
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Truncated cosine eigenbasis.

    ``offsets[n] = rho_n - (n)*pi`` (0-based n) are the authoritative root
    locations within their branches; ``rhos`` are the rounded absolute roots
    kept for convenience.  ``normalizers`` are N_n = int_0^1 cos^2(rho_n x) dx.
    """

    alpha: float
    count: int
    rhos: np.ndarray
    offsets: np.ndarray
    normalizers: np.ndarray
    residual_tol: float

    def __post_init__(self):
        if self.alpha < 0:
            raise SpectrumError(f"alpha must be >= 0, got {self.alpha}")
        if self.count != len(self.rhos):
            raise SpectrumError("count does not match number of roots")

    @property
    def rho_sq(self) -> np.ndarray:
        return self.rhos**2

    def branch_indices(self) -> np.ndarray:
        return np.arange(self.count)

    def root_residuals(self) -> np.ndarray:
        """|rho_n tan(rho_n) - alpha| via exact branch reduction of tan."""
        if self.count == 0:
            return np.zeros(0)
        if self.alpha == 0.0:
            return np.zeros(self.count)
        rho = self.branch_indices() * math.pi + self.offsets
        return np.abs(rho * np.tan(self.offsets) - self.alpha)

    def normalizers_alt(self) -> np.ndarray:
        """N_n from the second closed form 1/2 + sin^2(rho_n)/(2 alpha)."""
        if self.alpha == 0.0:
            raise SpectrumError("alternative normalizer formula needs alpha > 0")
        return 0.5 + np.sin(self.offsets) ** 2 / (2.0 * self.alpha)

    def boundary_factors(self) -> np.ndarray:
        """cos(rho_n), evaluated through the branch offsets."""
        signs = np.where(self.branch_indices() % 2 == 0, 1.0, -1.0)
        return signs * np.cos(self.offsets)

    def eigenfunctions(self, x) -> np.ndarray:
        """Matrix cos(rho_n * x_j), shape (count, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.cos(np.outer(self.rhos, x))


def _branch_root(alpha: float, branch: int, tol: float) -> float:
    """Solve ((branch*pi) + theta) * tan(theta) = alpha for theta in (0, pi/2).

    Bisection from the branch midpoint down to a narrow bracket, then
    safeguarded Newton until the residual drops below ``tol``.
    """
    base = branch * math.pi

    def f(theta: float) -> float:
        return (base + theta) * math.tan(theta) - alpha

    def fprime(theta: float) -> float:
        t = math.tan(theta)
        return t + (base + theta) * (1.0 + t * t)

    lo = _BRACKET_SHRINK
    hi = math.pi / 2.0 - _BRACKET_SHRINK
    flo, fhi = f(lo), f(hi)
    if not (flo < 0.0 < fhi):
        raise SpectrumError(
            f"branch {branch}: no sign change in shrunken bracket", branch=branch
        )

    theta = 0.5 * (lo + hi)
    for _ in range(60):  # bisection: narrow the bracket before polishing
        val = f(theta)
        if val == 0.0:
            return theta
        if val < 0.0:
            lo = theta
        else:
            hi = theta
        theta = 0.5 * (lo + hi)
        if hi - lo < 1e-6:
            break

    for _ in range(_MAX_ROOT_ITERS):
        val = f(theta)
        if abs(val) <= tol:
            return theta
        if val < 0.0:
            lo = theta
        else:
            hi = theta
        step = val / fprime(theta)
        candidate = theta - step
        if not (lo < candidate < hi):  # Newton left the bracket: bisect
            candidate = 0.5 * (lo + hi)
        theta = candidate
    raise SpectrumError(
        f"branch {branch}: residual did not reach {tol:g} "
        f"within {_MAX_ROOT_ITERS} iterations",
        branch=branch,
    )


def compute_eigenvalues(
    alpha: float, count: int = DEFAULT_COUNT, tol: float = DEFAULT_TOL
) -> EigenBasis:
    """Compute the first ``count`` eigen-roots and normalizers.

    Parameters
    ----------
    alpha : Robin coefficient, >= 0.
    count : number of modes to retain, >= 1.
    tol   : accepted residual |rho_n tan(rho_n) - alpha|.

    For alpha = 0 the closed form rho_n = (n-1)*pi is used, with normalizer 1
    for the constant mode and 1/2 otherwise.
    """
    if alpha < 0:
        raise SpectrumError(f"alpha must be >= 0, got {alpha}")
    if count < 1:
        raise SpectrumError(f"count must be >= 1, got {count}")
    if not tol > 0:
        raise SpectrumError(f"tol must be positive, got {tol}")

    branches = np.arange(count)
    if alpha == 0.0:
        offsets = np.zeros(count)
        rhos = branches * math.pi
        normalizers = np.full(count, 0.5)
        normalizers[0] = 1.0
        return EigenBasis(
            alpha=0.0, count=count, rhos=rhos, offsets=offsets,
            normalizers=normalizers, residual_tol=tol,
        )

    offsets = np.array([_branch_root(alpha, n, tol) for n in range(count)])
    rhos = branches * math.pi + offsets
    # sin(2 rho_n) == sin(2 theta_n) exactly (period pi of the branch shift)
    normalizers = 0.5 + np.sin(2.0 * offsets) / (4.0 * rhos)
    return EigenBasis(
        alpha=alpha, count=count, rhos=rhos, offsets=offsets,
        normalizers=normalizers, residual_tol=tol,
    )


def tail_bound(basis: EigenBasis, time_gap: float) -> float:
    """Upper bound on |sum_{n>N} e^{-rho_n^2 * time_gap} / N_n|.

    Uses rho_n >= (n-1)*pi and N_n >= 1/2, so the majorant is
    2 * sum_{m>=N} exp(-(m*pi)^2 * time_gap), summed until terms underflow.
    Monotone decreasing in both the retained mode count and the gap.
    """
    if not time_gap > 0:
        raise SpectrumError(f"time_gap must be positive, got {time_gap}")
    total = 0.0
    m = basis.count
    block = 4096
    while True:
        ms = np.arange(m, m + block, dtype=float)
        terms = np.exp(-((ms * math.pi) ** 2) * time_gap)
        total += float(terms.sum())
        if terms[-1] == 0.0:
            break
        m += block
    return 2.0 * total
