"""Compactly supported Wendland radial kernels and their radial derivatives.

A Wendland kernel of dimension parameter ``d`` and smoothness parameter
``tau`` is a polynomial on [0, 1] and identically zero outside.  The
polynomial coefficients are built with exact rational arithmetic from the
classical recursion, so smoothness at the support boundary can be asserted
symbolically.  Evaluation uses plain float Horner recurrences in the scaled
radius r/rho.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, floor

import numpy as np

# Beyond this polynomial degree double-precision Horner evaluation starts to
# lose accuracy near r = 1; fail loudly instead of degrading silently.
DEGREE_CAP = 64


class KernelError(ValueError):
    """Raised for invalid kernel parameters or unsupported evaluations."""


def _poly_derivative(coeffs: list[Fraction]) -> list[Fraction]:
    return [j * c for j, c in enumerate(coeffs)][1:]


def _poly_divide_by_r(coeffs: list[Fraction]) -> list[Fraction] | None:
    """Divide sum c_j r^j by r exactly; None if the constant term is nonzero."""
    if not coeffs:
        return []
    if coeffs[0] != 0:
        return None
    return coeffs[1:]


def _poly_eval_fraction(coeffs: list[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _horner(coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(s)
    for c in coeffs[::-1]:
        acc = acc * s + c
    return acc


@dataclass(frozen=True)
class WendlandKernel:
    """A (d, tau) Wendland kernel with derived radial derivative polynomials.

    The kernel is Phi(x) = p(|x|/rho) / normalizer for |x| < rho and 0
    otherwise, normalized by default so Phi(0) = 1.  ``p1`` and ``p2`` are
    the exact polynomial representations of phi'(r)/r and (1/r) d(phi'/r)/dr
    on the unit support, before the 1/rho scaling.
    """

    d: int
    tau: int
    nu: int
    p_coeffs: tuple  # exact Fractions, ascending powers, unnormalized
    p1_coeffs: tuple | None
    p2_coeffs: tuple | None
    support_scale: float = 1.0
    normalizer: float = 1.0
    # float copies (already divided by the normalizer) used for evaluation
    _pf: np.ndarray = field(default=None, repr=False, compare=False)
    _p1f: np.ndarray = field(default=None, repr=False, compare=False)
    _p2f: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def degree(self) -> int:
        return len(self.p_coeffs) - 1

    # -- evaluation ---------------------------------------------------------

    def _check_r(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise KernelError("radius must be non-negative")
        return r

    def phi(self, r):
        """Radial profile phi(r); zero for r >= support_scale."""
        r = self._check_r(r)
        s = r / self.support_scale
        out = np.where(s < 1.0, _horner(self._pf, np.minimum(s, 1.0)), 0.0)
        return out if out.ndim else float(out)

    def phi1(self, r):
        """phi'(r)/r, continuous at r = 0 (evaluated as a polynomial)."""
        if self._p1f is None:
            raise KernelError("phi1 requires tau >= 1")
        r = self._check_r(r)
        s = r / self.support_scale
        val = _horner(self._p1f, np.minimum(s, 1.0)) / self.support_scale**2
        out = np.where(s < 1.0, val, 0.0)
        return out if out.ndim else float(out)

    def phi2(self, r):
        """(1/r) d(phi1)/dr, continuous at r = 0."""
        if self._p2f is None:
            raise KernelError("phi2 requires tau >= 2")
        r = self._check_r(r)
        s = r / self.support_scale
        val = _horner(self._p2f, np.minimum(s, 1.0)) / self.support_scale**4
        out = np.where(s < 1.0, val, 0.0)
        return out if out.ndim else float(out)

    def kernel_value(self, x) -> float:
        x = self._check_dim(x)
        return float(self.phi(np.linalg.norm(x)))

    def kernel_gradient(self, x) -> np.ndarray:
        """Gradient of Phi at x: phi1(|x|) * x."""
        x = self._check_dim(x)
        return self.phi1(np.linalg.norm(x)) * x

    def kernel_hessian(self, x) -> np.ndarray:
        """Hessian of Phi at x: phi1(|x|) I + phi2(|x|) x x^T."""
        x = self._check_dim(x)
        r = np.linalg.norm(x)
        return self.phi1(r) * np.eye(self.d) + self.phi2(r) * np.outer(x, x)

    def _check_dim(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.d,):
            raise KernelError(f"expected a {self.d}-vector, got shape {x.shape}")
        return x

    # -- exact coefficient views --------------------------------------------

    def normalized_rational_coeffs(self) -> list[Fraction]:
        p0 = self.p_coeffs[0]
        return [c / p0 for c in self.p_coeffs]


def _wendland_coefficients(nu: int, tau: int) -> list[Fraction]:
    """Coefficient recursion for the degree nu + 2*tau polynomial."""
    coeffs = [Fraction((-1) ** j * comb(nu, j)) for j in range(nu + 1)]
    for s in range(tau):
        nxt = [Fraction(0)] * (nu + 2 * s + 3)
        nxt[0] = sum(c / (j + 2) for j, c in enumerate(coeffs))
        nxt[1] = Fraction(0)
        for j in range(2, nu + 2 * s + 3):
            nxt[j] = -coeffs[j - 2] / j
        coeffs = nxt
    return coeffs


def build_kernel(d: int, tau: int, support_scale: float = 1.0) -> WendlandKernel:
    """Construct the (d, tau) Wendland kernel, normalized so phi(0) = 1.

    Coefficients are exact rationals; the smoothness conditions
    p^(k)(1) = 0 for k = 0..2*tau hold identically by construction and are
    re-checked here as a guard against recursion bugs.
    """
    if d < 1:
        raise KernelError("dimension d must be >= 1")
    if tau < 0:
        raise KernelError("smoothness tau must be >= 0")
    if support_scale <= 0:
        raise KernelError("support_scale must be positive")
    nu = floor(tau + d / 2 + 1)
    degree = nu + 2 * tau
    if degree > DEGREE_CAP:
        raise KernelError(
            f"polynomial degree {degree} exceeds cap {DEGREE_CAP}; "
            "reduce tau (double-precision evaluation would degrade)"
        )
    coeffs = _wendland_coefficients(nu, tau)

    q = list(coeffs)
    for k in range(2 * tau + 1):
        if _poly_eval_fraction(q, Fraction(1)) != 0:
            raise KernelError(
                f"smoothness violated: derivative {k} nonzero at support boundary"
            )
        q = _poly_derivative(q)

    p1 = _poly_divide_by_r(_poly_derivative(coeffs))
    p2 = _poly_divide_by_r(_poly_derivative(p1)) if p1 is not None else None

    p0 = coeffs[0]
    if p0 <= 0:
        raise KernelError("kernel value at 0 is not positive")

    def _floats(cs):
        return None if cs is None else np.array([float(c / p0) for c in cs])

    kernel = WendlandKernel(
        d=d,
        tau=tau,
        nu=nu,
        p_coeffs=tuple(coeffs),
        p1_coeffs=None if p1 is None else tuple(p1),
        p2_coeffs=None if p2 is None else tuple(p2),
        support_scale=float(support_scale),
        normalizer=float(p0),
    )
    object.__setattr__(kernel, "_pf", _floats(coeffs))
    object.__setattr__(kernel, "_p1f", _floats(p1))
    object.__setattr__(kernel, "_p2f", _floats(p2))
    return kernel
