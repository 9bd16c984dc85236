"""Rational Laplace-Stieltjes transforms and polynomial root utilities."""

from __future__ import annotations

import numpy as np

from . import jets
from .errors import RootFindingFailure


def polyroots(coeffs) -> np.ndarray:
    """All roots of a polynomial given by ascending coefficients.

    Companion-matrix eigenvalues followed by one Newton polish step.
    """
    c = np.asarray(coeffs, dtype=complex)
    c = np.trim_zeros(c, "b")
    if c.size <= 1:
        return np.zeros(0, dtype=complex)
    roots = np.roots(c[::-1])
    if not np.all(np.isfinite(roots)):
        raise RootFindingFailure(f"non-finite roots for coefficients {coeffs}")
    deriv = np.polynomial.polynomial.polyder(c)
    val = np.polynomial.polynomial.polyval(roots, c)
    dval = np.polynomial.polynomial.polyval(roots, deriv)
    safe = np.abs(dval) > 1e-30
    roots[safe] = roots[safe] - val[safe] / dval[safe]
    return roots


def poly_from_roots(roots, leading=1.0) -> np.ndarray:
    """Ascending coefficients of leading * prod (s - r)."""
    c = np.array([1.0 + 0j])
    for r in roots:
        c = np.convolve(c, np.array([-r, 1.0], dtype=complex))
    return leading * c


class RationalLST:
    """Ratio of two polynomials in s, coefficients stored ascending.

    Used both for proper transforms (value 1 at 0) and for auxiliary rational
    factors such as the service-linked exponents, where the value at 0 may be
    anything.  Evaluation is Horner's rule in complex (jet) arithmetic.
    """

    def __init__(self, num, den):
        self.num = np.asarray(num, dtype=complex)
        self.den = np.asarray(den, dtype=complex)
        if self.den.size == 0 or abs(np.polynomial.polynomial.polyval(0.0, self.den)) < 1e-300:
            raise ValueError("denominator must be nonzero at 0")

    def __call__(self, s: np.ndarray) -> np.ndarray:
        """Evaluate at a scalar jet (see marq.jets)."""
        return jets.div(jets.polyval(self.num, s), jets.polyval(self.den, s))

    def value(self, s: complex) -> complex:
        return complex(
            np.polynomial.polynomial.polyval(s, self.num)
            / np.polynomial.polynomial.polyval(s, self.den)
        )

    def poles(self) -> np.ndarray:
        return polyroots(self.den)

    def zeros(self) -> np.ndarray:
        return polyroots(self.num)

    def degree(self) -> tuple[int, int]:
        return (
            len(np.trim_zeros(self.num, "b")) - 1,
            len(np.trim_zeros(self.den, "b")) - 1,
        )

    @classmethod
    def exponential(cls, rate: float) -> "RationalLST":
        """LST rate/(rate+s) of an exponential random variable."""
        return cls([rate], [rate, 1.0])

    @classmethod
    def constant(cls, value: float = 1.0) -> "RationalLST":
        return cls([value], [1.0])

    def to_json_dict(self):
        return {
            "num": [[z.real, z.imag] for z in self.num],
            "den": [[z.real, z.imag] for z in self.den],
        }

    @classmethod
    def from_json(cls, obj, path=""):
        from .errors import ConfigError

        def _coeffs(key):
            raw = obj.get(key)
            if not isinstance(raw, list) or not raw:
                raise ConfigError(f"{path}.{key}: expected nonempty coefficient list")
            out = []
            for k, c in enumerate(raw):
                if isinstance(c, (int, float)):
                    out.append(complex(c))
                elif isinstance(c, list) and len(c) == 2:
                    out.append(complex(c[0], c[1]))
                else:
                    raise ConfigError(f"{path}.{key}[{k}]: expected number or [re, im]")
            return out

        return cls(_coeffs("num"), _coeffs("den"))

    def __repr__(self):
        return f"RationalLST(num={list(self.num)}, den={list(self.den)})"
