"""Spectral transformation functions s(lambda).

Two solver-friendly forms are supported:

* `PolyTransform` -- ``s(l) = sum_{p=1}^q pi_p l^p`` with ``pi_p >= 0``.
* `InverseTransform` -- ``1/s(l) = sum_{p=0}^{q-1} xi_p l^(p-r)``, i.e.
  ``s(l) = l^r / rho(l)`` with ``rho(l) = sum_p xi_p l^p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from numpy.polynomial import polynomial as P


class TransformDomainError(ValueError):
    """Transform evaluated or constructed outside its valid spectral range."""


def _min_on_interval(coeffs, lo, hi) -> float:
    """Exact minimum of a polynomial (ascending coeffs) over ``[lo, hi]``."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=np.float64), "b")
    if len(coeffs) == 0:
        return 0.0
    pts = [lo, hi]
    if len(coeffs) > 2:
        for r in P.polyroots(P.polyder(coeffs)):
            if abs(r.imag) < 1e-12 and lo < r.real < hi:
                pts.append(r.real)
    return float(min(P.polyval(p, coeffs) for p in pts))


@dataclass(frozen=True)
class PolyTransform:
    coeffs: tuple  # pi_1, ..., pi_q

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if not c:
            raise ValueError("need at least one coefficient")
        if any(x < 0 for x in c):
            raise ValueError(f"polynomial coefficients must be nonnegative, got {c}")
        if not any(x > 0 for x in c):
            raise ValueError("at least one coefficient must be positive")
        while c[-1] == 0:
            c = c[:-1]
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def monomial(cls, p: int) -> "PolyTransform":
        if p < 1:
            raise ValueError(f"power must be >= 1, got {p}")
        return cls((0.0,) * (p - 1) + (1.0,))

    @property
    def q(self) -> int:
        return len(self.coeffs)

    def pi(self, p: int) -> float:
        """Coefficient of ``l^p`` (1-based; zero beyond the degree)."""
        return self.coeffs[p - 1] if 1 <= p <= self.q else 0.0

    def __str__(self):
        nz = [p for p in range(1, self.q + 1) if self.pi(p)]
        if nz == [self.q] and self.pi(self.q) == 1.0:
            return f"poly:p={self.q}"
        return "poly:coeffs=" + ",".join(repr(c) for c in self.coeffs)


@dataclass(frozen=True)
class InverseTransform:
    xi: tuple  # xi_0, ..., xi_{q-1}
    r: int = 1
    lambda_max: float = 1.0

    def __post_init__(self):
        xi = tuple(float(x) for x in self.xi)
        object.__setattr__(self, "xi", xi)
        if not xi:
            raise ValueError("need at least one coefficient")
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"r must be a positive integer, got {self.r}")
        object.__setattr__(self, "r", int(self.r))
        if not self.lambda_max > 0:
            raise ValueError("lambda_max must be positive")
        if xi[0] <= 0:
            raise TransformDomainError(f"xi_0 must be positive, got {xi[0]}")
        # rho > 0 on (0, lambda_max]; rho(0) = xi_0 > 0 already.
        if _min_on_interval(xi, 0.0, self.lambda_max) <= 0:
            raise TransformDomainError(
                f"rho(l) = sum xi_p l^p is not positive on (0, {self.lambda_max}]")
        # s' >= 0  <=>  r*rho(l) - l*rho'(l) >= 0.
        rho = np.array(xi)
        slope = P.polysub(self.r * rho, P.polymulx(P.polyder(rho)))
        if len(rho) > 1 and _min_on_interval(slope, 0.0, self.lambda_max) < -1e-12:
            raise TransformDomainError(
                f"s(l) is not monotone on [0, {self.lambda_max}]")

    @property
    def q(self) -> int:
        return len(self.xi)

    def rho(self, lam):
        return P.polyval(lam, np.array(self.xi))

    def __str__(self):
        if self.q == 2 and self.r == 1 and self.xi[0] == 1.0 and self.xi[1] < 0:
            return f"invlap:eta={-self.xi[1]!r}"
        return f"inverse:xi={','.join(repr(x) for x in self.xi)};r={self.r}"


Transform = Union[PolyTransform, InverseTransform]


class TopD(NamedTuple):
    """Marker for the kernel-PCA path (truncation is not a real transform)."""

    d: int

    def __str__(self):
        return f"topd:d={self.d}"


def eval_s(t: Transform, lam: float) -> float:
    """Evaluate ``s(lam)`` for ``lam >= 0``."""
    lam = float(lam)
    if lam < 0:
        raise TransformDomainError(f"eigenvalue must be nonnegative, got {lam}")
    return float(spectral_values(t, np.array([lam]))[0])


def spectral_values(t: Transform, lam) -> np.ndarray:
    """Vectorized ``s`` without the sign precondition.

    Used on empirical spectra, which may hold negative eigenvalues (the
    normalized adjacency of a bipartite graph, for instance).
    """
    lam = np.asarray(lam, dtype=np.float64)
    if isinstance(t, PolyTransform):
        return lam * P.polyval(lam, np.array(t.coeffs))
    rho = t.rho(lam)
    if np.any((rho <= 0) & (lam != 0)):
        raise TransformDomainError("rho(l) <= 0 inside the spectrum")
    out = np.zeros_like(lam)
    nz = lam != 0
    out[nz] = lam[nz] ** t.r / rho[nz]
    return out


def tail_values(t: Transform, lam) -> np.ndarray:
    """``h(l) = (s(l) - pi_1 l) / l^2``, the multi-hop part of ``s``.

    For a polynomial this is ``sum_{p>=2} pi_p l^(p-2)``; for the inverse
    form it is computed without cancellation.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if isinstance(t, PolyTransform):
        tail = np.array(t.coeffs[1:]) if t.q > 1 else np.zeros(1)
        return P.polyval(lam, tail)
    rho = t.rho(lam)
    if t.r >= 2:
        return lam ** (t.r - 2) / rho
    # r = 1: s(l) - l/xi_0 = -l^2 rho_1(l) / (xi_0 rho(l)), rho_1 = (rho - xi_0)/l
    rho1 = P.polyval(lam, np.array(t.xi[1:])) if t.q > 1 else np.zeros_like(lam)
    return -rho1 / (t.xi[0] * rho)


def linear_coefficient(t: Transform) -> float:
    """``pi_1 = s'(0)``."""
    if isinstance(t, PolyTransform):
        return t.pi(1)
    return 1.0 / t.xi[0] if t.r == 1 else 0.0


def apply_to_spectrum(t: Transform, eigenvalues) -> np.ndarray:
    ev = np.asarray(eigenvalues, dtype=np.float64)
    if np.any(ev < 0):
        raise TransformDomainError("eigenvalues must be nonnegative")
    return spectral_values(t, ev)


def inverse_laplacian(eta: float, lambda_max: float = 1.0) -> InverseTransform:
    """``s(l) = l / (1 - eta l)``; requires ``0 < eta < 1/lambda_max``."""
    if not 0 < eta < 1.0 / lambda_max:
        raise TransformDomainError(
            f"eta must lie in (0, {1.0 / lambda_max}) for lambda_max={lambda_max}, got {eta}")
    return InverseTransform((1.0, -float(eta)), r=1, lambda_max=lambda_max)


def parse_transform(spec: str, lambda_max: float = 1.0):
    """Parse ``poly:p=8``, ``poly:coeffs=0.5,0.5``, ``invlap:eta=0.99``,
    ``base`` or ``topd:d=128``."""
    spec = spec.strip()
    kind, _, rest = spec.partition(":")
    args = {}
    for part in filter(None, rest.split(";")):
        k, _, v = part.partition("=")
        args[k.strip()] = v.strip()
    kind = kind.lower()
    try:
        if kind == "base":
            return PolyTransform((1.0,))
        if kind == "poly":
            if "p" in args:
                return PolyTransform.monomial(int(args["p"]))
            return PolyTransform(tuple(float(c) for c in args["coeffs"].split(",")))
        if kind == "invlap":
            return inverse_laplacian(float(args["eta"]), lambda_max)
        if kind == "inverse":
            xi = tuple(float(c) for c in args["xi"].split(","))
            return InverseTransform(xi, int(args.get("r", 1)), lambda_max)
        if kind == "topd":
            return TopD(int(args["d"]))
    except KeyError as exc:
        raise ValueError(f"transform {spec!r} is missing parameter {exc.args[0]}") from None
    raise ValueError(f"unknown transform {spec!r}")
