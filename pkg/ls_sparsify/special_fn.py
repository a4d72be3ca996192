# ls_sparsify/special_fn.py
"""
Free-space Green's functions and the order-zero Bessel/Hankel functions
behind the 2D kernel.

J0 and Y0 follow the Cephes rational approximations: a rational fit on
[0, 5] (with the two leading zeros of J0 factored out) and the Hankel
asymptotic expansion with degree 6/6 and 7/7 rational corrections beyond.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class BesselDomainError(ValueError):
    """Argument outside the domain of a special function."""


@dataclass(frozen=True)
class GreenKind:
    dim: int
    omega: float

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"Error: dim must be 2 or 3, got {self.dim}")
        if not math.isfinite(self.omega) or self.omega < 0:
            raise ValueError(f"Error: omega must be finite and >= 0, got {self.omega}")
        if self.dim == 2 and self.omega == 0:
            raise ValueError("Error: the 2D kernel needs omega > 0")

    @property
    def is_laplace(self):
        return self.omega == 0


SQ2OPI = 7.9788456080286535587989e-1  # sqrt(2/pi)
PIO4 = 7.85398163397448309616e-1  # pi/4
TWOOPI = 6.36619772367581343075535e-1  # 2/pi

# squares of the first two zeros of J0
DR1 = 5.78318596294678452118e0
DR2 = 3.04712623436620863991e1

RP = np.asarray([
    -4.79443220978201773821e9,
    1.95617491946556577543e12,
    -2.49248344360967716204e14,
    9.70862251047306323952e15,
])
RQ = np.asarray([
    4.99563147152651017219e2,
    1.73785401676374683123e5,
    4.84409658339962045305e7,
    1.11855537045356834862e10,
    2.11277520115489217587e12,
    3.10518229857422583814e14,
    3.18121955943204943306e16,
    1.71086294081043136091e18,
])

PP = np.asarray([
    7.96936729297347051624e-4,
    8.28352392107440799803e-2,
    1.23953371646414299388e0,
    5.44725003058768775090e0,
    8.74716500199817011941e0,
    5.30324038235394892183e0,
    9.99999999999999997821e-1,
])
PQ = np.asarray([
    9.24408810558863637013e-4,
    8.56288474354474431428e-2,
    1.25352743901058953537e0,
    5.47097740330417105182e0,
    8.76190883237069594232e0,
    5.30605288235394617618e0,
    1.00000000000000000218e0,
])
QP = np.asarray([
    -1.13663838898469149931e-2,
    -1.28252718670509318512e0,
    -1.95539544257735972385e1,
    -9.32060152123768231369e1,
    -1.77681167980488050595e2,
    -1.47077505154951170175e2,
    -5.14105326766599330220e1,
    -6.05014350600728481186e0,
])
QQ = np.asarray([
    6.43178256118178023184e1,
    8.56430025976980587198e2,
    3.88240183605401609683e3,
    7.24046774195652478189e3,
    5.93072701187316984827e3,
    2.06209331660327847417e3,
    2.42005740240291393179e2,
])

YP = np.asarray([
    1.55924367855235737965e4,
    -1.46639295903971606143e7,
    5.43526477051876500413e9,
    -9.82136065717911466409e11,
    8.75906394395366999549e13,
    -3.46628303384729719441e15,
    4.42733268572569800351e16,
    -1.84950800436986690637e16,
])
YQ = np.asarray([
    1.04128353664259848412e3,
    6.26107330137134956842e5,
    2.68919633393814121987e8,
    8.64002487103935000337e10,
    2.02979612750105546709e13,
    3.17157752842975028269e15,
    2.50596256172653059228e17,
])

# below this J0 is 1 - x^2/4 to double precision
SMALL_ARG = 1e-5
# regime split between the rational fit and the asymptotic expansion
SPLIT_ARG = 5.0


def polevl(x, coef):
    """Evaluate coef[0]*x^N + ... + coef[N]."""
    ans = np.full_like(x, coef[0])
    for c in coef[1:]:
        ans = ans * x + c
    return ans


def p1evl(x, coef):
    """Evaluate x^N + coef[0]*x^(N-1) + ... + coef[N-1] (implicit leading 1)."""
    ans = x + coef[0]
    for c in coef[1:]:
        ans = ans * x + c
    return ans


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise BesselDomainError("Error: Bessel arguments must be finite and > 0")
    return x


def _asymptotic(x):
    """Modulus/phase pieces of the Hankel expansion for x > 5."""
    w = 5.0 / x
    z = 25.0 / (x * x)
    p = polevl(z, PP) / polevl(z, PQ)
    q = polevl(z, QP) / p1evl(z, QQ)
    xn = x - PIO4
    scale = SQ2OPI / np.sqrt(x)
    j0 = scale * (p * np.cos(xn) - w * q * np.sin(xn))
    y0 = scale * (p * np.sin(xn) + w * q * np.cos(xn))
    return j0, y0


def _j0_small(x):
    z = x * x
    tiny = x < SMALL_ARG
    fit = (z - DR1) * (z - DR2) * polevl(z, RP) / p1evl(z, RQ)
    return np.where(tiny, 1.0 - z / 4.0, fit)


def bessel_j0_y0(x):
    """
    Evaluate J0(x) and Y0(x) for x > 0.

    Args:
        x: positive finite scalar or array

    Returns:
        (J0, Y0) with the shape of x (floats for scalar input)
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(_check_domain(x))

    j0 = np.empty_like(x)
    y0 = np.empty_like(x)

    small = x <= SPLIT_ARG
    if np.any(small):
        xs = x[small]
        j0s = _j0_small(xs)
        z = xs * xs
        j0[small] = j0s
        y0[small] = polevl(z, YP) / p1evl(z, YQ) + TWOOPI * np.log(xs) * j0s

    large = ~small
    if np.any(large):
        j0[large], y0[large] = _asymptotic(x[large])

    if scalar:
        return float(j0[0]), float(y0[0])
    return j0, y0


def hankel1_0(x):
    """H^1_0(x) = J0(x) + i Y0(x)."""
    j0, y0 = bessel_j0_y0(x)
    return j0 + 1j * np.asarray(y0) if np.ndim(j0) else complex(j0, y0)


def green(kind: GreenKind, r):
    """
    Free-space Green's function of -(Laplacian + omega^2) at distance r.

    dim=2: (i/4) H^1_0(omega r); dim=3: exp(i omega r) / (4 pi r),
    which is 1 / (4 pi r) for omega = 0.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise BesselDomainError("Error: green() needs finite distances r > 0")

    if kind.dim == 2:
        j0, y0 = bessel_j0_y0(kind.omega * r)
        values = 0.25j * (j0 + 1j * y0)
    elif kind.is_laplace:
        values = (1.0 / (4.0 * np.pi * r)).astype(complex)
    else:
        values = np.exp(1j * kind.omega * r) / (4.0 * np.pi * r)

    return complex(values[0]) if scalar else values
