"""Entire functions used by the constructions.

Polynomials with radial-growth constants, genus-one products
``F(z) = z^m e^{q(z)} prod (1 - z/alpha_j)`` evaluated as ``log|F|`` with a
certified truncation bound, zero-counting functions, the exp-preimage
sequence and cross-ratios.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import mpmath
import numpy as np

from .errors import CapabilityError, DomainError, PoleError
from .metric import EUCLIDEAN, MetricKind, PointSet2D, Spherical, pair_distances

J_CAP = 10_000_000
_EVAL_CHUNK = 4_000_000  # matrix entries per evaluation block


# -- polynomials -------------------------------------------------------------------


@dataclass(frozen=True)
class PolynomialSpec:
    """``q(z) = a_0 + a_1 z + ... + a_d z^d`` with ``a_d != 0``."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(complex(a) for a in self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        if len(c) < 2:
            raise DomainError("polynomial degree must be at least 1")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return self.coeffs[-1]

    def __call__(self, z):
        return np.polyval(np.asarray(self.coeffs[::-1]), z)

    def to_text(self) -> str:
        return ",".join(_fmt_complex(a) for a in self.coeffs)

    @classmethod
    def parse(cls, text: str) -> "PolynomialSpec":
        return cls(tuple(complex(t.strip().replace(" ", "")) for t in text.split(",") if t.strip()))


def _fmt_complex(a: complex) -> str:
    if a.imag == 0:
        return repr(a.real)
    return repr(a).strip("()")


@dataclass(frozen=True)
class RadialGrowthConstants:
    C: float
    R0: float
    c0: float
    violations: int
    grid_shape: tuple


def _real_leading(q: PolynomialSpec) -> float:
    a = q.leading
    if a.imag != 0 or not a.real > 0:
        raise DomainError("leading coefficient must be real and positive")
    return a.real


def increment_real_part(q: PolynomialSpec, r, h):
    """``Re(q(r + h) - q(r))`` from the binomial expansion, without cancellation."""
    r = np.asarray(r, dtype=float)
    h = np.asarray(h, dtype=float)
    total = np.zeros(np.broadcast(r, h).shape)
    for k, a in enumerate(q.coeffs):
        if k == 0 or a.real == 0:
            continue
        diff = sum(comb(k, i) * r ** (k - i) * h ** i for i in range(1, k + 1))
        total = total + a.real * diff
    return total


def radial_growth_constants(q: PolynomialSpec, n_r: int = 50, n_h: int = 20) -> RadialGrowthConstants:
    """Constants with ``Re(q(r+h) - q(r)) >= c0 r^(d-1) h`` for ``r >= R0`` and ``h > 0``.

    ``C`` sums the moduli of the coefficients of ``q'`` below degree ``d - 1``,
    ``R0 = max(1, 2C/(d a_d))`` and ``c0 = d a_d / 2``.  The inequality is also
    checked on an ``n_r x n_h`` grid with ``r`` in ``[R0, 4 R0]`` and ``h`` in
    ``[1e-3, 1]``; the number of failing grid points is reported.
    """
    a_d = _real_leading(q)
    d = q.degree
    C = sum(abs((m + 1) * q.coeffs[m + 1]) for m in range(d - 1))
    R0 = max(1.0, 2 * C / (d * a_d))
    c0 = d * a_d / 2
    r = np.linspace(R0, 4 * R0, n_r)[:, None]
    h = np.geomspace(1e-3, 1.0, n_h)[None, :]
    lhs = increment_real_part(q, r, h)
    bad = int(np.count_nonzero(lhs < c0 * r ** (d - 1) * h))
    return RadialGrowthConstants(C=float(C), R0=float(R0), c0=float(c0), violations=bad,
                                 grid_shape=(n_r, n_h))


# -- zero sets ---------------------------------------------------------------------


def _count_increasing(term, R: float, guess: float) -> int:
    """``#{j >= 1 : term(j) < R}`` for an increasing positive ``term``."""
    n = max(0, int(math.floor(guess)))
    while n > 0 and term(n) >= R:
        n -= 1
    while term(n + 1) < R:
        n += 1
    return n


@dataclass(frozen=True)
class Geometric:
    """Zeros ``alpha_j = lam**j`` for ``j >= 1``."""

    lam: float

    def __post_init__(self):
        if not self.lam > 1:
            raise DomainError("geometric zeros need lambda > 1")

    finite = False

    def alpha(self, j):
        return np.asarray(self.lam, dtype=float) ** np.asarray(j, dtype=float)

    def tail(self, J):
        """``sum_{j > J} 1/alpha_j``, in closed form."""
        J = np.asarray(J, dtype=float)
        return self.lam ** (-J) / (self.lam - 1)

    def count_below(self, R: float) -> int:
        if R <= self.lam:
            return 0
        return _count_increasing(lambda j: self.lam ** j, R, math.log(R) / math.log(self.lam))

    def _j_guess(self, absz, tol):
        lam = self.lam
        j_tail = np.log(2 * absz / (tol * (lam - 1))) / math.log(lam)
        j_half = np.log(2 * absz) / math.log(lam) - 1
        return np.maximum(0, np.floor(np.maximum(j_tail, j_half))).astype(np.int64)

    def to_text(self) -> str:
        return f"geometric:{self.lam!r}"


@dataclass(frozen=True)
class Power:
    """Zeros ``alpha_j = scale * j**beta`` for ``j >= 1``."""

    beta: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.beta > 1:
            raise DomainError("power zeros need beta > 1 for a summable tail")
        if not self.scale > 0:
            raise DomainError("power zeros need a positive scale")

    finite = False

    def alpha(self, j):
        return self.scale * np.asarray(j, dtype=float) ** self.beta

    def tail(self, J):
        """Integral bound on ``sum_{j > J} 1/alpha_j``."""
        J = np.asarray(J, dtype=float)
        b = self.beta
        with np.errstate(divide="ignore"):
            t = np.where(J >= 1, np.maximum(J, 1) ** (1 - b) / (b - 1), b / (b - 1))
        return t / self.scale

    def count_below(self, R: float) -> int:
        if R <= self.scale:
            return 0
        return _count_increasing(lambda j: self.scale * j ** self.beta, R,
                                 (R / self.scale) ** (1 / self.beta))

    def _j_guess(self, absz, tol):
        b, s = self.beta, self.scale
        j_tail = (2 * absz / (tol * (b - 1) * s)) ** (1 / (b - 1))
        j_half = (2 * absz / s) ** (1 / b) - 1
        return np.maximum(0, np.floor(np.minimum(np.maximum(j_tail, j_half), 2.0 * J_CAP))).astype(np.int64)

    def to_text(self) -> str:
        return f"power:{self.beta!r}:{self.scale!r}"


@dataclass(frozen=True)
class Explicit:
    """A listed zero set, sorted by modulus.

    Without ``tail_bound`` the list is the whole zero set.  With it, the
    list is a prefix and ``tail_bound`` bounds ``sum 1/|alpha|`` over the
    unlisted zeros, each of which is assumed to be at least as large as the
    listed ones.
    """

    values: tuple
    tail_bound: float | None = None
    _moduli: np.ndarray = field(init=False, repr=False, compare=False)
    _suffix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray([complex(a) for a in self.values], dtype=np.complex128)
        if np.any(v == 0):
            raise DomainError("zero of the product factor cannot be 0 (use m for zeros at the origin)")
        if not np.all(np.isfinite(v)):
            raise DomainError("zeros must be finite")
        order = np.argsort(np.abs(v), kind="stable")
        v = v[order]
        object.__setattr__(self, "values", tuple(complex(a) for a in v))
        mod = np.abs(v)
        inv = 1 / mod
        suffix = np.concatenate([np.cumsum(inv[::-1])[::-1], [0.0]])
        if self.tail_bound is not None:
            if not self.tail_bound >= 0:
                raise DomainError("tail bound must be non-negative")
            suffix = suffix + self.tail_bound
        object.__setattr__(self, "_moduli", mod)
        object.__setattr__(self, "_suffix", suffix)

    @property
    def finite(self) -> bool:
        return self.tail_bound is None

    def alpha(self, j):
        j = np.asarray(j, dtype=np.int64)
        if np.any(j < 1) or np.any(j > len(self.values)):
            raise CapabilityError("zero index outside the listed prefix")
        return np.asarray(self.values)[j - 1]

    def tail(self, J):
        J = np.asarray(J, dtype=np.int64)
        return self._suffix[np.minimum(J, len(self.values))]

    def count_below(self, R: float) -> int:
        if not self.finite and len(self.values) and R > self._moduli[-1]:
            raise CapabilityError("count needs zeros beyond the listed prefix")
        return int(np.searchsorted(self._moduli, R, side="left"))

    def _j_guess(self, absz, tol):
        n = len(self.values)
        need = tol / (2 * absz)
        j_tail = np.searchsorted(-self._suffix, -need, side="right")
        j_half = np.searchsorted(self._moduli, 2 * absz, side="left")
        return np.minimum(np.maximum(j_tail, j_half), n).astype(np.int64)

    def to_text(self) -> str:
        return "explicit:" + "|".join(_fmt_complex(a) for a in self.values)


ZeroSetSpec = Geometric | Power | Explicit


def counting_function(zeros: ZeroSetSpec, R: float) -> int:
    """``m_R = #{alpha_j : |alpha_j| < R}``."""
    if not R > 0:
        raise DomainError("R must be positive")
    return zeros.count_below(R)


@dataclass(frozen=True)
class CountingSweep:
    radii: tuple
    counts: tuple
    density: tuple  # m_R / R
    decreasing: bool


def counting_sweep(zeros: ZeroSetSpec, t_max: int = 30, base: float = 2.0) -> CountingSweep:
    """``m_R / R`` on the grid ``R = base**t``, ``t = 1..t_max``."""
    radii = tuple(base ** t for t in range(1, t_max + 1))
    counts = tuple(counting_function(zeros, R) for R in radii)
    density = tuple(c / R for c, R in zip(counts, radii))
    tail = density[int(np.argmax(density)):]
    return CountingSweep(radii, counts, density, bool(all(b <= a for a, b in zip(tail, tail[1:]))))


def parse_zeros(text: str, tail: float | None = None) -> ZeroSetSpec:
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    if kind == "geometric":
        return Geometric(float(rest))
    if kind == "power":
        parts = rest.split(":")
        return Power(float(parts[0]), float(parts[1]) if len(parts) > 1 else 1.0)
    if kind == "explicit":
        return Explicit(tuple(complex(t) for t in rest.split("|") if t.strip()), tail)
    raise DomainError(f"unknown zero-set kind {kind!r}")


# -- genus-one products ------------------------------------------------------------


@dataclass(frozen=True)
class Genus1Function:
    """``F(z) = z^m e^{q(z)} prod_j (1 - z/alpha_j)``."""

    m: int
    q: PolynomialSpec
    zeros: ZeroSetSpec

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError("m must be a positive integer")

    def to_text(self) -> str:
        out = f"m={self.m}, q={self.q.to_text()}, zeros={self.zeros.to_text()}"
        if isinstance(self.zeros, Explicit) and self.zeros.tail_bound is not None:
            out += f", tail={self.zeros.tail_bound!r}"
        return out

    @classmethod
    def parse(cls, text: str) -> "Genus1Function":
        fields = {}
        for part in re.split(r",\s*(?=[A-Za-z_]+\s*=)", text.strip()):
            key, sep, value = part.partition("=")
            if not sep:
                raise DomainError(f"bad field {part!r}")
            fields[key.strip().lower()] = value.strip()
        missing = {"m", "q", "zeros"} - fields.keys()
        if missing:
            raise DomainError(f"missing fields: {sorted(missing)}")
        tail = float(fields["tail"]) if "tail" in fields else None
        return cls(int(fields["m"]), PolynomialSpec.parse(fields["q"]),
                   parse_zeros(fields["zeros"], tail))


@dataclass(frozen=True)
class LogAbsF:
    value: np.ndarray | float
    tail_bound: np.ndarray | float
    J_used: np.ndarray | int


def choose_truncation(zeros: ZeroSetSpec, absz, tol: float) -> np.ndarray:
    """Least ``J`` with ``2|z| T(J) < tol`` and ``|z| <= |alpha_{J+1}| / 2``."""
    absz = np.asarray(absz, dtype=float)
    J = zeros._j_guess(absz, tol)
    if np.any(J > J_CAP):
        raise CapabilityError(f"truncation would need more than {J_CAP} zeros")

    def ok(J):
        good = 2 * absz * zeros.tail(J) < tol
        if isinstance(zeros, Explicit):
            # an unlisted zero has 1/|alpha| <= tail_bound
            n = len(zeros.values)
            unlisted = np.inf if not zeros.tail_bound else 1 / zeros.tail_bound
            listed = zeros._moduli[np.minimum(J, n - 1)] if n else unlisted
            nxt = np.where(J < n, listed, unlisted)
        else:
            nxt = np.abs(zeros.alpha(J + 1))
        return good & (absz <= nxt / 2)

    for _ in range(64):
        bad = ~ok(J)
        if not bad.any():
            break
        if isinstance(zeros, Explicit) and np.any(J[bad] >= len(zeros.values)):
            raise CapabilityError("tolerance unreachable with the listed zeros and tail bound")
        J = np.where(bad, J + np.maximum(1, J // 8), J)
    else:
        raise CapabilityError("could not reach the truncation tolerance")
    # walk down to the least admissible J
    while True:
        lower = np.maximum(J - 1, 0)
        step = (J > 0) & ok(lower)
        if not step.any():
            return J
        J = np.where(step, lower, J)


def log_abs_F(f: Genus1Function, z, tol: float = 1e-12) -> LogAbsF:
    """``log|F(z)|`` with the product truncated at the least safe index.

    The neglected factors satisfy ``|z / alpha_j| <= 1/2``, so each
    contributes at most ``2|z/alpha_j|`` and the total error is at most
    ``tail_bound = 2|z| T(J) < tol``.  Accepts a scalar or an array of points.
    The bound covers truncation only; float rounding adds a few ulps of the
    value, which dominates when ``tol`` is below ``|log|F|| * 1e-16``.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128)).ravel()
    if not np.all(np.isfinite(z)):
        raise DomainError("z must be finite")
    absz = np.abs(z)
    if np.any(absz == 0):
        raise PoleError("log|F| is -inf at z = 0")
    J = choose_truncation(f.zeros, absz, tol)
    value = f.m * np.log(absz) + np.real(f.q(z))
    jmax = int(J.max()) if len(J) else 0
    if jmax:
        alphas = np.asarray(f.zeros.alpha(np.arange(1, jmax + 1)), dtype=np.complex128)
        rows = max(1, _EVAL_CHUNK // jmax)
        for start in range(0, len(z), rows):
            sl = slice(start, start + rows)
            factor = np.abs(1 - z[sl, None] / alphas[None, :])
            if np.any(factor == 0):
                raise PoleError("z is a zero of F")
            mask = np.arange(1, jmax + 1)[None, :] <= J[sl, None]
            value[sl] += np.where(mask, np.log(np.where(mask, factor, 1.0)), 0.0).sum(axis=1)
    tail = 2 * absz * f.zeros.tail(J)
    if scalar:
        return LogAbsF(float(value[0]), float(tail[0]), int(J[0]))
    return LogAbsF(value, tail, J)


def log_abs_F_truncated(f: Genus1Function, z: complex, J: int) -> float:
    """``log|F|`` with exactly ``J`` product factors, in high precision (test oracle)."""
    with mpmath.workdps(40):
        zz = mpmath.mpc(z)
        total = f.m * mpmath.log(abs(zz)) + mpmath.re(
            mpmath.polyval([mpmath.mpc(a) for a in f.q.coeffs[::-1]], zz))
        for j in range(1, J + 1):
            a = mpmath.mpc(complex(np.asarray(f.zeros.alpha(j)).item()))
            total += mpmath.log(abs(1 - zz / a))
        return float(total)


# -- exp preimages -----------------------------------------------------------------


_SAFETY = 1 + 2.0 ** -40


@dataclass(frozen=True)
class ExpPreimage:
    """``x_i = Log y_i + 2 pi i k_i`` with exact integer branches ``k_i``.

    ``points`` holds the rounded complex values; for large ``k_i`` the
    imaginary part no longer carries ``arg y_i``, so identities involving
    ``exp`` are checked against the exact branches with :meth:`max_rel_error`.
    """

    points: PointSet2D
    k: tuple
    targets: tuple
    radii: tuple

    def exact(self, i: int, dps: int | None = None):
        y = self.targets[i]
        with mpmath.workdps(dps or self._dps()):
            return mpmath.log(mpmath.mpc(y)) + 2j * mpmath.pi * self.k[i]

    def _dps(self) -> int:
        top = max((abs(k) for k in self.k), default=1)
        return len(str(top)) + 40

    def moduli_exact(self) -> list:
        with mpmath.workdps(self._dps()):
            return [abs(self.exact(i)) for i in range(len(self.k))]

    def doubling_exact(self) -> bool:
        with mpmath.workdps(self._dps()):
            r = self.moduli_exact()
            return all(b >= 2 * a for a, b in zip(r, r[1:]))

    def max_rel_error(self) -> float:
        worst = mpmath.mpf(0)
        with mpmath.workdps(self._dps()):
            for i, y in enumerate(self.targets):
                y = mpmath.mpc(y)
                worst = max(worst, abs(mpmath.exp(self.exact(i)) - y) / abs(y))
        return float(worst)


def exp_preimage_sequence(targets, start_radius: float = 1.0) -> ExpPreimage:
    """Preimages of ``targets`` under ``exp`` escaping through doubling annuli.

    With ``R_1 = start_radius`` the branch ``k_i >= 0`` is the least one with
    ``|x_i| > R_i``, and ``R_{i+1} = max(2 R_i + 1, (2|x_i| + 1)(1 + 2**-40))``.
    The extra factor keeps ``|x_{i+1}| >= 2|x_i|`` true after rounding to
    floating point.
    """
    ys = [complex(y) for y in targets]
    if any(y == 0 for y in ys):
        raise DomainError("0 is omitted by exp and has no preimage")
    if not start_radius > 0:
        raise DomainError("start radius must be positive")
    ks, xs, radii = [], [], []
    R = mpmath.mpf(start_radius)
    for y in ys:
        with mpmath.workdps(int(mpmath.log10(R + 10)) + 40):
            two_pi = 2 * mpmath.pi
            L = mpmath.log(mpmath.mpc(y))
            need = R * R - L.real ** 2
            if need < 0:
                k = 0
            else:
                k = max(0, int(mpmath.floor((mpmath.sqrt(need) - L.imag) / two_pi)))
            while abs(mpmath.mpc(L.real, L.imag + two_pi * k)) <= R:
                k += 1
            x = mpmath.mpc(L.real, L.imag + two_pi * k)
            radii.append(float(R))
            ks.append(k)
            xs.append(complex(x))
            R = max(2 * R + 1, (2 * abs(x) + 1) * _SAFETY)
    return ExpPreimage(PointSet2D(np.asarray(xs, dtype=np.complex128)), tuple(ks), tuple(ys),
                       tuple(radii))


def rational_unit_square(n: int) -> list:
    """First ``n`` distinct nonzero points ``(a + bi)/q`` of the closed unit square, by denominator."""
    out, seen, q = [], set(), 1
    while len(out) < n:
        for a in range(q + 1):
            for b in range(q + 1):
                key = (Fraction(a, q), Fraction(b, q))
                if key in seen or (a == 0 and b == 0):
                    continue
                seen.add(key)
                out.append(complex(a / q, b / q))
                if len(out) == n:
                    return out
        q += 1
    return out


# -- cross-ratios --------------------------------------------------------------------


def cross_ratio(x, a, b, c, metric: MetricKind = EUCLIDEAN) -> float:
    """``d(x,a) d(b,c) / (d(x,b) d(a,c))`` for four distinct points."""
    if not isinstance(metric, (type(EUCLIDEAN), Spherical)):
        raise DomainError("cross-ratio needs the Euclidean or spherical metric")
    p = np.asarray([complex(x), complex(a), complex(b), complex(c)], dtype=np.complex128)
    d = pair_distances(p[:, None], p[None, :], metric)
    if np.any(d[~np.eye(4, dtype=bool)] == 0):
        raise DomainError("cross-ratio needs four distinct points")
    return float(d[0, 1] * d[2, 3] / (d[0, 2] * d[1, 3]))
