"""Exact truncated q-expansions and integral bases of cusp-form spaces.

A :class:`QSeries` stores the coefficients of ``q^valuation, ..., q^(trunc_order-1)``
as exact rationals.  Multiplication is delegated to FLINT polynomials, which keeps
the level-1 bases practical up to weight 144 and a few hundred terms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import ceil
from typing import Iterable, Sequence

from flint import fmpq, fmpq_poly, fmpz_mat, fmpz_poly

__all__ = [
    "Group",
    "GAMMA1",
    "QSeries",
    "FormSpace",
    "EchelonError",
    "series_mul",
    "delta_series",
    "eisenstein_e4_series",
    "j_series",
    "hauptmodul_series",
    "integral_cusp_basis",
    "gamma0_cusp_basis",
    "truncated_sub_basis",
    "default_order",
    "coordinates_in",
    "GAMMA0_LEVELS",
    "CuspChart",
    "cusp_charts",
    "stretch",
    "gamma0_dimension",
    "sub_basis_indices",
    "truncation_level",
]

GAMMA0_LEVELS = (2, 3, 5, 7)


class EchelonError(ValueError):
    """Raised when a set of q-expansions cannot be brought to the expected echelon shape."""


@dataclass(frozen=True)
class Group:
    """Gamma(1) (``level == 1``) or Gamma_0(N) for a prime level in the allowlist."""

    level: int = 1

    def __post_init__(self) -> None:
        if self.level != 1 and self.level not in GAMMA0_LEVELS:
            raise ValueError(f"unsupported level N={self.level}; allowed: {GAMMA0_LEVELS}")

    @classmethod
    def parse(cls, text: str | int | "Group") -> "Group":
        if isinstance(text, Group):
            return text
        if isinstance(text, int):
            return cls(text)
        t = text.strip().replace(" ", "")
        if t in ("Gamma1", "Gamma(1)", "1", "SL2Z", "PSL2Z"):
            return cls(1)
        for prefix in ("Gamma0(", "Gamma_0("):
            if t.startswith(prefix) and t.endswith(")"):
                return cls(int(t[len(prefix):-1]))
        raise ValueError(f"cannot parse group {text!r}")

    @property
    def index(self) -> int:
        """[Gamma(1) : Gamma] (the level is prime, so this is N + 1)."""
        return 1 if self.level == 1 else self.level + 1

    @property
    def cusp_ramification(self) -> tuple[int, ...]:
        # cusps (infinity, 0) with widths 1 and N
        return (1,) if self.level == 1 else (1, self.level)

    def __str__(self) -> str:
        return "Gamma1" if self.level == 1 else f"Gamma0({self.level})"


GAMMA1 = Group(1)


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, fmpq):
        return Fraction(int(x.p), int(x.q))
    return Fraction(x)


@dataclass(frozen=True)
class QSeries:
    """Truncated Laurent series ``sum_{valuation <= n < trunc_order} c_n q^n``.

    ``coeffs[i]`` is the coefficient of ``q^(valuation + i)``.  The zero series
    (to the known precision) has ``valuation == trunc_order`` and no coefficients.
    """

    valuation: int
    coeffs: tuple[Fraction, ...]
    trunc_order: int

    def __post_init__(self) -> None:
        if len(self.coeffs) != self.trunc_order - self.valuation:
            raise ValueError("coefficient count does not match valuation/trunc_order")
        if self.coeffs and self.coeffs[0] == 0:
            raise ValueError("leading coefficient must be nonzero; use QSeries.make")

    @classmethod
    def make(cls, start: int, coeffs: Iterable, trunc_order: int) -> "QSeries":
        """Build from coefficients of ``q^start, q^(start+1), ...``, stripping leading zeros."""
        cs = [_frac(c) for c in coeffs]
        cs = cs[: max(0, trunc_order - start)]
        cs += [Fraction(0)] * (trunc_order - start - len(cs))
        i = 0
        while i < len(cs) and cs[i] == 0:
            i += 1
        return cls(start + i, tuple(cs[i:]), trunc_order)

    @classmethod
    def zero(cls, trunc_order: int) -> "QSeries":
        return cls(trunc_order, (), trunc_order)

    @classmethod
    def one(cls, trunc_order: int) -> "QSeries":
        return cls.make(0, [1], trunc_order)

    @classmethod
    def monomial(cls, n: int, trunc_order: int, c=1) -> "QSeries":
        return cls.make(n, [c], trunc_order)

    # ---- inspection -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, n: int) -> Fraction:
        if n >= self.trunc_order:
            raise IndexError(f"coefficient q^{n} is beyond trunc_order {self.trunc_order}")
        if n < self.valuation:
            return Fraction(0)
        return self.coeffs[n - self.valuation]

    def coefficient_list(self, start: int, stop: int) -> list[Fraction]:
        return [self[n] for n in range(start, stop)]

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.coeffs)

    def denominator(self) -> int:
        d = 1
        for c in self.coeffs:
            d = d * c.denominator // _gcd(d, c.denominator)
        return d

    # ---- arithmetic -------------------------------------------------------

    def truncate(self, trunc_order: int) -> "QSeries":
        if trunc_order > self.trunc_order:
            raise ValueError("cannot extend a truncated series")
        return QSeries.make(self.valuation, self.coeffs, trunc_order)

    def __neg__(self) -> "QSeries":
        return QSeries(self.valuation, tuple(-c for c in self.coeffs), self.trunc_order)

    def __add__(self, other: "QSeries") -> "QSeries":
        if not isinstance(other, QSeries):
            return NotImplemented
        trunc = min(self.trunc_order, other.trunc_order)
        lo = min(self.valuation, other.valuation, trunc)
        return QSeries.make(lo, [self[n] + other[n] for n in range(lo, trunc)], trunc)

    def __sub__(self, other: "QSeries") -> "QSeries":
        if not isinstance(other, QSeries):
            return NotImplemented
        return self + (-other)

    def scale(self, c) -> "QSeries":
        c = _frac(c)
        if c == 0:
            return QSeries.zero(self.trunc_order)
        return QSeries(self.valuation, tuple(c * a for a in self.coeffs), self.trunc_order)

    def __mul__(self, other):
        if isinstance(other, QSeries):
            return series_mul(self, other)
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "QSeries":
        if e < 0:
            raise ValueError("negative powers are not supported")
        if e == 0:
            # exact unit; relative precision is that of self
            return QSeries.one(self.trunc_order - self.valuation)
        if self.is_zero():
            return QSeries.zero(self.trunc_order + (e - 1) * self.valuation)
        rel = self.trunc_order - self.valuation
        num, den = _to_fmpz_poly(self.coeffs)
        p = num.pow_trunc(e, rel)
        return QSeries.make(e * self.valuation, _fmpz_poly_list(p, rel, den**e), e * self.valuation + rel)

    def shift(self, n: int) -> "QSeries":
        """Multiply by ``q^n``."""
        return QSeries(self.valuation + n, self.coeffs, self.trunc_order + n)

    # ---- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "valuation": self.valuation,
            "coeffs": [[str(c.numerator), str(c.denominator)] for c in self.coeffs],
            "trunc_order": self.trunc_order,
        }

    @classmethod
    def from_json(cls, data: dict) -> "QSeries":
        coeffs = [Fraction(int(n), int(d)) for n, d in data["coeffs"]]
        return cls.make(int(data["valuation"]), coeffs, int(data["trunc_order"]))

    def __repr__(self) -> str:
        head = ", ".join(str(c) for c in self.coeffs[:4])
        return f"QSeries(val={self.valuation}, trunc={self.trunc_order}, [{head}{', ...' if len(self.coeffs) > 4 else ''}])"


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a)


def _to_fmpz_poly(coeffs: Sequence[Fraction]) -> tuple[fmpz_poly, int]:
    den = 1
    for c in coeffs:
        den = den * c.denominator // _gcd(den, c.denominator)
    return fmpz_poly([int(c * den) for c in coeffs]), den


def _fmpz_poly_list(p: fmpz_poly, length: int, den: int) -> list[Fraction]:
    cs = [int(c) for c in p.coeffs()][:length]
    cs += [0] * (length - len(cs))
    if den == 1:
        return [Fraction(c) for c in cs]
    return [Fraction(c, den) for c in cs]


def series_mul(a: QSeries, b: QSeries) -> QSeries:
    """Exact product, truncated to the largest order both factors determine."""
    trunc = min(a.trunc_order + b.valuation, b.trunc_order + a.valuation)
    if a.is_zero() or b.is_zero():
        return QSeries.zero(trunc)
    val = a.valuation + b.valuation
    rel = trunc - val
    pa, da = _to_fmpz_poly(a.coeffs)
    pb, db = _to_fmpz_poly(b.coeffs)
    prod = pa.mul_low(pb, rel)
    return QSeries.make(val, _fmpz_poly_list(prod, rel, da * db), trunc)


# ---- classical expansions ---------------------------------------------------


def _euler_product(n_terms: int) -> list[int]:
    """Coefficients of prod_{n>=1} (1 - q^n) through q^(n_terms-1) (pentagonal numbers)."""
    out = [0] * n_terms
    m = 0
    while True:
        done = True
        for s in (m, -m) if m else (0,):
            e = s * (3 * s - 1) // 2
            if e < n_terms:
                out[e] += -1 if s % 2 else 1
                done = False
        if done and m > 0:
            break
        m += 1
    return out


def _eta_power_product(exponent: int, n_terms: int, step: int = 1) -> list[int]:
    """Coefficients of prod (1 - q^(step*n))^exponent through q^(n_terms-1); exponent may be negative."""
    base = _euler_product((n_terms - 1) // step + 1)
    p = fmpz_poly(base)
    if exponent >= 0:
        cs = [int(c) for c in p.pow_trunc(exponent, len(base)).coeffs()]
    else:
        cs = _inverse_unit_series([int(c) for c in p.pow_trunc(-exponent, len(base)).coeffs()], len(base))
    cs += [0] * (len(base) - len(cs))
    out = [0] * n_terms
    for i, c in enumerate(cs):
        if i * step < n_terms:
            out[i * step] = c
    return out


def _inverse_unit_series(cs: list[int], n_terms: int) -> list[int]:
    """Inverse of an integer power series with constant term 1."""
    if not cs or cs[0] != 1:
        raise ValueError("series must have constant term 1")
    cs = cs + [0] * (n_terms - len(cs))
    inv = [0] * n_terms
    inv[0] = 1
    for n in range(1, n_terms):
        inv[n] = -sum(cs[i] * inv[n - i] for i in range(1, n + 1))
    return inv


@lru_cache(maxsize=32)
def delta_series(order: int) -> QSeries:
    """Delta = q prod (1 - q^n)^24 with coefficients through ``q^order``."""
    if order < 2:
        raise ValueError("order must be >= 2")
    cs = _eta_power_product(24, order)
    return QSeries.make(1, cs, order + 1)


def _sigma3(n: int) -> int:
    s = 0
    d = 1
    while d * d <= n:
        if n % d == 0:
            s += d**3
            if d * d != n:
                s += (n // d) ** 3
        d += 1
    return s


@lru_cache(maxsize=32)
def eisenstein_e4_series(order: int) -> QSeries:
    """E4 = 1 + 240 sum sigma_3(n) q^n through ``q^order``."""
    return QSeries.make(0, [1] + [240 * _sigma3(n) for n in range(1, order + 1)], order + 1)


@lru_cache(maxsize=32)
def j_series(order: int) -> QSeries:
    """Klein's j = E4^3 / Delta through ``q^order`` (valuation -1)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    e4 = eisenstein_e4_series(order + 1)
    inv = _inverse_unit_series(_eta_power_product(24, order + 2), order + 2)
    inv_delta = QSeries.make(-1, inv, order + 1)
    return series_mul(e4 ** 3, inv_delta).truncate(order + 1)


@lru_cache(maxsize=64)
def hauptmodul_series(level: int, order: int) -> QSeries:
    """t_N = (eta(Nz)/eta(z))^(24/(N-1)), a Hauptmodul for Gamma_0(N), through ``q^order``.

    Its divisor on X_0(N) is (infinity) - (0), so ``t^m`` has order ``m`` at infinity.
    """
    if level not in GAMMA0_LEVELS:
        raise ValueError(f"no Hauptmodul configured for N={level}")
    r = 24 // (level - 1)
    num = _eta_power_product(r, order, step=level)
    den = _eta_power_product(-r, order)
    prod = fmpz_poly(num).mul_low(fmpz_poly(den), order)
    return QSeries.make(1, _fmpz_poly_list(prod, order, 1), order + 1)


@lru_cache(maxsize=64)
def _inverse_hauptmodul_series(level: int, order: int) -> QSeries:
    r = 24 // (level - 1)
    num = _eta_power_product(r, order + 2)
    den = _eta_power_product(-r, order + 2, step=level)
    prod = fmpz_poly(num).mul_low(fmpz_poly(den), order + 2)
    return QSeries.make(-1, _fmpz_poly_list(prod, order + 2, 1), order + 1)


def default_order(k: int) -> int:
    """Default truncation: coefficients through q^order with order = max(64, 16k + 64)."""
    return max(64, 16 * k + 64)


# ---- form spaces ------------------------------------------------------------


@dataclass(frozen=True)
class FormSpace:
    """A lattice of integral cusp forms of weight 12k with an echelon Z-basis.

    ``basis`` is ordered by strictly decreasing q-valuation.  ``expressions[i]``
    writes ``basis[i]`` as a rational combination of generator monomials, so that
    forms can be evaluated anywhere on the upper half plane:

    * level 1: the monomial ``t`` stands for ``Delta^k j^t``;
    * Gamma_0(N): the monomial ``m`` stands for ``Delta^k t_N^m``.
    """

    group: Group
    k: int
    basis: tuple[QSeries, ...]
    expressions: tuple[tuple[tuple[int, Fraction], ...], ...] = field(repr=False)
    cusp_width: int = 1
    cusp_ramification: tuple[int, ...] = (1,)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def weight(self) -> int:
        return 12 * self.k

    @property
    def trunc_order(self) -> int:
        return min((b.trunc_order for b in self.basis), default=0)

    @property
    def valuations(self) -> tuple[int, ...]:
        return tuple(b.valuation for b in self.basis)

    def combination(self, coords: Sequence) -> QSeries:
        """The form ``sum coords[i] * basis[i]``."""
        out = QSeries.zero(self.trunc_order)
        for c, b in zip(coords, self.basis):
            if c:
                out = out + b.scale(c)
        return out

    def combination_expression(self, coords: Sequence) -> tuple[tuple[int, Fraction], ...]:
        acc: dict[int, Fraction] = {}
        for c, expr in zip(coords, self.expressions):
            if not c:
                continue
            for mono, a in expr:
                acc[mono] = acc.get(mono, Fraction(0)) + _frac(c) * a
        return tuple(sorted((m, a) for m, a in acc.items() if a != 0))

    def basis_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(f"{self.group}|{self.k}|".encode())
        for b in self.basis:
            h.update(json.dumps(b.to_json(), sort_keys=True).encode())
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "group": str(self.group),
            "k": self.k,
            "dim": self.dim,
            "cusp_width": self.cusp_width,
            "cusp_ramification": list(self.cusp_ramification),
            "basis": [b.to_json() for b in self.basis],
            "expressions": [[[m, str(a)] for m, a in e] for e in self.expressions],
        }

    @classmethod
    def from_json(cls, data: dict) -> "FormSpace":
        return cls(
            group=Group.parse(data["group"]),
            k=int(data["k"]),
            basis=tuple(QSeries.from_json(b) for b in data["basis"]),
            expressions=tuple(tuple((int(m), Fraction(a)) for m, a in e) for e in data["expressions"]),
            cusp_width=int(data["cusp_width"]),
            cusp_ramification=tuple(data["cusp_ramification"]),
        )


def _echelonize(gens: Sequence[QSeries], trunc: int) -> tuple[list[list[int]], list[list[int]], list[int]]:
    """Integer HNF of the coefficient rows (exponents 1..trunc-1).

    Returns (rows, transform, pivots) for the nonzero HNF rows, pivot = lowest
    exponent with a nonzero coefficient.
    """
    ncols = trunc - 1
    rows = []
    for g in gens:
        if not g.is_integral():
            raise EchelonError("generators must have integer coefficients")
        if g.valuation < 1:
            raise EchelonError("generators must be cusp forms at infinity")
        rows.append([int(g[n]) for n in range(1, trunc)])
    mat = fmpz_mat(rows)
    h, t = mat.hnf(transform=True)
    hl = [[int(x) for x in r] for r in h.tolist()]
    tl = [[int(x) for x in r] for r in t.tolist()]
    out_rows, out_t, pivots = [], [], []
    for r, tr in zip(hl, tl):
        piv = next((i for i, x in enumerate(r) if x), None)
        if piv is None:
            continue
        out_rows.append(r)
        out_t.append(tr)
        pivots.append(piv + 1)
    del ncols
    return out_rows, out_t, pivots


@lru_cache(maxsize=64)
def integral_cusp_basis(k: int, order: int | None = None) -> FormSpace:
    """Level-1 lattice spanned by Delta^k j^t (t = 0..k-1), echelonized over Z.

    The i-th basis element has q-valuation k - i and vanishes at the other pivots.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    order = default_order(k) if order is None else order
    if order < k + 1:
        raise EchelonError(f"order {order} too small to echelonize weight {12 * k}")
    trunc = order + 1
    delta = delta_series(order + k + 2)
    j = j_series(order + k + 2)
    dk = delta ** k
    gens = []
    jt = QSeries.one(order + k + 3)
    for t in range(k):
        gens.append((dk * jt).truncate(trunc))
        jt = jt * j
    rows, transform, pivots = _echelonize(gens, trunc)
    if pivots != list(range(1, k + 1)):
        raise EchelonError(f"unexpected pivots {pivots} for k={k}")
    if abs(int(fmpz_mat(transform).det())) != 1:
        raise EchelonError("echelon transform is not unimodular")
    # highest valuation first
    order_idx = list(range(k - 1, -1, -1))
    basis = tuple(QSeries.make(1, rows[i], trunc) for i in order_idx)
    exprs = tuple(
        tuple((t, Fraction(c)) for t, c in enumerate(transform[i]) if c) for i in order_idx
    )
    return FormSpace(GAMMA1, k, basis, exprs, cusp_width=1, cusp_ramification=(1,))


def gamma0_dimension(level: int, k: int) -> int:
    """dim S_{12k}(Gamma_0(N)) for the genus-0 prime levels: k(N+1) - 1."""
    return k * (level + 1) - 1


@lru_cache(maxsize=64)
def gamma0_cusp_basis(level: int, k: int, order: int | None = None) -> FormSpace:
    """Integral cusp forms of weight 12k on Gamma_0(N), N in (2, 3, 5, 7).

    Generators are Delta^k t_N^m for 1 - k <= m <= Nk - 1, i.e. every form whose
    divisor stays inside the cusp conditions at infinity and 0.  They have leading
    coefficient 1 at distinct valuations 1..d, so their Z-span is the full lattice
    of cusp forms with integer q-expansion at infinity.
    """
    group = Group(level)
    if k < 1:
        raise ValueError("k must be >= 1")
    d = gamma0_dimension(level, k)
    order = max(default_order(k), d + 16) if order is None else order
    if order < d + 1:
        raise EchelonError(f"order {order} too small for dimension {d}")
    trunc = order + 1
    pad = order + k + 2
    dk = delta_series(pad) ** k
    t = hauptmodul_series(level, pad)
    tinv = _inverse_hauptmodul_series(level, pad)
    gens, monos = [], []
    for m in range(1 - k, level * k):
        tm = t ** m if m >= 0 else tinv ** (-m)
        gens.append((dk * tm).truncate(trunc))
        monos.append(m)
    rows, transform, pivots = _echelonize(gens, trunc)
    if len(rows) != d or pivots != list(range(1, d + 1)):
        raise EchelonError(f"Gamma0({level}) weight {12 * k}: reached dim {len(rows)}, expected {d}")
    order_idx = list(range(d - 1, -1, -1))
    basis = tuple(QSeries.make(1, rows[i], trunc) for i in order_idx)
    exprs = tuple(
        tuple((monos[g], Fraction(c)) for g, c in enumerate(transform[i]) if c) for i in order_idx
    )
    return FormSpace(group, k, basis, exprs, cusp_width=1, cusp_ramification=group.cusp_ramification)


def truncated_sub_basis(space: FormSpace, v: int) -> FormSpace:
    """Sub-lattice of forms vanishing to order >= v at infinity.

    Because the basis is in echelon form with distinct valuations, this is the
    span of the basis elements of valuation >= v.
    """
    if v < 1:
        raise ValueError("vanishing order v must be >= 1")
    if space.group.level == 1 and v > space.k + 1:
        raise ValueError(f"v={v} out of range for level 1, k={space.k}")
    keep = [i for i, b in enumerate(space.basis) if b.valuation >= v]
    return FormSpace(
        space.group,
        space.k,
        tuple(space.basis[i] for i in keep),
        tuple(space.expressions[i] for i in keep),
        cusp_width=space.cusp_width,
        cusp_ramification=space.cusp_ramification,
    )


def sub_basis_indices(space: FormSpace, v: int) -> list[int]:
    return [i for i, b in enumerate(space.basis) if b.valuation >= v]


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def truncation_level(k: int, L: int) -> int:
    """Vanishing order ceil(k/L) defining the truncated subspace B_{L,k}."""
    return ceil(k / L) if L > 0 else k


def coordinates_in(space: FormSpace, f: QSeries) -> list[Fraction]:
    """Coordinates of ``f`` in the echelon basis (raises if f is not in the span to known precision)."""
    rest = f
    coords = [Fraction(0)] * space.dim
    # basis is ordered by decreasing valuation, so eliminate from the lowest valuation up
    for i in range(space.dim - 1, -1, -1):
        b = space.basis[i]
        c = rest[b.valuation] / b.coeffs[0]
        if c:
            coords[i] = c
            rest = rest - b.scale(c)
    if not rest.is_zero():
        raise ValueError(f"series is not in the span (residual valuation {rest.valuation})")
    return coords


# ---- expansions at the cusp 0 of Gamma_0(N) ----------------------------------


def stretch(f: QSeries, n: int) -> QSeries:
    """Substitute q -> q^n."""
    if f.is_zero():
        return QSeries.zero(f.trunc_order * n)
    cs: list[Fraction] = [Fraction(0)] * (n * len(f.coeffs))
    for i, c in enumerate(f.coeffs):
        cs[n * i] = c
    return QSeries.make(n * f.valuation, cs, n * f.trunc_order - (n - 1))


@dataclass(frozen=True)
class CuspChart:
    """Expansions of every basis form at one cusp, in the local parameter q^(1/width).

    ``series[i]`` is f_i|gamma for a coset representative gamma sending the cusp to
    infinity; its translates by 0..width-1 tile the cusp's part of the domain.
    """

    width: int
    series: tuple[QSeries, ...]

    def combination(self, coords: Sequence) -> QSeries:
        out = QSeries.zero(min(s.trunc_order for s in self.series))
        for c, s in zip(coords, self.series):
            if c:
                out = out + s.scale(c)
        return out


@lru_cache(maxsize=64)
def cusp_charts(space: FormSpace, zero_order: int | None = None) -> tuple[CuspChart, ...]:
    """Charts at every cusp of the group: (infinity,) at level 1, (infinity, 0) for Gamma_0(N)."""
    charts = [CuspChart(1, space.basis)]
    level = space.group.level
    if level == 1:
        return tuple(charts)
    k = space.k
    r = 24 // (level - 1)
    order = level * space.trunc_order if zero_order is None else zero_order
    pad = order + level * k + 2
    # Delta(tau) in q_N = e^(2 pi i tau / N)
    dk = stretch(delta_series(pad // level + 2) ** k, level).truncate(pad + 1)
    # (eta(tau/N)/eta(tau))^r = 1 / t_N(tau/N)
    u = _inverse_hauptmodul_series(level, pad)
    t_at_s: dict[int, QSeries] = {}
    out = []
    for expr in space.expressions:
        acc = QSeries.zero(order + 1)
        for m, c in expr:
            if m not in t_at_s:
                um = u ** m if m >= 0 else hauptmodul_series(level, pad) ** (-m)
                # t_N(-1/tau) = N^(-r/2) u(tau)
                t_at_s[m] = (dk * um).scale(Fraction(1, level) ** (r * m // 2) if m >= 0 else Fraction(level) ** (r * (-m) // 2))
            acc = acc + t_at_s[m].truncate(order + 1).scale(c)
        out.append(acc)
    charts.append(CuspChart(level, tuple(out)))
    return tuple(charts)
