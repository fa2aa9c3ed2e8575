"""Evaluation of forms, Petersson Gram matrices, sup norms and Bergman sums.

Conventions: a form of weight 12k carries the pointwise metric
``|f(z)| (4 pi y)^(6k)`` and the inner product
``<f, g> = (1/d) * integral over the fundamental domain of f conj(g) (4 pi y)^(12k) dx dy / y^2``
where ``d = [Gamma(1) : Gamma]``.

Every cusp of the group is handled through a :class:`~petmin.qseries.CuspChart`:
the chart of width W lists the expansions of the basis forms in ``q^(1/W)`` after
moving the cusp to infinity, and its translates by ``0..W-1`` of the level-1
fundamental domain tile the part of the quotient near that cusp.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from flint import acb, acb_poly, arb, arb_mat, ctx, fmpq, fmpz

from .qseries import CuspChart, FormSpace, Group, QSeries, cusp_charts

__all__ = [
    "EvalPoint",
    "GramMatrix",
    "SupNormResult",
    "GromovReport",
    "NumericError",
    "GromovViolation",
    "working_precision",
    "evaluate",
    "petersson_gram",
    "sup_norm",
    "form_charts",
    "bergman_sup",
    "gromov_check",
    "c1_constant",
    "gram_cache_key",
    "save_gram",
    "load_gram",
    "cached_gram",
    "quadratic_norm",
]

SQRT3_2 = math.sqrt(3.0) / 2.0
LOG_4PI = math.log(4.0 * math.pi)
TAIL_INFLATION = 16.0


class NumericError(ArithmeticError):
    """A numerical routine could not reach the requested accuracy."""


class GromovViolation(AssertionError):
    """The sup/L2 lower bound failed: indicates a quadrature or evaluation bug."""


@contextmanager
def working_precision(bits: int) -> Iterator[None]:
    old = ctx.prec
    ctx.prec = int(bits)
    try:
        yield
    finally:
        ctx.prec = old


@dataclass(frozen=True)
class EvalPoint:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not self.y > 0:
            raise ValueError("EvalPoint needs y > 0")

    def to_acb(self) -> acb:
        return acb(arb(self.x), arb(self.y))


# ---- coefficient growth and tails -------------------------------------------


def _log_abs(c: Fraction) -> float:
    return math.log(abs(c.numerator)) - math.log(c.denominator)


def coefficient_growth(f: QSeries, k: int) -> float:
    """log A with |a_n| <= A n^(6k+1) fitted on the computed coefficients, inflated x16.

    Heuristic (not certified); reported as such in result metadata.
    """
    p = 6 * k + 1
    best = -math.inf
    for i, c in enumerate(f.coeffs):
        n = f.valuation + i
        if c and n >= 1:
            best = max(best, _log_abs(c) - p * math.log(n))
    return best + math.log(TAIL_INFLATION) if best > -math.inf else -math.inf


def _log_sum(logs: np.ndarray) -> float:
    if logs.size == 0:
        return -math.inf
    m = float(np.max(logs))
    if m == -math.inf:
        return m
    return m + math.log(float(np.sum(np.exp(logs - m))))


def _tail_log(log_term, start: int, decay: float, max_explicit: int = 10**6) -> float:
    """log of sum_{n >= start} exp(log_term(n)) where log_term(n) = c + p log n - decay*n + ...

    ``log_term`` must accept numpy arrays and eventually decrease geometrically.
    Terms are summed explicitly until consecutive ratios drop below 1/2; the rest is
    bounded by the last term.
    """
    n0 = start
    chunk = 256
    parts = []
    while n0 - start < max_explicit:
        ns = np.arange(n0, n0 + chunk, dtype=float)
        lt = log_term(ns)
        parts.append(_log_sum(lt))
        ratios = np.diff(lt)
        idx = np.nonzero(ratios < -math.log(2.0))[0]
        if idx.size and np.all(ratios[idx[0]:] < -math.log(2.0)):
            # remaining tail after this chunk <= last term
            parts.append(float(lt[-1]))
            return _log_sum(np.array(parts))
        n0 += chunk
    return math.inf


def evaluation_tail_log(f: QSeries, k: int, y: float, width: int = 1) -> float:
    """log of the heuristic bound on |sum_{n >= trunc} a_n q^n| at height y."""
    log_a = coefficient_growth(f, k)
    if log_a == -math.inf:
        return -math.inf
    p = 6 * k + 1
    decay = 2.0 * math.pi * y / width
    return _tail_log(lambda n: log_a + p * np.log(n) - decay * n, max(f.trunc_order, 1), decay)


def _arb_from_fraction(c: Fraction) -> arb:
    return arb(fmpq(c.numerator, c.denominator))


def _series_poly(f: QSeries) -> acb_poly:
    return acb_poly([acb(_arb_from_fraction(c)) for c in f.coeffs])


def _add_error(z: acb, rad: arb) -> acb:
    return z + acb(arb(0, rad), arb(0, rad))


def evaluate(
    f: QSeries,
    k: int,
    z: EvalPoint | acb | complex,
    precision_bits: int = 128,
    *,
    width: int = 1,
    tolerance: float | None = None,
) -> acb:
    """Value of ``sum a_n exp(2 pi i n z / width)`` as a complex ball.

    The ball radius covers rounding and the (heuristic) truncation tail.
    Raises NumericError when the tail bound exceeds ``tolerance``.
    """
    if isinstance(z, EvalPoint):
        zx, zy = z.x, z.y
    elif isinstance(z, acb):
        zx, zy = float(z.real.mid()), float(z.imag.mid())
    else:
        zx, zy = complex(z).real, complex(z).imag
    if zy <= 0:
        raise ValueError("z must lie in the upper half plane")
    tail = evaluation_tail_log(f, k, zy, width)
    if tolerance is not None and tail > math.log(tolerance):
        raise NumericError(f"tail bound exp({tail:.3g}) exceeds tolerance {tolerance}")
    with working_precision(precision_bits + 32):
        if f.is_zero():
            val = acb(0)
        else:
            zz = z if isinstance(z, acb) else acb(arb(zx), arb(zy))
            q = (2 * acb.pi() * acb(0, 1) * zz / width).exp()
            val = _series_poly(f)(q) * q ** f.valuation
        if tail > -math.inf:
            if tail == math.inf:
                raise NumericError("truncation tail does not converge at this height")
            val = _add_error(val, arb(tail).exp())
        return +val


# ---- Gauss-Legendre ----------------------------------------------------------


@lru_cache(maxsize=64)
def gauss_legendre(n: int, prec: int) -> tuple[tuple[arb, arb], ...]:
    """Nodes and weights on (-1, 1) at the given precision."""
    with working_precision(prec):
        return tuple(arb.legendre_p_root(n, i, weight=True) for i in range(n))


def quadrature_degree(precision_bits: int, k: int) -> int:
    """Tensor Gauss-Legendre degree for the compact region; grows with precision and weight."""
    return int(24 + precision_bits // 4 + 3 * k)


def _compact_nodes(n: int, prec: int) -> list[tuple[arb, arb, arb]]:
    """(x, y, weight) for {0 <= x <= 1/2, sqrt(1-x^2) <= y <= 1} including dx dy / y^2."""
    gl = gauss_legendre(n, prec)
    out = []
    with working_precision(prec):
        for u, wu in gl:
            x = (1 + u) / 4
            s = (1 - x * x).sqrt()
            h = 1 - s
            for t, wt in gl:
                y = s + h * (1 + t) / 2
                out.append((x, y, wu * wt * h / 8 / (y * y)))
    return out


# ---- Gram matrix --------------------------------------------------------------


@dataclass(frozen=True)
class GramMatrix:
    """Real symmetric Gram matrix with per-entry error radii.

    For integral bases the Petersson pairing is real, so the Hermitian matrix is
    stored through its real part.  ``entries`` are arb balls whose radii are the
    error radii.
    """

    entries: tuple[tuple[arb, ...], ...]
    k: int
    group: Group
    precision_bits: int
    normalization: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def error_radius(self) -> tuple[tuple[float, ...], ...]:
        return tuple(tuple(float(e.rad()) for e in row) for row in self.entries)

    def mid_float(self) -> np.ndarray:
        return np.array([[float(e.mid()) for e in row] for row in self.entries])

    def entry(self, i: int, j: int) -> arb:
        return self.entries[i][j]

    def is_hermitian(self) -> bool:
        d = self.dim
        return all(self.entries[i][j].overlaps(self.entries[j][i]) for i in range(d) for j in range(d))

    def normalized(self) -> np.ndarray:
        """D^(-1/2) G D^(-1/2) in floating point (well scaled even for skewed lattices)."""
        with working_precision(self.precision_bits + 32):
            d = self.dim
            s = [self.entries[i][i].sqrt() for i in range(d)]
            return np.array([[float((self.entries[i][j] / (s[i] * s[j])).mid()) for j in range(d)] for i in range(d)])

    def max_relative_error(self) -> float:
        """Largest |error_ij| / sqrt(G_ii G_jj)."""
        d = self.dim
        with working_precision(self.precision_bits + 32):
            out = 0.0
            for i in range(d):
                for j in range(d):
                    r = arb(self.entries[i][j].rad()) / (self.entries[i][i].mid() * self.entries[j][j].mid()).sqrt()
                    out = max(out, float(r.mid()))
            return out

    def is_positive_definite(self) -> bool:
        """Cholesky of the normalized matrix minus the normalized error radii."""
        g = self.normalized()
        slack = self.max_relative_error() * self.dim
        try:
            np.linalg.cholesky(g - slack * np.eye(self.dim))
        except np.linalg.LinAlgError:
            return False
        return True

    def scaled(self, c2) -> "GramMatrix":
        with working_precision(self.precision_bits + 32):
            c = arb(c2) if not isinstance(c2, arb) else c2
            ents = tuple(tuple(e * c for e in row) for row in self.entries)
        return GramMatrix(ents, self.k, self.group, self.precision_bits, dict(self.normalization), dict(self.metadata))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], k: int = 0, group: Group | None = None, precision_bits: int = 128) -> "GramMatrix":
        """Exact (zero-radius) Gram from integers/rationals; handy for synthetic lattices."""
        with working_precision(precision_bits + 32):
            ents = tuple(
                tuple(v if isinstance(v, arb) else _arb_from_fraction(Fraction(v)) for v in row) for row in rows
            )
        return cls(ents, k, group or Group(1), precision_bits, {"synthetic": True})

    def to_json(self) -> dict:
        return {
            "group": str(self.group),
            "k": self.k,
            "precision_bits": self.precision_bits,
            "entries": [[_exact_decimal(e.mid()) for e in row] for row in self.entries],
            "error_radii": [[_exact_decimal(e.rad()) for e in row] for row in self.entries],
            "normalization": self.normalization,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GramMatrix":
        prec = int(data["precision_bits"])
        with working_precision(prec + 32):
            ents = tuple(
                tuple(arb(_parse_decimal(m), _parse_decimal(r)) for m, r in zip(row, rrow))
                for row, rrow in zip(data["entries"], data["error_radii"])
            )
        return cls(ents, int(data["k"]), Group.parse(data["group"]), prec, data.get("normalization", {}), data.get("metadata", {}))


def _exact_decimal(x: arb) -> str:
    """Exact decimal expansion of a dyadic arb midpoint."""
    m, e = x.mid().man_exp()
    m, e = int(m), int(e)
    if e >= 0:
        return str(m << e)
    digits = str(abs(m) * 5 ** (-e))
    digits = digits.rjust(-e + 1, "0")
    s = digits[: len(digits) + e] + "." + digits[len(digits) + e:]
    s = s.rstrip("0").rstrip(".")
    return ("-" if m < 0 else "") + s


def _parse_decimal(s: str) -> arb:
    q = Fraction(s)
    num, den = q.numerator, q.denominator
    # den is a power of two, so the division is exact at sufficient precision
    bits = max(num.bit_length(), 1) + 8
    with working_precision(max(ctx.prec, bits)):
        v = arb(fmpz(num)) / arb(fmpz(den))
    return v


def _chart_point_values(chart: CuspChart, points: list[tuple[arb, arb, arb]], k: int, prec: int) -> list[list[acb]]:
    """Weighted basis values sqrt(w (4 pi y)^(12k)) * h_i(z + j) over all translates j."""
    w = 12 * k
    polys = [_series_poly(s) for s in chart.series]
    vals = [s.valuation for s in chart.series]
    tails = [evaluation_tail_log(s, k, SQRT3_2, chart.width) for s in chart.series]
    rows = []
    with working_precision(prec):
        two_pi_i = 2 * acb.pi() * acb(0, 1)
        four_pi = 4 * arb.pi()
        tail_balls = [arb(t).exp() if t > -math.inf else None for t in tails]
        for x, y, wt in points:
            scale = (wt * (four_pi * y) ** w).sqrt()
            for j in range(chart.width):
                q = (two_pi_i * acb(x + j, y) / chart.width).exp()
                row = []
                for p, v, tb in zip(polys, vals, tail_balls):
                    h = p(q) * q ** v
                    if tb is not None:
                        h = _add_error(h, tb)
                    row.append(h * scale)
                rows.append(row)
    return rows


def _compact_gram(charts: Sequence[CuspChart], k: int, n: int, prec: int) -> arb_mat:
    d = len(charts[0].series)
    pts = _compact_nodes(n, prec)
    total = arb_mat(d, d)
    with working_precision(prec):
        for chart in charts:
            rows = _chart_point_values(chart, pts, k, prec)
            re = arb_mat([[h.real for h in r] for r in rows])
            im = arb_mat([[h.imag for h in r] for r in rows])
            total = total + 2 * (re.transpose() * re + im.transpose() * im)
    return total


def _cusp_gram(charts: Sequence[CuspChart], k: int, prec: int) -> tuple[arb_mat, float]:
    """Exact y >= 1 contribution by orthogonality in x plus incomplete gamma integrals.

    Returns (matrix, heuristic log tail bound for the omitted coefficients).
    """
    w = 12 * k
    d = len(charts[0].series)
    total = arb_mat(d, d)
    worst_tail = -math.inf
    with working_precision(prec):
        four_pi = 4 * arb.pi()
        for chart in charts:
            W = chart.width
            trunc = min(s.trunc_order for s in chart.series)
            lo = min(s.valuation for s in chart.series)
            ns = range(max(lo, 1), trunc)
            rows = []
            for n in ns:
                x = four_pi * n / W
                g = W * four_pi ** w * (arb(W) / (four_pi * n)) ** (w - 1) * x.gamma_upper(w - 1)
                sg = g.sqrt()
                rows.append([sg * _arb_from_fraction(s[n]) for s in chart.series])
            if rows:
                b = arb_mat(rows)
                total = total + b.transpose() * b
            log_as = [coefficient_growth(s, k) for s in chart.series]
            la = max(log_as)
            if la > -math.inf:
                p = 12 * k + 2

                def term(nn, la=la, W=W):
                    xx = 4 * math.pi * nn / W
                    return (
                        2 * la + p * np.log(nn) + math.log(W) + w * LOG_4PI
                        + (w - 1) * (math.log(W) - np.log(4 * math.pi * nn))
                        + (w - 2) * np.log(xx) - xx - np.log1p(-(w - 2) / xx)
                    )

                if 4 * math.pi * trunc / W <= w:
                    raise NumericError("truncation order too small for the cusp tail bound")
                worst_tail = max(worst_tail, _tail_log(term, trunc, 4 * math.pi / W))
    return total, worst_tail


def petersson_gram(
    space: FormSpace,
    precision_bits: int = 128,
    *,
    degree: int | None = None,
    charts: Sequence[CuspChart] | None = None,
) -> GramMatrix:
    """Gram matrix of ``space.basis`` for the normalized Petersson inner product.

    Cusp regions (y >= 1) are integrated exactly in x; the compact region below
    is done with tensor Gauss-Legendre at degree n, and |Q_n - Q_(2n/3)| is added
    to every error radius as the quadrature error estimate.
    """
    if space.dim == 0:
        raise ValueError("empty space")
    charts = tuple(charts) if charts is not None else cusp_charts(space)
    k = space.k
    prec = precision_bits + 64
    n = degree or quadrature_degree(precision_bits, k)
    n_lo = max(8, (2 * n) // 3)
    with working_precision(prec):
        cusp, tail_log = _cusp_gram(charts, k, prec)
        comp = _compact_gram(charts, k, n, prec)
        comp_lo = _compact_gram(charts, k, n_lo, prec)
        inv_index = arb(1) / space.group.index
        d = space.dim
        ents = []
        quad_err = 0.0
        for i in range(d):
            row = []
            for j in range(d):
                hi = cusp[i, j] + comp[i, j]
                diff = (comp[i, j] - comp_lo[i, j]).abs_upper()
                err = arb(diff) + arb(comp[i, j].rad())
                if tail_log > -math.inf:
                    err = err + arb(tail_log).exp()
                # symmetrize: the pairing is real symmetric
                if j < i:
                    row.append(ents[j][i])
                    continue
                val = arb(hi.mid(), arb(hi.rad()) + err) * inv_index
                row.append(val)
                quad_err = max(quad_err, float(diff / abs(hi.mid())) if hi.mid() != 0 else 0.0)
            ents.append(row)
        ents = tuple(tuple(r) for r in ents)
    gram = GramMatrix(
        ents,
        k,
        space.group,
        precision_bits,
        normalization={"index": space.group.index, "metric": "(4 pi y)^(12k)", "measure": "dx dy / y^2"},
        metadata={
            "quadrature_degree": n,
            "tail_bound": "heuristic |a_n| <= 16 A n^(6k+1)",
            "relative_quadrature_change": quad_err,
            "basis_hash": space.basis_hash(),
        },
    )
    if not all(gram.entries[i][i] > 0 for i in range(d)):
        raise NumericError("Gram diagonal is not certified positive")
    if not gram.is_positive_definite():
        raise NumericError("Gram matrix is not positive definite after error subtraction")
    return gram


def quadratic_norm(gram: GramMatrix, coords: Sequence) -> arb:
    """sqrt(c^T G c) for a rational coordinate vector."""
    with working_precision(gram.precision_bits + 32):
        cs = [_arb_from_fraction(Fraction(c)) for c in coords]
        total = arb(0)
        d = gram.dim
        for i in range(d):
            if not cs[i]:
                continue
            for j in range(d):
                if cs[j]:
                    total += cs[i] * cs[j] * gram.entries[i][j]
        return total.sqrt()


# ---- Gram cache -----------------------------------------------------------------


def gram_cache_key(space: FormSpace, precision_bits: int) -> str:
    return f"{str(space.group).replace('(', '').replace(')', '')}_k{space.k}_{space.basis_hash()}_p{precision_bits}"


def _content_hash(data: dict) -> str:
    body = {k: v for k, v in data.items() if k != "content_hash"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def save_gram(gram: GramMatrix, path: Path) -> None:
    data = gram.to_json()
    data["content_hash"] = _content_hash(data)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(data, sort_keys=True, indent=1))
    os.replace(tmp, path)


def load_gram(path: Path) -> GramMatrix | None:
    """Load a cached Gram; returns None (caller recomputes) if missing or corrupt."""
    try:
        data = json.loads(path.read_text())
    except (OSError, ValueError):
        return None
    if data.get("content_hash") != _content_hash(data):
        return None
    return GramMatrix.from_json(data)


def cached_gram(space: FormSpace, precision_bits: int, cache_dir: Path | None, log=None) -> tuple[GramMatrix, bool]:
    """(gram, hit) using the JSON cache under ``cache_dir`` when given."""
    if cache_dir is None:
        return petersson_gram(space, precision_bits), False
    path = Path(cache_dir) / f"gram_{gram_cache_key(space, precision_bits)}.json"
    if path.exists():
        g = load_gram(path)
        if g is not None:
            return g, True
        if log:
            log(f"warning: cache entry {path.name} failed verification; recomputing")
    g = petersson_gram(space, precision_bits)
    save_gram(g, path)
    return g, False


# ---- floating evaluation on grids ----------------------------------------------------


class _FloatSeries:
    """Floating evaluation of log|h(z) (4 pi y)^(6k)| for a real-coefficient q^(1/W) series."""

    def __init__(self, f: QSeries, k: int, width: int):
        self.k = k
        self.width = width
        nz = [(f.valuation + i, c) for i, c in enumerate(f.coeffs) if c]
        self.zero = not nz
        self.n = np.array([n for n, _ in nz], dtype=float)
        self.logc = np.array([_log_abs(c) for _, c in nz])
        self.sign = np.array([1.0 if c > 0 else -1.0 for _, c in nz])
        self.valuation = f.valuation
        self.tail = f  # kept for tail bounds

    def _row_weights(self, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        e = self.logc[None, :] - (2 * np.pi / self.width) * ys[:, None] * self.n[None, :]
        m = e.max(axis=1)
        return m, self.sign[None, :] * np.exp(e - m[:, None])

    def complex_grid(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(log scale per y, values) with h(x+iy)(4 pi y)^(6k) = exp(scale[y]) * values[y, x]."""
        m, wts = self._row_weights(ys)
        phase = np.exp(2j * np.pi / self.width * np.outer(self.n, xs))
        vals = wts @ phase
        scale = m + 6 * self.k * np.log(4 * np.pi * ys)
        return scale, vals

    def log_weighted(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """log|h|(4 pi y)^(6k) on the grid ys x xs."""
        if self.zero:
            return np.full((len(ys), len(xs)), -np.inf)
        scale, vals = self.complex_grid(xs, ys)
        with np.errstate(divide="ignore"):
            return scale[:, None] + np.log(np.abs(vals))

    def log_points(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Same at scattered points (xs[i], ys[i])."""
        if self.zero:
            return np.full(len(xs), -np.inf)
        m, wts = self._row_weights(ys)
        phase = np.exp(2j * np.pi / self.width * np.outer(xs, self.n))
        vals = np.sum(wts * phase, axis=1)
        with np.errstate(divide="ignore"):
            return m + 6 * self.k * np.log(4 * np.pi * ys) + np.log(np.abs(vals))

    def log_majorants(self, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """log S(y), log S1(y): sums of |b_n| e^(-2 pi n y/W) and of (2 pi n/W)|b_n| e^(...)."""
        e = self.logc[None, :] - (2 * np.pi / self.width) * ys[:, None] * self.n[None, :]
        e1 = e + np.log(2 * np.pi * self.n / self.width)[None, :]
        m = e.max(axis=1)
        m1 = e1.max(axis=1)
        s = m + np.log(np.exp(e - m[:, None]).sum(axis=1))
        s1 = m1 + np.log(np.exp(e1 - m1[:, None]).sum(axis=1))
        return s, s1


@dataclass(frozen=True)
class SupNormResult:
    value: float
    argmax: EvalPoint
    lower_bound: float
    upper_bound: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.lower_bound <= self.value <= self.upper_bound):
            raise ValueError("SupNormResult bounds are inconsistent")

    @property
    def log_value(self) -> float:
        return math.log(self.value) if self.value > 0 else -math.inf


def _grid_axes(width: int, y_top: float, nx: int, ny: int) -> tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(0.0, width / 2.0, nx)
    ys = np.linspace(SQRT3_2, y_top, ny)
    return xs, ys


def _peak_height(f: _FloatSeries, k: int) -> float:
    v = max(f.valuation, 1)
    return 6 * k * f.width / (2 * math.pi * v)


def _sup_log_chart(
    fs: _FloatSeries, k: int, nx: int = 0, ny: int = 120, rounds: int = 3, factor: int = 5
) -> tuple[float, float, float, float]:
    """(log value, x, y, log upper bound) of sup |h|(4 pi y)^(6k) over x in [0, W/2], y >= sqrt(3)/2."""
    W = fs.width
    nx = nx or 48 * W + 1
    y_top = max(2.5 * _peak_height(fs, k), 3.0)
    # enlarge until the majorant beyond y_top is negligible compared with the grid max
    xs, ys = _grid_axes(W, y_top, nx, ny)
    grid = fs.log_weighted(xs, ys)
    iy, ix = np.unravel_index(np.nanargmax(grid), grid.shape)
    best = float(grid[iy, ix])
    bx, by = float(xs[ix]), float(ys[iy])
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    # local refinement around the best few cells
    order = np.argsort(grid, axis=None)[::-1][:6]
    seeds = [(float(xs[i % nx]), float(ys[i // nx])) for i in order]
    for sx, sy in seeds:
        cx, cy, hx, hy = sx, sy, dx, dy
        for _ in range(rounds):
            lx = np.clip(cx + np.linspace(-hx, hx, 2 * factor + 1), 0.0, W / 2.0)
            ly = np.clip(cy + np.linspace(-hy, hy, 2 * factor + 1), SQRT3_2, None)
            gx, gy = np.meshgrid(lx, ly)
            vals = fs.log_points(gx.ravel(), gy.ravel())
            j = int(np.nanargmax(vals))
            cx, cy = float(gx.ravel()[j]), float(gy.ravel()[j])
            if vals[j] > best:
                best, bx, by = float(vals[j]), cx, cy
            hx, hy = hx / factor, hy / factor
    # Lipschitz majorant on every coarse cell, plus the cusp majorant above y_top
    y_lo = np.maximum(ys - dy / 2, SQRT3_2)
    y_hi = ys + dy / 2
    s_lo, s1_lo = fs.log_majorants(y_lo)
    grad = np.logaddexp(np.log(2.0) + s1_lo, np.log(6 * k) + s_lo - np.log(y_lo)) + 6 * k * np.log(4 * np.pi * y_hi)
    half_diag = 0.5 * math.hypot(dx, dy)
    cell_ub = np.logaddexp(grid, (grad + math.log(half_diag))[:, None])
    ub = float(np.nanmax(cell_ub))
    s_top, _ = fs.log_majorants(np.array([y_top]))
    above = float(s_top[0]) + 6 * k * math.log(4 * math.pi * y_top)
    ub = max(ub, above, best)
    return best, bx, by, ub


def form_charts(space: FormSpace, coords: Sequence) -> tuple[CuspChart, ...]:
    """Charts of the single form sum coords[i] * basis[i]."""
    return tuple(CuspChart(ch.width, (ch.combination(coords),)) for ch in cusp_charts(space))


def sup_norm(
    f: QSeries,
    k: int,
    group: Group | str | int = 1,
    *,
    charts: Sequence[CuspChart] | None = None,
    space: FormSpace | None = None,
    coords: Sequence | None = None,
) -> SupNormResult:
    """sup over Gamma\\h of |f(z)| (4 pi y)^(6k).

    Level 1 needs only the q-expansion.  For Gamma_0(N) pass the form's charts
    (or ``space`` and ``coords``) so that the cusp 0 is covered too.
    """
    group = Group.parse(group)
    if charts is None:
        if group.level != 1:
            if space is None or coords is None:
                raise ValueError("Gamma_0(N) sup norm needs charts or (space, coords)")
            charts = form_charts(space, coords)
        else:
            charts = (CuspChart(1, (f,)),)
    if f.is_zero() and all(ch.series[0].is_zero() for ch in charts):
        return SupNormResult(0.0, EvalPoint(0.0, 1.0), 0.0, 0.0, {"zero": True})
    if f.valuation < 1:
        raise ValueError("sup_norm expects a cusp form")
    best = (-math.inf, 0.0, 1.0, -math.inf, 0)
    ub = -math.inf
    for idx, ch in enumerate(charts):
        fs = _FloatSeries(ch.series[0], k, ch.width)
        if fs.zero:
            continue
        lv, x, y, lub = _sup_log_chart(fs, k)
        ub = max(ub, lub)
        if lv > best[0]:
            best = (lv, x, y, lub, idx)
    value = math.exp(best[0])
    upper = max(math.exp(ub), value)
    return SupNormResult(
        value,
        EvalPoint(best[1], best[2]),
        value,
        upper,
        {"chart": best[4], "upper_bound": "Lipschitz majorant per grid cell", "log_value": best[0]},
    )


# ---- Bergman kernel -------------------------------------------------------------------


def c1_constant(group: Group | int = 1) -> float:
    """(vol(F_Gamma)/d_Gamma)^(-1/2) = (pi/3)^(-1/2) for every finite-index subgroup."""
    return (math.pi / 3.0) ** -0.5


def _inverse_cholesky(gram: GramMatrix) -> tuple[np.ndarray, np.ndarray]:
    g = gram.normalized()
    lchol = np.linalg.cholesky(g)
    with working_precision(gram.precision_bits + 32):
        half_log_diag = np.array([float(gram.entries[i][i].log().mid()) / 2 for i in range(gram.dim)])
    return np.linalg.inv(lchol), half_log_diag


def _bergman_grid(series: Sequence[_FloatSeries], linv: np.ndarray, hld: np.ndarray, xs, ys) -> np.ndarray:
    acc = None
    cols = []
    for fs, h in zip(series, hld):
        if fs.zero:
            cols.append(np.zeros((len(ys), len(xs)), dtype=complex))
            continue
        scale, vals = fs.complex_grid(xs, ys)
        cols.append(np.exp(scale - h)[:, None] * vals)
    stack = np.stack(cols, axis=-1)  # ny, nx, d
    ortho = stack @ linv.T
    acc = np.sum(np.abs(ortho) ** 2, axis=-1)
    return acc


def _bergman_points(series, linv, hld, xs, ys) -> np.ndarray:
    cols = []
    for fs, h in zip(series, hld):
        m, wts = fs._row_weights(ys)
        phase = np.exp(2j * np.pi / fs.width * np.outer(xs, fs.n))
        vals = np.sum(wts * phase, axis=1)
        cols.append(np.exp(m + 6 * fs.k * np.log(4 * np.pi * ys) - h) * vals)
    stack = np.stack(cols, axis=-1)
    return np.sum(np.abs(stack @ linv.T) ** 2, axis=-1)


def bergman_sup(space: FormSpace, gram: GramMatrix, *, return_point: bool = False):
    """sup over the fundamental domain of sum |phi_i(z)|^2 (4 pi y)^(12k), phi_i orthonormal."""
    k = space.k
    linv, hld = _inverse_cholesky(gram)
    best, bpt = -math.inf, (0.0, 1.0, 0)
    for idx, ch in enumerate(cusp_charts(space)):
        series = [_FloatSeries(s, k, ch.width) for s in ch.series]
        W = ch.width
        peak = max(_peak_height(fs, k) for fs in series if not fs.zero)
        xs, ys = _grid_axes(W, max(2.5 * peak, 3.0), 48 * W + 1, 160)
        grid = _bergman_grid(series, linv, hld, xs, ys)
        iy, ix = np.unravel_index(np.argmax(grid), grid.shape)
        cx, cy = float(xs[ix]), float(ys[iy])
        val = float(grid[iy, ix])
        hx, hy = xs[1] - xs[0], ys[1] - ys[0]
        for _ in range(3):
            lx = np.clip(cx + np.linspace(-hx, hx, 11), 0.0, W / 2.0)
            ly = np.clip(cy + np.linspace(-hy, hy, 11), SQRT3_2, None)
            gx, gy = np.meshgrid(lx, ly)
            vals = _bergman_points(series, linv, hld, gx.ravel(), gy.ravel())
            j = int(np.argmax(vals))
            if vals[j] > val:
                val, cx, cy = float(vals[j]), float(gx.ravel()[j]), float(gy.ravel()[j])
            hx, hy = hx / 5, hy / 5
        if val > best:
            best, bpt = val, (cx, cy, idx)
    if return_point:
        return best, EvalPoint(bpt[0], bpt[1])
    return best


# ---- sup / L2 sandwich --------------------------------------------------------------------


@dataclass(frozen=True)
class GromovReport:
    k: int
    c1: float
    ratios: tuple[float, ...]
    coords: tuple[tuple[int, ...], ...]
    min_ratio: float
    max_ratio: float
    bergman_ratio: float
    c2_hat: float
    lower_ok: bool
    upper_ok: bool

    @property
    def max_ratio_scaled(self) -> float:
        return self.max_ratio / self.k ** 0.75

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "c1": self.c1,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "max_ratio_over_k34": self.max_ratio_scaled,
            "bergman_ratio": self.bergman_ratio,
            "c2_hat": self.c2_hat,
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
            "ratios": list(self.ratios),
        }


def gromov_check(
    space: FormSpace,
    gram: GramMatrix,
    *,
    samples: int = 32,
    seed: int = 0,
    coeff_range: int = 5,
    c2_hat: float | None = None,
    tolerance: float = 1e-6,
) -> GromovReport:
    """Compare sup and Petersson norms on the basis and on random integer combinations.

    The upper constant defaults to sqrt(bergman_sup)/k^(3/4), which dominates the
    ratio of every form in the space.
    """
    import random

    rng = random.Random(seed)
    d = space.dim
    k = space.k
    c1 = c1_constant(space.group)
    coords: list[tuple[int, ...]] = [tuple(1 if j == i else 0 for j in range(d)) for i in range(d)]
    for _ in range(samples):
        while True:
            v = tuple(rng.randint(-coeff_range, coeff_range) for _ in range(d))
            if any(v):
                break
        coords.append(v)
    ratios = []
    for c in coords:
        f = space.combination(c)
        sup = sup_norm(f, k, space.group, space=space, coords=c).value
        pet = float(quadratic_norm(gram, c).mid())
        ratios.append(sup / pet)
    b = bergman_sup(space, gram)
    bergman_ratio = math.sqrt(b)
    c2 = c2_hat if c2_hat is not None else bergman_ratio / k ** 0.75
    lower_ok = min(ratios) >= c1 - tolerance
    upper_ok = max(ratios) <= c2 * k ** 0.75 * (1 + 1e-9)
    if not lower_ok:
        raise GromovViolation(f"sup/Petersson ratio {min(ratios)} < c1 = {c1} at k={k}")
    return GromovReport(k, c1, tuple(ratios), tuple(coords), min(ratios), max(ratios), bergman_ratio, c2, lower_ok, upper_ok)
