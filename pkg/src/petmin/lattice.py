"""Successive minima and maxima of Petersson lattices, heights and filtrations.

All enumeration happens on an integerized copy of the Gram matrix using exact
rational arithmetic; LLL (via FLINT) is only used to precondition the basis.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable, Sequence

import numpy as np
from flint import arb, fmpq, fmpz, fmpz_mat

from .analytic import GramMatrix, NumericError, working_precision

__all__ = [
    "HeightedLattice",
    "MinimaResult",
    "FiltrationProfile",
    "IntegerGram",
    "EnumerationBudgetExceeded",
    "IndefiniteGramError",
    "primitive_rescale",
    "integerize",
    "successive_minima",
    "adelic_height",
    "filtration_profile",
    "sub_quotient_maxima",
    "lambda_table_rows",
    "write_lambda_table",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 10**8


class EnumerationBudgetExceeded(NumericError):
    pass


class IndefiniteGramError(NumericError):
    pass


# ---- integer vectors -----------------------------------------------------------


def _normalize_sign(v: list[int]) -> tuple[int, ...]:
    for c in reversed(v):
        if c:
            return tuple(v) if c > 0 else tuple(-x for x in v)
    return tuple(v)


def primitive_rescale(v: Sequence) -> tuple[int, ...]:
    """Integer vector with coprime coordinates proportional to v; last nonzero entry positive."""
    qs = [Fraction(x) for x in v]
    if not any(qs):
        raise ValueError("zero vector has no primitive rescaling")
    den = 1
    for q in qs:
        den = den * q.denominator // gcd(den, q.denominator)
    ints = [int(q * den) for q in qs]
    g = 0
    for x in ints:
        g = gcd(g, x)
    return _normalize_sign([x // g for x in ints])


# ---- integerized Gram ---------------------------------------------------------


@dataclass(frozen=True)
class IntegerGram:
    """``2^shift * G`` rounded to integers, with entrywise error bounds (same scale)."""

    matrix: fmpz_mat
    errors: tuple[tuple[int, ...], ...]
    shift: int

    @property
    def dim(self) -> int:
        return self.matrix.nrows()

    def norm2(self, x: Sequence[int]) -> int:
        d = self.dim
        m = self.matrix
        return int(sum(int(m[i, j]) * x[i] * x[j] for i in range(d) for j in range(d) if x[i] and x[j]))

    def log_norm(self, x: Sequence[int]) -> float:
        """log of the (unscaled) norm sqrt(x^T G x)."""
        n = self.norm2(x)
        if n <= 0:
            raise IndefiniteGramError("non-positive quadratic form value")
        return 0.5 * (_log_int(n) - self.shift * math.log(2.0))


def _log_int(n: int) -> float:
    if n.bit_length() < 1000:
        return math.log(n)
    s = n.bit_length() - 900
    return math.log(n >> s) + s * math.log(2.0)


def _log_norm(n2: int, shift: int) -> float:
    """log sqrt(n2 / 2^shift), correctly rounded to double."""
    with working_precision(256):
        v = (arb(fmpz(n2)).log() - shift * arb(2).log()) / 2
        return float(v.mid()) + 0.0


def _norm_from_int(n2: int, shift: int) -> float:
    with working_precision(256):
        return float((arb(fmpz(n2)).sqrt() / arb(2) ** (arb(shift) / 2)).mid())


def integerize(gram: GramMatrix, precision_bits: int | None = None) -> IntegerGram:
    """Scale by a power of two so the smallest diagonal entry is >= 2^precision_bits, then round."""
    bits = gram.precision_bits if precision_bits is None else precision_bits
    d = gram.dim
    with working_precision(gram.precision_bits + 64):
        min_diag = min(gram.entries[i][i].mid() for i in range(d))
        if not min_diag > 0:
            raise IndefiniteGramError("Gram diagonal is not positive")
        e = int(math.floor(float(min_diag.log().mid()) / math.log(2.0)))
        shift = bits - e + 1
        scale = arb(2) ** shift
        rows, errs = [], []
        for i in range(d):
            r, er = [], []
            for j in range(d):
                v = gram.entries[i][j]
                m = (v.mid() * scale).mid()
                r.append(int(m.floor().unique_fmpz()))
                er.append(int((arb(v.rad()) * scale).ceil().unique_fmpz() if v.rad() > 0 else 0) + 1)
            rows.append(r)
            errs.append(tuple(er))
    # symmetrize exactly
    for i in range(d):
        for j in range(i):
            rows[i][j] = rows[j][i]
    return IntegerGram(fmpz_mat(rows), tuple(errs), shift)


def _mat_rows(m: fmpz_mat) -> list[list[int]]:
    return [[int(x) for x in row] for row in m.tolist()]


def _congruence(a: fmpz_mat, u: fmpz_mat) -> fmpz_mat:
    """u * a * u^T (rows of u are the new basis vectors)."""
    return u * a * u.transpose()


def _lll_gram(a: fmpz_mat) -> tuple[fmpz_mat, fmpz_mat]:
    if a.nrows() == 1:
        return a, fmpz_mat([[1]])
    r, u = a.lll(transform=True, rep="gram", gram="exact", delta=0.99)
    return r, u


def _slack(ig: IntegerGram, u: fmpz_mat, reduced: fmpz_mat) -> float:
    """Relative bound s with |x^T (G - G~) x| <= s * x^T G~ x; returned as radius slack sqrt(1+s)-1."""
    d = ig.dim
    red = _mat_rows(reduced)
    diag = [red[i][i] for i in range(d)]
    # normalized in the reduced coordinates
    ldiag = np.array([_log_int(x) for x in diag])
    err = np.zeros((d, d))
    ue = [[sum(int(abs(int(u[i, a]))) * ig.errors[a][b] for a in range(d)) for b in range(d)] for i in range(d)]
    for i in range(d):
        for j in range(d):
            s = sum(ue[i][b] * abs(int(u[j, b])) for b in range(d))
            err[i, j] = math.exp(_log_int(s) - 0.5 * (ldiag[i] + ldiag[j])) if s else 0.0
    norm = np.array([[red[i][j] / math.exp(0.5 * (ldiag[i] + ldiag[j])) if red[i][j] else 0.0 for j in range(d)] for i in range(d)])
    lam_min = float(np.linalg.eigvalsh(norm).min())
    if lam_min <= 0:
        raise IndefiniteGramError("reduced Gram is not positive definite")
    s = float(np.linalg.norm(err, 2)) / lam_min
    # sqrt(1+s) - 1 without cancellation
    return s / (math.sqrt(1.0 + s) + 1.0)


# ---- exact Schnorr-Euchner enumeration ---------------------------------------------


def _gso(a: list[list]) -> tuple[list[list[fmpq]], list[fmpq]]:
    """mu[i][j] (j < i) and squared GS norms B[i] from a Gram matrix."""
    d = len(a)
    mu = [[fmpq(0)] * d for _ in range(d)]
    b = [fmpq(0)] * d
    for i in range(d):
        for j in range(i):
            s = fmpq(a[i][j])
            for t in range(j):
                s -= mu[j][t] * mu[i][t] * b[t]
            mu[i][j] = s / b[j]
        s = fmpq(a[i][i])
        for t in range(i):
            s -= mu[i][t] * mu[i][t] * b[t]
        if s <= 0:
            raise IndefiniteGramError("Gram matrix is not positive definite")
        b[i] = s
    return mu, b


class _Enumerator:
    """Enumerate integer x with ||x - t||^2 <= R (quadratic form a), zigzag order.

    ``visit(x, norm)`` is called on each solution and returns the (possibly
    smaller) new radius.  With ``tail_start`` set, x[tail_start:] must be nonzero
    and the last nonzero coordinate positive (no target allowed then).
    """

    def __init__(self, a: list[list], budget: int):
        self.d = len(a)
        self.mu, self.b = _gso(a)
        self.budget = budget
        self.nodes = 0

    def run(
        self,
        radius: fmpq,
        visit: Callable[[list[int], fmpq], fmpq],
        *,
        target: Sequence[fmpq] | None = None,
        tail_start: int | None = None,
    ) -> None:
        d = self.d
        t = [fmpq(0)] * d if target is None else [fmpq(v) for v in target]
        x = [0] * d
        self._radius = radius
        self._visit = visit
        self._t = t
        self._tail = tail_start
        self._rec(d - 1, fmpq(0), x, True)

    def _rec(self, j: int, partial: fmpq, x: list[int], all_zero_above: bool) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise EnumerationBudgetExceeded(f"enumeration exceeded {self.budget} nodes")
        c = self._t[j]
        for i in range(j + 1, self.d):
            if self.mu[i][j]:
                c -= self.mu[i][j] * (x[i] - self._t[i])
        bj = self.b[j]
        restrict = self._tail is not None and all_zero_above
        must_nonzero = restrict and j == self._tail
        if restrict and j < self._tail:
            return
        lower = (1 if must_nonzero else 0) if restrict else None
        cands = _zigzag(c) if lower is None or c >= lower else _count_up(lower)
        for v in cands:
            diff = fmpq(v) - c
            p = partial + bj * diff * diff
            if p > self._radius:
                # candidates come in order of |v - c|, so every later one is farther
                break
            if lower is not None and v < lower:
                continue
            x[j] = v
            if j == 0:
                self._radius = self._visit(list(x), p)
            else:
                self._rec(j - 1, p, x, all_zero_above and v == 0)
            x[j] = 0


def _count_up(start: int):
    v = start
    while True:
        yield v
        v += 1


def _zigzag(c: fmpq):
    """Integers ordered by distance from c (ties toward the smaller value)."""
    lo = int(c.p) // int(c.q)
    f = fmpq(lo)
    hi = lo + 1
    if c - f <= fmpq(hi) - c:
        yield lo
        a, b = lo - 1, hi
    else:
        yield hi
        a, b = lo, hi + 1
    while True:
        if c - fmpq(a) <= fmpq(b) - c:
            yield a
            a -= 1
        else:
            yield b
            b += 1


# ---- successive minima (greedy path) ------------------------------------------------


@dataclass(frozen=True)
class MinimaResult:
    minima: tuple[float, ...]
    maxima: tuple[float, ...]
    witnesses: tuple[tuple[int, ...], ...]
    slack: float
    norms2: tuple[int, ...] = ()
    shift: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.minima)


def _complete_basis(witnesses: list[list[int]], d: int) -> fmpz_mat:
    """Unimodular matrix whose first rows span the saturation of the witnesses."""
    if not witnesses:
        return fmpz_mat([[1 if i == j else 0 for j in range(d)] for i in range(d)])
    m = fmpz_mat([[w[i] for w in witnesses] for i in range(d)])  # d x r, witnesses as columns
    _, t = m.hnf(transform=True)
    inv = t.inv()
    rows = [[int(inv[i, j].p) for i in range(d)] for j in range(d)]
    # columns of inv are the new basis vectors; return them as rows
    return fmpz_mat(rows)


def _shortest_outside(a: fmpz_mat, basis: fmpz_mat, r: int, budget_left: int) -> tuple[list[int], int, int]:
    """Shortest x not in the span of the first r rows of ``basis`` (rows = vectors).

    Returns (vector in original coordinates, squared norm, nodes used).
    """
    d = a.nrows()
    g = _congruence(a, basis)
    # reduce the span block and the projected complement block separately
    blocks = []
    if r:
        gs = fmpz_mat([[g[i, j] for j in range(r)] for i in range(r)])
        _, us = _lll_gram(gs)
    else:
        us = fmpz_mat(0, 0)
    gl = _mat_rows(g)
    # projected Gram of the complement: C - B^T S^-1 B (rational), scaled to integers
    if r:
        from flint import fmpq_mat

        s_inv = fmpq_mat([[gl[i][j] for j in range(r)] for i in range(r)]).inv()
        bm = fmpq_mat([[gl[i][j] for j in range(r, d)] for i in range(r)])
        cm = fmpq_mat([[gl[i][j] for j in range(r, d)] for i in range(r, d)])
        proj = cm - bm.transpose() * s_inv * bm
        num, den = proj.numer_denom()
        pc = num
    else:
        pc = fmpz_mat([[gl[i][j] for j in range(d)] for i in range(d)])
    _, uc = _lll_gram(pc)
    # combined block-diagonal transform
    full = [[0] * d for _ in range(d)]
    for i in range(r):
        for j in range(r):
            full[i][j] = int(us[i, j])
    for i in range(d - r):
        for j in range(d - r):
            full[r + i][r + j] = int(uc[i, j])
    bt = fmpz_mat(full) * basis
    g2 = _mat_rows(_congruence(a, bt))
    best_norm = min(g2[i][i] for i in range(r, d))
    best_vec: list[int] | None = None
    enum = _Enumerator(g2, budget_left)

    def visit(x, norm):
        nonlocal best_norm, best_vec
        if best_vec is None or norm < best_norm:
            best_norm = int(norm.p)
            best_vec = x
        return fmpq(best_norm)

    enum.run(fmpq(best_norm), visit, tail_start=r)
    if best_vec is None:
        raise NumericError("enumeration found no vector outside the span")
    orig = [sum(best_vec[i] * int(bt[i, j]) for i in range(d)) for j in range(d)]
    return list(_normalize_sign(orig)), best_norm, enum.nodes


def successive_minima(gram: GramMatrix, budget: int = DEFAULT_BUDGET, precision_bits: int | None = None) -> MinimaResult:
    """Successive minima by repeated exact shortest-vector search outside the current span.

    The i-th witness is a shortest lattice vector outside the span of the earlier
    witnesses; ties keep the first vector found.
    """
    ig = integerize(gram, precision_bits)
    a = ig.matrix
    d = ig.dim
    _gso(_mat_rows(a))  # raises on indefinite input
    reduced, u = _lll_gram(a)
    slack = _slack(ig, u, reduced)
    witnesses: list[list[int]] = []
    norms: list[int] = []
    nodes = 0
    for r in range(d):
        basis = _complete_basis(witnesses, d)
        vec, n2, used = _shortest_outside(a, basis, r, budget - nodes)
        nodes += used
        witnesses.append(vec)
        norms.append(n2)
    minima = tuple(_norm_from_int(n, ig.shift) for n in norms)
    maxima = tuple(-math.log(m) + 0.0 for m in minima)
    return MinimaResult(
        minima,
        maxima,
        tuple(tuple(w) for w in witnesses),
        slack,
        tuple(norms),
        ig.shift,
        {"nodes": nodes},
    )


# ---- heights ----------------------------------------------------------------


@dataclass(frozen=True)
class HeightedLattice:
    gram: GramMatrix
    basis_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.gram.dim < 1:
            raise ValueError("lattice must have positive rank")

    @property
    def dim(self) -> int:
        return self.gram.dim

    def height(self, v: Sequence) -> float:
        return adelic_height(v, self.gram)


def adelic_height(v: Sequence, gram: GramMatrix) -> float:
    """-log of the Petersson norm of the primitive rescaling of v (finite places contribute 0)."""
    p = primitive_rescale(v)
    d = gram.dim
    with working_precision(gram.precision_bits + 32):
        total = arb(0)
        for i in range(d):
            if p[i]:
                for j in range(d):
                    if p[j]:
                        total += p[i] * p[j] * gram.entries[i][j]
        if not total > 0:
            raise IndefiniteGramError("non-positive norm")
        return -float((total.log() / 2).mid())


# ---- filtration profile (projection + lifting path) ------------------------------------


@dataclass(frozen=True)
class FiltrationProfile:
    """Jumps of a -> dim span{v : lambda(v) >= a}.

    ``thresholds[i]`` is the i-th distinct jump (decreasing) and ``dims[i]`` the
    dimension for a just below it.
    """

    thresholds: tuple[float, ...]
    dims: tuple[int, ...]
    generating_vectors: tuple[tuple[tuple[int, ...], float], ...]
    norms2: tuple[int, ...] = ()
    shift: int = 0
    metadata: dict = field(default_factory=dict)

    def jump_multiset(self) -> tuple[float, ...]:
        out: list[float] = []
        prev = 0
        for a, dd in zip(self.thresholds, self.dims):
            out.extend([a] * (dd - prev))
            prev = dd
        return tuple(out)

    def jump_norms2(self) -> tuple[int, ...]:
        out: list[int] = []
        prev = 0
        for n, dd in zip(self.norms2, self.dims):
            out.extend([n] * (dd - prev))
            prev = dd
        return tuple(out)

    def dim_at(self, a: float) -> int:
        """dim V^a."""
        dd = 0
        for t, n in zip(self.thresholds, self.dims):
            if t >= a:
                dd = n
        return dd


def _rank(rows: list[list[int]]) -> int:
    if not rows:
        return 0
    return fmpz_mat(rows).rank()


def _cvp_in_span(g: list[list[int]], r: int, y: list[int], budget: int) -> tuple[fmpq, list[int], int]:
    """min over integer s of || s (first r basis vectors) + y (the rest) ||^2, exactly."""
    d = len(g)
    yy = [0] * r + y
    base = fmpq(sum(g[i][j] * yy[i] * yy[j] for i in range(r, d) for j in range(r, d)))
    if r == 0:
        return base, [], 0
    from flint import fmpq_mat

    s_mat = fmpq_mat([[g[i][j] for j in range(r)] for i in range(r)])
    rhs = fmpq_mat([[sum(g[i][j] * yy[j] for j in range(r, d))] for i in range(r)])
    center = s_mat.solve(rhs)
    t = [-center[i, 0] for i in range(r)]
    # ||s - t||_S^2 + base - t^T S t
    tst = sum((t[i] * t[j] * g[i][j] for i in range(r) for j in range(r)), fmpq(0))
    offset = base - tst
    enum = _Enumerator([[g[i][j] for j in range(r)] for i in range(r)], budget)
    best: list = [None, None]
    s0 = [int(round(float(v))) for v in t]
    r0 = sum((fmpq(s0[i]) - t[i]) * (fmpq(s0[j]) - t[j]) * g[i][j] for i in range(r) for j in range(r))
    best[0], best[1] = fmpq(r0), s0

    def visit(x, norm):
        if norm < best[0]:
            best[0], best[1] = norm, x
        return best[0]

    enum.run(best[0], visit, target=t)
    return best[0] + offset, best[1], enum.nodes


def filtration_profile(
    lat: HeightedLattice | GramMatrix,
    radius_cap: float | None = None,
    budget: int = DEFAULT_BUDGET,
    precision_bits: int | None = None,
) -> FiltrationProfile:
    """Dimension jumps of the height filtration.

    Each stage enumerates the lattice projected away from the current saturated
    span S, lifts every candidate back by an exact closest-vector search in S,
    and adds all vectors attaining the smallest lifted norm at once (so ties
    produce jumps of size > 1).
    """
    gram = lat.gram if isinstance(lat, HeightedLattice) else lat
    ig = integerize(gram, precision_bits)
    a = ig.matrix
    d = ig.dim
    _gso(_mat_rows(a))
    cap2 = None
    if radius_cap is not None:
        cap2 = radius_cap * radius_cap * 2.0 ** ig.shift
    span: list[list[int]] = []
    thresholds: list[float] = []
    dims: list[int] = []
    norms: list[int] = []
    gens: list[tuple[tuple[int, ...], float]] = []
    nodes = 0
    from flint import fmpq_mat

    while len(span) < d:
        r = len(span)
        basis = _complete_basis(span, d) if span else fmpz_mat([[1 if i == j else 0 for j in range(d)] for i in range(d)])
        if r:
            # LLL on the span block keeps the lifting searches small
            gs = _congruence(a, basis)
            blk = fmpz_mat([[gs[i, j] for j in range(r)] for i in range(r)])
            _, us = _lll_gram(blk)
            full = [[int(us[i, j]) if i < r and j < r else (1 if i == j else 0) for j in range(d)] for i in range(d)]
            basis = fmpz_mat(full) * basis
        g = _mat_rows(_congruence(a, basis))
        if r:
            s_inv = fmpq_mat([[g[i][j] for j in range(r)] for i in range(r)]).inv()
            bm = fmpq_mat([[g[i][j] for j in range(r, d)] for i in range(r)])
            cm = fmpq_mat([[g[i][j] for j in range(r, d)] for i in range(r, d)])
            proj = cm - bm.transpose() * s_inv * bm
        else:
            proj = fmpq_mat([[g[i][j] for j in range(d)] for i in range(d)])
        pnum, pden = proj.numer_denom()
        _, up = _lll_gram(pnum)
        upl = _mat_rows(up)
        # start radius: best lift among the reduced projected basis vectors
        best = None
        found: list[tuple[list[int], list[int]]] = []

        def lift(y: list[int]):
            nonlocal nodes
            val, s, used = _cvp_in_span(g, r, y, budget - nodes)
            nodes += used
            return val, s

        for row in upl:
            val, s = lift(row)
            if best is None or val < best:
                best = val
        pq = [[fmpq(int(x), 1) for x in row] for row in _mat_rows(_congruence(pnum, up))]
        enum = _Enumerator(pq, budget - nodes)
        cands: list[tuple[fmpq, list[int], list[int]]] = []

        def visit(z, pnorm):
            nonlocal best
            y = [sum(z[i] * upl[i][j] for i in range(d - r)) for j in range(d - r)]
            val, s = lift(y)
            if val < best:
                best = val
                cands.clear()
            if val == best:
                cands.append((val, y, s))
            return best * pden

        enum.run(best * pden, visit, tail_start=0)
        nodes += enum.nodes
        if nodes > budget:
            raise EnumerationBudgetExceeded(f"filtration enumeration exceeded {budget} nodes")
        bl = _mat_rows(basis)
        new_vecs = []
        for _, y, s in cands:
            coeffs = list(s) + y
            v = [sum(coeffs[i] * bl[i][j] for i in range(d)) for j in range(d)]
            new_vecs.append(list(_normalize_sign(v)))
        n2 = int(best.p) if best.q == 1 else None
        if n2 is None:
            raise NumericError("lifted norm is not an integer")
        if cap2 is not None and n2 > cap2:
            raise NumericError("radius_cap too small to resolve every jump of the filtration")
        added = []
        for v in new_vecs:
            if _rank(span + added + [v]) > len(span) + len(added):
                added.append(v)
        span.extend(added)
        span = [list(row) for row in _saturated_rows(span, d)]
        height = -math.log(_norm_from_int(n2, ig.shift)) + 0.0
        thresholds.append(height)
        dims.append(len(span))
        norms.append(n2)
        gens.extend((tuple(v), height) for v in new_vecs)
    return FiltrationProfile(tuple(thresholds), tuple(dims), tuple(gens), tuple(norms), ig.shift, {"nodes": nodes})


def _saturated_rows(rows: list[list[int]], d: int) -> list[list[int]]:
    """A basis (as rows) of the saturation of the row span."""
    basis = _complete_basis(rows, d)
    r = _rank(rows)
    return [[int(basis[i, j]) for j in range(d)] for i in range(r)]


# ---- sub / quotient filtrations ------------------------------------------------------


def sub_quotient_maxima(
    lat: HeightedLattice | GramMatrix,
    sub_basis: Sequence[Sequence[int]],
    profile: FiltrationProfile | None = None,
    budget: int = DEFAULT_BUDGET,
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Maxima of the subspace filtration on U and of the image filtration on V/U.

    dim(U cap V^a) is computed exactly from the generating vectors of the profile;
    the quotient jumps are the remaining ones, so sub + quot is the full multiset.
    """
    gram = lat.gram if isinstance(lat, HeightedLattice) else lat
    prof = profile or filtration_profile(gram, budget=budget)
    d = gram.dim
    u_rows = [list(map(int, r)) for r in sub_basis]
    dim_u = _rank(u_rows)
    full = prof.jump_multiset()
    if dim_u == 0:
        return (), tuple(sorted(full, reverse=True))
    # V^a is spanned by generators with height >= a; dims at each threshold
    sub: list[float] = []
    prev = 0
    for t in prof.thresholds:
        va = [list(v) for v, h in prof.generating_vectors if h >= t]
        dim_va = _rank(va)
        inter = dim_u + dim_va - _rank(u_rows + va)
        sub.extend([t] * (inter - prev))
        prev = inter
    if prev != dim_u:
        raise NumericError("profile does not resolve every jump of the sub-filtration")
    quot = list(full)
    for s in sub:
        quot.remove(s)
    return tuple(sorted(sub, reverse=True)), tuple(sorted(quot, reverse=True))


# ---- lambda tables -----------------------------------------------------------------


def _g17(x: float) -> str:
    return format(x, ".17g")


def lambda_table_rows(group: str, k: int, result: MinimaResult) -> list[list[str]]:
    rows = []
    for i, (mu, lam, w) in enumerate(zip(result.minima, result.maxima, result.witnesses), start=1):
        rows.append([group, str(k), str(i), _g17(mu), _g17(lam), _g17(lam / k), " ".join(str(c) for c in w)])
    return rows


LAMBDA_HEADER = ["group", "k", "i", "mu_i", "lambda_i", "lambda_i_over_k", "witness_coords"]


def write_lambda_table(rows: list[list[str]], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LAMBDA_HEADER)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
