"""Empirical measures built from successive maxima and the bound checks run on them."""

from __future__ import annotations

import hashlib
import json
import math
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from pathlib import Path
from typing import Mapping, Sequence

__all__ = [
    "EmpiricalMeasure",
    "BoundReport",
    "TestFunction",
    "clamp",
    "exp_window",
    "indicator",
    "empirical_measure",
    "integrate",
    "levy_distance",
    "truncation_gap_check",
    "upper_bound_check",
    "lower_bound_check",
    "quasi_filtration_check",
    "quasi_filtration_margins",
    "product_norm_samples",
    "mixture_decompose",
    "tightness_report",
    "psi",
    "update_constants_ledger",
    "MultisetError",
    "TAIL_GRID",
]

TAIL_GRID = (1.0, 2.0, 4.0, 8.0)


class MultisetError(ValueError):
    """Sub maxima are not a sub-multiset of the full maxima."""


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finite atomic probability measure with exact rational weights."""

    atoms: tuple[float, ...]
    weights: tuple[Fraction, ...]
    k: int | None = None

    def __post_init__(self) -> None:
        if len(self.atoms) != len(self.weights) or not self.atoms:
            raise ValueError("atoms and weights must be nonempty and of equal length")
        if any(b <= a for a, b in zip(self.atoms, self.atoms[1:])):
            raise ValueError("atoms must be strictly increasing")
        if any(w <= 0 for w in self.weights) or sum(self.weights) != 1:
            raise ValueError("weights must be positive and sum to 1")

    @classmethod
    def from_values(cls, values: Sequence[float], k: int | None = None) -> "EmpiricalMeasure":
        """Uniform measure on a multiset of reals (equal values merged)."""
        if not values:
            raise ValueError("empty multiset")
        cnt = Counter(float(v) + 0.0 for v in values)
        n = len(values)
        atoms = tuple(sorted(cnt))
        return cls(atoms, tuple(Fraction(cnt[a], n) for a in atoms), k)

    def cdf(self, x: float) -> Fraction:
        """F(x) = mass of (-inf, x]."""
        i = bisect_right(self.atoms, x)
        return sum(self.weights[:i], Fraction(0))

    def mass_below(self, t: float) -> Fraction:
        """Mass of (-inf, t)."""
        return sum((w for a, w in zip(self.atoms, self.weights) if a < t), Fraction(0))

    def multiplicities(self, n: int) -> Counter:
        """Atom counts when the measure is the uniform measure on n points."""
        out = Counter()
        for a, w in zip(self.atoms, self.weights):
            m = w * n
            if m.denominator != 1:
                raise ValueError(f"weights are not multiples of 1/{n}")
            out[a] = int(m)
        return out

    def cdf_steps(self) -> list[tuple[float, Fraction]]:
        acc = Fraction(0)
        out = []
        for a, w in zip(self.atoms, self.weights):
            acc += w
            out.append((a, acc))
        return out

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "atoms": [format(a, ".17g") for a in self.atoms],
            "weights": [str(w) for w in self.weights],
        }

    @classmethod
    def from_json(cls, data: dict) -> "EmpiricalMeasure":
        return cls(tuple(float(a) for a in data["atoms"]), tuple(Fraction(w) for w in data["weights"]), data.get("k"))


def empirical_measure(maxima: Sequence[float], k: int) -> EmpiricalMeasure:
    """nu_k: uniform mass on lambda_i / k."""
    if not maxima:
        raise ValueError("no maxima given")
    return EmpiricalMeasure.from_values([m / k for m in maxima], k)


# ---- test functions ------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Member of the fixed catalog of bounded functions used for integration."""

    kind: str
    params: tuple[float, ...]

    __test__ = False  # keep pytest from collecting this class

    def __call__(self, x: float) -> float:
        if self.kind == "clamp":
            (a,) = self.params
            return min(max(x, -a), a)
        if self.kind == "exp_window":
            c, s = self.params
            return math.exp(-(((x - c) / s) ** 2))
        if self.kind == "indicator":
            (t,) = self.params
            return 1.0 if x < t else 0.0
        raise ValueError(f"unknown test function {self.kind}")

    @property
    def sup_abs(self) -> float:
        return self.params[0] if self.kind == "clamp" else 1.0

    @property
    def lipschitz(self) -> float:
        if self.kind == "clamp":
            return 1.0
        if self.kind == "exp_window":
            return math.sqrt(2.0 / math.e) / self.params[1]
        return math.inf

    def label(self) -> str:
        return f"{self.kind}({', '.join(format(p, 'g') for p in self.params)})"


def clamp(a: float = 1.0) -> TestFunction:
    if a <= 0:
        raise ValueError("clamp level must be positive")
    return TestFunction("clamp", (float(a),))


def exp_window(center: float = 0.0, width: float = 1.0) -> TestFunction:
    if width <= 0:
        raise ValueError("window width must be positive")
    return TestFunction("exp_window", (float(center), float(width)))


def indicator(t: float = math.inf) -> TestFunction:
    """1 on (-inf, t)."""
    return TestFunction("indicator", (float(t),))


def integrate(m: EmpiricalMeasure, h: TestFunction) -> float:
    if not isinstance(h, TestFunction):
        raise TypeError("h must come from the test-function catalog")
    return math.fsum(float(w) * h(a) for a, w in zip(m.atoms, m.weights))


# ---- Levy distance -------------------------------------------------------------


def _shift_ok(f: EmpiricalMeasure, g: EmpiricalMeasure, eps: Fraction) -> bool:
    """G(x) <= F(x + eps) + eps for all x (exact)."""
    fa = [Fraction(a) for a in f.atoms]
    ga = [Fraction(a) for a in g.atoms]
    f_steps = _cum(f)
    g_steps = _cum(g)
    points = set(ga) | {a - eps for a in fa}
    for p in points:
        gv = _cdf_at(ga, g_steps, p)
        fv = _cdf_at(fa, f_steps, p + eps)
        if gv > fv + eps:
            return False
    return True


def _cum(m: EmpiricalMeasure) -> list[Fraction]:
    acc, out = Fraction(0), []
    for w in m.weights:
        acc += w
        out.append(acc)
    return out


def _cdf_at(atoms: list[Fraction], cum: list[Fraction], x: Fraction) -> Fraction:
    i = bisect_right(atoms, x)
    return cum[i - 1] if i else Fraction(0)


def levy_distance(m1: EmpiricalMeasure, m2: EmpiricalMeasure, *, exact: bool = False):
    """Levy distance inf{eps : F1(x-eps)-eps <= F2(x) <= F1(x+eps)+eps for all x}.

    The infimum is attained and lies in the finite set of atom differences and
    CDF-level differences, which is searched exactly in rational arithmetic.
    """
    a1 = [Fraction(a) for a in m1.atoms]
    a2 = [Fraction(a) for a in m2.atoms]
    levels1 = [Fraction(0)] + _cum(m1)
    levels2 = [Fraction(0)] + _cum(m2)
    cands = {Fraction(0), Fraction(1)}
    cands.update(abs(x - y) for x in a1 for y in a2)
    cands.update(abs(x - y) for x in levels1 for y in levels2)
    ordered = sorted(c for c in cands if c <= 1)

    def ok(e: Fraction) -> bool:
        return _shift_ok(m1, m2, e) and _shift_ok(m2, m1, e)

    lo, hi = 0, len(ordered) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(ordered[mid]):
            hi = mid
        else:
            lo = mid + 1
    val = ordered[lo]
    return val if exact else float(val)


# ---- reports -------------------------------------------------------------------


@dataclass
class BoundReport:
    bound_name: str
    margins: list[float]
    fitted_constants: dict[str, float]
    passed: bool
    labels: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def pass_(self) -> bool:
        return self.passed

    def to_json(self) -> dict:
        return {
            "bound_name": self.bound_name,
            "margins": [_fmt(m) for m in self.margins],
            "labels": self.labels,
            "fitted_constants": {k: _fmt(v) for k, v in self.fitted_constants.items()},
            "pass": self.passed,
            "details": _jsonable(self.details),
        }


def _fmt(x):
    if isinstance(x, float):
        if math.isinf(x) or math.isnan(x):
            return str(x)
        return float(format(x, ".17g"))
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    return _fmt(x)


def _running_growth(per_k: Mapping[int, float]) -> tuple[float, float, float]:
    """(value at mid-range, value at end, relative growth) of the running maximum."""
    ks = sorted(per_k)
    run, best = {}, -math.inf
    for k in ks:
        best = max(best, per_k[k])
        run[k] = best
    mid = ks[(len(ks) - 1) // 2]
    c_mid, c_end = run[mid], run[ks[-1]]
    if c_mid == c_end:
        return c_mid, c_end, 0.0
    growth = (c_end - c_mid) / abs(c_mid) if c_mid != 0 else math.inf
    return c_mid, c_end, growth


def upper_bound_check(tables: Mapping[int, Sequence[float]], tolerance: float = 0.01) -> BoundReport:
    """C_hat = max lambda_{k,i}/k; passes when its running max grows < 1% over the top half of k."""
    if len(tables) < 3:
        raise ValueError("need at least three values of k")
    margins, labels, per_k = [], [], {}
    for k in sorted(tables):
        vals = [lam / k for lam in tables[k]]
        per_k[k] = max(vals)
        for i, v in enumerate(vals, start=1):
            margins.append(v)
            labels.append(f"k={k},i={i}")
    c_hat = max(per_k.values())
    c_mid, c_end, growth = _running_growth(per_k)
    margins = [c_hat - m for m in margins]
    return BoundReport(
        "height_upper_bound",
        margins,
        {"C_hat": c_hat},
        math.isfinite(c_hat) and growth < tolerance,
        labels,
        {"per_k_max": per_k, "running_max_mid": c_mid, "running_max_end": c_end, "growth": growth},
    )


def lower_bound_terms(k: int, i: int, k0: int, d0: int | None = None, index: int = 1) -> float | None:
    """6 log((k - k0 - max(0, ceil((i - d0)/index)))/k), or None where the bound reads -inf."""
    d0 = k0 if d0 is None else d0
    shift = max(0, ceil(Fraction(i - d0, index)))
    arg = k - k0 - shift
    if arg <= 0:
        return None
    return 6.0 * math.log(arg / k)


def lower_bound_check(
    tables: Mapping[int, Sequence[float]], k0: int, *, d0: int | None = None, tolerance: float = 0.05
) -> BoundReport:
    """C4_hat = max over (k, i) of lower_term - lambda_{k,i}/k (skipping -inf rows).

    Passes when C4_hat is finite and its running max grows by < 5% over the top half of k.
    """
    if any(k <= k0 for k in tables):
        raise ValueError("every k must exceed k0")
    margins, labels, per_k = [], [], {}
    for k in sorted(tables):
        lams = list(tables[k])
        vals = []
        for i, lam in enumerate(lams, start=1):
            if i < 1:
                raise ValueError("malformed index")
            t = lower_bound_terms(k, i, k0, d0)
            if t is None:
                continue
            v = t - lam / k
            vals.append(v)
            margins.append(v)
            labels.append(f"k={k},i={i}")
        per_k[k] = max(vals) if vals else -math.inf
    c4 = max(per_k.values())
    c_mid, c_end, growth = _running_growth(per_k)
    margins = [c4 - m for m in margins]
    return BoundReport(
        "successive_maxima_lower_bound",
        margins,
        {"C4_hat": c4},
        math.isfinite(c4) and growth < tolerance,
        labels,
        {"per_k_max": per_k, "growth": growth, "k0": k0},
    )


def truncation_gap_check(
    cases: Sequence[tuple[int, int, EmpiricalMeasure, EmpiricalMeasure]],
    h: TestFunction,
) -> BoundReport:
    """|nu_k(h) - nu_{L,k}(h)| * L over (k, L, nu_k, nu_{L,k}) cases.

    Also checks the elementary bound 2 sup|h| (d - d_L)/d implied by the
    sub-multiset property.  c4_hat is the largest scaled gap; the check passes
    when every gap respects the elementary bound, which caps c4_hat at 2 sup|h|.
    """
    margins, labels, per_l = [], [], {}
    elementary_ok = True
    for k, L, full, trunc in cases:
        gap = abs(integrate(full, h) - integrate(trunc, h))
        margins.append(gap * L)
        labels.append(f"k={k},L={L}")
        per_l.setdefault(L, {})[k] = gap * L
        dk = _size(full)
        dl = _size(trunc)
        bound = 2.0 * h.sup_abs * (dk - dl) / dk
        if gap > bound + 1e-12:
            elementary_ok = False
    c4 = max(margins) if margins else 0.0
    # the sub-multiset argument gives gap * L <= 2 sup|h| L (ceil(k/L) - 1) / k <= 2 sup|h|
    within = c4 <= 2.0 * h.sup_abs + 1e-12
    return BoundReport(
        "truncation_gap",
        margins,
        {"c4_hat": c4},
        math.isfinite(c4) and elementary_ok and within,
        labels,
        {"function": h.label(), "elementary_bound_ok": elementary_ok, "per_L": per_l, "bound_2sup": 2.0 * h.sup_abs},
    )


def _size(m: EmpiricalMeasure) -> int:
    den = 1
    for w in m.weights:
        den = den * w.denominator // math.gcd(den, w.denominator)
    return den


def psi(k: int, c1: float, c2: float) -> float:
    """(3/4) log k + log c2 - (1/2) log c1."""
    return 0.75 * math.log(k) + math.log(c2) - 0.5 * math.log(c1)


def quasi_filtration_margins(samples: Sequence[dict], c1: float, c2_hat: float) -> BoundReport:
    """Check ||fg|| <= exp(psi(k1) + psi(k2)) ||f|| ||g|| on precomputed log norms.

    Each sample is a dict with keys k1, k2, log_f, log_g, log_fg (log Petersson
    norms) and optionally log_sup_f, log_sup_g, log_sup_fg.
    """
    margins, labels = [], []
    submult_ok = True
    for s in samples:
        bound = psi(s["k1"], c1, c2_hat) + psi(s["k2"], c1, c2_hat) + s["log_f"] + s["log_g"]
        margins.append(bound - s["log_fg"])
        labels.append(s.get("label", f"k1={s['k1']},k2={s['k2']}"))
        if "log_sup_fg" in s:
            if s["log_sup_fg"] > s["log_sup_f"] + s["log_sup_g"] + 1e-9:
                submult_ok = False
    worst = min(margins) if margins else math.inf
    return BoundReport(
        "quasi_filtration",
        margins,
        {"c1": c1, "c2_hat": c2_hat},
        worst >= 0 and submult_ok,
        labels,
        {"worst_margin": worst, "sup_submultiplicative": submult_ok},
    )


def mixture_decompose(
    nu_prime: EmpiricalMeasure, nu_sub: EmpiricalMeasure, d_prime: int, d_sub: int
) -> EmpiricalMeasure:
    """omega with d' nu' = d_sub nu_sub + (d' - d_sub) omega as multisets."""
    if d_prime == d_sub:
        raise MultisetError("sub-space equals the full space: the quotient W is zero and omega is undefined")
    full = nu_prime.multiplicities(d_prime)
    sub = nu_sub.multiplicities(d_sub)
    rest = full.copy()
    for a, m in sub.items():
        if rest[a] < m:
            raise MultisetError(f"sub maxima are not a sub-multiset of the full maxima (atom {a})")
        rest[a] -= m
    values = [a for a, m in rest.items() for _ in range(m)]
    return EmpiricalMeasure.from_values(values, nu_prime.k)


def tightness_report(measures: Sequence[EmpiricalMeasure], grid: Sequence[float] = TAIL_GRID) -> BoundReport:
    """sup_k nu_k((-inf, -a)) on the grid; passes when decreasing and < 0.1 at the largest a."""
    if len(measures) < 3:
        raise ValueError("need at least three measures")
    tails = [max(float(m.mass_below(-a)) for m in measures) for a in grid]
    decreasing = all(b <= a for a, b in zip(tails, tails[1:]))
    return BoundReport(
        "uniform_tightness",
        tails,
        {},
        decreasing and tails[-1] < 0.1,
        [f"a={a:g}" for a in grid],
        {"grid": list(grid), "min_atom": min(m.atoms[0] for m in measures)},
    )


# ---- constants ledger --------------------------------------------------------------


def inputs_hash(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


def update_constants_ledger(path: Path, constants: Mapping[str, float], inputs: dict) -> dict:
    """Record fitted constants keyed by a content hash of their inputs."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, ValueError):
        data = {}
    key = inputs_hash(inputs)
    data[key] = {"inputs": inputs, "constants": {k: _fmt(float(v)) for k, v in constants.items()}}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")
    return data[key]


def product_norm_samples(
    spaces: Mapping[int, "FormSpace"],
    grams: Mapping[int, "GramMatrix"],
    pairs: Sequence[tuple[int, int]],
    samples_per_pair: int = 4,
    seed: int = 0,
    coeff_range: int = 3,
    with_sup: bool = True,
    include_basis: bool = True,
) -> list[dict]:
    """Log norms of primitive f, g and of the product fg for random integer coordinates."""
    import random

    from .analytic import quadratic_norm, sup_norm
    from .lattice import primitive_rescale
    from .qseries import coordinates_in, series_mul

    rng = random.Random(seed)
    out = []
    for k1, k2 in pairs:
        s1, s2, s12 = spaces[k1], spaces[k2], spaces[k1 + k2]
        coords_list = []
        if include_basis:
            coords_list.append((_unit(s1.dim, 0), _unit(s2.dim, 0)))
        while len(coords_list) < samples_per_pair:
            a = [rng.randint(-coeff_range, coeff_range) for _ in range(s1.dim)]
            b = [rng.randint(-coeff_range, coeff_range) for _ in range(s2.dim)]
            if any(a) and any(b):
                coords_list.append((primitive_rescale(a), primitive_rescale(b)))
        for a, b in coords_list:
            f, g = s1.combination(a), s2.combination(b)
            fg = series_mul(f, g)
            c = coordinates_in(s12, fg)
            rec = {
                "k1": k1,
                "k2": k2,
                "label": f"k1={k1},k2={k2},f={list(a)},g={list(b)}",
                "log_f": _log_arb(quadratic_norm(grams[k1], a)),
                "log_g": _log_arb(quadratic_norm(grams[k2], b)),
                "log_fg": _log_arb(quadratic_norm(grams[k1 + k2], c)),
            }
            if with_sup and s1.group.level == 1:
                rec["log_sup_f"] = sup_norm(f, k1).log_value
                rec["log_sup_g"] = sup_norm(g, k2).log_value
                rec["log_sup_fg"] = sup_norm(fg, k1 + k2).log_value
            out.append(rec)
    return out


def _unit(d: int, i: int) -> tuple[int, ...]:
    return tuple(1 if j == i else 0 for j in range(d))


def _log_arb(x) -> float:
    return float(x.log().mid())


def quasi_filtration_check(
    spaces: Mapping[int, "FormSpace"],
    grams: Mapping[int, "GramMatrix"],
    c1: float,
    c2_hat: float,
    pairs: Sequence[tuple[int, int]] | None = None,
    samples_per_pair: int = 4,
    seed: int = 0,
    with_sup: bool = True,
) -> BoundReport:
    """||fg|| <= exp(psi(k1) + psi(k2)) ||f|| ||g|| for sampled primitive f, g.

    ``spaces``/``grams`` are keyed by k and must contain k1 + k2 for each pair.
    The first sample of each pair is the pair of first basis vectors (Delta^k1, Delta^k2 at level 1).
    """
    if pairs is None:
        ks = sorted(spaces)
        pairs = [(a, b) for a in ks for b in ks if a <= b and a + b in spaces]
    samples = product_norm_samples(spaces, grams, pairs, samples_per_pair, seed, with_sup=with_sup)
    return quasi_filtration_margins(samples, c1, c2_hat)
