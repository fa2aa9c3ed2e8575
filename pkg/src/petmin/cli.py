"""Batch driver: build lattices for a range of weights and write tables, measures and reports.

Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import ceil
from pathlib import Path
from typing import Sequence

from . import __version__
from .analytic import (
    GramMatrix,
    GromovViolation,
    c1_constant,
    cached_gram,
    gram_cache_key,
    gromov_check,
    load_gram,
    petersson_gram,
    save_gram,
)
from .lattice import (
    DEFAULT_BUDGET,
    filtration_profile,
    lambda_table_rows,
    sub_quotient_maxima,
    successive_minima,
    write_lambda_table,
)
from .measures import (
    MultisetError,
    clamp,
    empirical_measure,
    exp_window,
    indicator,
    levy_distance,
    lower_bound_check,
    mixture_decompose,
    quasi_filtration_check,
    tightness_report,
    truncation_gap_check,
    update_constants_ledger,
    upper_bound_check,
)
from .qseries import (
    FormSpace,
    Group,
    coordinates_in,
    gamma0_cusp_basis,
    integral_cusp_basis,
    sub_basis_indices,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4
OUTPUT_KINDS = ("lambda_table", "measures", "bounds", "mixture", "gromov")


class ConfigError(ValueError):
    pass


class InvariantViolation(AssertionError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, group: str, k: int | None, cause: BaseException):
        where = f"stage={stage} group={group}" + (f" k={k}" if k is not None else "")
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
        self.cause = cause


@dataclass
class RunConfig:
    group: str = "Gamma1"
    k_min: int = 1
    k_max: int = 4
    L_values: list[int] = field(default_factory=lambda: [2, 3, 4])
    precision_bits: int = 128
    enumeration_budget: int = DEFAULT_BUDGET
    cache_dir: Path | None = None
    out_dir: Path = Path("petmin_out")
    outputs: list[str] = field(default_factory=lambda: list(OUTPUT_KINDS))
    threads: int = 1
    gromov_samples: int = 32
    seed: int = 0
    k0: int = 1
    upper_k_min: int = 2
    lower_k_min: int = 5

    def validate(self) -> "RunConfig":
        try:
            g = Group.parse(self.group)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.group = str(g)
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ConfigError(f"empty or invalid k range [{self.k_min}, {self.k_max}]")
        if self.precision_bits < 64:
            raise ConfigError("precision_bits must be >= 64")
        if self.enumeration_budget < 1 or self.threads < 1:
            raise ConfigError("budget and threads must be positive")
        bad = [o for o in self.outputs if o not in OUTPUT_KINDS]
        if bad:
            raise ConfigError(f"unknown outputs {bad}; choose from {OUTPUT_KINDS}")
        if any(L < 1 for L in self.L_values):
            raise ConfigError("L values must be positive")
        return self

    @property
    def ks(self) -> list[int]:
        return list(range(self.k_min, self.k_max + 1))


# ---- formatting -------------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if not math.isfinite(x):
            return json.dumps(str(x))
        return format(x, ".17g")
    return json.dumps(x)


def dumps(obj, indent: int = 0) -> str:
    """JSON with sorted keys and every float printed with 17 significant digits."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad} {json.dumps(str(k))}: {dumps(v, indent + 1)}' for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_num(v) if not isinstance(v, str) else json.dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(f"{pad} {dumps(v, indent + 1)}" for v in obj) + f"\n{pad}]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    return _num(obj)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


# ---- pipeline ----------------------------------------------------------------------


def build_space(group: Group, k: int) -> FormSpace:
    return integral_cusp_basis(k) if group.level == 1 else gamma0_cusp_basis(group.level, k)


def _gram_worker(args: tuple[str, int, int]) -> dict:
    group, k, prec = args
    g = Group.parse(group)
    return petersson_gram(build_space(g, k), prec).to_json()


def _stage(stage: str, group: str, k: int | None, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (StageError, ConfigError):
        raise
    except Exception as exc:  # every failure is reported with its location
        raise StageError(stage, group, k, exc) from exc


def _grams(cfg: RunConfig, group: Group, spaces: dict[int, FormSpace], log) -> dict[int, GramMatrix]:
    out: dict[int, GramMatrix] = {}
    cache = Path(cfg.cache_dir) if cfg.cache_dir else None
    if cfg.threads > 1:
        todo = []
        for k, sp in spaces.items():
            if cache is not None:
                p = cache / f"gram_{gram_cache_key(sp, cfg.precision_bits)}.json"
                g = load_gram(p) if p.exists() else None
                if g is not None:
                    out[k] = g
                    continue
            todo.append(k)
        with ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            futures = {k: ex.submit(_gram_worker, (str(group), k, cfg.precision_bits)) for k in todo}
            results = [_stage("gram", str(group), k, futures[k].result) for k in todo]
        for k, data in zip(todo, results):
            g = GramMatrix.from_json(data)
            out[k] = g
            if cache is not None:
                save_gram(g, cache / f"gram_{gram_cache_key(spaces[k], cfg.precision_bits)}.json")
        return dict(sorted(out.items()))
    for k, sp in spaces.items():
        g, hit = _stage("gram", str(group), k, cached_gram, sp, cfg.precision_bits, cache, log)
        log(f"k={k}: gram {'loaded from cache' if hit else 'computed'}")
        out[k] = g
    return out


def run(cfg: RunConfig, log=None) -> dict:
    """Run the pipeline; returns a summary dict (also written as summary.json)."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    cfg.validate()
    group = Group.parse(cfg.group)
    gname = str(group)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spaces = {k: _stage("basis", gname, k, build_space, group, k) for k in cfg.ks}
    grams = _grams(cfg, group, spaces, log)

    minima, profiles, tables = {}, {}, {}
    for k in cfg.ks:
        mr = _stage("minima", gname, k, successive_minima, grams[k], cfg.enumeration_budget)
        prof = _stage("profile", gname, k, filtration_profile, grams[k], None, cfg.enumeration_budget)
        if tuple(prof.jump_norms2()) != tuple(mr.norms2):
            raise InvariantViolation(f"stage=profile group={gname} k={k}: filtration jumps disagree with successive minima")
        minima[k], profiles[k], tables[k] = mr, prof, list(mr.maxima)

    summary: dict = {"group": gname, "k_range": [cfg.k_min, cfg.k_max], "precision_bits": cfg.precision_bits}
    if "lambda_table" in cfg.outputs:
        rows = [r for k in cfg.ks for r in lambda_table_rows(gname, k, minima[k])]
        write_lambda_table(rows, out / "lambda_table.csv")

    measures = {k: empirical_measure(tables[k], k) for k in cfg.ks}
    levy = []
    for k in cfg.ks:
        if k + 2 in measures:
            levy.append({"k": k, "k_next": k + 2, "distance": levy_distance(measures[k], measures[k + 2])})
    if "measures" in cfg.outputs:
        _write(out / "measures.json", dumps({
            "group": gname,
            "measures": [measures[k].to_json() for k in cfg.ks],
            "levy_k_k_plus_2": levy,
        }))
    summary["levy"] = levy

    constants: dict[str, float] = {}
    gromov_reports = {}
    if "gromov" in cfg.outputs or "bounds" in cfg.outputs:
        for k in cfg.ks:
            try:
                rep = _stage("gromov", gname, k, gromov_check, spaces[k], grams[k], samples=cfg.gromov_samples, seed=cfg.seed + k)
            except StageError as exc:
                if isinstance(exc.cause, GromovViolation):
                    raise InvariantViolation(str(exc)) from exc
                raise
            gromov_reports[k] = rep
        c2_hat = max(r.c2_hat for r in gromov_reports.values())
        max_scaled = max(r.max_ratio_scaled for r in gromov_reports.values())
        constants["c2_hat"] = c2_hat
        constants["c1"] = c1_constant(group)
        if "gromov" in cfg.outputs:
            _write(out / "gromov.json", dumps({
                "group": gname,
                "c1": c1_constant(group),
                "c2_hat": c2_hat,
                "max_ratio_over_k34": max_scaled,
                "reports": [gromov_reports[k].to_json() for k in cfg.ks],
            }))

    if "bounds" in cfg.outputs:
        bounds = {}
        ub_ks = _window(cfg.ks, cfg.upper_k_min, 3)
        if ub_ks:
            ub = upper_bound_check({k: tables[k] for k in ub_ks})
            bounds["upper"] = ub.to_json()
            constants["C_hat"] = ub.fitted_constants["C_hat"]
        lb_ks = {k: tables[k] for k in _window([k for k in cfg.ks if k > cfg.k0], cfg.lower_k_min, 1)}
        if group.level == 1 and lb_ks:
            lb = lower_bound_check(lb_ks, cfg.k0)
            bounds["lower"] = lb.to_json()
            constants["C4_hat"] = lb.fitted_constants["C4_hat"]
        if group.level == 1:
            trunc_cases = []
            for k in cfg.ks:
                for L in cfg.L_values:
                    idx = sub_basis_indices(spaces[k], ceil(k / L))
                    unit = [[1 if j == i else 0 for j in range(spaces[k].dim)] for i in idx]
                    sub, _ = _stage("sub_quotient", gname, k, sub_quotient_maxima, grams[k], unit, profiles[k])
                    trunc_cases.append((k, L, measures[k], empirical_measure(sub, k)))
            tg = {}
            for h in (clamp(1.0), clamp(10.0), exp_window(-10.0, 2.0), indicator(-12.0)):
                rep = truncation_gap_check(trunc_cases, h)
                tg[h.label()] = rep.to_json()
                constants[f"c4_hat[{h.label()}]"] = rep.fitted_constants["c4_hat"]
            bounds["truncation"] = tg
        if len(cfg.ks) >= 3:
            bounds["tightness"] = tightness_report([measures[k] for k in cfg.ks]).to_json()
        if gromov_reports:
            pairs = [(a, b) for a in cfg.ks for b in cfg.ks if a <= b and a + b in spaces and a <= 3 and b <= 3]
            if pairs:
                qf = _stage("quasi_filtration", gname, None, quasi_filtration_check, spaces, grams,
                            c1_constant(group), constants["c2_hat"], pairs, 4, cfg.seed, group.level == 1)
                bounds["quasi_filtration"] = qf.to_json()
        _write(out / "bounds.json", dumps(bounds))
        summary["bounds_pass"] = {name: (b["pass"] if "pass" in b else {n: v["pass"] for n, v in b.items()}) for name, b in bounds.items()}

    if "mixture" in cfg.outputs and group.level != 1:
        summary["mixture"] = _mixture(cfg, group, spaces, grams, profiles, measures)
        _write(out / "mixture.json", dumps(summary["mixture"]))

    if constants:
        summary["constants"] = constants
        _write(out / "constants.json", dumps(constants))
        if cfg.cache_dir:
            update_constants_ledger(Path(cfg.cache_dir) / "constants_ledger.json", constants,
                                    {"group": gname, "k": cfg.ks, "precision_bits": cfg.precision_bits, "seed": cfg.seed})
    _write(out / "summary.json", dumps(summary))
    return summary


def _window(ks: list[int], start: int, minimum: int) -> list[int]:
    """ks >= start when at least ``minimum`` remain, else all of ks (or [] if too few)."""
    tail = [k for k in ks if k >= start]
    if len(tail) >= minimum:
        return tail
    return ks if len(ks) >= minimum else []


def _mixture(cfg, group, spaces, grams, profiles, measures) -> list[dict]:
    rows = []
    gname = str(group)
    for k in cfg.ks:
        sp = spaces[k]
        level1 = integral_cusp_basis(k, sp.trunc_order - 1)
        sub_rows = []
        for b in level1.basis:
            c = coordinates_in(sp, b)
            if any(x.denominator != 1 for x in c):
                raise InvariantViolation(f"stage=mixture group={gname} k={k}: level-1 form not in the integral lattice")
            sub_rows.append([int(x) for x in c])
        sub, quot = _stage("sub_quotient", gname, k, sub_quotient_maxima, grams[k], sub_rows, profiles[k])
        d_prime, d_sub = sp.dim, len(sub)
        full = measures[k]
        try:
            omega = mixture_decompose(full, empirical_measure(sub, k), d_prime, d_sub)
        except MultisetError as exc:
            raise InvariantViolation(f"stage=mixture group={gname} k={k}: {exc}") from exc
        lhs = sorted(full.multiplicities(d_prime).elements())
        rhs = sorted(list(empirical_measure(sub, k).multiplicities(d_sub).elements()) + list(omega.multiplicities(d_prime - d_sub).elements()))
        rows.append({
            "k": k,
            "d_prime": d_prime,
            "d_sub": d_sub,
            "ratio": d_prime / d_sub,
            "degree": group.index,
            "sub_maxima": list(sub),
            "quotient_maxima": list(quot),
            "omega": omega.to_json(),
            "omega_mass": str(sum(omega.weights)),
            "identity_holds": lhs == rhs,
        })
        if lhs != rhs:
            raise InvariantViolation(f"stage=mixture group={gname} k={k}: multiset identity fails")
    return rows


# ---- plots ------------------------------------------------------------------------------


def emit_plots(run_dir: Path) -> list[Path]:
    """CDF overlays, lambda/k scatter and bound-margin data as CSV + SVG."""
    run_dir = Path(run_dir)
    mpath = run_dir / "measures.json"
    tpath = run_dir / "lambda_table.csv"
    if not mpath.exists() or not tpath.exists():
        raise FileNotFoundError(f"{run_dir} has no run artifacts (measures.json, lambda_table.csv)")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "petmin"
    data = json.loads(mpath.read_text())
    written = []
    curves = []
    lo = min(float(a) for m in data["measures"] for a in m["atoms"])
    hi = max(float(a) for m in data["measures"] for a in m["atoms"])
    pad = max(1.0, 0.05 * (hi - lo))
    with open(run_dir / "cdf.csv", "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "x", "F"])
        for m in data["measures"]:
            xs, ys, acc = [lo - pad], [0.0], 0.0
            for a, wt in zip(m["atoms"], m["weights"]):
                from fractions import Fraction

                xs += [float(a), float(a)]
                ys += [acc, acc + float(Fraction(wt))]
                acc += float(Fraction(wt))
            xs.append(hi + pad)
            ys.append(acc)
            curves.append((m["k"], xs, ys))
            for x, y in zip(xs, ys):
                w.writerow([m["k"], format(x, ".17g"), format(y, ".17g")])
    written.append(run_dir / "cdf.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, xs, ys in curves:
        ax.plot(xs, ys, label=f"k={k}")
    ax.set_xlabel("lambda / k")
    ax.set_ylabel("CDF")
    ax.legend(fontsize="small")
    fig.savefig(run_dir / "cdf.svg", metadata={"Date": None})
    plt.close(fig)
    written.append(run_dir / "cdf.svg")

    rows = list(csv.DictReader(open(tpath)))
    dims: dict[str, int] = {}
    for r in rows:
        dims[r["k"]] = max(dims.get(r["k"], 0), int(r["i"]))
    with open(run_dir / "lambda_scatter.csv", "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "i_over_d", "lambda_over_k"])
        pts = []
        for r in rows:
            t = int(r["i"]) / dims[r["k"]]
            pts.append((int(r["k"]), t, float(r["lambda_i_over_k"])))
            w.writerow([r["k"], format(t, ".17g"), r["lambda_i_over_k"]])
    written.append(run_dir / "lambda_scatter.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in sorted({p[0] for p in pts}):
        sel = [p for p in pts if p[0] == k]
        ax.scatter([p[1] for p in sel], [p[2] for p in sel], s=10, label=f"k={k}")
    ax.set_xlabel("i / d_k")
    ax.set_ylabel("lambda_{k,i} / k")
    ax.legend(fontsize="small")
    fig.savefig(run_dir / "lambda_scatter.svg", metadata={"Date": None})
    plt.close(fig)
    written.append(run_dir / "lambda_scatter.svg")

    bpath = run_dir / "bounds.json"
    if bpath.exists():
        bounds = json.loads(bpath.read_text())
        with open(run_dir / "bound_margins.csv", "w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bound", "label", "margin"])
            for name, rep in sorted(bounds.items()):
                reps = rep.items() if "margins" not in rep else [(name, rep)]
                for sub, r in reps:
                    for lab, m in zip(r.get("labels", []), r["margins"]):
                        w.writerow([sub if sub == name else f"{name}:{sub}", lab, m])
        written.append(run_dir / "bound_margins.csv")
    return written


# ---- argument handling --------------------------------------------------------------------


def load_config_file(path: Path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError:
        return json.loads(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="petmin", description="Successive minima of Petersson lattices of cusp forms.")
    sub = p.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run the pipeline")
    r.add_argument("--config", type=Path, help="TOML or JSON config file")
    r.add_argument("--group", help="Gamma1 or Gamma0(N), N in 2,3,5,7")
    r.add_argument("--k-min", type=int)
    r.add_argument("--k-max", type=int)
    r.add_argument("--precision", type=int, help="precision in bits (>= 64)")
    r.add_argument("--budget", type=int, help="enumeration node budget")
    r.add_argument("--cache", type=Path, help="Gram cache directory (env PETMIN_CACHE)")
    r.add_argument("--out", type=Path, help="output directory")
    r.add_argument("--threads", type=int, help="worker processes for Gram matrices (default 1)")
    r.add_argument("--outputs", help="comma separated subset of " + ",".join(OUTPUT_KINDS))
    r.add_argument("--L", dest="L_values", help="comma separated L values")
    r.add_argument("--seed", type=int)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    pl = sub.add_parser("plots", help="emit plot data for a finished run")
    pl.add_argument("run_dir", type=Path)
    return p


def config_from_args(ns: argparse.Namespace, environ=os.environ) -> RunConfig:
    values: dict = {}
    if ns.config is not None:
        try:
            values.update(load_config_file(ns.config))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
    if "k_range" in values:
        kr = values.pop("k_range")
        values["k_min"], values["k_max"] = int(kr[0]), int(kr[-1])
    flags = {
        "group": ns.group,
        "k_min": ns.k_min,
        "k_max": ns.k_max,
        "precision_bits": ns.precision,
        "enumeration_budget": ns.budget,
        "cache_dir": ns.cache,
        "out_dir": ns.out,
        "threads": ns.threads,
        "seed": ns.seed,
    }
    if ns.outputs:
        flags["outputs"] = [s.strip() for s in ns.outputs.split(",") if s.strip()]
    if ns.L_values:
        flags["L_values"] = [int(s) for s in ns.L_values.split(",")]
    values.update({k: v for k, v in flags.items() if v is not None})
    if environ.get("PETMIN_CACHE"):
        values["cache_dir"] = environ["PETMIN_CACHE"]
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if values.get("cache_dir") is not None:
        values["cache_dir"] = Path(values["cache_dir"])
    if values.get("out_dir") is not None:
        values["out_dir"] = Path(values["out_dir"])
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_help()
        return EXIT_CONFIG
    if ns.command == "plots":
        try:
            for p in emit_plots(ns.run_dir):
                print(p)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    try:
        cfg = config_from_args(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run(cfg)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except StageError as exc:
        cause = exc.cause
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT if isinstance(exc.cause, AssertionError) else EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
