"""Command-line front end.

Subcommands
-----------
test                 : test a category collection on a dataset
simulate calibration : pooled Type I error study (class1 or class3 null)
simulate power       : power curves along an alternative grid
simulate corr-map    : expression-vs-local-statistic correlation map
analytic ...         : closed-form values and the variance-dominance check

Exit codes: 0 success, 1 internal error, 2 input/validation error.
"""

from __future__ import annotations

import argparse
import math
import os
import shlex
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .globalstat import AvgDiff, FisherCount, PearsonDiffProp, WilcoxonRankSum
from .io import align_and_filter, parse_expression_matrix, parse_gmt, parse_response
from .local import AnovaF, CoxWald, LogFoldChange, PooledT, SamT
from .model import CatsafeError, InputError, ResponseKind, TopR, TwoSided, UpperTail
from .pipeline import test_categories
from .resample import DEFAULT_B, Method
from .report import (
    RunManifest,
    parse_config_file,
    write_ecdf_csv,
    write_results_csv,
    write_study_csv,
    write_study_summary,
)
from .sim import (
    CalibrationConfig,
    CorrMapConfig,
    PowerConfig,
    StrataSpec,
    SyntheticDesign,
    contiguous_categories,
    disjoint_categories,
    run_calibration_study,
    run_corrmap_study,
    run_power_study,
    synth_matrix,
)

DESK_SCALE = {"m": 2000, "n": 40, "n_categories": 200, "nrep": 500, "B": 500}
PAPER_SCALE = {"m": 7299, "n": 100, "n_categories": 1823, "nrep": 10000, "B": 1000}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CatsafeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catsafe", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"catsafe {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test gene categories on a dataset")
    t.add_argument("--matrix", required=True)
    t.add_argument("--response", required=True)
    t.add_argument("--response-kind", required=True,
                   choices=[k.value for k in ResponseKind])
    t.add_argument("--gmt", required=True)
    t.add_argument("--local", required=True,
                   help="pooled-t | log-fold | anova-f | cox-wald | sam-t[:s0]")
    t.add_argument("--global", dest="global_stat", required=True,
                   choices=["fisher", "pearson", "avgdiff", "wilcoxon"])
    t.add_argument("--method", required=True,
                   choices=["class1", "gene-perm", "array-perm", "boot-q", "boot-t"])
    t.add_argument("--B", type=int, default=None,
                   help="resamples; defaults to 200 for boot-t, 1000 otherwise")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--region", default=None,
                   help="upper:T | two-sided:T | top:N (fisher/pearson only)")
    t.add_argument("--min-size", type=int, default=5)
    t.add_argument("--threads", type=int, default=None)
    t.add_argument("--out", default=".")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run a simulation study")
    ssub = s.add_subparsers(dest="study", required=True)
    for study in ("calibration", "power", "corr-map"):
        sp = ssub.add_parser(study)
        sp.add_argument("--config", default=None, help="flat key=value config file")
        sp.add_argument("--out", default=".")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--paper-scale", action="store_true")
        if study != "corr-map":
            sp.add_argument("--tests", default=None, help="comma-separated test names")
            sp.add_argument("--m", type=int, default=None)
            sp.add_argument("--n", type=int, default=None)
            sp.add_argument("--block-size", type=int, default=None)
            sp.add_argument("--block-rho", type=float, default=None)
            sp.add_argument("--cross-rho", type=float, default=None)
            sp.add_argument("--n-categories", type=int, default=None)
            sp.add_argument("--category-sizes", default=None)
            sp.add_argument("--nrep", type=int, default=None)
            sp.add_argument("--B", type=int, default=None)
            sp.add_argument("--matrix", default=None, help="real-data mode: expression TSV")
            sp.add_argument("--gmt", default=None, help="real-data mode: gene sets")
            sp.add_argument("--min-size", type=int, default=5)
            sp.add_argument("--deltas", default=None, help="strata deltas, e.g. 0,3")
            sp.add_argument("--proportions", default=None, help="strata proportions, e.g. 0.667,0.333")
        if study == "calibration":
            sp.add_argument("--scenario", choices=["class1", "class3"], default=None)
            sp.add_argument("--alphas", default=None)
        if study == "power":
            sp.add_argument("--grid", default=None, help="alternative constants, e.g. 0,0.5,1")
            sp.add_argument("--alternative", choices=["additive", "multiplicative"], default=None)
            sp.add_argument("--alpha", type=float, default=None)
        if study == "corr-map":
            sp.add_argument("--designs", default=None)
            sp.add_argument("--rho-grid", default=None)
            sp.add_argument("--n", type=int, default=None)
            sp.add_argument("--n-pairs", type=int, default=None)
            sp.add_argument("--n-sim", type=int, default=None)
            sp.add_argument("--variance-ratio", type=float, default=None)
        sp.set_defaults(func=cmd_simulate, study=study)

    a = sub.add_parser("analytic", help="closed-form values and checks")
    asub = a.add_subparsers(dest="calc", required=True)

    bvn = asub.add_parser("bvn")
    bvn.add_argument("--x", type=float, required=True)
    bvn.add_argument("--y", type=float, required=True)
    bvn.add_argument("--rho", type=float, required=True)
    bvn.set_defaults(func=cmd_analytic_bvn)

    vi = asub.add_parser("var-inflation")
    vi.add_argument("--m-c", type=int, required=True)
    vi.add_argument("--m-cbar", type=int, required=True)
    vi.add_argument("--rho-c", type=float, required=True)
    vi.add_argument("--rho-cbar", type=float, default=0.0)
    vi.add_argument("--rho-cross", type=float, default=0.0)
    vi.set_defaults(func=cmd_analytic_var_inflation)

    wv = asub.add_parser("wilcoxon-var")
    wv.add_argument("--m", type=int, required=True)
    wv.add_argument("--m-c", type=int, required=True)
    wv.add_argument("--rho-within", type=float, default=0.0)
    wv.add_argument("--rho-cross", type=float, default=0.0)
    wv.add_argument("--deltas", default=None, help="per-gene means, comma-separated")
    wv.set_defaults(func=cmd_analytic_wilcoxon_var)

    lb = asub.add_parser("lemma-b2")
    lb.add_argument("--rho", type=float, required=True)
    lb.add_argument("--lo", type=float, default=-4.0)
    lb.add_argument("--hi", type=float, default=4.0)
    lb.add_argument("--step", type=float, default=0.05)
    lb.set_defaults(func=cmd_analytic_lemma)

    th = asub.add_parser("theorem2-check")
    th.add_argument("--m", type=int, default=12)
    th.add_argument("--m-c", type=int, default=4)
    th.add_argument("--rho-within", type=float, default=0.4)
    th.add_argument("--rho-cross", type=float, default=0.0)
    th.add_argument("--d-values", default="0.5,1,2")
    th.set_defaults(func=cmd_analytic_theorem2)

    return p


# ---------------------------------------------------------------------------
# test command
# ---------------------------------------------------------------------------


def _parse_local(spec: str):
    if spec.startswith("sam-t"):
        s0 = 0.0
        if ":" in spec:
            s0 = float(spec.split(":", 1)[1])
        return SamT(s0)
    table = {"pooled-t": PooledT(), "log-fold": LogFoldChange(),
             "anova-f": AnovaF(), "cox-wald": CoxWald()}
    if spec not in table:
        raise InputError(f"unknown local statistic {spec!r}")
    return table[spec]


def _parse_region(spec: str | None):
    if spec is None:
        return None
    kind, _, value = spec.partition(":")
    if kind == "upper":
        return UpperTail(float(value))
    if kind == "two-sided":
        return TwoSided(float(value))
    if kind == "top":
        return TopR(int(value))
    raise InputError(f"unknown region {spec!r} (want upper:T, two-sided:T, or top:N)")


def _parse_global(name: str, region):
    if name == "fisher":
        if region is None:
            raise InputError("--global fisher requires --region")
        return FisherCount(region)
    if name == "pearson":
        if region is None:
            raise InputError("--global pearson requires --region")
        return PearsonDiffProp(region)
    if name == "avgdiff":
        return AvgDiff()
    return WilcoxonRankSum()


def _method_enum(method: str) -> Method | None:
    try:
        return Method(method)
    except ValueError:
        return None


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("CATSAFE_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def cmd_test(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.B is None:
        args.B = DEFAULT_B.get(_method_enum(args.method), 1000)
    if args.method == "boot-q" and args.B < math.ceil(1.0 / args.alpha):
        raise InputError(
            f"quantile bootstrap at alpha={args.alpha} needs B >= "
            f"{math.ceil(1.0 / args.alpha)}, got {args.B}"
        )
    matrix = parse_expression_matrix(args.matrix)
    response = parse_response(args.response, ResponseKind(args.response_kind),
                              matrix.array_ids)
    raw = parse_gmt(args.gmt)
    collection, align_report = align_and_filter(raw, matrix, args.min_size)
    local_kind = _parse_local(args.local)
    global_kind = _parse_global(args.global_stat, _parse_region(args.region))
    results = test_categories(
        matrix, response, collection, local_kind, global_kind, args.method,
        B=args.B, seed=args.seed, threads=_threads(args),
    )
    write_results_csv(results, out / "results.csv", alpha=args.alpha)
    manifest = RunManifest.create(
        command_line=_command_line(),
        config={
            "method": args.method, "local": args.local, "global": args.global_stat,
            "B": args.B, "alpha": args.alpha, "region": args.region,
            "min_size": args.min_size,
            "categories_kept": align_report.kept,
            "unresolved_symbols": align_report.unresolved_symbols,
        },
        seed=args.seed,
        version=__version__,
        input_paths=[args.matrix, args.response, args.gmt],
    )
    manifest.write(out / "run_manifest.json")
    n_sig = sum(1 for r in results if r.p <= args.alpha)
    print(f"tested {len(results)} categories; {n_sig} at p <= {args.alpha}; "
          f"results in {out / 'results.csv'}")
    return 0


def _command_line() -> str:
    return " ".join(shlex.quote(a) for a in sys.argv)


# ---------------------------------------------------------------------------
# simulate commands
# ---------------------------------------------------------------------------


def _merged(args, key: str, cast, fallback):
    """Flag value, else config-file value, else fallback."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    cfg = getattr(args, "_config", {})
    if key in cfg:
        raw = cfg[key]
        return cast(raw)
    return fallback


def _floats(csv_text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(csv_text).split(",") if x != "")


def _ints(csv_text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(csv_text).split(",") if x != "")


def _strs(csv_text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in str(csv_text).split(",") if x.strip())


def _study_dataset(args, scale, scenario: str, proportions):
    """Synthetic (or user-supplied) matrix plus categories for a study."""
    seed = _merged(args, "seed", int, 0)
    if args.matrix is not None:
        matrix = parse_expression_matrix(args.matrix)
        if args.gmt is None:
            raise InputError("real-data mode needs --gmt with --matrix")
        raw = parse_gmt(args.gmt)
        collection, _ = align_and_filter(raw, matrix, args.min_size)
        return matrix, collection
    m = _merged(args, "m", int, scale["m"])
    n = _merged(args, "n", int, scale["n"])
    block_size = _merged(args, "block-size", int, 20)
    block_rho = _merged(args, "block-rho", float, 0.3)
    cross_rho = _merged(args, "cross-rho", float, 0.0)
    n_categories = _merged(args, "n-categories", int, scale["n_categories"])
    default_sizes = "5,10,20,50,100" if scenario == "class1" else "6,12,21,30,60,99"
    sizes = _ints(_merged(args, "category-sizes", str, default_sizes))
    if scenario in ("class3", "power"):
        m = _fit_m_for_strata(m, sizes, n_categories, proportions)
        cycle = [sizes[k % len(sizes)] for k in range(n_categories)]
        collection = disjoint_categories(m, cycle)
    else:
        collection = contiguous_categories(m, sizes, n_categories)
    n_blocks = m // block_size
    design = SyntheticDesign(
        m=m, n=n, n1=n // 2, n2=n - n // 2,
        blocks=tuple((block_size, block_rho) for _ in range(n_blocks)),
        cross_rho=cross_rho,
    )
    return synth_matrix(design, seed), collection


def _fit_m_for_strata(m, sizes, n_categories, proportions) -> int:
    """Shrink m (a little) so the leftover genes can carry exact strata
    proportions; category sizes are checked by assign_strata itself."""
    if proportions is None:
        return m
    total = sum(sizes[k % len(sizes)] for k in range(n_categories))
    if total > m:
        raise InputError(f"{total} category genes exceed m={m}")
    for m_try in range(m, max(total, m - 1000) - 1, -1):
        leftover = m_try - total
        if all(abs(b * leftover - round(b * leftover)) < 1e-6 for b in proportions):
            if m_try != m:
                print(f"note: m adjusted {m} -> {m_try} for exact strata proportions",
                      file=sys.stderr)
            return m_try
    raise InputError("no m near the requested size admits exact strata proportions")


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    args._config = parse_config_file(args.config) if args.config else {}
    scale = PAPER_SCALE if args.paper_scale else DESK_SCALE
    if args.paper_scale:
        print("warning: paper-scale study; expect a long runtime", file=sys.stderr)
    seed = _merged(args, "seed", int, 0)

    if args.study == "corr-map":
        config = CorrMapConfig(
            designs=_strs(_merged(args, "designs", str, "pooled-t,log-fold,anova-f,cox-wald")),
            rho_grid=_floats(_merged(args, "rho-grid", str, "-0.9,-0.6,-0.3,0,0.3,0.6,0.9")),
            n=_merged(args, "n", int, 40),
            n_pairs=_merged(args, "n-pairs", int, 100),
            n_sim=_merged(args, "n-sim", int, 200),
            variance_ratio=_merged(args, "variance-ratio", float, 1.0),
            seed=seed,
        )
        report = run_corrmap_study(config)
    else:
        deltas = _floats(_merged(args, "deltas", str, "0,3"))
        proportions = _floats(_merged(args, "proportions", str, "0.6666666667,0.3333333333"))
        if args.study == "calibration":
            scenario = _merged(args, "scenario", str, "class1")
            strata = None
            if scenario == "class3":
                strata = StrataSpec(deltas, _normalized(proportions))
            matrix, collection = _study_dataset(
                args, scale, scenario, _normalized(proportions) if scenario == "class3" else None
            )
            config = CalibrationConfig(
                scenario=scenario,
                tests=_strs(_merged(args, "tests", str, "class1-wilcoxon,array-perm-wilcoxon")),
                nrep=_merged(args, "nrep", int, scale["nrep"]),
                B=_merged(args, "B", int, scale["B"]),
                alphas=_floats(_merged(args, "alphas", str, "0.1,0.05,0.01,0.005,0.001")),
                seed=seed,
                strata=strata,
            )
            report = run_calibration_study(matrix, collection, config)
            write_ecdf_csv(report, out)
        else:
            strata = StrataSpec(deltas, _normalized(proportions))
            matrix, collection = _study_dataset(args, scale, "power", _normalized(proportions))
            config = PowerConfig(
                strata=strata,
                grid=_floats(_merged(args, "grid", str, "0,0.5,1,1.5,2")),
                tests=_strs(_merged(args, "tests", str, "array-perm-wilcoxon,boot-t-wilcoxon")),
                alternative=_merged(args, "alternative", str, "additive"),
                alpha=_merged(args, "alpha", float, 0.05),
                nrep=_merged(args, "nrep", int, 300),
                B=_merged(args, "B", int, 200),
                seed=seed,
            )
            report = run_power_study(matrix, collection, config)

    write_study_csv(report, out / "report.csv")
    write_study_summary(report, out / "summary.json")
    manifest = RunManifest.create(
        command_line=_command_line(),
        config=report.config,
        seed=seed,
        version=__version__,
        input_paths=[getattr(args, "matrix", None), getattr(args, "gmt", None), args.config],
    )
    manifest.write(out / "run_manifest.json")
    print(f"{args.study} study written to {out}")
    return 0


def _normalized(proportions):
    total = sum(proportions)
    if abs(total - 1.0) > 1e-6:
        raise InputError("strata proportions must sum to 1")
    return tuple(b / total for b in proportions)


# ---------------------------------------------------------------------------
# analytic commands
# ---------------------------------------------------------------------------


def cmd_analytic_bvn(args) -> int:
    print(f"{analytic.bvn_cdf(args.x, args.y, args.rho):.10f}")
    return 0


def cmd_analytic_var_inflation(args) -> int:
    summary = analytic.CorrelationSummary(
        rho_c=args.rho_c, rho_cbar=args.rho_cbar, rho_cross=args.rho_cross,
        m_c=args.m_c, m_cbar=args.m_cbar,
    )
    exact, approx = analytic.var_inflation_avgdiff(summary)
    print(f"exact_factor={exact:.10g}")
    print(f"approx_factor={approx:.10g}")
    return 0


def cmd_analytic_wilcoxon_var(args) -> int:
    m, m_c = args.m, args.m_c
    corr = np.full((m, m), args.rho_cross)
    corr[:m_c, :m_c] = args.rho_within
    corr[m_c:, m_c:] = args.rho_within
    np.fill_diagonal(corr, 1.0)
    delta = np.zeros(m) if args.deltas is None else np.array(_floats(args.deltas))
    value = analytic.wilcoxon_var_correlated(delta, corr, np.arange(m_c))
    print(f"var={value:.10g}")
    print(f"var_iid={analytic.wilcoxon_iid_variance(m, m_c):.10g}")
    return 0


def cmd_analytic_lemma(args) -> int:
    scan = analytic.lemma_b2_scan(args.rho, args.lo, args.hi, args.step)
    kind = "maximum" if scan.is_maximum else "minimum"
    print(f"extremum {kind} at ({scan.extremum_xy[0]:g}, {scan.extremum_xy[1]:g})")
    print(f"f_origin={scan.f_origin:.10f}")
    return 0


def cmd_analytic_theorem2(args) -> int:
    check = analytic.variance_dominance_check(
        m=args.m, m_c=args.m_c, rho_within=args.rho_within,
        rho_cross=args.rho_cross, d_values=_floats(args.d_values),
    )
    status = "PASS" if check.passed else "FAIL"
    print(f"{status} margin={check.margin:.6g} var_equal={check.var_equal:.6g}")
    for d, v in sorted(check.strata_vars.items()):
        print(f"  d={d:g}: var={v:.6g} (deficit {check.var_equal - v:.6g})")
    return 0 if check.passed else 1


if __name__ == "__main__":
    sys.exit(main())
