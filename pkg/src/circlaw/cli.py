"""Command-line entry point: ``circlaw <subcommand> [options]``.

Exit codes: 0 success, 1 usage/config error, 2 a checked bound failed,
3 resource or solver error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import dpp, experiments, io, kernels, spiral
from .measures import Annulus, Disc, DiscComplement, DomainError, InitialSegment
from .sampler import EigensolverError, sample_spectrum
from .transport import (
    CertificationError,
    ResourceLimitError,
    wasserstein_to_uniform,
)

EXIT_OK, EXIT_USAGE, EXIT_LEDGER, EXIT_SOLVER = 0, 1, 2, 3

COLUMNS_HELP = f"""
CSV columns (stable):
  rates.csv       {','.join(experiments.RATE_COLUMNS)}
                  value is W_p(mu_n, rho_M) with rho_M the M-point lattice; [lower, upper]
                  brackets W_p(mu_n, nu) using +-8/sqrt(M); sharp_* use the exact sector
                  radius; spiral_upper = spiral coupling cost + 8/sqrt(n) + 8/sqrt(M).
  deviations.csv  {','.join(experiments.DEVIATION_COLUMNS)}
                  a,b = (j, theta) for counting tables, (ell, -) for eigen-deviation, (m, -) for
                  edge rows; x = t, s or p; lo,hi = 99% Wilson interval; status pass|fail|info.
  ledger.csv      {','.join(experiments.LEDGER_COLUMNS)}
  analytic table  {','.join(dpp.ANALYTIC_COLUMNS)}
  plan csv        source_index,target_index,mass

Config file: flat 'key = value' lines, lists comma-separated, '#' comments,
tolerances as 'tol.<name> = value'. Keys: n_grid, reps, p_list, seed, m_policy,
M_factor, solver_mode, output_dir, threads, counting_*, deviation_*, edge_*,
tv_n, coupling_n, quantization_n, means_n, means_r, variance_n, outside_n, outside_R.
Command-line flags override file values.
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def build_parser():
    ap = _Parser(prog="circlaw", description="Ginibre spectra vs the circular law: couplings, "
                 "Wasserstein rates and counting statistics.", epilog=COLUMNS_HELP,
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, help="master seed (default from config)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--threads", type=int, help="worker threads for replicates")
    ap.add_argument("--solver", choices=("exact", "auction"), help="assignment solver mode")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="sample spectra and write them in spiral order")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=1)

    p = sub.add_parser("lattice", help="write the predicted-location lattice")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, help="annulus count; default from --m-policy")
    p.add_argument("--m-policy", choices=("paper", "zero-override"), default="paper")

    p = sub.add_parser("wasserstein", help="certified W_p(mu_n, uniform) for one spectrum")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--spectrum", help="spectrum file")
    g.add_argument("--n", type=int, help="sample a fresh spectrum of this size")
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--M", type=int, help="lattice resolution (perfect square >= n)")

    p = sub.add_parser("counts", help="exact counting mean/variance for a region")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--region", action="append", required=True,
                   help="disc:r | complement:R | annulus:r_in,r_out | segment:j,theta (repeatable)")
    p.add_argument("--table", help="also write the analytic CSV here")

    sub.add_parser("deviations", help="counting, eigenvalue-deviation and edge campaigns")
    p = sub.add_parser("rates", help="Wasserstein rate campaign")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("tv", help="TV distance of the mean spectral measure to uniform")
    p.add_argument("--n", type=_ints, default=(1, 4, 16, 64, 256))

    sub.add_parser("verify", help="deterministic analytic ledger")
    p = sub.add_parser("report", help="run every campaign and emit all report files")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


def _config(args):
    cfg = experiments.ExperimentConfig()
    if args.config:
        cfg = experiments.load_config(args.config, cfg)
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.out:
        kw["output_dir"] = args.out
    if args.threads is not None:
        kw["threads"] = args.threads
    if args.solver:
        kw["solver_mode"] = args.solver
    return cfg.replace(**kw) if kw else cfg


def _parse_region(spec, n):
    kind, _, rest = spec.partition(":")
    vals = _floats(rest) if rest else ()
    if kind == "disc" and len(vals) == 1:
        return Disc(vals[0])
    if kind == "complement" and len(vals) == 1:
        return DiscComplement(vals[0])
    if kind == "annulus" and len(vals) == 2:
        return Annulus(*vals)
    if kind == "segment" and len(vals) == 2:
        return InitialSegment(int(vals[0]), vals[1], n)
    raise DomainError(f"bad region spec {spec!r}")


def _emit(report, cfg, fmt="csv"):
    for p in experiments.emit_report(report, cfg.output_dir, fmt):
        print(p)
    return EXIT_LEDGER if report.failed() else EXIT_OK


def _run(args, cfg):
    os.makedirs(cfg.output_dir, exist_ok=True)
    if args.cmd == "sample":
        for r in range(args.reps):
            s = sample_spectrum(args.n, cfg.seed, r)
            path = os.path.join(cfg.output_dir, f"spectrum_n{args.n}_s{cfg.seed}_r{r}.txt")
            io.write_spectrum(path, s)
            print(path)
        return EXIT_OK
    if args.cmd == "lattice":
        m = args.m if args.m is not None else spiral.choose_m(args.n, args.m_policy == "zero-override")
        ref = spiral.build_reference_measure(args.n, m)
        path = os.path.join(cfg.output_dir, f"lattice_n{args.n}_m{m}.txt")
        io.write_lattice(path, ref)
        print(path)
        return EXIT_OK
    if args.cmd == "wasserstein":
        s = io.read_spectrum(args.spectrum) if args.spectrum else sample_spectrum(args.n, cfg.seed, args.replicate)
        M = args.M or cfg.resolution(s.n)
        c = wasserstein_to_uniform(s, args.p, M, cfg.solver_mode)
        print(json.dumps({"n": s.n, "p": args.p, "M": M, "value": c.value, "lower": c.lower, "upper": c.upper,
                          "sharp_lower": c.sharp_lower, "sharp_upper": c.sharp_upper, "method": c.method,
                          "duality_gap": c.duality_gap}, indent=1))
        return EXIT_OK
    if args.cmd == "counts":
        stats = [dpp.expected_count(_parse_region(r, args.n), args.n) for r in args.region]
        for st in stats:
            print(f"{st.region}: mean={st.mean!r} variance={st.variance!r} method={st.method}")
        if args.table:
            dpp.write_analytic_table(args.table, stats)
        return EXIT_OK
    if args.cmd == "tv":
        bad = False
        for n in args.n:
            d = dpp.tv_mean_vs_uniform(n)
            lo, hi = 1 / (math.e * math.sqrt(n)), math.e / math.sqrt(n)
            ok = lo - 1e-8 <= d <= hi
            bad |= not ok
            print(f"n={n} tv={d!r} lower={lo!r} upper={hi!r} {'pass' if ok else 'FAIL'}")
        return EXIT_LEDGER if bad else EXIT_OK
    if args.cmd == "verify":
        return _emit(experiments.CampaignReport(ledger=experiments.verify_analytics(cfg)), cfg)
    if args.cmd == "deviations":
        tables = [experiments.verify_counting_concentration(cfg), experiments.verify_eigenvalue_deviation(cfg),
                  experiments.verify_edge_moment(cfg)]
        return _emit(experiments.CampaignReport(deviations=tables), cfg)
    if args.cmd == "rates":
        return _emit(experiments.CampaignReport(rates=experiments.run_rate_experiment(cfg)), cfg, args.format)
    if args.cmd == "report":
        rep = experiments.CampaignReport(
            rates=experiments.run_rate_experiment(cfg),
            deviations=[experiments.verify_counting_concentration(cfg),
                        experiments.verify_eigenvalue_deviation(cfg), experiments.verify_edge_moment(cfg)],
            ledger=experiments.verify_analytics(cfg))
        return _emit(rep, cfg, args.format)
    raise AssertionError(args.cmd)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _config(args)
        return _run(args, cfg)
    except (experiments.ConfigError, DomainError, io.FormatError, FileNotFoundError) as exc:
        print(f"circlaw: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceLimitError, CertificationError, kernels.KernelError, EigensolverError,
            experiments.AnalyticsError, dpp.QuadratureError) as exc:
        print(f"circlaw: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"circlaw: I/O error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
