"""Command-line entry point: ``simulate``, ``kernel-eval``, ``verify`` and ``report``."""
from __future__ import annotations

import argparse
import io
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import parallel, sim_particles
from .kernel_ct import KernelPoint, kernel
from .kernel_dt import DiscretePoint, kernel_d, rescaled_kernel
from .verify import studies, suites
from .verify.statistics import DistanceReport, default_edges

log = logging.getLogger("gtdrift")

CSV_HEADER = "replica,n,k,value"


# --- output helpers --------------------------------------------------------------

def csv_text(flat: np.ndarray, N: int, first_replica: int = 0) -> str:
    """Rows ``replica,n,k,value`` in replica-major, then level, then index order."""
    flat = np.asarray(flat)
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    nk = [(n, k) for n in range(1, N + 1) for k in range(1, n + 1)]
    integer = np.issubdtype(flat.dtype, np.integer)
    for r in range(flat.shape[0]):
        row = flat[r]
        rep = first_replica + r
        if integer:
            buf.writelines(f"{rep},{n},{k},{int(v)}\n" for (n, k), v in zip(nk, row))
        else:
            buf.writelines(f"{rep},{n},{k},{float(v):.17g}\n" for (n, k), v in zip(nk, row))
    return buf.getvalue()


def read_csv(path: str | Path) -> np.ndarray:
    """Flat patterns ``(replicas, N(N+1)/2)`` from a CSV written by :func:`csv_text`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError(f"{path}: no samples")
    rep = data[:, 0].astype(np.int64)
    n = data[:, 1].astype(np.int64)
    k = data[:, 2].astype(np.int64)
    N = int(n.max())
    reps, idx = np.unique(rep, return_inverse=True)
    out = np.full((reps.size, N * (N + 1) // 2), np.nan)
    out[idx, n * (n - 1) // 2 + k - 1] = data[:, 3]
    if np.isnan(out).any():
        raise ValueError(f"{path}: incomplete patterns")
    return out


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def emit(text: str, output: str | None) -> None:
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def parse_floats(text: str | None):
    return None if text is None else [float(x) for x in text.split(",") if x.strip()]


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:step`` inclusive of ``hi`` up to rounding."""
    lo, hi, step = (float(x) for x in text.split(":"))
    if step <= 0 or hi < lo:
        raise ValueError("grid must be lo:hi:step with step > 0 and hi >= lo")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


# --- subcommands ---------------------------------------------------------------

def cmd_simulate(args, cfg: cfgmod.SimConfig) -> int:
    N, seed, reps = cfg.N, cfg.seed, cfg.replicas
    if args.model == "matrix":
        flat = studies.sample_matrix_patterns(N, cfg.t, cfg.drift_spec(), reps, seed, cfg.workers)
    elif args.model == "warren":
        flat, frac = studies.sample_warren_patterns(N, cfg.t, cfg.dt, cfg.drift_spec(), reps, seed, cfg.workers)
        log.info("clamp fraction %.4g", frac)
    else:
        r = cfg.rate_spec()
        if cfg.T is not None:
            raw = studies.sample_particle_patterns(N, cfg.tau * cfg.T, r, reps, seed, cfg.workers)
            flat = sim_particles.rescale(raw, cfg.tau, cfg.T)
        else:
            flat = studies.sample_particle_patterns(N, cfg.t, r, reps, seed, cfg.workers)
    emit(csv_text(flat, N), cfg.output)
    return 0


def _levels(args, N):
    return [int(x) for x in args.levels.split(",")] if args.levels else list(range(1, N + 1))


def cmd_kernel_eval(args, cfg: cfgmod.SimConfig) -> int:
    d = cfg.drift_spec()
    levels = _levels(args, cfg.N)
    doc = {"which": args.which, "N": cfg.N}
    if args.which == "discrete":
        r = cfg.rate_spec()
        mean = cfg.t * max(r.rates)
        lo, hi, step = (args.grid or f"{-cfg.N - 1}:{int(mean + 10 * np.sqrt(mean) + 10)}:1").split(":")
        grid = np.arange(int(lo), int(hi) + 1, int(step))

        def fn(x, n):
            return kernel_d(cfg.t, DiscretePoint(x, n), DiscretePoint(x, n), r, cfg.tol)
        doc.update(t=cfg.t, rates=list(r.rates))
    else:
        grid = parse_grid(args.grid or "-4:4:0.05")
        if args.which == "continuous":
            def fn(x, n):
                return kernel(cfg.t, KernelPoint(x, n), KernelPoint(x, n), d, cfg.tol)
            doc.update(t=cfg.t)
        else:
            if cfg.T is None:
                raise cfgmod.ConfigError("T", "rescaled kernel needs T")

            def fn(x, n):
                return rescaled_kernel(cfg.tau, cfg.T, KernelPoint(x, n), KernelPoint(x, n), d, cfg.tol)
            doc.update(tau=cfg.tau, T=cfg.T)
        doc.update(drifts=list(d.drifts))
    values = {}
    for n in levels:
        parts = parallel.run_replicas(lambda f, c, n=n: np.atleast_1d(fn(grid[f:f + c], n)),
                                      grid.size, cfg.workers, block=256)
        values[str(n)] = [float(v) for v in np.concatenate(parts)] if parts else []
    doc["grid"] = [int(g) if args.which == "discrete" else float(g) for g in grid]
    doc["one_point"] = values
    emit(json_text(doc), cfg.output)
    return 0


def run_suite(suite: str, cfg: cfgmod.SimConfig, model: str = "matrix", samples: str | None = None,
              ladder: bool = False) -> list[DistanceReport]:
    th = cfg.thresholds
    if suite == "identities":
        ensemble = suites.drift_ensemble(cfg.seed, count=20, max_N=cfg.N)
        reports = suites.identity_reports(ensemble, (0.5, 1.0, 2.0), th, seed=cfg.seed)
        return reports + suites.discrete_reports(th, seed=cfg.seed, max_N=min(cfg.N, 4))
    if suite == "pde":
        return suites.pde_reports(cfg.drift_spec(), cfg.t, th, seed=cfg.seed)
    d = cfg.drift_spec()
    if suite == "mc-vs-kernel":
        key = "mc_matrix" if model == "matrix" else "mc_warren"
        if samples:
            flat = read_csv(samples)
            reports = studies.one_point_reports(flat, cfg.t, d, default_edges(cfg.t, d, cfg.bin_width),
                                                th[key], label=f"{Path(samples).name}")
        else:
            reports = studies.mc_vs_kernel(model, cfg.N, cfg.t, d, cfg.replicas, cfg.seed, cfg.dt,
                                           th[key], cfg.bin_width, cfg.workers)
        if ladder and model == "warren":
            reports += suites.ladder_reports(cfg.N, cfg.t, cfg.dt_ladder, d, cfg.replicas, cfg.seed, th,
                                             cfg.bin_width, cfg.workers)
        return reports
    if suite == "scaling":
        reports = suites.scaling_reports(cfg.tau, cfg.T_ladder, d, cfg.replicas, cfg.seed, th,
                                         cfg.bin_width or 0.1, cfg.workers)
        errs = suites.rescaled_kernel_errors(cfg.tau, cfg.T_ladder, d, suites.default_scaling_points(
            tuple(1 + i % cfg.N for i in range(5))))
        bad = sum(not studies.non_increasing(errs[:, j], th["slack"]) for j in range(errs.shape[1]))
        reports.append(DistanceReport("rescaled kernel pointwise", "sup", bad, 0.5,
                                      {"errors": errs.tolist(), "T": list(cfg.T_ladder)}))
        return reports
    raise ValueError(f"unknown suite {suite!r}")


def cmd_verify(args, cfg: cfgmod.SimConfig) -> int:
    reports = run_suite(args.suite, cfg, args.model, args.samples, args.ladder)
    ok = all(r.passed for r in reports)
    doc = {"suite": args.suite, "seed": cfg.seed, "N": cfg.N, "pass": ok,
           "reports": [r.to_dict() for r in reports]}
    emit(json_text(doc), cfg.output)
    return 0 if ok else 1


def _collect(doc) -> list[dict]:
    if isinstance(doc, list):
        return [r for item in doc for r in _collect(item)]
    if isinstance(doc, dict) and "reports" in doc:
        return _collect(doc["reports"])
    if isinstance(doc, dict) and {"test", "pass"} <= doc.keys():
        return [doc]
    raise ValueError("not a report document")


def summary_table(reports: list[dict]) -> str:
    width = max([len(r["test"]) for r in reports] + [4])
    lines = [f"{'test':<{width}}  {'statistic':<9}  {'value':>12}  {'threshold':>12}  pass"]
    for r in reports:
        lines.append(f"{r['test']:<{width}}  {r['statistic']:<9}  {r['value']:>12.4g}  "
                     f"{r['threshold']:>12.4g}  {'yes' if r['pass'] else 'NO'}")
    return "\n".join(lines) + "\n"


def cmd_report(args, cfg: cfgmod.SimConfig) -> int:
    reports = []
    for path in args.inputs:
        with open(path, encoding="utf-8") as fh:
            reports += _collect(json.load(fh))
    ok = all(r["pass"] for r in reports)
    sys.stderr.write(summary_table(reports))
    emit(json_text({"pass": ok, "reports": reports}), cfg.output)
    return 0 if ok else 1


# --- argument parsing ----------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (each flag overrides its config key)")
    g.add_argument("--config", help="YAML configuration file")
    g.add_argument("--N", type=int)
    g.add_argument("--t", type=float)
    g.add_argument("--tau", type=float)
    g.add_argument("--T", type=float)
    g.add_argument("--T-ladder", dest="T_ladder", help="comma-separated T values")
    g.add_argument("--drifts", help="comma-separated drifts")
    g.add_argument("--rates", help="comma-separated jump rates")
    g.add_argument("--dt", type=float)
    g.add_argument("--dt-ladder", dest="dt_ladder", help="comma-separated decreasing step sizes")
    g.add_argument("--replicas", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int, help=f"worker threads (default ${parallel.WORKERS_ENV} or CPU count)")
    g.add_argument("--tol", type=float)
    g.add_argument("--bin-width", dest="bin_width", type=float)
    g.add_argument("--output", "-o", help="output file (default stdout)")
    g.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gtdrift", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample patterns to CSV")
    p.add_argument("--model", choices=("particles", "matrix", "warren"), required=True)
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("kernel-eval", help="one-point functions on a grid, as JSON")
    p.add_argument("--which", choices=("continuous", "discrete", "rescaled"), default="continuous")
    p.add_argument("--grid", help="lo:hi:step")
    p.add_argument("--levels", help="comma-separated levels (default all)")
    _common(p)
    p.set_defaults(func=cmd_kernel_eval)

    p = sub.add_parser("verify", help="run a check suite, write a JSON report")
    p.add_argument("--suite", choices=suites.SUITES, required=True)
    p.add_argument("--model", choices=("matrix", "warren"), default="matrix")
    p.add_argument("--samples", help="CSV of samples to test instead of simulating")
    p.add_argument("--ladder", action="store_true", help="also run the step-size ladder (warren)")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="merge JSON reports into one summary")
    p.add_argument("inputs", nargs="+")
    _common(p)
    p.set_defaults(func=cmd_report)
    return parser


def resolve_config(args) -> cfgmod.SimConfig:
    cfg = cfgmod.load(args.config)
    ladder = parse_floats(args.T_ladder)
    dts = parse_floats(args.dt_ladder)
    return cfgmod.override(
        cfg, N=args.N, t=args.t, tau=args.tau, T=args.T, T_ladder=ladder, drifts=parse_floats(args.drifts),
        rates=parse_floats(args.rates), dt=args.dt, dt_ladder=dts, replicas=args.replicas, seed=args.seed,
        workers=args.workers, tol=args.tol, bin_width=args.bin_width, output=args.output)


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Join ``--flag -1,0,1`` into ``--flag=-1,0,1`` so lists and grids may start with a minus."""
    out: list[str] = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and re.match(r"^-[\d.]", tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_attach_negative_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except cfgmod.ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
