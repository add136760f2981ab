"""Command-line front end.

Subcommands: simulate, sweep, verify, instance gen, instance cycles.

Distribution notation (also used in config files):
    exp:<mean>             exponential with the given mean
    det:<value>            deterministic
    uniform:<lo>,<hi>      uniform on (lo, hi), 0 < lo < hi
    pareto:<shape>         Pareto, scale 1, support [1, inf)
    hyperexp:<w1>,..;<r1>,..  hyperexponential (weights; rates)
    scaled:<r>:<inner>     inner samples divided by r in (0, 1)

Sweep config (INI):
    [system]   arrival, size                      distribution specs
    [sweep]    grid, policies, cycles, seed       r values / names / int / int
    [analysis] kappas, s, zeta                    moment orders / split params

Every output is a pure function of (config, seed); timestamps appear only
inside a "meta" JSON field.  Per-point seeds are sha256(master:point:policy)
truncated to 63 bits, so each sweep point reruns independently.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

from . import acceptance
from .distributions import (
    DistributionSpec,
    format_spec,
    moments,
    parse_spec,
    scaled,
    system_load,
)
from .errors import BlindqError, ParameterError
from .estimators import (
    AnalysisParams,
    exponent_fit,
    functional_moment,
    holder_diagnostic,
    ratio_curve,
    regen_mean_sojourn,
    tail_split,
)
from .instance import busy_periods, cycles_to_csv, generate, parse, serialize
from .policies import POLICY_NAMES
from .simulator import jobs_to_csv, sim_cycles_to_csv, simulate, summary_stats


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def derive_seed(master: int, point_index: int, policy_index: int) -> int:
    digest = hashlib.sha256(f"{master}:{point_index}:{policy_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def default_jobs() -> int:
    env = os.environ.get("BLINDQ_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# --- simulate ----------------------------------------------------------------

def _load_instance(args):
    if args.instance:
        return parse(args.instance)
    if not (args.arrival and args.size and args.cycles is not None):
        raise ParameterError("need either --instance or --arrival/--size/--cycles")
    return generate(parse_spec(args.arrival), parse_spec(args.size),
                    args.cycles, seed=args.seed)


def cmd_simulate(args) -> int:
    inst = _load_instance(args)
    result = simulate(inst, args.policy, seed=args.seed)
    summary = summary_stats(result)
    if len(result.cycles) >= 2:
        est = regen_mean_sojourn(result)
        summary["regen_mean_sojourn"] = {"point": est.point, "ci": est.ci_halfwidth,
                                         "cycles": est.cycles_used}
    summary["meta"] = {"created": _now()}
    prefix = args.out
    jobs_to_csv(result, f"{prefix}.jobs.csv")
    sim_cycles_to_csv(result, f"{prefix}.cycles.csv")
    with open(f"{prefix}.summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{result.policy}: {summary['jobs']} jobs, {summary['cycles']} cycles, "
          f"total flow {summary['total_flow']:.6g}, "
          f"mean sojourn {summary['mean_sojourn']:.6g}")
    print(f"wrote {prefix}.jobs.csv, {prefix}.cycles.csv, {prefix}.summary.json")
    return 0


# --- sweep -------------------------------------------------------------------

@dataclass
class SweepConfig:
    arrival: DistributionSpec
    size: DistributionSpec
    grid: list[float]
    policies: list[str]
    cycles: int
    seed: int
    kappas: list[float]
    s: float
    zeta: float

    @classmethod
    def load(cls, path: str) -> "SweepConfig":
        cp = configparser.ConfigParser()
        read = cp.read(path)
        if not read:
            raise ParameterError(f"cannot read config file {path!r}")
        try:
            arrival = parse_spec(cp.get("system", "arrival"))
            size = parse_spec(cp.get("system", "size"))
            grid = [float(x) for x in cp.get("sweep", "grid").split(",") if x.strip()]
            policies = [p.strip().lower()
                        for p in cp.get("sweep", "policies").split(",") if p.strip()]
            cycles = cp.getint("sweep", "cycles")
            seed = cp.getint("sweep", "seed", fallback=0)
            kappas = [float(x) for x in cp.get("analysis", "kappas", fallback="1,2").split(",")
                      if x.strip()]
            s = cp.getfloat("analysis", "s", fallback=1.5)
            zeta = cp.getfloat("analysis", "zeta", fallback=15.0)
        except (configparser.Error, ValueError) as exc:
            raise ParameterError(f"bad sweep config: {exc}") from None
        cfg = cls(arrival, size, grid, policies, cycles, seed, kappas, s, zeta)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.grid:
            raise ParameterError("sweep grid is empty")
        if any(not 0 < r < 1 for r in self.grid):
            raise ParameterError("grid values must lie in (0, 1)")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ParameterError("grid values must be strictly increasing")
        if not self.policies:
            raise ParameterError("no policies selected")
        for p in self.policies:
            if p not in POLICY_NAMES:
                raise ParameterError(f"unknown policy {p!r}")
        if self.cycles < 100:
            raise ParameterError("cycles per point must be >= 100")
        if any(k < 1 for k in self.kappas):
            raise ParameterError("kappas must be >= 1")


def _sweep_point(payload: dict) -> dict:
    """One (grid point, policy) run; module-level so it pickles for workers."""
    arrival = parse_spec(payload["arrival"])
    size = parse_spec(payload["size"])
    r = payload["r"]
    seed = payload["seed"]
    arrival_r = scaled(arrival, r)
    rho, mu = system_load(arrival_r, size)
    inst = generate(arrival_r, size, payload["cycles"], seed=seed)
    result = simulate(inst, payload["policy"], seed=seed)
    est = regen_mean_sojourn(result)
    alpha = moments(size)[2]
    params = AnalysisParams(alpha=alpha, s=payload["s"], zeta=payload["zeta"])
    split = tail_split(result, params)
    bound = holder_diagnostic(result, params)
    mrows = []
    for kappa in payload["kappas"]:
        for fn in ("P", "N"):
            m = functional_moment(result.cycles, fn, kappa, alpha=alpha)
            mrows.append((fn, kappa, m.point, m.ci_halfwidth, m.cycles_used))
    return {
        "point_index": payload["point_index"],
        "policy_index": payload["policy_index"],
        "policy": payload["policy"],
        "r": r,
        "rho": rho,
        "mu": mu,
        "seed": seed,
        "cycles": len(result.cycles),
        "t_point": est.point,
        "t_ci": est.ci_halfwidth,
        "moments": mrows,
        "tail_small": split.small,
        "tail_large": split.large,
        "tail_threshold": split.threshold,
        "holder_bound": bound,
    }


def cmd_sweep(args) -> int:
    cfg = SweepConfig.load(args.config)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    payloads = []
    for pi, r in enumerate(cfg.grid):
        for qi, pol in enumerate(cfg.policies):
            payloads.append({
                "arrival": format_spec(cfg.arrival),
                "size": format_spec(cfg.size),
                "r": r,
                "policy": pol,
                "cycles": cfg.cycles,
                "seed": derive_seed(cfg.seed, pi, qi),
                "kappas": cfg.kappas,
                "s": cfg.s,
                "zeta": cfg.zeta,
                "point_index": pi,
                "policy_index": qi,
            })
    workers = args.jobs or default_jobs()
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]
    results.sort(key=lambda d: (d["point_index"], d["policy_index"]))

    est_path = os.path.join(outdir, "estimates.csv")
    with open(est_path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["functional", "kappa", "rho", "point", "ci", "cycles", "policy"])
        for d in results:
            w.writerow(["T", 1.0, repr(d["rho"]), repr(d["t_point"]),
                        repr(d["t_ci"]), d["cycles"], d["policy"]])
            for fn, kappa, point, ci, ncyc in d["moments"]:
                w.writerow([fn, kappa, repr(d["rho"]), repr(point),
                            repr(ci), ncyc, d["policy"]])

    ratio_path = os.path.join(outdir, "ratios.csv")
    with open(ratio_path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho", "policy", "t_policy", "t_srpt", "ratio", "normalized"])
        if "srpt" in cfg.policies:
            srpt_pts = [(d["rho"], d["t_point"]) for d in results if d["policy"] == "srpt"]
            for pol in cfg.policies:
                if pol == "srpt":
                    continue
                pol_pts = [(d["rho"], d["t_point"]) for d in results if d["policy"] == pol]
                for row in ratio_curve(pol_pts, srpt_pts):
                    w.writerow([repr(row.rho), pol, repr(row.t_policy), repr(row.t_srpt),
                                repr(row.ratio), repr(row.normalized)])

    # Busy-period functionals are policy independent; fit on the first
    # policy's instances.
    fits = {}
    first = cfg.policies[0]
    if len(cfg.grid) >= 3:
        for kappa in cfg.kappas:
            for fn in ("P", "N"):
                pts = []
                for d in results:
                    if d["policy"] != first:
                        continue
                    for mfn, mk, point, _ci, _n in d["moments"]:
                        if mfn == fn and mk == kappa:
                            pts.append((d["rho"], point))
                fit = exponent_fit(pts)
                fits[f"{fn}^{kappa:g}"] = {"slope": fit.slope, "stderr": fit.stderr,
                                           "intercept": fit.intercept,
                                           "target": 1.0 - 2.0 * kappa}
    with open(os.path.join(outdir, "exponents.json"), "w") as fh:
        json.dump({"fits": fits, "policy": first}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    summary = {
        "config": {
            "arrival": format_spec(cfg.arrival),
            "size": format_spec(cfg.size),
            "grid": cfg.grid,
            "policies": cfg.policies,
            "cycles": cfg.cycles,
            "seed": cfg.seed,
            "kappas": cfg.kappas,
            "s": cfg.s,
            "zeta": cfg.zeta,
        },
        "points": [{k: v for k, v in d.items() if k != "moments"} for d in results],
        "meta": {"created": _now()},
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"sweep complete: {len(cfg.grid)} points x {len(cfg.policies)} policies "
          f"-> {outdir}/")
    return 0


# --- verify ------------------------------------------------------------------

def cmd_verify(args) -> int:
    results = acceptance.run_all(profile=args.profile, seed=args.seed,
                                 jobs=args.jobs or default_jobs(),
                                 progress=lambda s: print(s, flush=True))
    report = {
        "profile": args.profile,
        "seed": args.seed,
        "criteria": [
            {"id": r.cid, "name": r.name, "passed": r.passed, "details": r.details}
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
        "meta": {"created": _now()},
    }
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return 0 if report["all_passed"] else 1


# --- instance utilities --------------------------------------------------------

def cmd_instance_gen(args) -> int:
    inst = generate(parse_spec(args.arrival), parse_spec(args.size),
                    args.cycles, seed=args.seed)
    serialize(inst, args.out)
    print(f"wrote {len(inst)} jobs ({args.cycles} cycles) to {args.out}")
    return 0


def cmd_instance_cycles(args) -> int:
    inst = parse(args.infile)
    cycles = busy_periods(inst)
    text = cycles_to_csv(cycles, args.out)
    if args.out:
        print(f"wrote {len(cycles)} cycles to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="blindq",
        description="Preemptive single-server queue simulation: blind "
                    "multilevel-feedback policies vs SRPT and classical baselines.")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one policy on one instance")
    sim.add_argument("--instance", help="instance file (blindq-instance v1)")
    sim.add_argument("--arrival", help="interarrival spec, e.g. exp:1.25")
    sim.add_argument("--size", help="job size spec, e.g. exp:1")
    sim.add_argument("--cycles", type=int, help="busy periods to generate")
    sim.add_argument("--policy", required=True,
                     help="one of " + " | ".join(POLICY_NAMES))
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default="simout", help="output file prefix")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="heavy-traffic sweep from a config file")
    sw.add_argument("--config", required=True, help="INI config, see module help")
    sw.add_argument("--out", default="sweep_out", help="output directory")
    sw.add_argument("--jobs", type=int, default=None,
                    help="parallel workers (default: BLINDQ_JOBS or cpu count)")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--profile", choices=("quick", "full", "smoke"), default="quick")
    ver.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    ver.add_argument("--jobs", type=int, default=None)
    ver.add_argument("--report", help="write JSON verdicts here")
    ver.set_defaults(func=cmd_verify)

    instp = sub.add_parser("instance", help="instance file utilities")
    isub = instp.add_subparsers(dest="subcommand", required=True)
    gen = isub.add_parser("gen", help="generate an instance file")
    gen.add_argument("--arrival", required=True)
    gen.add_argument("--size", required=True)
    gen.add_argument("--cycles", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_instance_gen)
    cyc = isub.add_parser("cycles", help="busy-period decomposition to CSV")
    cyc.add_argument("--in", dest="infile", required=True)
    cyc.add_argument("--out", default=None)
    cyc.set_defaults(func=cmd_instance_cycles)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except BlindqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
