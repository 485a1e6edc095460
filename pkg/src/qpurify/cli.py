"""Command-line front end: ``qpurify <subcommand> [flags]``.

Every CSV is written with a ``<name>.manifest.json`` beside it. Outputs are
staged to temporary files and only moved into place once every output of the
command has been produced, so a failing run leaves nothing behind.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__, analytics
from .analytics import QuadratureError, RootFindingError
from .ensemble import (DEFAULT_DT, DEFAULT_N_TRAJ, DEFAULT_SEED, SimConfig,
                       log_entropy_edges, purity_snapshot, run_ensemble)
from .fokker_planck import FokkerPlanckError, FPGrid, fokker_planck_survival
from .protocols import Protocol

log = logging.getLogger("qpurify")

FIGURE1_TIMES = (1.72694, 3.2806)
FIGURE23_EPSILONS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4, 1e-5, 1e-6)
ANALYTIC_QUANTITIES = ("mean_purity", "epsilon_asymptotic", "tau_c", "tau_q", "mean_fpt",
                       "ratio", "wp_q", "purity_pdf", "abs_z", "fp_survival")


class CLIError(RuntimeError):
    pass


# ------------------------------------------------------------------ output

def format_value(v):
    """CSV cell text: integers as-is, scientific notation below 1e-4 in magnitude."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v != 0.0 and abs(v) < 1e-4:
        return f"{v:.10e}"
    return f"{v:.12g}"


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise CLIError(f"row has {len(row)} cells, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(u) for u in v]
    if isinstance(v, Protocol):
        return v.value
    return v


class OutputSet:
    """CSV files plus manifests, committed together or not at all."""

    def __init__(self, out_dir, command, seed=None):
        self.out_dir = out_dir
        self.command = command
        self.seed = seed
        self.started = time.perf_counter()
        self._pending = []

    def add(self, name, header, rows, config):
        path = os.path.join(self.out_dir, name)
        self._pending.append((path, csv_text(header, rows), config))
        return path

    def commit(self):
        os.makedirs(self.out_dir, exist_ok=True)
        duration = time.perf_counter() - self.started
        staged, done = [], []
        try:
            for path, text, config in self._pending:
                manifest = {
                    "command": self.command,
                    "output": os.path.basename(path),
                    "version": __version__,
                    "seed": self.seed,
                    "duration_s": round(duration, 3),
                }
                for k, v in config.items():
                    manifest[k] = _jsonable(v)
                for target, body in ((path, text),
                                     (path + ".manifest.json",
                                      json.dumps(manifest, indent=2) + "\n")):
                    tmp = target + ".tmp"
                    with open(tmp, "w", encoding="utf-8", newline="") as fh:
                        fh.write(body)
                    staged.append((tmp, target))
            for tmp, target in staged:
                os.replace(tmp, target)
                done.append(target)
        except BaseException:
            for tmp, _ in staged:
                if os.path.exists(tmp):
                    os.remove(tmp)
            for target in done:
                os.remove(target)
            raise
        return [p for p, _, _ in self._pending]


# --------------------------------------------------------------- commands

def _config(args, epsilon, protocol=None, **extra):
    return SimConfig(epsilon=epsilon,
                     protocol=protocol if protocol is not None else args.protocol,
                     dt=args.dt, t_max=args.t_max, n_traj=args.n_traj,
                     master_seed=args.seed, **extra)


def _sim_flags(cfg, workers):
    d = cfg.as_dict()
    d["workers"] = workers
    return d


def _tag(v):
    return format_value(float(v)).replace("+", "")


def _log10_s_floor(args, t):
    if args.log10_s_min is not None:
        return args.log10_s_min
    # artanh|z| is a mixture of N(+-4t, 4t); go 8 sd beyond the centre, s ~ 2 e^{-2u}
    u = 4.0 * t + 16.0 * math.sqrt(t)
    return min(-16.0, math.floor(math.log10(2.0) - 2.0 * u / math.log(10.0)))


def cmd_figure1(args):
    eps = args.epsilon[0]
    times = args.t or list(FIGURE1_TIMES)
    out = OutputSet(args.out, "figure1", args.seed)
    t_max = max(times) * (1 + 1e-9) + args.dt
    for t in times:
        cfg = SimConfig(epsilon=eps, protocol=args.protocol, dt=args.dt, t_max=t_max,
                        n_traj=args.n_traj, master_seed=args.seed)
        lo_edge = _log10_s_floor(args, t)
        hist = purity_snapshot(cfg, t, edges=log_entropy_edges(lo=lo_edge),
                               workers=args.workers)
        density = hist.density()
        lo, hi = hist.edges[:-1], hist.edges[1:]
        mid = 0.5 * (lo + hi)
        analytic = analytics.log10_entropy_pdf(mid, t)
        jacobs = math.log10(analytics.jacobs_linear_entropy(t))
        rows = [(lo[i], hi[i], mid[i], hist.counts[i], density[i], analytic[i], jacobs)
                for i in range(len(mid))]
        header = ("log10_s_lo", "log10_s_hi", "log10_s_mid", "count",
                  "empirical_density", "analytic_density", "jacobs_log10_s")
        flags = _sim_flags(cfg, args.workers)
        flags.update(t=t, log10_s_min=lo_edge, n_outside=cfg.n_traj - hist.total)
        out.add(f"figure1_t{_tag(t)}.csv", header, rows, flags)
    return out


def cmd_figure2_3(args):
    epsilons = args.epsilon if args.epsilon_given else list(FIGURE23_EPSILONS)
    out = OutputSet(args.out, "figure2-3", args.seed)
    table = []
    censored = {}
    for eps in epsilons:
        cfg = _config(args, eps, protocol=Protocol.NO_FEEDBACK)
        summary = run_ensemble(cfg, workers=args.workers, bins=args.bins)
        tq = analytics.tau_q(eps)
        exact = analytics.mean_fpt_exact(0.0, cfg.Z)
        censored[format_value(eps)] = summary.n_censored
        table.append((eps, cfg.n_traj, summary.n_censored, summary.mean, summary.std,
                      summary.se, exact, tq, tq / summary.mean, analytics.ratio_curve(eps),
                      tq - summary.mean - summary.std))
        hist = summary.histogram
        rows = [(hist.edges[i], hist.edges[i + 1], hist.centres[i], hist.counts[i],
                 hist.density()[i], tq) for i in range(len(hist.counts))]
        flags = _sim_flags(cfg, args.workers)
        flags.update(n_censored=summary.n_censored, bins=args.bins)
        out.add(f"figure2_fpt_eps{_tag(eps)}.csv",
                ("t_lo", "t_hi", "t_mid", "count", "density", "jacobs_T"), rows, flags)
    header = ("epsilon", "n_traj", "n_censored", "mc_mean_T", "mc_std_T", "mc_se_T",
              "exact_mean_T", "T_q", "ratio_mc", "ratio_curve", "T_q_minus_mean_minus_std")
    flags = {"epsilon": list(epsilons), "dt": args.dt, "t_max": args.t_max,
             "n_traj": args.n_traj, "master_seed": args.seed, "protocol": "none",
             "workers": args.workers, "bins": args.bins,
             "n_censored": [censored[format_value(e)] for e in epsilons]}
    out.add("figure3_table.csv", header, table, flags)
    return out


def cmd_fpt(args):
    eps = args.epsilon[0]
    cfg = _config(args, eps)
    summary = run_ensemble(cfg, workers=args.workers, bins=args.bins)
    out = OutputSet(args.out, "fpt", args.seed)
    d = summary.as_dict()
    if cfg.protocol.feedback:
        reference = analytics.tau_q(eps)
    else:
        reference = analytics.mean_fpt_exact(cfg.z0, cfg.Z)
    d["reference_T"] = reference
    flags = _sim_flags(cfg, args.workers)
    flags.update(n_censored=summary.n_censored, bins=args.bins)
    out.add(f"fpt_{cfg.protocol.value}_eps{_tag(eps)}_summary.csv", list(d), [list(d.values())],
            flags)
    hist = summary.histogram
    dens = hist.density()
    rows = [(hist.edges[i], hist.edges[i + 1], hist.counts[i], dens[i])
            for i in range(len(hist.counts))]
    out.add(f"fpt_{cfg.protocol.value}_eps{_tag(eps)}_hist.csv",
            ("t_lo", "t_hi", "count", "density"), rows, flags)
    return out


def cmd_purity(args):
    if not args.t:
        raise CLIError("purity needs at least one --t")
    eps = args.epsilon[0]
    out = OutputSet(args.out, "purity", args.seed)
    t_max = max(args.t) * (1 + 1e-9) + args.dt
    for t in args.t:
        cfg = SimConfig(epsilon=eps, protocol=args.protocol, dt=args.dt, t_max=t_max,
                        n_traj=args.n_traj, master_seed=args.seed)
        lo_edge = _log10_s_floor(args, t)
        hist = purity_snapshot(cfg, t, edges=log_entropy_edges(lo=lo_edge),
                               workers=args.workers)
        dens = hist.density()
        rows = [(hist.edges[i], hist.edges[i + 1], hist.counts[i], dens[i])
                for i in range(len(hist.counts))]
        flags = _sim_flags(cfg, args.workers)
        flags.update(t=t, log10_s_min=lo_edge, n_outside=cfg.n_traj - hist.total)
        out.add(f"purity_{cfg.protocol.value}_t{_tag(t)}.csv",
                ("log10_s_lo", "log10_s_hi", "count", "density"), rows, flags)
    return out


def _default_times(args):
    return args.t or list(np.round(np.linspace(0.25, 5.0, 20), 10))


def _analytic_table(args):
    q = args.quantity
    eps_list = args.epsilon
    if q == "mean_purity":
        return ("t", "mean_purity"), [(t, analytics.mean_purity(t)) for t in _default_times(args)]
    if q == "epsilon_asymptotic":
        return (("t", "epsilon_asymptotic"),
                [(t, analytics.epsilon_asymptotic(t)) for t in _default_times(args)])
    if q == "tau_c":
        return (("epsilon", "method", "tau_c"),
                [(e, args.method, analytics.tau_c(e, method=args.method)) for e in eps_list])
    if q == "tau_q":
        return ("epsilon", "tau_q"), [(e, analytics.tau_q(e)) for e in eps_list]
    if q == "mean_fpt":
        rows = []
        for e in eps_list:
            Z = analytics.threshold_z(e)
            rows.append((e, args.z0, Z, analytics.mean_fpt_exact(args.z0, Z)))
        return ("epsilon", "z0", "Z", "mean_fpt"), rows
    if q == "ratio":
        return ("epsilon", "ratio"), [(e, analytics.ratio_curve(e)) for e in eps_list]
    if q == "wp_q":
        qs = args.q or list(np.round(np.linspace(-10.0, 10.0, 81), 10))
        return (("t", "q", "wp_q"),
                [(t, x, analytics.wp_q(x, t)) for t in _default_times(args) for x in qs])
    if q == "purity_pdf":
        ps = args.p or list(np.round(np.linspace(0.51, 0.99, 49), 10))
        return (("t", "p", "purity_pdf"),
                [(t, p, analytics.purity_pdf_classical(p, t))
                 for t in _default_times(args) for p in ps])
    if q == "abs_z":
        return (("t", "mean_abs_z", "operational_purity", "operational_epsilon"),
                [(t, analytics.mean_abs_z(t), analytics.operational_purity(t),
                  analytics.operational_epsilon(t)) for t in _default_times(args)])
    if q == "fp_survival":
        eps = eps_list[0]
        grid = FPGrid(analytics.threshold_z(eps), n_interior=args.fp_nodes, dt=args.fp_dt)
        res = fokker_planck_survival(args.z0, grid)
        idx = np.arange(0, len(res.t), args.fp_stride)
        return (("t", "G"), [(res.t[i], res.G[i]) for i in idx],
                {"fp_mean_fpt": res.mean_fpt,
                 "exact_mean_fpt": analytics.mean_fpt_exact(args.z0, grid.Z)})
    raise CLIError(f"unknown quantity {q!r}")


def cmd_analytic(args):
    result = _analytic_table(args)
    header, rows = result[0], result[1]
    extra = result[2] if len(result) > 2 else {}
    flags = {"quantity": args.quantity, "epsilon": list(args.epsilon),
             "t": list(args.t or []), "z0": args.z0, "q": list(args.q or []),
             "p": list(args.p or []), "method": args.method, "fp_nodes": args.fp_nodes,
             "fp_dt": args.fp_dt, "fp_stride": args.fp_stride}
    flags.update(extra)
    out = OutputSet(args.out, "analytic", None)
    out.add(f"analytic_{args.quantity}.csv", header, rows, flags)
    return out


# ----------------------------------------------------------------- parser

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _finite(text):
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text}")
    return v


def _positive(text):
    v = _finite(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _epsilon(text):
    v = _finite(text)
    if not 0.0 < v < 0.5:
        raise argparse.ArgumentTypeError(f"epsilon must lie in (0, 1/2), got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qpurify",
        description="Purification of a continuously measured qubit: ensembles and closed forms.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (default: .)")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--epsilon", type=_epsilon, nargs="+", default=None,
                     help="target infidelity 1 - p (default 1e-6)")
    sim.add_argument("--n-traj", type=_positive_int, default=DEFAULT_N_TRAJ,
                     help=f"trajectories per ensemble (default {DEFAULT_N_TRAJ})")
    sim.add_argument("--dt", type=_positive, default=DEFAULT_DT,
                     help=f"integration step (default {DEFAULT_DT})")
    sim.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                     help=f"master seed (default {DEFAULT_SEED})")
    sim.add_argument("--t-max", type=_positive, default=None,
                     help="simulation horizon (default 10 * T_q(epsilon))")
    sim.add_argument("--protocol", choices=[p.value for p in Protocol], default="none",
                     help="feedback protocol (default none)")
    sim.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1,
                     help="worker threads; results do not depend on this")

    hist = argparse.ArgumentParser(add_help=False)
    hist.add_argument("--bins", type=_positive_int, default=60, help="histogram bins")

    logs = argparse.ArgumentParser(add_help=False)
    logs.add_argument("--log10-s-min", type=_finite, default=None,
                      help="lower edge of the log10(1-p) histogram (default: from t)")

    p = sub.add_parser("figure1", parents=[common, sim, logs],
                       help="purity distributions at fixed times")
    p.add_argument("--t", type=_positive, nargs="+", default=None,
                   help="snapshot times (default 1.72694 3.2806)")
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("figure2-3", parents=[common, sim, hist],
                       help="first-passage distributions and the ratio table")
    p.set_defaults(func=cmd_figure2_3)

    p = sub.add_parser("fpt", parents=[common, sim, hist],
                       help="first-passage ensemble for one protocol")
    p.set_defaults(func=cmd_fpt)

    p = sub.add_parser("purity", parents=[common, sim, logs],
                       help="log10(1-p) histogram at given times")
    p.add_argument("--t", type=_positive, nargs="+", default=None, help="snapshot times")
    p.set_defaults(func=cmd_purity)

    p = sub.add_parser("analytic", parents=[common], help="tabulate a closed-form quantity")
    p.add_argument("quantity", choices=ANALYTIC_QUANTITIES)
    p.add_argument("--t", type=_positive, nargs="+", default=None, help="times")
    p.add_argument("--epsilon", type=_epsilon, nargs="+", default=None,
                   help="target infidelities (default 1e-6)")
    p.add_argument("--z0", type=_finite, default=0.0, help="initial z (default 0)")
    p.add_argument("--q", type=_finite, nargs="+", default=None, help="q values for wp_q")
    p.add_argument("--p", type=_finite, nargs="+", default=None, help="purities for purity_pdf")
    p.add_argument("--method", choices=("exact", "asymptotic", "leading"), default="exact",
                   help="tau_c definition (default exact)")
    p.add_argument("--fp-nodes", type=_positive_int, default=801,
                   help="interior grid nodes for fp_survival")
    p.add_argument("--fp-dt", type=_positive, default=1e-3, help="time step for fp_survival")
    p.add_argument("--fp-stride", type=_positive_int, default=10,
                   help="write every n-th time step of the survival curve")
    p.set_defaults(func=cmd_analytic)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.epsilon_given = getattr(args, "epsilon", None) is not None
    if not args.epsilon_given:
        args.epsilon = [1e-6]
    try:
        outputs = args.func(args)
        paths = outputs.commit()
    except (CLIError, ValueError, QuadratureError, RootFindingError, FokkerPlanckError,
            OSError) as exc:
        print(f"qpurify {args.command}: error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
