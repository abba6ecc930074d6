"""Command-line interface.

Subcommands:

* ``simulate`` - run one scheme configuration and write the trajectory as
  JSON (plus optionally the terminal value as CSV).
* ``converge`` - run the configured resolution ladder and write the CSV
  report.  The CSV is deterministic for a fixed config and seed; measured
  per-rung wall times go to stderr and enter the CSV only with
  ``timing = on`` in the [run] section.
* ``check-conditions`` - run the structural-condition suite; exit status 0
  when every check passes, 1 otherwise.
* ``stability`` - print the explicit-scheme stability margin table over
  the configured (n, m) grid.

All numeric output is printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import config as cfg
from .harness import convergence_study, run_condition_suite
from .noise import TimeGrid, sample_bundle
from .schemes import run_scheme, stability_margin
from .space import c_b, restrict


def _fmt(value):
    return f"{value:.17g}"


def _load(args):
    settings = cfg.load_settings(args.config)
    marks = cfg.build_marks(settings)
    space = cfg.build_space(settings)
    triple = cfg.build_triple(settings, space, marks)
    return settings, marks, space, triple


def _cmd_simulate(args):
    settings, marks, space, triple = _load(args)
    scheme_config = cfg.build_scheme_config(settings)
    seed = cfg.master_seed(settings)
    grid = TimeGrid(triple.constants.horizon, scheme_config.m)
    modes = settings.getint(
        "noise", "l_modes", min(scheme_config.l, triple.wiener_modes)
    )
    level = max(settings.getint("noise", "l_level", scheme_config.l), scheme_config.l)
    bundle = sample_bundle(seed, grid, modes, marks, level)
    traj = run_scheme(space, triple, scheme_config, bundle, cfg.quadrature_spec(settings))
    payload = traj.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload + "\n")
    if args.final_csv:
        with open(args.final_csv, "w") as fh:
            fh.write(traj.final_csv())
    if traj.blow_up_step is not None:
        print(f"blow-up at step {traj.blow_up_step}", file=sys.stderr)
    return 0


def _cmd_converge(args):
    settings, marks, space, triple = _load(args)
    scheme_config = cfg.build_scheme_config(settings)
    seed = cfg.master_seed(settings)
    ladder = cfg.parse_ladder(settings, seed=seed)
    workers = args.workers or settings.getint("run", "workers", 1)
    started = time.perf_counter()
    report = convergence_study(space, triple, marks, ladder, scheme_config, workers)
    elapsed = time.perf_counter() - started
    timing = settings.getbool("run", "timing", False)
    text = report.to_csv(timing=timing)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for row in report.rows:
        print(
            f"rung ({row.n},{row.m},{row.l}): {_fmt(row.estimate)} "
            f"+/- {_fmt(row.half_width)} [{row.seconds:.2f}s]",
            file=sys.stderr,
        )
    print(
        f"verdict: {report.verdict} (total {elapsed:.2f}s, workers {workers})",
        file=sys.stderr,
    )
    return 0


def _cmd_check_conditions(args):
    settings, marks, space, triple = _load(args)
    suite = cfg.suite_config(settings)
    reports = run_condition_suite(triple, space, marks, suite)
    all_passed = True
    for report in reports:
        print(
            f"{report.condition_id}: "
            f"{'pass' if report.passed else 'FAIL'} "
            f"worst={_fmt(report.worst_violation)} trials={report.trials}"
        )
        all_passed &= report.passed
    return 0 if all_passed else 1


def _cmd_stability(args):
    settings, marks, space, triple = _load(args)
    gamma = settings.getfloat("stability", "gamma", 0.5)
    alpha = settings.getfloat("stability", "alpha", triple.constants.alpha)
    n_values = settings.get("stability", "n_values", "4, 8, 16")
    m_values = settings.get("stability", "m_values", "64, 256, 1024, 4096")
    horizon = triple.constants.horizon
    print("n,m,c_b,rho,in_I_gamma")
    for n in cfg._int_list(n_values):
        sub = restrict(space, n) if n <= space.dim else cfg.build_space(settings, n)
        for m in cfg._int_list(m_values):
            grid = TimeGrid(horizon, m)
            rho, inside = stability_margin(alpha, grid, sub, gamma)
            print(f"{n},{m},{_fmt(c_b(sub))},{_fmt(rho)},{int(inside)}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="spdesim",
        description="Galerkin time-stepping schemes for stochastic evolution "
        "equations with Wiener and compensated Poisson noise",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configuration")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", help="trajectory JSON output path")
    p_sim.add_argument("--final-csv", help="terminal value CSV output path")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_conv = sub.add_parser("converge", help="run the resolution ladder")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--out", help="CSV report output path")
    p_conv.add_argument("--workers", type=int, default=None)
    p_conv.set_defaults(fn=_cmd_converge)

    p_check = sub.add_parser("check-conditions", help="structural condition suite")
    p_check.add_argument("--config", required=True)
    p_check.set_defaults(fn=_cmd_check_conditions)

    p_stab = sub.add_parser("stability", help="stability margin table")
    p_stab.add_argument("--config", required=True)
    p_stab.set_defaults(fn=_cmd_stability)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
