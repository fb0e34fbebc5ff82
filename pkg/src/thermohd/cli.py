"""Command line entry point: ``thermohd run|verify|sweep|list-scenarios``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path


from . import __version__, scenarios
from .errors import AbortedDomainError, ConfigError, StepUnderflow, ThermoError

log = logging.getLogger("thermohd")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3
OUT_ENV = "THERMOHD_OUT"


def _overrides(args) -> dict:
    return {
        "rtol": args.rtol,
        "atol": args.atol,
        "dt": args.dt,
        "t_end": args.t_end,
        "method": args.method,
        "record_stride": getattr(args, "record_stride", None),
    }


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV) or "thermohd-out")


def _fmt(x) -> str:
    return repr(float(x))


def trajectory_columns(system, traj) -> list:
    n, K = system.n, getattr(system, "K", 0)
    cols = ["t"] + [f"q_{i + 1}" for i in range(n)] + [f"p_{i + 1}" for i in range(n)] + ["S"]
    cols += [f"N_{k + 1}" for k in range(K)] + [f"W_{k + 1}" for k in range(K)]
    cols += ["H", "T", "sigma"]
    cols += [k for k in traj.observables if k not in ("H", "T", "sigma")]
    return cols


def write_trajectory(path: Path, result) -> None:
    """CSV with a '#' provenance line; floats as shortest round-trip repr."""
    traj, system = result.trajectory, result.built.system
    n, K = system.n, getattr(system, "K", 0)
    cols = trajectory_columns(system, traj)
    extras = cols[1 + 2 * n + 1 + 2 * K :]
    with open(path, "w", newline="") as fh:
        fh.write(f"# thermohd {__version__} scenario={result.report.scenario} config_hash={result.report.config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(len(traj)):
            st = traj.state(i)
            row = [st.t, *st.q, *st.p, st.S, *st.N, *st.W]
            row += [traj.observables[k][i] for k in extras]
            w.writerow([_fmt(x) for x in row])


def _print_report(report, stream=None):
    print(report.table(), file=stream or sys.stdout)


def _exit_code(report) -> int:
    if report.aborted:
        return EXIT_DOMAIN
    return EXIT_OK if report.passed else EXIT_CHECKS


def cmd_run(args, emit=True) -> int:
    result = scenarios.run(args.scenario, _overrides(args), seed=args.seed)
    report = result.report
    if emit:
        out = _out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        stem = report.scenario
        write_trajectory(out / f"{stem}.csv", result)
        (out / f"{stem}.report.json").write_text(report.to_json())
        log.info("wrote %s and %s", out / f"{stem}.csv", out / f"{stem}.report.json")
    _print_report(report)
    if report.aborted:
        print(f"aborted: {report.aborted}", file=sys.stderr)
    return _exit_code(report)


def cmd_verify(args) -> int:
    return cmd_run(args, emit=False)


def cmd_list(args) -> int:
    if args.show:
        if args.show not in scenarios.BUILTINS:
            raise ConfigError(f"no built-in scenario {args.show!r}")
        print(json.dumps(scenarios.BUILTINS[args.show], indent=2))
        return EXIT_OK
    for name, data in scenarios.BUILTINS.items():
        print(f"{name:15s} {data['kind']:13s} {data.get('description', '')}")
    return EXIT_OK


def _sweep_point(job):
    data, path, value, overrides, seed = job
    point = scenarios.set_path(data, path, value)
    try:
        res = scenarios.run(point, overrides, seed=seed, skip_expensive=True)
    except AbortedDomainError as exc:
        return value, None, str(exc)
    rep = res.report
    row = {c.name: c.max_residual for c in rep.checks}
    if res.trajectory is not None and not rep.aborted:
        fin = res.trajectory
        row.update({"t_end": fin.t[-1], "S_end": fin.y[-1, 2 * res.built.system.n], "H_end": fin["H"][-1], "T_end": fin["T"][-1]})
        row["passed"] = int(rep.passed)
    return value, row, rep.aborted


def _parse_values(raw) -> list:
    vals = []
    for tok in raw:
        for piece in tok.split(","):
            piece = piece.strip()
            if piece:
                try:
                    vals.append(json.loads(piece))
                except json.JSONDecodeError:
                    raise ConfigError(f"sweep value {piece!r} is not a JSON literal") from None
    return vals


def cmd_sweep(args) -> int:
    values = _parse_values(args.values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    data = scenarios.load_scenario(args.scenario)
    overrides = _overrides(args)
    # validate every point before running any of them
    for v in values:
        scenarios.build(scenarios.load_scenario(scenarios.set_path(data, args.parameter, v)), overrides)
    jobs = [(data, args.parameter, v, overrides, args.seed) for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    keys = []
    for _, row, _ in results:
        for k in row or {}:
            if k not in keys:
                keys.append(k)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{data['name']}.sweep.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# thermohd {__version__} scenario={data['name']} config_hash={scenarios.config_hash(data)} parameter={args.parameter}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", *keys, "aborted"])
        for value, row, aborted in results:
            cells = [json.dumps(value)]
            cells += ["" if not row or k not in row else str(row[k]) if k == "passed" else _fmt(row[k]) for k in keys]
            cells.append(aborted or "")
            w.writerow(cells)
    with open(path) as fh:
        sys.stdout.write(fh.read())
    if any(a for _, _, a in results):
        return EXIT_DOMAIN
    return EXIT_OK if all(row and row.get("passed") for _, row, _ in results) else EXIT_CHECKS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermohd", description="Hamilton-d'Alembert dynamics of simple thermodynamic systems")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="built-in scenario name or path to a JSON scenario file")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./thermohd-out)")
        p.add_argument("--rtol", type=float)
        p.add_argument("--atol", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--t-end", type=float, dest="t_end")
        p.add_argument("--method", choices=["RK4Fixed", "EmbeddedAdaptive"])
        p.add_argument("--record-stride", type=int, dest="record_stride")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")

    p = sub.add_parser("run", help="integrate and write trajectory CSV plus diagnostics JSON")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", help="integrate and print the diagnostics table")
    common(p)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("sweep", help="rerun a scenario over values of one config path")
    common(p)
    p.add_argument("parameter", help="dotted config path, e.g. integrator.dt or friction")
    p.add_argument("values", nargs="*", help="JSON values, space or comma separated")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("list-scenarios", help="list built-in scenarios")
    p.add_argument("--show", metavar="NAME", help="print one built-in scenario as JSON")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AbortedDomainError, StepUnderflow) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ThermoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
