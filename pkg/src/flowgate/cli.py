"""Command line entry point.

    flowgate run --scenario s1_single_flow --strategy proactive --out-dir out
    flowgate sweep --sweep rate_sweep --jobs 4

Exit codes: 0 success, 1 bad input, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .controller import Strategy
from .metrics import MetricsError, RunReport
from .scenario import (
    ENV_PREFIX,
    Scenario,
    ScenarioError,
    SweepSpec,
    bundled_names,
    parse_formats,
    parse_scenario,
    parse_sweep,
)
from .simulation import simulate
from .topology import TopologyError

EXIT_OK, EXIT_BAD_INPUT, EXIT_INTERNAL = 0, 1, 2
SWEEP_METRICS = ("loss_pct", "throughput_bps", "delay_ms")

log = logging.getLogger("flowgate")


class BadInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flowgate", description="Fluid SDN simulator with proactive rerouting.")
    p.add_argument("--version", action="version", version=f"flowgate {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate one scenario and write its report")
    run.add_argument("--scenario", required=True, help="scenario file or bundled name")
    _common(run)

    sw = sub.add_parser("sweep", help="run a scenario over an axis and several strategies")
    sw.add_argument("--sweep", required=True, help="sweep file or bundled name")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    sw.add_argument("--strategies", help="comma separated, overrides the sweep file")
    _common(sw)

    sub.add_parser("list", help="list bundled scenario and sweep files")
    return p


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=[s.value for s in Strategy])
    p.add_argument("--out-dir")
    p.add_argument("--format", help="csv, json or both comma separated")
    p.add_argument("--seed", type=int)


def _env(args) -> dict:
    """Environment with command line flags taking precedence."""
    env = dict(os.environ)
    for key, val in (("STRATEGY", args.strategy), ("OUT_DIR", args.out_dir),
                     ("FORMAT", args.format), ("SEED", args.seed)):
        if val is not None:
            env[ENV_PREFIX + key] = str(val)
    return env


def write_report(report: RunReport, out_dir: Path, formats, stem: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = out_dir / f"{stem}.{fmt}"
        text = report.to_csv() if fmt == "csv" else report.to_json()
        path.write_text(text, encoding="utf-8", newline="")
        written.append(path)
    return written


def cmd_run(args) -> int:
    scenario = parse_scenario(args.scenario, _env(args))
    result = simulate(scenario)
    r = result.report
    stem = f"{scenario.name}_{scenario.strategy.value}"
    for path in write_report(r, Path(scenario.out_dir), scenario.formats, stem):
        print(path)
    print(f"{scenario.name} [{scenario.strategy.value}] flows={r.n_flows} "
          f"loss={r.avg_loss_pct:.2f}% throughput={r.avg_throughput_bps / 1e6:.3f}Mbps "
          f"delay={r.avg_delay_ms:.2f}ms", file=sys.stderr)
    return EXIT_OK


def run_cell(scenario: Scenario) -> tuple[str, RunReport | str]:
    """One sweep cell; failures come back as text so the sweep can go on."""
    try:
        return "ok", simulate(scenario).report
    except (ScenarioError, TopologyError, MetricsError, ValueError) as exc:
        return "error", f"{type(exc).__name__}: {exc}"


def sweep_table(spec: SweepSpec, cells: dict) -> str:
    """Merged CSV: one row per axis value, one column group per strategy."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [spec.axis]
    for s in spec.strategies:
        header += [f"{s.value}_{m}" for m in SWEEP_METRICS] + [f"{s.value}_status"]
    w.writerow(header)
    for v in spec.values:
        row = [_axis(v)]
        for s in spec.strategies:
            status, out = cells[(v, s)]
            if status == "ok":
                row += [_fmt(out.avg_loss_pct), _fmt(out.avg_throughput_bps),
                        _fmt(out.avg_delay_ms), "ok"]
            else:
                row += ["", "", "", out]
        w.writerow(row)
    return buf.getvalue()


def _axis(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def _fmt(x: float) -> str:
    return repr(round(float(x), 9))


def run_sweep(spec: SweepSpec, jobs: int = 1) -> dict:
    keys = [(v, s) for v in spec.values for s in spec.strategies]
    scenarios = []
    for v, s in keys:
        try:
            scenarios.append(spec.cell(v, s))
        except ScenarioError as exc:
            scenarios.append(exc)
    todo = [(k, sc) for k, sc in zip(keys, scenarios) if isinstance(sc, Scenario)]
    cells = {k: ("error", f"ScenarioError: {sc}") for k, sc in zip(keys, scenarios)
             if not isinstance(sc, Scenario)}
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, [sc for _, sc in todo]))
    else:
        results = [run_cell(sc) for _, sc in todo]
    for (k, _), res in zip(todo, results):
        cells[k] = res
    return cells


def cmd_sweep(args) -> int:
    if args.jobs < 1:
        raise BadInput("--jobs must be at least 1")
    spec = parse_sweep(args.sweep, _env(args))
    if args.strategies:
        try:
            strategies = tuple(Strategy(s.strip()) for s in args.strategies.split(",") if s.strip())
        except ValueError as exc:
            raise BadInput(str(exc)) from None
        spec = replace(spec, strategies=strategies)
    cells = run_sweep(spec, args.jobs)
    base = spec.base
    out_dir = Path(base.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{spec.name}.csv"
    path.write_text(sweep_table(spec, cells), encoding="utf-8", newline="")
    print(path)
    failed = sorted(k for k, (status, _) in cells.items() if status != "ok")
    for v, s in failed:
        print(f"cell {spec.axis}={_axis(v)} strategy={s.value} failed: {cells[(v, s)][1]}",
              file=sys.stderr)
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled_names():
        print(name)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "list": cmd_list}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "format", None):
            parse_formats(args.format)
        return COMMANDS[args.command](args)
    except (BadInput, ScenarioError, TopologyError) as exc:
        print(f"flowgate: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"flowgate: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
