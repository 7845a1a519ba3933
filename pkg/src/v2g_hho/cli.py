"""Command-line entry point: generate, optimize, validate and metrics."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ModelError, ParseError
from .feasibility import validate_schedule, violations_to_json
from .fleet import OperationTimeConfig
from .grid import ConstraintConfig, load_schedule, schedule_to_csv
from .hho import HHOParams, archive_json, convergence_csv, optimize
from .metrics import kpi_report, metrics_dict, metrics_json
from .scenario import (
    FleetSpec,
    Scenario,
    ScenarioConfig,
    assemble_scenario,
    build_scenario,
    load_bundle,
    scenario_to_dict,
    service_curves,
    substream,
    synthetic_fleet,
    terni_stations,
)

EXIT_OK, EXIT_VIOLATIONS, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    fleet: str | None = None
    stations: str | None = None
    generation: str | None = None
    consumption: str | None = None
    scenario: str | None = None
    out: str = "."
    seed: int = 0
    population_size: int = 20
    max_iterations: int = 100
    archive_capacity: int = 5
    epsilon_balance: float | None = None
    min_cycles: int | None = None
    sigma: float | None = None
    delta_t: float | None = None
    power_factor: float | None = None
    slot_duration: float | None = None
    window: tuple[int, int] | None = None
    schedule: str | None = None
    reference: str | None = None
    service: str = "renewable"
    n_stations: int = 5


def _window(text: str) -> tuple[int, int]:
    parts = text.replace(",", ":").split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("window must look like START:STOP")
    return int(parts[0]), int(parts[1])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="v2g-hho", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("generate", "optimize", "validate", "metrics"):
        p = sub.add_parser(name)
        p.add_argument("--fleet")
        p.add_argument("--stations")
        p.add_argument("--generation")
        p.add_argument("--consumption")
        p.add_argument("--scenario", help="scenario bundle JSON")
        p.add_argument("--out", default=".")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--population", type=int, default=20)
        p.add_argument("--iterations", type=int, default=100)
        p.add_argument("--archive", type=int, default=5)
        p.add_argument("--epsilon-balance", type=float)
        p.add_argument("--min-cycles", type=int)
        p.add_argument("--sigma", type=float, help="conversion loss fraction")
        p.add_argument("--delta-t", type=float, help="slow-condition penalty in hours")
        p.add_argument("--power-factor", type=float)
        p.add_argument("--slot-hours", type=float)
        p.add_argument("--window", type=_window, help="service window START:STOP")
        p.add_argument("--schedule", help="schedule CSV (validate, metrics)")
        p.add_argument("--reference", help="reference front JSON for gd/mpfe")
        p.add_argument("--service", choices=("renewable", "congestion", "daily"), default="renewable")
        p.add_argument("--n-stations", type=int, default=5)
    return parser


def parse_config(argv) -> RunConfig:
    a = build_parser().parse_args(argv)
    return RunConfig(
        command=a.command, fleet=a.fleet, stations=a.stations, generation=a.generation,
        consumption=a.consumption, scenario=a.scenario, out=a.out, seed=a.seed,
        population_size=a.population, max_iterations=a.iterations, archive_capacity=a.archive,
        epsilon_balance=a.epsilon_balance, min_cycles=a.min_cycles, sigma=a.sigma, delta_t=a.delta_t,
        power_factor=a.power_factor, slot_duration=a.slot_hours, window=a.window, schedule=a.schedule,
        reference=a.reference, service=a.service, n_stations=a.n_stations,
    )


def _configs(cfg: RunConfig, base_c: ConstraintConfig, base_o: OperationTimeConfig):
    c_over = {k: v for k, v in (("epsilon_balance", cfg.epsilon_balance), ("min_cycles", cfg.min_cycles))
              if v is not None}
    o_over = {k: v for k, v in (("conversion_loss", cfg.sigma), ("slow_condition_penalty", cfg.delta_t),
                                ("power_factor", cfg.power_factor), ("slot_duration", cfg.slot_duration))
              if v is not None}
    return replace(base_c, **c_over), replace(base_o, **o_over)


def load_scenario(cfg: RunConfig) -> Scenario:
    """Scenario from a bundle or from the four input files, with flag overrides applied."""
    if cfg.scenario:
        sc = load_bundle(_existing(cfg.scenario))
        cons, op = _configs(cfg, sc.constraint_config, sc.operation_config)
        if (cons, op, cfg.window) == (sc.constraint_config, sc.operation_config, None):
            return sc
        return assemble_scenario(sc.fleet, sc.stations, sc.generation, sc.consumption,
                                 ScenarioConfig(cons, op, None, cfg.window))
    paths = (cfg.fleet, cfg.stations, cfg.generation, cfg.consumption)
    if not all(paths):
        raise CliError("need --scenario or all of --fleet, --stations, --generation, --consumption")
    cons, op = _configs(cfg, ConstraintConfig(), OperationTimeConfig())
    return build_scenario(*(_existing(p) for p in paths), ScenarioConfig(cons, op, None, cfg.window))


def _existing(path: str) -> str:
    if not Path(path).is_file():
        raise CliError(f"no such file: {path}")
    return path


def _write_atomic(files: dict[str, str], out: str) -> None:
    """Write every file to a temp name first, then rename them all into place."""
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=outdir, prefix=f".{name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, outdir / name))
        for tmp, dest in staged:
            os.replace(tmp, dest)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


# -- commands ----------------------------------------------------------------------


def cmd_generate(cfg: RunConfig) -> int:
    if cfg.fleet or cfg.stations or cfg.generation or cfg.consumption:
        sc = load_scenario(cfg)
    else:
        cons, op = _configs(cfg, ConstraintConfig(), OperationTimeConfig())
        stations = terni_stations(cfg.n_stations)
        gen, load = service_curves(cfg.service)
        fleet = synthetic_fleet(FleetSpec(), stations, len(gen), cfg.seed)
        sc = assemble_scenario(fleet, stations, gen, load, ScenarioConfig(cons, op, None, cfg.window))
    _write_atomic({"scenario.json": json.dumps(scenario_to_dict(sc), indent=1)}, cfg.out)
    print(json.dumps({"scenario": str(Path(cfg.out) / "scenario.json"), "window": list(sc.window),
                      "n_ev": len(sc.fleet), "n_stations": len(sc.stations)}))
    return EXIT_OK


def _front_csv(archive) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    entries = list(archive.entries)
    k = len(entries[0].fitness) if entries else 0
    writer.writerow(["entry"] + [f"f{i}" for i in range(k)])
    for n, h in enumerate(entries):
        writer.writerow([n] + [repr(float(v)) for v in h.fitness])
    return buf.getvalue()


def _load_reference(path: str | None):
    if path is None:
        return None
    try:
        data = json.loads(Path(_existing(path)).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if isinstance(data, list) and data and isinstance(data[0], dict):
        data = [d["fitness"] for d in data]
    return np.asarray(data, dtype=float)


def cmd_optimize(cfg: RunConfig) -> int:
    sc = load_scenario(cfg)
    params = HHOParams(cfg.population_size, cfg.max_iterations, cfg.archive_capacity, cfg.seed)
    reference = _load_reference(cfg.reference)
    res = optimize(sc, params, substream(cfg.seed, "optimizer"), record_history=True)
    front = [list(map(float, h.fitness)) for h in res.archive.entries]
    kpi = kpi_report(res.schedule, sc)
    report = metrics_dict(kpi, front, res.history, [list(map(float, f)) for f in res.population], reference)
    history = {"history": res.history, "population": [list(map(float, f)) for f in res.population]}
    _write_atomic({
        "schedule.csv": schedule_to_csv(res.schedule),
        "archive.json": archive_json(res.archive),
        "convergence.csv": convergence_csv(res.log),
        "metrics.json": metrics_json(report),
        "archive_history.json": json.dumps(history),
        "archive_front.csv": _front_csv(res.archive),
    }, cfg.out)
    print(json.dumps({"out": cfg.out, "best_fitness_sum": res.best.total, "archive_size": len(res.archive)}))
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    sc = load_scenario(cfg)
    path = cfg.schedule or str(Path(cfg.out) / "schedule.csv")
    schedule = load_schedule(_existing(path), [st.id for st in sc.stations], sc.n_slots)
    violations = validate_schedule(schedule, sc.fleet, sc.stations, sc.balance, sc.constraint_config,
                                   sc.operation_config)
    print(violations_to_json(violations))
    return EXIT_VIOLATIONS if violations else EXIT_OK


def cmd_metrics(cfg: RunConfig) -> int:
    sc = load_scenario(cfg)
    out = Path(cfg.out)
    path = cfg.schedule or str(out / "schedule.csv")
    schedule = load_schedule(_existing(path), [st.id for st in sc.stations], sc.n_slots)
    try:
        archive = json.loads(Path(_existing(str(out / "archive.json"))).read_text(encoding="utf-8"))
        hist = json.loads(Path(_existing(str(out / "archive_history.json"))).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid artifact JSON: {exc}") from exc
    front = [e["fitness"] for e in archive]
    kpi = kpi_report(schedule, sc)
    report = metrics_dict(kpi, front, hist["history"], hist["population"], _load_reference(cfg.reference))
    print(metrics_json(report))
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "optimize": cmd_optimize, "validate": cmd_validate, "metrics": cmd_metrics}


def run(cfg: RunConfig) -> int:
    return COMMANDS[cfg.command](cfg)


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except (CliError, ModelError, ValueError, KeyError, OSError) as exc:
        kind = "UsageError" if isinstance(exc, CliError) else type(exc).__name__
        print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
