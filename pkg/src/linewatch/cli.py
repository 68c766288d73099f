"""Command-line scenario runner: run, sweep, and validate subcommands."""

import argparse
import csv
import logging
import sys
from pathlib import Path

import yaml

from .errors import (ConfigurationError, InfeasibleScenarioError,
                     InfeasibleStateError, SolverError)
from .scenario import RunReport, load_scenario, run_scenario, sweep

logger = logging.getLogger("linewatch")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="linewatch",
        description="Pipeline transient simulation, SCADA telemetry synthesis, "
        "and leak detection (RTM, line balance, negative pressure wave).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario end to end")
    run_p.add_argument("scenario", help="scenario YAML file")
    run_p.add_argument("-o", "--output-dir", default="out", help="output directory")
    run_p.add_argument("--dump-states", action="store_true",
                       help="also dump solver states as columnar text")

    sweep_p = sub.add_parser("sweep", help="run a parameter grid over a scenario template")
    sweep_p.add_argument("scenario", help="template scenario YAML file")
    sweep_p.add_argument("--grid", required=True,
                         help="YAML file mapping dotted config paths to value lists")
    sweep_p.add_argument("-o", "--output-dir", default="out", help="output directory")

    val_p = sub.add_parser("validate", help="check a scenario file and exit")
    val_p.add_argument("scenario", help="scenario YAML file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)-7s %(name)s: %(message)s",
    )
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (SolverError, InfeasibleScenarioError, InfeasibleStateError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 1
    return 0


def _cmd_validate(args):
    scenario = load_scenario(args.scenario)
    print(f"{args.scenario}: OK ({scenario.name}, config {scenario.config_hash[:12]})")
    return 0


def _cmd_run(args):
    scenario = load_scenario(args.scenario)
    if args.dump_states:
        scenario.dump_states = True
    logger.info("running scenario %s (seed %d)", scenario.name, scenario.seed)
    report = run_scenario(scenario)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    (outdir / "report.json").write_text(report.to_json() + "\n")
    write_telemetry_csv(outdir / "telemetry.csv", report)
    if report.rtm_records:
        write_rtm_trace_csv(outdir / "rtm_trace.csv", report)
    if report.balance.get("enabled"):
        write_balance_csv(outdir / "balance_windows.csv", report)
    if report.acoustic.get("enabled"):
        write_acoustic_csv(outdir / "acoustic_events.csv", report)
    if report.availability:
        write_availability_csv(outdir / "availability.csv", report)
    if report.states:
        write_states(outdir / "states.dat", report)
    logger.info("report and logs written to %s", outdir)

    if report.run.get("solver_failure"):
        print(f"solver failure during run: {report.run['solver_failure']}", file=sys.stderr)
        return 1
    _print_summary(report)
    return 0


def _cmd_sweep(args):
    scenario = load_scenario(args.scenario)
    with open(args.grid) as fh:
        grid_spec = yaml.safe_load(fh)
    if not isinstance(grid_spec, dict):
        raise ConfigurationError(f"{args.grid}: sweep grid must map config paths to value lists")
    rows = sweep(scenario.raw, grid_spec)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "sweep.csv"
    _write_rows(path, rows, header_note=f"scenario={scenario.name} config_sha256={scenario.config_hash}")
    failures = sum(1 for r in rows if r.get("error"))
    print(f"sweep: {len(rows)} cells, {failures} failed -> {path}")
    return 0 if failures == 0 else 1


def _print_summary(report):
    print(f"scenario: {report.scenario_name}  (config {report.config_hash[:12]})")
    truth = report.truth["leaks"]
    print(f"truth: {len(truth)} leak(s)" + (f" first at {truth[0]['position']:.0f} m, "
          f"{truth[0]['mass_rate']} kg/s from t={truth[0]['start_time']} s" if truth else ""))
    if report.rtm.get("enabled"):
        if report.rtm["declared"]:
            size = report.rtm.get("size_estimate")
            loc = report.rtm.get("location_estimate")
            print(
                "rtm: ALARM at t=%.1f s, size %s kg/s, location %s m"
                % (
                    report.rtm["declared_time"],
                    "n/a" if size is None else f"{size:.3f}",
                    "n/a" if loc is None else f"{loc:.0f}",
                )
            )
        else:
            print("rtm: no alarm")
    if report.balance.get("enabled"):
        t = report.balance.get("first_alarm_time")
        print("balance: " + ("ALARM at window ending t=%.0f s" % t if t else "no alarm"))
    for det in report.acoustic.get("detections", []):
        lat = det["latency"]
        loc = det["localization"]
        print(
            "acoustic: leak@%.0f m -> latency %s, location %s"
            % (
                det["leak_position"],
                "none" if lat is None else f"{lat:.2f} s",
                "none" if loc is None else f"{loc['position']:.0f} m",
            )
        )
    if report.metrics:
        parts = ", ".join(f"{k}={v:.4g}" for k, v in sorted(report.metrics.items()))
        print(f"metrics: {parts}")


# ------------------------------------------------------------------- writers

def _write_rows(path, rows, header_note=None):
    columns = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="") as fh:
        if header_note:
            fh.write(f"# {header_note}\n")
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        w.writerows(rows)


def _note(report):
    return f"# scenario={report.scenario_name} config_sha256={report.config_hash}\n"


def write_telemetry_csv(path, report: RunReport):
    with open(path, "w", newline="") as fh:
        fh.write(_note(report))
        w = csv.writer(fh)
        w.writerow(["poll_time", "instrument", "value", "quality"])
        for frame in report.frames:
            for r in frame.readings:
                w.writerow([frame.poll_time, r.instrument_id,
                            "" if r.value is None else repr(r.value), r.quality])


def write_rtm_trace_csv(path, report: RunReport):
    ids = sorted(
        {iid for rec in report.rtm_records if rec.discrepancy
         for iid in rec.discrepancy.normalized}
    )
    with open(path, "w", newline="") as fh:
        fh.write(_note(report))
        w = csv.writer(fh)
        w.writerow(["poll_time", "available", "alarm"]
                   + [f"norm_{i}" for i in ids] + [f"delta_{i}" for i in ids])
        for rec in report.rtm_records:
            norm = rec.discrepancy.normalized if rec.discrepancy else {}
            delta = rec.discrepancy.delta if rec.discrepancy else {}
            fmt = lambda d, i: "" if d.get(i) is None else repr(d[i])
            w.writerow(
                [rec.poll_time, int(rec.available), int(rec.alarm_condition)]
                + [fmt(norm, i) for i in ids]
                + [fmt(delta, i) for i in ids]
            )


def write_balance_csv(path, report: RunReport):
    with open(path, "w", newline="") as fh:
        fh.write(_note(report))
        w = csv.writer(fh)
        w.writerow(["start", "end", "v_in_kg", "v_out_kg", "delta_inventory_kg",
                    "imbalance_kg", "indeterminate", "alarm"])
        for win in report.balance.get("windows", []):
            w.writerow([win["start"], win["end"], repr(win["v_in"]), repr(win["v_out"]),
                        repr(win["delta_inventory"]), repr(win["imbalance"]),
                        int(win["indeterminate"]), int(win["alarm"])])


def write_acoustic_csv(path, report: RunReport):
    with open(path, "w", newline="") as fh:
        fh.write(_note(report))
        w = csv.writer(fh)
        w.writerow(["leak_position", "sensor", "sensor_position", "arrival_time",
                    "amplitude", "triggered"])
        for ev in report.acoustic.get("events", []):
            w.writerow([ev["leak_position"], ev["sensor"], ev["sensor_position"],
                        repr(ev["arrival_time"]), repr(ev["amplitude"]), int(ev["triggered"])])


def write_availability_csv(path, report: RunReport):
    with open(path, "w", newline="") as fh:
        fh.write(_note(report))
        w = csv.writer(fh)
        w.writerow(["chain", "elements", "rank", "product", "approximate", "approximate_valid"])
        for row in report.availability:
            w.writerow([row["name"], row["elements"], row["rank"], repr(row["product"]),
                        "" if row["approximate"] is None else repr(row["approximate"]),
                        int(row["approximate_valid"])])


def write_states(path, report: RunReport):
    with open(path, "w") as fh:
        fh.write(_note(report))
        fh.write("t x P V T rho\n")
        for st in report.states:
            for i in range(st.x.size):
                fh.write(f"{st.t} {st.x[i]} {st.P[i]} {st.V[i]} {st.T[i]} {st.rho[i]}\n")


if __name__ == "__main__":
    sys.exit(main())
