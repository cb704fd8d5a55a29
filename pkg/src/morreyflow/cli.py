"""Command-line experiment runner: run one scenario or a whole suite.

Exit status 0 means every requested check passed, 1 means at least one
failed, 2 means a scenario could not be loaded or run.  Artifacts (report
JSON, trajectory CSVs, rate-fit JSONs) land in a per-run directory named by
scenario and timestamp under --out (or $MORREYFLOW_OUT, default ./out).
"""

import argparse
import concurrent.futures
import os
import sys
import time
from pathlib import Path

from .errors import MorreyflowError
from .scenario import hmf_csv, load_scenario, report_json, run_scenario, trajectory_csv


def _out_root(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("MORREYFLOW_OUT", "out"))


def _run_one(path: str, out_root: str, seed, tol_scale: float) -> dict:
    scenario = load_scenario(path)
    if seed is not None:
        scenario.seed = int(seed)
    report, ctx = run_scenario(scenario, tol_scale=tol_scale)

    stamp = time.strftime("%Y%m%d-%H%M%S")
    run_dir = Path(out_root) / f"{scenario.name}-{stamp}"
    suffix = 1
    while run_dir.exists():
        suffix += 1
        run_dir = Path(out_root) / f"{scenario.name}-{stamp}-{suffix}"
    run_dir.mkdir(parents=True)
    (run_dir / "report.json").write_text(report_json(report))
    if ctx._trajectory is not None:
        (run_dir / "trajectory.csv").write_text(trajectory_csv(ctx._trajectory))
    if ctx._hmf_result is not None:
        (run_dir / "hmf_diagnostics.csv").write_text(hmf_csv(ctx._hmf_result))
    if ctx.rate_fits:
        fits_dir = run_dir / "fits"
        fits_dir.mkdir(exist_ok=True)
        for key, fit in ctx.rate_fits.items():
            safe = key.replace("/", "_").replace("=", "-")
            (fits_dir / f"{safe}.json").write_text(report_json(fit.to_dict()))
    report["artifact_dir"] = str(run_dir)
    return report


def _print_report(report: dict):
    print(f"scenario {report['scenario']}: {'PASS' if report['passed'] else 'FAIL'}"
          f"  ({report['wall_time_s']:.1f}s)")
    for check in report["checks"]:
        status = "pass" if check["passed"] else "FAIL"
        target = check.get("target")
        measured = check.get("measured")
        line = f"  [{status}] {check['name']}: measured={measured}"
        if target is not None:
            line += f" target={target}"
        if check.get("tolerance") is not None:
            line += f" tol={check['tolerance']}"
        err = check.get("detail", {}).get("error")
        if err:
            line += f"  ({err})"
        print(line)
    if "artifact_dir" in report:
        print(f"  artifacts: {report['artifact_dir']}")


def cmd_run(args) -> int:
    try:
        report = _run_one(args.scenario, _out_root(args), args.seed, args.strict_tol)
    except MorreyflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_report(report)
    return 0 if report["passed"] else 1


def cmd_suite(args) -> int:
    directory = Path(args.directory)
    files = sorted(str(p) for p in directory.glob("*.scn"))
    if not files:
        print(f"suite: no scenarios in {directory} (empty pass)")
        return 0
    out_root = str(_out_root(args))
    reports = []
    failures = 0
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {pool.submit(_run_one, f, out_root, args.seed, args.strict_tol): f for f in files}
            for fut in concurrent.futures.as_completed(futures):
                path = futures[fut]
                try:
                    reports.append(fut.result())
                except MorreyflowError as exc:
                    print(f"error in {path}: {exc}", file=sys.stderr)
                    failures += 1
    else:
        for path in files:
            try:
                reports.append(_run_one(path, out_root, args.seed, args.strict_tol))
            except MorreyflowError as exc:
                print(f"error in {path}: {exc}", file=sys.stderr)
                failures += 1

    reports.sort(key=lambda r: r["scenario"])
    for report in reports:
        _print_report(report)
    n_pass = sum(1 for r in reports if r["passed"])
    print(f"suite: {n_pass}/{len(reports)} scenarios passed"
          + (f", {failures} errored" if failures else ""))
    if failures:
        return 2
    return 0 if n_pass == len(reports) else 1


def main(argv=None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (default $MORREYFLOW_OUT or ./out)")
    common.add_argument("--seed", default=None, type=int, help="override the scenario seed")
    common.add_argument(
        "--strict-tol",
        default=1.0,
        type=float,
        help="scale factor applied to every tolerance (<1 tightens)",
    )

    parser = argparse.ArgumentParser(prog="morreyflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="run a single scenario file")
    p_run.add_argument("scenario")
    p_run.set_defaults(func=cmd_run)

    p_suite = sub.add_parser("suite", parents=[common], help="run every *.scn scenario in a directory")
    p_suite.add_argument("directory")
    p_suite.add_argument("--jobs", default=1, type=int, help="parallel scenario runs")
    p_suite.set_defaults(func=cmd_suite)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
