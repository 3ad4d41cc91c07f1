"""Command-line driver: ``kvn run <config>`` and ``kvn verify``.

Exit codes: 0 success, 1 failed identity in ``verify``, 2 invalid
configuration, 3 numerical failure during a run (margin breach, NaN).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
import warnings
from contextlib import nullcontext
from pathlib import Path

EXIT_OK = 0
EXIT_IDENTITY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

#: Grid size of the verification suite and the tolerance for spectral identities.
DEFAULT_VERIFY_GRID = 64
VERIFY_DERIVATIVE_TOL = 1e-6
#: Looser tolerance for coarse suites (``--grid`` below 64), where spectral
#: truncation of the test states' products is no longer at round-off.
COARSE_DERIVATIVE_TOL = 1e-5
#: Upper limit on the per-axis size of the two-axis (4-d) suite.
MAX_4D_VERIFY_GRID = 32

log = logging.getLogger("kvn")


def _configure(threads, quiet):
    # numba reports an unusable TBB install once per process; the OpenMP/workqueue layers are used instead
    warnings.filterwarnings("ignore", message=".*TBB.*")
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    from . import spectral

    if threads is not None:
        import numba

        n = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)
        spectral.set_workers(n)
        return n
    return None


def _out_dir(arg, default_name):
    if arg:
        return Path(arg)
    env = os.environ.get("KVN_OUT_DIR")
    return Path(env) if env else Path("kvn_out") / default_name


def cmd_run(args) -> int:
    from .errors import ConfigError, KvnError
    from .scenarios import ScenarioConfig, run_scenario

    threads = _configure(args.threads, args.quiet)
    try:
        cfg = ScenarioConfig.load(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output_dir or os.environ.get("KVN_OUT_DIR") or str(Path("kvn_out") / cfg.name)
    try:
        result = run_scenario(cfg, out, threads, log.info)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KvnError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    m = result.manifest
    log.info(f"{cfg.name}: {m['steps']} steps, norm drift {m['norm_drift']:.3e}, "
             f"{m['wall_time_s']:.2f} s -> {result.directory}")
    return EXIT_OK


def verify_rows(n: int, break_lambda_sign: bool = False) -> list:
    """Residual rows of the algebra suite on the one- and two-axis grids."""
    from . import spectral
    from .galilei import algebra_suite, suite_grid

    tol = VERIFY_DERIVATIVE_TOL if n >= DEFAULT_VERIFY_GRID else COARSE_DERIVATIVE_TOL
    n4 = min(n, MAX_4D_VERIFY_GRID)
    tol4 = VERIFY_DERIVATIVE_TOL if n4 >= MAX_4D_VERIFY_GRID else COARSE_DERIVATIVE_TOL
    hook = spectral.flipped_lambda_sign() if break_lambda_sign else nullcontext()
    with hook:
        rows = algebra_suite(suite_grid(1, n), derivative_tol=tol)
        log.info(f"1-axis suite on {n}x{n}: {len(rows)} rows")
        rows += algebra_suite(suite_grid(2, n4), derivative_tol=tol4)
        log.info(f"2-axis suite on {n4}^4: {len(rows)} rows in total")
    return rows


def write_verify_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["identity_id", "state_index", "residual", "tolerance", "pass"])
        for r in rows:
            w.writerow([r.identity_id, r.state_index, repr(r.residual), repr(r.tolerance),
                        "pass" if r.passed else "fail"])


def cmd_verify(args) -> int:
    _configure(args.threads, args.quiet)
    if args.grid < 8 or args.grid & (args.grid - 1):
        print("configuration error: --grid must be a power of two >= 8", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args.out, "verify")
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    rows = verify_rows(args.grid, args.break_lambda_sign)
    path = out / "verify.csv"
    write_verify_csv(path, rows)
    failed = [r for r in rows if not r.passed]
    ids = {r.identity_id for r in rows}
    log.info(f"{len(ids)} identities, {len(rows)} rows, {len(failed)} failed, "
             f"{time.perf_counter() - start:.1f} s -> {path}")
    for r in failed:
        print(f"FAIL {r.identity_id} state {r.state_index}: residual {r.residual:.3e} >= {r.tolerance:.0e}",
              file=sys.stderr)
    return EXIT_IDENTITY_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads for FFTs and gathers")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    parser = argparse.ArgumentParser(prog="kvn", description="Phase-space wavefunction scenarios and checks.",
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run a scenario configuration")
    run.add_argument("config", help="scenario JSON file")
    run.add_argument("--out", default=None, help="output directory (default: config, $KVN_OUT_DIR, kvn_out/<name>)")
    run.set_defaults(func=cmd_run)
    ver = sub.add_parser("verify", parents=[common], help="run the operator identity suite")
    ver.add_argument("--grid", type=int, default=DEFAULT_VERIFY_GRID, help="points per axis of the 1-axis suite")
    ver.add_argument("--out", default=None, help="output directory (default: $KVN_OUT_DIR or kvn_out/verify)")
    ver.add_argument("--break-lambda-sign", action="store_true", help=argparse.SUPPRESS)
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
