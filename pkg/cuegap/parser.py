import argparse
import sys
from typing import Any, List, Optional

from cuegap import __version__


def _n_list(value: str) -> List[Optional[float]]:
    """Comma-separated ranks; 'inf' stands for the sine-kernel limit."""
    result: List[Optional[float]] = []
    for part in value.split(","):
        part = part.strip()
        if part.lower() in ("inf", "infinity"):
            result.append(None)
            continue
        try:
            result.append(float(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid rank {part!r}")
    return result


def _float_list(value: str) -> List[float]:
    try:
        return [float(part) for part in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid list of numbers {value!r}")


def _int_list(value: str) -> List[int]:
    try:
        return [int(part) for part in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid list of integers {value!r}")


def _window(value: str) -> List[int]:
    try:
        start, length = value.split(":")
        return [int(start), int(length)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like START:LENGTH, got {value!r}")


def _str_list(value: str) -> List[str]:
    return [part for part in value.split(",") if part]


def parse_arguments(raw_args: Optional[List[str]] = None) -> Any:
    if raw_args is None:
        raw_args = sys.argv[1:]

    main_parser = argparse.ArgumentParser(
        description="Finite-N gap statistics of the circular unitary ensemble and of "
        "Riemann zeta zeros",
        allow_abbrev=False,
        add_help=False,
    )

    general_group = main_parser.add_argument_group(title="general")

    general_group.add_argument(
        "-h",
        "--help",
        help="Show this help message and exit",
        action="help",
    )
    general_group.add_argument(
        "-V",
        "--version",
        help="Show program version and exit",
        action="version",
        version=__version__,
    )
    verbosity_group = general_group.add_mutually_exclusive_group()
    verbosity_group.add_argument(
        "-v",
        "--verbose",
        help="Show more details about the process",
        action="store_true",
    )
    verbosity_group.add_argument(
        "-q",
        "--quiet",
        help="Don't show non-error output",
        action="store_true",
    )

    # sub-parsers
    subparsers = main_parser.add_subparsers(
        title="commands",
        description='Use "cuegap <command> -h" for usage help of a command ',
        dest="command",
        required=True,
    )

    janossy_parser = subparsers.add_parser(
        "janossy",
        help="Evaluate the conditioned gap probability J1(0; [a1, a2]).",
        description="Evaluates J1(0; [a1, a2]) in raw eigenphase variables by integrating the "
        "Tracy-Widom system, optionally cross-checked against a Nystrom determinant. "
        "Lists of a1 and a2 give the grid of all combinations.",
    )
    pnn_parser = subparsers.add_parser(
        "pnn", help="Tabulate the nearest-neighbour spacing distribution P_nn(t)."
    )
    pc_parser = subparsers.add_parser(
        "pc", help="Tabulate the joint distribution P_c(a, b) of two adjacent spacings."
    )
    pr_parser = subparsers.add_parser("pr", help="Tabulate the gap-ratio distribution P_r(r).")
    sine_parser = subparsers.add_parser(
        "sine-limit", help="Tabulate the N -> infinity (sine-kernel) distributions."
    )
    deviation_parser = subparsers.add_parser(
        "deviation", help="Tabulate N^power (P_N - P_inf) for a list of N."
    )
    fit_parser = subparsers.add_parser(
        "fit-orders", help="Fit P_N - P_inf = c2 / N^2 + c4 / N^4 pointwise."
    )
    mc_parser = subparsers.add_parser(
        "mc", help="Sample Haar unitaries and compare empirical histograms with the curves."
    )
    zeta_parser = subparsers.add_parser("zeta", help="Analyze tables of Riemann zeta zeros.")
    selftest_parser = subparsers.add_parser(
        "selftest", help="Run the cross-method consistency checks."
    )
    cache_parser = subparsers.add_parser("cache", help="Inspect and manage the table cache.")

    # common options
    for parser in [
        janossy_parser,
        pnn_parser,
        pc_parser,
        pr_parser,
        sine_parser,
        deviation_parser,
        fit_parser,
        mc_parser,
        zeta_parser,
        selftest_parser,
    ]:
        output_group = parser.add_argument_group(title="output")
        output_group.add_argument(
            "--format",
            help="Output format (default csv)",
            choices=["csv", "json"],
            default="csv",
            dest="output_format",
        )
        output_group.add_argument(
            "-o",
            "--output",
            help="Write results to <path> instead of stdout.",
            metavar="<path>",
        )
        output_group.add_argument(
            "--no-timestamp",
            help="Leave the timestamp out of the metadata header.",
            action="store_true",
        )
        output_group.add_argument(
            "--dry-run",
            help="Print the resolved configuration and exit.",
            action="store_true",
        )

    for parser in [pnn_parser, pc_parser, pr_parser, deviation_parser, fit_parser, mc_parser]:
        parser.add_argument(
            "-n",
            "--n",
            help="Comma-separated list of ranks N ('inf' for the sine-kernel limit).",
            type=_n_list,
            required=True,
            dest="n_list",
            metavar="<N,...>",
        )

    for parser in [pnn_parser, pc_parser, pr_parser, sine_parser, deviation_parser, fit_parser]:
        grid_group = parser.add_argument_group(title="grid")
        grid_group.add_argument(
            "--spacing-max",
            help="Largest tabulated unfolded spacing (default 4).",
            type=float,
            default=4.0,
        )
        grid_group.add_argument(
            "--spacing-points",
            help="Number of spacing grid points (default 200).",
            type=int,
            default=200,
        )
        grid_group.add_argument(
            "--ratio-min",
            help="Smallest tabulated gap ratio (default 0.01).",
            type=float,
            default=0.01,
        )
        grid_group.add_argument(
            "--ratio-max",
            help="Largest tabulated gap ratio (default 4).",
            type=float,
            default=4.0,
        )
        grid_group.add_argument(
            "--ratio-points",
            help="Number of gap-ratio grid points, log-spaced (default 160).",
            type=int,
            default=160,
        )
        grid_group.add_argument(
            "--no-cache",
            help="Don't read or write the sine-limit table cache.",
            action="store_true",
        )

    for parser in [pnn_parser, pc_parser, pr_parser]:
        parser.add_argument(
            "--deviation-power",
            help="Output N^<power> (P_N - P_inf) instead of P_N.",
            type=int,
            metavar="<power>",
        )

    for parser in [sine_parser, deviation_parser, fit_parser]:
        parser.add_argument(
            "--kind",
            help="Distribution to tabulate.",
            choices=["Pnn", "Pc", "Pr"],
            default="Pr",
        )

    for parser in [
        pnn_parser, pc_parser, pr_parser, sine_parser, deviation_parser, fit_parser, mc_parser,
        zeta_parser,
    ]:
        parser.add_argument(
            "-j",
            "--threads",
            help="Number of worker processes (default: CUEGAP_THREADS or CPU count).",
            type=int,
            metavar="<count>",
        )

    janossy_parser.add_argument(
        "-n", "--n", help="Rank N (real values allowed).", type=float, required=True,
        dest="n_rank",
    )
    janossy_parser.add_argument(
        "--a1", help="Left endpoint(s), comma-separated, <= 0.", type=_float_list, required=True
    )
    janossy_parser.add_argument(
        "--a2", help="Right endpoint(s), comma-separated, >= 0.", type=_float_list, required=True
    )
    janossy_parser.add_argument(
        "--check-nystrom",
        help="Also evaluate the Nystrom determinant and report the relative deviation.",
        action="store_true",
    )
    janossy_parser.add_argument(
        "--order", help="Nystrom quadrature order (default 256).", type=int, default=256
    )
    janossy_parser.add_argument(
        "--rtol", help="Relative integrator tolerance (default 1e-12).", type=float,
        default=1e-12,
    )
    janossy_parser.add_argument(
        "--atol", help="Absolute integrator tolerance (default 1e-14).", type=float,
        default=1e-14,
    )

    sine_parser.add_argument(
        "--mean-ratio",
        help="Report normalization, E[r~] and mean spacing of the limit instead of a table.",
        action="store_true",
    )

    deviation_parser.add_argument(
        "--power", help="Scaling power (2 for Pnn and Pc, 4 for Pr).", type=int, required=True
    )

    mc_parser.add_argument(
        "--samples", help="Number of sampled matrices per N.", type=int, default=100000
    )
    mc_parser.add_argument("--seed", help="Random seed.", type=int, default=0)
    mc_parser.add_argument(
        "--batch-size", help="Matrices per batch (default 2000).", type=int, default=2000
    )
    mc_parser.add_argument(
        "--bins", help="Bins per axis (default 40; 20 for Pc).", type=int, metavar="<count>"
    )
    mc_parser.add_argument(
        "--compare-n",
        help="Compare with analytic curves at this rank instead of the sampled one.",
        type=float,
        metavar="<N>",
    )
    mc_parser.add_argument(
        "--histogram-dir",
        help="Also write every histogram as a separate file into <dir>.",
        metavar="<dir>",
    )

    zeta_parser.add_argument("zeta_command", choices=["ingest", "analyze", "fit"])
    zeta_input_group = zeta_parser.add_argument_group(title="zero table")
    zeta_input_group.add_argument(
        "-i", "--input", help="Zero table (plain or gzip).", metavar="<path>"
    )
    zeta_input_group.add_argument(
        "--input-format",
        help="Table layout (default plain_lines).",
        choices=["plain_lines", "offset_deltas"],
        default="plain_lines",
    )
    zeta_input_group.add_argument(
        "--skip", help="Ordinates to skip at the start.", type=int, default=0
    )
    zeta_input_group.add_argument(
        "--limit", help="Maximum number of ordinates to read.", type=int
    )
    zeta_parser.add_argument(
        "-w",
        "--window",
        help="Window of spacings START:LENGTH (repeatable).",
        type=_window,
        action="append",
        dest="window_ranges",
        default=[],
    )
    zeta_parser.add_argument(
        "--sensitivity-lengths",
        help="Also report mean r~ for these window lengths around each window center.",
        type=_int_list,
        metavar="<L,...>",
    )
    zeta_parser.add_argument(
        "--histogram-dir",
        help="Write per-window histograms and scaled deviations into <dir>.",
        metavar="<dir>",
    )
    zeta_parser.add_argument(
        "--windows",
        help="Comma-separated analysis files (output of 'zeta analyze --format json') to fit.",
        type=_str_list,
        dest="analysis_files",
        default=[],
    )

    selftest_parser.add_argument(
        "--full", help="Include the slower sine-limit checks.", action="store_true"
    )

    cache_parser.add_argument("cache_command", choices=["dir", "list", "purge"])

    args = main_parser.parse_args(args=raw_args)

    return args
