import datetime
import json
import math
import os.path
import sys
from dataclasses import asdict, dataclass, field
from logging import getLogger
from typing import Any, Dict, List, Optional, Tuple

from cuegap import distributions
from cuegap.cache import TableCache
from cuegap.common import DataError, NumericalError, UserError
from cuegap.grids import DistributionGrid, GridSpec, write_csv, write_grid
from cuegap.histograms import compare_hist, default_edges, write_histogram
from cuegap.kernels import CueParams
from cuegap.nystrom import DEFAULT_QUADRATURE_ORDER, Interval, janossy_nystrom
from cuegap.parallel import set_worker_count
from cuegap.sampling import empirical_distributions
from cuegap.selftest import run_selftest
from cuegap.tracy_widom import DEFAULT_ATOL, DEFAULT_RTOL, janossy_tw
from cuegap.util import file_sha256, get_cuegap_cache_dir, output_stream

logger = getLogger(__name__)

# analytic curves that histograms are compared against don't need the full grid
COMPARISON_GRID = GridSpec(spacing_points=100, ratio_points=120)

_CONFIG_FIELDS = (
    "n_list",
    "rtol",
    "atol",
    "order",
    "seed",
    "samples",
    "input",
    "output",
    "output_format",
    "no_timestamp",
    "dry_run",
    "threads",
)
_IGNORED_ARGS = ("command", "verbose", "quiet")


@dataclass(frozen=True)
class RunConfig:
    command: str
    n_list: Tuple[Optional[float], ...] = ()
    grid: Optional[GridSpec] = None
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER
    seed: Optional[int] = None
    samples: Optional[int] = None
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    output_format: str = "csv"
    timestamp: bool = True
    dry_run: bool = False
    threads: Optional[int] = None
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise UserError("Tolerances must be positive")
        if self.quadrature_order < 2:
            raise UserError("Quadrature order must be at least 2")
        for n in self.n_list:
            if n is not None and not n >= 2:
                raise UserError(f"Every N must be at least 2, got {n:g}")
        if self.samples is not None and self.samples < 1:
            raise UserError("Sample count must be positive")
        if self.threads is not None and self.threads < 1:
            raise UserError("Thread count must be positive")
        if self.output_format not in ("csv", "json"):
            raise UserError(f"Unknown output format {self.output_format!r}")

    @classmethod
    def from_args(cls, args: Any) -> "RunConfig":
        values = dict(vars(args))
        grid = None
        if "spacing_max" in values:
            try:
                grid = GridSpec(
                    spacing_max=values.pop("spacing_max"),
                    spacing_points=values.pop("spacing_points"),
                    ratio_min=values.pop("ratio_min"),
                    ratio_max=values.pop("ratio_max"),
                    ratio_points=values.pop("ratio_points"),
                )
            except ValueError as e:
                raise UserError(str(e))

        n_list = values.get("n_list") or ()
        if "n_rank" in values:
            n_list = [values["n_rank"]]

        return cls(
            command=args.command,
            n_list=tuple(n_list),
            grid=grid,
            rtol=values.get("rtol", DEFAULT_RTOL),
            atol=values.get("atol", DEFAULT_ATOL),
            quadrature_order=values.get("order", DEFAULT_QUADRATURE_ORDER),
            seed=values.get("seed"),
            samples=values.get("samples"),
            input_path=values.get("input"),
            output_path=values.get("output"),
            output_format=values.get("output_format", "csv"),
            timestamp=not values.get("no_timestamp", False),
            dry_run=values.get("dry_run", False),
            threads=values.get("threads"),
            options={
                key: value
                for key, value in values.items()
                if key not in _CONFIG_FIELDS and key not in _IGNORED_ARGS
                and key not in ("n_rank",)
            },
        )

    def to_json_dict(self) -> Dict[str, Any]:
        result = asdict(self)
        result["n_list"] = ["inf" if n is None else n for n in self.n_list]
        return result


class Session:
    """
    Runs one command with a resolved configuration and writes its artifacts.
    """

    def __init__(self, config: RunConfig, quiet: bool = False):
        self._config = config
        self._quiet = quiet
        self._cache: Optional[TableCache] = None
        if config.threads is not None:
            set_worker_count(config.threads)

    def janossy(
        self,
        n_rank: float,
        a1: List[float],
        a2: List[float],
        check_nystrom: bool = False,
        **_,
    ) -> None:
        config = self._config
        params = CueParams(n_rank)
        rows = []
        for left in a1:
            for right in a2:
                try:
                    Interval(left, right).check_janossy()
                except ValueError as e:
                    raise UserError(str(e))
                tw = janossy_tw(left, right, params, rtol=config.rtol, atol=config.atol)
                reference = math.nan
                deviation = math.nan
                if check_nystrom:
                    reference = janossy_nystrom(
                        Interval(left, right), params, config.quadrature_order
                    )
                    deviation = abs(tw - reference) / reference
                rows.append((left, right, tw, reference, deviation))
                if check_nystrom:
                    logger.info("J1(0; [%g, %g]) = %.15g (Nystrom %.15g, deviation %.2e)",
                                left, right, tw, reference, deviation)

        self._write_table(["a1", "a2", "janossy_tw", "janossy_nystrom", "relative_deviation"],
                          rows, {"N": n_rank})

    def pnn(self, n_list: List[Optional[float]], deviation_power: Optional[int] = None,
            no_cache: bool = False, **_) -> None:
        self._tabulate("Pnn", n_list, deviation_power, no_cache)

    def pc(self, n_list: List[Optional[float]], deviation_power: Optional[int] = None,
           no_cache: bool = False, **_) -> None:
        self._tabulate("Pc", n_list, deviation_power, no_cache)

    def pr(self, n_list: List[Optional[float]], deviation_power: Optional[int] = None,
           no_cache: bool = False, **_) -> None:
        self._tabulate("Pr", n_list, deviation_power, no_cache)

    def sine_limit(self, kind: str, mean_ratio: bool = False, no_cache: bool = False,
                   **_) -> None:
        if mean_ratio:
            summary = distributions.ratio_summary(None)
            self._write_table(
                ["normalization", "mean_ratio_tilde", "mean_spacing"],
                [(summary.total, summary.mean_ratio_tilde, summary.mean_spacing)],
                {"N": "inf"},
            )
            return
        self._tabulate(kind, [None], None, no_cache)

    def deviation(self, kind: str, n_list: List[Optional[float]], power: int,
                  no_cache: bool = False, **_) -> None:
        finite = self._finite_ranks(n_list)
        grids = self._deviation_grids(kind, finite, power, no_cache)
        collapse = [
            {"N": [first.n_rank, second.n_rank],
             "sup_distance": distributions.collapse_distance(first, second)}
            for first, second in zip(grids, grids[1:])
        ]
        for item in collapse:
            logger.info("Collapse distance N=%g vs N=%g: %.4g", *item["N"], item["sup_distance"])
        self._write_grids(grids, {"collapse": collapse})

    def fit_orders(self, kind: str, n_list: List[Optional[float]], no_cache: bool = False,
                   **_) -> None:
        finite = self._finite_ranks(n_list)
        fit = distributions.fit_correction_orders(
            kind, finite, self._grid(), self._table_cache(no_cache)
        )
        self._report_progress(
            f"{kind}: sup|c2| = {fit.c2_sup:.4g}, sup|c4| = {fit.c4_sup:.4g}"
        )
        extra = {"N_list": fit.n_list, "c2_sup": fit.c2_sup, "c4_sup": fit.c4_sup}
        names = ["r"] if kind == "Pr" else (["a", "b"] if kind == "Pc" else ["t"])
        rows = []
        if len(fit.axes) == 1:
            for i, x in enumerate(fit.axes[0]):
                rows.append((x, fit.c2[i], fit.c4[i], fit.residual[i]))
        else:
            for i, a in enumerate(fit.axes[0]):
                for j, b in enumerate(fit.axes[1]):
                    rows.append((a, b, fit.c2[i, j], fit.c4[i, j], fit.residual[i, j]))
        self._write_table(names + ["c2", "c4", "residual"], rows, extra)

    def mc(
        self,
        n_list: List[Optional[float]],
        samples: int,
        seed: int,
        batch_size: int,
        bins: Optional[int] = None,
        compare_n: Optional[float] = None,
        histogram_dir: Optional[str] = None,
        **_,
    ) -> None:
        if bins is not None and bins < 1:
            raise UserError(f"Need at least one bin, got {bins}")
        if compare_n is not None and not compare_n >= 2:
            raise UserError(f"--compare-n must be at least 2, got {compare_n:g}")
        edges = {kind: default_edges(kind, bins) for kind in ("Pnn", "Pc", "Pr")}
        rows = []
        for n in self._finite_ranks(n_list):
            params = CueParams(n)
            try:
                empirical = empirical_distributions(
                    params, samples, seed, self._config.threads, batch_size, edges
                )
            except ValueError as e:
                raise UserError(str(e))
            self._report_progress(f"Sampled {samples} matrices of rank {n:g}")

            analytic_n = compare_n or n
            for kind, histogram in empirical.histograms.items():
                if histogram_dir:
                    self._write_side_file(
                        histogram_dir, f"mc_N{n:g}_{kind}",
                        lambda fp, h=histogram: write_histogram(fp, h, self._config.output_format,
                                                                self._header()),
                    )
                grid = distributions.compute_grid(kind, analytic_n, COMPARISON_GRID)
                comparison = compare_hist(grid, histogram)
                rows.append((n, analytic_n, kind, comparison.max_abs_z,
                             comparison.fraction_beyond, math.nan, math.nan, math.nan))

            expected = distributions.mean_gap_ratio(analytic_n)
            observed = empirical.mean_ratio_tilde
            rows.append((n, analytic_n, "mean_ratio_tilde", math.nan, math.nan, observed.mean,
                         observed.stderr, expected))
            logger.info("N=%g: mean r~ %.6f +- %.6f (analytic %.8f)", n, observed.mean,
                        observed.stderr, expected)

        self._write_table(
            ["N", "analytic_N", "statistic", "max_abs_z", "fraction_beyond_3_sigma",
             "empirical_mean", "stderr", "analytic_mean"],
            rows,
            {"samples": samples, "seed": seed},
        )

    def zeta(
        self,
        zeta_command: str,
        input_format: str = "plain_lines",
        skip: int = 0,
        limit: Optional[int] = None,
        window_ranges: Optional[List[List[int]]] = None,
        sensitivity_lengths: Optional[List[int]] = None,
        histogram_dir: Optional[str] = None,
        analysis_files: Optional[List[str]] = None,
        **_,
    ) -> None:
        from cuegap import zeta

        if zeta_command == "fit":
            self._zeta_fit(analysis_files or [])
            return

        if not self._config.input_path:
            raise UserError(f"'zeta {zeta_command}' needs --input")
        try:
            dataset = zeta.ingest_zeros(self._config.input_path, input_format, skip, limit)
        except ValueError as e:
            raise UserError(str(e))

        if zeta_command == "ingest":
            summary = zeta.scan_dataset(dataset)
            content = dict(asdict(summary), sha256=file_sha256(dataset.path))
            self._write_table(list(content), [tuple(content.values())],
                              {"source": dataset.path})
            return

        if not window_ranges:
            raise UserError("'zeta analyze' needs at least one --window START:LENGTH")
        try:
            windows = zeta.read_windows(dataset, [tuple(w) for w in window_ranges])
            results = zeta.analyze_windows(windows, self._config.threads)
        except ValueError as e:
            raise UserError(str(e))

        manifest = zeta.window_manifest(dataset, [w.window for w in windows])
        stats = [ratio_stats.to_json_dict() for ratio_stats, _ in results]
        for item in stats:
            self._report_progress(
                f"Window {item['start']}:{item['length']} N_e={item['N_e']:.4f} "
                f"mean r~={item['mean_ratio_tilde']:.6f}"
            )

        sensitivity = []
        if sensitivity_lengths:
            centers = [w.window.start + w.window.length // 2 for w in windows]
            try:
                sensitivity = zeta.window_sensitivity(dataset, centers, sensitivity_lengths)
            except ValueError as e:
                raise UserError(str(e))

        if histogram_dir:
            self._write_zeta_histograms(histogram_dir, windows, results)

        header = self._header()
        header["manifest"] = manifest
        with output_stream(self._config.output_path) as fp:
            if self._config.output_format == "json":
                json.dump({"metadata": header, "windows": stats, "sensitivity": sensitivity},
                          fp, indent=2, sort_keys=True, default=str)
                fp.write("\n")
            else:
                columns = list(stats[0])
                write_csv(fp, columns, [tuple(s[c] for c in columns) for s in stats], header)
                if sensitivity:
                    fp.write("\n\n")
                    columns = list(sensitivity[0])
                    write_csv(fp, columns, [tuple(s[c] for c in columns) for s in sensitivity],
                              {})

    def selftest(self, full: bool = False, **_) -> None:
        results = run_selftest(full)
        rows = [(r.name, r.error, r.limit, "pass" if r.passed else "FAIL", r.seconds)
                for r in results]
        self._write_table(["check", "error", "limit", "status", "seconds"], rows, {})
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise NumericalError(f"Failed checks: {', '.join(failed)}")

    def cache(self, cache_command: str, **_) -> None:
        cache = TableCache()
        if cache_command == "purge":
            cache.purge()
        elif not os.path.exists(get_cuegap_cache_dir()):
            print(f"Cache dir ({get_cuegap_cache_dir()}) not created yet")
        elif cache_command == "dir":
            print(get_cuegap_cache_dir())
        else:
            for name in cache.list_entries():
                print(name)

    def _zeta_fit(self, analysis_files: List[str]) -> None:
        from cuegap import zeta

        if not analysis_files:
            raise UserError("'zeta fit' needs --windows with analysis files")
        points = []
        for path in analysis_files:
            try:
                with open(path, encoding="utf-8") as fp:
                    content = json.load(fp)
                for item in content["windows"]:
                    points.append((float(item["N_e"]), float(item["relative_deviation"])))
            except OSError as e:
                raise DataError(f"Can't read analysis: {e.strerror}", path)
            except (ValueError, KeyError, TypeError) as e:
                raise DataError(f"Not a 'zeta analyze' JSON result ({e})", path)

        fit = zeta.scaling_fit(points)
        self._report_progress(f"Fit: {fit.amplitude:.4g} N_e^{fit.exponent:.4f}")
        content = fit.to_json_dict()
        header = self._header()
        header["points"] = [{"N_e": n_e, "relative_deviation": d} for n_e, d in points]
        with output_stream(self._config.output_path) as fp:
            if self._config.output_format == "json":
                json.dump({"metadata": header, "fit": content}, fp, indent=2, sort_keys=True)
                fp.write("\n")
            else:
                write_csv(fp, ["amplitude", "exponent", "points_used"],
                          [(fit.amplitude, fit.exponent, fit.points_used)], header)

    def _write_zeta_histograms(self, directory: str, windows, results) -> None:
        from cuegap import zeta

        fmt = self._config.output_format
        limits = {kind: distributions.cached_grid(kind, None, COMPARISON_GRID, self._table_cache())
                  for kind in ("Pr", "Pc")}
        for data, (ratio_stats, pair_histogram) in zip(windows, results):
            window = data.window
            stem = f"zeta_{window.start}_{window.length}"
            for name, histogram in (("ratio_tilde", ratio_stats.ratio_tilde),
                                    ("ratio", ratio_stats.ratio), ("pc", pair_histogram)):
                self._write_side_file(
                    directory, f"{stem}_{name}",
                    lambda fp, h=histogram: write_histogram(fp, h, fmt, self._header()),
                )

            n_e = window.n_effective
            if n_e < 2:
                logger.warning("Window %d:%d has N_e=%.3g below 2; no CUE deviation tables",
                               window.start, window.length, n_e)
                continue
            for kind, histogram, power in (("Pr", ratio_stats.ratio, 3), ("Pc", pair_histogram, 2)):
                finite = distributions.compute_grid(kind, n_e, COMPARISON_GRID)
                deviation = zeta.scaled_deviation_histogram(
                    histogram, n_e, power, limits[kind], finite
                )
                header = dict(self._header(), **window.to_json_dict(), deviation_power=power)
                self._write_side_file(
                    directory, f"{stem}_{kind.lower()}_deviation",
                    lambda fp, d=deviation, h=header: write_csv(fp, d.columns(), d.rows(), h),
                    fmt="csv",
                )

    def _finite_ranks(self, n_list: List[Optional[float]]) -> List[float]:
        if any(n is None for n in n_list):
            raise UserError(f"'{self._config.command}' needs finite ranks")
        return [float(n) for n in n_list if n is not None]

    def _grid(self) -> GridSpec:
        return self._config.grid or GridSpec()

    def _table_cache(self, no_cache: bool = False) -> Optional[TableCache]:
        if no_cache:
            return None
        if self._cache is None:
            self._cache = TableCache()
        return self._cache

    def _deviation_grids(self, kind: str, n_list: List[float], power: int,
                         no_cache: bool) -> List[DistributionGrid]:
        spec = self._grid()
        limit = distributions.cached_grid(kind, None, spec, self._table_cache(no_cache))
        grids = []
        for n in n_list:
            grids.append(distributions.deviation_scaled(kind, n, power, spec, limit))
            self._report_progress(f"{kind} deviation for N={n:g} done")
        return grids

    def _tabulate(self, kind: str, n_list: List[Optional[float]],
                  deviation_power: Optional[int], no_cache: bool) -> None:
        if deviation_power is not None:
            grids = self._deviation_grids(kind, self._finite_ranks(n_list), deviation_power,
                                          no_cache)
        else:
            grids = []
            for n in n_list:
                if n is None:
                    grids.append(
                        distributions.cached_grid(kind, None, self._grid(),
                                                  self._table_cache(no_cache))
                    )
                else:
                    grids.append(distributions.compute_grid(kind, n, self._grid()))
                self._report_progress(f"{kind} for N={grids[-1].n_label} done")
        self._write_grids(grids, {})

    def _header(self) -> Dict[str, Any]:
        import cuegap

        header: Dict[str, Any] = {
            "version": cuegap.__version__,
            "command": self._config.command,
            "config": self._config.to_json_dict(),
        }
        if self._config.timestamp:
            header["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat(
                timespec="seconds"
            )
        return header

    def _write_grids(self, grids: List[DistributionGrid], extra: Dict[str, Any]) -> None:
        header = self._header()
        header.update(extra)
        fmt = self._config.output_format
        with output_stream(self._config.output_path) as fp:
            if fmt == "json":
                json.dump(
                    {"metadata": header,
                     "grids": [dict(g.to_json_dict(), metadata=g.header()) for g in grids]},
                    fp, indent=2, sort_keys=True, default=str,
                )
                fp.write("\n")
                return
            for i, grid in enumerate(grids):
                if i > 0:
                    # gnuplot data blocks
                    fp.write("\n\n")
                write_grid(fp, grid, "csv", header if i == 0 else {})

    def _write_table(self, columns: List[str], rows: List[Tuple], extra: Dict[str, Any]) -> None:
        header = self._header()
        header.update(extra)
        with output_stream(self._config.output_path) as fp:
            if self._config.output_format == "json":
                json.dump({"metadata": header, "rows": [dict(zip(columns, row)) for row in rows]},
                          fp, indent=2, sort_keys=True, default=str)
                fp.write("\n")
            else:
                write_csv(fp, columns, rows, header)

    def _write_side_file(self, directory: str, stem: str, writer,
                         fmt: Optional[str] = None) -> None:
        fmt = fmt or self._config.output_format
        path = os.path.join(directory, f"{stem}.{fmt}")
        with output_stream(path) as fp:
            writer(fp)

    def _report_progress(self, msg: str, end="\n") -> None:
        # stdout carries the results unless they go to a file
        if not self._quiet and self._config.output_path is not None:
            print(msg, end=end)
            sys.stdout.flush()

