import argparse
import json
import logging
import sys
from functools import partial
from math import sqrt
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd

from superextremal.config import RunConfig
from superextremal.domain import Grid, Variogram
from superextremal.empirical import CadlagMaxProcess, block_count, partial_maxima
from superextremal.errors import ArgumentError, SuperextremalError
from superextremal.fdd import FddQuery, check_sites, exponent_nu, fdd_empirical, fdd_probability
from superextremal.gauss import (
    CovarianceFamily,
    draw_lognormal,
    gaussian_tail_exceedance,
    lognormal_factor,
    sample_lognormal,
    scaling_bn,
    scaling_ratio,
)
from superextremal.ppp import (
    BrownResnickSampler,
    SpectralSampler,
    nominal_truncation_radius,
    sample_ppp,
    theta_tilde_map,
)
from superextremal.rng import STREAM_GAUSS, STREAM_PPP, STREAM_PRELIMIT, STREAM_SPECTRAL, extend_seed, make_rng
from superextremal.stattest import TestReport, run_suite
from superextremal.workers import map_replicates

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TEST_FAILURE = 1
EXIT_IO = 2
FDD_AGREEMENT_SE = 3.0


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parses command-line arguments for the experiment harness."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Path to a flat JSON run configuration. Defaults are used when omitted.")
    common.add_argument("--seed", type=int, help="Overrides the configured seed.")
    common.add_argument("--out", help="Overrides the configured output directory.")
    common.add_argument("--workers", type=int, help="Number of worker processes for Monte Carlo replicates.")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")

    parser = argparse.ArgumentParser(
        description="Simulate superextremal processes and check their limit theorems by Monte Carlo."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Write limit and/or pre-limit realizations as CSV.")
    sub.add_parser("convergence", parents=[common], help="Tabulate n P[X_n in A] against the exponent measure.")
    sub.add_parser("test", parents=[common], help="Run the pinned-seed property test suite.")
    fdd = sub.add_parser("fdd", parents=[common], help="Compare theoretical and empirical fdd probabilities.")
    fdd.add_argument("query", help="Path to a JSON query with times, sites and thresholds.")
    return parser.parse_args(argv)


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_json(args.config) if args.config else RunConfig()
    return config.with_overrides(seed=args.seed, output_dir=args.out, workers=args.workers)


def prepare_output(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.write_resolved(out)
    return out


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False)
    logger.info(f"Saved {len(frame):,} rows to {path}")
    return path


# --- simulate


def _limit_realization(
    replicate: int, sampler: SpectralSampler, horizon: float, count: int, time_grid: List[float], seed: int
) -> Tuple[CadlagMaxProcess, float]:
    pm = sample_ppp(sampler, horizon=horizon, count=count, seed=extend_seed(seed, STREAM_PPP, replicate))
    return theta_tilde_map(pm, time_grid), pm.truncation_radius


def _prelimit_realization(
    replicate: int, factor: npt.NDArray[np.float64], n: int, time_grid: List[float], seed: int
) -> CadlagMaxProcess:
    rng = make_rng(extend_seed(seed, STREAM_PRELIMIT, n, replicate))
    batch = draw_lognormal(factor, n, block_count(n, time_grid[-1]), rng)
    return partial_maxima(batch, n, time_grid)


def _stack(processes: Sequence[CadlagMaxProcess]) -> pd.DataFrame:
    frames = [p.to_frame() for p in processes]
    for i, frame in enumerate(frames):
        frame.insert(0, "realization", i)
    return pd.concat(frames, ignore_index=True)


def cmd_simulate(config: RunConfig, out: Path) -> List[Path]:
    """Writes superextremal (limit) and partial-maxima (pre-limit) realizations on the configured time grid."""
    grid = config.grid()
    written = [_write_csv(grid.to_frame(), out / "grid.csv")]
    replicates = range(config.realizations)

    if config.side in ("limit", "both"):
        sampler = config.sampler(grid=grid)
        func = partial(
            _limit_realization,
            sampler=sampler,
            horizon=config.horizon,
            count=config.truncation,
            time_grid=config.time_grid,
            seed=config.seed,
        )
        results = map_replicates(func, replicates, workers=config.workers, desc="limit realizations")
        written.append(_write_csv(_stack([p for p, _ in results]), out / "superextremal.csv"))

        bound = nominal_truncation_radius(config.truncation, config.horizon, config.alpha)
        truncation = pd.DataFrame(
            {
                "realization": list(replicates),
                "truncation_radius": [r for _, r in results],
                "nominal_bound": bound,
            }
        )
        written.append(_write_csv(truncation, out / "truncation.csv"))
        logger.info(f"Atoms below radius ~{bound:.3e} were dropped (K={config.truncation}, M={config.horizon})")

        first = sample_ppp(sampler, config.horizon, config.truncation, seed=extend_seed(config.seed, STREAM_PPP, 0))
        first.to_jsonl(out / "atoms_0000.jsonl")
        written.append(out / "atoms_0000.jsonl")

    if config.side in ("prelimit", "both"):
        factor = lognormal_factor(grid, config.variogram(), config.prelimit_n)
        func_pre = partial(
            _prelimit_realization, factor=factor, n=config.prelimit_n, time_grid=config.time_grid, seed=config.seed
        )
        processes = map_replicates(func_pre, replicates, workers=config.workers, desc="pre-limit realizations")
        written.append(_write_csv(_stack(processes), out / "partial_maxima.csv"))
    return written


# --- convergence


def _convergence_sites(config: RunConfig, grid: Grid) -> List[int]:
    sites = list(config.convergence_sites) or [grid.origin_index]
    if any(not 0 <= s < grid.size for s in sites):
        raise ArgumentError(f"convergence sites {sites} outside a {grid.size}-site grid")
    return sites


def _diagnostic_sites(grid: Grid, sites: List[int]) -> List[int]:
    chosen = sorted(set(sites) | {grid.origin_index})
    if len(chosen) < 2 and grid.size > 1:
        chosen.append(grid.size - 1 if grid.origin_index != grid.size - 1 else 0)
    return sorted(chosen)


def gauss_diagnostics(config: RunConfig, grid: Grid, v: Variogram, sites: List[int]) -> pd.DataFrame:
    """Empirical correlations of Z_n against r_n(Γ), plus the b_n scaling diagnostics."""
    chosen = _diagnostic_sites(grid, sites)
    rows: List[Dict[str, Any]] = []
    for n in config.n_list:
        b = scaling_bn(n)
        rows.append({"n": n, "site_i": grid.origin_index, "site_j": grid.origin_index, "quantity": "scaling_ratio",
                     "formula": scaling_ratio(n), "empirical": np.nan})
        rows.append({"n": n, "site_i": grid.origin_index, "site_j": grid.origin_index, "quantity": "tail_at_one",
                     "formula": 1.0, "empirical": gaussian_tail_exceedance(n, 1.0)})
        if len(chosen) < 2:
            continue
        factor = lognormal_factor(grid, v, n, sites=chosen)
        x = draw_lognormal(factor, n, config.diagnostic_draws, make_rng(extend_seed(config.seed, STREAM_GAUSS, n)))
        corr = np.corrcoef(np.log(x) / b + b, rowvar=False)
        r = CovarianceFamily(v, n).matrix(grid)
        for a in range(len(chosen)):
            for c in range(a + 1, len(chosen)):
                i, j = chosen[a], chosen[c]
                rows.append({"n": n, "site_i": i, "site_j": j, "quantity": "correlation",
                             "formula": float(r[i, j]), "empirical": float(corr[a, c])})
    return pd.DataFrame(rows)


def _error_trend(table: pd.DataFrame) -> pd.Series:
    """Per level z, abs_error at each n stays within one SE of its value at the previous n."""
    ordered = table.sort_values(["z", "n"])
    previous = ordered.groupby("z")["abs_error"].shift()
    ok = previous.isna() | (ordered["abs_error"] <= previous + ordered["n_p_stderr"])
    return ok.reindex(table.index)


def cmd_convergence(config: RunConfig, out: Path) -> pd.DataFrame:
    """n P̂[X_n ∈ A] next to ν̂(A) for every n and level, A = {f: ∃i, f(t_i) >= z}."""
    grid = config.grid()
    v = config.variogram()
    sites = _convergence_sites(config, grid)
    if config.alpha != 1.0:
        logger.warning(f"The log-normal pre-limit converges to the alpha = 1 limit; ignoring alpha = {config.alpha}")
    sampler = BrownResnickSampler(grid, v, alpha=1.0)

    nu = {
        z: exponent_nu(np.full(len(sites), z), sampler, config.mc_size, extend_seed(config.seed, STREAM_SPECTRAL), sites)
        for z in config.convergence_levels
    }
    rows = []
    for n in config.n_list:
        x = sample_lognormal(grid, v, n, config.convergence_draws, extend_seed(config.seed, STREAM_PRELIMIT, n), sites)
        for z in config.convergence_levels:
            p = float(np.mean(np.any(x >= z, axis=1)))
            estimate = n * p
            rows.append(
                {
                    "n": n,
                    "sites": ";".join(str(s) for s in sites),
                    "z": z,
                    "n_p_hat": estimate,
                    "n_p_stderr": n * sqrt(p * (1.0 - p) / config.convergence_draws),
                    "nu_hat": nu[z].estimate,
                    "nu_stderr": nu[z].stderr,
                    "gaussian_tail": gaussian_tail_exceedance(n, z) if len(sites) == 1 else np.nan,
                    "abs_error": abs(estimate - nu[z].estimate),
                }
            )
        logger.info(f"n={n:,}: finished {len(config.convergence_levels)} levels")
    table = pd.DataFrame(rows)
    table["trend_ok"] = _error_trend(table)
    for z, ok in table.groupby("z")["trend_ok"].all().items():
        if ok:
            logger.info(f"z={z:g}: |n P - nu| nonincreasing in n within one SE")
        else:
            logger.warning(f"z={z:g}: |n P - nu| grew by more than one SE between consecutive n")
    _write_csv(table, out / "convergence.csv")
    _write_csv(gauss_diagnostics(config, grid, v, sites), out / "gauss_diagnostics.csv")
    return table


# --- test


def cmd_test(config: RunConfig, out: Path) -> List[TestReport]:
    reports = run_suite(config)
    frame = pd.DataFrame([r.to_dict() for r in reports])
    path = out / "reports.jsonl"
    frame.to_json(path, orient="records", lines=True, double_precision=15)
    logger.info(f"Saved {len(reports)} reports to {path}")
    return reports


# --- fdd


def _fdd_realization(
    replicate: int, sampler: SpectralSampler, times: List[float], count: int, seed: int
) -> CadlagMaxProcess:
    pm = sample_ppp(sampler, horizon=times[-1], count=count, seed=extend_seed(seed, STREAM_PPP, replicate))
    return theta_tilde_map(pm, times)


def cmd_fdd(config: RunConfig, out: Path, query_path: str) -> Dict[str, Any]:
    """Product-formula probability against the fraction of limit realizations below the thresholds."""
    query = FddQuery.from_json(query_path)
    sampler = config.sampler()
    check_sites(query.sites, sampler.n_sites)
    theoretical = fdd_probability(query, sampler, config.mc_size, extend_seed(config.seed, STREAM_SPECTRAL))

    times = [float(u) for u in query.times]
    func = partial(_fdd_realization, sampler=sampler, times=times, count=config.truncation, seed=config.seed)
    realizations = map_replicates(func, range(config.fdd_realizations), workers=config.workers, desc="fdd realizations")
    empirical = fdd_empirical(realizations, query)

    combined = sqrt(theoretical.stderr**2 + empirical.stderr**2)
    gap = abs(theoretical.probability - empirical.probability)
    z_score = gap / combined if combined > 0 else (0.0 if gap == 0 else float("inf"))
    payload = {
        "query": {"times": times, "sites": list(query.sites), "thresholds": query.thresholds.tolist()},
        "sampler": config.sampler_kind,
        "alpha": config.alpha,
        "seed": config.seed,
        "theoretical": theoretical.to_dict(),
        "empirical": {
            "probability": empirical.probability,
            "stderr": empirical.stderr,
            "realizations": empirical.n_realizations,
        },
        "combined_stderr": combined,
        "z_score": z_score,
        "agree": z_score <= FDD_AGREEMENT_SE,
    }
    path = out / "fdd.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    logger.info(f"Saved fdd comparison to {path}")
    return payload


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
    )
    try:
        config = load_config(args)
        out = prepare_output(config)
        logger.info(f"Running '{args.command}' with seed {config.seed}, output in {out}")
        if args.command == "simulate":
            written = cmd_simulate(config, out)
            print(f"simulate: wrote {len(written)} files to {out}")
        elif args.command == "convergence":
            table = cmd_convergence(config, out)
            print(f"convergence: {len(table)} rows written to {out / 'convergence.csv'}")
        elif args.command == "test":
            reports = cmd_test(config, out)
            failed = [r for r in reports if r.gating and not r.passed]
            for report in failed:
                logger.error(f"FAILED {report.description}: {report.statistic:.4g} > {report.threshold:.4g}")
            print(f"test: {len(reports) - len(failed)}/{len(reports)} passed")
            if failed:
                return EXIT_TEST_FAILURE
        elif args.command == "fdd":
            payload = cmd_fdd(config, out, args.query)
            print(
                f"fdd: theoretical {payload['theoretical']['probability']:.4f}, "
                f"empirical {payload['empirical']['probability']:.4f}, z={payload['z_score']:.2f}"
            )
    except SuperextremalError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
