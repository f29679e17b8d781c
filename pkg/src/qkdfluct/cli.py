"""Command-line entry point: sweeps, deviation tables, parameter
optimization and Monte Carlo validation.

Exit codes: 0 on success, 2 for configuration problems, 3 when a runtime
invariant or a validation gate fails.  CSV output is deterministic byte for
byte for identical configuration and seed.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Sequence

from .channel import model_outputs
from .config import MODES, ConfigError, RunConfig, apply_overrides, parse_config
from .errors import EstimationFailure, ParameterError
from .fluctuation import bounded_observables, observable_tallies
from .keyrate import key_rate_point, optimize_parameters
from .markov import (MarkovClickModel, coverage_test, martingale_verify,
                     simulate_click_frequency)

__all__ = [
    "SWEEP_COLUMNS",
    "DEVIATION_COLUMNS",
    "OPTIMIZE_COLUMNS",
    "run_sweep",
    "run_deviation_sweep",
    "run_optimize",
    "run_validation",
    "render_csv",
    "main",
]

SWEEP_COLUMNS = ("t_db", "method", "n_total", "p_ap", "q_mu_obs", "e_mu_obs",
                 "xi_qmu", "xi_qnu", "xi_y0", "xi_q0", "chernoff_case",
                 "y1_lower", "e1_upper", "rate")

DEVIATION_COLUMNS = ("t_db", "method", "n_total", "p_ap", "q_mu_obs",
                     "xi_qmu", "xi_qnu", "xi_y0", "xi_q0", "chernoff_case",
                     "qmu_radius_ranking")

OPTIMIZE_COLUMNS = ("t_db", "method", "n_total", "mu", "nu", "p_z",
                    "frac_signal", "frac_decoy", "frac_vacuum", "rate")

# Chain lengths used by validate mode; the coverage length matches the
# regime in which the estimators are typically quoted, the martingale check
# needs far fewer slots.
_COVERAGE_CHAIN_LEN = 100_000
_MARTINGALE_CHAIN_LEN = 10_000
_MARTINGALE_PREFIXES = 100
_COVERAGE_EPSILONS = (1e-1, 1e-2)

# Method order used to break exact ties in the deviation ranking column.
_RANK_TIEBREAK = ("LLN", "AI", "HI", "CB", "SEA")


def _fmt(value: object) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise TypeError("bool has no CSV representation here")
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".9g")


def render_csv(columns: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Render rows with 9-significant-digit numbers; header always present."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(value) for value in row))
    return "\n".join(lines) + "\n"


def _sorted_rows(rows: list[tuple]) -> list[tuple]:
    # Column order is (t, method, n, ...): sort by (method, n_total, t).
    return sorted(rows, key=lambda row: (row[1], row[2], row[0]))


def run_sweep(cfg: RunConfig) -> list[tuple]:
    """Key-rate sweep rows over the loss grid, methods and pulse budgets."""
    budget = cfg.budget()
    rows = []
    for n_total in cfg.n_totals:
        source = cfg.source(n_total)
        for t_db in cfg.loss_grid():
            channel = cfg.channel(t_db)
            for method in cfg.methods:
                point = key_rate_point(channel, source, budget, method)
                rows.append((t_db, method, n_total, cfg.p_ap,
                             point.outputs.q_mu, point.outputs.e_mu,
                             point.bounds.xi_q_mu, point.bounds.xi_q_nu,
                             point.bounds.xi_y0, point.bounds.xi_q0,
                             point.chernoff_case, point.y1_lower,
                             point.e1_upper, point.rate))
    return _sorted_rows(rows)


def _ranking_string(radii: dict[str, float]) -> str:
    order = sorted(radii, key=lambda m: (-radii[m], _RANK_TIEBREAK.index(m)))
    parts = [order[0]]
    for prev, cur in zip(order, order[1:]):
        parts.append("=" if radii[prev] == radii[cur] else ">")
        parts.append(cur)
    return "".join(parts)


def run_deviation_sweep(cfg: RunConfig) -> list[tuple]:
    """Deviation-radius rows; each row carries the per-point ranking of the
    signal-gain radii across the configured methods (largest first)."""
    budget = cfg.budget()
    rows = []
    for n_total in cfg.n_totals:
        source = cfg.source(n_total)
        for t_db in cfg.loss_grid():
            channel = cfg.channel(t_db)
            outputs = model_outputs(channel, source)
            tallies = observable_tallies(outputs, source)
            bounds = {method: bounded_observables(method, tallies, budget)
                      for method in cfg.methods}
            if not bounds:
                continue
            ranking = _ranking_string(
                {m: b.xi_q_mu for m, b in bounds.items()})
            for method, b in bounds.items():
                rows.append((t_db, method, n_total, cfg.p_ap, outputs.q_mu,
                             b.xi_q_mu, b.xi_q_nu, b.xi_y0, b.xi_q0,
                             b.chernoff_case, ranking))
    return _sorted_rows(rows)


def run_optimize(cfg: RunConfig) -> list[tuple]:
    """Optimized source parameters and rate for every sweep point."""
    budget = cfg.budget()
    rows = []
    for n_total in cfg.n_totals:
        base = cfg.source(n_total)
        for t_db in cfg.loss_grid():
            channel = cfg.channel(t_db)
            for method in cfg.methods:
                best, point = optimize_parameters(channel, base, budget, method)
                rows.append((t_db, method, n_total, best.mu, best.nu,
                             best.p_z, best.frac_signal, best.frac_decoy,
                             best.frac_vacuum, point.rate))
    return _sorted_rows(rows)


def run_validation(cfg: RunConfig) -> tuple[list[str], bool]:
    """Monte Carlo validation gates; returns report lines and overall pass.

    The correlated chain's stationary rate is matched to the raw detection
    rate of the configured channel at the middle of the loss grid.  Gated
    checks: the exact-transition martingale identity, interval coverage of
    the correlation-robust AI radius on the correlated chain, and coverage
    of the LLN and HI radii on the independent chain.  Other methods are
    reported for information only.
    """
    if cfg.trials < 100:
        raise ConfigError(f"validate mode needs trials >= 100, got {cfg.trials}")
    mid_loss = 0.5 * (cfg.loss_db_min + cfg.loss_db_max)
    outputs = model_outputs(cfg.channel(mid_loss), cfg.source(cfg.n_totals[0]))
    base_q = outputs.q_mu

    correlated = MarkovClickModel(base_q, cfg.p_ap, seed=cfg.seed)
    independent = MarkovClickModel(base_q, 0.0, seed=cfg.seed)

    lines = []
    all_ok = True

    def gate(passed: bool, text: str) -> None:
        nonlocal all_ok
        all_ok = all_ok and passed
        lines.append(f"{'PASS' if passed else 'FAIL'}: {text}")

    check = martingale_verify(correlated, _MARTINGALE_CHAIN_LEN,
                              _MARTINGALE_PREFIXES, transition="empirical")
    gate(check.max_abs_residual < 1e-12,
         "exact-transition martingale residual "
         f"{check.max_abs_residual:.3e} < 1e-12 "
         f"({check.prefix_lengths.size} prefixes, n={_MARTINGALE_CHAIN_LEN})")

    model_check = martingale_verify(correlated, _MARTINGALE_CHAIN_LEN,
                                    _MARTINGALE_PREFIXES, transition="model")
    lines.append("INFO: model-transition martingale residual decays to "
                 f"{abs(model_check.residuals[-1]):.3e} at n={_MARTINGALE_CHAIN_LEN}")

    gated = (("AI", correlated, "correlated"),
             ("LLN", independent, "independent"),
             ("HI", independent, "independent"))
    for epsilon in _COVERAGE_EPSILONS:
        threshold = epsilon + 3.0 * math.sqrt(epsilon / cfg.trials)
        for method, model, label in gated:
            rate = coverage_test(model, _COVERAGE_CHAIN_LEN, cfg.trials,
                                 epsilon, method)
            gate(rate <= threshold,
                 f"{method} coverage on {label} chain, eps={epsilon:g}: "
                 f"failure rate {rate:.4g} <= {threshold:.4g}")

    for method in cfg.methods:
        if method in ("AI", "LLN", "HI"):
            continue
        for model, label in ((correlated, "correlated"), (independent, "independent")):
            rate = coverage_test(model, _COVERAGE_CHAIN_LEN, cfg.trials,
                                 1e-2, method)
            lines.append(f"INFO: {method} coverage on {label} chain, "
                         f"eps=0.01: failure rate {rate:.4g}")

    x_bar = simulate_click_frequency(correlated, 1_000_000)
    d = correlated.stationary_mean
    rho = correlated.p_click_after_click - correlated.p_click_after_noclick
    sigma = math.sqrt(d * (1.0 - d) * (1.0 + rho) / (1.0 - rho) / 1_000_000)
    gate(abs(x_bar - d) <= 5.0 * sigma,
         f"stationary mean |{x_bar:.6g} - {d:.6g}| within 5 sigma "
         f"({5.0 * sigma:.3g}) on a 1e6-slot chain")

    return lines, all_ok


def _write_gnuplot(path: Path, mode: str, columns: Sequence[str],
                   rows: Sequence[Sequence[object]], csv_text: str) -> None:
    if mode == "sweep":
        value_col, ylabel = columns.index("rate") + 1, "secure key rate (per pulse)"
    else:
        value_col, ylabel = columns.index("xi_qmu") + 1, "signal-gain deviation radius"
    series = []
    for row in rows:
        key = (row[1], _fmt(row[2]))
        if key not in series:
            series.append(key)
    plots = []
    for method, n_literal in series:
        cond = (f"strcol(2) eq '{method}' && strcol(3) eq '{n_literal}' "
                f"&& ${value_col} > 0")
        plots.append(f"    $data using 1:(({cond}) ? ${value_col} : NaN) "
                     f"with lines title '{method} N={n_literal}'")
    script = "\n".join([
        "# companion plot script; render with: gnuplot <this file>",
        "set datafile separator ','",
        "set xlabel 'transmission loss (dB)'",
        f"set ylabel '{ylabel}'",
        "set logscale y",
        "set key outside right",
        "$data << EOD",
        csv_text.rstrip("\n"),
        "EOD",
        "plot \\",
        ", \\\n".join(plots),
        "",
    ])
    path.write_text(script)


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="qkdfluct",
        description="Finite-sample decoy-state key rates under after-pulsing, "
                    "with selectable statistical fluctuation estimators.")
    parser.add_argument("--config", type=Path, default=None,
                        help="key = value configuration file")
    parser.add_argument("--mode", choices=MODES, default=None,
                        help="override the configured run mode")
    parser.add_argument("--out", type=Path, default=None,
                        help="output path (default: stdout)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured RNG seed")
    parser.add_argument("--gnuplot", type=Path, default=None,
                        help="also write a gnuplot companion script "
                             "(sweep and deviations modes)")
    args = parser.parse_args(argv)

    try:
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc}") from None
            cfg = parse_config(text, origin=str(args.config))
        else:
            cfg = parse_config("", origin="<defaults>")
        cfg = apply_overrides(cfg, mode=args.mode, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if cfg.mode == "validate":
            report, ok = run_validation(cfg)
            text = "\n".join(report) + "\n"
            if args.out is not None:
                args.out.write_text(text)
            else:
                sys.stdout.write(text)
            return 0 if ok else 3
        if cfg.mode == "sweep":
            columns, rows = SWEEP_COLUMNS, run_sweep(cfg)
        elif cfg.mode == "deviations":
            columns, rows = DEVIATION_COLUMNS, run_deviation_sweep(cfg)
        else:
            columns, rows = OPTIMIZE_COLUMNS, run_optimize(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, EstimationFailure) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 3

    csv_text = render_csv(columns, rows)
    if args.out is not None:
        args.out.write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.gnuplot is not None and cfg.mode in ("sweep", "deviations"):
        _write_gnuplot(args.gnuplot, cfg.mode, columns, rows, csv_text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
