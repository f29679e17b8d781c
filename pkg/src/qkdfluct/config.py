"""Run configuration: ``key = value`` files plus CLI overrides.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment and blank lines are ignored.  Unknown keys, duplicate keys and
malformed values are reported with their line number.  ``epsilon`` and
``u_alpha`` may be given separately, but when both appear they must agree
(the quantile of ``epsilon`` must match ``u_alpha`` within 0.05, the
precision to which such quantiles are conventionally rounded).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .channel import ChannelParams, SourceConfig
from .errors import ParameterError
from .fluctuation import (METHODS, FailureBudget, failure_prob_for_quantile,
                          quantile_for_failure_prob)

__all__ = ["ConfigError", "RunConfig", "parse_config", "apply_overrides", "MODES"]

MODES = ("sweep", "deviations", "optimize", "validate")


class ConfigError(ValueError):
    """A configuration file or override could not be accepted."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters (all defaults applied)."""

    loss_db_min: float = 0.0
    loss_db_max: float = 40.0
    loss_db_step: float = 1.0
    mu: float = 0.5
    nu: float = 0.05
    p_z: float = 0.5
    n_totals: tuple[float, ...] = (1e12,)
    frac_signal: float = 0.5
    frac_decoy: float = 0.25
    frac_vacuum: float = 0.25
    p_dc: float = 1.7e-6
    e_d: float = 0.033
    e_0: float = 0.5
    p_ap: float = 0.04
    f_ec: float = 1.28
    epsilon: float = 1e-10
    epsilon_1: float = 1e-10
    epsilon_2: float = 1e-10
    epsilon_3: float = 1e-10
    u_alpha: float = 6.4
    methods: tuple[str, ...] = METHODS
    mode: str = "sweep"
    seed: int = 42
    trials: int = 1000

    def channel(self, loss_db: float) -> ChannelParams:
        return ChannelParams(loss_db=loss_db, dark_count_prob=self.p_dc,
                             misalignment=self.e_d, background_error=self.e_0,
                             afterpulse_prob=self.p_ap)

    def source(self, n_total: float) -> SourceConfig:
        return SourceConfig(mu=self.mu, nu=self.nu, p_z=self.p_z,
                            n_total=n_total, frac_signal=self.frac_signal,
                            frac_decoy=self.frac_decoy,
                            frac_vacuum=self.frac_vacuum, f_ec=self.f_ec)

    def budget(self) -> FailureBudget:
        return FailureBudget(epsilon=self.epsilon, epsilon_1=self.epsilon_1,
                             epsilon_2=self.epsilon_2, epsilon_3=self.epsilon_3,
                             u_alpha=self.u_alpha)

    def loss_grid(self) -> list[float]:
        steps = int((self.loss_db_max - self.loss_db_min) / self.loss_db_step + 1e-9)
        return [self.loss_db_min + i * self.loss_db_step for i in range(steps + 1)]


def _parse_float(value: str) -> float:
    result = float(value)
    if result != result:  # NaN
        raise ValueError("not a number")
    return result


def _parse_int(value: str) -> int:
    return int(value, 10)


def _parse_n_totals(value: str) -> tuple[float, ...]:
    parts = [part.strip() for part in value.split(",")]
    if not parts or any(not part for part in parts):
        raise ValueError("expected a comma-separated list of counts")
    return tuple(_parse_float(part) for part in parts)


def _parse_methods(value: str) -> tuple[str, ...]:
    if not value:
        return ()
    parts = [part.strip() for part in value.split(",")]
    seen = []
    for part in parts:
        if part not in METHODS:
            raise ValueError(f"unknown method {part!r}; expected one of {METHODS}")
        if part in seen:
            raise ValueError(f"method {part!r} listed twice")
        seen.append(part)
    return tuple(seen)


def _parse_mode(value: str) -> str:
    if value not in MODES:
        raise ValueError(f"unknown mode {value!r}; expected one of {MODES}")
    return value


_FLOAT_KEYS = ("loss_db_min", "loss_db_max", "loss_db_step", "mu", "nu", "p_z",
               "frac_signal", "frac_decoy", "frac_vacuum", "p_dc", "e_d",
               "e_0", "p_ap", "f_ec", "epsilon", "epsilon_1", "epsilon_2",
               "epsilon_3", "u_alpha")

_PARSERS = {
    **{key: _parse_float for key in _FLOAT_KEYS},
    "n_total": _parse_n_totals,
    "methods": _parse_methods,
    "mode": _parse_mode,
    "seed": _parse_int,
    "trials": _parse_int,
}

# Keys whose value may legitimately be empty.
_EMPTY_OK = frozenset({"methods"})

# The tolerance to which a quantile must match its epsilon when both are
# given; matches the precision of conventional roundings such as 6.4.
_QUANTILE_TOL = 0.05


def parse_config(text: str, origin: str = "<config>") -> RunConfig:
    """Parse a ``key = value`` config into a validated :class:`RunConfig`.

    Raises
    ------
    ConfigError
        With a line-numbered message for syntax problems, unknown or
        duplicate keys and unparsable values, or a summary message for
        cross-key validation failures.
    """
    raw: dict[str, object] = {}
    lines_seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(
                f"{origin}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if key not in _PARSERS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(
                f"{origin}:{lineno}: duplicate key {key!r} "
                f"(first set on line {lines_seen[key]})")
        if not value and key not in _EMPTY_OK:
            raise ConfigError(f"{origin}:{lineno}: empty value for {key!r}")
        try:
            raw[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(
                f"{origin}:{lineno}: bad value for {key!r}: {exc}") from None
        lines_seen[key] = lineno
    return _finalize(raw, origin)


def _finalize(raw: dict[str, object], origin: str) -> RunConfig:
    epsilon = raw.pop("epsilon", None)
    u_alpha = raw.pop("u_alpha", None)
    if epsilon is None and u_alpha is None:
        epsilon, u_alpha = 1e-10, 6.4
    elif u_alpha is None:
        u_alpha = quantile_for_failure_prob(epsilon)
    elif epsilon is None:
        epsilon = failure_prob_for_quantile(u_alpha)
        if not 0.0 < epsilon < 1.0:
            raise ConfigError(f"{origin}: u_alpha = {u_alpha!r} implies a "
                              "degenerate failure probability")
    else:
        implied = quantile_for_failure_prob(epsilon)
        if abs(implied - u_alpha) > _QUANTILE_TOL:
            raise ConfigError(
                f"{origin}: inconsistent epsilon and u_alpha: epsilon = "
                f"{epsilon!r} implies u_alpha = {implied:.4f}, got {u_alpha!r}")
    for name in ("epsilon_1", "epsilon_2", "epsilon_3"):
        raw.setdefault(name, epsilon)
    if "n_total" in raw:
        raw["n_totals"] = raw.pop("n_total")

    cfg = RunConfig(epsilon=epsilon, u_alpha=u_alpha, **raw)

    if cfg.loss_db_step <= 0.0:
        raise ConfigError(f"{origin}: loss_db_step must be > 0, got {cfg.loss_db_step!r}")
    if cfg.loss_db_max < cfg.loss_db_min:
        raise ConfigError(f"{origin}: loss_db_max < loss_db_min")
    if cfg.seed < 0:
        raise ConfigError(f"{origin}: seed must be >= 0, got {cfg.seed!r}")
    if cfg.trials < 1:
        raise ConfigError(f"{origin}: trials must be >= 1, got {cfg.trials!r}")
    # Probe the domain validation of the component types so every parameter
    # error surfaces as a config error before a run starts.
    try:
        cfg.channel(cfg.loss_db_min)
        for n_total in cfg.n_totals:
            cfg.source(n_total)
        cfg.budget()
    except ParameterError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    return cfg


def apply_overrides(cfg: RunConfig, mode: str | None = None,
                    seed: int | None = None) -> RunConfig:
    """Apply CLI flag overrides on top of a parsed config."""
    if mode is not None:
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
        cfg = replace(cfg, mode=mode)
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"seed must be >= 0, got {seed!r}")
        cfg = replace(cfg, seed=seed)
    return cfg
