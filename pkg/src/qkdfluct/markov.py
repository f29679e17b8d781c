"""Monte Carlo oracle for the correlated detection record.

After-pulsing makes successive detection slots dependent: a click raises the
click probability of the next slot.  This module simulates that two-state
Markov chain exactly and provides the empirical checks used to validate the
fluctuation estimators: interval coverage rates and the conditional-
expectation (martingale) property of the running mean.

The chain is generated run-length by run-length (alternating geometric
sojourn times), which reproduces the step-by-step law exactly while keeping
long-sample coverage studies fast.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateSampleError, ParameterError
from .fluctuation import METHODS, FailureBudget, SampleStat, deviation_radii

__all__ = [
    "MarkovClickModel",
    "MartingaleCheck",
    "TrialReport",
    "simulate_chain",
    "simulate_click_frequency",
    "martingale_verify",
    "coverage_test",
    "trial_report",
]


@dataclass(frozen=True)
class MarkovClickModel:
    """Two-state click chain with a prescribed stationary click rate.

    ``base_click_prob`` is the physical click probability without
    after-pulsing; the stationary mean of the chain is
    ``base_click_prob * (1 + afterpulse_prob)``, matching the raw detection
    rate of the channel model.  The transition probabilities are solved so
    that the chain is stationary at exactly that rate: a click adds
    ``afterpulse_prob`` worth of extra click probability to the next slot.

    With ``cold_start`` the chain starts in the no-click state instead of a
    stationary draw.
    """

    base_click_prob: float
    afterpulse_prob: float = 0.0
    seed: int = 0
    cold_start: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.base_click_prob <= 1.0:
            raise ParameterError(
                f"base_click_prob must lie in [0, 1], got {self.base_click_prob!r}")
        if not 0.0 <= self.afterpulse_prob < 1.0:
            raise ParameterError(
                f"afterpulse_prob must lie in [0, 1), got {self.afterpulse_prob!r}")
        if self.stationary_mean > 1.0:
            raise ParameterError(
                "base_click_prob * (1 + afterpulse_prob) = "
                f"{self.stationary_mean!r} exceeds 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ParameterError(f"seed must be a non-negative int, got {self.seed!r}")

    @property
    def stationary_mean(self) -> float:
        """Long-run click frequency (raw detection rate)."""
        return self.base_click_prob * (1.0 + self.afterpulse_prob)

    @property
    def p_click_after_noclick(self) -> float:
        """P(click | previous slot silent)."""
        d = self.stationary_mean
        return d * (1.0 - self.afterpulse_prob) / (1.0 - d * self.afterpulse_prob)

    @property
    def p_click_after_click(self) -> float:
        """P(click | previous slot clicked)."""
        q = self.p_click_after_noclick
        return q + self.afterpulse_prob * (1.0 - q)


def _alternating_runs(model: MarkovClickModel, n: int,
                      rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """Starting state and alternating sojourn lengths covering >= n slots.

    Consumes the generator in a fixed order (initial state draw, then
    geometric batches), so a given (model, seed) always yields the same
    sequence.
    """
    p0 = model.p_click_after_noclick
    p1 = model.p_click_after_click
    if model.cold_start:
        first = 0
    else:
        first = int(rng.random() < model.stationary_mean)

    if p0 == 0.0 or p1 == 1.0:
        # An absorbing state exists; at most one transition ever happens.
        lengths = []
        state, remaining = first, n
        while remaining > 0:
            if state == 0:
                if p0 == 0.0:
                    lengths.append(remaining)
                    break
                run = int(rng.geometric(p0))
            else:
                if p1 == 1.0:
                    lengths.append(remaining)
                    break
                run = int(rng.geometric(1.0 - p1))
            lengths.append(run)
            remaining -= run
            state ^= 1
        return first, np.asarray(lengths, dtype=np.int64)

    parts = []
    total = 0
    mean_cycle = 1.0 / p0 + 1.0 / (1.0 - p1)
    while total < n:
        k = max(16, int((n - total) / mean_cycle * 1.1) + 8)
        silent = rng.geometric(p0, size=k).astype(np.int64, copy=False)
        clicking = rng.geometric(1.0 - p1, size=k).astype(np.int64, copy=False)
        batch = np.empty(2 * k, dtype=np.int64)
        if first == 0:
            batch[0::2] = silent
            batch[1::2] = clicking
        else:
            batch[0::2] = clicking
            batch[1::2] = silent
        parts.append(batch)
        total += int(batch.sum())
    return first, np.concatenate(parts)


def _checked_length(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ParameterError(f"n must be an int >= 1, got {n!r}")
    return int(n)


def simulate_chain(model: MarkovClickModel, n: int,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Simulate ``n`` detection slots; returns a uint8 click array.

    Without an explicit generator, a fresh one is derived from
    ``model.seed``, so identical (model, n) arguments reproduce the same
    sequence bit for bit.
    """
    n = _checked_length(n)
    if rng is None:
        rng = np.random.default_rng(model.seed)
    first, lengths = _alternating_runs(model, n, rng)
    cum = np.cumsum(lengths)
    k = int(np.searchsorted(cum, n, side="left")) + 1
    lengths = lengths[:k]
    states = np.empty(k, dtype=np.uint8)
    states[0::2] = first
    states[1::2] = 1 - first
    return np.repeat(states, lengths)[:n]


def simulate_click_frequency(model: MarkovClickModel, n: int,
                             rng: np.random.Generator | None = None) -> float:
    """Click frequency of a simulated record, without materializing it.

    Draws the generator in exactly the same order as
    :func:`simulate_chain`, so the result equals ``simulate_chain(...).mean()``
    for the same generator state.
    """
    n = _checked_length(n)
    if rng is None:
        rng = np.random.default_rng(model.seed)
    first, lengths = _alternating_runs(model, n, rng)
    cum = np.cumsum(lengths)
    k = int(np.searchsorted(cum, n, side="left"))
    idx = np.arange(k)
    one_mask = (idx % 2 == 0) if first == 1 else (idx % 2 == 1)
    ones = int(lengths[:k][one_mask].sum())
    consumed = int(cum[k - 1]) if k > 0 else 0
    state_k = first if k % 2 == 0 else 1 - first
    if state_k == 1:
        ones += n - consumed
    return ones / n


class MartingaleCheck(NamedTuple):
    """Residuals of the one-step conditional expectation of the running
    mean, evaluated at a set of prefix lengths."""

    prefix_lengths: np.ndarray
    residuals: np.ndarray

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))


def martingale_verify(model: MarkovClickModel, n: int,
                      prefix_checks: int = 100,
                      transition: str = "empirical") -> MartingaleCheck:
    """Check E[M_(k+1) | first k slots] = M_k for the running mean M_k.

    With ``transition="empirical"`` the conditional click probability is the
    plug-in estimate S_k / k, under which the identity holds exactly; the
    residuals expose nothing but floating-point rounding and must vanish to
    machine precision.  With ``transition="model"`` the true state-dependent
    transition probability is used and the residual is |p_state - M_k| /
    (k + 1), which decays like 1/k.

    Prefix lengths are spread evenly over [1, n]; a zero-length prefix is
    never checked.
    """
    n = _checked_length(n)
    if prefix_checks < 1:
        raise ParameterError(f"prefix_checks must be >= 1, got {prefix_checks!r}")
    if transition not in ("empirical", "model"):
        raise ParameterError(
            f"transition must be 'empirical' or 'model', got {transition!r}")
    bits = simulate_chain(model, n)
    sums = np.cumsum(bits, dtype=np.int64)
    ks = np.unique(np.linspace(1, n, prefix_checks).astype(np.int64))
    residuals = np.empty(ks.size)
    for i, k in enumerate(ks):
        s = float(sums[k - 1])
        mean_k = s / k
        if transition == "empirical":
            step = mean_k
        else:
            step = (model.p_click_after_click if bits[k - 1]
                    else model.p_click_after_noclick)
        residuals[i] = (s + step) / (k + 1.0) - mean_k
    return MartingaleCheck(ks, residuals)


def _interval(method: str, n: int, x_bar: float,
              budget: FailureBudget) -> tuple[float, float]:
    stat = SampleStat(float(n), x_bar)
    try:
        upper, lower, _ = deviation_radii(method, stat, budget)
    except DegenerateSampleError:
        # SEA with zero counts carries no radius; the interval is the point.
        return x_bar, x_bar
    return max(0.0, x_bar - lower), x_bar + upper


def coverage_test(model: MarkovClickModel, n: int, trials: int,
                  epsilon: float, method: str) -> float:
    """Fraction of trials whose deviation interval misses the true mean.

    Each trial simulates ``n`` slots with an independent generator derived
    from ``(model.seed, trial_index)`` and builds the two-sided interval
    from the method's radii at failure probability ``epsilon`` (for CB the
    three internal epsilons are ``epsilon / 3`` each so the spent budget is
    ``epsilon``).  For a sound estimator the returned rate stays at or below
    ``epsilon`` up to sampling error.
    """
    n = _checked_length(n)
    if trials < 100:
        raise ParameterError(f"trials must be >= 100, got {trials!r}")
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}; expected one of {METHODS}")
    third = epsilon / 3.0
    budget = FailureBudget.linked(epsilon, epsilon_1=third, epsilon_2=third,
                                  epsilon_3=third)
    truth = model.stationary_mean
    failures = 0
    for trial in range(trials):
        rng = np.random.default_rng((model.seed, trial))
        x_bar = simulate_click_frequency(model, n, rng)
        lo, hi = _interval(method, n, x_bar, budget)
        if not lo <= truth <= hi:
            failures += 1
    return failures / trials


@dataclass(frozen=True)
class TrialReport:
    """Per-trial coverage record: the observed frequency, each method's
    interval and whether it covered the true mean, plus optional
    model-transition martingale residuals for the same record."""

    trial_index: int
    n: int
    x_bar: float
    intervals: dict[str, tuple[float, float]]
    covered: dict[str, bool]
    martingale_residuals: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.martingale_residuals is not None:
            # One residual per checked prefix; emptiness would mean the
            # check silently did not run.
            if len(self.martingale_residuals) < 1:
                raise ParameterError("martingale_residuals must not be empty")


def trial_report(model: MarkovClickModel, n: int, trial_index: int,
                 epsilon: float, methods: tuple[str, ...] = METHODS,
                 prefix_checks: int = 0) -> TrialReport:
    """Full record of one coverage trial (slow path; materializes the bits).

    Uses the same per-trial generator as :func:`coverage_test`, so the
    observed frequency matches the fast path exactly.
    """
    n = _checked_length(n)
    if trial_index < 0:
        raise ParameterError(f"trial_index must be >= 0, got {trial_index!r}")
    rng = np.random.default_rng((model.seed, trial_index))
    bits = simulate_chain(model, n, rng)
    x_bar = float(bits.sum()) / n
    third = epsilon / 3.0
    budget = FailureBudget.linked(epsilon, epsilon_1=third, epsilon_2=third,
                                  epsilon_3=third)
    truth = model.stationary_mean
    intervals = {}
    covered = {}
    for method in methods:
        lo, hi = _interval(method, n, x_bar, budget)
        intervals[method] = (lo, hi)
        covered[method] = lo <= truth <= hi
    residuals = None
    if prefix_checks > 0:
        sums = np.cumsum(bits, dtype=np.int64)
        ks = np.unique(np.linspace(1, n, prefix_checks).astype(np.int64))
        residuals = np.empty(ks.size)
        for i, k in enumerate(ks):
            s = float(sums[k - 1])
            step = (model.p_click_after_click if bits[k - 1]
                    else model.p_click_after_noclick)
            residuals[i] = (s + step) / (k + 1.0) - s / k
    return TrialReport(trial_index=trial_index, n=n, x_bar=x_bar,
                       intervals=intervals, covered=covered,
                       martingale_residuals=residuals)
