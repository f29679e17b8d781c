"""Finite-sample deviation radii for observed frequencies.

Five interchangeable estimators convert an observed frequency ``x_bar`` out
of ``m`` trials into an additive deviation radius:

- ``SEA``: Gaussian standard-error analysis with one-sided quantile
  ``u_alpha``.
- ``LLN``: a concentration bound on the full frequency vector whose radius
  grows with ``log(m + 1)``.
- ``HI``: Hoeffding's inequality for bounded variables.
- ``CB``: a six-case Chernoff construction whose radii scale with the
  observed count rather than the sample size.
- ``AI``: Azuma's inequality for bounded-difference martingales, valid for
  correlated (e.g. after-pulsing) detection records.

All radii are absolute (added to or subtracted from the frequency).  The
``bounded_observables`` entry point applies one estimator to the four
observables that feed the single-photon analysis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from scipy.special import erfc, erfcinv

from .channel import ModelOutputs, SourceConfig
from .errors import DegenerateSampleError, ParameterError

__all__ = [
    "METHODS",
    "FailureBudget",
    "SampleStat",
    "ObservableTallies",
    "BoundResult",
    "ChernoffDeltas",
    "quantile_for_failure_prob",
    "failure_prob_for_quantile",
    "xi_standard_error",
    "xi_lln",
    "xi_hoeffding",
    "xi_azuma",
    "chernoff_conditions",
    "chernoff_case_deltas",
    "chernoff_deltas",
    "deviation_radii",
    "observable_tallies",
    "bounded_observables",
    "sea_better_than_lln",
    "chernoff_better_than_hoeffding_threshold",
]

#: Estimator identifiers, in canonical listing order.
METHODS = ("SEA", "LLN", "HI", "CB", "AI")

# Condition constants for the Chernoff case split.  The first is
# (3 / (4 sqrt(2)))^2 = 9/32; the third is ((2e - 1) / 2)^2.
_CHERNOFF_COND1_RHS = 9.0 / 32.0
_CHERNOFF_COND3_RHS = ((2.0 * math.e - 1.0) / 2.0) ** 2


def quantile_for_failure_prob(epsilon: float) -> float:
    """One-sided Gaussian quantile ``u`` with upper-tail mass ``epsilon``.

    ``epsilon`` must lie in (0, 0.5]; ``epsilon = 0.5`` maps to 0.
    """
    if not 0.0 < epsilon <= 0.5:
        raise ParameterError(f"epsilon must lie in (0, 0.5], got {epsilon!r}")
    return float(math.sqrt(2.0) * erfcinv(2.0 * epsilon))


def failure_prob_for_quantile(u_alpha: float) -> float:
    """Upper-tail mass of the standard Gaussian beyond ``u_alpha`` (>= 0)."""
    if u_alpha < 0.0:
        raise ParameterError(f"u_alpha must be >= 0, got {u_alpha!r}")
    return float(0.5 * erfc(u_alpha / math.sqrt(2.0)))


@dataclass(frozen=True)
class FailureBudget:
    """Failure probabilities for the deviation estimates.

    ``epsilon`` is the per-observable failure probability used by the LLN,
    HI and AI radii.  ``epsilon_1``/``epsilon_2``/``epsilon_3`` drive the
    Chernoff construction (anchor, upper tail, lower tail); a CB result
    spends their sum per observable.  ``u_alpha`` is the Gaussian quantile
    used by SEA; construct via :meth:`linked` to keep it consistent with
    ``epsilon``.
    """

    epsilon: float = 1e-10
    epsilon_1: float = 1e-10
    epsilon_2: float = 1e-10
    epsilon_3: float = 1e-10
    u_alpha: float = 6.4

    def __post_init__(self) -> None:
        for name in ("epsilon", "epsilon_1", "epsilon_2", "epsilon_3"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1), got {value!r}")
        if self.u_alpha < 0.0:
            raise ParameterError(f"u_alpha must be >= 0, got {self.u_alpha!r}")

    @classmethod
    def linked(cls, epsilon: float, epsilon_1: float | None = None,
               epsilon_2: float | None = None,
               epsilon_3: float | None = None) -> "FailureBudget":
        """Budget with ``u_alpha`` derived from ``epsilon``; the Chernoff
        epsilons default to ``epsilon``."""
        return cls(epsilon=epsilon,
                   epsilon_1=epsilon if epsilon_1 is None else epsilon_1,
                   epsilon_2=epsilon if epsilon_2 is None else epsilon_2,
                   epsilon_3=epsilon if epsilon_3 is None else epsilon_3,
                   u_alpha=quantile_for_failure_prob(epsilon))

    @classmethod
    def from_quantile(cls, u_alpha: float) -> "FailureBudget":
        """Budget with every epsilon equal to the tail mass of ``u_alpha``."""
        eps = failure_prob_for_quantile(u_alpha)
        return cls(epsilon=eps, epsilon_1=eps, epsilon_2=eps, epsilon_3=eps,
                   u_alpha=u_alpha)

    @property
    def chernoff_total(self) -> float:
        """Failure probability spent per observable by a CB estimate."""
        return self.epsilon_1 + self.epsilon_2 + self.epsilon_3


@dataclass(frozen=True)
class SampleStat:
    """An observed frequency ``x_bar`` out of ``m`` trials.

    ``m`` is kept as a float so that expected counts from a sweep (which are
    generally non-integral) can be analysed directly.
    """

    m: float
    x_bar: float

    def __post_init__(self) -> None:
        if self.m < 1.0:
            raise ParameterError(f"m must be >= 1, got {self.m!r}")
        if not 0.0 <= self.x_bar <= 1.0:
            raise ParameterError(f"x_bar must lie in [0, 1], got {self.x_bar!r}")

    @property
    def count(self) -> float:
        """Observed event count ``m * x_bar``."""
        return self.m * self.x_bar


@dataclass(frozen=True)
class ObservableTallies:
    """Sample statistics for the four bounded observables: signal gain,
    decoy gain (key basis), vacuum yield and vacuum-component gain."""

    q_mu: SampleStat
    q_nu: SampleStat
    y0: SampleStat
    q0: SampleStat


@dataclass(frozen=True)
class BoundResult:
    """Deviation radii and the resulting one-sided bounds.

    ``xi_*`` are the absolute radii actually applied: the upper radius for
    the signal gain and lower radii for the other three observables.  Lower
    bounds are floored at zero; the upper bound is capped at one.
    ``chernoff_cases`` records the Chernoff case fired for each observable
    (zeros for the other methods); ``chernoff_case`` is the signal-gain
    entry.  ``failure_prob_each`` is the failure probability spent per
    observable and ``failure_prob_total`` the sum over the four.
    """

    method: str
    xi_q_mu: float
    xi_q_nu: float
    xi_y0: float
    xi_q0: float
    q_mu_upper: float
    q_nu_lower: float
    y0_lower: float
    q0_lower: float
    chernoff_cases: tuple[int, int, int, int]
    failure_prob_each: float
    failure_prob_total: float

    @property
    def chernoff_case(self) -> int:
        return self.chernoff_cases[0]


def xi_standard_error(stat: SampleStat, u_alpha: float) -> float:
    """Relative Gaussian standard-error radius ``u_alpha / sqrt(m * x_bar)``.

    Multiplying by ``x_bar`` gives the absolute radius
    ``u_alpha * sqrt(x_bar / m)``.

    Raises
    ------
    DegenerateSampleError
        If the observed count is zero (the radius is undefined).
    """
    if u_alpha < 0.0:
        raise ParameterError(f"u_alpha must be >= 0, got {u_alpha!r}")
    if stat.count <= 0.0:
        raise DegenerateSampleError(
            "standard-error radius undefined for zero observed counts")
    return u_alpha / math.sqrt(stat.count)


def xi_lln(m: float, epsilon: float) -> float:
    """Frequency-vector concentration radius
    ``sqrt(2 * (ln(1/epsilon) + 2 * ln(m + 1)) / m)``.

    ``epsilon`` may reach 1, where only the ``ln(m + 1)`` term remains.
    """
    if m < 1.0:
        raise ParameterError(f"m must be >= 1, got {m!r}")
    if not 0.0 < epsilon <= 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return math.sqrt(2.0 * (math.log(1.0 / epsilon) + 2.0 * math.log(m + 1.0)) / m)


def xi_hoeffding(m: float, epsilon: float) -> float:
    """Hoeffding radius ``sqrt(ln(1/epsilon) / (2m))``.

    ``epsilon`` may reach 1, where the radius vanishes.
    """
    if m < 1.0:
        raise ParameterError(f"m must be >= 1, got {m!r}")
    if not 0.0 < epsilon <= 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return math.sqrt(math.log(1.0 / epsilon) / (2.0 * m))


def xi_azuma(n: float, epsilon: float) -> float:
    """Azuma martingale radius ``sqrt((2/n) * ln(2/epsilon))``.

    Valid for correlated sequences with bounded increments; ``epsilon`` may
    reach 2, where the radius vanishes.
    """
    if n < 1.0:
        raise ParameterError(f"n must be >= 1, got {n!r}")
    if not 0.0 < epsilon <= 2.0:
        raise ParameterError(f"epsilon must lie in (0, 2], got {epsilon!r}")
    return math.sqrt(2.0 / n * math.log(2.0 / epsilon))


def chernoff_conditions(m: float, a_lower: float, epsilon_2: float,
                        epsilon_3: float) -> tuple[bool, bool, bool]:
    """The three threshold conditions of the Chernoff case split.

    ``a_lower`` is the anchored lower estimate of the true mean.  The checks
    are performed in the log domain so that extreme epsilons cannot
    overflow:

    - condition 1: ``ln(2/epsilon_2) / (m * a_lower) <= 9/32``
    - condition 2: ``ln(1/epsilon_3) / (m * a_lower) <= 1/3``
    - condition 3: ``ln(1/epsilon_3) / (m * a_lower) <= ((2e-1)/2)^2``

    Condition 2 implies condition 3.

    Raises
    ------
    ParameterError
        If ``m * a_lower <= 0`` (the conditions are undefined; callers must
        fall back to the Hoeffding-style case 6).
    """
    if m < 1.0:
        raise ParameterError(f"m must be >= 1, got {m!r}")
    scaled = m * a_lower
    if scaled <= 0.0:
        raise ParameterError(
            f"conditions undefined for m * a_lower = {scaled!r} <= 0")
    for name, value in (("epsilon_2", epsilon_2), ("epsilon_3", epsilon_3)):
        if not 0.0 < value <= 1.0:
            raise ParameterError(f"{name} must lie in (0, 1], got {value!r}")
    c1 = math.log(2.0 / epsilon_2) / scaled <= _CHERNOFF_COND1_RHS
    ratio3 = math.log(1.0 / epsilon_3) / scaled
    c2 = ratio3 <= 1.0 / 3.0
    c3 = ratio3 <= _CHERNOFF_COND3_RHS
    return c1, c2, c3


def _case_from_conditions(c1: bool, c2: bool, c3: bool) -> int:
    # Exhaustive over the six combinations reachable when c2 implies c3.
    if c1 and c2:
        return 1
    if c1 and c3:
        return 2
    if c1:
        return 3
    if c2:
        return 4
    if c3:
        return 5
    return 6


class ChernoffDeltas(NamedTuple):
    """Chernoff radii: upper deviation, lower deviation and the case id."""

    delta_upper: float
    delta_lower: float
    case: int


def _count_radius(count: float, m: float, log_inv_prob: float) -> float:
    # sqrt((2 * count / m^2) * ln(1/prob)) with the log supplied directly.
    return math.sqrt(2.0 * count / (m * m) * log_inv_prob)


def chernoff_case_deltas(case: int, stat: SampleStat,
                         budget: FailureBudget) -> tuple[float, float]:
    """Raw per-case Chernoff radii (upper, lower).

    Cases 1-3 share the count-scaled upper radius with tail probability
    ``epsilon_2^4 / 16``; cases 1/4 and 2/5 use lower tails
    ``epsilon_3^(3/2)`` and ``epsilon_3^2``.  Every slot that degrades to the
    sample-size-scaled form is routed through :func:`xi_hoeffding` at
    ``epsilon`` so that case 6 reproduces the Hoeffding radius exactly.
    """
    if case not in (1, 2, 3, 4, 5, 6):
        raise ParameterError(f"case must be 1..6, got {case!r}")
    count, m = stat.count, stat.m
    # ln(16 / epsilon_2^4) = 4 * ln(2 / epsilon_2)
    upper_log = 4.0 * math.log(2.0 / budget.epsilon_2)
    lower_log_32 = 1.5 * math.log(1.0 / budget.epsilon_3)
    lower_log_sq = 2.0 * math.log(1.0 / budget.epsilon_3)
    hoeffding = xi_hoeffding(m, budget.epsilon)
    if case == 1:
        return _count_radius(count, m, upper_log), _count_radius(count, m, lower_log_32)
    if case == 2:
        return _count_radius(count, m, upper_log), _count_radius(count, m, lower_log_sq)
    if case == 3:
        return _count_radius(count, m, upper_log), hoeffding
    if case == 4:
        return hoeffding, _count_radius(count, m, lower_log_32)
    if case == 5:
        return hoeffding, _count_radius(count, m, lower_log_sq)
    return hoeffding, hoeffding


def chernoff_deltas(stat: SampleStat, budget: FailureBudget) -> ChernoffDeltas:
    """Select the Chernoff case for a sample and return its radii.

    The anchor ``a_lower = x_bar - sqrt(ln(1/epsilon_1) / (2m))`` decides
    whether the count-scaled machinery applies at all; a non-positive anchor
    falls back to case 6 (both radii equal to the Hoeffding radius).
    """
    a_lower = stat.x_bar - xi_hoeffding(stat.m, budget.epsilon_1)
    if a_lower <= 0.0:
        case = 6
    else:
        c1, c2, c3 = chernoff_conditions(stat.m, a_lower,
                                         budget.epsilon_2, budget.epsilon_3)
        case = _case_from_conditions(c1, c2, c3)
    upper, lower = chernoff_case_deltas(case, stat, budget)
    return ChernoffDeltas(upper, lower, case)


def deviation_radii(method: str, stat: SampleStat,
                    budget: FailureBudget) -> tuple[float, float, int]:
    """Absolute (upper, lower) deviation radii for one observable plus the
    Chernoff case id (0 for the other methods).

    For CB the lower radius is the minimum of the anchor radius
    ``sqrt(ln(1/epsilon_1) / (2m))`` and the case's lower delta; the anchor
    already guarantees the true mean with probability ``1 - epsilon_1``.
    """
    if method == "SEA":
        radius = stat.x_bar * xi_standard_error(stat, budget.u_alpha)
        return radius, radius, 0
    if method == "LLN":
        radius = xi_lln(stat.m, budget.epsilon)
        return radius, radius, 0
    if method == "HI":
        radius = xi_hoeffding(stat.m, budget.epsilon)
        return radius, radius, 0
    if method == "AI":
        radius = xi_azuma(stat.m, budget.epsilon)
        return radius, radius, 0
    if method == "CB":
        upper, lower, case = chernoff_deltas(stat, budget)
        anchored = min(xi_hoeffding(stat.m, budget.epsilon_1), lower)
        return upper, anchored, case
    raise ParameterError(f"unknown method {method!r}; expected one of {METHODS}")


def observable_tallies(outputs: ModelOutputs, source: SourceConfig) -> ObservableTallies:
    """Attach sample sizes to the model's expected frequencies.

    Signal gain is sampled ``n_mu * p_z`` times (key-basis signal pulses),
    decoy gain ``n_nu_z * p_z`` times (key-basis preparation and detection),
    and the two vacuum observables ``n_vacuum`` times each.
    """
    return ObservableTallies(
        q_mu=SampleStat(source.n_mu * source.p_z, outputs.q_mu),
        q_nu=SampleStat(source.n_nu_z * source.p_z, outputs.q_nu),
        y0=SampleStat(source.n_vacuum, outputs.y0_prime),
        q0=SampleStat(source.n_vacuum, outputs.q0),
    )


def bounded_observables(method: str, tallies: ObservableTallies,
                        budget: FailureBudget, *,
                        no_fluctuation: bool = False) -> BoundResult:
    """Apply one estimator to the four observables.

    Returns the upper bound on the signal gain and lower bounds on the decoy
    gain, vacuum yield and vacuum-component gain.  With ``no_fluctuation``
    every radius is forced to zero (the asymptotic limit), which makes all
    methods coincide.
    """
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}; expected one of {METHODS}")
    stats = (tallies.q_mu, tallies.q_nu, tallies.y0, tallies.q0)
    if no_fluctuation:
        radii = [(0.0, 0.0, 0)] * 4
        each = 0.0
    else:
        radii = [deviation_radii(method, stat, budget) for stat in stats]
        each = budget.chernoff_total if method == "CB" else budget.epsilon
    cases = tuple(case for _, _, case in radii)
    return BoundResult(
        method=method,
        xi_q_mu=radii[0][0],
        xi_q_nu=radii[1][1],
        xi_y0=radii[2][1],
        xi_q0=radii[3][1],
        q_mu_upper=min(1.0, tallies.q_mu.x_bar + radii[0][0]),
        q_nu_lower=max(0.0, tallies.q_nu.x_bar - radii[1][1]),
        y0_lower=max(0.0, tallies.y0.x_bar - radii[2][1]),
        q0_lower=max(0.0, tallies.q0.x_bar - radii[3][1]),
        chernoff_cases=cases,
        failure_prob_each=each,
        failure_prob_total=4.0 * each,
    )


def sea_better_than_lln(q_mu: float, m: float) -> bool:
    """Sufficient condition for the SEA radius to beat the LLN radius at a
    failure probability of 1e-10: ``6.4 * sqrt(q_mu) < sqrt(46.06 +
    4 * ln(m + 1))``.

    The constants are the conventional roundings of the quantile for 1e-10
    and of ``2 * ln(1e10)``.
    """
    if not 0.0 < q_mu <= 1.0:
        raise ParameterError(f"q_mu must lie in (0, 1], got {q_mu!r}")
    if m < 1.0:
        raise ParameterError(f"m must be >= 1, got {m!r}")
    return 6.4 * math.sqrt(q_mu) < math.sqrt(46.06 + 4.0 * math.log(m + 1.0))


def chernoff_better_than_hoeffding_threshold(case: int) -> float:
    """Frequency threshold below which the CB radii beat the Hoeffding
    radius for the given case (1.0 for case 6, where they are equal)."""
    thresholds = {1: 0.06, 2: 0.06, 3: 0.06, 4: 0.162, 5: 0.122, 6: 1.0}
    if case not in thresholds:
        raise ParameterError(f"case must be 1..6, got {case!r}")
    return thresholds[case]
