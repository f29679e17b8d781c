"""Finite-sample secure key rate for the vacuum + weak decoy protocol.

Combines the detection model with one fluctuation estimator: the bounded
observables yield a lower bound on the single-photon yield and an upper
bound on the single-photon error rate, which enter the standard rate formula
together with the error-correction leakage of the raw sifted key.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .channel import ChannelParams, ModelOutputs, SourceConfig, model_outputs
from .errors import EstimationFailure, ParameterError
from .fluctuation import (BoundResult, FailureBudget, bounded_observables,
                          deviation_radii, observable_tallies)

__all__ = [
    "KeyRatePoint",
    "SearchBox",
    "DEFAULT_SEARCH_BOX",
    "binary_entropy",
    "y1_lower",
    "e1_upper",
    "q1z_from_y1",
    "key_rate",
    "key_rate_point",
    "optimize_parameters",
]


def binary_entropy(x: float) -> float:
    """Binary entropy in bits; 0 at both endpoints of [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"binary entropy argument must lie in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _check_intensities(mu: float, nu: float) -> None:
    if not (mu > nu > 0.0):
        raise ParameterError(
            f"intensities must satisfy mu > nu > 0, got mu={mu!r}, nu={nu!r}")


def _y1_raw(q_nu_lower: float, q_mu_upper: float, y0_lower: float,
            mu: float, nu: float) -> float:
    scale = mu / (mu * nu - nu * nu)
    return scale * (q_nu_lower * math.exp(nu)
                    - q_mu_upper * math.exp(mu) * nu * nu / (mu * mu)
                    - (mu * mu - nu * nu) / (mu * mu) * y0_lower)


def y1_lower(q_nu_lower: float, q_mu_upper: float, y0_lower: float,
             mu: float, nu: float) -> float:
    """Lower bound on the single-photon yield from the decoy linear program,
    clipped to [0, 1]."""
    _check_intensities(mu, nu)
    return min(1.0, max(0.0, _y1_raw(q_nu_lower, q_mu_upper, y0_lower, mu, nu)))


def _e1_raw(e_nu: float, q_nu_lower: float, y0_lower: float, y1_low: float,
            nu: float, background_error: float) -> float:
    return ((e_nu * q_nu_lower * math.exp(nu) - background_error * y0_lower)
            / (y1_low * nu))


def e1_upper(e_nu: float, q_nu_lower: float, y0_lower: float, y1_low: float,
             nu: float, background_error: float = 0.5) -> float:
    """Upper bound on the single-photon error rate, clipped to [0, 0.5].

    Raises
    ------
    EstimationFailure
        If ``y1_low`` is not positive; the caller must report a zero key
        rate for the affected point instead.
    """
    if nu <= 0.0:
        raise ParameterError(f"nu must be > 0, got {nu!r}")
    if y1_low <= 0.0:
        raise EstimationFailure(
            "single-photon yield bound is zero; error rate undefined")
    raw = _e1_raw(e_nu, q_nu_lower, y0_lower, y1_low, nu, background_error)
    return min(0.5, max(0.0, raw))


def q1z_from_y1(y1: float, mu: float) -> float:
    """Single-photon gain of the signal pulses: ``y1 * mu * exp(-mu)``."""
    if not 0.0 <= y1 <= 1.0:
        raise ParameterError(f"y1 must lie in [0, 1], got {y1!r}")
    if mu <= 0.0:
        raise ParameterError(f"mu must be > 0, got {mu!r}")
    return y1 * mu * math.exp(-mu)


def _rate_terms(sifting: float, q0_lower: float, q1z: float, e1_pz: float,
                q_mu: float, e_mu: float, f_ec: float) -> tuple[float, float]:
    leak = f_ec * q_mu * binary_entropy(e_mu)
    raw = sifting * (q0_lower + q1z * (1.0 - binary_entropy(e1_pz)) - leak)
    return raw, leak


def key_rate(sifting: float, q0_lower: float, q1z: float, e1_pz: float,
             q_mu: float, e_mu: float, f_ec: float) -> float:
    """Secure bits per emitted pulse, floored at zero.

    ``sifting`` is the fraction of the pulse budget contributing sifted
    signal bits; ``q_mu``/``e_mu`` feed the error-correction leakage.
    """
    if sifting <= 0.0:
        raise ParameterError(f"sifting must be > 0, got {sifting!r}")
    raw, _ = _rate_terms(sifting, q0_lower, q1z, e1_pz, q_mu, e_mu, f_ec)
    return max(0.0, raw)


@dataclass(frozen=True)
class KeyRatePoint:
    """One evaluated sweep point with its diagnostics.

    ``rate`` is the clamped key rate, ``raw_rate`` the unclamped value.  The
    clamp flags record whether the single-photon bounds or the rate had to
    be clipped into range; ``estimation_failed`` marks points where the
    yield bound collapsed to zero and the rate was forced to zero.
    """

    loss_db: float
    method: str
    y1_lower: float
    e1_upper: float
    q1z: float
    q0_lower: float
    leak_ec: float
    rate: float
    raw_rate: float
    y1_clamped: bool
    e1_clamped: bool
    rate_clamped: bool
    estimation_failed: bool
    outputs: ModelOutputs
    bounds: BoundResult

    @property
    def chernoff_case(self) -> int:
        return self.bounds.chernoff_case


def key_rate_point(channel: ChannelParams, source: SourceConfig,
                   budget: FailureBudget, method: str, *,
                   theta: float = 0.0,
                   no_fluctuation: bool = False,
                   conservative_y0: bool = False,
                   leak_uses_raw_rate: bool = False) -> KeyRatePoint:
    """Evaluate the full pipeline for one channel setting and estimator.

    ``theta`` is an additive allowance on the phase-error rate relative to
    the bounded bit-error rate (zero by default).  ``conservative_y0``
    replaces the vacuum-yield lower bound with its upper bound inside the
    single-photon yield estimate, which makes that estimate strictly more
    pessimistic.  ``leak_uses_raw_rate`` charges error correction on the raw
    detection rate (after-pulses included) instead of the cleaned gain.
    """
    _check_intensities(source.mu, source.nu)
    if not 0.0 <= theta <= 0.5:
        raise ParameterError(f"theta must lie in [0, 0.5], got {theta!r}")
    outputs = model_outputs(channel, source)
    tallies = observable_tallies(outputs, source)
    bounds = bounded_observables(method, tallies, budget,
                                 no_fluctuation=no_fluctuation)

    y0_for_y1 = bounds.y0_lower
    if conservative_y0:
        if no_fluctuation:
            y0_for_y1 = outputs.y0_prime
        else:
            upper, _, _ = deviation_radii(method, tallies.y0, budget)
            y0_for_y1 = min(1.0, outputs.y0_prime + upper)

    raw_y1 = _y1_raw(bounds.q_nu_lower, bounds.q_mu_upper, y0_for_y1,
                     source.mu, source.nu)
    y1 = min(1.0, max(0.0, raw_y1))
    y1_clamped = y1 != raw_y1

    if y1 <= 0.0:
        # Yield bound collapsed: no single-photon contribution survives.
        return KeyRatePoint(
            loss_db=channel.loss_db, method=method, y1_lower=0.0,
            e1_upper=0.5, q1z=0.0, q0_lower=bounds.q0_lower,
            leak_ec=source.f_ec * outputs.q_mu * binary_entropy(outputs.e_mu),
            rate=0.0, raw_rate=0.0, y1_clamped=y1_clamped, e1_clamped=False,
            rate_clamped=False, estimation_failed=True,
            outputs=outputs, bounds=bounds)

    raw_e1 = _e1_raw(outputs.e_nu, bounds.q_nu_lower, bounds.y0_lower, y1,
                     source.nu, channel.background_error)
    e1 = min(0.5, max(0.0, raw_e1))
    e1_clamped = e1 != raw_e1
    e1_pz = min(0.5, e1 + theta)

    q1z = q1z_from_y1(y1, source.mu)
    q_for_leak = outputs.d_mu if leak_uses_raw_rate else outputs.q_mu
    raw_rate, leak = _rate_terms(source.sifting_factor, bounds.q0_lower, q1z,
                                 e1_pz, q_for_leak, outputs.e_mu, source.f_ec)
    rate = max(0.0, raw_rate)
    return KeyRatePoint(
        loss_db=channel.loss_db, method=method, y1_lower=y1, e1_upper=e1,
        q1z=q1z, q0_lower=bounds.q0_lower, leak_ec=leak, rate=rate,
        raw_rate=raw_rate, y1_clamped=y1_clamped, e1_clamped=e1_clamped,
        rate_clamped=rate != raw_rate, estimation_failed=False,
        outputs=outputs, bounds=bounds)


@dataclass(frozen=True)
class SearchBox:
    """Per-axis (low, high) ranges for the source-parameter search."""

    mu: tuple[float, float] = (0.1, 1.0)
    nu: tuple[float, float] = (0.01, 0.25)
    p_z: tuple[float, float] = (0.2, 0.9)
    frac_signal: tuple[float, float] = (0.2, 0.8)
    frac_decoy: tuple[float, float] = (0.1, 0.5)

    def __post_init__(self) -> None:
        for name in ("mu", "nu", "p_z", "frac_signal", "frac_decoy"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ParameterError(f"search box {name} has low > high: {lo!r} > {hi!r}")
        if self.nu[0] >= self.mu[1]:
            raise ParameterError("search box is infeasible: nu cannot fall below mu")
        if self.frac_signal[0] + self.frac_decoy[0] > 1.0:
            raise ParameterError(
                "search box is infeasible: minimal pulse fractions exceed 1")


DEFAULT_SEARCH_BOX = SearchBox()

_AXES = ("mu", "nu", "p_z", "frac_signal", "frac_decoy")


def _build_candidate(base: SourceConfig, vals: dict[str, float]) -> SourceConfig | None:
    frac_vacuum = 1.0 - vals["frac_signal"] - vals["frac_decoy"]
    if frac_vacuum < 0.0:
        return None
    try:
        return replace(base, mu=vals["mu"], nu=vals["nu"], p_z=vals["p_z"],
                       frac_signal=vals["frac_signal"],
                       frac_decoy=vals["frac_decoy"], frac_vacuum=frac_vacuum)
    except ParameterError:
        return None


def _feasible_start(box: SearchBox) -> dict[str, float]:
    vals = {name: 0.5 * (getattr(box, name)[0] + getattr(box, name)[1])
            for name in _AXES}
    # Repair the centre deterministically if it violates a joint constraint:
    # first pull nu down within its range, then push mu to its upper edge.
    if vals["nu"] >= vals["mu"]:
        lo, hi = box.nu
        vals["nu"] = min(max(lo, 0.5 * vals["mu"]), hi)
    if vals["nu"] >= vals["mu"]:
        vals["mu"] = box.mu[1]
        vals["nu"] = min(max(box.nu[0], 0.5 * vals["mu"]), box.nu[1])
    excess = vals["frac_signal"] + vals["frac_decoy"] - 1.0
    if excess > 0.0:
        vals["frac_decoy"] = max(box.frac_decoy[0], vals["frac_decoy"] - excess)
    if vals["frac_signal"] + vals["frac_decoy"] > 1.0:
        vals["frac_signal"] = max(box.frac_signal[0],
                                  1.0 - vals["frac_decoy"])
    if (vals["nu"] >= vals["mu"]
            or vals["frac_signal"] + vals["frac_decoy"] > 1.0):
        raise ParameterError("search box contains no feasible starting point")
    return vals


def optimize_parameters(channel: ChannelParams, base: SourceConfig,
                        budget: FailureBudget, method: str,
                        box: SearchBox = DEFAULT_SEARCH_BOX, *,
                        levels: int = 2, points: int = 20
                        ) -> tuple[SourceConfig, KeyRatePoint]:
    """Coordinate descent over source parameters maximizing the key rate.

    Scans each axis of ``box`` on an even grid of ``points`` values, keeping
    the best candidate, then shrinks the box around the incumbent and
    repeats (``levels`` rounds in total).  ``n_total`` and ``f_ec`` are
    taken from ``base``.  Fully deterministic; grid ties keep the earlier
    candidate.  The returned rate is never below the rate at the (repaired)
    box centre.
    """
    if levels < 1:
        raise ParameterError(f"levels must be >= 1, got {levels!r}")
    if points < 2:
        raise ParameterError(f"points must be >= 2, got {points!r}")

    def evaluate(vals: dict[str, float]) -> float:
        cand = _build_candidate(base, vals)
        if cand is None:
            return -math.inf
        try:
            return key_rate_point(channel, cand, budget, method).rate
        except ParameterError:
            # Boundary candidates (for example a zero vacuum fraction) pass
            # static validation but cannot run the protocol; skip them.
            return -math.inf

    vals = _feasible_start(box)
    best_rate = evaluate(vals)

    spans = {name: getattr(box, name)[1] - getattr(box, name)[0] for name in _AXES}
    bounds_now = {name: getattr(box, name) for name in _AXES}
    for level in range(levels):
        for axis in _AXES:
            lo, hi = bounds_now[axis]
            for i in range(points):
                g = lo + (hi - lo) * i / (points - 1)
                trial = {**vals, axis: g}
                rate = evaluate(trial)
                if rate > best_rate:
                    best_rate = rate
                    vals = trial
        # Shrink every axis to one grid cell around the incumbent.
        shrink = {}
        for axis in _AXES:
            lo0, hi0 = getattr(box, axis)
            half = spans[axis] / (points - 1) / (2 ** level)
            shrink[axis] = (max(lo0, vals[axis] - half),
                            min(hi0, vals[axis] + half))
        bounds_now = shrink

    best = _build_candidate(base, vals)
    if best is None or best_rate == -math.inf:
        raise ParameterError("search box contains no feasible candidate")
    return best, key_rate_point(channel, best, budget, method)
