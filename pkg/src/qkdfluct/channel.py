"""Detection model for a vacuum + weak decoy-state link with after-pulsing.

Expected click and error statistics for a weak-coherent-pulse source sent
through a lossy channel to a threshold detector with dark counts,
misalignment and a constant after-pulse probability.  Every quantity here is
an expected frequency (per emitted pulse of the relevant intensity); the
statistical treatment of finite samples lives in :mod:`qkdfluct.fluctuation`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

__all__ = [
    "ChannelParams",
    "SourceConfig",
    "ModelOutputs",
    "transmittance_from_loss",
    "gain",
    "apply_afterpulse",
    "vacuum_yield",
    "observed_qber",
    "background_gain",
    "model_outputs",
]


def _check_unit_interval(name: str, value: float, *, lo: float = 0.0, hi: float = 1.0,
                         lo_open: bool = False, hi_open: bool = False) -> None:
    bad_lo = value <= lo if lo_open else value < lo
    bad_hi = value >= hi if hi_open else value > hi
    if bad_lo or bad_hi:
        lo_br = "(" if lo_open else "["
        hi_br = ")" if hi_open else "]"
        raise ParameterError(f"{name} must lie in {lo_br}{lo}, {hi}{hi_br}, got {value!r}")


@dataclass(frozen=True)
class ChannelParams:
    """Physical link and detector parameters.

    Attributes
    ----------
    loss_db:
        Total transmission loss in dB (>= 0).
    detector_efficiency:
        Detector quantum efficiency, in (0, 1].  Folded into the overall
        transmittance.
    dark_count_prob:
        Dark-count probability per pulse per detector; the two-detector
        background yield is twice this value, so it must not exceed 0.5.
    misalignment:
        Probability that a photon hits the wrong detector, in [0, 1].
    background_error:
        Error rate of background clicks, normally 1/2.
    afterpulse_prob:
        Probability that a click re-triggers the detector on a later pulse,
        in [0, 1).
    """

    loss_db: float
    detector_efficiency: float = 1.0
    dark_count_prob: float = 1.7e-6
    misalignment: float = 0.033
    background_error: float = 0.5
    afterpulse_prob: float = 0.04

    def __post_init__(self) -> None:
        if self.loss_db < 0.0:
            raise ParameterError(f"loss_db must be >= 0, got {self.loss_db!r}")
        _check_unit_interval("detector_efficiency", self.detector_efficiency, lo_open=True)
        _check_unit_interval("dark_count_prob", self.dark_count_prob, hi=0.5)
        _check_unit_interval("misalignment", self.misalignment)
        _check_unit_interval("background_error", self.background_error)
        _check_unit_interval("afterpulse_prob", self.afterpulse_prob, hi_open=True)

    @property
    def eta(self) -> float:
        """Overall transmittance, detector efficiency included."""
        return transmittance_from_loss(self.loss_db, self.detector_efficiency)


@dataclass(frozen=True)
class SourceConfig:
    """Source intensities, basis bias and pulse budget.

    ``frac_signal``, ``frac_decoy`` and ``frac_vacuum`` give the share of the
    ``n_total`` emitted pulses sent at intensity ``mu``, at intensity ``nu``
    and as vacuum; they must sum to one.  ``p_z`` is the probability that a
    pulse is prepared (and measured) in the key-generation basis.
    """

    mu: float = 0.5
    nu: float = 0.05
    p_z: float = 0.5
    n_total: float = 1e12
    frac_signal: float = 0.5
    frac_decoy: float = 0.25
    frac_vacuum: float = 0.25
    f_ec: float = 1.28

    def __post_init__(self) -> None:
        if not self.mu > 0.0:
            raise ParameterError(f"mu must be > 0, got {self.mu!r}")
        if not 0.0 <= self.nu < self.mu:
            raise ParameterError(
                f"nu must satisfy 0 <= nu < mu, got nu={self.nu!r}, mu={self.mu!r}")
        _check_unit_interval("p_z", self.p_z, lo_open=True, hi_open=True)
        if self.n_total < 1.0:
            raise ParameterError(f"n_total must be >= 1, got {self.n_total!r}")
        for name in ("frac_signal", "frac_decoy", "frac_vacuum"):
            _check_unit_interval(name, getattr(self, name))
        total = self.frac_signal + self.frac_decoy + self.frac_vacuum
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"pulse fractions must sum to 1, got {total!r}")
        if self.f_ec < 1.0:
            raise ParameterError(f"f_ec must be >= 1, got {self.f_ec!r}")

    @property
    def n_mu(self) -> float:
        """Pulses emitted at the signal intensity."""
        return self.frac_signal * self.n_total

    @property
    def n_nu_z(self) -> float:
        """Decoy pulses prepared in the key-generation basis."""
        return self.frac_decoy * self.n_total * self.p_z

    @property
    def n_vacuum(self) -> float:
        """Vacuum pulses."""
        return self.frac_vacuum * self.n_total

    @property
    def sifting_factor(self) -> float:
        """Fraction of the total pulse budget that ends up as sifted signal
        bits in the key-generation basis."""
        return self.frac_signal * self.p_z


@dataclass(frozen=True)
class ModelOutputs:
    """Expected per-pulse frequencies produced by :func:`model_outputs`.

    All fields are probabilities.  ``q_mu``/``q_nu`` are the signal and decoy
    gains with after-pulse contributions removed; ``d_mu``/``d_nu`` are the
    raw detection rates including after-pulses.  ``e_mu``/``e_nu`` are the
    QBERs of the raw detection record (they include the after-pulse error
    term; with ``afterpulse_prob = 0`` they reduce to the plain QBERs).
    ``clamped`` is set when any output had to be clipped into its range.
    """

    q_mu: float
    q_nu: float
    d_mu: float
    d_nu: float
    y0: float
    y0_prime: float
    e_mu: float
    e_nu: float
    q0: float
    clamped: bool = False


def transmittance_from_loss(loss_db: float, detector_efficiency: float = 1.0) -> float:
    """Overall transmittance for a loss budget in dB, detector included.

    Raises
    ------
    ParameterError
        If ``loss_db`` is negative or ``detector_efficiency`` is outside (0, 1].
    """
    if loss_db < 0.0:
        raise ParameterError(f"loss_db must be >= 0, got {loss_db!r}")
    _check_unit_interval("detector_efficiency", detector_efficiency, lo_open=True)
    return detector_efficiency * 10.0 ** (-loss_db / 10.0)


def gain(eta: float, intensity: float, y0: float) -> float:
    """Expected click frequency for coherent pulses of the given intensity.

    ``y0`` is the background yield (both detectors' dark counts).  The click
    probability combines photon detections and background:
    ``1 - exp(-eta * intensity) * (1 - y0)``.
    """
    _check_unit_interval("eta", eta, lo_open=True)
    if intensity < 0.0:
        raise ParameterError(f"intensity must be >= 0, got {intensity!r}")
    _check_unit_interval("y0", y0)
    return 1.0 - math.exp(-eta * intensity) * (1.0 - y0)


def apply_afterpulse(click_prob: float, afterpulse_prob: float) -> float:
    """Raw detection rate once each click re-triggers with probability
    ``afterpulse_prob``: ``click_prob * (1 + afterpulse_prob)``.

    The result is a probability and is clipped to 1; callers that need to
    know whether clipping occurred should compare against the product.
    """
    _check_unit_interval("click_prob", click_prob)
    _check_unit_interval("afterpulse_prob", afterpulse_prob, hi_open=True)
    return min(1.0, click_prob * (1.0 + afterpulse_prob))


def vacuum_yield(dark_count_prob: float, afterpulse_prob: float) -> float:
    """Background click frequency including after-pulses:
    ``2 * dark_count_prob * (1 + afterpulse_prob)``."""
    _check_unit_interval("dark_count_prob", dark_count_prob, hi=0.5)
    _check_unit_interval("afterpulse_prob", afterpulse_prob, hi_open=True)
    return 2.0 * dark_count_prob * (1.0 + afterpulse_prob)


def _qber_raw(eta: float, intensity: float, y0_eff: float, click_prob: float,
              background_error: float, misalignment: float,
              afterpulse_prob: float) -> float:
    detected = click_prob * (1.0 + afterpulse_prob)
    if detected <= 0.0:
        raise ParameterError("QBER undefined: detection rate is zero")
    photon_err = misalignment * (1.0 - math.exp(-eta * intensity)) * (1.0 - y0_eff)
    afterpulse_err = afterpulse_prob * click_prob / 2.0
    return (background_error * y0_eff + photon_err + afterpulse_err) / detected


def observed_qber(eta: float, intensity: float, y0_eff: float, click_prob: float,
                  background_error: float = 0.5, misalignment: float = 0.033,
                  afterpulse_prob: float = 0.0) -> float:
    """QBER of the raw detection record at one intensity.

    Background clicks err with probability ``background_error``, photon
    clicks with probability ``misalignment``, and after-pulse clicks carry a
    random bit (error weight ``afterpulse_prob * click_prob / 2``).  The
    denominator is the raw detection rate.  The result is clipped to
    [0, 0.5].

    With ``afterpulse_prob = 0`` and ``y0_eff`` set to the plain background
    yield this reduces to the standard no-after-pulse QBER.

    Raises
    ------
    ParameterError
        If the detection rate is zero (QBER undefined).
    """
    raw = _qber_raw(eta, intensity, y0_eff, click_prob,
                    background_error, misalignment, afterpulse_prob)
    return min(0.5, max(0.0, raw))


def background_gain(y0_eff: float, mu: float) -> float:
    """Expected frequency of background clicks coinciding with a
    vacuum-component signal pulse: ``y0_eff * exp(-mu)``."""
    _check_unit_interval("y0_eff", y0_eff)
    if mu < 0.0:
        raise ParameterError(f"mu must be >= 0, got {mu!r}")
    return y0_eff * math.exp(-mu)


def model_outputs(channel: ChannelParams, source: SourceConfig) -> ModelOutputs:
    """Evaluate the full detection model for one channel and source setting.

    Returns expected frequencies for the signal and decoy intensities plus
    the vacuum observables.  Raw detection rates and the after-pulsed vacuum
    rate are clipped to 1 (with the ``clamped`` flag set) if the after-pulse
    factor would push them past 1.
    """
    eta = channel.eta
    y0 = 2.0 * channel.dark_count_prob
    p_ap = channel.afterpulse_prob

    q_mu = gain(eta, source.mu, y0)
    q_nu = gain(eta, source.nu, y0)
    y0_prime = vacuum_yield(channel.dark_count_prob, p_ap)

    clamped = False
    if y0_prime > 1.0:
        y0_prime = 1.0
        clamped = True
    rates = []
    for q in (q_mu, q_nu):
        raw = q * (1.0 + p_ap)
        if raw > 1.0:
            raw = 1.0
            clamped = True
        rates.append(raw)
    d_mu, d_nu = rates

    e_mu_raw = _qber_raw(eta, source.mu, y0_prime, q_mu,
                         channel.background_error, channel.misalignment, p_ap)
    e_nu_raw = _qber_raw(eta, source.nu, y0_prime, q_nu,
                         channel.background_error, channel.misalignment, p_ap)
    e_mu = min(0.5, max(0.0, e_mu_raw))
    e_nu = min(0.5, max(0.0, e_nu_raw))
    if e_mu != e_mu_raw or e_nu != e_nu_raw:
        clamped = True

    q0 = background_gain(y0_prime, source.mu)
    return ModelOutputs(q_mu=q_mu, q_nu=q_nu, d_mu=d_mu, d_nu=d_nu, y0=y0,
                        y0_prime=y0_prime, e_mu=e_mu, e_nu=e_nu, q0=q0,
                        clamped=clamped)
