"""Statistical reductions: survival curves, lifetime and Kramers fits,
resonance fits, temperature calibration and transport directionality.

All functions here are pure reductions over arrays or event records; none of
them runs dynamics.  Times may be in any single unit (ms recommended at the
CLI boundary); temperatures in the Kramers machinery are handled in units of
the Doppler temperature so extracted barriers come out in k_B T_D directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.stats import kstest

from .errors import (
    EmptyEnsembleError,
    FitDivergedError,
    PoorFitError,
    TooFewEscapesError,
    TooFewPointsError,
)

DOPPLER_T_K = 1.0e-3  # reference temperature for barrier units


# ---------------------------------------------------------------------------
# survival and lifetimes
# ---------------------------------------------------------------------------

@dataclass
class SurvivalCurve:
    times: np.ndarray
    survival: np.ndarray
    error: np.ndarray
    n_total: int
    n_escapes: int


def survival_curve(durations, escaped, t_grid):
    """Kaplan-Meier survival with right-censoring, evaluated on t_grid.

    durations[i] is the escape time when escaped[i] else the censoring time
    (observation window).  Errors are Greenwood standard errors, which
    reduce to binomial errors when all censoring happens at the end.
    """
    durations = np.asarray(durations, dtype=float)
    escaped = np.asarray(escaped, dtype=bool)
    if len(durations) == 0:
        raise EmptyEnsembleError("no trajectories")
    t_grid = np.asarray(t_grid, dtype=float)
    order = np.argsort(durations, kind="stable")
    t_sorted = durations[order]
    e_sorted = escaped[order]
    n = len(t_sorted)

    s = 1.0
    var_sum = 0.0
    event_t, event_s, event_err = [0.0], [1.0], [0.0]
    at_risk = n
    i = 0
    while i < n:
        t = t_sorted[i]
        d = 0
        c = 0
        while i < n and t_sorted[i] == t:
            if e_sorted[i]:
                d += 1
            else:
                c += 1
            i += 1
        if d > 0:
            s *= 1.0 - d / at_risk
            if at_risk > d:
                var_sum += d / (at_risk * (at_risk - d))
            event_t.append(t)
            event_s.append(s)
            event_err.append(s * np.sqrt(var_sum))
        at_risk -= d + c
    idx = np.searchsorted(event_t, t_grid, side="right") - 1
    idx = np.clip(idx, 0, len(event_t) - 1)
    return SurvivalCurve(
        times=t_grid,
        survival=np.array(event_s)[idx],
        error=np.array(event_err)[idx],
        n_total=n,
        n_escapes=int(escaped.sum()),
    )


@dataclass
class LifetimeFit:
    tau: float
    ci68: tuple[float, float]
    n_escapes: int
    n_censored: int
    background_rate: float = 0.0


def fit_lifetime(durations, escaped, background_rate=0.0, min_escapes=5):
    """Censored-exponential maximum likelihood lifetime.

    tau_hat = (sum of all observed durations) / n_escapes; the 68% interval
    comes from the profile likelihood (delta log L = 1/2).  An optional
    constant background escape rate is subtracted from the fitted rate.
    """
    durations = np.asarray(durations, dtype=float)
    escaped = np.asarray(escaped, dtype=bool)
    n_esc = int(escaped.sum())
    if n_esc < min_escapes:
        raise TooFewEscapesError(f"{n_esc} escapes < required {min_escapes}")
    total_time = float(durations.sum())
    tau = total_time / n_esc

    def dlogl(t):
        # log L(tau) = -n ln tau - T/tau, maximum at tau_hat
        return (-n_esc * np.log(t) - total_time / t) - (
            -n_esc * np.log(tau) - total_time / tau
        ) + 0.5

    lo = brentq(dlogl, tau * 1e-3, tau)
    hi = brentq(dlogl, tau, tau * 1e3)
    if background_rate > 0.0:
        rate = 1.0 / tau - background_rate
        if rate <= 0:
            raise FitDivergedError("background rate exceeds the fitted rate")
        scale = tau * rate  # = tau / tau_corrected
        tau = 1.0 / rate
        lo, hi = lo / scale, hi / scale
    return LifetimeFit(
        tau=tau,
        ci68=(float(lo), float(hi)),
        n_escapes=n_esc,
        n_censored=int(len(durations) - n_esc),
        background_rate=background_rate,
    )


def exponential_ks_pvalue(escape_times, window, tau):
    """K-S p-value of observed escape times vs the window-truncated
    exponential with the fitted lifetime (conservative for fitted tau)."""
    escape_times = np.asarray(escape_times, dtype=float)
    if len(escape_times) < 5:
        raise TooFewEscapesError("need at least 5 escape times for the K-S test")
    denom = 1.0 - np.exp(-window / tau)

    def cdf(t):
        return (1.0 - np.exp(-np.asarray(t) / tau)) / denom

    return float(kstest(escape_times, cdf).pvalue)


# ---------------------------------------------------------------------------
# resonance scans
# ---------------------------------------------------------------------------

@dataclass
class LorentzianPeak:
    center: float
    width: float
    amplitude: float
    center_err: float
    width_err: float
    amplitude_err: float


@dataclass
class ResonanceFit:
    peaks: list[LorentzianPeak]
    offset: float
    offset_err: float
    rss: float


def fit_lorentzian(freqs, probs, errors=None, n_peaks=1):
    """Least-squares fit of offset + sum_k A_k G_k^2 / ((f-f_k)^2 + G_k^2).

    Multi-start initialisation: the dominant peak starts at the maximum
    point, a second peak at the strongest residual.  Parameter errors come
    from the Jacobian covariance scaled by the residual variance.
    """
    freqs = np.asarray(freqs, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if len(freqs) < 8:
        raise TooFewPointsError("need at least 8 frequency points")
    if errors is None:
        sigma = np.full_like(probs, max(probs.std(), 1e-3))
    else:
        sigma = np.clip(np.asarray(errors, dtype=float), 1e-4, None)

    span = freqs.max() - freqs.min()
    f0 = freqs[np.argmax(probs)]
    base = float(np.percentile(probs, 20))
    amp0 = max(probs.max() - base, 1e-3)

    def model(theta):
        out = np.full_like(freqs, theta[0])
        for k in range(n_peaks):
            a, c, g = theta[1 + 3 * k: 4 + 3 * k]
            out = out + a * g**2 / ((freqs - c) ** 2 + g**2)
        return out

    def resid(theta):
        return (model(theta) - probs) / sigma

    starts = []
    for wfrac in (0.03, 0.08, 0.15):
        theta = [base, amp0, f0, wfrac * span]
        if n_peaks == 2:
            # second start: strongest point away from the first peak
            mask = np.abs(freqs - f0) > 2 * wfrac * span
            if mask.any():
                f1 = freqs[mask][np.argmax((probs - base)[mask])]
            else:
                f1 = freqs.min() + 0.25 * span
            theta = theta + [amp0 * 0.3, f1, wfrac * span]
        starts.append(np.array(theta, dtype=float))

    best = None
    lo = [0.0] + [0.0, freqs.min() - span, 1e-9 * max(span, 1.0)] * n_peaks
    hi = [1.0] + [2.0, freqs.max() + span, 2.0 * span] * n_peaks
    for theta0 in starts:
        theta0 = np.clip(theta0, lo, hi)
        try:
            res = least_squares(resid, theta0, bounds=(lo, hi), max_nfev=20_000)
        except Exception:
            continue
        if res.cost < (best.cost if best is not None else np.inf):
            best = res
    if best is None or not np.isfinite(best.cost):
        raise FitDivergedError("no Lorentzian start converged")

    dof = max(len(freqs) - len(best.x), 1)
    s2 = 2 * best.cost / dof
    try:
        cov = np.linalg.inv(best.jac.T @ best.jac) * s2
        perr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        perr = np.full_like(best.x, np.nan)

    peaks = []
    for k in range(n_peaks):
        a, c, g = best.x[1 + 3 * k: 4 + 3 * k]
        ea, ec, eg = perr[1 + 3 * k: 4 + 3 * k]
        peaks.append(LorentzianPeak(
            center=float(c), width=float(abs(g)), amplitude=float(a),
            center_err=float(ec), width_err=float(eg), amplitude_err=float(ea),
        ))
    peaks.sort(key=lambda p: -p.amplitude)
    return ResonanceFit(
        peaks=peaks,
        offset=float(best.x[0]),
        offset_err=float(perr[0]),
        rss=float(2 * best.cost),
    )


# ---------------------------------------------------------------------------
# temperature calibration and the Kramers barrier
# ---------------------------------------------------------------------------

@dataclass
class TemperatureMap:
    """Linear map epsilon -> effective temperature via E_k(eps).

    slope/intercept parameterize E_k(eps) (dimensionless energy); the
    temperature follows from k_B T / 2 = E_k / (3N).
    """

    slope: float
    intercept: float
    r_squared: float
    n_ions: int
    energy_unit: float  # J per dimensionless energy unit
    eps_max: float

    def e_k(self, eps):
        return self.intercept + self.slope * np.asarray(eps, dtype=float)

    def temperature(self, eps):
        """(T in kelvin, extrapolated flag); flagged beyond 1.5 x eps_max."""
        from .model import BOLTZMANN

        e_k = self.e_k(eps)
        t = 2.0 * e_k * self.energy_unit / (3.0 * self.n_ions * BOLTZMANN)
        extrapolated = bool(np.any(np.asarray(eps) > 1.5 * self.eps_max))
        return t, extrapolated

    def temperature_td(self, eps):
        t, extrapolated = self.temperature(eps)
        return t / DOPPLER_T_K, extrapolated


def calibrate_temperature(eps_values, e_k_values, n_ions, energy_unit,
                          r2_min=0.9):
    """Least-squares line through (eps, E_k) samples -> TemperatureMap.

    Requires at least 3 points including eps = 0 (the equilibrium anchor).
    """
    eps = np.asarray(eps_values, dtype=float)
    e_k = np.asarray(e_k_values, dtype=float)
    if len(eps) < 3:
        raise TooFewPointsError("need at least 3 (eps, E_k) samples")
    if not np.any(eps == 0.0):
        raise TooFewPointsError("calibration requires an eps = 0 anchor")
    slope, intercept = np.polyfit(eps, e_k, 1)
    pred = intercept + slope * eps
    ss_res = float(np.sum((e_k - pred) ** 2))
    ss_tot = float(np.sum((e_k - e_k.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if r2 < r2_min:
        raise PoorFitError(f"E_k(eps) linear fit R^2 = {r2:.3f} < {r2_min}")
    return TemperatureMap(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r2),
        n_ions=n_ions,
        energy_unit=energy_unit,
        eps_max=float(eps.max()),
    )


@dataclass
class KramersFit:
    """Arrhenius regression ln(tau) - ln(T~)/2 vs 1/T~ (T~ = T/T_D).

    The slope is the barrier in k_B T_D; the prefactor absorbs the
    well/barrier shape and the sqrt(T) damping law g(E_k) ~ E_k^(1/2).
    """

    w_kbtd: float
    w_err: float
    prefactor: float
    r_squared: float
    negative_barrier: bool = False
    points: list = field(default_factory=list)


def fit_kramers(tau_values, t_td_values):
    """Barrier from lifetimes tau at effective temperatures T (in T_D units)."""
    tau = np.asarray(tau_values, dtype=float)
    t_td = np.asarray(t_td_values, dtype=float)
    if len(tau) < 3 or len(np.unique(t_td.round(12))) < 3:
        raise TooFewPointsError("need at least 3 distinct (tau, T) points")
    if np.any(tau <= 0) or np.any(t_td <= 0):
        raise TooFewPointsError("tau and T must be positive")
    x = 1.0 / t_td
    y = np.log(tau) - 0.5 * np.log(t_td)
    (slope, intercept), cov = np.polyfit(x, y, 1, cov=True)
    pred = intercept + slope * x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return KramersFit(
        w_kbtd=float(slope),
        w_err=float(np.sqrt(max(cov[0, 0], 0.0))),
        prefactor=float(np.exp(intercept)),
        r_squared=float(r2),
        negative_barrier=bool(slope < 0),
        points=list(zip(x.tolist(), y.tolist())),
    )


def kramers_lifetime(w_kbtd, t_td, prefactor=1.0):
    """Mean lifetime tau = prefactor * sqrt(T~) * exp(W / T~)."""
    t_td = np.asarray(t_td, dtype=float)
    return prefactor * np.sqrt(t_td) * np.exp(w_kbtd / t_td)


# ---------------------------------------------------------------------------
# transport directionality
# ---------------------------------------------------------------------------

@dataclass
class DirectionalityResult:
    td: float
    error: float
    n_right: int
    n_left: int
    charge: int | None = None
    epsilon: float | None = None


def directionality(n_right, n_left, charge=None, epsilon=None, min_escapes=10):
    """TD = (N_R - N_L) / (N_R + N_L) with 1 sigma binomial error."""
    n_right = int(n_right)
    n_left = int(n_left)
    n = n_right + n_left
    if n < min_escapes:
        raise TooFewEscapesError(f"{n} escapes < required {min_escapes}")
    p = n_right / n
    td = 2.0 * p - 1.0
    err = 2.0 * np.sqrt(max(p * (1.0 - p), 1.0 / (4 * n)) / n)
    return DirectionalityResult(
        td=float(td), error=float(err), n_right=n_right, n_left=n_left,
        charge=charge, epsilon=epsilon,
    )
