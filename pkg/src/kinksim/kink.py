"""Kink collective coordinate, escape events, Peierls-Nabarro landscape.

The collective coordinate is the interpolated zero crossing of the smoothed
staggered transverse field s_i = (-1)^i (y_i - y_c) on x-sorted ions.  The
PN landscape is computed with a climbing-image elastic band between the
relaxed centred kink and the relaxed zigzag, one band per escape side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .equilibria import (
    LINEAR_THRESHOLD,
    KIND_KINK,
    KIND_KINK_BAR,
    kink_state,
    trap_center_y,
    zigzag_state,
)
from .errors import (
    InsufficientDataError,
    NoConvergenceError,
    PathCollapseError,
)
from .model import CrystalState, TrapModel

#: smoothing window (ions) for the staggered field
SMOOTH_WINDOW = 3

#: default escape dwell: kink absent this long (in ms) counts as escaped
ESCAPE_DWELL_MS = 0.5

#: escape direction is taken from the last observation at least this confident
CONFIDENCE_FLOOR = 0.5


@dataclass(frozen=True)
class KinkObservation:
    """Instantaneous kink reading from a single configuration snapshot.

    confidence is the fraction of voting ions whose raw staggered sign agrees
    with the two-domain pattern implied by the crossing; zigzag_like marks
    frames that look like a clean (possibly mirrored) zigzag, with
    domain_sign holding the sign of their uniform staggered order.
    """

    present: bool
    x_coordinate: float | None = None
    charge: int | None = None
    confidence: float = 0.0
    zigzag_like: bool = False
    domain_sign: int = 0


@dataclass(frozen=True)
class EscapeEvent:
    """Outcome of escape detection over one trajectory."""

    escaped: bool
    time: float | None = None
    direction: str | None = None  # "left" | "right"
    charge_at_escape: int | None = None
    inconclusive: bool = False


def observe_kink(state: CrystalState, trap: TrapModel):
    """Extract the kink collective coordinate from an instantaneous state.

    Works on thermal (non-relaxed) configurations: the staggered field is
    smoothed over a 3-ion window and the outermost ion per side does not
    participate in crossing detection.
    """
    n = state.n_ions
    if n < 5:
        return KinkObservation(present=False)
    order = np.argsort(state.positions[:, 0], kind="stable")
    x = state.positions[order, 0]
    y = state.positions[order, 1] - trap_center_y(trap)
    s = (-1.0) ** np.arange(n) * y
    half = SMOOTH_WINDOW // 2
    kern = np.ones(SMOOTH_WINDOW) / SMOOTH_WINDOW
    sm = np.convolve(s, kern, mode="valid")  # index i -> ion i + half
    xs = x[half:n - half]
    interior = slice(max(1 - half, 0), len(sm) - max(1 - half, 0))
    sm_i = sm[interior]
    xs_i = xs[interior]
    if np.max(np.abs(sm)) < LINEAR_THRESHOLD:
        return KinkObservation(present=False)
    sgn = np.sign(sm_i)
    sgn[sgn == 0] = 1.0
    flips = np.nonzero(np.diff(sgn) != 0)[0]
    if len(flips) == 0:
        return KinkObservation(
            present=False, zigzag_like=True, domain_sign=int(sgn[0])
        )
    if len(flips) != 1:
        return KinkObservation(present=False, zigzag_like=False)
    k = flips[0]
    s0, s1 = sm_i[k], sm_i[k + 1]
    x_star = xs_i[k] + s0 / (s0 - s1) * (xs_i[k + 1] - xs_i[k])
    charge = 1 if s1 > s0 else -1
    # confidence: raw staggered signs must match the two-domain pattern
    votes = 0
    agree = 0
    for i in range(1, n - 1):
        if abs(s[i]) < LINEAR_THRESHOLD:
            continue
        votes += 1
        expected = -charge if x[i] < x_star else charge
        if np.sign(s[i]) == expected:
            agree += 1
    conf = agree / votes if votes else 0.0
    return KinkObservation(
        present=True,
        x_coordinate=float(x_star),
        charge=charge,
        confidence=float(conf),
    )


def detect_escape(times, observations, dwell):
    """Scan a time-ordered observation stream for a persistent kink loss.

    times and dwell share one unit (dimensionless or ms, caller's choice).
    Escape is declared at the first frame of a kink-absent run lasting at
    least dwell whose frames look like a clean zigzag.  The direction comes
    from which zigzag domain filled the crystal: a charge-q wall leaving
    through the right edge leaves the domain of staggered sign -q behind.
    When the remaining domain is unreadable the sign of the last confident
    coordinate is used instead.  A run without any prior confident
    observation, or with non-zigzag frames (molten crystal), is reported as
    inconclusive.
    """
    times = np.asarray(times, dtype=float)
    if len(times) != len(observations):
        raise ValueError("times and observations length mismatch")
    last_conf = None
    run_start = None  # index of first frame of the current absent run
    for i, obs in enumerate(observations):
        if obs.present:
            if obs.confidence > CONFIDENCE_FLOOR:
                last_conf = obs
            run_start = None
            continue
        if run_start is None:
            run_start = i
        if times[i] - times[run_start] >= dwell:
            run = observations[run_start:i + 1]
            zig_frac = sum(1 for o in run if o.zigzag_like) / len(run)
            if last_conf is None or zig_frac < 0.9:
                return EscapeEvent(
                    escaped=False, time=float(times[run_start]), inconclusive=True
                )
            domain = int(np.sign(sum(o.domain_sign for o in run)))
            if domain != 0:
                direction = "right" if domain == -last_conf.charge else "left"
            else:
                direction = "right" if last_conf.x_coordinate > 0 else "left"
            return EscapeEvent(
                escaped=True,
                time=float(times[run_start]),
                direction=direction,
                charge_at_escape=last_conf.charge,
            )
    return EscapeEvent(escaped=False)


@dataclass
class PNLandscape:
    """Peierls-Nabarro potential of the kink coordinate, per escape side.

    samples holds (kink coordinate, energy) pairs along the minimum-energy
    path, energies relative to the centred-kink minimum (dimensionless).
    barrier_left/right are the escape saddle heights above the centred kink.
    """

    kink_x: np.ndarray
    energy: np.ndarray
    barrier_left: float
    barrier_right: float
    energy_kink: float
    energy_zigzag: float
    charge: int
    path_s: np.ndarray | None = None   # signed arclength from the kink minimum
    total_arclength: float = 0.0       # both sides, kink to escaped zigzag
    side_profiles: dict = field(default_factory=dict)

    @property
    def mean_barrier(self):
        return 0.5 * (self.barrier_left + self.barrier_right)


def _ramp_seed(zigzag_pos, x_c, y_c, spacing):
    """Kink seed with the domain wall placed at x_c (mirrored side left of it)."""
    img = zigzag_pos.copy()
    ramp = np.clip((zigzag_pos[:, 0] - x_c) / (2.0 * spacing), -1.0, 1.0)
    img[:, 1] = y_c + (zigzag_pos[:, 1] - y_c) * ramp
    return img


def _flow(pos, params, n_steps, eta=0.01, cap=0.02):
    e, gmax = kernels.flow_descend(pos, params, eta, cap, n_steps)
    return float(e), float(gmax)


def _escape_outcome(pos, params, trap, e_kink, kb_scale):
    """+1 if the seed flows into an escaped (kink-free) basin, -1 if the kink
    returns to the well, raising NoConvergence when undecided."""
    for _ in range(16):
        e, gmax = _flow(pos, params, 3000)
        if e < e_kink - 30.0 * kb_scale:
            return +1
        obs = observe_kink(CrystalState.at_rest(pos.copy()), trap)
        if obs.present and e < e_kink + 3.0 * kb_scale and gmax < 1e-3:
            return -1
    raise NoConvergenceError("escape-outcome flow undecided")


def _newton_saddle(pos, trap, params, tol=1e-11, max_iter=200):
    """Newton iteration to the stationary point nearest pos; returns position,
    energy and the Hessian eigensystem there."""
    from .model import batch_potential_gradient, hessian as model_hessian

    n = pos.shape[0]
    x = pos.copy()
    for _ in range(max_iter):
        e_arr, g = batch_potential_gradient(x[None, :, :], params)
        gnorm = float(np.max(np.abs(g[0])))
        if gnorm < tol:
            break
        h = model_hessian(CrystalState.at_rest(x), trap, t=0.0)
        try:
            delta = np.linalg.solve(h, g[0].reshape(-1)).reshape(n, 3)
        except np.linalg.LinAlgError:
            delta = 0.01 * g[0]
        norm = np.linalg.norm(delta)
        if norm > 0.1:
            delta *= 0.1 / norm
        x = x - delta
    else:
        raise NoConvergenceError(f"saddle Newton stalled at |g| = {gnorm:.2e}")
    h = model_hessian(CrystalState.at_rest(x), trap, t=0.0)
    evals, evecs = np.linalg.eigh(h)
    e_arr, _ = batch_potential_gradient(x[None, :, :], params)
    return x, float(e_arr[0]), evals, evecs


def _trace_descent(start, params, trap, e_stop, sample_ds=0.05, sample_dx=0.03,
                   max_chunks=80000):
    """Record (kink position, energy, arclength) along the gradient flow.

    A sample is retained whenever the configuration moved sample_ds in
    configuration space or the kink coordinate moved sample_dx; the number
    of flow steps per probe adapts so neither outruns the sampler.
    Arclength accumulates along the flow, measured from the start point."""
    pos = start.copy()
    samples = []
    last = pos.copy()
    obs = observe_kink(CrystalState.at_rest(pos.copy()), trap)
    last_x = obs.x_coordinate if obs.present else np.nan
    steps = 4
    s_cum = 0.0
    for _ in range(max_chunks):
        before = pos.copy()
        e, gmax = _flow(pos, params, steps)
        chunk_move = float(np.linalg.norm(pos - before))
        s_cum += chunk_move
        if chunk_move > sample_ds and steps > 1:
            steps = max(1, steps // 2)
        elif chunk_move < 0.2 * sample_ds and steps < 512:
            steps *= 2
        moved = float(np.linalg.norm(pos - last))
        obs = observe_kink(CrystalState.at_rest(pos.copy()), trap)
        x_now = obs.x_coordinate if obs.present else np.nan
        dx = abs(x_now - last_x) if np.isfinite(x_now) and np.isfinite(last_x) else 0.0
        if moved >= sample_ds or dx >= sample_dx:
            samples.append((x_now, e, s_cum))
            last = pos.copy()
            if np.isfinite(x_now):
                last_x = x_now
        if gmax < 1e-8 or e < e_stop:
            samples.append((x_now, e, s_cum))
            break
    return samples, pos


def _escape_saddle(side, zigzag_pos, trap, params, e_kink, kb_scale, y_c, spacing):
    """Saddle of the escape path through one crystal edge.

    The one-parameter seed family (domain wall at x_c) connects the kink
    basin to the escaped basin; bisection on the flow outcome brackets the
    separatrix, whose trajectory lingers at the escape saddle.  A Newton
    polish then converges to machine precision.
    """
    sgn = +1.0 if side == "right" else -1.0
    edge = zigzag_pos[:, 0].max() if side == "right" else zigzag_pos[:, 0].min()
    lo = 0.0
    hi = edge + sgn * 2.0 * spacing
    seed_of = lambda xc: _ramp_seed(zigzag_pos, xc, y_c, spacing)
    if _escape_outcome(seed_of(lo), params, trap, e_kink, kb_scale) != -1:
        raise NoConvergenceError("centred seed did not flow back to the kink")
    if _escape_outcome(seed_of(hi), params, trap, e_kink, kb_scale) != +1:
        raise NoConvergenceError("edge seed did not escape")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if _escape_outcome(seed_of(mid), params, trap, e_kink, kb_scale) == +1:
            hi = mid
        else:
            lo = mid
    # the near-separatrix trajectory passes arbitrarily close to the saddle:
    # take its minimum-gradient point, measured while still above the basins,
    # as the Newton starting guess
    pos = seed_of(0.5 * (lo + hi))
    best_g, best_pos = np.inf, None
    for _ in range(2000):
        e, gmax = _flow(pos, params, 40)
        if e > e_kink + 3.0 * kb_scale and gmax < best_g:
            best_g, best_pos = gmax, pos.copy()
        if e < e_kink - 5.0 * kb_scale:
            break  # rolled off the saddle into a basin
    if best_pos is None:
        raise NoConvergenceError("separatrix flow never entered the saddle region")
    x_s, e_s, evals, evecs = _newton_saddle(best_pos, trap, params)
    if evals[0] >= 0 or evals[1] <= 1e-10:
        raise PathCollapseError(
            f"stationary point is not an index-1 saddle (eigs {evals[:2]})"
        )
    return x_s, e_s, evecs[:, 0].reshape(-1, 3)


def pn_landscape(trap: TrapModel, n_ions, charge=1, n_images=32):
    """Escape saddles and the minimum-energy path of the kink, per side.

    For each crystal edge the escape saddle is located by bisecting the flow
    outcome of a one-parameter seed family (separatrix shooting) followed by
    a Newton polish; the exact minimum-energy path is then traced by
    steepest descent from the saddle in both directions.  Barriers are the
    saddle energies above the relaxed centred kink; n_images sets the number
    of path samples retained per side.
    """
    zz = zigzag_state(n_ions, trap)
    kink = kink_state(n_ions, trap, charge=charge, zigzag=zz)
    params = trap.reduced()
    params[7] = 0.0
    y_c = trap_center_y(trap)
    e_kink = kink.energy
    kb_scale = abs(e_kink - zz.energy) / 60.0 + 1e-9  # coarse energy yardstick

    zz_sorted = zz.configuration.positions[
        np.argsort(zz.configuration.positions[:, 0], kind="stable")
    ]
    base = zz_sorted.copy()
    if charge == -1:
        base[:, 1] = 2 * y_c - base[:, 1]
    spacing = float(np.mean(np.diff(zz_sorted[:, 0])))

    profiles = {}
    barriers = {}
    side_sign = {"left": -1.0, "right": +1.0}
    all_x = [np.array([kink.label.kink_position])]
    all_e = [np.array([0.0])]
    all_s = [np.array([0.0])]
    total_arclength = 0.0
    for side in ("left", "right"):
        x_s, e_s, unstable = _escape_saddle(
            side, base, trap, params, e_kink, kb_scale, y_c, spacing
        )
        barriers[side] = e_s - e_kink
        obs_s = observe_kink(CrystalState.at_rest(x_s.copy()), trap)
        x_saddle = obs_s.x_coordinate if obs_s.present else np.nan
        # steepest descent from the saddle; the leg ending near the kink
        # energy is inward, the other ends at the escaped zigzag
        legs = []
        for sgn in (+1.0, -1.0):
            seg, _ = _trace_descent(
                x_s + 1e-3 * sgn * unstable, params, trap,
                e_stop=zz.energy + 0.2 * kb_scale,
            )
            legs.append(seg)
        legs.sort(key=lambda seg: seg[-1][1])  # outward (deep zigzag) first
        outward, inward = legs
        s_in = inward[-1][2]   # saddle-to-kink arclength
        s_out = outward[-1][2]
        total_arclength += s_in + s_out
        side_samples = [(x_saddle, e_s - e_kink, s_in)]
        side_samples.extend((x, e - e_kink, s_in - s) for x, e, s in inward)
        side_samples.extend((x, e - e_kink, s_in + s) for x, e, s in outward)
        xs = np.array([p[0] for p in side_samples])
        de = np.array([p[1] for p in side_samples])
        ss = np.array([p[2] for p in side_samples]) * side_sign[side]
        profiles[side] = (xs, de)
        keep = np.isfinite(xs)
        xs, de, ss = xs[keep], de[keep], ss[keep]
        if len(xs) > n_images:
            # decimate uniformly across the coordinate, not along the path
            order_x = np.argsort(xs)
            sel = order_x[np.linspace(0, len(xs) - 1, n_images).astype(int)]
            xs, de, ss = xs[sel], de[sel], ss[sel]
        all_x.append(xs)
        all_e.append(de)
        all_s.append(ss)

    kx = np.concatenate(all_x)
    ke = np.concatenate(all_e)
    ks = np.concatenate(all_s)
    # the PN potential at X is the lowest path energy there: collapse the
    # transverse-relaxation transients by taking the minimum per X bin
    kx, ke, ks = _lower_envelope(kx, ke, ks, n_bins=max(4 * n_images, 64))
    return PNLandscape(
        kink_x=kx,
        energy=ke,
        barrier_left=float(barriers["left"]),
        barrier_right=float(barriers["right"]),
        energy_kink=e_kink,
        energy_zigzag=zz.energy,
        charge=charge,
        path_s=ks,
        total_arclength=float(total_arclength),
        side_profiles=profiles,
    )


def _lower_envelope(x, e, s, n_bins):
    span = x.max() - x.min()
    if span <= 0:
        return x, e, s
    edges = np.linspace(x.min(), x.max() + 1e-12, n_bins + 1)
    idx = np.digitize(x, edges) - 1
    xs, es, ss = [], [], []
    for b in range(n_bins):
        sel = idx == b
        if not sel.any():
            continue
        k = np.argmin(e[sel])
        xs.append(x[sel][k])
        es.append(e[sel][k])
        ss.append(s[sel][k])
    return np.array(xs), np.array(es), np.array(ss)


def quadratic_center_residual(landscape: PNLandscape, center_fraction=0.2):
    """Relative residual of a quadratic fit over the central path section.

    The window covers center_fraction of the total minimum-energy-path
    arclength, centred on the kink minimum (falling back to the coordinate
    span when arclength tags are unavailable).  Returns rms(fit residual) /
    (max - min of E) over the window.
    """
    x, e = landscape.kink_x, landscape.energy
    if landscape.path_s is not None and landscape.total_arclength > 0:
        half = 0.5 * center_fraction * landscape.total_arclength
        mask = np.abs(landscape.path_s) <= half
    else:
        span = x.max() - x.min()
        mask = np.abs(x) <= 0.5 * center_fraction * span
    if mask.sum() < 4:
        raise InsufficientDataError("too few PN samples in the central window")
    # collapse residual transverse-relaxation transients: the potential at a
    # coordinate is the lowest sampled energy nearby (site-scale bins)
    xw, ew, _ = _lower_envelope(x[mask], e[mask], x[mask], n_bins=12)
    if len(xw) < 5:
        raise InsufficientDataError("too few PN samples in the central window")
    coeff = np.polyfit(xw, ew, 2)
    resid = ew - np.polyval(coeff, xw)
    spread = ew.max() - ew.min()
    if spread <= 0:
        return 0.0
    return float(np.sqrt(np.mean(resid**2)) / spread)


def kink_damping_estimate(times, x_coords, min_decay_spans=100.0):
    """Damping rate of the kink coordinate from its velocity autocorrelation.

    The velocity is the finite difference of x(t); the rate g is the inverse
    of the first lag where |C(tau)| falls below C(0)/e.  Raises
    InsufficientData unless the trajectory covers min_decay_spans decay
    times (estimated a posteriori) and the kink is present throughout.
    """
    times = np.asarray(times, dtype=float)
    x_coords = np.asarray(x_coords, dtype=float)
    if np.isnan(x_coords).any():
        raise InsufficientDataError("kink absent in part of the trajectory")
    if len(times) < 16:
        raise InsufficientDataError("trajectory too short")
    dt = float(np.mean(np.diff(times)))
    v = np.diff(x_coords) / dt
    v = v - v.mean()
    m = len(v)
    nfft = int(2 ** np.ceil(np.log2(2 * m)))
    fv = np.fft.rfft(v, nfft)
    acf = np.fft.irfft(fv * np.conj(fv))[:m]
    acf /= np.arange(m, 0, -1)  # unbiased normalisation
    c0 = acf[0]
    if c0 <= 0:
        raise InsufficientDataError("degenerate velocity signal")
    target = c0 / np.e
    below = np.nonzero(np.abs(acf) < target)[0]
    if len(below) == 0 or below[0] == 0:
        raise InsufficientDataError("autocorrelation does not decay")
    k = below[0]
    # linear interpolation between the last lag above and the first below
    c_hi, c_lo = abs(acf[k - 1]), abs(acf[k])
    frac = (c_hi - target) / max(c_hi - c_lo, 1e-300)
    tau_e = (k - 1 + frac) * dt
    g = 1.0 / tau_e
    if (times[-1] - times[0]) * g < min_decay_spans:
        raise InsufficientDataError(
            f"trajectory covers only {(times[-1] - times[0]) * g:.1f} decay times"
        )
    return float(g)


def fit_damping_exponent(e_k_values, g_values):
    """Least-squares exponent of g ~ E_k^p from matched samples."""
    e = np.asarray(e_k_values, dtype=float)
    g = np.asarray(g_values, dtype=float)
    if len(e) < 3 or len(e) != len(g):
        raise InsufficientDataError("need at least 3 (E_k, g) pairs")
    if (e <= 0).any() or (g <= 0).any():
        raise InsufficientDataError("E_k and g must be positive")
    slope, _ = np.polyfit(np.log(e), np.log(g), 1)
    return float(slope)
