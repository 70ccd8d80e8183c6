"""Behavioral transmission-system models and the short-term transient engine.

Two model families stand in for a bench setup: an LTI convolution channel
(baseline where superposition holds exactly) and a nonlinear link made of a
saturating slew-limited driver feeding a characteristic-impedance line with a
mismatched resistive load, solved by a method-of-characteristics lattice
recursion with per-traversal loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from . import _kernels
from .errors import GridMismatchError, NonSettlingError, NoPropagationError
from .waveform import (
    GRID_SNAP,
    BitSequence,
    EdgeTemplate,
    Waveform,
    resample_shifted,
    synthesize,
)

SETTLE_FRAC = 1e-3  # template/settling detection threshold, fraction of swing


@runtime_checkable
class SystemModel(Protocol):
    """Deterministic causal map from an input waveform to the far-end output."""

    def respond(self, w: Waveform) -> Waveform: ...

    def respond_batch(self, dt: float, x: np.ndarray) -> np.ndarray: ...

    def latency_hint(self) -> float: ...


# ---------------------------------------------------------------------------
# driver stage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriverStage:
    """Slew-rate limiter followed by a static saturating transfer.

    The saturation sits at the output, so slew corners land in the flat part
    of the transfer and the driven edge stays smooth.  ``gain == 0`` selects a
    linear (identity) transfer; ``slew == 0`` disables rate limiting.
    """

    v_low: float
    v_high: float
    gain: float = 0.0
    slew: float = 0.0

    def __post_init__(self):
        if self.v_high <= self.v_low:
            raise ValueError("v_high must exceed v_low")
        if self.gain < 0 or self.slew < 0:
            raise ValueError("gain and slew must be >= 0")

    @property
    def swing(self) -> float:
        return self.v_high - self.v_low

    def transfer(self, x: np.ndarray) -> np.ndarray:
        if self.gain == 0:
            return np.array(x, dtype=np.float64, copy=True)
        mid = 0.5 * (self.v_low + self.v_high)
        return self.v_low + self.swing * 0.5 * (1.0 + np.tanh(self.gain * (x - mid) / self.swing))

    def apply(self, x: np.ndarray, dt: float) -> np.ndarray:
        """Drive a [batch, n] block; rows start settled at their first sample."""
        y = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.slew > 0:
            y = _kernels.slew_limit_2d(y, self.slew * dt)
        return self.transfer(y)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LtiChannelModel:
    """Finite-support discrete-tap channel; response is exact convolution.

    ``impulse_response.samples`` are dimensionless taps applied at its grid
    step; ``impulse_response.t0`` must be a non-negative integer multiple of
    the input dt.  Input history before t0 is taken as settled at the first
    sample.
    """

    impulse_response: Waveform

    def __post_init__(self):
        if self.impulse_response.t0 < -GRID_SNAP * self.impulse_response.dt:
            raise ValueError("impulse response must be causal (t0 >= 0)")

    def _offset_steps(self, dt: float) -> int:
        if abs(self.impulse_response.dt - dt) > GRID_SNAP * dt:
            raise GridMismatchError(
                f"input dt {dt} != impulse response dt {self.impulse_response.dt}")
        off = self.impulse_response.t0 / dt
        k = int(round(off))
        if abs(off - k) > GRID_SNAP:
            raise GridMismatchError("impulse response t0 is not on the sample grid")
        return k

    def respond_batch(self, dt: float, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        off = self._offset_steps(dt)
        h = self.impulse_response.samples
        nz = np.flatnonzero(h)
        n = x.shape[1]
        out = np.zeros_like(x)
        if nz.size <= 32:
            # sparse taps: sum of settled-history shifts
            for j in nz:
                s = j + off
                if s == 0:
                    out += h[j] * x
                else:
                    out[:, s:] += h[j] * x[:, :-s] if s < n else 0.0
                    out[:, :min(s, n)] += h[j] * x[:, :1]
            return out
        pad = np.repeat(x[:, :1], h.size - 1 + off, axis=1)
        xp = np.concatenate([pad, x], axis=1)
        for r in range(x.shape[0]):
            out[r] = np.convolve(xp[r], h, mode="valid")[:n]
        return out

    def respond(self, w: Waveform) -> Waveform:
        y = self.respond_batch(w.dt, w.samples[None, :])[0]
        return Waveform(w.t0, w.dt, y)

    def latency_hint(self) -> float:
        ir = self.impulse_response
        return ir.t0 + ir.n * ir.dt


@dataclass(frozen=True)
class NonlinearLinkModel:
    """Driver + lossy line + resistive load solved on the input's grid.

    The driver output launches the forward wave; the load reflects with
    Gamma = (R_L - Z0)/(R_L + Z0), the ideal-source end re-reflects with -1,
    and each traversal scales by ``loss_alpha``.  ``line_delay`` must be an
    integer number of sample steps.
    """

    driver: DriverStage
    z0: float
    load_ohms: float
    line_delay: float
    loss_alpha: float = 1.0

    SOURCE_REFLECTION = -1.0

    def __post_init__(self):
        if self.z0 <= 0 or self.load_ohms <= 0:
            raise ValueError("impedances must be positive")
        if self.line_delay <= 0:
            raise ValueError("line delay must be positive")
        if not 0 < self.loss_alpha <= 1:
            raise ValueError("loss_alpha must be in (0, 1]")

    @property
    def gamma_load(self) -> float:
        return (self.load_ohms - self.z0) / (self.load_ohms + self.z0)

    def _delay_steps(self, dt: float) -> int:
        steps = self.line_delay / dt
        k = int(round(steps))
        if k < 1 or abs(steps - k) > 1e-6:
            raise GridMismatchError(
                f"line delay {self.line_delay} is not an integer multiple of dt {dt}")
        return k

    def respond_batch(self, dt: float, x: np.ndarray) -> np.ndarray:
        nd = self._delay_steps(dt)
        d = self.driver.apply(x, dt)
        return _kernels.lattice_2d(d, nd, self.SOURCE_REFLECTION, self.gamma_load,
                                   self.loss_alpha)

    def respond(self, w: Waveform) -> Waveform:
        y = self.respond_batch(w.dt, w.samples[None, :])[0]
        return Waveform(w.t0, w.dt, y)

    def latency_hint(self) -> float:
        loop = abs(self.SOURCE_REFLECTION * self.gamma_load) * self.loss_alpha ** 2
        if loop < 1e-12:
            trips = 1
        else:
            trips = max(1, math.ceil(math.log(1e-4) / math.log(loop)))
        return 2.0 * self.line_delay * (trips + 1)


@dataclass(frozen=True)
class DelayEstimate:
    t_delay: float

    def __post_init__(self):
        if self.t_delay < 0:
            raise ValueError("t_delay must be >= 0")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def simulate(model: SystemModel, stimulus: Waveform, duration: float) -> Waveform:
    """Run the model over the stimulus; output shares the stimulus grid.

    ``duration`` is the absolute time through which output samples are needed;
    the stimulus must cover it.
    """
    if stimulus.t_end + GRID_SNAP * stimulus.dt < duration:
        raise ValueError(
            f"stimulus ends at {stimulus.t_end}, before required duration {duration}")
    return model.respond(stimulus)


def snap_to_grid(t: float, dt: float) -> float:
    """Nearest integer multiple of dt."""
    return round(t / dt) * dt


def windowed_response(model: SystemModel, seq: BitSequence, edges: EdgeTemplate,
                      offsets, t_start: float, window_start: float, T: float) -> np.ndarray:
    """Synthesize a sequence, run the model, and slice one UI of output.

    ``window_start`` must be an integer multiple of dt; the returned array
    holds the T/dt samples of [window_start, window_start + T).
    """
    dt = edges.dt
    t0 = math.floor(t_start / dt + GRID_SNAP) * dt
    stim = synthesize(seq, edges, offsets, t0, window_start + T)
    out = model.respond(stim)
    k0 = int(round((window_start - t0) / dt))
    if abs(k0 * dt + t0 - window_start) > GRID_SNAP * dt or k0 < 0:
        raise ValueError("window start is not on the stimulus grid")
    n_win = int(round(T / dt))
    return out.samples[k0:k0 + n_win].copy()


def _mid_crossing(samples: np.ndarray, t0: float, dt: float) -> float:
    """Time of the first crossing of mid-swing, linearly interpolated."""
    v0 = samples[0]
    v1 = samples[-1]
    if abs(v1 - v0) <= 0:
        raise NoPropagationError("output swing is zero")
    mid = 0.5 * (v0 + v1)
    sgn = 1.0 if v1 > v0 else -1.0
    above = sgn * (samples - mid) >= 0
    idx = np.flatnonzero(above)
    if idx.size == 0 or idx[0] == 0:
        if idx.size == 0:
            raise NoPropagationError("output never crossed mid-swing")
        return t0
    i = idx[0]
    a, b = samples[i - 1], samples[i]
    frac = (mid - a) / (b - a)
    return t0 + (i - 1 + frac) * dt


def estimate_delay(model: SystemModel, edges: EdgeTemplate) -> DelayEstimate:
    """Propagation time: input-edge 50% crossing to the output's first.

    Uses an isolated rising edge from a long-settled low state.
    """
    dt = edges.dt
    lead = edges.settle_time + 8 * dt
    horizon = model.latency_hint() + 4 * edges.settle_time + 16 * dt
    t_start = -math.ceil(lead / dt) * dt
    n = int(round((horizon - t_start) / dt)) + 1
    dev = edges.rise.samples - edges.rise.samples[0]
    p0 = (t_start - edges.rise.t0) / dt
    samples = edges.v_low + resample_shifted(dev, p0, n)
    stim = Waveform(t_start, dt, samples)
    out = model.respond(stim)
    swing_out = out.samples[-1] - out.samples[0]
    if abs(swing_out) < SETTLE_FRAC * edges.swing:
        raise NoPropagationError("output swing too small to locate a crossing")
    tail = out.samples[-max(4, out.n // 20):]
    if np.max(np.abs(tail - out.samples[-1])) > 0.02 * abs(swing_out):
        raise NoPropagationError("output did not settle within the horizon")
    t_in = _mid_crossing(stim.samples, stim.t0, dt)
    t_out = _mid_crossing(out.samples, out.t0, dt)
    return DelayEstimate(max(0.0, t_out - t_in))


def _settled_template(y: np.ndarray, dt: float, v_from: float, v_to: float) -> Waveform:
    """Recenter a raw edge response so its 50% crossing lands on the grid origin,
    truncate at settle, and affinely rescale to exactly span v_from -> v_to."""
    final = y[-1]
    start = y[0]
    swing = final - start
    if abs(swing) <= 0:
        raise NonSettlingError("driver produced no swing")
    off = np.abs(y - final) > SETTLE_FRAC * abs(swing)
    idx = np.flatnonzero(off)
    settle_idx = int(idx[-1]) + 1 if idx.size else 1
    if settle_idx >= y.size - 2:
        raise NonSettlingError("driver edge did not settle within the horizon")
    mid_mask = off & (np.abs(y - start) > SETTLE_FRAC * abs(swing))
    if not np.any(mid_mask):
        # instantaneous edge: keep it a clean one-step template
        return Waveform(-dt, dt, np.array([v_from, v_to]))
    t50 = _mid_crossing(y, 0.0, dt)
    k50 = int(round(t50 / dt))
    z = resample_shifted(y, t50 / dt - k50, settle_idx + 2)
    scale = (v_to - v_from) / (z[-1] - z[0])
    z = v_from + (z - z[0]) * scale
    z[-1] = v_to
    return Waveform(-k50 * dt, dt, z)


def extract_edge_templates(model: SystemModel, dt: float,
                           v_low: float | None = None,
                           v_high: float | None = None) -> EdgeTemplate:
    """Edge shapes for stimulus synthesis.

    For a nonlinear link the driver stage is stepped in isolation from settled
    rails; LTI channels get ideal one-step templates at the given levels.
    """
    if isinstance(model, NonlinearLinkModel):
        drv = model.driver
        lo, hi = drv.v_low, drv.v_high
        if drv.slew > 0:
            ramp = int(math.ceil(drv.swing / (drv.slew * dt)))
        else:
            ramp = 1
        lead, tail = 4, ramp * 3 + 16
        step_up = np.concatenate([np.full(lead, lo), np.full(tail, hi)])
        step_dn = np.concatenate([np.full(lead, hi), np.full(tail, lo)])
        rise = _settled_template(drv.apply(step_up, dt)[0], dt, lo, hi)
        fall = _settled_template(drv.apply(step_dn, dt)[0], dt, hi, lo)
        settle = max(rise.t_end, fall.t_end, dt)
        return EdgeTemplate(rise, fall, settle)
    if v_low is None or v_high is None:
        raise ValueError("v_low/v_high required for models without a driver stage")
    return ideal_step_templates(v_low, v_high, dt)


def ideal_step_templates(v_low: float, v_high: float, dt: float) -> EdgeTemplate:
    """Instant transitions: the value at the nominal edge time is the new rail."""
    rise = Waveform(-dt, dt, np.array([v_low, v_high]))
    fall = Waveform(-dt, dt, np.array([v_high, v_low]))
    return EdgeTemplate(rise, fall, dt)
