"""Time-series primitives, bit sequences, edge templates, and jittered stimulus synthesis.

All waveforms are uniformly sampled float64 series described by a start time
``t0`` and step ``dt``.  Stimuli are built by superposing edge templates on a
constant level; edge timing offsets are generally off-grid, so placement uses
band-limited fractional-delay interpolation (16-tap Kaiser-windowed sinc).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateJitterError, EdgeOrderError, WindowRangeError

SINC_TAPS = 16        # fractional-delay kernel taps (8 per side)
KAISER_BETA = 8.0
GRID_SNAP = 1e-9      # fractional sample offsets below this are treated as on-grid
MIN_EDGE_GAP_UI = 0.05

_TAP_OFFSETS = np.arange(-(SINC_TAPS // 2 - 1), SINC_TAPS // 2 + 1)  # -7 .. +8
_I0_BETA = float(np.i0(KAISER_BETA))


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled real-valued time series."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def t_end(self) -> float:
        return self.t0 + (self.n - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def value_at(self, t: float) -> float:
        """Linear interpolation inside the span (convenience for tests/metrics)."""
        if t < self.t0 - GRID_SNAP * self.dt or t > self.t_end + GRID_SNAP * self.dt:
            raise WindowRangeError(f"t={t} outside span [{self.t0}, {self.t_end}]")
        p = np.clip((t - self.t0) / self.dt, 0.0, self.n - 1.0)
        i = int(p)
        if i == self.n - 1:
            return float(self.samples[-1])
        f = p - i
        return float((1.0 - f) * self.samples[i] + f * self.samples[i + 1])


@dataclass(frozen=True)
class BitSequence:
    """Ordered bits from the oldest index down to ``newest_index``.

    ``bits[0]`` is the oldest bit (largest index); the last entry is the bit at
    ``newest_index``.  Bit ``m`` asserts at ``t = -m*T``.  ``level`` is the
    settled input level before the oldest bit's interval.
    """

    bits: tuple
    T: float
    level: float
    newest_index: int = -1

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        object.__setattr__(self, "bits", bits)
        if len(bits) < 2:
            raise ValueError("sequence needs at least two bits")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        if self.T <= 0:
            raise ValueError("bit period must be positive")

    @property
    def oldest_index(self) -> int:
        return self.newest_index + len(self.bits) - 1

    def bit(self, m: int) -> int:
        if not self.newest_index <= m <= self.oldest_index:
            raise IndexError(f"bit index {m} outside [{self.newest_index}, {self.oldest_index}]")
        return self.bits[self.oldest_index - m]

    @classmethod
    def alternating(cls, oldest_index: int, T: float, v_low: float, v_high: float,
                    newest_index: int = -1, newest_bit: int = 0) -> "BitSequence":
        """[... 0 1 0 1 0]-style sequence; level matches the oldest bit."""
        n = oldest_index - newest_index + 1
        bits = tuple((newest_bit + (n - 1 - k)) % 2 for k in range(n))
        level = v_high if bits[0] else v_low
        return cls(bits, T, level, newest_index)

    @classmethod
    def from_int(cls, code: int, oldest_index: int, T: float, v_low: float, v_high: float,
                 newest_index: int = -1) -> "BitSequence":
        """Decode bits from an integer; the bit at ``newest_index`` is the LSB."""
        n = oldest_index - newest_index + 1
        if not 0 <= code < (1 << n):
            raise ValueError(f"code {code} does not fit {n} bits")
        bits = tuple((code >> (n - 1 - k)) & 1 for k in range(n))
        level = v_high if bits[0] else v_low
        return cls(bits, T, level, newest_index)


@dataclass(frozen=True)
class EdgeTemplate:
    """Rising and falling edge shapes at the link input, plus their settle time."""

    rise: Waveform
    fall: Waveform
    settle_time: float

    def __post_init__(self):
        if abs(self.rise.dt - self.fall.dt) > GRID_SNAP * self.rise.dt:
            raise ValueError("rise/fall templates must share dt")
        swing = self.v_high - self.v_low
        if swing <= 0:
            raise ValueError("rise template must go from low to high")
        tol = 1e-6 * swing
        if abs(self.fall.samples[0] - self.v_high) > tol or abs(self.fall.samples[-1] - self.v_low) > tol:
            raise ValueError("fall template must go from high to low")
        if self.settle_time <= 0:
            raise ValueError("settle_time must be positive")

    @property
    def dt(self) -> float:
        return self.rise.dt

    @property
    def v_low(self) -> float:
        return float(self.rise.samples[0])

    @property
    def v_high(self) -> float:
        return float(self.rise.samples[-1])

    @property
    def swing(self) -> float:
        return self.v_high - self.v_low


@dataclass(frozen=True)
class JitterSpec:
    """Periodic + random jitter parameters and their evaluation grids."""

    a_pj: float
    t_pj: float
    sigma_rj: float
    t0_steps: int = 100
    rj_range: float = 5.0
    rj_steps_per_range: int = 50

    def __post_init__(self):
        if self.a_pj < 0:
            raise ValueError("a_pj must be >= 0")
        if self.t_pj <= 0:
            raise ValueError("t_pj must be positive")
        if self.sigma_rj < 0:
            raise ValueError("sigma_rj must be >= 0")
        if self.t0_steps < 1 or self.rj_steps_per_range < 1:
            raise ValueError("grid step counts must be >= 1")
        if self.rj_range <= 0:
            raise ValueError("rj_range must be positive")

    def t0_grid(self) -> np.ndarray:
        """Phase grid covering (0, t_pj] in t_pj/t0_steps steps."""
        return (np.arange(self.t0_steps) + 1) * (self.t_pj / self.t0_steps)

    def rj_step(self) -> float:
        if self.sigma_rj == 0:
            raise DegenerateJitterError("rj grid undefined for sigma_rj == 0")
        return self.rj_range * self.sigma_rj / self.rj_steps_per_range

    def rj_grid(self) -> np.ndarray:
        """Offset grid: 2*rj_steps_per_range points from -range*sigma upward."""
        step = self.rj_step()
        s = self.rj_steps_per_range
        return np.arange(-s, s) * step

    @property
    def rj_points(self) -> int:
        return 2 * self.rj_steps_per_range

    @property
    def max_offset(self) -> float:
        """Largest |edge displacement| any assignment may produce."""
        return self.a_pj + self.rj_range * self.sigma_rj


@dataclass(frozen=True)
class JitterAssignment:
    """One concrete draw: a PJ phase and per-index RJ offsets."""

    t0: float
    rj_offsets: Mapping[int, float]

    def offset_for(self, m: int) -> float:
        return float(self.rj_offsets.get(m, 0.0))


# ---------------------------------------------------------------------------
# jitter models
# ---------------------------------------------------------------------------

def pj_offset(m: int, spec: JitterSpec, t0: float, T: float) -> float:
    """Bit-instant periodic-jitter displacement of the edge at nominal -m*T."""
    return spec.a_pj * math.sin(2.0 * math.pi * (-m * T + t0) / spec.t_pj)


def rj_pdf(dt, sigma: float):
    """Gaussian N(0, sigma^2) density; rejects the degenerate sigma=0 case."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        raise DegenerateJitterError("sigma_rj == 0 has no density; use the no-RJ path")
    dt = np.asarray(dt, dtype=np.float64)
    out = np.exp(-0.5 * (dt / sigma) ** 2) / (math.sqrt(2.0 * math.pi) * sigma)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# band-limited fractional shifting
# ---------------------------------------------------------------------------

def fractional_delay_kernel(frac: float) -> np.ndarray:
    """16-tap Kaiser-windowed sinc interpolation kernel for offset ``frac`` in (0, 1).

    Normalized to unit DC gain so constant segments are reproduced exactly.
    """
    u = frac - _TAP_OFFSETS
    x = u / (SINC_TAPS // 2)
    win = np.i0(KAISER_BETA * np.sqrt(np.maximum(0.0, 1.0 - x * x))) / _I0_BETA
    k = np.sinc(u) * win
    return k / k.sum()


def resample_shifted(y: np.ndarray, p0: float, n_out: int) -> np.ndarray:
    """Sample the band-limited interpolant of ``y`` at positions p0, p0+1, ...

    ``y`` is extended by its end values on both sides, so series that settle to
    a constant stay settled.  Integer ``p0`` reduces to an exact (bit-identical)
    indexed copy.
    """
    y = np.asarray(y, dtype=np.float64)
    i0 = math.floor(p0)
    frac = p0 - i0
    if frac < GRID_SNAP or frac > 1.0 - GRID_SNAP:
        if frac > 0.5:
            i0 += 1
        idx = np.clip(i0 + np.arange(n_out), 0, y.size - 1)
        return y[idx]
    half = SINC_TAPS // 2
    idx = np.clip(np.arange(i0 - (half - 1), i0 + n_out + half), 0, y.size - 1)
    ext = y[idx]
    kern = fractional_delay_kernel(frac)
    return np.correlate(ext, kern, mode="valid")


# ---------------------------------------------------------------------------
# stimulus synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeEvent:
    """A single input transition: nominal grid time plus jitter displacement."""

    index: int
    t_nominal: float
    t_actual: float
    rising: bool


def edge_events(seq: BitSequence, edges: EdgeTemplate,
                offsets: Mapping[int, float] | None = None) -> list:
    """Transitions implied by a bit sequence, newest first sorted by time.

    A transition into bit ``m`` sits at nominal ``-m*T`` and exists when the
    bit differs from its predecessor (the settled ``level`` plays the
    predecessor for the oldest bit).  ``offsets`` displaces selected indexes.
    """
    offsets = offsets or {}
    level_bit = 1 if abs(seq.level - edges.v_high) < abs(seq.level - edges.v_low) else 0
    events = []
    prev = level_bit
    for m in range(seq.oldest_index, seq.newest_index - 1, -1):
        b = seq.bit(m)
        if b != prev:
            dt_off = float(offsets.get(m, 0.0))
            events.append(EdgeEvent(m, -m * seq.T, -m * seq.T + dt_off, rising=(b == 1)))
        prev = b
    return events


def check_edge_spacing(events: Sequence, T: float) -> None:
    """Reject jitter that reorders edges or brings them closer than 0.05 UI."""
    times = [e.t_actual for e in sorted(events, key=lambda e: e.t_nominal)]
    for a, b in zip(times, times[1:]):
        if b - a < MIN_EDGE_GAP_UI * T:
            raise EdgeOrderError(
                f"edges at {a:.3e}s and {b:.3e}s closer than {MIN_EDGE_GAP_UI} UI")


def synthesize(seq: BitSequence, edges: EdgeTemplate,
               offsets: Mapping[int, float] | None,
               t_start: float, t_end: float) -> Waveform:
    """Superpose edge templates for a sequence on the grid [t_start, t_end]."""
    dt = edges.dt
    n = int(round((t_end - t_start) / dt)) + 1
    events = edge_events(seq, edges, offsets)
    check_edge_spacing(events, seq.T)
    samples = np.full(n, seq.level, dtype=np.float64)
    for ev in events:
        tpl = edges.rise if ev.rising else edges.fall
        dev = tpl.samples - tpl.samples[0]
        p0 = (t_start - ev.t_actual - tpl.t0) / dt
        samples += resample_shifted(dev, p0, n)
    return Waveform(t_start, dt, samples)


def build_stimulus(seq: BitSequence, edges: EdgeTemplate, spec: JitterSpec,
                   jit: JitterAssignment, m_j: int,
                   t_start: float | None = None, t_end: float | None = None) -> Waveform:
    """Jittered input waveform: level plus superposed edges.

    Edges at indexes ``m <= m_j`` are displaced by the PJ bit-instant offset
    plus the assigned RJ offset; deeper edges sit at their nominal times.
    """
    if seq.newest_index != -1:
        raise ValueError("stimulus sequences must run down to the next bit (index -1)")
    expect = set(range(-1, m_j + 1))
    if set(jit.rj_offsets.keys()) != expect:
        raise ValueError(f"rj_offsets must cover exactly indexes {sorted(expect)}")
    bound = spec.rj_range * spec.sigma_rj
    for m, off in jit.rj_offsets.items():
        if abs(off) > bound * (1.0 + 1e-12) + 1e-30:
            raise ValueError(f"rj offset {off} at index {m} exceeds {bound}")
    offsets = {m: pj_offset(m, spec, jit.t0, seq.T) + jit.offset_for(m)
               for m in range(-1, m_j + 1)}
    if t_start is None:
        t_start = -(seq.oldest_index + 1) * seq.T - edges.settle_time
    if t_end is None:
        t_end = -seq.newest_index * seq.T + spec.max_offset + edges.settle_time
    return synthesize(seq, edges, offsets, t_start, t_end)


# ---------------------------------------------------------------------------
# windowing
# ---------------------------------------------------------------------------

def window(w: Waveform, start: float, duration: float) -> Waveform:
    """Copy of the [start, start+duration] stretch on the same dt grid."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    tol = GRID_SNAP * w.dt
    if start < w.t0 - tol or start + duration > w.t_end + tol:
        raise WindowRangeError(
            f"window [{start}, {start + duration}] outside span [{w.t0}, {w.t_end}]")
    n = int(round(duration / w.dt)) + 1
    p0 = (start - w.t0) / w.dt
    return Waveform(start, w.dt, resample_shifted(w.samples, p0, n))
