"""Eye-density assembly, the brute-force transient oracle, and eye metrics.

Densities are phase-by-voltage probability grids with every phase column
normalized to unit mass.  The assembled eye weighs reconstructed response
windows by their jitter probabilities (uniform sequences, uniform PJ phase
grid, per-edge truncated-Gaussian RJ); the transient oracle folds one long
randomized simulation into UI windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, EdgeOrderError
from .mer import PJ_AXIS, MerEvaluator
from .orders import ResponseRequirement
from .system import SystemModel, snap_to_grid
from .waveform import (
    BitSequence,
    EdgeTemplate,
    JitterSpec,
    Waveform,
    edge_events,
    check_edge_spacing,
    rj_pdf,
    resample_shifted,
)

COLUMN_MASS_TOL = 1e-9


@dataclass(frozen=True)
class EyeBins:
    """Histogram geometry shared by both eye builders."""

    phase_bins: int
    voltage_bins: int
    v_min: float
    v_max: float

    def __post_init__(self):
        if self.phase_bins < 2 or self.voltage_bins < 2:
            raise ValueError("need at least 2 bins per axis")
        if self.v_max <= self.v_min:
            raise ValueError("v_max must exceed v_min")


@dataclass(frozen=True, eq=False)
class EyeDensity:
    """Column-normalized phase x voltage probability mass grid."""

    grid: np.ndarray
    v_min: float
    v_max: float

    def __post_init__(self):
        if self.grid.ndim != 2:
            raise ValueError("grid must be 2-D (phase, voltage)")
        if np.any(self.grid < 0):
            raise ValueError("masses must be non-negative")
        sums = self.grid.sum(axis=1)
        bad = np.flatnonzero((np.abs(sums - 1.0) > COLUMN_MASS_TOL) & (sums != 0.0))
        if bad.size:
            raise ValueError(f"phase columns {bad[:4]} not normalized (sum {sums[bad[0]]})")

    @property
    def phase_bins(self) -> int:
        return self.grid.shape[0]

    @property
    def voltage_bins(self) -> int:
        return self.grid.shape[1]


@dataclass(frozen=True)
class EyeMetrics:
    eye_height: float
    eye_width: float
    center_phase: float
    threshold_voltage: float

    def __post_init__(self):
        if not 0.0 <= self.eye_width <= 1.0:
            raise ValueError("eye width must lie in [0, 1] UI")
        if self.eye_height < 0:
            raise ValueError("eye height must be >= 0")


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    reference: float
    candidate: float
    rel_err: float | None   # None when the reference is zero


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple

    def row(self, name: str) -> ComparisonRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


# ---------------------------------------------------------------------------
# accumulation
# ---------------------------------------------------------------------------

class DensityAccumulator:
    """Histogram builder; partial accumulators merge by pure addition."""

    def __init__(self, bins: EyeBins, samples_per_trace: int):
        if samples_per_trace % bins.phase_bins != 0:
            raise ValueError("trace length must be a multiple of phase_bins")
        self.bins = bins
        self.samples_per_trace = samples_per_trace
        self._fold = samples_per_trace // bins.phase_bins
        self._grid = np.zeros((bins.phase_bins, bins.voltage_bins))
        self._phase_idx = np.arange(samples_per_trace) // self._fold

    def _vbin(self, values: np.ndarray) -> np.ndarray:
        b = self.bins
        scaled = (values - b.v_min) / (b.v_max - b.v_min) * b.voltage_bins
        return np.clip(scaled.astype(np.int64), 0, b.voltage_bins - 1)

    def add(self, trace: np.ndarray, mass: float) -> None:
        np.add.at(self._grid, (self._phase_idx, self._vbin(trace)), mass)

    def add_batch(self, traces: np.ndarray, masses: np.ndarray) -> None:
        vb = self._vbin(traces)
        pb = np.broadcast_to(self._phase_idx, vb.shape)
        np.add.at(self._grid, (pb.ravel(), vb.ravel()),
                  np.repeat(masses, self.samples_per_trace))

    def merge(self, other: "DensityAccumulator") -> None:
        if other.bins != self.bins or other.samples_per_trace != self.samples_per_trace:
            raise ValueError("accumulator geometry mismatch")
        self._grid += other._grid

    def raw_grid(self) -> np.ndarray:
        return self._grid.copy()

    def density(self) -> EyeDensity:
        grid = self._grid.copy()
        sums = grid.sum(axis=1, keepdims=True)
        nz = sums[:, 0] > 0
        grid[nz] /= sums[nz]
        return EyeDensity(grid, self.bins.v_min, self.bins.v_max)


# ---------------------------------------------------------------------------
# assembled (estimated) eye
# ---------------------------------------------------------------------------

def _rj_grid_pmf(spec: JitterSpec) -> tuple:
    grid = spec.rj_grid()
    p = rj_pdf(grid, spec.sigma_rj)
    return grid, p / p.sum()


def assemble_eye(evaluator: MerEvaluator, req: ResponseRequirement,
                 spec: JitterSpec, mode: str, bins: EyeBins,
                 n_traces: int = 100000, rng=None,
                 exhaustive_budget: int = 200000) -> EyeDensity:
    """Accumulate reconstructed windows over the jitter distribution.

    ``mode`` is "exhaustive" (full grid, degenerate axes collapse to a single
    point so the cardinality stays honest) or "monte_carlo" (``n_traces``
    draws from the same distribution, seeded via ``rng``).
    """
    n_seq = req.n_sequences
    acc = DensityAccumulator(bins, evaluator.n_window)
    if spec.a_pj > 0:
        t0_values = spec.t0_grid()
    else:
        t0_values = np.array([spec.t_pj])
    if spec.sigma_rj > 0:
        rj_values, rj_pmf = _rj_grid_pmf(spec)
    else:
        rj_values, rj_pmf = np.zeros(1), np.ones(1)
    dims = evaluator.dims

    if mode == "exhaustive":
        cardinality = n_seq * t0_values.size * rj_values.size ** len(dims)
        if cardinality > exhaustive_budget:
            raise BudgetExceededError(
                f"exhaustive grid holds {cardinality} traces, budget {exhaustive_budget}")
        seq_mass = 1.0 / n_seq
        for code in range(n_seq):
            for it0, t0 in enumerate(t0_values):
                t0_mass = 1.0 / t0_values.size
                for idx in np.ndindex((rj_values.size,) * len(dims)):
                    offs = {m: float(rj_values[idx[d]]) for d, m in enumerate(dims)}
                    mass = seq_mass * t0_mass * float(np.prod(rj_pmf[list(idx)]))
                    trace = evaluator.evaluate(code, float(t0), offs)
                    acc.add(trace, mass)
        return acc.density()

    if mode != "monte_carlo":
        raise ValueError(f"unknown assembly mode {mode!r}")
    if rng is None:
        raise ValueError("monte_carlo mode requires a seeded generator")
    codes = rng.integers(0, n_seq, size=n_traces)
    t0_idx = rng.integers(0, t0_values.size, size=n_traces)
    rj_idx = np.empty((n_traces, len(dims)), dtype=np.int64)
    for d in range(len(dims)):
        rj_idx[:, d] = rng.choice(rj_values.size, size=n_traces, p=rj_pmf)
    order = np.argsort(codes, kind="stable")
    mass = 1.0 / n_traces
    chunk = 2048
    for code in np.unique(codes):
        sel = order[codes[order] == code]
        for lo in range(0, sel.size, chunk):
            part = sel[lo:lo + chunk]
            t0s = t0_values[t0_idx[part]]
            offs = rj_values[rj_idx[part]]
            traces = evaluator.evaluate_batch(int(code), t0s, offs)
            acc.add_batch(traces, np.full(part.size, mass))
    return acc.density()


# ---------------------------------------------------------------------------
# transient-simulation oracle
# ---------------------------------------------------------------------------

def _solve_pj_times(nominal: np.ndarray, spec: JitterSpec) -> np.ndarray:
    """Edge times under continuously advancing PJ: t = t_nom + A sin(2 pi t / T_pj).

    Fixed-point iteration; the contraction factor 2 pi A / T_pj is small for
    any sane jitter spec.
    """
    if spec.a_pj == 0:
        return nominal.copy()
    t = nominal.astype(np.float64)
    for _ in range(8):
        t = nominal + spec.a_pj * np.sin(2.0 * math.pi * t / spec.t_pj)
    return t


def _truncated_gaussian(rng, sigma: float, bound: float, size: int) -> np.ndarray:
    out = rng.normal(0.0, sigma, size=size)
    bad = np.abs(out) > bound
    while np.any(bad):
        out[bad] = rng.normal(0.0, sigma, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def transient_eye(model: SystemModel, edges: EdgeTemplate, spec: JitterSpec,
                  T: float, delay: float, n_bits: int, rng,
                  bins: EyeBins, warmup_bits: int = 16) -> EyeDensity:
    """Brute-force eye: one long random bit stream with jittered source edges.

    PJ advances with absolute time (the exact implicit edge-time equation, not
    the bit-instant approximation); RJ is i.i.d. Gaussian truncated at the
    spec range.  The output folds into UI windows offset by the propagation
    delay.
    """
    if n_bits < 1000:
        raise ValueError("transient oracle needs at least 1000 bits")
    dt = edges.dt
    n_win = int(round(T / dt))
    ws = snap_to_grid(delay, dt)
    ws_idx_off = int(round(ws / dt))
    bits = rng.integers(0, 2, size=n_bits)

    lead = edges.settle_time + spec.max_offset + 16 * dt
    t_start = -math.ceil(lead / dt) * dt
    tail_bits = int(math.ceil((ws + edges.settle_time + spec.max_offset) / T)) + 1
    t_end = (n_bits + tail_bits) * T
    n = int(round((t_end - t_start) / dt)) + 1

    change = np.flatnonzero(np.diff(bits) != 0) + 1   # bit index k with an edge at k*T
    nominal = change * T
    times = _solve_pj_times(nominal, spec)
    if spec.sigma_rj > 0:
        times = times + _truncated_gaussian(rng, spec.sigma_rj,
                                            spec.rj_range * spec.sigma_rj, times.size)
    if times.size > 1 and np.any(np.diff(times) < 0.05 * T):
        raise EdgeOrderError("jitter brought adjacent stream edges closer than 0.05 UI")

    level = edges.v_high if bits[0] else edges.v_low
    samples = np.full(n, float(level))
    rise_dev = edges.rise.samples - edges.rise.samples[0]
    fall_dev = edges.fall.samples - edges.fall.samples[0]
    half = 8
    for k, t_e in zip(change, times):
        tpl = edges.rise if bits[k] else edges.fall
        dev = rise_dev if bits[k] else fall_dev
        pos0 = (t_start - t_e - tpl.t0) / dt
        # the contribution is exactly 0 before the kernel reach of the template
        # and exactly dev[-1] past it; only the transition zone needs resampling
        j_a = max(0, int(math.floor(-pos0)) - half)
        j_b = min(n, int(math.ceil(dev.size - 1 + half - pos0)) + 1)
        if j_a >= n:
            continue
        if j_b <= j_a:
            samples[j_a:] += dev[-1]
            continue
        samples[j_a:j_b] += resample_shifted(dev, pos0 + j_a, j_b - j_a)
        if j_b < n:
            samples[j_b:] += dev[-1]
    stim = Waveform(t_start, dt, samples)
    out = model.respond(stim)

    k0 = warmup_bits
    k1 = n_bits - 1
    start_idx = int(round((k0 * T - t_start) / dt)) + ws_idx_off
    n_windows = k1 - k0
    acc = DensityAccumulator(bins, n_win)
    view = out.samples[start_idx:start_idx + n_windows * n_win]
    windows = view.reshape(n_windows, n_win)
    chunk = 4096
    for lo in range(0, n_windows, chunk):
        part = windows[lo:lo + chunk]
        acc.add_batch(part, np.full(part.shape[0], 1.0))
    return acc.density()


# ---------------------------------------------------------------------------
# metrics and comparison
# ---------------------------------------------------------------------------

def _longest_circular_run(flags: np.ndarray) -> int:
    """Length of the longest circular run of True."""
    n = flags.size
    if flags.all():
        return n
    if not flags.any():
        return 0
    doubled = np.concatenate([flags, flags])
    best = run = 0
    for v in doubled:
        run = run + 1 if v else 0
        best = max(best, run)
    return min(best, n)


def eye_metrics(d: EyeDensity, mass_floor: float = 1e-9,
                threshold_voltage: float | None = None) -> EyeMetrics:
    """Opening of the eye: per-phase vertical run through the decision
    threshold, horizontal run along the threshold row.

    A density with no open cell at the threshold yields the closed-eye result
    (zero height and width) rather than an error.
    """
    grid = d.grid
    n_phase, n_volt = grid.shape
    bin_h = (d.v_max - d.v_min) / n_volt
    if threshold_voltage is None:
        threshold_voltage = 0.5 * (d.v_min + d.v_max)
    row = int(np.clip((threshold_voltage - d.v_min) / (d.v_max - d.v_min) * n_volt,
                      0, n_volt - 1))
    open_cells = grid <= mass_floor
    heights = np.zeros(n_phase, dtype=np.int64)
    for p in range(n_phase):
        col = open_cells[p]
        if not col[row]:
            continue
        lo = row
        while lo > 0 and col[lo - 1]:
            lo -= 1
        hi = row
        while hi < n_volt - 1 and col[hi + 1]:
            hi += 1
        heights[p] = hi - lo + 1
    best = int(np.argmax(heights))  # ties resolve to the earliest phase
    eye_height = float(heights[best]) * bin_h
    width_bins = _longest_circular_run(open_cells[:, row])
    eye_width = width_bins / n_phase
    center = (best + 0.5) / n_phase if heights[best] > 0 else 0.0
    if heights[best] == 0:
        eye_height = 0.0
        eye_width = 0.0
        center = 0.0
    return EyeMetrics(eye_height, min(eye_width, 1.0), center, float(threshold_voltage))


def compare_eyes(reference: EyeMetrics, candidate: EyeMetrics) -> ComparisonReport:
    """Signed relative errors, (candidate - reference) / reference."""
    rows = []
    for name, r, c in (("eye_height", reference.eye_height, candidate.eye_height),
                       ("eye_width", reference.eye_width, candidate.eye_width)):
        rel = (c - r) / r if r != 0 else None
        rows.append(ComparisonRow(name, r, c, rel))
    return ComparisonReport(tuple(rows))


def density_tv_distance(a: EyeDensity, b: EyeDensity) -> float:
    """Worst per-phase-column total-variation distance between two densities."""
    if a.grid.shape != b.grid.shape:
        raise ValueError("density grids differ in shape")
    return float(0.5 * np.abs(a.grid - b.grid).sum(axis=1).max())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def density_to_csv(d: EyeDensity) -> str:
    lines = ["phase_bin,voltage_bin,mass"]
    for p, v in zip(*np.nonzero(d.grid)):
        lines.append(f"{p},{v},{d.grid[p, v]!r}")
    return "\n".join(lines) + "\n"


def density_to_pgm(d: EyeDensity, mass_floor: float = 1e-9) -> bytes:
    """8-bit P5 grayscale, log-scaled, darkest cell = highest mass, top row =
    highest voltage."""
    scaled = np.log10(d.grid / mass_floor + 1.0)
    peak = scaled.max()
    if peak > 0:
        scaled = scaled / peak
    pix = 255 - np.rint(scaled * 255).astype(np.uint8)
    img = pix.T[::-1]   # rows = voltage, top = v_max
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    return header + img.tobytes()


def metrics_to_text(m: EyeMetrics) -> str:
    return (f"eye_height_v = {m.eye_height!r}\n"
            f"eye_width_ui = {m.eye_width!r}\n"
            f"center_phase_ui = {m.center_phase!r}\n"
            f"threshold_v = {m.threshold_voltage!r}\n")


def metrics_from_text(text: str) -> EyeMetrics:
    vals = {}
    for line in text.strip().splitlines():
        key, _, value = line.partition("=")
        vals[key.strip()] = float(value.strip())
    try:
        return EyeMetrics(vals["eye_height_v"], vals["eye_width_ui"],
                          vals["center_phase_ui"], vals["threshold_v"])
    except KeyError as exc:
        raise ValueError(f"metrics file missing key {exc}") from exc


def comparison_to_text(rep: ComparisonReport) -> str:
    lines = []
    for r in rep.rows:
        short = "height" if r.name == "eye_height" else "width"
        lines.append(f"ref_eye_{short} = {r.reference!r}")
        lines.append(f"cand_eye_{short} = {r.candidate!r}")
        rel = "undefined" if r.rel_err is None else repr(r.rel_err)
        lines.append(f"rel_err_{short} = {rel}")
    return "\n".join(lines) + "\n"
