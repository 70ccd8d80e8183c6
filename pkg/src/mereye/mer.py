"""MER scans under jitter, cutoff-frequency detection, minimal sampling plans,
and band-limited reconstruction of the full response grids.

One response window is recorded per grid point of a jitter axis (the PJ phase,
or one per-index RJ offset).  Slicing the resulting surface at each window
time sample gives a curve whose spectrum decides the axis cutoff frequency;
sampling at three times the worst cutoff lets the full grid be restored by
trigonometric interpolation (periodic PJ axis) or windowed-sinc interpolation
with mirrored edge extension (aperiodic RJ axes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, WindowRangeError
from .system import SystemModel, snap_to_grid, windowed_response
from .waveform import (
    GRID_SNAP,
    SINC_TAPS,
    BitSequence,
    EdgeTemplate,
    JitterAssignment,
    JitterSpec,
    Waveform,
    check_edge_spacing,
    edge_events,
    fractional_delay_kernel,
    pj_offset,
    resample_shifted,
)

PJ_AXIS = "pj"


# ---------------------------------------------------------------------------
# scan / plan / tensor containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MerScan:
    """Response windows recorded along one jitter axis."""

    sequence: BitSequence
    axis: object                 # PJ_AXIS or an int jitter index
    grid: np.ndarray
    responses: np.ndarray        # [len(grid), window samples]
    window_start: float
    dt: float
    T: float

    def __post_init__(self):
        if self.responses.shape[0] != self.grid.size:
            raise ValueError("one response row required per grid value")
        steps = np.diff(self.grid)
        if steps.size and not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("axis grid must be uniform")

    @property
    def periodic(self) -> bool:
        return self.axis == PJ_AXIS

    @property
    def axis_step(self) -> float:
        if self.grid.size < 2:
            raise ValueError("axis step undefined for a single-point grid")
        return float(self.grid[1] - self.grid[0])


@dataclass(frozen=True)
class SamplingPlan:
    """Per-axis minimal sampling: cutoff, sampling frequency, and point count."""

    axis: object
    f_cut_max: float
    f_s: float
    t_s: float
    num: int
    axis_span: float

    def __post_init__(self):
        if self.num < 1:
            raise ValueError("num must be >= 1")


@dataclass(frozen=True, eq=False)
class MerTensor:
    """Response windows on the Cartesian product of per-index RJ grids.

    Axis order is fixed as jitter index -1, 0, ..., m_j; the last array axis
    holds the window samples.
    """

    sequence: BitSequence
    t0: float
    jitter_indexes: tuple
    grids: tuple
    data: np.ndarray
    window_start: float
    dt: float
    T: float

    def __post_init__(self):
        expect = tuple(g.size for g in self.grids) + (self.data.shape[-1],)
        if self.data.shape != expect:
            raise ValueError(f"tensor shape {self.data.shape} != grids {expect}")
        if tuple(self.jitter_indexes) != tuple(range(-1, len(self.grids) - 1)):
            raise ValueError("jitter indexes must run -1, 0, ..., m_j")


# ---------------------------------------------------------------------------
# cutoff detection
# ---------------------------------------------------------------------------

def _amplitude_spectrum(curve: np.ndarray, periodic: bool) -> np.ndarray:
    """One-sided amplitude spectrum; aperiodic curves are de-meaned and get a
    DFT-even Hann window with coherent-gain correction, so leakage from the
    large standing level cannot masquerade as axis content."""
    n = curve.size
    if periodic:
        x = np.fft.rfft(curve)
        norm = n
    else:
        mean = curve.mean()
        win = 0.5 - 0.5 * np.cos(2.0 * math.pi * np.arange(n) / n)
        x = np.fft.rfft((curve - mean) * win)
        norm = win.sum()
        x[0] += mean * norm  # restore the DC bin for reporting
    mag = np.abs(x) / norm
    if n % 2 == 0:
        mag[1:-1] *= 2.0
    else:
        mag[1:] *= 2.0
    return mag


def cutoff_frequency(curve, threshold_frac: float, axis_step: float,
                     amplitude: float, periodic: bool = True) -> float:
    """Highest spectral bin of the curve at or above threshold_frac*amplitude.

    Returns 0 when only the DC bin qualifies.
    """
    curve = np.asarray(curve, dtype=np.float64)
    if curve.size < 4:
        raise ValueError("curve must hold at least 4 samples")
    if not 0 < threshold_frac < 1:
        raise ValueError("threshold_frac must be in (0, 1)")
    mag = _amplitude_spectrum(curve, periodic)
    freqs = np.fft.rfftfreq(curve.size, d=axis_step)
    hits = np.flatnonzero(mag[1:] >= threshold_frac * amplitude)
    if hits.size == 0:
        return 0.0
    return float(freqs[1:][hits[-1]])


def max_cutoff(scan: MerScan, threshold_frac: float, amplitude: float) -> float:
    """Worst cutoff over every window-time slice of the scan surface."""
    if scan.responses.size == 0:
        raise ValueError("scan is empty")
    step = scan.axis_step
    return max(
        cutoff_frequency(scan.responses[:, j], threshold_frac, step, amplitude,
                         periodic=scan.periodic)
        for j in range(scan.responses.shape[1])
    )


def sampling_plan(f_cut_max: float, axis_period: float, oversample: float = 3.0,
                  axis: object = PJ_AXIS) -> SamplingPlan:
    """Minimal per-axis sampling: f_s = oversample*f_cut, num = ceil(span/T_s)."""
    if f_cut_max < 0:
        raise ValueError("f_cut_max must be >= 0")
    if axis_period <= 0:
        raise ValueError("axis_period must be positive")
    if oversample <= 2.0:
        raise ValueError("oversample must exceed the Nyquist factor 2")
    if f_cut_max == 0:
        return SamplingPlan(axis, 0.0, 0.0, math.inf, 1, axis_period)
    f_s = oversample * f_cut_max
    t_s = 1.0 / f_s
    num = max(1, math.ceil(axis_period / t_s - 1e-12))
    return SamplingPlan(axis, f_cut_max, f_s, t_s, num, axis_period)


# ---------------------------------------------------------------------------
# reconstruction kernels
# ---------------------------------------------------------------------------

def _periodic_weight_matrix(targets: np.ndarray, coarse: np.ndarray,
                            period: float) -> np.ndarray:
    """Trigonometric interpolation weights from N uniform samples of a period."""
    n = coarse.size
    theta_t = 2.0 * math.pi * (targets - coarse[0]) / period
    theta_k = 2.0 * math.pi * (coarse - coarse[0]) / period
    freqs = np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(int)
    w = np.empty((targets.size, n))
    for i, th in enumerate(theta_t):
        d = th - theta_k
        wrapped = np.abs((d + math.pi) % (2.0 * math.pi) - math.pi)
        j = int(np.argmin(wrapped))
        if wrapped[j] < 1e-9 / n:
            row = np.zeros(n)
            row[j] = 1.0
            w[i] = row
            continue
        basis = np.exp(1j * np.outer(freqs, d))  # [n_freq, n_samples]
        if n % 2 == 0:
            ny = np.flatnonzero(freqs == -(n // 2))[0]
            basis[ny] = np.cos((n // 2) * d)
        w[i] = basis.sum(axis=0).real / n
    return w


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Mirror indexes about the end points (period 2n-2)."""
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.abs(idx) % period
    return np.where(idx >= n, period - idx, idx)


def _endpoint_bridge_matrix(positions: np.ndarray, n: int) -> np.ndarray:
    """Cubic Hermite bridge through the endpoint values and one-sided slopes.

    Subtracting the bridge leaves rows with (to finite-difference accuracy)
    zero end slope, so their symmetric extension is free of derivative kinks.
    Returns the [M, N] evaluation matrix of the bridge; it is linear in the
    row data.
    """
    span = n - 1.0
    u = positions / span
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    p = np.zeros((positions.size, n))
    if n == 2:
        p[:, 0] = 1 - u
        p[:, 1] = u
        return p
    # one-sided three-point slope stencils (per unit sample step)
    p[:, 0] += h00 + h10 * span * (-1.5)
    p[:, 1] += h10 * span * 2.0
    p[:, 2] += h10 * span * (-0.5)
    p[:, -1] += h01 + h11 * span * 1.5
    p[:, -2] += h11 * span * (-2.0)
    p[:, -3] += h11 * span * 0.5
    return p


def _aperiodic_weight_matrix(targets: np.ndarray, coarse: np.ndarray) -> np.ndarray:
    """Band-limited interpolation weights on the symmetric edge extension.

    An endpoint cubic bridge is removed first (so the mirrored sequence has no
    derivative kink at the span ends), the slope-free residual is interpolated
    with the periodized-sinc kernel on the even extension of period 2(N-1),
    and the bridge is added back exactly.
    """
    n = coarse.size
    h = coarse[1] - coarse[0]
    lo = coarse[0] - GRID_SNAP * abs(h)
    hi = coarse[-1] + GRID_SNAP * abs(h)
    if np.any(targets < lo) or np.any(targets > hi):
        raise WindowRangeError("target grid outside sampled span")
    period = 2 * (n - 1)
    positions = (targets - coarse[0]) / h
    w_ext = _periodic_weight_matrix(positions, np.arange(period, dtype=np.float64),
                                    float(period))
    w_trig = np.zeros((targets.size, n))
    for j in range(period):
        w_trig[:, _reflect_index(np.array([j]), n)[0]] += w_ext[:, j]
    bridge = _endpoint_bridge_matrix(positions, n)
    bridge_at_coarse = _endpoint_bridge_matrix(np.arange(n, dtype=np.float64), n)
    return w_trig @ (np.eye(n) - bridge_at_coarse) + bridge


def reconstruct_axis(rows: np.ndarray, coarse_grid: np.ndarray,
                     target_grid: np.ndarray, periodic: bool,
                     period: float | None = None) -> np.ndarray:
    """Band-limited interpolation of sample rows onto a denser axis grid.

    A single row broadcasts unchanged; coincident grids return an exact copy.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    coarse = np.asarray(coarse_grid, dtype=np.float64)
    target = np.asarray(target_grid, dtype=np.float64)
    if rows.shape[0] != coarse.size:
        raise ValueError("one row per coarse grid point required")
    if coarse.size == 1:
        return np.repeat(rows, target.size, axis=0)
    if coarse.size == target.size and np.allclose(coarse, target, rtol=0.0,
                                                  atol=GRID_SNAP * abs(coarse[1] - coarse[0])):
        return rows.copy()
    if periodic:
        if period is None:
            raise ValueError("period required for the periodic axis")
        wmat = _periodic_weight_matrix(target, coarse, period)
    else:
        wmat = _aperiodic_weight_matrix(target, coarse)
    return wmat @ rows


# ---------------------------------------------------------------------------
# scans and tensors
# ---------------------------------------------------------------------------

def _mer_window(model: SystemModel, seq: BitSequence, edges: EdgeTemplate,
                spec: JitterSpec, m_j: int, delay: float, t0: float,
                rj_offsets) -> np.ndarray:
    """One windowed response with PJ at phase t0 plus per-index RJ offsets."""
    offsets = {m: pj_offset(m, spec, t0, seq.T) + float(rj_offsets.get(m, 0.0))
               for m in range(-1, m_j + 1)}
    ws = snap_to_grid(delay, edges.dt)
    t_start = -(seq.oldest_index + 1) * seq.T - edges.settle_time
    return windowed_response(model, seq, edges, offsets, t_start, ws, seq.T)


def pj_scan(model: SystemModel, seq: BitSequence, edges: EdgeTemplate,
            spec: JitterSpec, m_j: int, delay: float,
            grid: np.ndarray | None = None) -> MerScan:
    """Windows over the PJ phase grid with all RJ offsets at zero."""
    if spec.a_pj <= 0:
        raise ValueError("pj_scan requires a_pj > 0; use a single-point plan instead")
    phases = spec.t0_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    rows = np.stack([_mer_window(model, seq, edges, spec, m_j, delay, t0, {})
                     for t0 in phases])
    return MerScan(seq, PJ_AXIS, phases, rows, snap_to_grid(delay, edges.dt),
                   edges.dt, seq.T)


def rj_scan(model: SystemModel, seq: BitSequence, edges: EdgeTemplate,
            spec: JitterSpec, m_j: int, delay: float, t0: float, k: int,
            fixed_offsets=None, grid: np.ndarray | None = None) -> MerScan:
    """Windows sweeping the RJ offset at index k, other indexes held fixed."""
    if not -1 <= k <= m_j:
        raise ValueError(f"jitter index {k} outside -1..{m_j}")
    offs = dict(fixed_offsets or {})
    values = spec.rj_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    rows = []
    for v in values:
        offs[k] = float(v)
        rows.append(_mer_window(model, seq, edges, spec, m_j, delay, t0, offs))
    return MerScan(seq, k, values, np.stack(rows), snap_to_grid(delay, edges.dt),
                   edges.dt, seq.T)


def pj_coarse_phases(spec: JitterSpec, num: int) -> np.ndarray:
    """num uniform PJ phases covering (0, t_pj]."""
    return (np.arange(num) + 1) * (spec.t_pj / num)


def rj_coarse_grid(spec: JitterSpec, num: int) -> np.ndarray:
    """num uniform RJ offsets spanning the full offset grid (single point at 0)."""
    if num == 1:
        return np.zeros(1)
    full = spec.rj_grid()
    return np.linspace(full[0], full[-1], num)


def build_mer_tensor(model: SystemModel, seq: BitSequence, edges: EdgeTemplate,
                     spec: JitterSpec, m_j: int, delay: float, t0: float,
                     plans, budget: int = 10000) -> MerTensor:
    """Simulate the coarse Cartesian RJ grid for one (sequence, T0) pair."""
    dims = tuple(range(-1, m_j + 1))
    grids = tuple(rj_coarse_grid(spec, plans[m].num) for m in dims)
    shape = tuple(g.size for g in grids)
    total = int(np.prod(shape))
    if total > budget:
        raise BudgetExceededError(
            f"coarse tensor needs {total} simulations, budget is {budget}")
    n_win = int(round(seq.T / edges.dt))
    data = np.empty(shape + (n_win,))
    for idx in np.ndindex(shape):
        offs = {m: float(grids[d][idx[d]]) for d, m in enumerate(dims)}
        data[idx] = _mer_window(model, seq, edges, spec, m_j, delay, t0, offs)
    return MerTensor(seq, t0, dims, grids, data, snap_to_grid(delay, edges.dt),
                     edges.dt, seq.T)


def reconstruct_tensor(coarse: MerTensor, spec: JitterSpec,
                       reverse_order: bool = False) -> MerTensor:
    """Expand a coarse tensor to the full RJ grid, one dimension at a time."""
    target = spec.rj_grid()
    data = coarse.data
    order = range(len(coarse.grids))
    if reverse_order:
        order = reversed(list(order))
    grids = list(coarse.grids)
    for ax in order:
        moved = np.moveaxis(data, ax, 0)
        lead = moved.shape[0]
        flat = moved.reshape(lead, -1)
        rec = reconstruct_axis(flat, grids[ax], target, periodic=False)
        data = np.moveaxis(rec.reshape((target.size,) + moved.shape[1:]), 0, ax)
        grids[ax] = target
    return MerTensor(coarse.sequence, coarse.t0, coarse.jitter_indexes,
                     tuple(grids), data, coarse.window_start, coarse.dt, coarse.T)


# ---------------------------------------------------------------------------
# continuous-parameter evaluation without materializing full tensors
# ---------------------------------------------------------------------------

class _SequenceState:
    """Coarse response block of one sequence: [pj phases, *active RJ grids, window]."""

    __slots__ = ("seq", "pj_active", "pj_phases", "dim_active", "dim_grids", "data")

    def __init__(self, seq, pj_active, pj_phases, dim_active, dim_grids, data):
        self.seq = seq
        self.pj_active = pj_active
        self.pj_phases = pj_phases
        self.dim_active = dim_active
        self.dim_grids = dim_grids
        self.data = data


class MerEvaluator:
    """Evaluates response windows at arbitrary in-range jitter assignments.

    Coarse blocks are simulated lazily per sequence (axes where the sequence
    has no transition collapse to a single sample, since the response is
    constant along them) and queried with the same interpolation kernels used
    for full-grid reconstruction.
    """

    def __init__(self, model: SystemModel, edges: EdgeTemplate, spec: JitterSpec,
                 m_b: int, m_j: int, plans, delay: float, T: float,
                 cache_states: int = 4, batch: int = 512):
        self.model = model
        self.edges = edges
        self.spec = spec
        self.m_b = m_b
        self.m_j = m_j
        self.plans = plans
        self.delay = delay
        self.T = T
        self.dims = tuple(range(-1, m_j + 1))
        self.window_start = snap_to_grid(delay, edges.dt)
        self.n_window = int(round(T / edges.dt))
        self._cache: dict = {}
        self._cache_states = cache_states
        self._batch = batch

    # -- state construction -------------------------------------------------

    def _edge_dims(self, seq: BitSequence) -> dict:
        present = {}
        for m in self.dims:
            present[m] = seq.bit(m) != (
                seq.bit(m + 1) if m + 1 <= seq.oldest_index
                else (1 if abs(seq.level - self.edges.v_high) < abs(seq.level - self.edges.v_low) else 0))
        return present

    def sequence_state(self, code: int) -> _SequenceState:
        state = self._cache.get(code)
        if state is not None:
            return state
        seq = BitSequence.from_int(code, self.m_b, self.T,
                                   self.edges.v_low, self.edges.v_high)
        present = self._edge_dims(seq)
        pj_plan_num = self.plans[PJ_AXIS].num
        pj_active = (self.spec.a_pj > 0 and pj_plan_num > 1
                     and any(present[m] for m in self.dims))
        pj_phases = (pj_coarse_phases(self.spec, pj_plan_num) if pj_active
                     else np.array([self.spec.t_pj]))
        dim_active = []
        dim_grids = []
        for m in self.dims:
            active = (self.spec.sigma_rj > 0 and self.plans[m].num > 1 and present[m])
            dim_active.append(active)
            dim_grids.append(rj_coarse_grid(self.spec, self.plans[m].num)
                             if active else np.zeros(1))
        data = self._simulate_block(seq, pj_phases, dim_grids)
        state = _SequenceState(seq, pj_active, pj_phases, tuple(dim_active),
                               tuple(dim_grids), data)
        if len(self._cache) >= self._cache_states:
            self._cache.pop(next(iter(self._cache)))
        self._cache[code] = state
        return state

    def _simulate_block(self, seq: BitSequence, pj_phases, dim_grids) -> np.ndarray:
        edges = self.edges
        dt = edges.dt
        t_start = -(seq.oldest_index + 1) * seq.T - edges.settle_time
        t0_grid = math.floor(t_start / dt + GRID_SNAP) * dt
        t_end = self.window_start + seq.T
        n = int(round((t_end - t0_grid) / dt)) + 1
        k0 = int(round((self.window_start - t0_grid) / dt))

        events = edge_events(seq, edges, None)
        base = np.full(n, seq.level)
        jitter_events = {}
        for ev in events:
            if ev.index <= self.m_j:
                jitter_events[ev.index] = ev
            else:
                tpl = edges.rise if ev.rising else edges.fall
                dev = tpl.samples - tpl.samples[0]
                base += resample_shifted(dev, (t0_grid - ev.t_actual - tpl.t0) / dt, n)

        shape = (pj_phases.size,) + tuple(g.size for g in dim_grids)
        # per (phase, dim, grid point) edge contribution, full stimulus length
        contribs = {}
        for p, t0 in enumerate(pj_phases):
            for d, m in enumerate(self.dims):
                ev = jitter_events.get(m)
                if ev is None:
                    continue
                tpl = edges.rise if ev.rising else edges.fall
                dev = tpl.samples - tpl.samples[0]
                rows = np.empty((dim_grids[d].size, n))
                for gi, off in enumerate(dim_grids[d]):
                    t_actual = ev.t_nominal + pj_offset(m, self.spec, t0, seq.T) + off
                    rows[gi] = resample_shifted(dev, (t0_grid - t_actual - tpl.t0) / dt, n)
                contribs[(p, m)] = rows

        out = np.empty(shape + (self.n_window,))
        flat_idx = list(np.ndindex(shape[1:]))
        for p in range(pj_phases.size):
            # edge-time sanity once per phase at the extreme grid corners
            for corner in (0, -1):
                offs = {m: pj_offset(m, self.spec, pj_phases[p], seq.T)
                        + float(dim_grids[d][corner])
                        for d, m in enumerate(self.dims)}
                check_edge_spacing(edge_events(seq, edges, offs), seq.T)
            for lo in range(0, len(flat_idx), self._batch):
                chunk = flat_idx[lo:lo + self._batch]
                stim = np.repeat(base[None, :], len(chunk), axis=0)
                # deepest jittered index first to mirror single-run synthesis order
                for d in range(len(self.dims) - 1, -1, -1):
                    m = self.dims[d]
                    rows = contribs.get((p, m))
                    if rows is None:
                        continue
                    sel = np.fromiter((idx[d] for idx in chunk), dtype=np.intp,
                                      count=len(chunk))
                    stim += rows[sel]
                resp = self.model.respond_batch(dt, stim)
                win = resp[:, k0:k0 + self.n_window]
                for row, idx in zip(win, chunk):
                    out[(p,) + idx] = row
        return out

    # -- queries -------------------------------------------------------------

    def _weights(self, state: _SequenceState, t0: float, rj_offsets) -> list:
        spec = self.spec
        if not 0 < t0 <= spec.t_pj + GRID_SNAP * spec.t_pj:
            raise WindowRangeError(f"t0={t0} outside (0, {spec.t_pj}]")
        weights = []
        if state.pj_active:
            weights.append(_periodic_weight_matrix(
                np.array([t0]), state.pj_phases, spec.t_pj)[0])
        else:
            weights.append(np.ones(1))
        for d, m in enumerate(self.dims):
            if state.dim_active[d]:
                off = float(rj_offsets.get(m, 0.0))
                weights.append(_aperiodic_weight_matrix(
                    np.array([off]), state.dim_grids[d])[0])
            else:
                weights.append(np.ones(1))
        return weights

    def evaluate(self, code: int, t0: float, rj_offsets) -> np.ndarray:
        """Window samples at one (sequence, T0, RJ offsets) assignment."""
        state = self.sequence_state(code)
        block = state.data
        for w in self._weights(state, t0, rj_offsets):
            block = np.tensordot(w, block, axes=(0, 0))
        return block

    def evaluate_batch(self, code: int, t0s: np.ndarray, offs: np.ndarray) -> np.ndarray:
        """Vectorized evaluate over n assignments; offs is [n, m_j + 2] ordered
        by jitter index -1, 0, ..., m_j."""
        state = self.sequence_state(code)
        n = t0s.size
        if state.pj_active:
            wpj = _periodic_weight_matrix(t0s, state.pj_phases, self.spec.t_pj)
        else:
            wpj = np.ones((n, 1))
        block = np.einsum("qa,a...->q...", wpj, state.data)
        for d in range(len(self.dims)):
            if state.dim_active[d]:
                wd = _aperiodic_weight_matrix(offs[:, d], state.dim_grids[d])
            else:
                wd = np.ones((n, 1))
            block = np.einsum("qa,qa...->q...", wd, block)
        return block


def mer_evaluate(evaluator: MerEvaluator, seq_code: int,
                 jit: JitterAssignment) -> Waveform:
    """Window waveform at an arbitrary in-range jitter assignment."""
    row = evaluator.evaluate(seq_code, jit.t0, jit.rj_offsets)
    return Waveform(evaluator.window_start, evaluator.edges.dt, row)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def plans_to_csv(plans: dict) -> str:
    """axis,f_cut_hz,f_s_hz,t_s,num rows; PJ first, then RJ indexes descending."""
    keys = sorted(plans.keys(), key=lambda a: (0, 0) if a == PJ_AXIS else (1, -a))
    lines = ["axis,f_cut_hz,f_s_hz,t_s,num"]
    for key in keys:
        p = plans[key]
        axis = PJ_AXIS if key == PJ_AXIS else f"rj[{key}]"
        lines.append(f"{axis},{p.f_cut_max!r},{p.f_s!r},{p.t_s!r},{p.num}")
    return "\n".join(lines) + "\n"


def scan_to_csv(scan: MerScan) -> str:
    """axis_value followed by the window samples, one row per grid point."""
    lines = ["axis_value," + ",".join(f"s{j}" for j in range(scan.responses.shape[1]))]
    for value, row in zip(scan.grid, scan.responses):
        lines.append(f"{value!r}," + ",".join(repr(v) for v in row))
    return "\n".join(lines) + "\n"
