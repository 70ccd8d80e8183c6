"""Minimum required orders of bit effect and jitter effect.

The bit-effect order is the deepest index whose 0/1 flip still moves the
recorded response window by at least the threshold; the jitter-effect order is
the deepest index whose edge displacement does.  Both scans sweep tail
sequences (exhaustively while small, sampled otherwise), track the upper/lower
envelope of the difference waveforms, and stop after two consecutive
sub-threshold indexes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrderNotConvergedError
from .system import SystemModel, snap_to_grid, windowed_response
from .waveform import BitSequence, EdgeTemplate, JitterSpec, Waveform


@dataclass(frozen=True)
class OrderProbe:
    """Envelope distance measured while probing one index."""

    m: int
    max_distance: float
    n_sequences: int


@dataclass(frozen=True)
class OrderResult:
    order: int
    threshold: float
    probes: tuple

    def distances(self) -> list:
        return [(p.m, p.max_distance) for p in self.probes]

    def rows(self) -> list:
        """(m, max_distance_volts, n_sequences) rows for the CSV report."""
        return [(p.m, p.max_distance, p.n_sequences) for p in self.probes]


@dataclass(frozen=True)
class ResponseRequirement:
    """Index bookkeeping for the responses an eye assembly must cover."""

    m_b: int
    m_j: int
    pj_grid_mer_count: int
    rj_tensor_entries: int

    @property
    def bit_indexes(self) -> tuple:
        return tuple(range(self.m_b, -2, -1))

    @property
    def jitter_indexes(self) -> tuple:
        return tuple(range(self.m_j, -2, -1))

    @property
    def n_sequences(self) -> int:
        return 1 << (self.m_b + 2)


def required_responses(m_b: int, m_j: int, spec: JitterSpec) -> ResponseRequirement:
    """Table-style requirement: bits m_b..-1, jitter dimensions m_j..-1."""
    if m_b < 0 or m_j < 0:
        raise ValueError("orders must be >= 0")
    if m_j > m_b:
        raise ValueError(f"jitter-effect order {m_j} exceeds bit-effect order {m_b}")
    return ResponseRequirement(
        m_b=m_b,
        m_j=m_j,
        pj_grid_mer_count=(1 << (m_b + 2)) * spec.t0_steps,
        rj_tensor_entries=spec.rj_points ** (m_j + 2),
    )


# ---------------------------------------------------------------------------
# probing machinery
# ---------------------------------------------------------------------------

def _rail(bit: int, edges: EdgeTemplate) -> float:
    return edges.v_high if bit else edges.v_low


def _tail_bits(code: int, n: int) -> tuple:
    """Oldest-first bits of ``code``; bit 0 of the code is the newest bit."""
    return tuple((code >> (n - 1 - k)) & 1 for k in range(n))


def _probe_window(model: SystemModel, edges: EdgeTemplate, delay: float,
                  seq: BitSequence, offsets) -> np.ndarray:
    ws = snap_to_grid(delay, edges.dt)
    t_start = -(seq.oldest_index + 1) * seq.T - edges.settle_time
    return windowed_response(model, seq, edges, offsets, t_start, ws, seq.T)


def be_diff(model: SystemModel, edges: EdgeTemplate, delay: float, T: float,
            seq_tail, m: int) -> Waveform:
    """Windowed response difference between the two values of bit ``m``.

    ``seq_tail`` holds bits m-1 .. 0, oldest first.  Each branch starts
    settled at its own bit-m level, so the flip carries both the level history
    and the possible transition into bit m-1.
    """
    if m < 1:
        raise ValueError("bit-effect probes need m >= 1")
    tail = tuple(int(b) for b in seq_tail)
    if len(tail) != m:
        raise ValueError(f"tail must hold {m} bits for index m={m}")
    rows = []
    for bm in (0, 1):
        seq = BitSequence((bm,) + tail, T, _rail(bm, edges), newest_index=0)
        rows.append(_probe_window(model, edges, delay, seq, None))
    ws = snap_to_grid(delay, edges.dt)
    return Waveform(ws, edges.dt, rows[0] - rows[1])


def je_diff(model: SystemModel, edges: EdgeTemplate, delay: float, T: float,
            seq_bits, m: int, t_x: float) -> Waveform:
    """Windowed response difference when only the edge into bit ``m`` shifts by t_x.

    ``seq_bits`` holds bits m+1 .. 0, oldest first, with a forced transition
    between the first two bits.
    """
    bits = tuple(int(b) for b in seq_bits)
    if len(bits) != m + 2:
        raise ValueError(f"sequence must hold {m + 2} bits for index m={m}")
    if bits[0] == bits[1]:
        raise ValueError("jitter probe needs a transition into bit m")
    seq = BitSequence(bits, T, _rail(bits[0], edges), newest_index=0)
    shifted = _probe_window(model, edges, delay, seq, {m: t_x})
    base = _probe_window(model, edges, delay, seq, None)
    ws = snap_to_grid(delay, edges.dt)
    return Waveform(ws, edges.dt, shifted - base)


def _scan_orders(probe_one_m, threshold: float, max_m: int) -> OrderResult:
    """Shared stop rule: two consecutive sub-threshold indexes or max_m."""
    probes = []
    below = 0
    for m in range(1, max_m + 1):
        dist, n_seqs = probe_one_m(m)
        probes.append(OrderProbe(m, float(dist), n_seqs))
        if dist < threshold:
            below += 1
            if below >= 2:
                break
        else:
            below = 0
    if probes and probes[-1].m == max_m and probes[-1].max_distance >= threshold:
        raise OrderNotConvergedError(
            f"distance {probes[-1].max_distance:.3g} still >= threshold "
            f"{threshold:.3g} at max order {max_m}",
            [p.m for p in probes], [p.max_distance for p in probes],
            [p.n_sequences for p in probes])
    order = 0
    for p in probes:
        if p.max_distance >= threshold:
            order = p.m
    return OrderResult(order=order, threshold=threshold, probes=tuple(probes))


def _sample_codes(n_bits: int, limit: int, rng: np.random.Generator) -> np.ndarray:
    total = 1 << n_bits
    if total <= limit:
        return np.arange(total)
    if total <= (1 << 22):
        return np.sort(rng.choice(total, size=limit, replace=False))
    return np.sort(rng.integers(0, total, size=limit))


def be_order(model: SystemModel, edges: EdgeTemplate, delay: float, T: float,
             threshold_frac: float, max_m: int, max_seqs_per_m: int,
             rng_seed) -> OrderResult:
    """Bit-effect order at ``threshold_frac`` of the signal amplitude.

    The per-index distance is the largest time-pointwise gap of the envelope
    of all collected difference waveforms; the zero waveform is part of the
    envelope so a tail-independent shift still registers.
    """
    if not 0 < threshold_frac < 1:
        raise ValueError("threshold_frac must be in (0, 1)")
    if max_m < 1:
        raise ValueError("max_m must be >= 1")
    rng = np.random.default_rng(rng_seed)
    threshold = threshold_frac * edges.swing

    def probe(m: int):
        codes = _sample_codes(m, max_seqs_per_m, rng)
        upper = None
        lower = None
        for code in codes:
            diff = be_diff(model, edges, delay, T, _tail_bits(int(code), m), m).samples
            if upper is None:
                upper = np.maximum(diff, 0.0)
                lower = np.minimum(diff, 0.0)
            else:
                np.maximum(upper, diff, out=upper)
                np.minimum(lower, diff, out=lower)
        return float(np.max(upper - lower)), len(codes)

    return _scan_orders(probe, threshold, max_m)


def je_order(model: SystemModel, edges: EdgeTemplate, delay: float, T: float,
             spec: JitterSpec, threshold_frac: float, max_m: int,
             seqs_and_tx_budget: int, rng_seed, tx_points: int = 21) -> OrderResult:
    """Jitter-effect order: sweep the displaced edge over [-max, +max] offsets."""
    if not 0 < threshold_frac < 1:
        raise ValueError("threshold_frac must be in (0, 1)")
    t_lim = spec.max_offset
    threshold = threshold_frac * edges.swing
    if t_lim == 0:
        return OrderResult(order=0, threshold=threshold, probes=())
    if tx_points < 2:
        raise ValueError("tx_points must be >= 2")
    rng = np.random.default_rng(rng_seed)
    tx_grid = np.linspace(-t_lim, t_lim, tx_points)

    def probe(m: int):
        n_seqs = max(1, min(seqs_and_tx_budget // tx_points, 1 << (m + 1)))
        codes = _sample_codes(m + 1, n_seqs, rng)
        upper = None
        lower = None
        for code in codes:
            free = _tail_bits(int(code), m + 1)  # bits m .. 0
            bits = (1 - free[0],) + free
            seq = BitSequence(bits, T, _rail(bits[0], edges), newest_index=0)
            base = _probe_window(model, edges, delay, seq, None)
            for t_x in tx_grid:
                if t_x == 0.0:
                    continue
                diff = _probe_window(model, edges, delay, seq, {m: float(t_x)}) - base
                if upper is None:
                    upper = np.maximum(diff, 0.0)
                    lower = np.minimum(diff, 0.0)
                else:
                    np.maximum(upper, diff, out=upper)
                    np.minimum(lower, diff, out=lower)
        if upper is None:
            return 0.0, len(codes)
        return float(np.max(upper - lower)), len(codes)

    return _scan_orders(probe, threshold, max_m)
