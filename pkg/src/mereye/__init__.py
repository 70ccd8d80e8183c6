"""Multiple-edge-response eye diagram estimation for jittered nonlinear links."""

from .waveform import (
    BitSequence,
    EdgeTemplate,
    JitterAssignment,
    JitterSpec,
    Waveform,
    build_stimulus,
    pj_offset,
    rj_pdf,
    window,
)
from .system import (
    DelayEstimate,
    DriverStage,
    LtiChannelModel,
    NonlinearLinkModel,
    estimate_delay,
    extract_edge_templates,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "BitSequence", "EdgeTemplate", "JitterAssignment", "JitterSpec", "Waveform",
    "build_stimulus", "pj_offset", "rj_pdf", "window",
    "DelayEstimate", "DriverStage", "LtiChannelModel", "NonlinearLinkModel",
    "estimate_delay", "extract_edge_templates", "simulate",
    "__version__",
]
