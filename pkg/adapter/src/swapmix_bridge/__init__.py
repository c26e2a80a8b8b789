"""Standalone adapter for answering swap-perturbation job directories."""

from .runner import FAILURE_ANSWER, AnswerFn, BridgeError, BridgeJob, load_job, run_bridge
from .smfx import MAGIC, VERSION, SmfxError, read_smfx, write_smfx

__version__ = "0.1.0"

__all__ = [
    "AnswerFn",
    "BridgeError",
    "BridgeJob",
    "FAILURE_ANSWER",
    "MAGIC",
    "SmfxError",
    "VERSION",
    "load_job",
    "read_smfx",
    "run_bridge",
    "write_smfx",
    "__version__",
]
