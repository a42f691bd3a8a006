"""Session orchestration: recording persistence, workflow state machine, metrics."""

from .metrics import ValidationReport
from .orchestrator import Orchestrator, Phase, SessionState
from .recording import GuideEntry, Segment, SessionRecording, load_session, save_session

__all__ = [
    "GuideEntry", "Segment", "SessionRecording", "save_session", "load_session",
    "Orchestrator", "Phase", "SessionState", "ValidationReport",
]
