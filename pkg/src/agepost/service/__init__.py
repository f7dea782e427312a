"""HTTP annotation service: FastAPI app, task store, and event log."""

from .app import create_app
from .config import ServiceConfig
from .eventlog import CorruptLog, EventLog, LogEntry, scan_log
from .store import (
    DuplicateQuery,
    Exhausted,
    OutOfOrderReference,
    TaskClosed,
    TaskNotExhausted,
    TaskStore,
    UnknownReference,
    UnknownTask,
)
