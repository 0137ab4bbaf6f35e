"""
flexsim Event Trace

Plain-text event log, one `time event_type entity ...` line per event.
"""

from pathlib import Path
from typing import Any, Union


class TraceWriter:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="utf-8")

    def write(self, time: float, event: str, entity: Any, *fields: Any) -> None:
        parts = [f"{time:.9g}", event, str(entity)]
        parts.extend(str(f) for f in fields)
        self._fh.write(" ".join(parts) + "\n")

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def read_trace(path: Union[str, Path]) -> list:
    """Parsed trace lines as (time, event, fields) tuples."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if parts:
            out.append((float(parts[0]), parts[1], parts[2:]))
    return out
