"""Terminal spinner and progress bar for integrations and probe loops."""

from __future__ import annotations

import sys
import threading
import time
from typing import TextIO

_DOTS = ("⠋", "⠙", "⠹", "⠸", "⠼", "⠴", "⠦", "⠧", "⠇", "⠏")
_CYAN = "\033[1;36m"
_BOLD = "\033[1m"
_RESET = "\033[0m"


def _is_tty(stream: TextIO) -> bool:
    isatty = getattr(stream, "isatty", None)
    return bool(isatty and isatty())


class Spinner:
    """Context-manager spinner that animates while a block executes.

    Nothing is drawn when the stream is not a terminal, so captured output
    and log files stay clean.

    Usage::

        with Spinner("Integrating to blow-up") as spinner:
            history = run(state, scenario, on_step=spinner.status)
    """

    def __init__(
        self, message: str = "Working", stream: TextIO | None = None, enabled: bool | None = None
    ) -> None:
        self._message = message
        self._detail = ""
        self._stream = stream or sys.stdout
        self._enabled = _is_tty(self._stream) if enabled is None else enabled
        self._running = False
        self._thread: threading.Thread | None = None
        self._lock = threading.Lock()

    @property
    def enabled(self) -> bool:
        return self._enabled

    def status(self, detail: str) -> None:
        """Replace the text shown after the message (e.g. the current time t)."""
        with self._lock:
            self._detail = detail

    def __enter__(self) -> Spinner:
        if not self._enabled:
            return self
        self._running = True
        self._thread = threading.Thread(target=self._animate, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *_args: object) -> None:
        if not self._enabled:
            return
        self._running = False
        if self._thread:
            self._thread.join()
        self._stream.write("\r\033[K")
        self._stream.flush()

    def _animate(self) -> None:
        idx = 0
        while self._running:
            d1 = _DOTS[idx % len(_DOTS)]
            d2 = _DOTS[(idx + 3) % len(_DOTS)]
            d3 = _DOTS[(idx + 6) % len(_DOTS)]
            with self._lock:
                detail = f" {self._detail}" if self._detail else ""
            self._stream.write(
                f"\r\033[K  {_CYAN}{d1} {d2} {d3}{_RESET}  {_BOLD}{self._message}{_RESET}{detail}"
            )
            self._stream.flush()
            idx += 1
            time.sleep(0.08)


class ProgressBar:
    """Minimal terminal progress bar with elapsed + ETA; silent off a terminal."""

    def __init__(
        self,
        total: int,
        label: str = "Probes",
        width: int = 28,
        stream: TextIO | None = None,
        enabled: bool | None = None,
    ) -> None:
        self._total = max(0, int(total))
        self._label = label
        self._width = max(10, int(width))
        self._stream = stream or sys.stdout
        self._enabled = _is_tty(self._stream) if enabled is None else enabled
        self._start = time.monotonic()
        self._last_len = 0

    def update(self, current: int, label: str | None = None) -> None:
        """Render or re-render the progress bar in place."""
        if self._total <= 0 or not self._enabled:
            return

        current = max(0, min(int(current), self._total))
        label = label or self._label

        ratio = current / self._total
        filled = int(self._width * ratio)
        bar = f"{'█' * filled}{'░' * (self._width - filled)}"

        elapsed = time.monotonic() - self._start
        eta_str = f"ETA {elapsed * (self._total - current) / current:.1f}s" if current else "ETA --"

        line = (
            f"\r  {_CYAN}{bar}{_RESET}  {_BOLD}{label}{_RESET} "
            f"{current}/{self._total} ({ratio * 100:>3.0f}%) | "
            f"{elapsed:.1f}s | {eta_str}"
        )
        pad = " " * max(0, self._last_len - len(line))
        self._stream.write(line + pad)
        self._stream.flush()
        self._last_len = len(line)

    def finish(self) -> None:
        """Render completion and move to the next line."""
        if self._total <= 0 or not self._enabled:
            return
        self.update(self._total)
        self._stream.write("\n")
        self._stream.flush()
