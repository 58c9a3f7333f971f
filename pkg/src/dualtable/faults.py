"""Fault-injection hooks for crash-safety testing.

Stores and the catalog call :func:`fire` at named points around their
durability-critical writes. A test installs a hook that either lets the
call proceed (return ``None``), simulates a process kill (raise
:class:`InjectedCrash`), or asks for a torn write by returning the number
of body bytes to persist before dying. Production runs never install a
hook, so the calls are no-ops.
"""

from __future__ import annotations

from typing import Callable, Optional


class InjectedCrash(BaseException):
    """Simulated process death.

    Deliberately not a :class:`~dualtable.errors.DualTableError`: nothing in
    the engine may catch and "handle" a crash, it must unwind to the test.
    """

    def __init__(self, point: str):
        super().__init__(f"injected crash at {point}")
        self.point = point


Hook = Callable[[str], Optional[int]]

_hook: Hook | None = None


def install(hook: Hook | None) -> None:
    global _hook
    _hook = hook


def fire(point: str) -> int | None:
    """Returns None to proceed, or a byte budget for a torn write."""
    if _hook is None:
        return None
    return _hook(point)
