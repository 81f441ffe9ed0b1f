"""Shared record of acceptance outcomes, printed by the terminal summary hook."""

from __future__ import annotations

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str = "") -> bool:
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok
