"""Bit energy of a link as a function of its length, and floorplan distances."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graph import Acg


@dataclass(frozen=True)
class EnergyModel:
    """Linear bit-energy model ``e_router + e_wire * length``.

    ``e_router`` is charged once per traversed link (switch and buffer),
    ``e_wire`` per millimetre of wire.  ``remainder_penalty`` scales the cost
    of ACG edges left to dedicated point-to-point links.
    """

    e_router: float = 1.0  # pJ/bit per hop
    e_wire: float = 0.0  # pJ/(bit*mm)
    default_link_mm: float = 1.0
    remainder_penalty: float = 2.0
    metric: str = "manhattan"

    def __post_init__(self):
        for name in ("e_router", "e_wire", "default_link_mm", "remainder_penalty"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {val}")
        if self.remainder_penalty < 1:
            raise ValueError("remainder_penalty must be >= 1")
        if self.metric not in ("manhattan", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")

    @classmethod
    def unit(cls, remainder_penalty: float = 2.0) -> "EnergyModel":
        return cls(1.0, 0.0, 1.0, remainder_penalty)

    @classmethod
    def parse(cls, text: str) -> "EnergyModel":
        """Parse ``unit`` or ``linear:<e_router>,<e_wire>[,<default_mm>,<lambda>]``."""
        text = text.strip()
        if text == "unit":
            return cls.unit()
        if text.startswith("linear:"):
            parts = [float(x) for x in text[len("linear:"):].split(",") if x.strip()]
            if len(parts) not in (2, 4):
                raise ValueError("linear energy takes 2 or 4 comma-separated values")
            if len(parts) == 2:
                return cls(parts[0], parts[1])
            return cls(parts[0], parts[1], parts[2], parts[3])
        raise ValueError(f"unrecognised energy model {text!r}")

    def describe(self) -> str:
        return (f"linear:{self.e_router:g},{self.e_wire:g},{self.default_link_mm:g},"
                f"{self.remainder_penalty:g}")

    def link_energy(self, g: Acg, a: int, b: int) -> float:
        return e_bit(self, distance(g, a, b, self.metric, self.default_link_mm))


# router energy dominates short wires; used for simulated energy comparisons
CALIBRATED = EnergyModel(e_router=1.0, e_wire=0.05)


def distance(g: Acg, i: int, j: int, metric: str = "manhattan", default_mm: float = 1.0) -> float:
    pi, pj = g.position(i), g.position(j)
    if i == j:
        return 0.0
    if pi is None or pj is None:
        return default_mm
    dx, dy = pi[0] - pj[0], pi[1] - pj[1]
    if metric == "manhattan":
        return abs(dx) + abs(dy)
    if metric == "euclidean":
        return math.hypot(dx, dy)
    raise ValueError(f"unknown metric {metric!r}")


def e_bit(m: EnergyModel, length: float) -> float:
    if length < 0:
        raise ValueError(f"negative link length {length}")
    return m.e_router + m.e_wire * length
