"""Shared node/channel parameter types and trajectory container."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from phononlab.pulseshape import CouplerSchedule

Array = np.ndarray


class TopologyError(RuntimeError):
    """The requested configuration is outside an engine's validity domain."""


@dataclass(frozen=True)
class ChannelParams:
    """Acoustic channel: length (m), velocity (m/s), energy loss (Np/m)."""

    length: float
    velocity: float
    loss_alpha: float

    def __post_init__(self):
        if self.length <= 0 or self.velocity <= 0 or self.loss_alpha < 0:
            raise ValueError("channel parameters must be positive")

    @property
    def tau(self) -> float:
        """Single-trip delay l / v."""
        return self.length / self.velocity

    @property
    def round_trip_time(self) -> float:
        return 2.0 * self.tau

    @property
    def eta(self) -> float:
        """Single-pass energy transmission exp(-alpha l)."""
        return float(np.exp(-self.loss_alpha * self.length))

    @property
    def t_saw(self) -> float:
        """Energy decay time of a wave circulating in the channel, 1/(alpha v)."""
        return 1.0 / (self.loss_alpha * self.velocity)


@dataclass
class NodeParams:
    """One qubit node.

    ``detuning`` is the angular detuning from the phonon carrier (rad/s);
    the rotating frame is at the carrier, so resonant operation means 0.
    ``directivity`` is the fraction of emitted energy sent toward the far
    node.  ``t2_source`` selects which dephasing time feeds the pure
    dephasing rate: quasi-static flux noise makes the Ramsey value the
    right choice for ~us free-evolution arms, while short shaped-transfer
    sequences behave echo-like.
    """

    t1: float
    t2_ramsey: float
    t2_echo: float | None = None
    t2_source: str = "echo"
    detuning: float = 0.0
    directivity: float = 1.0
    schedule: Optional[CouplerSchedule] = None
    label: str = ""

    def __post_init__(self):
        if self.t1 <= 0:
            raise ValueError(f"T1 must be positive, got {self.t1}")
        if self.t2_ramsey > 2 * self.t1 + 1e-15:
            raise ValueError(
                f"T2 Ramsey {self.t2_ramsey} exceeds the 2*T1 bound ({2 * self.t1})"
            )
        if not 0.0 <= self.directivity <= 1.0:
            raise ValueError(f"directivity must be in [0, 1], got {self.directivity}")
        if self.t2_source not in ("echo", "ramsey"):
            raise ValueError(f"t2_source must be echo|ramsey, got {self.t2_source}")
        if self.t2_source == "echo" and self.t2_echo is None:
            raise ValueError("t2_source='echo' requires t2_echo")

    @property
    def t2(self) -> float:
        return self.t2_echo if self.t2_source == "echo" else self.t2_ramsey

    @property
    def gamma_phi(self) -> float:
        """Pure dephasing rate 1/T2 - 1/(2 T1), clamped at zero."""
        return max(0.0, 1.0 / self.t2 - 1.0 / (2.0 * self.t1))

    def kappa(self, t: Array) -> Array:
        if self.schedule is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.schedule(t)


@dataclass
class Trajectory:
    """Time series of qubit populations plus optional extras."""

    times: Array
    pe_q1: Array
    pe_q2: Array
    field_energy: Array | None = None
    rho: list[Array] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("pe_q1", "pe_q2"):
            p = getattr(self, name)
            if np.any(p < -1e-9) or np.any(p > 1.0 + 1e-9):
                raise ValueError(f"{name} out of [0, 1]")

    @property
    def max_pe_q2(self) -> float:
        return float(np.max(self.pe_q2))

    @property
    def max_pe_q1(self) -> float:
        return float(np.max(self.pe_q1))

    def to_csv(self) -> str:
        """Fixed column contract: t_ns, Pe_Q1, Pe_Q2, field_energy."""
        fe = self.field_energy
        if fe is None:
            fe = np.zeros_like(self.times)
        buf = io.StringIO()
        buf.write("t_ns,Pe_Q1,Pe_Q2,field_energy\n")
        for t, p1, p2, f in zip(self.times, self.pe_q1, self.pe_q2, fe):
            buf.write(f"{t * 1e9:.6f},{p1:.9g},{p2:.9g},{f:.9g}\n")
        return buf.getvalue()
