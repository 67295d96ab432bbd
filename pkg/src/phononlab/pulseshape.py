"""Target itinerant-phonon temporal modes and the coupler schedules that
emit or capture them.

The mode family is the symmetric sech,

    phi(t) = sqrt(norm * kappa_c / 4) * sech(kappa_c (t - t_center) / 2),

whose amplitude full-width-at-half-maximum is 4*arccosh(2)/kappa_c.
Release of a mode of weight ``norm`` from a qubit initially excited with
unit probability leaves population 1 - norm behind ("half-emission" for
norm = 1/2); the matching capture schedule absorbs the mode regardless of
its overall attenuation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

Array = np.ndarray

# Default coupler saturation; real couplers do not open arbitrarily fast.
KAPPA_MAX_DEFAULT = 2 * np.pi * 25e6

# Support is truncated where the amplitude falls below this fraction of
# the peak; the neglected tails carry < 1e-8 of the mode energy.
TRUNCATION = 1e-4


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class TemporalMode:
    """A normalized traveling-mode envelope with finite support.

    amplitude(t) has units s^-1/2 and vanishes outside [t_start, t_end];
    cumulative(t) is the running energy integral of |amplitude|^2 and
    reaches ``norm`` at t_end.
    """

    amplitude: Callable[[Array], Array]
    cumulative: Callable[[Array], Array]
    t_start: float
    t_end: float
    norm: float
    t_center: float
    kappa_c: float | None = None

    def intensity(self, t: Array) -> Array:
        return np.abs(self.amplitude(t)) ** 2

    def shifted(self, dt: float) -> "TemporalMode":
        """The same envelope delayed by dt."""
        amp, cum = self.amplitude, self.cumulative
        return replace(
            self,
            amplitude=lambda t: amp(np.asarray(t) - dt),
            cumulative=lambda t: cum(np.asarray(t) - dt),
            t_start=self.t_start + dt,
            t_end=self.t_end + dt,
            t_center=self.t_center + dt,
        )

    def fwhm(self) -> float:
        """Amplitude full width at half maximum, found numerically."""
        from scipy.optimize import brentq

        peak = np.abs(self.amplitude(np.array([self.t_center])))[0]

        def f(t):
            return np.abs(self.amplitude(np.array([t])))[0] - 0.5 * peak

        right = brentq(f, self.t_center, self.t_end)
        left = brentq(f, self.t_start, self.t_center)
        return right - left


def sech_mode(
    kappa_c: float,
    norm: float = 1.0,
    t_center: float = 0.0,
    truncation: float = TRUNCATION,
) -> TemporalMode:
    """Sech envelope with decay constant kappa_c (rad/s) and weight norm."""
    if kappa_c <= 0:
        raise ScheduleError(f"kappa_c must be positive, got {kappa_c}")
    if not 0.0 < norm <= 1.0:
        raise ScheduleError(f"norm must be in (0, 1], got {norm}")
    x_max = math.acosh(1.0 / truncation)
    half_support = 2.0 * x_max / kappa_c
    t0 = t_center - half_support
    t1 = t_center + half_support
    a0 = math.sqrt(norm * kappa_c / 4.0)

    def amplitude(t):
        t = np.asarray(t, dtype=float)
        x = 0.5 * kappa_c * (t - t_center)
        inside = (t >= t0) & (t <= t1)
        return np.where(inside, a0 / np.cosh(np.where(inside, x, 0.0)), 0.0)

    # integral of the *truncated* envelope: subtract the cut tail mass
    tail = 0.5 * norm * (1.0 - math.tanh(x_max))
    total = norm - 2.0 * tail

    def cumulative(t):
        t = np.asarray(t, dtype=float)
        x = 0.5 * kappa_c * (t - t_center)
        raw = 0.5 * norm * (1.0 + np.tanh(x)) - tail
        return np.clip(np.where(t < t0, 0.0, np.where(t > t1, total, raw)), 0.0, total)

    return TemporalMode(
        amplitude=amplitude,
        cumulative=cumulative,
        t_start=t0,
        t_end=t1,
        norm=norm,
        t_center=t_center,
        kappa_c=kappa_c,
    )


@dataclass(frozen=True)
class CouplerSchedule:
    """Time-dependent coupler rate kappa(t) in rad/s, zero outside support."""

    kappa: Callable[[Array], Array]
    kappa_max: float
    direction: str  # "emit" or "capture"
    t_start: float
    t_end: float
    capped: bool = False

    def __post_init__(self):
        if self.direction not in ("emit", "capture"):
            raise ScheduleError(f"direction must be emit|capture, got {self.direction}")

    def __call__(self, t: Array) -> Array:
        return self.kappa(np.asarray(t, dtype=float))

    def sample(self, times: Array) -> Array:
        return self(times)

    def reversed(self, t_pivot: float) -> "CouplerSchedule":
        """Time reversal about t_pivot: kappa'(t) = kappa(2*t_pivot - t)."""
        k = self.kappa
        return replace(
            self,
            kappa=lambda t: k(2.0 * t_pivot - np.asarray(t, dtype=float)),
            t_start=2.0 * t_pivot - self.t_end,
            t_end=2.0 * t_pivot - self.t_start,
        )

    def scaled(self, factor: float) -> "CouplerSchedule":
        """kappa(t) * factor, re-capped at kappa_max (directivity compensation)."""
        if factor <= 0:
            raise ScheduleError("scale factor must be positive")
        k = self.kappa
        kmax = self.kappa_max
        scaled_capped = bool(
            np.any(factor * k(_support_grid(self)) > kmax + 1e-9)
        )
        return replace(
            self,
            kappa=lambda t: np.minimum(factor * k(np.asarray(t, dtype=float)), kmax),
            capped=self.capped or scaled_capped,
        )

    def to_json_obj(self, dt: float = 1e-9) -> dict:
        """Sampled (t_ns, kappa/2pi MHz) pairs plus metadata."""
        ts = np.arange(self.t_start, self.t_end + 0.5 * dt, dt)
        ks = self(ts)
        return {
            "direction": self.direction,
            "kappa_max_over_2pi_MHz": self.kappa_max / (2 * np.pi * 1e6),
            "capped": self.capped,
            "samples": [
                [round(float(t) * 1e9, 6), float(k) / (2 * np.pi * 1e6)]
                for t, k in zip(ts, ks)
            ],
        }

    def to_json(self, dt: float = 1e-9) -> str:
        return json.dumps(self.to_json_obj(dt))


def _support_grid(s, n: int = 2001) -> Array:
    return np.linspace(s.t_start, s.t_end, n)


def constant_schedule(
    kappa: float,
    t_start: float,
    t_end: float,
    direction: str = "emit",
    kappa_max: float = KAPPA_MAX_DEFAULT,
) -> CouplerSchedule:
    """Rectangular coupler window at a fixed rate."""
    if kappa < 0:
        raise ScheduleError("kappa must be non-negative")
    value = min(kappa, kappa_max)

    def fn(t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= t_start) & (t <= t_end), value, 0.0)

    return CouplerSchedule(
        kappa=fn, kappa_max=kappa_max, direction=direction,
        t_start=t_start, t_end=t_end, capped=kappa > kappa_max,
    )


@dataclass(frozen=True)
class ScheduleSequence:
    """Several disjoint coupler windows on one node (e.g. emit, then
    recapture the reflected packet)."""

    segments: tuple[CouplerSchedule, ...]

    def __post_init__(self):
        segs = sorted(self.segments, key=lambda s: s.t_start)
        for a, b in zip(segs, segs[1:]):
            if b.t_start < a.t_end - 1e-15:
                raise ScheduleError("schedule segments overlap")
        object.__setattr__(self, "segments", tuple(segs))

    def __call__(self, t: Array) -> Array:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for s in self.segments:
            out = out + s(t)
        return out

    def sample(self, times: Array) -> Array:
        return self(times)

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def kappa_max(self) -> float:
        return max(s.kappa_max for s in self.segments)

    @property
    def capped(self) -> bool:
        return any(s.capped for s in self.segments)

    @property
    def direction(self) -> str:
        dirs = {s.direction for s in self.segments}
        return dirs.pop() if len(dirs) == 1 else "mixed"


def emission_schedule(
    mode: TemporalMode, kappa_max: float = KAPPA_MAX_DEFAULT
) -> CouplerSchedule:
    """Coupler rate that releases ``mode`` from a unit-excited qubit.

    kappa(t) = |phi(t)|^2 / (1 - E(t)) with E the running energy integral;
    the emitted output intensity then reproduces |phi(t)|^2 and the qubit
    retains population 1 - norm.  The rate is capped at kappa_max and the
    cap is flagged on the returned schedule.
    """
    if mode.norm > 1.0:
        raise ScheduleError(f"mode norm {mode.norm} exceeds 1")

    def kappa(t):
        t = np.asarray(t, dtype=float)
        inten = mode.intensity(t)
        denom = 1.0 - mode.cumulative(t)
        raw = np.where(denom > 1e-15, inten / np.maximum(denom, 1e-15), kappa_max)
        out = np.minimum(raw, kappa_max)
        return np.where((t >= mode.t_start) & (t <= mode.t_end), out, 0.0)

    sched = CouplerSchedule(
        kappa=kappa,
        kappa_max=kappa_max,
        direction="emit",
        t_start=mode.t_start,
        t_end=mode.t_end,
    )
    capped = bool(np.any(_raw_emission(mode, _support_grid(sched)) > kappa_max + 1e-9))
    return replace(sched, capped=capped)


def _raw_emission(mode: TemporalMode, t: Array) -> Array:
    denom = np.maximum(1.0 - mode.cumulative(t), 1e-15)
    return mode.intensity(t) / denom


def capture_schedule(
    mode: TemporalMode, kappa_max: float = KAPPA_MAX_DEFAULT
) -> CouplerSchedule:
    """Coupler rate that absorbs an incoming copy of ``mode``.

    kappa(t) = |phi(t)|^2 / E(t); this is the time reverse of the
    norm-1 emission rule applied to the reversed envelope, and captures
    the matching mode perfectly for any overall attenuation of the input
    (final qubit population = eta * norm for an input attenuated by eta).
    """
    if mode.norm > 1.0:
        raise ScheduleError(f"mode norm {mode.norm} exceeds 1")

    def kappa(t):
        t = np.asarray(t, dtype=float)
        inten = mode.intensity(t)
        cum = mode.cumulative(t)
        raw = np.where(cum > 1e-15, inten / np.maximum(cum, 1e-15), kappa_max)
        out = np.minimum(raw, kappa_max)
        return np.where((t >= mode.t_start) & (t <= mode.t_end), out, 0.0)

    sched = CouplerSchedule(
        kappa=kappa,
        kappa_max=kappa_max,
        direction="capture",
        t_start=mode.t_start,
        t_end=mode.t_end,
    )
    grid = _support_grid(sched)
    raw = mode.intensity(grid) / np.maximum(mode.cumulative(grid), 1e-15)
    return replace(sched, capped=bool(np.any(raw > kappa_max + 1e-9)))


def simulate_release(
    schedule: CouplerSchedule, dt: float = 0.25e-9, pad: float = 20e-9
) -> tuple[Array, Array, Array]:
    """Single-qubit input-output simulation of an emission schedule.

    Returns (times, excited population |a|^2, output intensity |c_out|^2)
    for da/dt = -kappa(t) a / 2, c_out = sqrt(kappa) a, starting from a=1.
    """
    times = np.arange(schedule.t_start - pad, schedule.t_end + pad, dt)
    a = 1.0
    pops = np.empty_like(times)
    outs = np.empty_like(times)
    for i, t in enumerate(times):
        pops[i] = a * a
        outs[i] = schedule(np.array([t]))[0] * a * a
        k1 = -0.5 * schedule(np.array([t]))[0] * a
        ah = a + 0.5 * dt * k1
        km = -0.5 * schedule(np.array([t + 0.5 * dt]))[0]
        k2 = km * ah
        k3 = km * (a + 0.5 * dt * k2)
        k4 = -0.5 * schedule(np.array([t + dt]))[0] * (a + dt * k3)
        a = a + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return times, pops, outs


def simulate_catch(
    schedule: CouplerSchedule,
    incoming: Callable[[Array], Array],
    dt: float = 0.25e-9,
    pad: float = 20e-9,
    a0: complex = 0.0,
) -> tuple[Array, Array]:
    """Single-qubit input-output simulation of a capture schedule.

    da/dt = -kappa(t) a / 2 - sqrt(kappa(t)) b_in(t); returns (times, |a|^2).
    """
    times = np.arange(schedule.t_start - pad, schedule.t_end + pad, dt)
    a = complex(a0)
    pops = np.empty(len(times))

    def rhs(t, a_val):
        k = schedule(np.array([t]))[0]
        b = incoming(np.array([t]))[0]
        return -0.5 * k * a_val - math.sqrt(k) * b

    for i, t in enumerate(times):
        pops[i] = abs(a) ** 2
        k1 = rhs(t, a)
        k2 = rhs(t + 0.5 * dt, a + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, a + 0.5 * dt * k2)
        k4 = rhs(t + dt, a + dt * k3)
        a = a + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return times, pops
