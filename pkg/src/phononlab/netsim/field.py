"""Engine B: single-excitation discretized-field evolution.

The channel is split into N cells of length v*dt (dt = tau/N, so the
single-trip delay and the end-to-end loss are represented exactly).  The
state lives in the 0/1-excitation manifold and is stored as complex
amplitudes: vacuum weight v, qubit amplitudes a1/a2, and right/left-mover
amplitudes per cell.  Each step:

  1. boundary interactions: the qubit at each end exchanges amplitude
     with the adjacent incoming cell through an exact 2x2 rotation whose
     angle is set by the device rate kappa(t); the directivity D splits
     the coupling D : (1-D) between the channel port and a lost back
     port, and the non-absorbed incident amplitude reflects with the
     complex end coefficient;
  2. movers advance one cell with amplitude factor exp(-alpha v dt / 2);
  3. qubit-local T1 damping and detuning phases.

Receiver port phases are chosen so that a matched release-and-catch is
the identity map on the transferred state (the calibrated local frame).

Pure dephasing uses two-branch density bookkeeping: each qubit accrues a
phase-diffusion debt while its amplitude coexists with amplitude
elsewhere, and the branch list is split (coherent part scaled by
exp(-debt)) at every capture start and at measurement.  This reproduces
the exp(-gamma_phi * t_overlap) suppression of interference cross terms
while keeping populations exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from phononlab import qmath
from phononlab.netsim.params import ChannelParams, NodeParams, Trajectory, TopologyError
from phononlab.qmath import TimeGrid

Array = np.ndarray

MAX_BRANCHES = 64
OCCUPANCY_EPS = 1e-9


def make_grid(channel: ChannelParams, t_end: float, dt_target: float = 1e-9) -> TimeGrid:
    """Grid whose step divides the channel delay exactly."""
    n_cells = max(2, int(round(channel.tau / dt_target)))
    dt = channel.tau / n_cells
    n_steps = int(np.ceil(t_end / dt))
    return TimeGrid(0.0, n_steps * dt, dt)


@dataclass
class FieldState:
    """Snapshot of the discretized single-excitation field."""

    t: float
    a1: complex
    a2: complex
    vacuum: complex
    right_intensity: Array
    left_intensity: Array
    total_norm: float


@dataclass
class _Branch:
    v: complex
    a1: complex
    a2: complex
    right: Array
    left: Array
    debt: dict = field(default_factory=lambda: {1: 0.0, 2: 0.0})

    def norm(self) -> float:
        return (
            abs(self.v) ** 2
            + abs(self.a1) ** 2
            + abs(self.a2) ** 2
            + float(np.sum(np.abs(self.right) ** 2) + np.sum(np.abs(self.left) ** 2))
        )

    def field_norm(self) -> float:
        return float(np.sum(np.abs(self.right) ** 2) + np.sum(np.abs(self.left) ** 2))


@dataclass
class SingleExcitationResult:
    trajectory: Trajectory
    snapshots: list[FieldState]
    rho_tm: Array | None = None
    t_m: float | None = None
    final_branches: list[_Branch] | None = None


def _qubit_ket(spec: str | Array | None) -> tuple[complex, complex]:
    """Return (ground, excited) amplitudes for a single-qubit prep."""
    if spec is None or spec == "g":
        return 1.0 + 0j, 0.0 + 0j
    if spec == "e":
        return 0.0 + 0j, 1.0 + 0j
    psi = np.asarray(spec, dtype=complex).reshape(-1)
    if psi.shape != (2,):
        raise ValueError("qubit prep must be 'g', 'e' or a 2-component ket")
    psi = psi / np.linalg.norm(psi)
    return complex(psi[0]), complex(psi[1])


def _split(branches: list[_Branch], qubit: int) -> list[_Branch]:
    """Apply accumulated dephasing debt of ``qubit`` as a branch split."""
    out: list[_Branch] = []
    for b in branches:
        debt = b.debt[qubit]
        amp = b.a1 if qubit == 1 else b.a2
        lam = float(np.exp(-debt))
        rest_norm = b.norm() - abs(amp) ** 2
        if debt <= 1e-12 or abs(amp) ** 2 < 1e-14 or rest_norm < 1e-14:
            b.debt[qubit] = 0.0
            out.append(b)
            continue
        s_coh = np.sqrt(lam)
        s_mix = np.sqrt(1.0 - lam)
        coh = _Branch(
            v=b.v * s_coh, a1=b.a1 * s_coh, a2=b.a2 * s_coh,
            right=b.right * s_coh, left=b.left * s_coh,
            debt={1: b.debt[1], 2: b.debt[2]},
        )
        coh.debt[qubit] = 0.0
        only = _Branch(
            v=0.0, a1=0.0, a2=0.0,
            right=np.zeros_like(b.right), left=np.zeros_like(b.left),
            debt={1: b.debt[1], 2: b.debt[2]},
        )
        if qubit == 1:
            only.a1 = b.a1 * s_mix
            only.debt[1] = 0.0
        else:
            only.a2 = b.a2 * s_mix
            only.debt[2] = 0.0
        rest = _Branch(
            v=b.v * s_mix, a1=b.a1 * s_mix, a2=b.a2 * s_mix,
            right=b.right * s_mix, left=b.left * s_mix,
            debt={1: b.debt[1], 2: b.debt[2]},
        )
        if qubit == 1:
            rest.a1 = 0.0
        else:
            rest.a2 = 0.0
        rest.debt[qubit] = 0.0
        out.extend(x for x in (coh, only, rest) if x.norm() > 1e-14)
    if len(out) > MAX_BRANCHES:
        raise RuntimeError(f"dephasing branch count exceeded {MAX_BRANCHES}")
    return out


def _capture_starts(node: NodeParams) -> list[float]:
    sched = node.schedule
    if sched is None:
        return []
    segments = getattr(sched, "segments", [sched])
    return [s.t_start for s in segments if s.direction == "capture"]


def run_single_excitation(
    node1: NodeParams,
    node2: NodeParams,
    channel: ChannelParams,
    grid: TimeGrid,
    reflection_near: complex = 1.0 + 0j,
    reflection_far: complex = 1.0 + 0j,
    initial_q1: str | Array = "e",
    initial_q2: str | Array = "g",
    z_events: list[tuple[float, int, float]] | None = None,
    t_m: float | None = None,
    dephasing: bool = True,
    t1_decay: bool = True,
    snapshots_every: int | None = None,
) -> SingleExcitationResult:
    """Evolve the two-node network at amplitude level.

    ``z_events`` is a list of (time, qubit, phase) instantaneous z
    rotations.  ``reflection_near``/``reflection_far`` are the complex
    end-reflection coefficients seen by the channel (the near end sits
    behind node 1, the far end behind node 2).
    """
    dt = grid.dt
    n_cells_f = channel.tau / dt
    n_cells = int(round(n_cells_f))
    if abs(n_cells_f - n_cells) > 1e-6 or n_cells < 1:
        raise TopologyError(
            f"grid step {dt:.3e}s does not divide the channel delay "
            f"{channel.tau:.6e}s; use make_grid()"
        )

    g1, e1 = _qubit_ket(initial_q1)
    g2, e2 = _qubit_ket(initial_q2)
    if abs(e1) > 1e-12 and abs(e2) > 1e-12:
        raise TopologyError("initial state leaves the single-excitation manifold")
    branch = _Branch(
        v=g1 * g2,
        a1=e1 * g2,
        a2=g1 * e2,
        right=np.zeros(n_cells, dtype=complex),
        left=np.zeros(n_cells, dtype=complex),
    )
    branches = [branch]

    times = grid.times()
    n_steps = grid.n_steps
    mid = times[:-1] + 0.5 * dt
    k1 = node1.kappa(mid)
    k2 = node2.kappa(mid)
    d1, d2 = node1.directivity, node2.directivity
    damp = float(np.exp(-0.5 * channel.loss_alpha * channel.velocity * dt))
    g_t1_1 = float(np.exp(-0.5 * dt / node1.t1)) if t1_decay else 1.0
    g_t1_2 = float(np.exp(-0.5 * dt / node2.t1)) if t1_decay else 1.0
    ph1 = complex(np.exp(-1j * node1.detuning * dt))
    ph2 = complex(np.exp(-1j * node2.detuning * dt))
    gphi1 = node1.gamma_phi if dephasing else 0.0
    gphi2 = node2.gamma_phi if dephasing else 0.0

    events = sorted(z_events or [], key=lambda e: e[0])
    split_times = sorted(
        set(_capture_starts(node1) + _capture_starts(node2))
    )

    pe1 = np.empty(n_steps + 1)
    pe2 = np.empty(n_steps + 1)
    fen = np.empty(n_steps + 1)
    snapshots: list[FieldState] = []
    rho_tm = None
    i_tm = None if t_m is None else int(round(t_m / dt))

    def record(i):
        pe1[i] = sum(abs(b.a1) ** 2 for b in branches)
        pe2[i] = sum(abs(b.a2) ** 2 for b in branches)
        fen[i] = sum(b.field_norm() for b in branches)
        if snapshots_every and i % snapshots_every == 0:
            b0 = max(branches, key=lambda b: b.norm())
            snapshots.append(
                FieldState(
                    t=times[i], a1=b0.a1, a2=b0.a2, vacuum=b0.v,
                    right_intensity=sum(np.abs(b.right) ** 2 for b in branches),
                    left_intensity=sum(np.abs(b.left) ** 2 for b in branches),
                    total_norm=sum(b.norm() for b in branches),
                )
            )

    def reduced_rho() -> Array:
        rho = np.zeros((4, 4), dtype=complex)
        for b in branches:
            rho[1, 1] += abs(b.a2) ** 2
            rho[2, 2] += abs(b.a1) ** 2
            rho[2, 1] += b.a1 * np.conj(b.a2)
            rho[2, 0] += b.a1 * np.conj(b.v)
            rho[1, 0] += b.a2 * np.conj(b.v)
        rho[1, 2] = np.conj(rho[2, 1])
        rho[0, 2] = np.conj(rho[2, 0])
        rho[0, 1] = np.conj(rho[1, 0])
        rho[0, 0] = 1.0 - rho[1, 1].real - rho[2, 2].real
        return rho

    record(0)
    ev_idx = 0
    sp_idx = 0
    for i in range(n_steps):
        t = times[i]
        # scheduled instantaneous z rotations
        while ev_idx < len(events) and events[ev_idx][0] <= t + 0.5 * dt:
            _, q, phi = events[ev_idx]
            for b in branches:
                if q == 1:
                    b.a1 *= np.exp(1j * phi)
                else:
                    b.a2 *= np.exp(1j * phi)
            ev_idx += 1
        # dephasing splits at capture starts
        while sp_idx < len(split_times) and split_times[sp_idx] <= t + 0.5 * dt:
            branches = _split(_split(branches, 1), 2)
            sp_idx += 1

        mu1 = float(np.exp(-0.5 * k1[i] * dt))
        nu1 = float(np.sqrt(max(0.0, 1.0 - mu1 * mu1)))
        mu2 = float(np.exp(-0.5 * k2[i] * dt))
        nu2 = float(np.sqrt(max(0.0, 1.0 - mu2 * mu2)))
        sd1, sd2 = np.sqrt(d1), np.sqrt(d2)

        for b in branches:
            w1 = b.left[0]
            w2 = b.right[-1]
            # node 1: emit +, capture -
            a1_new = mu1 * b.a1 - nu1 * sd1 * w1
            out1 = sd1 * nu1 * b.a1 + reflection_near * ((mu1 - 1.0) * d1 + 1.0) * w1
            # node 2: capture +, emit - (receiver frame alignment)
            a2_new = mu2 * b.a2 + nu2 * sd2 * w2
            out2 = -sd2 * nu2 * b.a2 + reflection_far * ((mu2 - 1.0) * d2 + 1.0) * w2
            b.a1, b.a2 = a1_new, a2_new
            b.right = np.roll(b.right, 1)
            b.right[0] = out1
            b.left = np.roll(b.left, -1)
            b.left[-1] = out2
            b.right *= damp
            b.left *= damp
            # qubit-local decay and detuning phases
            b.a1 *= g_t1_1 * ph1
            b.a2 *= g_t1_2 * ph2
            # dephasing debt accrues while a qubit amplitude coexists
            # with amplitude elsewhere in the branch
            if gphi1 or gphi2:
                n1 = abs(b.a1) ** 2
                n2 = abs(b.a2) ** 2
                rest = b.norm()
                if gphi1 and n1 > OCCUPANCY_EPS and rest - n1 > OCCUPANCY_EPS:
                    b.debt[1] += gphi1 * dt
                if gphi2 and n2 > OCCUPANCY_EPS and rest - n2 > OCCUPANCY_EPS:
                    b.debt[2] += gphi2 * dt
        record(i + 1)
        if i_tm is not None and i + 1 == i_tm:
            branches = _split(_split(branches, 1), 2)
            rho_tm = qmath.hermitize(reduced_rho())

    if i_tm is not None and rho_tm is None:
        raise ValueError(f"t_m={t_m} outside the simulated window")

    traj = Trajectory(
        times=times,
        pe_q1=np.clip(pe1, 0.0, 1.0),
        pe_q2=np.clip(pe2, 0.0, 1.0),
        field_energy=fen,
        meta={"engine": "field", "n_cells": n_cells},
    )
    return SingleExcitationResult(
        trajectory=traj,
        snapshots=snapshots,
        rho_tm=rho_tm,
        t_m=t_m,
        final_branches=branches,
    )
