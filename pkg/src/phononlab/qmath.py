"""Dense complex linear algebra and Lindblad master-equation integration.

Everything here works on plain complex numpy arrays for Hilbert spaces of
dimension 2 or 4 (one or two qubits).  Single-qubit basis ordering is
(|g>, |e>); the two-qubit product basis is {|gg>, |ge>, |eg>, |ee>} with
the first qubit as the slow index, i.e. index = 2*q1 + q2.

Frequencies and rates are angular (rad/s) throughout, hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray

# Pauli and ladder operators in the (|g>, |e>) basis.
I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.conj().T
P_EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
KET_G = np.array([1.0, 0.0], dtype=complex)
KET_E = np.array([0.0, 1.0], dtype=complex)

PAULIS = {"I": I2, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


class DimensionError(ValueError):
    """Operator/state dimensions do not match."""


class IntegrationError(RuntimeError):
    """A stored state violated the density-matrix invariants.

    Carries ``suggested_dt``, a smaller step likely to fix the problem.
    """

    def __init__(self, message: str, suggested_dt: float | None = None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


def kron(a: Array, b: Array) -> Array:
    """Kronecker product with the first factor as the slow index."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def ket2dm(psi: Array) -> Array:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def hermitize(m: Array) -> Array:
    return 0.5 * (m + m.conj().T)


def is_hermitian(m: Array, atol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= atol)


def check_density_matrix(
    rho: Array,
    herm_atol: float = 1e-10,
    trace_atol: float = 1e-9,
    eig_floor: float = -1e-9,
) -> None:
    """Raise ValueError unless rho is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if not is_hermitian(rho, herm_atol):
        dev = np.max(np.abs(rho - rho.conj().T))
        raise ValueError(f"density matrix not Hermitian (deviation {dev:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_atol:
        raise ValueError(f"density matrix trace {tr} deviates from 1")
    w = np.linalg.eigvalsh(hermitize(rho))
    if w.min() < eig_floor:
        raise ValueError(f"density matrix not PSD (min eigenvalue {w.min():.2e})")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform integration grid [t0, t1] with step dt (seconds)."""

    t0: float
    t1: float
    dt: float

    MAX_STEPS = 10_000_000  # resource guard

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if not self.dt > 0:
            raise ValueError(f"need dt > 0, got {self.dt}")
        if (self.t1 - self.t0) / self.dt > self.MAX_STEPS:
            raise ValueError(
                f"grid would have {(self.t1 - self.t0) / self.dt:.3g} steps, "
                f"limit is {self.MAX_STEPS:g}"
            )

    @property
    def n_steps(self) -> int:
        return int(round((self.t1 - self.t0) / self.dt))

    def times(self) -> Array:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)


@dataclass
class CollapseChannel:
    """A Lindblad dissipator: rate(t) * D[operator(t)].

    ``operator`` is either a constant matrix or a callable t -> matrix
    (the latter is needed for joint collapse operators whose structure
    changes with the coupler schedules).  ``rate`` is a non-negative
    constant (rad/s) or a callable t -> rate.
    """

    operator: Array | Callable[[float], Array]
    rate: float | Callable[[float], float] = 1.0
    label: str = ""

    def op_at(self, t: float) -> Array:
        if callable(self.operator):
            return self.operator(t)
        return self.operator

    def rate_at(self, t: float) -> float:
        g = self.rate(t) if callable(self.rate) else self.rate
        if g < 0:
            raise ValueError(f"collapse rate negative at t={t}: {g}")
        return float(g)


def lindblad_rhs(
    h: Callable[[float], Array] | Array | None,
    channels: list[CollapseChannel],
    rho: Array,
    t: float,
) -> Array:
    """d(rho)/dt = -i[H, rho] + sum_k rate_k (L rho L+ - {L+L, rho}/2)."""
    dim = rho.shape[0]
    if h is None:
        drho = np.zeros_like(rho)
    else:
        hm = h(t) if callable(h) else h
        if hm.shape != rho.shape:
            raise DimensionError(f"H shape {hm.shape} vs rho {rho.shape}")
        drho = -1j * (hm @ rho - rho @ hm)
    for ch in channels:
        g = ch.rate_at(t)
        if g == 0.0:
            continue
        L = ch.op_at(t)
        if L.shape[0] != dim:
            raise DimensionError(f"collapse operator {ch.label!r} dim mismatch")
        Ld = L.conj().T
        LdL = Ld @ L
        drho += g * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return drho


@dataclass
class MESolution:
    """Result of a master-equation integration."""

    times: Array
    expectations: dict[str, Array] = field(default_factory=dict)
    snapshots: dict[float, Array] = field(default_factory=dict)
    states: list[Array] | None = None
    final_state: Array | None = None


def integrate_me(
    h: Callable[[float], Array] | Array | None,
    channels: list[CollapseChannel],
    rho0: Array,
    grid: TimeGrid,
    observables: dict[str, Array] | None = None,
    snapshot_times: list[float] | None = None,
    store_states: bool = False,
    invariant_tol: float = 1e-6,
    check_every: int = 200,
) -> MESolution:
    """Fixed-step RK4 integration of the Lindblad master equation.

    Each stored state is hermitized, rho <- (rho + rho+)/2.  Trace and
    positivity are monitored every ``check_every`` steps; a violation
    beyond ``invariant_tol`` raises IntegrationError with a suggested
    smaller step.
    """
    rho = hermitize(np.asarray(rho0, dtype=complex))
    check_density_matrix(rho)
    times = grid.times()
    h_step = grid.dt
    n = grid.n_steps

    obs = observables or {}
    for name, op in obs.items():
        if op.shape != rho.shape:
            raise DimensionError(f"observable {name!r} dim mismatch")
    expect_out = {name: np.empty(n + 1) for name in obs}

    snap_idx: dict[int, float] = {}
    for ts in snapshot_times or []:
        i = int(round((ts - grid.t0) / h_step))
        if i < 0 or i > n or abs(grid.t0 + i * h_step - ts) > 0.5 * h_step:
            raise ValueError(f"snapshot time {ts} not on the grid")
        snap_idx[i] = ts

    sol = MESolution(times=times)
    if store_states:
        sol.states = []

    def record(i: int, state: Array) -> None:
        for name, op in obs.items():
            expect_out[name][i] = np.trace(op @ state).real
        if store_states:
            sol.states.append(state.copy())
        if i in snap_idx:
            sol.snapshots[snap_idx[i]] = state.copy()

    def check(i: int, state: Array) -> None:
        tr_dev = abs(np.trace(state).real - 1.0)
        min_eig = np.linalg.eigvalsh(state).min()
        if tr_dev > invariant_tol or min_eig < -invariant_tol:
            raise IntegrationError(
                f"invariants violated at t={times[i]:.3e}s "
                f"(trace dev {tr_dev:.2e}, min eig {min_eig:.2e}); "
                f"try dt={h_step / 4:.3e}",
                suggested_dt=h_step / 4,
            )

    record(0, rho)
    for i in range(n):
        t = times[i]
        k1 = lindblad_rhs(h, channels, rho, t)
        k2 = lindblad_rhs(h, channels, rho + 0.5 * h_step * k1, t + 0.5 * h_step)
        k3 = lindblad_rhs(h, channels, rho + 0.5 * h_step * k2, t + 0.5 * h_step)
        k4 = lindblad_rhs(h, channels, rho + h_step * k3, t + h_step)
        rho = rho + (h_step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = hermitize(rho)
        record(i + 1, rho)
        if (i + 1) % check_every == 0:
            check(i + 1, rho)
    check(n, rho)

    sol.expectations = expect_out
    sol.final_state = rho
    return sol


def expect(op: Array, rho: Array) -> float:
    """Tr(op * rho) for a Hermitian op; small imaginary residue discarded."""
    op = np.asarray(op, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if op.shape != rho.shape:
        raise DimensionError(f"operator {op.shape} vs state {rho.shape}")
    if not is_hermitian(op, atol=1e-9):
        raise ValueError("expect() requires a Hermitian operator")
    val = np.trace(op @ rho)
    return float(val.real)


def partial_trace(rho: Array, keep: int) -> Array:
    """Trace a two-qubit density matrix down to qubit ``keep`` (1 or 2)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DimensionError(f"partial_trace expects dim 4, got {rho.shape}")
    if keep not in (1, 2):
        raise ValueError("keep must be 1 or 2")
    r = rho.reshape(2, 2, 2, 2)  # (q1, q2, q1', q2')
    if keep == 1:
        return np.einsum("ikjk->ij", r)
    return np.einsum("kikj->ij", r)


def two_qubit_op(op1: Array | None, op2: Array | None) -> Array:
    """kron with identity padding: op1 on qubit 1 (slow), op2 on qubit 2."""
    a = I2 if op1 is None else op1
    b = I2 if op2 is None else op2
    return kron(a, b)
