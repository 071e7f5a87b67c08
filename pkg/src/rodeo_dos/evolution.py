"""Time evolution exp(-i H t): exact (spectral) or Suzuki-Trotter product formulas."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from .circuit import (
    GateRecord,
    StateVector,
    apply_diagonal_phase,
    apply_pauli_exponential,
    basis_state,
    _controlled_block,
    _write_block,
)
from .hamiltonian import Hamiltonian, _check_dense, _eigh

DEFAULT_MAX_STEPS = 5000


@dataclass(frozen=True)
class TrotterConfig:
    order: int = 1
    delta: float = 0.1
    max_steps: int = DEFAULT_MAX_STEPS
    mode: Literal["trotter", "exact"] = "exact"

    def __post_init__(self):
        if not (self.delta > 0):
            raise ValueError("trotter.delta must be positive")
        if self.max_steps < 1:
            raise ValueError("trotter.max_steps must be >= 1")
        if self.order != 1 and (self.order < 2 or self.order % 2):
            raise ValueError(f"trotter.order must be 1 or even, got {self.order}")
        if self.mode not in ("trotter", "exact"):
            raise ValueError(f"trotter.mode must be 'trotter' or 'exact', got {self.mode!r}")


def suzuki_p(order: int) -> float:
    """Recursion weight p_m = 1 / (4 - 4**(1/(m-1))) of the order-m formula."""
    if order < 4 or order % 2:
        raise ValueError(f"suzuki_p needs an even order >= 4, got {order}")
    return 1.0 / (4.0 - 4.0 ** (1.0 / (order - 1)))


def _uncapped_steps(t, config: TrotterConfig) -> np.ndarray:
    m = config.order
    t = np.abs(np.asarray(t, dtype=float))
    raw = t ** (1.0 + 1.0 / m) / config.delta ** (1.0 / m)
    # guard against 10.000000000000002-style rounding before the ceiling
    return np.maximum(1, np.ceil(raw * (1 - 1e-12))).astype(np.int64)


def trotter_step_count(t, config: TrotterConfig):
    """Trotter number r for evolution time ``t`` (scalar or array), capped."""
    r = np.minimum(_uncapped_steps(t, config), config.max_steps)
    return int(r) if np.ndim(r) == 0 else r


def count_cap_hits(times, config: TrotterConfig) -> int:
    return int(np.count_nonzero(_uncapped_steps(times, config) > config.max_steps))


def _formula(order: int, n_terms: int) -> list[tuple[int, float]]:
    """(term index, time fraction) pairs in application order for S_m(1)."""
    if order == 1:
        return [(j, 1.0) for j in reversed(range(n_terms))]
    if order == 2:
        half = [(j, 0.5) for j in range(n_terms)]
        return half + half[::-1]
    p = suzuki_p(order)
    outer = [(j, w * p) for j, w in _formula(order - 2, n_terms)]
    inner = [(j, w * (1 - 4 * p)) for j, w in _formula(order - 2, n_terms)]
    return outer + outer + inner + outer + outer


def trotter_gate_sequence(
    h: Hamiltonian, t: float, config: TrotterConfig, steps: int | None = None
) -> list[GateRecord]:
    """Gates of one product-formula step S_m(t / r), in application order.

    ``r`` is ``steps`` if given, otherwise :func:`trotter_step_count`.
    Applying the returned list ``r`` times approximates ``exp(-i H t)``.
    Each gate is ``exp(-i angle P)`` for one Pauli term ``c P`` with
    ``angle = c * weight * t / r``.
    """
    r = trotter_step_count(t, config) if steps is None else int(steps)
    if r < 1:
        raise ValueError("steps must be >= 1")
    dt = t / r
    return [
        GateRecord("pauli-exponential", angle=h.terms[j].coeff * w * dt, paulis=h.terms[j].paulis)
        for j, w in _formula(config.order, len(h.terms))
    ]


@lru_cache(maxsize=64)
def _compiled_step(h: Hamiltonian, order: int) -> tuple[tuple, ...]:
    """S_m(dt) as segments whose angles scale with dt.

    Runs of diagonal (I/Z) gates are fused into one phase vector, so a
    commuting diagonal Hamiltonian compiles to a single segment.
    """
    segments: list = []
    for j, w in _formula(order, len(h.terms)):
        term = h.terms[j]
        if term.is_diagonal:
            vec = term.coeff * w * term.diagonal()
            if segments and segments[-1][0] == "diag":
                segments[-1] = ("diag", segments[-1][1] + vec)
            else:
                segments.append(("diag", vec))
        else:
            segments.append(("pauli", term.paulis, term.coeff * w))
    return tuple(segments)


def _apply_segments(sv, segments, dt, control):
    for seg in segments:
        if seg[0] == "diag":
            apply_diagonal_phase(sv, seg[1], dt, control)
        else:
            apply_pauli_exponential(sv, seg[1], seg[2] * dt, control)


def apply_trotter_evolution(
    sv: StateVector, h: Hamiltonian, t, config: TrotterConfig, control: int | None = None,
    steps=None,
) -> StateVector:
    """Apply ``S_m(t/r)**r``; ``t`` and ``steps`` may be per batch copy."""
    t = np.asarray(t, dtype=float)
    r = trotter_step_count(t, config) if steps is None else np.asarray(steps, dtype=np.int64)
    segments = _compiled_step(h, config.order)
    if len(segments) == 1 and segments[0][0] == "diag":
        # a single diagonal phase: r repetitions of dt compose to one of t
        apply_diagonal_phase(sv, segments[0][1], t, control)
        return sv
    r = np.broadcast_to(r, t.shape) if t.ndim else r
    dt = t / r
    for s in range(int(np.max(r))):
        step_dt = np.where(s < r, dt, 0.0)
        _apply_segments(sv, segments, step_dt, control)
    return sv


def apply_exact_evolution(
    sv: StateVector, h: Hamiltonian, t, control: int | None = None
) -> StateVector:
    """exp(-i H t) through the cached eigen-decomposition of ``h``."""
    _check_dense(h.qubits)
    w, v = _eigh(h)
    t = np.asarray(t, dtype=float).reshape(-1, 1, 1)
    block = _controlled_block(sv, control)
    coeffs = block @ v.conj()
    coeffs *= np.exp(-1j * w[None, None, :] * t)
    _write_block(sv, control, coeffs @ v.T)
    return sv


def controlled_time_evolution(
    sv: StateVector, control: int, h: Hamiltonian, t, config: TrotterConfig
) -> StateVector:
    """Controlled exp(-i H t) on the ``|1>`` branch of ancilla ``control``."""
    if sv.system_qubits != h.qubits:
        raise ValueError(
            f"state has {sv.system_qubits} system qubits, Hamiltonian has {h.qubits}"
        )
    sv._check_index(control)
    if config.mode == "exact":
        return apply_exact_evolution(sv, h, t, control)
    return apply_trotter_evolution(sv, h, t, config, control)


def exact_unitary(h: Hamiltonian, t: float) -> np.ndarray:
    w, v = _eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def trotter_unitary(h: Hamiltonian, t: float, config: TrotterConfig, steps: int | None = None):
    """Dense matrix of ``S_m(t/r)**r`` built by evolving every basis state."""
    _check_dense(h.qubits)
    dim = h.dim
    sv = basis_state(0, h.qubits, 0, batch=dim)
    sv.amplitudes[...] = np.eye(dim)
    r = trotter_step_count(t, config) if steps is None else steps
    apply_trotter_evolution(sv, h, np.full(dim, float(t)), config, steps=np.full(dim, r))
    # row b holds the image of |b>
    return sv.amplitudes.T.copy()


def operator_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))

