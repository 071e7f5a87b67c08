"""State-vector engine for ``N`` ancillas followed by ``M`` system qubits.

Global qubit ``k < N`` is ancilla ``k``; system qubit ``q`` sits at global
index ``N + q``.  Global qubit 0 is the most significant bit of an amplitude
index, so the amplitude of ``|a_0 ... a_{N-1}> (x) |n>`` lives at
``a * 2**M + n``.

Amplitudes may carry a leading batch axis: shape ``(dim,)`` for a single
state or ``(batch, dim)`` for independent copies evolved in lock-step (used
to run every round of a rodeo cell at once).  Every gate accepts per-copy
angles with shape ``(batch,)``.  Gates mutate the state in place and return
it.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .hamiltonian import MAX_DENSE_QUBITS, PauliString

NORM_TOL = 1e-10
_SQRT1_2 = 1.0 / np.sqrt(2.0)
DUMP_MAGIC = b"RDSV"


class StateVector:
    def __init__(self, ancillas: int, system_qubits: int, amplitudes: np.ndarray):
        self.ancillas = int(ancillas)
        self.system_qubits = int(system_qubits)
        amps = np.ascontiguousarray(amplitudes, dtype=complex)
        if amps.ndim not in (1, 2) or amps.shape[-1] != 2**self.num_qubits:
            raise ValueError(
                f"amplitudes of shape {amps.shape} do not match {self.num_qubits} qubits"
            )
        self.amplitudes = amps

    @property
    def num_qubits(self) -> int:
        return self.ancillas + self.system_qubits

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    @property
    def batch(self) -> int | None:
        return self.amplitudes.shape[0] if self.amplitudes.ndim == 2 else None

    def copy(self) -> "StateVector":
        return StateVector(self.ancillas, self.system_qubits, self.amplitudes.copy())

    def norm(self) -> np.ndarray | float:
        n = np.sum(np.abs(self.amplitudes) ** 2, axis=-1)
        return n if self.batch is not None else float(n)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def _rows(self) -> np.ndarray:
        return self.amplitudes.reshape(-1, self.dim)

    def _split(self, qubit: int) -> np.ndarray:
        """View of shape ``(batch, 2**qubit, 2, rest)`` exposing ``qubit``."""
        self._check_index(qubit)
        return self.amplitudes.reshape(-1, 2**qubit, 2, 2 ** (self.num_qubits - qubit - 1))

    def _check_index(self, qubit: int) -> None:
        if not 0 <= qubit < self.num_qubits:
            raise IndexError(f"qubit {qubit} out of range for {self.num_qubits} qubits")


def init_rider_state(N: int, M: int, n: int, batch: int | None = None) -> StateVector:
    """Ancillas all in ``|1>`` and the system in basis state ``|n>``."""
    if N < 0 or M < 1:
        raise ValueError("need N >= 0 ancillas and M >= 1 system qubits")
    if not 0 <= n < 2**M:
        raise ValueError(f"basis index {n} out of range for {M} system qubits")
    dim = 2 ** (N + M)
    index = (2**N - 1) * 2**M + n
    shape = (dim,) if batch is None else (batch, dim)
    amps = np.zeros(shape, dtype=complex)
    amps[..., index] = 1.0
    return StateVector(N, M, amps)


def basis_state(N: int, M: int, index: int, batch: int | None = None) -> StateVector:
    dim = 2 ** (N + M)
    if not 0 <= index < dim:
        raise ValueError(f"index {index} out of range")
    amps = np.zeros((dim,) if batch is None else (batch, dim), dtype=complex)
    amps[..., index] = 1.0
    return StateVector(N, M, amps)


def apply_hadamard(sv: StateVector, qubit: int) -> StateVector:
    a = sv._split(qubit)
    zero = a[:, :, 0, :].copy()
    one = a[:, :, 1, :]
    a[:, :, 0, :] = (zero + one) * _SQRT1_2
    a[:, :, 1, :] = (zero - one) * _SQRT1_2
    return sv


def apply_pauli_x(sv: StateVector, qubit: int) -> StateVector:
    a = sv._split(qubit)
    a[:, :, [0, 1], :] = a[:, :, [1, 0], :]
    return sv


def _per_copy(values, sv: StateVector) -> np.ndarray:
    """Broadcast a scalar or per-copy array to shape ``(batch_rows, 1, 1)``."""
    v = np.asarray(values, dtype=float)
    rows = sv._rows().shape[0]
    if v.ndim == 0:
        return np.full((rows, 1, 1), float(v))
    if v.shape != (rows,):
        raise ValueError(f"per-copy values of shape {v.shape} do not match batch {rows}")
    return v.reshape(rows, 1, 1)


def apply_phase_shift(sv: StateVector, qubit: int, phi) -> StateVector:
    """P(phi): multiply the ``|1>`` branch of ``qubit`` by ``exp(i phi)``."""
    a = sv._split(qubit)
    a[:, :, 1, :] *= np.exp(1j * _per_copy(phi, sv))
    return sv


@dataclass(frozen=True)
class GateRecord:
    """One gate of a circuit; targets are system-qubit indices for payloads.

    ``kind`` is one of ``hadamard``, ``phase``, ``pauli-exponential`` (the
    unitary ``exp(-i angle P)`` for the Pauli string ``paulis`` across all
    system qubits) or ``dense`` (a unitary ``matrix`` on all system qubits).
    Either of the last two becomes a controlled gate when applied through
    :func:`apply_controlled_unitary`.
    """

    kind: Literal["hadamard", "phase", "pauli-exponential", "dense"]
    targets: tuple[int, ...] = ()
    angle: float = 0.0
    paulis: str = ""
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("hadamard", "phase", "pauli-exponential", "dense"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "dense":
            if self.matrix is None:
                raise ValueError("dense gate needs a matrix")
            mat = np.asarray(self.matrix, dtype=complex)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError("dense payload must be square")
            if mat.shape[0] > 2**MAX_DENSE_QUBITS:
                raise ValueError("dense payload exceeds the qubit limit")
            if not np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), atol=NORM_TOL):
                raise ValueError("dense payload is not unitary")
            object.__setattr__(self, "matrix", mat)
        if self.kind == "pauli-exponential":
            PauliString(1.0, self.paulis)
            object.__setattr__(self, "paulis", self.paulis.upper())
            object.__setattr__(
                self, "targets", tuple(i for i, p in enumerate(self.paulis) if p != "I")
            )

    def scaled(self, factor: float) -> "GateRecord":
        return GateRecord(self.kind, self.targets, self.angle * factor, self.paulis, self.matrix)


_ACTION_CACHE: dict[str, tuple[np.ndarray, np.ndarray]] = {}


def pauli_action(paulis: str) -> tuple[np.ndarray, np.ndarray]:
    """Cached ``(perm, phase)`` with ``(P psi)[perm] = phase * psi``."""
    hit = _ACTION_CACHE.get(paulis)
    if hit is None:
        hit = PauliString(1.0, paulis).action()
        _ACTION_CACHE[paulis] = hit
    return hit


def _controlled_block(sv: StateVector, control: int | None) -> np.ndarray:
    """View ``(batch, k, 2**M)`` of the system amplitudes to act on."""
    m = sv.system_qubits
    if control is None:
        return sv.amplitudes.reshape(-1, 2 ** sv.ancillas, 2**m)
    if control >= sv.ancillas:
        raise ValueError(
            f"control {control} must be an ancilla: payloads act on all system qubits"
        )
    a = sv._split(control)
    block = a[:, :, 1, :]
    # rest = (remaining ancillas) x system; both are contiguous in memory
    return block.reshape(block.shape[0], -1, 2**m)


def _write_block(sv: StateVector, control: int | None, new: np.ndarray) -> None:
    m = sv.system_qubits
    if control is None:
        sv.amplitudes.reshape(-1, 2 ** sv.ancillas, 2**m)[...] = new
    else:
        a = sv._split(control)
        a[:, :, 1, :] = new.reshape(a.shape[0], a.shape[1], -1)


def apply_pauli_exponential(
    sv: StateVector, paulis: str, angle, control: int | None = None
) -> StateVector:
    """exp(-i angle P) on the system register, optionally ancilla-controlled.

    ``angle`` may be a scalar or one value per batch copy.
    """
    if len(paulis) != sv.system_qubits:
        raise ValueError("Pauli string length does not match the system register")
    theta = _per_copy(angle, sv)
    block = _controlled_block(sv, control)
    perm, phase = pauli_action(paulis)
    if set(paulis) <= {"I", "Z"}:
        diag = phase.real
        new = block * np.exp(-1j * theta * diag)
    else:
        p_block = np.empty_like(block)
        p_block[..., perm] = block * phase
        new = np.cos(theta) * block - 1j * np.sin(theta) * p_block
    _write_block(sv, control, new)
    return sv


def apply_diagonal_phase(
    sv: StateVector, phases: np.ndarray, scale, control: int | None = None
) -> StateVector:
    """Multiply system amplitude ``b`` by ``exp(-i scale * phases[b])``."""
    s = _per_copy(scale, sv)
    block = _controlled_block(sv, control)
    _write_block(sv, control, block * np.exp(-1j * s * np.asarray(phases)[None, None, :]))
    return sv


def apply_dense(sv: StateVector, matrix: np.ndarray, control: int | None = None) -> StateVector:
    """Apply a system-wide unitary; ``matrix`` may be ``(d, d)`` or ``(batch, d, d)``."""
    block = _controlled_block(sv, control)
    mat = np.asarray(matrix)
    if mat.ndim == 2:
        new = block @ mat.T
    else:
        new = np.einsum("bij,bkj->bki", mat, block)
    _write_block(sv, control, new)
    return sv


def apply_gate(sv: StateVector, gate: GateRecord, control: int | None = None) -> StateVector:
    if gate.kind == "hadamard":
        for q in gate.targets:
            apply_hadamard(sv, q)
        return sv
    if gate.kind == "phase":
        for q in gate.targets:
            apply_phase_shift(sv, q, gate.angle)
        return sv
    if gate.kind == "pauli-exponential":
        return apply_pauli_exponential(sv, gate.paulis, gate.angle, control)
    return apply_dense(sv, gate.matrix, control)


def apply_controlled_unitary(sv: StateVector, control: int, payload: GateRecord) -> StateVector:
    """Apply ``payload`` to the system register on the control's ``|1>`` subspace."""
    sv._check_index(control)
    if payload.kind not in ("pauli-exponential", "dense"):
        raise ValueError("only system payloads (pauli-exponential, dense) can be controlled")
    if control >= sv.ancillas:
        raise ValueError(f"control {control} overlaps the payload's system targets")
    if payload.kind == "dense" and payload.matrix.shape[0] != 2**sv.system_qubits:
        raise ValueError("dense payload size does not match the system register")
    return apply_gate(sv, payload, control)


def expect_z(sv: StateVector, qubit: int):
    """<sigma^z> of one qubit: +1 for ``|0>``, -1 for ``|1>``."""
    a = sv._split(qubit)
    p = np.abs(a) ** 2
    value = p[:, :, 0, :].sum(axis=(1, 2)) - p[:, :, 1, :].sum(axis=(1, 2))
    value = np.clip(value, -1.0, 1.0)
    return value if sv.batch is not None else float(value[0])


def expect_z_product(sv: StateVector, qubits) -> np.ndarray | float:
    """<prod_k sigma^z_k> over the listed qubits."""
    qubits = list(qubits)
    for q in qubits:
        sv._check_index(q)
    n = sv.num_qubits
    index = np.arange(sv.dim)
    parity = np.zeros(sv.dim, dtype=int)
    for q in qubits:
        parity ^= (index >> (n - 1 - q)) & 1
    sign = 1 - 2 * parity
    value = np.clip(sv.probabilities().reshape(-1, sv.dim) @ sign, -1.0, 1.0)
    return value if sv.batch is not None else float(value[0])


def sample_z(sv: StateVector, qubit: int, shots: int, rng: np.random.Generator):
    """Mean of ``shots`` simulated +-1 measurements of ``sigma^z`` on ``qubit``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    ez = np.atleast_1d(expect_z(sv, qubit))
    p_one = np.clip((1.0 - ez) / 2.0, 0.0, 1.0)
    ones = rng.binomial(shots, p_one)
    value = (shots - 2 * ones) / shots
    return value if sv.batch is not None else float(value[0])


def dump_statevector(sv: StateVector) -> bytes:
    """Binary dump: ``b"RDSV"``, N and M as little-endian u32, 4 pad bytes,
    then interleaved little-endian float64 (real, imag) pairs.

    Batched states are dumped row after row.
    """
    header = DUMP_MAGIC + struct.pack("<III", sv.ancillas, sv.system_qubits, 0)
    body = np.ascontiguousarray(sv._rows()).view("<f8").astype("<f8").tobytes()
    return header + body


def load_statevector(data: bytes) -> StateVector:
    if len(data) < 16 or data[:4] != DUMP_MAGIC:
        raise ValueError("not a statevector dump")
    n, m, _ = struct.unpack("<III", data[4:16])
    flat = np.frombuffer(data[16:], dtype="<f8")
    amps = flat[0::2] + 1j * flat[1::2]
    dim = 2 ** (n + m)
    if amps.size % dim:
        raise ValueError("truncated statevector dump")
    if amps.size > dim:
        amps = amps.reshape(-1, dim)
    return StateVector(n, m, amps)
