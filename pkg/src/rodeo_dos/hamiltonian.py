"""Pauli-string Hamiltonians, the 1D transverse-field Ising model and the
dense exact-diagonalization oracle.

Qubit ordering is big-endian: letter ``q`` of a Pauli string acts on qubit
``q`` and qubit 0 is the most significant bit of a basis index, so the basis
state ``|5>`` of five qubits is ``|00101>``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Iterable, Sequence

import numpy as np

MAX_DENSE_QUBITS = 12
DEFAULT_MERGE_TOL = 1e-9

_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class CapabilityError(ValueError):
    """Raised when a request exceeds what dense linear algebra can handle."""


@dataclass(frozen=True)
class PauliString:
    coeff: float
    paulis: str

    def __post_init__(self):
        object.__setattr__(self, "paulis", self.paulis.upper())
        if not math.isfinite(self.coeff):
            raise ValueError(f"coefficient must be finite, got {self.coeff}")
        if not self.paulis or set(self.paulis) - set("IXYZ"):
            raise ValueError(f"invalid Pauli letters {self.paulis!r}")

    @property
    def qubits(self) -> int:
        return len(self.paulis)

    @property
    def is_identity(self) -> bool:
        """True for a constant energy shift (all letters I)."""
        return set(self.paulis) == {"I"}

    @property
    def is_diagonal(self) -> bool:
        return set(self.paulis) <= {"I", "Z"}

    def masks(self) -> tuple[int, int, int]:
        """Bit masks ``(x, z, n_y)`` of the string.

        ``P|b> = i**n_y * (-1)**popcount(b & z) |b ^ x>`` with Y counted in
        both masks.
        """
        m = self.qubits
        x = z = 0
        n_y = 0
        for q, letter in enumerate(self.paulis):
            bit = 1 << (m - 1 - q)
            if letter in "XY":
                x |= bit
            if letter in "ZY":
                z |= bit
            if letter == "Y":
                n_y += 1
        return x, z, n_y

    def action(self) -> tuple[np.ndarray, np.ndarray]:
        """Permutation and phases so that ``(P psi)[perm] = phase * psi``."""
        x, z, n_y = self.masks()
        basis = np.arange(2**self.qubits)
        parity = np.array([bin(b & z).count("1") & 1 for b in basis])
        phase = (1j**n_y) * (1 - 2 * parity)
        return basis ^ x, phase.astype(complex)

    def diagonal(self) -> np.ndarray:
        """Real diagonal of a Z-type string (+-1 entries)."""
        if not self.is_diagonal:
            raise ValueError(f"{self.paulis} is not diagonal")
        _, phase = self.action()
        return phase.real.copy()

    def to_matrix(self) -> np.ndarray:
        return self.coeff * reduce(np.kron, [_PAULI_MATRICES[p] for p in self.paulis])


@dataclass(frozen=True)
class Hamiltonian:
    qubits: int
    terms: tuple[PauliString, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.qubits < 1:
            raise ValueError("a Hamiltonian needs at least one qubit")
        if not self.terms:
            raise ValueError("a Hamiltonian needs at least one term")
        for term in self.terms:
            if term.qubits != self.qubits:
                raise ValueError(
                    f"term {term.paulis} acts on {term.qubits} qubits, expected {self.qubits}"
                )

    @property
    def dim(self) -> int:
        return 2**self.qubits

    @property
    def is_traceless(self) -> bool:
        return not any(t.is_identity for t in self.terms)

    @property
    def is_diagonal(self) -> bool:
        return all(t.is_diagonal for t in self.terms)

    def to_matrix(self) -> np.ndarray:
        _check_dense(self.qubits)
        mat = np.zeros((self.dim, self.dim), dtype=complex)
        for term in self.terms:
            perm, phase = term.action()
            # column b of P holds phase[b] at row perm[b]
            mat[perm, np.arange(self.dim)] += term.coeff * phase
        return mat

    def to_dict(self) -> dict:
        return {
            "qubits": self.qubits,
            "terms": [{"coeff": t.coeff, "paulis": t.paulis} for t in self.terms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "Hamiltonian":
        terms = [PauliString(float(t["coeff"]), str(t["paulis"])) for t in data["terms"]]
        return cls(int(data["qubits"]), tuple(terms))

    @classmethod
    def from_json(cls, text: str) -> "Hamiltonian":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TfimParams:
    spins: int
    J: float = 1.0
    B: float = 0.0
    periodic: bool = True

    def __post_init__(self):
        if self.spins < 1:
            raise ValueError("spins must be >= 1")
        if self.B < 0:
            raise ValueError("field B must be >= 0")


def build_tfim(params: TfimParams) -> Hamiltonian:
    """H = -J sum_<i,j> Z_i Z_j - B sum_i X_i on a chain.

    Periodic bonds are enumerated literally as ``i -> (i+1) mod M`` for every
    site, so a two-site ring carries the (0, 1) bond twice and a single spin
    has no bond at all (a self-bond ``Z_0 Z_0`` is dropped).
    """
    m = params.spins
    n_bonds = m if params.periodic else m - 1
    terms = []
    for i in range(n_bonds):
        j = (i + 1) % m
        if i == j:
            continue
        letters = ["I"] * m
        letters[i] = letters[j] = "Z"
        terms.append(PauliString(-params.J, "".join(letters)))
    if params.B > 0:
        for i in range(m):
            letters = ["I"] * m
            letters[i] = "X"
            terms.append(PauliString(-params.B, "".join(letters)))
    if not terms:
        # single spin without field: keep one zero term so the operator exists
        terms.append(PauliString(0.0, "Z"))
    return Hamiltonian(m, tuple(terms))


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues with optional squared eigenvector overlaps.

    ``overlaps[x, n]`` is ``|<n|x>|**2`` for eigenstate ``x`` (row) and
    computational basis state ``n`` (column).
    """

    eigenvalues: np.ndarray
    overlaps: np.ndarray | None = None
    eigenvectors: np.ndarray | None = field(default=None, repr=False)
    merge_tol: float = DEFAULT_MERGE_TOL

    @property
    def qubits(self) -> int:
        return int(round(math.log2(len(self.eigenvalues))))

    @property
    def levels(self) -> list[tuple[float, int]]:
        return level_degeneracies(self, self.merge_tol)

    def levels_csv(self) -> str:
        return levels_to_csv(self.levels)


def _check_dense(qubits: int) -> None:
    if qubits > MAX_DENSE_QUBITS:
        raise CapabilityError(
            f"dense work on {qubits} qubits exceeds the limit of {MAX_DENSE_QUBITS}"
        )


@lru_cache(maxsize=32)
def _eigh(h: Hamiltonian) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(h.to_matrix())
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def exact_spectrum(
    h: Hamiltonian, with_overlaps: bool = False, merge_tol: float = DEFAULT_MERGE_TOL
) -> Spectrum:
    """Diagonalize ``h`` densely; the decomposition is cached per Hamiltonian."""
    _check_dense(h.qubits)
    w, v = _eigh(h)
    overlaps = None
    if with_overlaps:
        overlaps = (np.abs(v) ** 2).T
        overlaps.setflags(write=False)
    return Spectrum(w, overlaps, v, merge_tol)


def level_degeneracies(
    spectrum: Spectrum | Sequence[float], merge_tol: float = DEFAULT_MERGE_TOL
) -> list[tuple[float, int]]:
    """Group sorted eigenvalues into ``(mean energy, multiplicity)`` levels.

    Neighbouring eigenvalues closer than ``merge_tol`` are chained into one
    level.
    """
    if merge_tol < 0:
        raise ValueError("merge_tol must be >= 0")
    values = spectrum.eigenvalues if isinstance(spectrum, Spectrum) else spectrum
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return []
    groups: list[list[float]] = [[values[0]]]
    for prev, cur in zip(values[:-1], values[1:]):
        if cur - prev <= merge_tol:
            groups[-1].append(cur)
        else:
            groups.append([cur])
    return [(float(np.mean(g)), len(g)) for g in groups]


def levels_to_csv(levels: Iterable[tuple[float, int]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["energy", "multiplicity"])
    for energy, mult in levels:
        writer.writerow([repr(float(energy)), int(mult)])
    return buf.getvalue()


def levels_from_csv(text: str) -> list[tuple[float, int]]:
    rows = csv.DictReader(io.StringIO(text))
    return [(float(r["energy"]), int(r["multiplicity"])) for r in rows]
