import numpy as np
import pytest
import scipy.linalg

from rodeo_dos.circuit import (
    GateRecord,
    StateVector,
    apply_controlled_unitary,
    apply_hadamard,
    apply_pauli_exponential,
    apply_phase_shift,
    basis_state,
    dump_statevector,
    expect_z,
    expect_z_product,
    init_rider_state,
    load_statevector,
    sample_z,
)
from rodeo_dos.hamiltonian import TfimParams, build_tfim, exact_spectrum

S = 1 / np.sqrt(2)


def random_state(rng, n_anc, m, batch=None):
    shape = (2 ** (n_anc + m),) if batch is None else (batch, 2 ** (n_anc + m))
    amps = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    amps /= np.linalg.norm(amps, axis=-1, keepdims=True)
    return StateVector(n_anc, m, amps)


def random_unitary(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.mark.parametrize(
    "N, M, n, index",
    [(1, 2, 0, 0b100), (2, 1, 1, 0b111), (1, 5, 5, 0b100101)],
)
def test_rider_state(N, M, n, index):
    sv = init_rider_state(N, M, n)
    assert np.count_nonzero(sv.amplitudes) == 1
    assert sv.amplitudes[index] == 1


def test_rider_state_system_bits():
    sv = init_rider_state(1, 5, 5)
    idx = int(np.flatnonzero(sv.amplitudes)[0])
    assert format(idx, "06b") == "1" + "00101"


def test_rider_state_range():
    with pytest.raises(ValueError):
        init_rider_state(1, 2, 4)


def test_hadamard_on_one_gives_minus():
    sv = basis_state(1, 1, 0b10)
    apply_hadamard(sv, 0)
    np.testing.assert_allclose(sv.amplitudes, [S, 0, -S, 0], atol=1e-15)


def test_hadamard_on_zero_gives_plus():
    sv = basis_state(1, 1, 0)
    apply_hadamard(sv, 0)
    np.testing.assert_allclose(sv.amplitudes, [S, 0, S, 0], atol=1e-15)


def test_hadamard_involution():
    rng = np.random.default_rng(1)
    sv = random_state(rng, 2, 2)
    before = sv.amplitudes.copy()
    for q in range(4):
        apply_hadamard(sv, q)
        apply_hadamard(sv, q)
    np.testing.assert_allclose(sv.amplitudes, before, atol=1e-12)


def test_index_errors():
    sv = basis_state(1, 1, 0)
    with pytest.raises(IndexError):
        apply_hadamard(sv, 2)
    with pytest.raises(IndexError):
        apply_phase_shift(sv, -1, 0.1)
    with pytest.raises(IndexError):
        expect_z(sv, 5)


def test_phase_shift():
    sv = basis_state(1, 1, 0b10)
    apply_phase_shift(sv, 0, np.pi)
    np.testing.assert_allclose(sv.amplitudes, [0, 0, -1, 0], atol=1e-15)

    rng = np.random.default_rng(2)
    sv = random_state(rng, 1, 2)
    before = sv.amplitudes.copy()
    apply_phase_shift(sv, 1, 0.0)
    np.testing.assert_array_equal(sv.amplitudes, before)

    a, b = sv.copy(), sv.copy()
    apply_phase_shift(apply_phase_shift(a, 2, 0.4), 2, 1.1)
    apply_phase_shift(b, 2, 1.5)
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-12)


def test_controlled_unitary_idle_when_control_zero():
    rng = np.random.default_rng(3)
    sys = random_state(rng, 0, 2).amplitudes
    sv = StateVector(1, 2, np.concatenate([sys, np.zeros(4)]))
    before = sv.amplitudes.copy()
    gate = GateRecord("dense", matrix=random_unitary(rng, 4))
    apply_controlled_unitary(sv, 0, gate)
    np.testing.assert_array_equal(sv.amplitudes, before)


def test_controlled_evolution_phase_on_eigenstate():
    h = build_tfim(TfimParams(3, B=0.5))
    spec = exact_spectrum(h)
    x = 2
    eigvec = spec.eigenvectors[:, x]
    t = 1.7
    u = scipy.linalg.expm(-1j * h.to_matrix() * t)
    sv = StateVector(1, 3, np.concatenate([np.zeros(8), eigvec]))
    apply_controlled_unitary(sv, 0, GateRecord("dense", matrix=u))
    np.testing.assert_allclose(
        sv.amplitudes[8:], np.exp(-1j * spec.eigenvalues[x] * t) * eigvec, atol=1e-12
    )


def test_controlled_x_makes_bell_state():
    sv = basis_state(1, 1, 0)
    apply_hadamard(sv, 0)
    apply_controlled_unitary(sv, 0, GateRecord("dense", matrix=np.array([[0, 1], [1, 0]])))
    np.testing.assert_allclose(sv.amplitudes, [S, 0, 0, S], atol=1e-15)
    assert sv.norm() == pytest.approx(1.0, abs=1e-12)


def test_controlled_rejects_system_control():
    sv = basis_state(1, 2, 0)
    gate = GateRecord("pauli-exponential", angle=0.3, paulis="XZ")
    with pytest.raises(ValueError):
        apply_controlled_unitary(sv, 1, gate)
    with pytest.raises(ValueError):
        GateRecord("dense", matrix=np.ones((2, 2)))


def test_pauli_exponential_matches_expm():
    rng = np.random.default_rng(4)
    sv = random_state(rng, 0, 3)
    paulis, theta = "XYZ", 0.37
    from rodeo_dos.hamiltonian import Hamiltonian, PauliString

    mat = Hamiltonian(3, (PauliString(1.0, paulis),)).to_matrix()
    expected = scipy.linalg.expm(-1j * theta * mat) @ sv.amplitudes
    apply_pauli_exponential(sv, paulis, theta)
    np.testing.assert_allclose(sv.amplitudes, expected, atol=1e-12)


def test_expect_z_values():
    assert expect_z(basis_state(1, 1, 0b10), 0) == -1.0
    assert expect_z(basis_state(1, 1, 0b00), 0) == 1.0
    plus = basis_state(1, 1, 0)
    apply_hadamard(plus, 0)
    assert expect_z(plus, 0) == pytest.approx(0.0, abs=1e-15)
    assert expect_z_product(basis_state(2, 1, 0b110), [0, 1]) == 1.0
    assert expect_z_product(basis_state(2, 1, 0b100), [0, 1]) == -1.0


def test_expect_z_range_on_random_states():
    rng = np.random.default_rng(5)
    sv = random_state(rng, 2, 3, batch=200)
    for q in range(5):
        z = expect_z(sv, q)
        assert np.all((z >= -1) & (z <= 1))
    for index in range(32):
        for q in range(5):
            assert abs(expect_z(basis_state(2, 3, index), q)) == 1.0


def test_sample_z():
    rng = np.random.default_rng(6)
    assert sample_z(basis_state(1, 1, 0b10), 0, 17, rng) == -1.0
    plus = basis_state(1, 1, 0)
    apply_hadamard(plus, 0)
    assert abs(sample_z(plus, 0, 10_000, rng)) < 0.03
    a = sample_z(plus, 0, 100, np.random.default_rng(9))
    b = sample_z(plus, 0, 100, np.random.default_rng(9))
    assert a == b
    with pytest.raises(ValueError):
        sample_z(plus, 0, 0, rng)


def _random_gate(rng, sv):
    kind = rng.integers(5)
    n = sv.num_qubits
    if kind == 0:
        apply_hadamard(sv, int(rng.integers(n)))
    elif kind == 1:
        apply_phase_shift(sv, int(rng.integers(n)), rng.uniform(-np.pi, np.pi))
    elif kind == 2:
        paulis = "".join(rng.choice(list("IXYZ"), sv.system_qubits))
        apply_pauli_exponential(sv, paulis, rng.uniform(-3, 3))
    elif kind == 3:
        paulis = "".join(rng.choice(list("IXYZ"), sv.system_qubits))
        gate = GateRecord("pauli-exponential", angle=rng.uniform(-3, 3), paulis=paulis)
        apply_controlled_unitary(sv, int(rng.integers(sv.ancillas)), gate)
    else:
        gate = GateRecord("dense", matrix=random_unitary(rng, 2**sv.system_qubits))
        apply_controlled_unitary(sv, int(rng.integers(sv.ancillas)), gate)


def test_unitarity_over_many_random_gates():
    rng = np.random.default_rng(7)
    sv = random_state(rng, 2, 2)
    for _ in range(10_000):
        _random_gate(rng, sv)
    assert abs(sv.norm() - 1.0) < 1e-10


def test_linearity():
    rng = np.random.default_rng(8)
    a, b = random_state(rng, 1, 2), random_state(rng, 1, 2)
    alpha, beta = 0.6, 0.8j
    combo = StateVector(1, 2, alpha * a.amplitudes + beta * b.amplitudes)
    gate_rng = np.random.default_rng(99)
    gates = [np.random.default_rng(int(s)) for s in gate_rng.integers(1 << 30, size=50)]
    for sv in (a, b, combo):
        for g in gates:
            _random_gate(np.random.default_rng(g.bit_generator.state["state"]["state"] % (1 << 30)), sv)
    np.testing.assert_allclose(combo.amplitudes, alpha * a.amplitudes + beta * b.amplitudes,
                               atol=1e-12)


def test_batched_gates_match_single():
    rng = np.random.default_rng(10)
    batch = random_state(rng, 1, 2, batch=4)
    phis = rng.uniform(-3, 3, 4)
    singles = [StateVector(1, 2, batch.amplitudes[i].copy()) for i in range(4)]
    apply_hadamard(batch, 0)
    apply_phase_shift(batch, 0, phis)
    apply_pauli_exponential(batch, "XY", phis, control=0)
    for i, sv in enumerate(singles):
        apply_hadamard(sv, 0)
        apply_phase_shift(sv, 0, phis[i])
        apply_pauli_exponential(sv, "XY", phis[i], control=0)
        np.testing.assert_allclose(batch.amplitudes[i], sv.amplitudes, atol=1e-14)


def test_statevector_dump_roundtrip():
    rng = np.random.default_rng(11)
    sv = random_state(rng, 1, 3)
    data = dump_statevector(sv)
    assert data[:4] == b"RDSV" and len(data) == 16 + 16 * 16
    assert int.from_bytes(data[4:8], "little") == 1
    assert int.from_bytes(data[8:12], "little") == 3
    back = load_statevector(data)
    np.testing.assert_array_equal(back.amplitudes, sv.amplitudes)
    assert np.frombuffer(data[16:32], "<f8")[0] == sv.amplitudes[0].real
    with pytest.raises(ValueError):
        load_statevector(b"XXXX" + data[4:])
