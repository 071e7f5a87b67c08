"""Rodeo-algorithm Score Averages and the number-of-states scan.

One *cell* is a (basis input ``n``, gridpoint ``l``) pair.  Each cell draws
its evolution times from its own stream derived from ``(seed, n, l)``, so a
scan gives identical numbers under any worker count, schedule or cell
subset.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from .circuit import (
    apply_hadamard,
    apply_phase_shift,
    expect_z,
    expect_z_product,
    init_rider_state,
    sample_z,
)
from .evolution import TrotterConfig, controlled_time_evolution, count_cap_hits
from .hamiltonian import Hamiltonian, Spectrum, exact_spectrum


@dataclass(frozen=True)
class RodeoParams:
    ancillas: int = 1
    rounds: int = 500
    tau: float = 0.0
    dev: float = 20.0
    seed: int = 0
    shots: int | None = None  # None reads exact expectation values
    convention: Literal["sequential", "simultaneous"] = "sequential"

    def __post_init__(self):
        if self.ancillas < 1:
            raise ValueError("ancillas must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not (self.dev > 0):
            raise ValueError("dev must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.convention not in ("sequential", "simultaneous"):
            raise ValueError(f"unknown measurement convention {self.convention!r}")


@dataclass(frozen=True)
class EnergyGrid:
    start: float
    end: float
    step: float

    def __post_init__(self):
        if not (self.step > 0):
            raise ValueError("grid step must be positive")
        if self.end < self.start:
            raise ValueError("grid end must be >= start")

    def __len__(self) -> int:
        return int(math.floor((self.end - self.start) / self.step + 0.5)) + 1

    @property
    def energies(self) -> np.ndarray:
        ell = np.arange(len(self))
        return np.round(self.start + ell * self.step, 12)


class ScoreAverage(NamedTuple):
    mean: float
    stderr: float


@dataclass
class NosEstimate:
    grid: EnergyGrid
    omega: np.ndarray
    stderr: np.ndarray
    theory: np.ndarray | None = None
    per_input_sa: np.ndarray | None = None  # shape (gridpoints, 2**M)
    per_input_stderr: np.ndarray | None = None
    cap_hits: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def energies(self) -> np.ndarray:
        return self.grid.energies

    def clamped(self) -> np.ndarray:
        """Omega with negative noise clipped to zero (for thermodynamics)."""
        return np.clip(self.omega, 0.0, None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["energy", "omega", "stderr", "theory"])
        for i, e in enumerate(self.energies):
            theory = "" if self.theory is None else repr(float(self.theory[i]))
            w.writerow([repr(float(e)), repr(float(self.omega[i])), repr(float(self.stderr[i])), theory])
        return buf.getvalue()

    def per_input_csv(self) -> str:
        if self.per_input_sa is None:
            raise ValueError("scan was run without per-input output")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["energy", "n", "sa", "stderr"])
        for i, e in enumerate(self.energies):
            for n in range(self.per_input_sa.shape[1]):
                w.writerow([
                    repr(float(e)), n,
                    repr(float(self.per_input_sa[i, n])),
                    repr(float(self.per_input_stderr[i, n])),
                ])
        return buf.getvalue()


def read_scan_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(energy, omega, stderr)`` arrays from a scan CSV."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("scan CSV has no rows")
    e = np.array([float(r["energy"]) for r in rows])
    o = np.array([float(r["omega"]) for r in rows])
    s = np.array([float(r["stderr"]) for r in rows])
    return e, o, s


def cell_rng(seed: int, n: int, ell: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, ell)))


def sample_times(params: RodeoParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. evolution times from Normal(tau, dev**2)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return rng.normal(params.tau, params.dev, size=count)


def round_scores(
    h: Hamiltonian,
    n: int,
    guess: float,
    times: np.ndarray,
    trotter: TrotterConfig,
    convention: str = "sequential",
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Simulate one rodeo circuit per row of ``times`` (shape ``(rounds, N)``).

    Returns the per-ancilla <sigma^z> readouts, shape ``(rounds, N)``, for the
    sequential convention, or one score per round for the simultaneous one.
    The simultaneous score is ``-<prod_k (-sigma^z_k)>`` so that a perfect
    match scores -1 for every ancilla count.
    """
    times = np.atleast_2d(np.asarray(times, dtype=float))
    rounds, n_anc = times.shape
    sv = init_rider_state(n_anc, h.qubits, n, batch=rounds)
    for k in range(n_anc):
        apply_hadamard(sv, k)
    for k in range(n_anc):
        controlled_time_evolution(sv, k, h, times[:, k], trotter)
        apply_phase_shift(sv, k, guess * times[:, k])
    for k in range(n_anc):
        apply_hadamard(sv, k)

    if convention == "sequential":
        if shots is None:
            return np.stack([expect_z(sv, k) for k in range(n_anc)], axis=1)
        return np.stack([sample_z(sv, k, shots, rng) for k in range(n_anc)], axis=1)

    sign = -((-1) ** n_anc)
    parity = expect_z_product(sv, range(n_anc))
    if shots is not None:
        p_odd = np.clip((1.0 - parity) / 2.0, 0.0, 1.0)
        odd = rng.binomial(shots, p_odd)
        parity = (shots - 2 * odd) / shots
    return sign * parity


def _cell(h, n, ell, guess, params: RodeoParams, trotter: TrotterConfig, times=None):
    rng = cell_rng(params.seed, n, ell)
    if times is None:
        times = sample_times(params, params.rounds * params.ancillas, rng)
    times = np.asarray(times, dtype=float).reshape(-1, params.ancillas)
    scores = round_scores(h, n, guess, times, trotter, params.convention, params.shots, rng)
    values = scores.ravel()
    mean = float(np.mean(values))
    var = max(float(np.mean(values**2)) - mean**2, 0.0)
    stderr = math.sqrt(var / values.size)
    cap = count_cap_hits(times, trotter) if trotter.mode == "trotter" else 0
    return mean, stderr, cap


def score_average(
    h: Hamiltonian,
    n: int,
    guess: float,
    params: RodeoParams,
    trotter: TrotterConfig,
    grid_index: int = 0,
    times: np.ndarray | None = None,
) -> ScoreAverage:
    """Score Average h-bar of input ``|n>`` at energy guess ``guess``.

    Runs ``params.rounds`` rounds with fresh times per ancilla per round,
    drawn from the cell stream ``(seed, n, grid_index)`` unless ``times`` is
    given.  ``stderr`` is the sample standard deviation of the mean, with the
    population variance of the individual readouts.
    """
    if not 0 <= n < h.dim:
        raise ValueError(f"basis index {n} out of range for {h.qubits} qubits")
    mean, stderr, _ = _cell(h, n, grid_index, guess, params, trotter, times)
    return ScoreAverage(mean, stderr)


def closed_form_score(
    spectrum: Spectrum, n: int, guess: float, times, convention: str = "sequential"
):
    """Analytic readout for fixed times.

    ``times`` of shape ``(N,)`` gives one round's score, ``(rounds, N)`` one
    score per round.  Sequential: ``-1/N sum_k sum_x c2 cos((E - E_x) t_k)``;
    simultaneous: ``-sum_x c2 prod_k cos((E - E_x) t_k)``.
    """
    if spectrum.overlaps is None:
        raise ValueError("closed_form_score needs a spectrum with overlaps")
    t = np.asarray(times, dtype=float)
    single = t.ndim <= 1
    t = np.atleast_2d(t)
    c2 = spectrum.overlaps[:, n]
    alpha = guess - spectrum.eigenvalues
    cosines = np.cos(alpha[None, None, :] * t[:, :, None])  # (rounds, N, 2**M)
    if convention == "sequential":
        value = -(cosines.mean(axis=1) @ c2)
    else:
        value = -(cosines.prod(axis=1) @ c2)
    return float(value[0]) if single else value


def theory_score(
    spectrum: Spectrum | np.ndarray,
    guess,
    params: RodeoParams,
    n: int | None = None,
):
    """Gaussian-averaged Score Average.

    With an input ``n`` this is h-bar(E, n), a value in [-1, 1].  With
    ``n=None`` it is the basis-summed curve ``sum_x exp(-d^2 a^2 / 2) cos(a tau)``
    with ``a = E - E_x``, which is what ``-sum_n h-bar`` tends to.  The
    simultaneous convention replaces the factor by
    ``exp(-N d^2 a^2 / 2) cos(a tau)**N``.  ``guess`` may be an array.
    """
    eig = spectrum.eigenvalues if isinstance(spectrum, Spectrum) else np.asarray(spectrum)
    e = np.asarray(guess, dtype=float)
    alpha = e[..., None] - eig
    d2 = params.dev**2
    if params.convention == "sequential":
        kernel = np.exp(-d2 * alpha**2 / 2) * np.cos(alpha * params.tau)
    else:
        na = params.ancillas
        kernel = np.exp(-na * d2 * alpha**2 / 2) * np.cos(alpha * params.tau) ** na
    if n is None:
        return kernel.sum(axis=-1)
    if not isinstance(spectrum, Spectrum) or spectrum.overlaps is None:
        raise ValueError("the per-input theory score needs a spectrum with overlaps")
    return -(kernel @ spectrum.overlaps[:, n])


def _scan_chunk(args):
    h, ells, energies, params, trotter = args
    dim = h.dim
    sa = np.empty((len(ells), dim))
    se = np.empty((len(ells), dim))
    cap = 0
    for i, (ell, e) in enumerate(zip(ells, energies)):
        for n in range(dim):
            sa[i, n], se[i, n], c = _cell(h, n, ell, e, params, trotter)
            cap += c
    return sa, se, cap


def nos_scan(
    h: Hamiltonian,
    grid: EnergyGrid,
    params: RodeoParams,
    trotter: TrotterConfig,
    workers: int = 1,
    with_theory: bool = True,
    keep_per_input: bool = False,
    chunk: int = 4,
) -> NosEstimate:
    """Estimate Omega(E_l) = -sum_n h-bar(E_l, n) at every gridpoint.

    Cells are independent; ``workers > 1`` spreads chunks of gridpoints over
    processes and the reduction always runs in (gridpoint, n) order, so the
    result does not depend on ``workers``.
    """
    energies = grid.energies
    ells = np.arange(len(energies))
    jobs = [
        (h, ells[i : i + chunk], energies[i : i + chunk], params, trotter)
        for i in range(0, len(ells), chunk)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_scan_chunk, jobs))
    else:
        parts = [_scan_chunk(job) for job in jobs]
    sa = np.concatenate([p[0] for p in parts])
    se = np.concatenate([p[1] for p in parts])
    cap = sum(p[2] for p in parts)

    omega = -sa.sum(axis=1)
    stderr = np.sqrt((se**2).sum(axis=1))
    theory = None
    if with_theory:
        theory = theory_score(exact_spectrum(h), energies, params)
    return NosEstimate(
        grid, omega, stderr, theory,
        sa if keep_per_input else None,
        se if keep_per_input else None,
        cap,
    )


@dataclass
class OracleChainReport:
    cells: list[dict]
    max_circuit_deviation: float
    mc_within_band: int
    tolerance: float

    @property
    def circuit_ok(self) -> bool:
        return self.max_circuit_deviation < self.tolerance

    def to_dict(self) -> dict:
        return {
            "cells": self.cells,
            "max_circuit_deviation": self.max_circuit_deviation,
            "mc_within_band": self.mc_within_band,
            "total": len(self.cells),
            "tolerance": self.tolerance,
        }


def validate_oracle_chain(
    h: Hamiltonian,
    params: RodeoParams,
    cells: int = 20,
    mc_samples: int = 10_000,
    energy_window: tuple[float, float] | None = None,
    tolerance: float = 1e-9,
) -> OracleChainReport:
    """Compare circuit (exact evolution) vs closed form vs Gaussian theory.

    For each random cell ``(n, E, times)``: the simulated per-round readouts
    must equal the closed form for those times within ``tolerance``; the
    closed form averaged over ``mc_samples`` fresh Gaussian times must match
    the theory value within 4 standard errors.
    """
    spectrum = exact_spectrum(h, with_overlaps=True)
    exact = TrotterConfig(mode="exact")
    rng = np.random.default_rng(np.random.SeedSequence(params.seed, spawn_key=(2**32 - 1,)))
    lo, hi = energy_window or (spectrum.eigenvalues[0] - 1.0, spectrum.eigenvalues[-1] + 1.0)
    out = []
    worst = 0.0
    within = 0
    n_anc = params.ancillas
    for _ in range(cells):
        n = int(rng.integers(h.dim))
        guess = float(rng.uniform(lo, hi))
        times = sample_times(params, 8 * n_anc, rng).reshape(8, n_anc)
        circuit = round_scores(h, n, guess, times, exact, params.convention)
        if params.convention == "sequential":
            circuit = circuit.mean(axis=1)
        closed = closed_form_score(spectrum, n, guess, times, params.convention)
        dev = float(np.max(np.abs(circuit - closed)))
        worst = max(worst, dev)

        mc_times = sample_times(params, mc_samples * n_anc, rng).reshape(mc_samples, n_anc)
        mc = closed_form_score(spectrum, n, guess, mc_times, params.convention)
        mc_mean = float(mc.mean())
        mc_se = float(mc.std() / math.sqrt(mc_samples))
        theory = float(theory_score(spectrum, guess, params, n))
        ok = abs(mc_mean - theory) <= 4 * mc_se + 1e-12
        within += ok
        out.append({
            "n": n, "energy": guess, "circuit_deviation": dev,
            "mc_mean": mc_mean, "mc_stderr": mc_se, "theory": theory, "mc_ok": bool(ok),
        })
    return OracleChainReport(out, worst, within, tolerance)
