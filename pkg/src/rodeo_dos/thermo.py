"""Canonical thermodynamics from a number-of-states table (k_B = 1)."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np


class FisherZeroError(ZeroDivisionError):
    """The partition function vanishes at the requested complex beta."""


# |Z| below this fraction of sum |terms| is treated as an exact cancellation
ZERO_RTOL = 1e-12


def _shifted_sum(table, cb: complex) -> complex:
    terms = table.weights * np.exp(-cb * (table.energies - table.energies[0]))
    total = complex(terms.sum())
    if abs(total) <= ZERO_RTOL * float(np.abs(terms).sum()):
        raise FisherZeroError(f"Z vanishes at beta={cb.real}, b={cb.imag}")
    return total


@dataclass(frozen=True)
class NosTable:
    energies: np.ndarray
    weights: np.ndarray
    source: Literal["rodeo", "exact"] = "exact"

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if e.shape != w.shape or e.ndim != 1:
            raise ValueError("energies and weights must be 1-d arrays of equal length")
        if e.size and np.any(np.diff(e) <= 0):
            raise ValueError("energies must be strictly increasing")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_levels(cls, levels) -> "NosTable":
        e, w = zip(*levels) if levels else ((), ())
        return cls(np.array(e, dtype=float), np.array(w, dtype=float), "exact")

    @classmethod
    def from_scan(cls, energies, omega, clamp: bool = True) -> "NosTable":
        """Table from scan output; negative noise is clipped to 0 unless ``clamp=False``."""
        w = np.asarray(omega, dtype=float)
        if clamp:
            w = np.clip(w, 0.0, None)
        return cls(np.asarray(energies, dtype=float), w, "rodeo")

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def _check(self):
        if self.energies.size == 0:
            raise ValueError("empty NoS table")


def log_partition_function(table: NosTable, beta: float, b: float = 0.0) -> complex:
    """ln Z at complex inverse temperature beta + i b (principal branch).

    The factor ``exp(-B E_min)`` is pulled out of the sum so large beta does
    not overflow.
    """
    table._check()
    cb = complex(beta, b)
    e0 = table.energies[0]
    log_z = np.log(_shifted_sum(table, cb)) - cb * e0
    # wrap the phase back onto the principal branch
    return complex(log_z.real, math.remainder(log_z.imag, 2 * math.pi))


def partition_function(table: NosTable, beta: float, b: float = 0.0) -> complex:
    """Z = sum_l Omega(E_l) exp(-(beta + i b) E_l).

    Raises :class:`FisherZeroError` where the sum cancels to rounding level.

    Table weights are counts, not densities, so no factor of the grid step
    enters.
    """
    table._check()
    cb = complex(beta, b)
    e0 = table.energies[0]
    return complex(np.exp(-cb * e0) * _shifted_sum(table, cb))


def free_energy(Z: complex, beta_complex: complex) -> complex:
    """F = -ln(Z) / B with the principal logarithm."""
    if Z == 0:
        raise FisherZeroError("free energy is undefined where Z = 0")
    if beta_complex == 0:
        raise ZeroDivisionError("free energy needs a nonzero inverse temperature")
    return complex(-np.log(complex(Z)) / complex(beta_complex))


def free_energy_at(table: NosTable, beta: float, b: float = 0.0) -> complex:
    """F(beta + i b) evaluated through ln Z, safe where Z itself overflows."""
    cb = complex(beta, b)
    if cb == 0:
        raise ZeroDivisionError("free energy needs a nonzero inverse temperature")
    return -log_partition_function(table, beta, b) / cb


def entropy(table: NosTable, level: float, tol: float = 1e-6) -> float:
    """S = ln Omega at the table entry whose energy equals ``level``."""
    idx = int(np.argmin(np.abs(table.energies - level)))
    if abs(table.energies[idx] - level) > tol:
        raise KeyError(f"no table entry at energy {level}")
    w = table.weights[idx]
    if w <= 0:
        raise ValueError(f"entropy needs a positive weight, got {w} at E={level}")
    return float(np.log(w))


def _boltzmann(table: NosTable, betas: np.ndarray):
    """Shifted energies, Boltzmann weights per beta and their sums."""
    table._check()
    shifted = table.energies - table.energies[0]
    boltz = table.weights[None, :] * np.exp(-betas[:, None] * shifted[None, :])
    z = boltz.sum(axis=1)
    if np.any(z <= 0):
        raise ValueError("nonpositive partition function; clamp negative weights first")
    return shifted, boltz, z


def canonical_moments(table: NosTable, betas) -> tuple[np.ndarray, np.ndarray]:
    """Mean energy and energy variance at each real beta."""
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    shifted, boltz, z = _boltzmann(table, betas)
    # moments of the shifted energy keep the variance free of cancellation
    m1 = boltz @ shifted / z
    var = np.einsum("ij,ij->i", boltz, (shifted[None, :] - m1[:, None]) ** 2) / z
    return m1 + table.energies[0], var


def specific_heat(table: NosTable, betas, M: int) -> np.ndarray:
    """Per-spin specific heat c_B = beta^2 (<E^2> - <E>^2) / M."""
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if betas.size == 0:
        raise ValueError("empty beta grid")
    if np.any(betas <= 0):
        raise ValueError("specific heat needs beta > 0")
    _, var = canonical_moments(table, betas)
    return betas**2 * var / M


def specific_heat_fd(
    table: NosTable,
    betas,
    M: int,
    form: Literal["beta_f", "literal"] = "beta_f",
    rel_step: float = 1e-3,
) -> np.ndarray:
    """Specific heat from central second differences of the free energy.

    ``beta_f``: ``-(beta^2 / M) d^2(beta F)/d beta^2``, which equals the
    variance form.  ``literal``: ``(1/M) d^2 F / d beta^2``, kept for side by
    side inspection.
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if betas.size == 0:
        raise ValueError("empty beta grid")
    out = np.empty_like(betas)
    for i, beta in enumerate(betas):
        step = rel_step * beta
        pts = (beta - step, beta, beta + step)
        if form == "beta_f":
            f = [-log_partition_function(table, x).real for x in pts]
            out[i] = -(beta**2) * (f[0] - 2 * f[1] + f[2]) / step**2 / M
        else:
            f = [free_energy_at(table, x).real for x in pts]
            out[i] = (f[0] - 2 * f[1] + f[2]) / step**2 / M
    return out


def relative_difference(curve_a, curve_b) -> np.ndarray:
    """|1 - a/b| pointwise; points with b == 0 come back as NaN with a warning."""
    a = np.asarray(curve_a, dtype=float)
    b = np.asarray(curve_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("curves must have equal lengths")
    zero = b == 0
    out = np.full(a.shape, np.nan)
    out[~zero] = np.abs(1.0 - a[~zero] / b[~zero])
    if np.any(zero):
        warnings.warn(f"relative difference undefined at {int(zero.sum())} point(s) where b = 0")
    return out


def default_betas(t_min: float = 0.05, t_max: float = 10.0, points: int = 200) -> np.ndarray:
    """Log-spaced temperatures mapped to beta, ordered by increasing T."""
    temps = np.logspace(np.log10(t_min), np.log10(t_max), points)
    return 1.0 / temps


def thermo_curve_csv(table: NosTable, betas, M: int, b: float = 0.0) -> str:
    cb = specific_heat(table, betas, M)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "T", "Z_real", "Z_imag", "F_real", "cB"])
    for beta, c in zip(betas, cb):
        z = partition_function(table, beta, b)
        f = free_energy_at(table, beta, b)
        w.writerow([repr(float(beta)), repr(float(1 / beta)), repr(z.real), repr(z.imag),
                    repr(f.real), repr(float(c))])
    return buf.getvalue()


def comparison_csv(betas, cb_rodeo, cb_exact) -> str:
    rel = relative_difference(cb_rodeo, cb_exact)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "cB_rodeo", "cB_exact", "rel_diff"])
    for row in zip(betas, cb_rodeo, cb_exact, rel):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()
