"""Exact and Trotterized time evolution, and C_z correlation time series.

Spin convention: ``|down> = bit 0`` and ``sigma_z |down> = +|down>``, i.e.
the ordinary computational-basis Z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .pauli import DimensionError, PauliSum, to_dense_matrix

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10

# 64 uniform samples on [0, 10] in units of 1/epsilon
DEFAULT_N_SAMPLES = 64
DEFAULT_T_MAX = 10.0


class HermiticityError(ValueError):
    pass


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    n_sites: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_sites,):
            raise DimensionError(f"expected {1 << self.n_sites} amplitudes, got {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_array(cls, amps, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        n = int(round(np.log2(amps.size)))
        if 1 << n != amps.size:
            raise DimensionError("length is not a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(n, amps)

    @classmethod
    def basis(cls, n_sites: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n_sites, dtype=complex)
        amps[index] = 1.0
        return cls(n_sites, amps)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "StateVector":
        """Product state with ``bits[k]`` on site ``k``."""
        return cls.basis(len(bits), sum(int(b) << k for k, b in enumerate(bits)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def probe_state(n_sites: int = 8) -> StateVector:
    """``|down...down up...up>``: first half of the sites down, second half up."""
    if n_sites < 2 or n_sites % 2:
        raise ValueError(f"probe state needs an even number of sites, got {n_sites}")
    half = n_sites // 2
    return StateVector.from_bits([0] * half + [1] * half)


def _hermitian_dense(H: PauliSum) -> np.ndarray:
    mat = to_dense_matrix(H)
    if mat.size and np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
        raise HermiticityError("Hamiltonian is not Hermitian")
    return mat


class ExactPropagator:
    """``exp(-iHt)`` from a single eigendecomposition, reusable for any ``t``."""

    def __init__(self, H: PauliSum):
        self.n_sites = H.n_sites
        mat = _hermitian_dense(H)
        self.energies, self.vectors = np.linalg.eigh(mat)

    def evolve_array(self, amps: np.ndarray, times) -> np.ndarray:
        """Columns are the evolved states at each entry of ``times``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        coeffs = self.vectors.conj().T @ amps
        phases = np.exp(-1j * np.outer(self.energies, times))
        return self.vectors @ (phases * coeffs[:, None])

    def __call__(self, psi: StateVector, t: float) -> StateVector:
        _check_dims(psi, self.n_sites)
        out = self.evolve_array(psi.amplitudes, [t])[:, 0]
        return StateVector(psi.n_sites, out)


def _check_dims(psi: StateVector, n_sites: int) -> None:
    if psi.n_sites != n_sites:
        raise DimensionError(f"state has {psi.n_sites} sites, operator {n_sites}")


def evolve_exact(H: Union[PauliSum, ExactPropagator], psi0: StateVector, t: float) -> StateVector:
    prop = H if isinstance(H, ExactPropagator) else ExactPropagator(H)
    return prop(psi0, t)


@dataclass(frozen=True)
class TrotterPlan:
    """First-order product formula over ``groups`` with ``n_steps`` slices.

    When ``hamiltonian`` is given the groups must sum to it.
    """

    groups: tuple
    n_steps: int
    total_time: float
    hamiltonian: PauliSum | None = None

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise PlanError("plan needs at least one group")
        if self.n_steps < 1:
            raise PlanError("n_steps must be positive")
        n = groups[0].n_sites
        if any(g.n_sites != n for g in groups):
            raise PlanError("groups act on different numbers of sites")
        if self.hamiltonian is not None:
            total = PauliSum.zero(n)
            for g in groups:
                total = total + g
            if self.hamiltonian.n_sites != n or not total.allclose(self.hamiltonian, atol=1e-12):
                raise PlanError("Trotter groups do not sum to the Hamiltonian")

    @property
    def n_sites(self) -> int:
        return self.groups[0].n_sites


def _group_eigs(groups) -> list[tuple[np.ndarray, np.ndarray]]:
    return [np.linalg.eigh(_hermitian_dense(g)) for g in groups]


def _trotter_apply(eigs, amps: np.ndarray, dt: float, n_steps: int) -> np.ndarray:
    for _ in range(n_steps):
        for w, v in eigs:
            amps = v @ (np.exp(-1j * w * dt) * (v.conj().T @ amps))
    return amps


def evolve_trotter(plan: TrotterPlan, psi0: StateVector) -> StateVector:
    _check_dims(psi0, plan.n_sites)
    dt = plan.total_time / plan.n_steps
    amps = _trotter_apply(_group_eigs(plan.groups), psi0.amplitudes, dt, plan.n_steps)
    return StateVector(psi0.n_sites, amps)


@dataclass(frozen=True)
class CorrelationSeries:
    pair: tuple
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-D of equal length")
        if t.size and (t[0] != 0.0 or np.any(np.diff(t) <= 0)):
            raise ValueError("times must start at 0 and increase strictly")
        if np.any(np.abs(v) > 1.0 + 1e-9):
            raise ValueError("C_z values outside [-1, 1]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def default_times(n_samples: int = DEFAULT_N_SAMPLES, t_max: float = DEFAULT_T_MAX) -> np.ndarray:
    return np.linspace(0.0, t_max, n_samples)


def _z_expectations(probs: np.ndarray, basis: np.ndarray, i: int, j: int) -> np.ndarray:
    """C_z for each column of ``probs`` (rows indexed by ``basis`` states)."""
    zi = 1.0 - 2.0 * ((basis >> i) & 1)
    zj = 1.0 - 2.0 * ((basis >> j) & 1)
    ez_i = zi @ probs
    ez_j = zj @ probs
    ezz = (zi * zj) @ probs
    return ezz - ez_i * ez_j


def _check_pair(i: int, j: int, n_sites: int) -> None:
    if i == j:
        raise ValueError("C_z needs two distinct sites")
    for s in (i, j):
        if not 0 <= s < n_sites:
            raise IndexError(f"site {s} out of range for {n_sites} sites")


def correlation_cz(psi: StateVector, i: int, j: int) -> float:
    """``<Z_i Z_j> - <Z_i><Z_j>`` (0-based sites)."""
    _check_pair(i, j, psi.n_sites)
    basis = np.arange(1 << psi.n_sites)
    return float(_z_expectations(psi.probabilities(), basis, i, j))


def parse_mode(mode: str) -> tuple[str, int | None]:
    """``"exact"`` or ``"trotter:<n_T>"``."""
    if mode == "exact":
        return "exact", None
    kind, _, steps = mode.partition(":")
    if kind == "trotter":
        try:
            n = int(steps)
        except ValueError:
            raise ValueError(f"bad Trotter step count in mode {mode!r}") from None
        if n < 1:
            raise ValueError("Trotter step count must be positive")
        return "trotter", n
    raise ValueError(f"unknown evolution mode {mode!r}")


def correlation_series(
    H: Union[PauliSum, Sequence[PauliSum]],
    psi0: StateVector,
    pair: tuple[int, int] = (0, 1),
    times=None,
    mode: str = "exact",
) -> CorrelationSeries:
    """C_z(pair) sampled on ``times``.

    ``H`` may be a single PauliSum or the ordered list of Trotter groups; exact
    mode always evolves under their sum.
    """
    groups = [H] if isinstance(H, PauliSum) else list(H)
    total = groups[0]
    for g in groups[1:]:
        total = total + g
    times = default_times() if times is None else np.asarray(times, dtype=float)
    _check_dims(psi0, total.n_sites)
    _check_pair(*pair, total.n_sites)
    kind, n_steps = parse_mode(mode)
    if kind == "exact":
        states = ExactPropagator(total).evolve_array(psi0.amplitudes, times)
    else:
        eigs = _group_eigs(TrotterPlan(tuple(groups), n_steps, 0.0).groups)
        cols = [_trotter_apply(eigs, psi0.amplitudes, float(t) / n_steps, n_steps) for t in times]
        states = np.stack(cols, axis=1)
    basis = np.arange(1 << total.n_sites)
    values = _z_expectations(np.abs(states) ** 2, basis, *pair)
    return CorrelationSeries(tuple(pair), times, values)


# -- particle-number sector fast path -----------------------------------


class SectorSimulator:
    """Evolution of a family ``H = sum_k c_k G_k`` inside one number sector.

    Every ``G_k`` must conserve particle number; the restriction is then
    exact for states in the sector. Each ``G_k`` is diagonalized once, so a
    Trotter slice ``exp(-i c_k G_k dt)`` costs two matrix products, and the
    family can be swept over many coupling points cheaply.
    """

    def __init__(self, unit_terms: Sequence[PauliSum], n_particles: int):
        n = unit_terms[0].n_sites
        self.n_sites = n
        idx = np.arange(1 << n)
        self.basis = idx[np.bitwise_count(idx) == n_particles]
        self.n_particles = n_particles
        self.unit_mats = []
        for g in unit_terms:
            full = to_dense_matrix(g)
            off = np.delete(full[:, self.basis], self.basis, axis=0)
            if off.size and np.max(np.abs(off)) > 1e-12:
                raise ValueError("term does not conserve particle number")
            sub = full[np.ix_(self.basis, self.basis)]
            if np.max(np.abs(sub.imag)) < 1e-14:
                sub = sub.real
            self.unit_mats.append(sub)
        self.unit_eigs = [np.linalg.eigh(m) for m in self.unit_mats]

    @property
    def dim(self) -> int:
        return self.basis.size

    def restrict(self, psi: StateVector) -> np.ndarray:
        amps = psi.amplitudes
        if np.linalg.norm(amps[self.basis]) < 1 - 1e-10:
            raise ValueError("state is not inside the particle-number sector")
        return amps[self.basis].copy()

    def embed(self, sub: np.ndarray) -> StateVector:
        amps = np.zeros(1 << self.n_sites, dtype=complex)
        amps[self.basis] = sub
        return StateVector(self.n_sites, amps)

    def hamiltonian(self, couplings: Sequence[float]) -> np.ndarray:
        return sum(c * m for c, m in zip(couplings, self.unit_mats))

    def ground_space(self, couplings: Sequence[float], degeneracy_tol: float = 1e-10):
        w, v = np.linalg.eigh(self.hamiltonian(couplings))
        k = int(np.sum(w - w[0] <= degeneracy_tol))
        return w[:k], v[:, :k]

    def evolve_exact(self, couplings, sub0: np.ndarray, times) -> np.ndarray:
        w, v = np.linalg.eigh(self.hamiltonian(couplings))
        times = np.atleast_1d(np.asarray(times, dtype=float))
        coeffs = v.conj().T @ sub0
        return v @ (np.exp(-1j * np.outer(w, times)) * coeffs[:, None])

    def evolve_trotter(self, couplings, sub0: np.ndarray, times, n_steps: int) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        dts = times / n_steps
        states = np.repeat(sub0[:, None].astype(complex), times.size, axis=1)
        slices = [
            (w, v, np.exp(-1j * c * np.outer(w, dts)))
            for c, (w, v) in zip(couplings, self.unit_eigs)
            if c != 0.0
        ]
        for _ in range(n_steps):
            for _, v, ph in slices:
                states = v @ (ph * (v.conj().T @ states))
        return states

    def series(self, couplings, sub0: np.ndarray, times, pair=(0, 1), mode: str = "exact") -> np.ndarray:
        kind, n_steps = parse_mode(mode)
        if kind == "exact":
            states = self.evolve_exact(couplings, sub0, times)
        else:
            states = self.evolve_trotter(couplings, sub0, times, n_steps)
        return _z_expectations(np.abs(states) ** 2, self.basis, *pair)
