"""VQE with the single-parameter LMG ansatz, and ADAPT-VQE.

Generators ``tau`` are Hermitian PauliSums and enter the state as
``exp(-i theta tau)``; programs apply their steps reference-first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .dynamics import HermiticityError, StateVector
from .models import mode_index, m_values
from .pauli import DimensionError, FermionTerm, PauliSum, commutator, jordan_wigner, number_operator

ENERGY_TOL = 1e-10
PARAM_TOL = 1e-8
MAX_OPT_ITERS = 500


# -- LMG ansatz ----------------------------------------------------------

_TWO_UP = ("1100", "0011", "0101", "0110", "1001", "1010")


def lmg_ansatz(theta: float) -> StateVector:
    """Four-site symmetric ansatz (site 1 leftmost in the labels, up = bit 1)::

        cos^2 t |dddd> + sin^2 t |uuuu> - sin(2t)/sqrt(12) * (six two-up states)
    """
    amps = np.zeros(16, dtype=complex)
    amps[0] = math.cos(theta) ** 2
    amps[0b1111] = math.sin(theta) ** 2
    c = -math.sin(2 * theta) / math.sqrt(12.0)
    for label in _TWO_UP:
        amps[sum(int(b) << k for k, b in enumerate(label))] = c
    return StateVector(4, amps)


@lru_cache(maxsize=None)
def quasispin_embedding(j: int) -> np.ndarray:
    """Isometry from ``2j`` quasi-spins into the ``4j``-mode Fock space.

    Quasi-spin ``k`` (the k-th m value, ascending) down/up places its particle
    in mode ``(-1, m)``/``(+1, m)``; the image of a spin basis state is
    ``prod_k c^dag_{xi_k, m_k} |0>`` with the product written in ascending k.
    Under this map ``J+``, ``J0`` of the two-level model act as collective
    spin operators, so the Agassi Hamiltonian with ``g = h = 0`` becomes the
    LMG Hamiltonian of ``2j`` spins.
    """
    ms = m_values(j)
    n_modes = 4 * j
    n_spins = len(ms)
    creators = [
        [jordan_wigner(FermionTerm(1.0, ((mode_index(xi, m, j), True),)), n_modes) for m in ms]
        for xi in (-1, 1)
    ]
    iso = np.zeros((1 << n_modes, 1 << n_spins), dtype=complex)
    for s in range(1 << n_spins):
        vec = np.zeros(1 << n_modes, dtype=complex)
        vec[0] = 1.0
        for k in reversed(range(n_spins)):
            vec = creators[(s >> k) & 1][k].apply(vec)
        iso[:, s] = vec
    return iso


def embed_quasispin(psi: StateVector, j: int) -> StateVector:
    if psi.n_sites != 2 * j:
        raise DimensionError(f"need {2 * j} quasi-spins for j={j}, got {psi.n_sites}")
    return StateVector(4 * j, quasispin_embedding(j) @ psi.amplitudes)


def lmg_fock_ansatz(theta: float, j: int = 2) -> StateVector:
    """The LMG ansatz placed in the Fock space of the ``j = 2`` two-level model."""
    return embed_quasispin(lmg_ansatz(theta), j)


# -- energies -------------------------------------------------------------


def expectation(H: PauliSum, psi: StateVector) -> float:
    if H.n_sites != psi.n_sites:
        raise DimensionError(f"operator on {H.n_sites} sites, state on {psi.n_sites}")
    val = np.vdot(psi.amplitudes, H.apply(psi.amplitudes))
    if abs(val.imag) > 1e-10:
        raise HermiticityError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def exact_ground_energy(H: PauliSum, n_particles: int | None = None) -> float:
    """Lowest eigenvalue, optionally inside one particle-number sector."""
    mat = H.to_dense()
    if n_particles is not None:
        idx = np.arange(1 << H.n_sites)
        sec = idx[np.bitwise_count(idx) == n_particles]
        mat = mat[np.ix_(sec, sec)]
    return float(np.linalg.eigvalsh(mat)[0])


def particle_number(psi: StateVector) -> int:
    """Particle number of a state lying in a single sector."""
    idx = np.arange(1 << psi.n_sites)
    counts = np.bitwise_count(idx)[psi.probabilities() > 1e-12]
    if counts.size == 0 or np.any(counts != counts[0]):
        raise ValueError("state mixes particle-number sectors")
    return int(counts[0])


# -- programs & results -----------------------------------------------------


class _Exponential:
    """Cached spectral decomposition of a generator, for exact exp(-i t tau)."""

    def __init__(self, tau: PauliSum):
        self.w, self.v = np.linalg.eigh(tau.to_dense())

    def apply(self, theta: float, amps: np.ndarray) -> np.ndarray:
        return self.v @ (np.exp(-1j * theta * self.w) * (self.v.conj().T @ amps))


@dataclass
class AnsatzProgram:
    n_sites: int
    reference: StateVector
    steps: list = field(default_factory=list)  # (generator, theta, label)

    def __post_init__(self):
        self._exps: dict[int, _Exponential] = {}

    def append(self, generator: PauliSum, theta: float = 0.0, label: str = "") -> None:
        if not generator.is_hermitian():
            raise HermiticityError("generators must be Hermitian")
        self.steps.append((generator, float(theta), label))

    @property
    def thetas(self) -> np.ndarray:
        return np.array([t for _, t, _ in self.steps])

    def with_thetas(self, thetas) -> None:
        self.steps = [(g, float(t), lab) for (g, _, lab), t in zip(self.steps, thetas)]

    def _exp(self, k: int) -> _Exponential:
        if k not in self._exps:
            self._exps[k] = _Exponential(self.steps[k][0])
        return self._exps[k]

    def state(self, thetas=None) -> StateVector:
        thetas = self.thetas if thetas is None else thetas
        amps = self.reference.amplitudes
        for k, theta in enumerate(thetas):
            amps = self._exp(k).apply(theta, amps)
        return StateVector(self.n_sites, amps)


@dataclass
class VqeResult:
    energy: float
    program: AnsatzProgram | None
    iterations: int
    gradient_history: list
    converged: bool
    thetas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy_history: list = field(default_factory=list)
    selected: list = field(default_factory=list)


# -- classical optimizers ----------------------------------------------------


def _golden_1d(f: Callable[[float], float], x0: float, span: float = math.pi):
    """Coarse scan of ``[x0 - span/2, x0 + span/2]`` then golden-section refinement."""
    grid = np.linspace(x0 - span / 2, x0 + span / 2, 65)
    vals = np.array([f(x) for x in grid])
    k = int(np.argmin(vals))
    k = min(max(k, 1), grid.size - 2)
    res = minimize_scalar(
        f,
        bracket=(grid[k - 1], grid[k], grid[k + 1]),
        method="golden",
        options={"xtol": PARAM_TOL, "maxiter": MAX_OPT_ITERS},
    )
    best_x, best_f = (res.x, res.fun) if res.fun <= vals.min() else (grid[int(np.argmin(vals))], vals.min())
    return float(best_x), float(best_f), bool(res.success), int(res.nit)


def _coordinate_then_simplex(f, x0: np.ndarray, sweeps: int = 20):
    """Coordinate descent with golden-section inner loops, then a Nelder-Mead polish."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    n_eval = 0
    for _ in range(sweeps):
        prev = fx
        for i in range(x.size):
            def line(t, i=i):
                y = x.copy()
                y[i] = t
                return f(y)

            res = minimize_scalar(
                line,
                bracket=(x[i] - 0.05, x[i] + 0.05),
                method="golden",
                options={"xtol": PARAM_TOL, "maxiter": MAX_OPT_ITERS},
            )
            n_eval += res.nfev
            if res.fun < fx:
                x[i], fx = res.x, res.fun
        if prev - fx < ENERGY_TOL:
            break
    res = minimize(
        f,
        x,
        method="Nelder-Mead",
        options={"xatol": PARAM_TOL, "fatol": ENERGY_TOL, "maxiter": MAX_OPT_ITERS * max(1, x.size)},
    )
    if res.fun < fx:
        x, fx = res.x, res.fun
    converged = bool(res.success)
    return x, float(fx), converged


def vqe_minimize(
    H: PauliSum,
    ansatz: Callable[..., StateVector],
    theta0: float | Sequence[float] = 0.0,
) -> VqeResult:
    """Minimize ``<ansatz(theta)|H|ansatz(theta)>``.

    One parameter: golden-section search after a coarse bracketing scan.
    Several parameters: coordinate descent plus simplex polish.
    """
    if not H.is_hermitian():
        raise HermiticityError("Hamiltonian has complex coefficients")
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if theta0.size == 1:
        def f1(t):
            return expectation(H, ansatz(t))

        x, fx, ok, nit = _golden_1d(f1, float(theta0[0]))
        thetas = np.array([x])
    else:
        def fn(ts):
            return expectation(H, ansatz(*ts))

        thetas, fx, ok = _coordinate_then_simplex(fn, theta0)
        nit = 0
    return VqeResult(
        energy=fx,
        program=None,
        iterations=nit,
        gradient_history=[],
        converged=ok,
        thetas=thetas,
        energy_history=[fx],
    )


# -- ADAPT-VQE -------------------------------------------------------------


@dataclass
class OperatorPool:
    generators: list
    labels: list

    def __post_init__(self):
        if not self.generators:
            raise PoolError("operator pool is empty")
        if len(self.generators) != len(self.labels):
            raise ValueError("one label per generator")

    def __len__(self) -> int:
        return len(self.generators)


class PoolError(ValueError):
    pass


def _mode_m(j: int) -> list[int]:
    ms = m_values(j)
    return ms + ms  # lower level then upper level, same m order


def build_pool(
    n_modes: int,
    symmetry_filter: str = "number",
    body: str = "both",
    j: int | None = None,
) -> OperatorPool:
    """Hermitian generators ``i(T - T^dag)`` from one- and two-body excitations.

    ``body`` selects ``"one"``, ``"two"`` or ``"both"``. The ``"number"``
    filter keeps number-conserving excitations (all of those built here);
    ``"agassi"`` additionally requires conservation of the total m projection,
    a symmetry of the two-level Hamiltonian (needs ``j``).
    """
    if n_modes < 2:
        raise PoolError("need at least two modes")
    if body not in ("one", "two", "both"):
        raise ValueError(f"body must be one/two/both, got {body!r}")
    if symmetry_filter not in ("number", "agassi"):
        raise ValueError(f"unknown symmetry filter {symmetry_filter!r}")
    if symmetry_filter == "agassi":
        if j is None or 4 * j != n_modes:
            raise ValueError("agassi filter needs j with n_modes == 4j")
        mvals = _mode_m(j)
    candidates: list[tuple[str, tuple, tuple]] = []
    if body in ("one", "both"):
        for p, q in combinations(range(n_modes), 2):
            candidates.append((f"1b:{q}<-{p}", (q,), (p,)))
    if body in ("two", "both"):
        pairs = list(combinations(range(n_modes), 2))
        for a, b in combinations(pairs, 2):
            candidates.append((f"2b:{b[1]}{b[0]}<-{a[1]}{a[0]}", (b[1], b[0]), (a[1], a[0])))
    total_n = number_operator(n_modes)
    gens, labels, seen = [], [], set()
    for label, created, annihilated in candidates:
        if symmetry_filter == "agassi":
            if sum(mvals[p] for p in created) != sum(mvals[p] for p in annihilated):
                continue
        factors = tuple((p, True) for p in created) + tuple((p, False) for p in annihilated)
        t = FermionTerm(1.0, factors)
        tau = jordan_wigner(t, n_modes) - jordan_wigner(t.adjoint(), n_modes)
        tau = tau.scale(1j).real()
        if tau.is_zero() or not commutator(tau, total_n).is_zero():
            continue
        key = tau
        if key in seen or -key in seen:
            continue
        seen.add(key)
        gens.append(tau)
        labels.append(label)
    return OperatorPool(gens, labels)


def adapt_gradient(H: PauliSum, pool: OperatorPool, psi: StateVector, commutators=None) -> np.ndarray:
    """``|<psi|[H, tau_i]|psi>|`` for every pool element."""
    comms = commutators or [commutator(H, tau) for tau in pool.generators]
    amps = psi.amplitudes
    return np.array([abs(np.vdot(amps, c.apply(amps))) for c in comms])


def adapt_vqe(
    H: PauliSum,
    pool: OperatorPool,
    reference: StateVector,
    max_iters: int = 30,
    grad_tol: float = 1e-6,
) -> VqeResult:
    """Grow the ansatz one pool operator at a time (largest gradient first)."""
    if abs(reference.norm() - 1.0) > 1e-10:
        raise ValueError("reference must be normalized")
    comms = [commutator(H, tau) for tau in pool.generators]
    program = AnsatzProgram(H.n_sites, reference)
    energy_fn = lambda ts: expectation(H, program.state(ts))
    energy = expectation(H, reference)
    energies, grad_hist, selected = [energy], [], []
    converged = False
    for it in range(max_iters + 1):
        grads = adapt_gradient(H, pool, program.state(), comms)
        gmax = float(grads.max())
        grad_hist.append(gmax)
        if gmax < grad_tol:
            converged = True
            break
        if it == max_iters:
            break
        k = int(np.argmax(grads))  # first maximum wins ties
        program.append(pool.generators[k], 0.0, pool.labels[k])
        selected.append(pool.labels[k])
        x0 = np.append(program.thetas[:-1], 0.0)
        x, fx, _ = _coordinate_then_simplex(energy_fn, x0)
        if fx <= energy:
            program.with_thetas(x)
            energy = fx
        else:
            program.with_thetas(x0)
        energies.append(energy)
    return VqeResult(
        energy=energy,
        program=program,
        iterations=len(selected),
        gradient_history=grad_hist,
        converged=converged,
        thetas=program.thetas,
        energy_history=energies,
        selected=selected,
    )
