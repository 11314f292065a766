"""Model Hamiltonians: extended Agassi (with its LMG reduction) and ANNNI."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .pauli import FermionTerm, PauliSum, jordan_wigner, number_operator


@dataclass(frozen=True)
class AgassiParams:
    """Point in the rescaled control-parameter space.

    The bare couplings follow from the rescaled ones as
    ``V = eps*chi/(2j-1)``, ``g = eps*sigma/(2j-1)``, ``h = eps*lambda/(2j-1)``.
    """

    epsilon: float = 1.0
    chi: float = 0.0
    sigma: float = 0.0
    lam: float = 0.0
    j: int = 2

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 1:
            raise ValueError(f"j must be a positive integer, got {self.j!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")

    @property
    def n_modes(self) -> int:
        return 4 * self.j

    @property
    def V(self) -> float:
        return self.epsilon * self.chi / (2 * self.j - 1)

    @property
    def g(self) -> float:
        return self.epsilon * self.sigma / (2 * self.j - 1)

    @property
    def h(self) -> float:
        return self.epsilon * self.lam / (2 * self.j - 1)

    def with_(self, **kw) -> "AgassiParams":
        fields = dict(epsilon=self.epsilon, chi=self.chi, sigma=self.sigma, lam=self.lam, j=self.j)
        fields.update(kw)
        return AgassiParams(**fields)


@dataclass(frozen=True)
class AnnniParams:
    n_sites: int
    kappa: float = 0.0
    h_field: float = 0.0

    def __post_init__(self):
        if self.n_sites < 3:
            raise ValueError("ANNNI chain needs at least 3 sites")
        if self.kappa < 0 or self.h_field < 0:
            raise ValueError("kappa and h_field are taken non-negative")


class PhaseLabel(enum.IntEnum):
    Symmetric = 0
    HF = 1
    BCS = 2
    CombinedHFBCS = 3


# -- mode bookkeeping --------------------------------------------------


def m_values(j: int) -> list[int]:
    """Site labels of one level: -j..-1, 1..j (no m = 0 site)."""
    return [m for m in range(-j, j + 1) if m != 0]


def mode_index(xi: int, m: int, j: int) -> int:
    """Qubit carrying mode ``(xi, m)``: lower level first, m ascending."""
    if xi not in (-1, 1):
        raise ValueError("xi must be -1 or +1")
    if m == 0 or abs(m) > j:
        raise ValueError(f"m={m} outside the site set for j={j}")
    pos = m + j if m < 0 else m + j - 1
    return pos if xi == -1 else 2 * j + pos


def _c(xi: int, m: int, j: int, dagger: bool) -> tuple[int, bool]:
    return (mode_index(xi, m, j), dagger)


@lru_cache(maxsize=None)
def build_collective_ops(j: int) -> dict[str, PauliSum]:
    """Qubit images of J+, J0, A_1^dag, A_-1^dag, A_0^dag and their adjoints."""
    if j < 1:
        raise ValueError("j must be >= 1")
    n = 4 * j
    ms = m_values(j)
    pos = range(1, j + 1)
    jplus = [FermionTerm(1.0, (_c(1, m, j, True), _c(-1, m, j, False))) for m in ms]
    jzero = []
    for m in ms:
        jzero.append(FermionTerm(0.5, (_c(1, m, j, True), _c(1, m, j, False))))
        jzero.append(FermionTerm(-0.5, (_c(-1, m, j, True), _c(-1, m, j, False))))
    a1 = [FermionTerm(1.0, (_c(1, m, j, True), _c(1, -m, j, True))) for m in pos]
    am1 = [FermionTerm(1.0, (_c(-1, m, j, True), _c(-1, -m, j, True))) for m in pos]
    a0 = []
    for m in pos:
        a0.append(FermionTerm(1.0, (_c(-1, m, j, True), _c(1, -m, j, True))))
        a0.append(FermionTerm(-1.0, (_c(-1, -m, j, True), _c(1, m, j, True))))
    ops = {
        "Jplus": jordan_wigner(jplus, n),
        "Jzero": jordan_wigner(jzero, n),
        "A1dag": jordan_wigner(a1, n),
        "Am1dag": jordan_wigner(am1, n),
        "A0dag": jordan_wigner(a0, n),
    }
    ops["Jminus"] = ops["Jplus"].adjoint()
    ops["A1"] = ops["A1dag"].adjoint()
    ops["Am1"] = ops["Am1dag"].adjoint()
    ops["A0"] = ops["A0dag"].adjoint()
    return ops


# Trotter group order is fixed: one-body, monopole, diagonal pairing,
# cross pairing, mixed (h) pairing.
AGASSI_TERM_NAMES = ("one_body", "monopole", "pair_diag", "pair_cross", "pair_mixed")


@lru_cache(maxsize=None)
def agassi_unit_terms(j: int) -> dict[str, PauliSum]:
    """Coupling-free pieces of the Hamiltonian.

    ``H = eps*one_body + V*monopole + g*(pair_diag + pair_cross) + h*pair_mixed``
    """
    ops = build_collective_ops(j)
    jp, jm = ops["Jplus"], ops["Jminus"]
    a1d, a1, am1d, am1 = ops["A1dag"], ops["A1"], ops["Am1dag"], ops["Am1"]
    terms = {
        "one_body": ops["Jzero"],
        "monopole": ((jp @ jp) + (jm @ jm)).scale(-0.5),
        "pair_diag": ((a1d @ a1) + (am1d @ am1)).scale(-1.0),
        "pair_cross": ((a1d @ am1) + (am1d @ a1)).scale(-1.0),
        "pair_mixed": (ops["A0dag"] @ ops["A0"]).scale(-2.0),
    }
    # drop imaginary rounding dust; every piece is Hermitian with real coefficients
    return {k: v.real() for k, v in terms.items()}


def agassi_couplings(p: AgassiParams) -> dict[str, float]:
    return {
        "one_body": p.epsilon,
        "monopole": p.V,
        "pair_diag": p.g,
        "pair_cross": p.g,
        "pair_mixed": p.h,
    }


def agassi_groups(p: AgassiParams) -> list[PauliSum]:
    """The five physical pieces of H in Trotter order (couplings applied)."""
    units = agassi_unit_terms(p.j)
    cpl = agassi_couplings(p)
    return [units[name].scale(cpl[name]) for name in AGASSI_TERM_NAMES]


def build_agassi(p: AgassiParams) -> PauliSum:
    """Extended Agassi Hamiltonian on ``4j`` qubits."""
    out = PauliSum.zero(p.n_modes)
    for g in agassi_groups(p):
        out = out + g
    return out


def build_lmg(epsilon: float = 1.0, chi: float = 0.0, j: int = 2) -> PauliSum:
    """Monopole-only (g = h = 0) reduction of the Agassi Hamiltonian."""
    return build_agassi(AgassiParams(epsilon=epsilon, chi=chi, sigma=0.0, lam=0.0, j=j))


def deformation_operator(j: int) -> PauliSum:
    """``(J+)^2 + (J-)^2``."""
    return agassi_unit_terms(j)["monopole"].scale(-2.0)


def pairing_operator(j: int) -> PauliSum:
    """``sum_{xi,xi'} A_xi^dag A_xi' + 2 A_0^dag A_0``."""
    u = agassi_unit_terms(j)
    return (u["pair_diag"] + u["pair_cross"] + u["pair_mixed"]).scale(-1.0)


def total_number(j: int) -> PauliSum:
    return number_operator(4 * j)


def build_annni(p: AnnniParams) -> PauliSum:
    """``sum_i X_i X_{i+1} - kappa X_i X_{i+2} + h Z_i`` on a periodic chain."""
    n = p.n_sites
    out = PauliSum.zero(n)
    for i in range(n):
        nn = (1 << i) | (1 << ((i + 1) % n))
        nnn = (1 << i) | (1 << ((i + 2) % n))
        out = out + PauliSum(n, {(nn, 0): 1.0})
        out = out + PauliSum(n, {(nnn, 0): -p.kappa})
        out = out + PauliSum.single(n, i, "Z", p.h_field)
    return out


# -- phase labelling -----------------------------------------------------

# Scan lines through the control-parameter cube: (fixed point, varied axis).
# Axis 0 = chi, 1 = sigma, 2 = lambda.
SCAN_LINES = {
    "a": ((None, 0.5, 0.5), 0),
    "b": ((0.5, None, 0.5), 1),
    "c": ((0.5, 0.5, None), 2),
    "d": ((1.5, None, 0.5), 1),
    "e": ((1.5, 0.5, None), 2),
    "f": ((0.5, 1.5, None), 2),
}

ORDER_PARAMETER_NAMES = ("deformation", "level_pairing", "mixed_pairing")
# order parameter driven by each axis; it also names the broken phase
_AXIS_PHASE = (PhaseLabel.HF, PhaseLabel.BCS, PhaseLabel.CombinedHFBCS)


def line_points(name: str, values) -> list[tuple[float, float, float]]:
    fixed, axis = SCAN_LINES[name]
    out = []
    for v in values:
        pt = list(fixed)
        pt[axis] = float(v)
        out.append(tuple(pt))
    return out


class AgassiSpectrum:
    """Half-filled-sector ground states and order parameters for one ``j``.

    Order parameters are reported as fractions: 0 at the noninteracting
    ground state, 1 at the largest eigenvalue of the operator in the sector.
    """

    def __init__(self, j: int = 2, epsilon: float = 1.0):
        from .dynamics import SectorSimulator

        self.j = j
        self.epsilon = epsilon
        units = agassi_unit_terms(j)
        self.sim = SectorSimulator([units[k] for k in AGASSI_TERM_NAMES], n_particles=2 * j)
        pair_level = (units["pair_diag"] + units["pair_cross"]).scale(-1.0)
        pair_mixed = units["pair_mixed"].scale(-1.0)
        ops = [deformation_operator(j), pair_level, pair_mixed]
        b = self.sim.basis
        self.op_mats = [o.to_dense()[np.ix_(b, b)].real for o in ops]
        _, v0 = self.sim.ground_space(self._couplings(0.0, 0.0, 0.0))
        self.baseline = np.array([self._expect(m, v0) for m in self.op_mats])
        self.ceiling = np.array([np.linalg.eigvalsh(m)[-1] for m in self.op_mats])

    def _couplings(self, chi, sigma, lam):
        p = AgassiParams(self.epsilon, chi, sigma, lam, self.j)
        c = agassi_couplings(p)
        return [c[k] for k in AGASSI_TERM_NAMES]

    @staticmethod
    def _expect(mat, vecs) -> float:
        # average over a (possibly degenerate) ground space
        return float(np.trace(vecs.conj().T @ mat @ vecs).real / vecs.shape[1])

    def raw_order_parameters(self, chi, sigma, lam, degeneracy_tol: float = 1e-10) -> np.ndarray:
        _, vecs = self.sim.ground_space(self._couplings(chi, sigma, lam), degeneracy_tol)
        return np.array([self._expect(m, vecs) for m in self.op_mats])

    def order_fractions(self, chi, sigma, lam, degeneracy_tol: float = 1e-10) -> np.ndarray:
        raw = self.raw_order_parameters(chi, sigma, lam, degeneracy_tol)
        return (raw - self.baseline) / (self.ceiling - self.baseline)


@lru_cache(maxsize=None)
def _spectrum(j: int, epsilon: float) -> AgassiSpectrum:
    return AgassiSpectrum(j, epsilon)


def calibrate_cuts(j: int = 2, epsilon: float = 1.0, n_line_points: int = 201) -> dict[str, float]:
    """Cut per order parameter from its steepest rise along the scan lines.

    Along each line, the order parameter driven by the varied axis is sampled
    on ``n_line_points`` points of [0, 2]; its value at the largest
    ``|d/dt|`` is recorded, and the cut is the mean over the lines driving it.
    """
    spec = _spectrum(j, epsilon)
    ts = np.linspace(0.0, 2.0, n_line_points)
    picked: dict[int, list[float]] = {0: [], 1: [], 2: []}
    for name, (_, axis) in SCAN_LINES.items():
        f = np.array([spec.order_fractions(*pt)[axis] for pt in line_points(name, ts)])
        k = int(np.argmax(np.abs(np.gradient(f, ts))))
        picked[axis].append(float(f[k]))
    return {ORDER_PARAMETER_NAMES[a]: float(np.mean(v)) for a, v in picked.items()}


@lru_cache(maxsize=None)
def default_cuts(j: int = 2, epsilon: float = 1.0) -> tuple[tuple[str, float], ...]:
    return tuple(calibrate_cuts(j, epsilon).items())


def classify_fractions(fractions, cuts: dict[str, float]) -> PhaseLabel:
    """Symmetric when every order parameter is below its cut, else the phase
    of the order parameter with the largest cut-normalized value."""
    scores = np.asarray(fractions) / np.array([cuts[n] for n in ORDER_PARAMETER_NAMES])
    if np.all(scores < 1.0):
        return PhaseLabel.Symmetric
    return _AXIS_PHASE[int(np.argmax(scores))]


def label_phase(p: AgassiParams, cuts: dict[str, float] | None = None) -> PhaseLabel:
    cuts = dict(default_cuts(p.j, p.epsilon)) if cuts is None else cuts
    fr = _spectrum(p.j, p.epsilon).order_fractions(p.chi, p.sigma, p.lam)
    return classify_fractions(fr, cuts)
