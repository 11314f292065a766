"""Pauli-string algebra, fermionic terms and the Jordan-Wigner mapping.

Bit conventions used throughout the package:

* site ``k`` is bit ``k`` of a basis-state index (site 0 is the least
  significant bit);
* a Pauli string is stored as an ``(x_mask, z_mask)`` pair of Python ints,
  with site ``k`` carrying I/X/Y/Z for ``(x_k, z_k) = (0,0)/(1,0)/(1,1)/(0,1)``;
* ``|1>`` on qubit ``p`` means fermionic mode ``p`` is occupied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

PRUNE_TOL = 1e-12
DENSE_SITE_CAP = 14

_PHASES = (1, 1j, -1, -1j)
_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTERS.items()}


class DimensionError(ValueError):
    """Operands act on different numbers of sites."""


class ResourceError(RuntimeError):
    """Requested dense object exceeds the site cap."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


def _phase_exponent(phase: complex) -> int:
    for k, unit in enumerate(_PHASES):
        if phase == unit:
            return k
    raise ValueError(f"phase must be one of +1, -1, +i, -i; got {phase!r}")


def _product_exponent(x1: int, z1: int, x2: int, z2: int) -> int:
    """Power of i picked up by P(x1,z1) P(x2,z2) = i^k P(x1^x2, z1^z2).

    Uses P(x, z) = i^{|x&z|} X^x Z^z and Z^z X^x = (-1)^{|z&x|} X^x Z^z.
    """
    x, z = x1 ^ x2, z1 ^ z2
    return (
        _popcount(x1 & z1) + _popcount(x2 & z2) + 2 * _popcount(z1 & x2) - _popcount(x & z)
    ) % 4


@dataclass(frozen=True)
class PauliString:
    n_sites: int
    x_mask: int
    z_mask: int
    phase: complex = 1

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        limit = 1 << self.n_sites
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise ValueError("masks must fit in n_sites bits")
        _phase_exponent(self.phase)

    @classmethod
    def from_label(cls, label: str, phase: complex = 1) -> "PauliString":
        x = z = 0
        for k, ch in enumerate(label.upper()):
            xb, zb = _BITS[ch]
            x |= xb << k
            z |= zb << k
        return cls(len(label), x, z, phase)

    @property
    def label(self) -> str:
        return _label(self.n_sites, self.x_mask, self.z_mask)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def to_sum(self) -> "PauliSum":
        return PauliSum(self.n_sites, {(self.x_mask, self.z_mask): complex(self.phase)})

    def __repr__(self) -> str:
        sign = {1: "+", 1j: "+i", -1: "-", -1j: "-i"}[self.phase]
        return f"PauliString({sign}{self.label})"


def _label(n_sites: int, x: int, z: int) -> str:
    return "".join(_LETTERS[((x >> k) & 1, (z >> k) & 1)] for k in range(n_sites))


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Pauli-group product ``a * b``."""
    if a.n_sites != b.n_sites:
        raise DimensionError(f"{a.n_sites} vs {b.n_sites} sites")
    k = (
        _phase_exponent(a.phase)
        + _phase_exponent(b.phase)
        + _product_exponent(a.x_mask, a.z_mask, b.x_mask, b.z_mask)
    ) % 4
    return PauliString(a.n_sites, a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask, _PHASES[k])


Key = tuple  # (x_mask, z_mask)
Scalar = Union[int, float, complex]


class PauliSum:
    """Weighted sum of Pauli strings in canonical (pruned, merged) form.

    Instances are treated as immutable values; every arithmetic operation
    returns a new object.
    """

    __slots__ = ("n_sites", "_terms")

    def __init__(self, n_sites: int, terms: Mapping[Key, complex] | None = None):
        if n_sites < 1:
            raise ValueError("n_sites must be positive")
        self.n_sites = int(n_sites)
        limit = 1 << n_sites
        clean: dict[Key, complex] = {}
        for (x, z), c in (terms or {}).items():
            if not (0 <= x < limit and 0 <= z < limit):
                raise ValueError("mask does not fit in n_sites bits")
            c = complex(c)
            if abs(c) >= PRUNE_TOL:
                clean[(int(x), int(z))] = c
        self._terms = clean

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, n_sites: int) -> "PauliSum":
        return cls(n_sites)

    @classmethod
    def identity(cls, n_sites: int, coeff: Scalar = 1.0) -> "PauliSum":
        return cls(n_sites, {(0, 0): coeff})

    @classmethod
    def from_label(cls, label: str, coeff: Scalar = 1.0) -> "PauliSum":
        p = PauliString.from_label(label)
        return cls(p.n_sites, {(p.x_mask, p.z_mask): coeff})

    @classmethod
    def single(cls, n_sites: int, site: int, op: str, coeff: Scalar = 1.0) -> "PauliSum":
        """``coeff * op_site`` with identity elsewhere."""
        if not 0 <= site < n_sites:
            raise IndexError(f"site {site} out of range for {n_sites} sites")
        xb, zb = _BITS[op.upper()]
        return cls(n_sites, {(xb << site, zb << site): coeff})

    @classmethod
    def from_labels(cls, items: Iterable[tuple[str, Scalar]]) -> "PauliSum":
        items = list(items)
        if not items:
            raise ValueError("need at least one term to infer n_sites")
        out = cls.zero(len(items[0][0]))
        for label, c in items:
            out = out + cls.from_label(label, c)
        return out

    # -- views --------------------------------------------------------
    @property
    def terms(self) -> dict[Key, complex]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[Key, complex]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def labels(self) -> dict[str, complex]:
        return {_label(self.n_sites, x, z): c for (x, z), c in self._terms.items()}

    def is_hermitian(self, tol: float = PRUNE_TOL) -> bool:
        return all(abs(c.imag) < tol for c in self._terms.values())

    def is_diagonal(self) -> bool:
        return all(x == 0 for x, _ in self._terms)

    def coefficient(self, label: str) -> complex:
        p = PauliString.from_label(label)
        return self._terms.get((p.x_mask, p.z_mask), 0j)

    # -- arithmetic ---------------------------------------------------
    def _check(self, other: "PauliSum") -> None:
        if not isinstance(other, PauliSum):
            raise TypeError(f"expected PauliSum, got {type(other).__name__}")
        if other.n_sites != self.n_sites:
            raise DimensionError(f"{self.n_sites} vs {other.n_sites} sites")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        return add_scaled(self, 1.0, other)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return add_scaled(self, -1.0, other)

    def __neg__(self) -> "PauliSum":
        return self.scale(-1.0)

    def scale(self, coeff: Scalar) -> "PauliSum":
        return PauliSum(self.n_sites, {k: coeff * c for k, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            return self @ other
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, other: Scalar) -> "PauliSum":
        return self.scale(1.0 / other)

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        acc: dict[Key, complex] = {}
        for (x1, z1), c1 in self._terms.items():
            for (x2, z2), c2 in other._terms.items():
                key = (x1 ^ x2, z1 ^ z2)
                val = c1 * c2 * _PHASES[_product_exponent(x1, z1, x2, z2)]
                acc[key] = acc.get(key, 0j) + val
        return PauliSum(self.n_sites, acc)

    def adjoint(self) -> "PauliSum":
        return PauliSum(self.n_sites, {k: c.conjugate() for k, c in self._terms.items()})

    def real(self) -> "PauliSum":
        """Drop imaginary parts of coefficients (only meaningful when they are dust)."""
        return PauliSum(self.n_sites, {k: c.real for k, c in self._terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_sites == other.n_sites and self._terms == other._terms

    def __hash__(self):
        return hash((self.n_sites, frozenset(self._terms.items())))

    def allclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        self._check(other)
        return (self - other).max_abs_coeff() <= atol

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g}){lab}" for lab, c in sorted(self.labels().items()))
        return f"PauliSum[{self.n_sites}]({body or '0'})"

    # -- numerics -----------------------------------------------------
    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Matrix-free product ``H @ vec``."""
        vec = np.asarray(vec)
        dim = 1 << self.n_sites
        if vec.shape[0] != dim:
            raise DimensionError(f"vector length {vec.shape[0]} != {dim}")
        idx = np.arange(dim)
        out = np.zeros(vec.shape, dtype=complex)
        for (x, z), c in self._terms.items():
            signs = _z_signs(idx, z)
            pref = c * _PHASES[_popcount(x & z) % 4]
            if vec.ndim == 1:
                out[idx ^ x] += pref * signs * vec
            else:
                out[idx ^ x] += pref * signs[:, None] * vec
        return out

    def to_dense(self) -> np.ndarray:
        return to_dense_matrix(self)


def _z_signs(idx: np.ndarray, z: int) -> np.ndarray:
    return 1 - 2 * (np.bitwise_count(idx & z) & 1).astype(np.int64)


def add_scaled(target: PauliSum, coeff: Scalar, s: PauliSum) -> PauliSum:
    """``target + coeff * s`` in canonical form."""
    target._check(s)
    acc = dict(target._terms)
    for k, c in s._terms.items():
        acc[k] = acc.get(k, 0j) + coeff * c
    return PauliSum(target.n_sites, acc)


def interpolate(h_a: PauliSum, h_b: PauliSum, x: float) -> PauliSum:
    """``(1 - x) H_a + x H_b``: the two-symmetry interpolating Hamiltonian."""
    return add_scaled(add_scaled(PauliSum.zero(h_a.n_sites), 1.0 - x, h_a), x, h_b)


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    """``ab - ba``; only anticommuting string pairs contribute."""
    a._check(b)
    acc: dict[Key, complex] = {}
    for (x1, z1), c1 in a._terms.items():
        for (x2, z2), c2 in b._terms.items():
            # strings anticommute iff symplectic product is odd
            if (_popcount(x1 & z2) + _popcount(z1 & x2)) % 2 == 0:
                continue
            key = (x1 ^ x2, z1 ^ z2)
            val = 2 * c1 * c2 * _PHASES[_product_exponent(x1, z1, x2, z2)]
            acc[key] = acc.get(key, 0j) + val
    return PauliSum(a.n_sites, acc)


def to_dense_matrix(s: PauliSum) -> np.ndarray:
    """Dense ``2^n x 2^n`` matrix of ``s`` (site 0 = least significant bit)."""
    if s.n_sites > DENSE_SITE_CAP:
        raise ResourceError(f"{s.n_sites} sites exceeds dense cap of {DENSE_SITE_CAP}")
    dim = 1 << s.n_sites
    idx = np.arange(dim)
    mat = np.zeros((dim, dim), dtype=complex)
    for (x, z), c in s.items():
        pref = c * _PHASES[_popcount(x & z) % 4]
        mat[idx ^ x, idx] += pref * _z_signs(idx, z)
    return mat


# -- fermions ----------------------------------------------------------


@dataclass(frozen=True)
class FermionTerm:
    """``coefficient * f_1 f_2 ... f_k`` with each ``f = c_p`` or ``c_p^dagger``.

    Factors keep their written order; no normal ordering is applied.
    """

    coefficient: complex
    factors: tuple[tuple[int, bool], ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple((int(m), bool(d)) for m, d in self.factors))

    @classmethod
    def parse(cls, coefficient: complex, spec: Sequence[tuple[int, bool]]) -> "FermionTerm":
        return cls(coefficient, tuple(spec))

    def adjoint(self) -> "FermionTerm":
        return FermionTerm(
            complex(self.coefficient).conjugate(),
            tuple((m, not d) for m, d in reversed(self.factors)),
        )

    def modes(self) -> set[int]:
        return {m for m, _ in self.factors}


def create(p: int, coeff: complex = 1.0) -> FermionTerm:
    return FermionTerm(coeff, ((p, True),))


def annihilate(p: int, coeff: complex = 1.0) -> FermionTerm:
    return FermionTerm(coeff, ((p, False),))


def fermion_product(*terms: FermionTerm) -> FermionTerm:
    coeff = 1.0 + 0j
    factors: list[tuple[int, bool]] = []
    for t in terms:
        coeff *= t.coefficient
        factors.extend(t.factors)
    return FermionTerm(coeff, tuple(factors))


def _jw_ladder(p: int, dagger: bool, n_modes: int) -> PauliSum:
    parity = (1 << p) - 1  # Z on every q < p
    y_sign = -0.5j if dagger else 0.5j
    # X_p Z_<p and Y_p Z_<p share z bits on q<p; Y adds z at p
    return PauliSum(
        n_modes,
        {
            (1 << p, parity): 0.5,
            (1 << p, parity | (1 << p)): y_sign,
        },
    )


def jordan_wigner(
    term: FermionTerm | Iterable[FermionTerm], n_modes: int
) -> PauliSum:
    """Map a fermionic term (or a sum of terms) to a qubit operator.

    ``c_p^dagger -> Z_0...Z_{p-1} (X_p - iY_p)/2`` and
    ``c_p -> Z_0...Z_{p-1} (X_p + iY_p)/2``.
    """
    if not isinstance(term, FermionTerm):
        out = PauliSum.zero(n_modes)
        for t in term:
            out = out + jordan_wigner(t, n_modes)
        return out
    for m, _ in term.factors:
        if not 0 <= m < n_modes:
            raise IndexError(f"mode {m} out of range for {n_modes} modes")
    op = PauliSum.identity(n_modes)
    for m, dagger in term.factors:
        op = op @ _jw_ladder(m, dagger, n_modes)
    return op.scale(term.coefficient)


def number_operator(n_modes: int, modes: Iterable[int] | None = None) -> PauliSum:
    """Total particle number over ``modes`` (default: all)."""
    modes = range(n_modes) if modes is None else modes
    return jordan_wigner(
        [FermionTerm(1.0, ((p, True), (p, False))) for p in modes], n_modes
    )


# -- text serialization ------------------------------------------------


def dumps(s: PauliSum) -> str:
    """One ``coeff_re coeff_im label`` line per term, site 0 leftmost."""
    lines = [
        f"{c.real:.17g} {c.imag:.17g} {lab}" for lab, c in sorted(s.labels().items())
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def loads(text: str, n_sites: int | None = None) -> PauliSum:
    out: PauliSum | None = None if n_sites is None else PauliSum.zero(n_sites)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 're im label', got {raw!r}")
        try:
            coeff = complex(float(parts[0]), float(parts[1]))
            term = PauliSum.from_label(parts[2], coeff)
        except (KeyError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        out = term if out is None else out + term
    if out is None:
        raise ValueError("empty Pauli sum text and no n_sites given")
    return out
