import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nucqml import pauli
from nucqml.pauli import (
    DimensionError,
    FermionTerm,
    PauliString,
    PauliSum,
    ResourceError,
    add_scaled,
    commutator,
    interpolate,
    jordan_wigner,
    multiply,
    to_dense_matrix,
)
from oracles import Fock, kron_sites


def ps(label, phase=1):
    return PauliString.from_label(label, phase)


class TestMultiply:
    def test_x_times_y(self):
        assert multiply(ps("X"), ps("Y")) == ps("Z", 1j)

    def test_z_squared(self):
        assert multiply(ps("Z"), ps("Z")) == ps("I")

    def test_two_site(self):
        assert multiply(ps("XZ"), ps("ZZ")) == ps("YI", -1j)

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            multiply(ps("X"), ps("XX"))

    def test_bad_phase(self):
        with pytest.raises(ValueError):
            PauliString(1, 1, 0, 0.5)

    def test_mask_width(self):
        with pytest.raises(ValueError):
            PauliString(2, 4, 0)

    @pytest.mark.parametrize("a,b", list(itertools.product("IXYZ", repeat=2)))
    def test_matches_matrices(self, a, b):
        prod = multiply(ps(a), ps(b))
        lhs = prod.phase * kron_sites({0: prod.label}, 1)
        rhs = kron_sites({0: a}, 1) @ kron_sites({0: b}, 1)
        assert np.allclose(lhs, rhs)


strings3 = st.tuples(
    st.text("IXYZ", min_size=3, max_size=3), st.sampled_from([1, -1, 1j, -1j])
).map(lambda t: ps(*t))


@given(strings3, strings3, strings3)
def test_multiply_associative(a, b, c):
    assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))


class TestPauliSum:
    def test_interpolation_limits(self):
        ha = PauliSum.from_labels([("XX", 1.0), ("ZI", 0.3)])
        hb = PauliSum.from_labels([("ZZ", -2.0), ("IY", 0.5)])
        assert interpolate(ha, hb, 0.0) == ha
        assert interpolate(ha, hb, 1.0) == hb

    def test_cancellation(self):
        h = PauliSum.from_labels([("XY", 0.7), ("ZZ", -1.1)])
        assert add_scaled(h, -1.0, h).is_zero()

    def test_pruning(self):
        h = PauliSum.from_labels([("XY", 1.0), ("ZZ", 1e-13)])
        assert len(h) == 1

    def test_add_mismatch(self):
        with pytest.raises(DimensionError):
            PauliSum.from_label("X") + PauliSum.from_label("XX")

    def test_commutator_disjoint(self):
        assert commutator(PauliSum.from_label("ZI"), PauliSum.from_label("IZ")).is_zero()

    def test_commutator_su2(self):
        assert commutator(PauliSum.from_label("X"), PauliSum.from_label("Z")) == PauliSum.from_label(
            "Y", -2j
        )

    def test_self_commutator(self):
        h = PauliSum.from_labels([("XYZ", 0.3), ("ZZI", 1.0), ("IXX", -0.4)])
        assert commutator(h, h).is_zero()

    def test_commutator_matches_dense(self):
        rng = np.random.default_rng(3)
        labels = ["".join(t) for t in itertools.product("IXYZ", repeat=3)]
        a = PauliSum.from_labels([(lab, rng.normal()) for lab in rng.choice(labels, 6)])
        b = PauliSum.from_labels([(lab, rng.normal()) for lab in rng.choice(labels, 6)])
        ma, mb = to_dense_matrix(a), to_dense_matrix(b)
        assert np.allclose(to_dense_matrix(commutator(a, b)), ma @ mb - mb @ ma, atol=1e-13)
        assert np.allclose(to_dense_matrix(a @ b), ma @ mb, atol=1e-13)

    def test_apply_matches_dense(self):
        rng = np.random.default_rng(5)
        h = PauliSum.from_labels([("XYZI", 0.3), ("ZZXI", 1.0), ("IXXY", -0.4j)])
        v = rng.normal(size=16) + 1j * rng.normal(size=16)
        assert np.allclose(h.apply(v), to_dense_matrix(h) @ v)


class TestDense:
    def test_identity(self):
        assert np.array_equal(to_dense_matrix(PauliSum.identity(1)), np.eye(2))

    def test_z0_bit_order(self):
        mat = to_dense_matrix(PauliSum.single(2, 0, "Z"))
        assert np.array_equal(np.diag(mat).real, [1, -1, 1, -1])

    def test_cap(self):
        with pytest.raises(ResourceError):
            to_dense_matrix(PauliSum.identity(15))

    @pytest.mark.parametrize("label", ["XYZ", "ZIY", "YYX", "IXI"])
    def test_against_kron(self, label):
        ref = kron_sites(dict(enumerate(label)), 3)
        assert np.array_equal(to_dense_matrix(PauliSum.from_label(label)), ref)

    def test_linear(self):
        rng = np.random.default_rng(0)
        labels = ["".join(t) for t in itertools.product("IXYZ", repeat=3)]
        a = PauliSum.from_labels([(lab, rng.normal()) for lab in labels[:20]])
        b = PauliSum.from_labels([(lab, rng.normal()) for lab in labels[30:]])
        c = 0.3 - 1.2j
        lhs = to_dense_matrix(add_scaled(a, c, b))
        assert np.max(np.abs(lhs - (to_dense_matrix(a) + c * to_dense_matrix(b)))) < 1e-13

    def test_hermitian(self):
        h = PauliSum.from_labels([("XZ", 0.4), ("YY", -1.0), ("ZI", 2.0)])
        m = to_dense_matrix(h)
        assert np.max(np.abs(m - m.conj().T)) < 1e-14


class TestJordanWigner:
    def test_number_operator(self):
        t = FermionTerm(1.0, ((0, True), (0, False)))
        expected = PauliSum.from_labels([("I", 0.5), ("Z", -0.5)])
        assert jordan_wigner(t, 1).allclose(expected)

    def test_hopping(self):
        terms = [FermionTerm(1.0, ((1, True), (0, False))), FermionTerm(1.0, ((0, True), (1, False)))]
        expected = PauliSum.from_labels([("XX", 0.5), ("YY", 0.5)])
        assert jordan_wigner(terms, 2).allclose(expected)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            jordan_wigner(FermionTerm(1.0, ((3, True),)), 3)

    def test_single_ladders_match_fock(self):
        n = 5
        fock = Fock(n)
        for p in range(n):
            up = to_dense_matrix(jordan_wigner(FermionTerm(1.0, ((p, True),)), n))
            assert np.max(np.abs(up - fock.cdag[p])) < 1e-15

    def test_anticommutation(self):
        n = 6
        cd = [jordan_wigner(FermionTerm(1.0, ((p, True),)), n) for p in range(n)]
        c = [jordan_wigner(FermionTerm(1.0, ((p, False),)), n) for p in range(n)]
        ident = PauliSum.identity(n)
        for p in range(n):
            for q in range(n):
                anti = (c[p] @ cd[q]) + (cd[q] @ c[p])
                assert anti == (ident if p == q else PauliSum.zero(n))
                assert ((c[p] @ c[q]) + (c[q] @ c[p])).is_zero()

    @settings(max_examples=50)
    @given(
        st.lists(st.tuples(st.integers(0, 3), st.booleans()), min_size=1, max_size=4),
        st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    )
    def test_hermitian_combination_is_real(self, factors, coeff):
        t = FermionTerm(coeff, tuple(factors))
        op = jordan_wigner([t, t.adjoint()], 4)
        assert all(abs(c.imag) < 1e-12 for _, c in op.items())

    def test_term_product_matches_fock(self):
        n = 4
        fock = Fock(n)
        t = FermionTerm(0.7, ((3, True), (1, True), (0, False), (2, False)))
        ref = 0.7 * fock.cdag[3] @ fock.cdag[1] @ fock.c[0] @ fock.c[2]
        assert np.max(np.abs(to_dense_matrix(jordan_wigner(t, n)) - ref)) < 1e-14


class TestSerialization:
    def test_roundtrip(self):
        h = PauliSum.from_labels([("XZI", 0.1 + 0.2j), ("IIY", -1 / 3)])
        text = pauli.dumps(h)
        assert pauli.loads(text) == h
        assert "IIY" in text.splitlines()[0] or "IIY" in text

    def test_leftmost_is_site0(self):
        h = PauliSum.single(3, 0, "X", 2.0)
        assert pauli.dumps(h).strip().endswith("XII")

    def test_bad_line(self):
        with pytest.raises(ValueError, match="line 2"):
            pauli.loads("1 0 XX\n1 0\n")
