import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nucqml.dynamics import HermiticityError, StateVector
from nucqml.models import AgassiParams, build_agassi, build_collective_ops, build_lmg, total_number
from nucqml.pauli import DimensionError, PauliSum, commutator, to_dense_matrix
from nucqml.variational import (
    AnsatzProgram,
    OperatorPool,
    PoolError,
    adapt_gradient,
    adapt_vqe,
    build_pool,
    embed_quasispin,
    exact_ground_energy,
    expectation,
    lmg_ansatz,
    lmg_fock_ansatz,
    particle_number,
    quasispin_embedding,
    vqe_minimize,
)
from oracles import expm_state

H_ADAPT = build_agassi(AgassiParams(1.0, 0.8, 0.6, 0.4, 1))
HALF_J1 = StateVector.from_bits([1, 1, 0, 0])
SIX = [0b0011, 0b1100, 0b1010, 0b0110, 0b1001, 0b0101]


class TestLmgAnsatz:
    def test_endpoints(self):
        assert np.array_equal(lmg_ansatz(0.0).amplitudes, np.eye(16)[0])
        up = lmg_ansatz(math.pi / 2).amplitudes
        assert np.max(np.abs(up - np.eye(16)[15])) < 1e-15

    def test_norm_random(self):
        rng = np.random.default_rng(0)
        for t in rng.uniform(-10, 10, 100):
            assert abs(lmg_ansatz(t).norm() - 1) < 1e-12

    @settings(max_examples=50)
    @given(st.floats(-7, 7))
    def test_symmetric_sector(self, theta):
        amps = lmg_ansatz(theta).amplitudes
        assert np.allclose(amps[SIX], amps[SIX[0]], atol=1e-15)
        others = np.delete(amps, SIX + [0, 15])
        assert np.all(others == 0)

    def test_embedding_is_isometry(self):
        iso = quasispin_embedding(2)
        assert np.allclose(iso.conj().T @ iso, np.eye(16), atol=1e-14)

    def test_embedding_reference(self):
        psi = lmg_fock_ansatz(0.0)
        assert particle_number(psi) == 4
        # all spins down is the filled lower level
        assert abs(psi.amplitudes[0b00001111]) == pytest.approx(1.0)

    def test_embedding_maps_collective_spin(self):
        # J0 in Fock space acts as S_z = (n_up - n_down)/2 on the quasi-spins
        iso = quasispin_embedding(2)
        j0 = to_dense_matrix(build_collective_ops(2)["Jzero"])
        sz = np.diag([0.5 * (2 * bin(s).count("1") - 4) for s in range(16)])
        assert np.allclose(iso.conj().T @ j0 @ iso, sz, atol=1e-14)

    def test_embed_wrong_size(self):
        with pytest.raises(DimensionError):
            embed_quasispin(lmg_ansatz(0.1), 1)


class TestExpectation:
    def test_z0_down(self):
        assert expectation(PauliSum.single(3, 0, "Z"), StateVector.basis(3, 0)) == 1.0

    def test_eigenstate(self):
        H = build_lmg(1.0, 0.6)
        w, v = np.linalg.eigh(to_dense_matrix(H))
        assert abs(expectation(H, StateVector(8, v[:, 5])) - w[5]) < 1e-10

    def test_random_against_dense(self):
        rng = np.random.default_rng(1)
        H = PauliSum.from_labels([("XYZ", 0.3), ("ZZI", -0.8), ("IXX", 1.1), ("YIY", 0.2)])
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi = StateVector.from_array(v, normalize=True)
        ref = np.vdot(psi.amplitudes, to_dense_matrix(H) @ psi.amplitudes).real
        assert abs(expectation(H, psi) - ref) < 1e-10

    def test_non_hermitian(self):
        with pytest.raises(HermiticityError):
            expectation(PauliSum.from_label("Z", 1j), StateVector.basis(1, 0))

    def test_dims(self):
        with pytest.raises(DimensionError):
            expectation(PauliSum.from_label("ZZ"), StateVector.basis(1, 0))


def _grid_min(f):
    grid = np.linspace(-math.pi / 2, math.pi / 2, 1001)
    vals = np.array([f(t) for t in grid])
    k = int(np.argmin(vals))
    fine = np.linspace(grid[max(k - 1, 0)], grid[min(k + 1, 1000)], 1001)
    return min(vals.min(), min(f(t) for t in fine))


class TestVqe:
    def test_noninteracting(self):
        H = build_lmg(1.0, 0.0)
        res = vqe_minimize(H, lmg_fock_ansatz)
        assert res.converged
        assert abs(res.energy - (-2.0)) / 2.0 < 1e-10
        assert abs(res.thetas[0]) < 1e-6

    @pytest.mark.parametrize("chi", [0.3, 0.9, 1.7])
    def test_grid_scan_oracle(self, chi):
        H = build_lmg(1.0, chi)
        res = vqe_minimize(H, lmg_fock_ansatz)
        ref = _grid_min(lambda t: expectation(H, lmg_fock_ansatz(t)))
        assert abs(res.energy - ref) < 1e-8
        assert res.energy >= exact_ground_energy(H) - 1e-9

    def test_multi_parameter(self):
        H = build_lmg(1.0, 0.9)
        fam = lambda a, b: lmg_fock_ansatz(a + 0 * b)
        res = vqe_minimize(H, fam, [0.1, 0.2])
        one = vqe_minimize(H, lmg_fock_ansatz)
        assert abs(res.energy - one.energy) < 1e-8

    def test_non_hermitian(self):
        with pytest.raises(HermiticityError):
            vqe_minimize(PauliSum.from_label("X", 1j), lambda t: StateVector.basis(1, 0))


class TestPool:
    def test_two_modes(self):
        pool = build_pool(2, body="one")
        assert len(pool) == 1
        g = pool.generators[0]
        ref = PauliSum.from_labels([("YX", -0.5), ("XY", 0.5)])
        assert g.allclose(ref) or g.allclose(-ref)

    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_hermitian_number_conserving(self, n):
        pool = build_pool(n)
        N = PauliSum.zero(n)
        for p in range(n):
            N = N + PauliSum.identity(n, 0.5) - PauliSum.single(n, p, "Z", 0.5)
        for tau in pool.generators:
            assert tau.is_hermitian()
            assert commutator(tau, N).is_zero()

    def test_no_duplicates(self):
        pool = build_pool(6)
        seen = set()
        for tau in pool.generators:
            assert tau not in seen and -tau not in seen
            seen.add(tau)

    def test_counts(self):
        assert len(build_pool(4, body="one")) == 6
        assert len(build_pool(4, body="two")) == 15

    def test_agassi_filter_subset(self):
        full = build_pool(8, body="two")
        sym = build_pool(8, "agassi", body="two", j=2)
        assert 0 < len(sym) < len(full)
        assert set(sym.labels) <= set(full.labels)

    def test_errors(self):
        with pytest.raises(PoolError):
            build_pool(1)
        with pytest.raises(PoolError):
            OperatorPool([], [])
        with pytest.raises(ValueError):
            build_pool(4, "agassi")


class TestAdaptGradient:
    def test_eigenstate_zero(self):
        w, v = np.linalg.eigh(to_dense_matrix(H_ADAPT))
        g = adapt_gradient(H_ADAPT, build_pool(4), StateVector(4, v[:, 2]))
        assert np.max(g) < 1e-10

    def test_commuting_entry_zero(self):
        N = total_number(1)
        pool = OperatorPool([N, build_pool(4).generators[0]], ["N", "g"])
        rng = np.random.default_rng(0)
        psi = StateVector.from_array(rng.normal(size=16) + 1j * rng.normal(size=16), normalize=True)
        assert adapt_gradient(H_ADAPT, pool, psi)[0] < 1e-12

    def test_finite_difference(self):
        pool = build_pool(4)
        rng = np.random.default_rng(3)
        psi = StateVector.from_array(rng.normal(size=16) + 1j * rng.normal(size=16), normalize=True)
        grads = adapt_gradient(H_ADAPT, pool, psi)
        mat = to_dense_matrix(H_ADAPT)
        step = 1e-5
        for g, tau in zip(grads, pool.generators):
            t = to_dense_matrix(tau)
            e = [
                np.vdot(s, mat @ s).real
                for s in (expm_state(t, psi.amplitudes, step), expm_state(t, psi.amplitudes, -step))
            ]
            assert abs(g - abs(e[0] - e[1]) / (2 * step)) < 1e-6


class TestAdapt:
    def test_exact_in_sector(self):
        res = adapt_vqe(H_ADAPT, build_pool(4, body="two"), HALF_J1)
        exact = exact_ground_energy(H_ADAPT, n_particles=2)
        assert res.converged and res.iterations <= 30
        assert abs(res.energy - exact) / abs(exact) < 1e-6
        assert res.energy >= exact_ground_energy(H_ADAPT) - 1e-9
        assert res.gradient_history[-1] < 1e-6

    def test_sector_oracle_value(self):
        # dense N=2 block: the half-filled reference cannot leave it
        assert exact_ground_energy(H_ADAPT, 2) == pytest.approx(-2.32046505, abs=1e-8)
        assert exact_ground_energy(H_ADAPT) == pytest.approx(-2.8, abs=1e-12)

    def test_ground_reference_no_iterations(self):
        mat = to_dense_matrix(H_ADAPT)
        idx = np.arange(16)
        sec = idx[np.bitwise_count(idx) == 2]
        w, v = np.linalg.eigh(mat[np.ix_(sec, sec)])
        amps = np.zeros(16, dtype=complex)
        amps[sec] = v[:, 0]
        res = adapt_vqe(H_ADAPT, build_pool(4), StateVector(4, amps))
        assert res.iterations == 0 and res.converged

    def test_monotone_and_normalized(self):
        H = build_agassi(AgassiParams(1.0, 1.3, 0.2, 0.9, 1))
        res = adapt_vqe(H, build_pool(4, body="both"), HALF_J1, max_iters=6)
        assert np.all(np.diff(res.energy_history) <= 1e-12)
        assert abs(res.program.state().norm() - 1) < 1e-10

    def test_not_converged(self):
        res = adapt_vqe(H_ADAPT, build_pool(4, body="two"), HALF_J1, max_iters=0)
        assert not res.converged and res.iterations == 0

    def test_unnormalized_reference(self):
        class Fake:
            def norm(self):
                return 2.0

        with pytest.raises(ValueError):
            adapt_vqe(H_ADAPT, build_pool(4), Fake())


class TestProgram:
    def test_reference_first(self):
        a = PauliSum.from_labels([("XI", 1.0)])
        b = PauliSum.from_labels([("ZX", 1.0)])
        ref = StateVector.basis(2, 0)
        prog = AnsatzProgram(2, ref)
        prog.append(a, 0.4)
        prog.append(b, 0.7)
        want = expm_state(to_dense_matrix(b), expm_state(to_dense_matrix(a), ref.amplitudes, 0.4), 0.7)
        assert np.allclose(prog.state().amplitudes, want, atol=1e-12)

    def test_rejects_non_hermitian(self):
        prog = AnsatzProgram(1, StateVector.basis(1, 0))
        with pytest.raises(HermiticityError):
            prog.append(PauliSum.from_label("X", 1j))
