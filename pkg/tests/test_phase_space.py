import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddelastic.phase import (LocalState, StateField, field_norm, field_sq_norm, local_sq_distance,
                             local_sq_norm, norm_equivalence_constants)
from ddelastic.tensors import ElasticityTensor, SymMatrix, pack, unpack

seeds = st.integers(0, 2**31 - 1)
dims = st.sampled_from([1, 2, 3])


WEIGHTS = np.array([0.1, 0.25, 0.5, 0.3, 0.9, 0.2])


def random_field(rng, C, scale=1.0, weights=WEIGHTS):
    shape = (weights.size, C.size)
    return StateField(scale * rng.normal(size=shape), scale * rng.normal(size=shape), weights, C)


class TestSymMatrix:
    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            SymMatrix.from_matrix([[1.0, 2.0], [0.0, 1.0]])

    @given(seeds, dims)
    def test_pack_roundtrip_exact(self, seed, dim):
        a = np.random.default_rng(seed).normal(size=(dim, dim))
        a = a + a.T
        assert np.array_equal(unpack(pack(a)), a)

    def test_contraction_counts_shear_twice(self):
        a = SymMatrix.from_matrix([[1.0, 2.0], [2.0, 3.0]])
        assert a.dot(a) == pytest.approx(np.sum(a.to_matrix() ** 2))


class TestElasticityTensor:
    def test_not_spd_rejected(self):
        with pytest.raises(ValueError):
            ElasticityTensor([[1.0, 0.0], [0.0, -1.0]][:1])
        with pytest.raises(ValueError):
            ElasticityTensor(-np.eye(3))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            ElasticityTensor([[2.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]])

    @given(seeds, dims)
    def test_inverse_composes_to_identity(self, seed, dim):
        rng = np.random.default_rng(seed)
        C = ElasticityTensor.random(dim, rng)
        v = rng.normal(size=C.size)
        assert np.allclose(C.apply_inverse(C.apply(v)), v, rtol=1e-12, atol=1e-12 * np.abs(v).max())

    def test_identity_acts_as_identity_on_tensors(self):
        I = ElasticityTensor.identity(3)
        a = np.random.default_rng(0).normal(size=(3, 3))
        a = a + a.T
        assert np.allclose(I.apply_tensor(a), a)

    @given(seeds, dims)
    def test_embedding_matches_energy(self, seed, dim):
        rng = np.random.default_rng(seed)
        C = ElasticityTensor.random(dim, rng)
        e, s = rng.normal(size=C.size), rng.normal(size=C.size)
        emb = np.concatenate([C.strain_embedding(e), C.stress_embedding(s)])
        z = LocalState.from_voigt(e, s)
        assert emb @ emb == pytest.approx(local_sq_norm(z, C), rel=1e-12)


class TestLocalNorm:
    def test_scalar_example(self):
        assert local_sq_norm(LocalState.scalar(1.0, 2.0), ElasticityTensor.scalar(2.0)) == pytest.approx(2.0)

    def test_zero_state(self):
        assert local_sq_norm(LocalState.zeros(2), ElasticityTensor.identity(2)) == 0.0

    def test_identity_2d_hand_value(self):
        z = LocalState(SymMatrix.diag(1.0, 0.0), SymMatrix.zeros(2))
        assert local_sq_norm(z, ElasticityTensor.identity(2)) == pytest.approx(0.5)

    def test_shear_strain_hand_value(self):
        # C = identity: 1/2 eps:eps with eps_12 = eps_21 = 1
        z = LocalState(SymMatrix.from_matrix([[0.0, 1.0], [1.0, 0.0]]), SymMatrix.zeros(2))
        assert local_sq_norm(z, ElasticityTensor.identity(2)) == pytest.approx(1.0)

    def test_distance_hand_values(self):
        assert local_sq_distance(LocalState.scalar(1, 0), LocalState.scalar(0, 0),
                                 ElasticityTensor.scalar(1.0)) == pytest.approx(0.5)
        assert local_sq_distance(LocalState.scalar(0, 2), LocalState.scalar(0, 0),
                                 ElasticityTensor.scalar(4.0)) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            local_sq_norm(LocalState.zeros(2), ElasticityTensor.scalar(1.0))
        with pytest.raises(ValueError):
            local_sq_distance(LocalState.zeros(2), LocalState.zeros(1), ElasticityTensor.scalar(1.0))

    @given(seeds, dims)
    def test_distance_symmetric_and_definite(self, seed, dim):
        rng = np.random.default_rng(seed)
        C = ElasticityTensor.random(dim, rng)
        m = C.size
        a = LocalState.from_voigt(rng.normal(size=m), rng.normal(size=m))
        b = LocalState.from_voigt(rng.normal(size=m), rng.normal(size=m))
        assert local_sq_distance(a, b, C) == pytest.approx(local_sq_distance(b, a, C), rel=1e-14)
        assert local_sq_distance(a, a, C) == 0.0
        assert local_sq_distance(a, b, C) > 0


class TestFieldNorm:
    def test_single_element(self):
        fld = StateField([[1.0]], [[2.0]], [1.0], ElasticityTensor.scalar(2.0))
        assert field_sq_norm(fld) == pytest.approx(2.0)
        assert field_sq_norm(fld * 0) == 0.0

    def test_additivity(self):
        fld = StateField([[1.0], [1.0]], [[2.0], [2.0]], [0.5, 0.5], ElasticityTensor.scalar(2.0))
        assert field_sq_norm(fld) == pytest.approx(2.0)

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            StateField([[1.0]], [[1.0]], [0.0], ElasticityTensor.scalar(1.0))
        with pytest.raises(ValueError):
            StateField([[1.0]], [[1.0]], [1.0, 1.0], ElasticityTensor.scalar(1.0))

    @given(seeds, dims, st.floats(-5, 5))
    def test_degree_two_homogeneity(self, seed, dim, s):
        rng = np.random.default_rng(seed)
        fld = random_field(rng, ElasticityTensor.random(dim, rng))
        assert field_sq_norm(fld * s) == pytest.approx(s * s * field_sq_norm(fld), rel=1e-12,
                                                       abs=1e-300)

    @given(seeds, dims)
    def test_triangle_inequality(self, seed, dim):
        rng = np.random.default_rng(seed)
        C = ElasticityTensor.random(dim, rng)
        a, b, c = (random_field(rng, C, scale=10 ** rng.uniform(-3, 3)) for _ in range(3))
        lhs = field_norm(a - c)
        assert lhs <= (field_norm(a - b) + field_norm(b - c)) * (1 + 1e-12)

    @given(seeds, dims)
    def test_parallelogram_law(self, seed, dim):
        rng = np.random.default_rng(seed)
        C = ElasticityTensor.random(dim, rng)
        a, b = random_field(rng, C), random_field(rng, C)
        lhs = field_sq_norm(a + b) + field_sq_norm(a - b)
        rhs = 2 * field_sq_norm(a) + 2 * field_sq_norm(b)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @given(seeds, dims)
    def test_norm_equivalence(self, seed, dim):
        rng = np.random.default_rng(seed)
        C = ElasticityTensor.random(dim, rng, spread=3.0)
        c1, c2 = norm_equivalence_constants(C)
        fld = random_field(rng, C)
        l2 = np.sqrt(fld.weights @ (np.sum(fld.eps ** 2, 1) + np.sum(fld.sig ** 2, 1)))
        n = field_norm(fld)
        assert c1 * l2 * (1 - 1e-12) <= n <= c2 * l2 * (1 + 1e-12)
