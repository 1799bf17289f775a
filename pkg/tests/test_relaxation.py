import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddelastic.datasets import FlagDataSet1D, TwoWellDataSet
from ddelastic.mesh import bar, rect_crossed
from ddelastic.phase import LocalState
from ddelastic.relaxation import (FlagMembership, Membership, TwoWellRelaxation, alpha_hat,
                                  alpha_range, boundary_polyline, c_hat, convex_envelope_1d,
                                  flag_membership_many, generate_laminate_field, in_strip_U,
                                  laminate_mean_error, membership_flag_1d, membership_relaxed_nd,
                                  rank_one_decompose, reduced_1d_two_well_solve,
                                  sample_relaxed_interior, sample_relaxed_set, sample_strip_U,
                                  separating_certificate, to_states)
from ddelastic.tensors import ElasticityTensor, SymMatrix, matrix_to_strain_voigt

seeds = st.integers(0, 2**31 - 1)
I2 = ElasticityTensor.identity(2)
FROZEN_FIXED_STRESS_D2 = 0.123724356957945  # multistart L-BFGS-B on the unreduced problem


def alpha_oracle(C, b, nus):
    """min_c C(c(.)nu - b).(c(.)nu - b) by weighted normal equations, batched over nus."""
    nus = np.atleast_2d(nus)
    n, dim = nus.shape
    eye = np.eye(dim)
    outer = 0.5 * (eye[None, :, :, None] * nus[:, None, None, :]
                   + nus[:, None, :, None] * eye[None, :, None, :])  # (n, k, i, j)
    A = np.swapaxes(matrix_to_strain_voigt(outer), 1, 2)  # (n, m, k)
    bv = b.strain_voigt()
    M = np.einsum("nmk,mp,npl->nkl", A, C.voigt, A)
    r = np.einsum("nmk,mp,p->nk", A, C.voigt, bv)
    c = np.linalg.solve(M, r[..., None])[..., 0]
    res = np.einsum("nmk,nk->nm", A, c) - bv
    return np.einsum("nm,mp,np->n", res, C.voigt, res)


def random_case(seed, dim=None):
    rng = np.random.default_rng(seed)
    dim = dim or int(rng.integers(2, 4))
    C = ElasticityTensor.random(dim, rng)
    b = rng.normal(size=(dim, dim))
    return rng, C, SymMatrix.from_matrix(b + b.T)


def unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


class TestCHat:
    def test_zero_b(self):
        assert np.allclose(c_hat(I2, SymMatrix.zeros(2), [1.0, 0.0]), 0.0)

    def test_hand_solution(self):
        b = SymMatrix.diag(1.5, -0.7)
        c = c_hat(I2, b, [1.0, 0.0])
        assert np.allclose(c, [1.5, 0.0])
        sig_hat = np.outer(c, [1.0, 0.0]) - b.to_matrix()
        assert np.allclose(sig_hat, np.diag([0.0, 0.7])) and np.allclose(sig_hat @ [1, 0], 0)
        assert alpha_hat(I2, b, [1.0, 0.0]) == pytest.approx(0.49)
        assert alpha_hat(I2, b, [0.0, 1.0]) == pytest.approx(2.25)

    @given(seeds)
    def test_optimality(self, seed):
        rng, C, b = random_case(seed)
        nu = unit(rng, C.dim)
        a = alpha_hat(C, b, nu)
        ch = c_hat(C, b, nu)
        for _ in range(20):
            c = ch + rng.normal(size=C.dim) * 10 ** rng.uniform(-3, 1)
            e = SymMatrix.from_matrix(0.5 * (np.outer(c, nu) + np.outer(nu, c))) - b
            ev = e.strain_voigt()
            assert a < ev @ C.apply(ev)
        assert a == pytest.approx(alpha_oracle(C, b, nu)[0], rel=1e-9, abs=1e-12)

    @given(seeds)
    def test_stress_dot_b_identity(self, seed):
        rng, C, b = random_case(seed)
        nu = unit(rng, C.dim)
        c = c_hat(C, b, nu)
        e = SymMatrix.from_matrix(0.5 * (np.outer(c, nu) + np.outer(nu, c))) - b
        s = SymMatrix.from_stress_voigt(C.apply(e.strain_voigt()))
        assert s.dot(b) == pytest.approx(-alpha_hat(C, b, nu), rel=1e-10, abs=1e-12)
        # acoustic equation: traction of the stress vanishes on nu
        assert np.abs(s.to_matrix() @ nu).max() <= 1e-10 * (1 + s.norm())


class TestAlphaRange:
    def test_incompatible_example(self):
        am, ap, nu_m, _ = alpha_range(I2, SymMatrix.diag(1.0, 2.0))
        assert am == pytest.approx(1.0, abs=1e-8) and ap == pytest.approx(4.0, abs=1e-6)
        assert abs(nu_m[1]) == pytest.approx(1.0, abs=1e-6)

    def test_sweep_oracle_2d(self):
        # independent oracle: 1e-4 angle resolution over half the circle
        th = np.arange(0.0, np.pi, 1e-4)
        vals = alpha_oracle(I2, SymMatrix.diag(1.0, 2.0), np.column_stack([np.cos(th), np.sin(th)]))
        assert vals.min() == pytest.approx(1.0, abs=1e-6)
        assert vals.max() == pytest.approx(4.0, abs=1e-6)

    def test_compatible(self):
        am, _, _, _ = alpha_range(I2, SymMatrix.diag(1.0, -1.0))
        assert am <= 1e-10
        assert TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 0.0)).compatible

    def test_isotropic_b(self):
        am, ap, _, _ = alpha_range(I2, SymMatrix.diag(1.0, 1.0))
        assert am == pytest.approx(1.0, abs=1e-8) and ap == pytest.approx(1.0, abs=1e-8)

    def test_zero_b(self):
        with pytest.raises(ValueError):
            alpha_range(I2, SymMatrix.zeros(2))

    @given(seeds)
    @settings(max_examples=8)
    def test_against_direction_sampling(self, seed):
        rng, C, b = random_case(seed)
        am, ap, nu_m, nu_p = alpha_range(C, b)
        probe = rng.normal(size=(3000, C.dim))
        vals = alpha_oracle(C, b, probe / np.linalg.norm(probe, axis=1, keepdims=True))
        scale = max(1.0, vals.max())
        assert am <= vals.min() + 1e-12 * scale and ap >= vals.max() - 1e-12 * scale
        assert am == pytest.approx(alpha_oracle(C, b, nu_m)[0], abs=1e-10 * scale)
        assert ap == pytest.approx(alpha_oracle(C, b, nu_p)[0], abs=1e-10 * scale)

    @given(seeds)
    @settings(max_examples=12)
    def test_record_invariants_and_certificate(self, seed):
        rng, C, b = random_case(seed)
        rx = TwoWellRelaxation.compute(C, b)
        assert 0 <= rx.alpha_minus <= rx.alpha_plus and rx.alpha_minus < rx.cbb
        zh = rx.z_hat
        s = zh.sig.to_matrix()
        scale = 1 + zh.sig.norm()
        # extremality: the stress annihilates both nu and c at the minimizer
        assert np.abs(s @ rx.nu_minus).max() <= 1e-8 * scale
        assert np.abs(s @ rx.c_hat_minus).max() <= 1e-8 * scale * (1 + np.linalg.norm(rx.c_hat_minus))

    @given(seeds, st.floats(0.1, 10.0))
    @settings(max_examples=10)
    def test_scaling_covariance(self, seed, s):
        _, C, b = random_case(seed)
        a1 = alpha_range(C, b)[0]
        a2 = alpha_range(C, b * s)[0]
        assert a2 == pytest.approx(s * s * a1, rel=1e-8, abs=1e-10 * s * s * (1 + a1))


class TestFlagMembership:
    flag = FlagDataSet1D(1.0, 1.0)

    @pytest.mark.parametrize("z, expected", [
        ((-3.0, -2.0), FlagMembership.ON_ORIGINAL_SET),
        ((0.0, 0.0), FlagMembership.IN_RELAXED_SET),
        ((0.0, 1.5), FlagMembership.OUTSIDE),
        ((5.0, 4.0), FlagMembership.ON_ORIGINAL_SET),
        ((0.0, 1.0), FlagMembership.ON_ORIGINAL_SET),
        ((1.0, 1.0 + 1e-12), FlagMembership.IN_RELAXED_SET),
    ])
    def test_examples(self, z, expected):
        assert membership_flag_1d(self.flag, *z) is expected

    def test_negative_tol(self):
        with pytest.raises(ValueError):
            membership_flag_1d(self.flag, 0.0, 0.0, tol=-1.0)

    def test_boundary_points_inside(self):
        t = np.linspace(0, 1, 11)
        eps = np.concatenate([-2 + 2 * t, 2 * t, 2 - 2 * t, -2 * t])
        sig = np.concatenate([-1 + 2 * t, 1 + 0 * t, 1 - 2 * t, -1 + 0 * t])
        assert np.all(flag_membership_many(1.0, 1.0, eps, sig) < 2)


class TestRelaxedMembership:
    rx = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 2.0))

    def test_examples(self):
        sig = SymMatrix.diag(0.3, -0.4)
        plus = LocalState(sig + self.rx.b, sig)
        assert membership_relaxed_nd(self.rx, plus) is Membership.IN_DLOC_PLUS
        assert membership_relaxed_nd(self.rx, LocalState.zeros(2)) is Membership.IN_RELAXED_INTERIOR
        out = LocalState(SymMatrix.diag(4.5, 0.0), SymMatrix.diag(4.5, 0.0))
        assert membership_relaxed_nd(self.rx, out) is Membership.OUTSIDE

    def test_off_plane_is_outside(self):
        z = LocalState(SymMatrix.from_matrix([[0, 0.1], [0.1, 0]]), SymMatrix.zeros(2))
        assert membership_relaxed_nd(self.rx, z) is Membership.OUTSIDE

    @given(seeds)
    @settings(max_examples=15)
    def test_sign_symmetry(self, seed):
        rng, C, b = random_case(seed)
        rx = TwoWellRelaxation.compute(C, b)
        for z in to_states(*sample_relaxed_set(rx, rng, 30)):
            got, neg = membership_relaxed_nd(rx, z), membership_relaxed_nd(rx, -z)
            assert (got is Membership.IN_DLOC_PLUS) == (neg is Membership.IN_DLOC_MINUS)
            assert got is not Membership.OUTSIDE

    @given(seeds)
    @settings(max_examples=15)
    def test_translation_reduction(self, seed):
        rng, C, a = random_case(seed, dim=2)
        b = SymMatrix.diag(*rng.normal(size=2))
        ds = TwoWellDataSet(C, a, b, rng.normal())
        rx, shift = TwoWellRelaxation.from_dataset(ds)
        e, s = rng.normal(size=(40, 3)) * 3, rng.normal(size=(40, 3)) * 3
        ye, ys, _, labels = ds.nearest_many(e, s)
        for k in range(40):
            z = LocalState.from_voigt(ye[k], ys[k]) - shift
            expected = Membership.IN_DLOC_PLUS if labels[k] == 1 else Membership.IN_DLOC_MINUS
            assert membership_relaxed_nd(rx, z, tol=1e-8) is expected


class TestRankOne:
    def test_compatible_hand_case(self):
        rx = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 0.0))
        dec = rank_one_decompose(rx, LocalState.zeros(2))
        assert dec.lam == pytest.approx(0.5)
        assert np.allclose(dec.z_hat.eps.to_matrix(), np.diag([1.0, 0.0]))
        assert np.allclose(dec.z_hat.sig.to_matrix(), 0.0, atol=1e-12)
        assert np.allclose(dec.z_plus.eps.to_matrix(), np.diag([1.0, 0.0]))
        assert np.allclose(dec.z_minus.eps.to_matrix(), np.diag([-1.0, 0.0]))

    def test_limit_mu_to_one(self):
        rx = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 2.0))
        mu = 1 - 1e-6
        z = LocalState(rx.b * mu, SymMatrix.zeros(2))
        dec = rank_one_decompose(rx, z)
        # lam is the z_minus fraction, so z_plus carries almost all the volume
        assert dec.lam == pytest.approx(0.5e-6)
        d = dec.z_plus - z
        assert max(np.abs(d.eps.entries).max(), np.abs(d.sig.entries).max()) < 1e-5

    def test_origin_incompatible(self):
        rx = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 2.0))
        dec = rank_one_decompose(rx, LocalState.zeros(2))
        assert max(dec.residuals()) < 1e-10
        assert membership_relaxed_nd(rx, dec.z_plus) is Membership.IN_DLOC_PLUS
        assert membership_relaxed_nd(rx, dec.z_minus) is Membership.IN_DLOC_MINUS

    def test_outside_rejected(self):
        rx = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 2.0))
        with pytest.raises(ValueError):
            rank_one_decompose(rx, LocalState(SymMatrix.diag(4.5, 0), SymMatrix.diag(4.5, 0)))

    @given(seeds)
    @settings(max_examples=15)
    def test_random_interior(self, seed):
        rng, C, b = random_case(seed)
        rx = TwoWellRelaxation.compute(C, b)
        for z in to_states(*sample_relaxed_interior(rx, rng, 5)):
            dec = rank_one_decompose(rx, z)
            assert max(dec.residuals()) < 1e-8 and 0 < dec.lam < 1
            assert membership_relaxed_nd(rx, dec.z_plus) is Membership.IN_DLOC_PLUS
            assert membership_relaxed_nd(rx, dec.z_minus) is Membership.IN_DLOC_MINUS


class TestLaminateField:
    def test_half_fraction(self):
        rx = TwoWellRelaxation.compute(ElasticityTensor.scalar(1.0), SymMatrix.diag(1.0))
        dec = rank_one_decompose(rx, LocalState.scalar(0.0, 0.0))
        fld = generate_laminate_field(bar(1.0, 10), dec, 1)
        assert np.sum(fld.eps[:, 0] < 0) == 5

    def test_decay_and_membership_2d(self):
        rx = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 0.0))
        # mu = 0.5 gives lam = 1/4, resolved by 64 cells at every h below
        z = LocalState(SymMatrix.diag(0.5, 0.3), SymMatrix.diag(0.0, 0.3))
        dec = rank_one_decompose(rx, z)
        mesh = rect_crossed(1.0, 0.25, 64, 2)
        errs = [laminate_mean_error(mesh, generate_laminate_field(mesh, dec, h), z, dec.nu)
                for h in (4, 8, 16)]
        assert all(b <= 0.6 * a for a, b in zip(errs, errs[1:]))
        fld = generate_laminate_field(mesh, dec, 8)
        assert all(membership_relaxed_nd(rx, s) in (Membership.IN_DLOC_PLUS,
                                                    Membership.IN_DLOC_MINUS) for s in fld.states)
        minus_vol = mesh.volumes[fld.eps[:, 0] < 0].sum() / mesh.volumes.sum()
        assert minus_vol == pytest.approx(dec.lam, abs=1 / 64)

    def test_bad_h(self):
        rx = TwoWellRelaxation.compute(ElasticityTensor.scalar(1.0), SymMatrix.diag(1.0))
        dec = rank_one_decompose(rx, LocalState.scalar(0.0, 0.0))
        with pytest.raises(ValueError):
            generate_laminate_field(bar(1.0, 4), dec, 0)
        with pytest.raises(ValueError):
            generate_laminate_field(rect_crossed(1, 1, 1, 1), dec, 1)


class TestSeparatingCertificate:
    rx = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 2.0))

    def test_hand_example(self):
        s0 = SymMatrix.diag(4.5, 0.0)
        cert = separating_certificate(self.rx, s0, s0)
        assert cert.delta == pytest.approx(0.125)
        assert cert(LocalState(s0, s0)) == pytest.approx(0.125)

    def test_value_on_plus_well(self, rng):
        s0 = SymMatrix.diag(4.5, 0.0)
        cert = separating_certificate(self.rx, s0, s0)
        e, s = sample_relaxed_set(self.rx, rng, 300)
        sb, mu, _ = self.rx.coordinates_many(e, s)
        plus = np.isclose(mu, 1.0)
        sb_star = cert.z_star.sig.dot(self.rx.b)
        assert np.allclose(cert.evaluate_many(e[plus], s[plus]), -(sb[plus] - sb_star) ** 2)

    def test_not_in_strip(self):
        with pytest.raises(ValueError):
            separating_certificate(self.rx, SymMatrix.zeros(2), SymMatrix.zeros(2))

    @given(seeds)
    @settings(max_examples=10)
    def test_separates(self, seed):
        rng, C, b = random_case(seed)
        rx = TwoWellRelaxation.compute(C, b)
        E, S = sample_relaxed_set(rx, rng, 2000)
        for z0 in to_states(*sample_strip_U(rx, rng, 3)):
            assert in_strip_U(rx, z0)
            cert = separating_certificate(rx, z0.eps, z0.sig)
            assert cert(z0) > 0
            assert cert.evaluate_many(E, S).max() <= 1e-10 * (1 + rx.cbb) ** 2


class TestReduced1D:
    def test_outer_branch(self):
        r = reduced_1d_two_well_solve(1.0, 1.0, 5.0)
        assert r.d2_min == pytest.approx(0.0, abs=1e-14) and r.sigma_bar == pytest.approx(4.0)

    def test_origin(self):
        assert reduced_1d_two_well_solve(1.0, 1.0, 0.0).d2_min == pytest.approx(0.0, abs=1e-14)

    def test_fixed_stress_frozen_oracle(self):
        r = reduced_1d_two_well_solve(1.0, 1.0, 0.0, sigma_bar=1.5)
        assert r.d2_min == pytest.approx(FROZEN_FIXED_STRESS_D2, rel=1e-9)

    def test_mean_constraint(self):
        r = reduced_1d_two_well_solve(2.0, 0.5, np.array([-1.0, 0.2, 3.0]), sigma_bar=0.7)
        mean = r.lambda_a * r.eps_a + (1 - r.lambda_a) * r.eps_b
        assert np.allclose(mean, [-1.0, 0.2, 3.0])

    def test_zero_set_matches_flag(self):
        g = np.linspace(-4, 4, 41)
        E, S = np.meshgrid(g, g, indexing="ij")
        r = reduced_1d_two_well_solve(1.0, 1.0, E.ravel(), sigma_bar=S.ravel())
        inside = flag_membership_many(1.0, 1.0, E.ravel(), S.ravel()) < 2
        assert np.array_equal(r.d2_min <= 1e-9, inside)

    def test_brute_force_oracle(self, rng):
        # independent oracle: dense grid over (lam, eA) with inner projections onto the rays
        def ray_d2(e, s, sign):
            # distance to {(p, p - sign)} with sign * p >= 0, metric C = 1
            p = np.maximum(sign * (e + s + sign) / 2, 0) * sign
            return 0.5 * (e - p) ** 2 + 0.5 * (s - (p - sign)) ** 2
        lam = np.linspace(1e-4, 1 - 1e-4, 2001)[:, None]
        for eb, sb in rng.uniform(-3, 3, size=(5, 2)):
            eA = np.linspace(-8, 8, 1601)[None]
            eB = (eb - lam * eA) / (1 - lam)
            brute = (lam * ray_d2(eA, sb, 1.0) + (1 - lam) * ray_d2(eB, sb, -1.0)).min()
            got = reduced_1d_two_well_solve(1.0, 1.0, eb, sigma_bar=sb).d2_min
            assert got <= brute + 1e-12 and got == pytest.approx(brute, abs=1e-3)

    def test_invalid(self):
        with pytest.raises(ValueError):
            reduced_1d_two_well_solve(0.0, 1.0, 0.0)


class TestConvexEnvelope:
    def test_values(self):
        env = convex_envelope_1d(2.0, 3.0)
        assert env.W_envelope(0.0) == 0.0
        assert env.W_envelope(2 * 3.0 / 2.0) == pytest.approx(3.0 ** 2 / (2 * 2.0))
        assert np.all(env.W_envelope(np.linspace(-5, 5, 101)) <= env.W(np.linspace(-5, 5, 101)))

    def test_witness(self):
        env = convex_envelope_1d(1.0, 1.0)
        e, s = env.witness()
        assert flag_membership_many(1.0, 1.0, e, s) < 2 and not env.in_envelope_set(e, s)

    def test_envelope_convex(self):
        env = convex_envelope_1d(1.5, 0.4)
        x = np.linspace(-3, 3, 601)
        assert np.all(np.diff(env.W_envelope(x), 2) >= -1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            convex_envelope_1d(-1.0, 1.0)


def test_boundary_polyline_vertices():
    rx = TwoWellRelaxation.compute(I2, SymMatrix.diag(1.0, 2.0))
    pieces = dict(boundary_polyline(rx))
    assert set(pieces) == {"plus", "minus", "right", "left"}
    # band edges satisfy |sb + alpha_minus mu| = Cb.b - alpha_minus at both ends
    for name in ("right", "left"):
        sb, mu = pieces[name].T
        assert np.allclose(np.abs(sb + rx.alpha_minus * mu), rx.cbb - rx.alpha_minus)
