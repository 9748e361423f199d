import math

import mpmath as mp
import numpy as np
import pytest

from torusctrl import field as F
from torusctrl.dynamics import (
    ControlProfileSet,
    LinearModel,
    poly_bump_mu4,
    poly_bump_mu5,
)
from torusctrl.errors import CertificateFailed, SingularGramian
from torusctrl.moment import (
    biorthogonal_family,
    build_spectrum,
    ch_eigenvalue,
    gramian_oracle,
    ks_eigenvalue,
    moment_control_CH,
    moment_control_KS,
    sigma_inv_ks,
    sigma_ks,
    spectrum_from_values,
)
from torusctrl.numerics import graded_gauss

K = 32


def std_profiles(k=K):
    return ControlProfileSet.standard(k, poly_bump_mu4(k), poly_bump_mu5(k))


def v0_mix(k=K):
    # c0 + 0.5 c1 + 0.3 s2 in the orthonormal basis
    return (F.constant(1.0 / math.sqrt(2 * math.pi), k)
            + F.harmonic(1, cos_amp=0.5 / math.sqrt(math.pi), K=k)
            + F.harmonic(2, sin_amp=0.3 / math.sqrt(math.pi), K=k))


class TestSpectra:
    def test_ch_shift_example(self):
        # lambda_1 = -1 + (1-3) = -3, so Lambda_2 = 4
        spec = build_spectrum(LinearModel.CH_LIN, 1.0, 4)
        assert spec.values[0] == pytest.approx(1.0)
        assert spec.values[1] == pytest.approx(4.0)

    def test_ks_sigma_and_shift_example(self):
        assert sigma_ks(3) == -1 and sigma_ks(2) == 1 and sigma_ks(1) == 0
        assert sigma_inv_ks(-1) == 3 and sigma_inv_ks(2) == 4
        spec = build_spectrum(LinearModel.KS_LIN, 2.0, 5)
        # Lambda_3 = -lambda_{-1} + 1 = 1 + 2i
        assert spec.values[2] == pytest.approx(1.0 + 2.0j)

    def test_ch_gap_certificate(self):
        spec = build_spectrum(LinearModel.CH_LIN, 1.0, 10)
        assert spec.rho_required == pytest.approx(3.0)
        gaps = [abs(a - b) for i, a in enumerate(spec.values)
                for b in spec.values[i + 1:]]
        assert min(gaps) >= 3.0 - 1e-12

    def test_ks_gap_certificate(self):
        spec = build_spectrum(LinearModel.KS_LIN, 1.0, 9)
        assert spec.rho_observed >= spec.rho_required - 1e-12

    def test_certificate_failure_detected(self):
        with pytest.raises(CertificateFailed):
            spectrum_from_values([1.0, 1.0 + 1e-15])

    def test_sector_and_counting(self):
        for model, phi in ((LinearModel.CH_LIN, 1.0), (LinearModel.KS_LIN, 2.0)):
            spec = build_spectrum(model, phi, 8)
            s = math.sinh(spec.theta)
            assert all(abs(v.imag) < s * v.real + 1e-12 for v in spec.values)
            mags = sorted(abs(v) for v in spec.values)
            assert all(i + 1 <= spec.kappa * m ** 0.25 + 1e-9
                       for i, m in enumerate(mags))


class TestBiorthogonal:
    def test_one_by_one_closed_form(self):
        spec = spectrum_from_values([1.0])
        fam = biorthogonal_family(spec, 1.0)
        # e_1 = e^{-t} / int_0^1 e^{-2t} dt
        expect = 2.0 / (1.0 - math.exp(-2.0))
        assert complex(fam.coeffs[0][0]) == pytest.approx(expect, rel=1e-12)
        assert fam.defect < 1e-12

    def test_two_by_two_closed_form(self):
        spec = spectrum_from_values([1.0, 2.0])
        fam = biorthogonal_family(spec, 1.0)
        g11 = (1 - math.exp(-2.0)) / 2.0
        g12 = (1 - math.exp(-3.0)) / 3.0
        g22 = (1 - math.exp(-4.0)) / 4.0
        det = g11 * g22 - g12 * g12
        expect = [[g22 / det, -g12 / det], [-g12 / det, g11 / det]]
        for k in range(2):
            for m in range(2):
                assert complex(fam.coeffs[k][m]) == pytest.approx(
                    expect[k][m], rel=1e-12)
        assert fam.defect < 1e-12

    def test_ch_family_defect_small(self):
        spec = build_spectrum(LinearModel.CH_LIN, 1.0, 10)
        fam = biorthogonal_family(spec, 0.5)
        assert fam.defect < 1e-8

    def test_ks_family_defect_small(self):
        spec = build_spectrum(LinearModel.KS_LIN, 1.0, 9)
        fam = biorthogonal_family(spec, 0.5)
        assert fam.defect < 1e-8

    def test_norm_growth_shape(self):
        # ||e_k|| grows with k but stays finite; logged against e^{C sqrt(Lambda)}
        spec = build_spectrum(LinearModel.CH_LIN, 1.0, 8)
        fam = biorthogonal_family(spec, 0.5)
        assert all(n > 0 and math.isfinite(n) for n in fam.norms)


class TestPairings:
    def test_poly_bump_pairings_closed_form(self):
        # mu4 = x^2 (x-2pi)^2 sampled on a grid; pairings -24 sqrt(2pi)/k^4
        M = 4096
        x = 2 * math.pi * np.arange(M) / M
        vals = x ** 2 * (x - 2 * math.pi) ** 2
        mu4 = F.FourierField.from_grid(vals, K=16)
        for k in range(1, 9):
            expect = -24.0 * math.sqrt(2 * math.pi) / k ** 4
            assert abs(F.pairing_exp(mu4, k) - expect) < 1e-8
        assert F.pairing_exp(mu4, 0).real > 0

    def test_constructed_profile_agrees_with_grid(self):
        mu4 = poly_bump_mu4(16)
        M = 4096
        x = 2 * math.pi * np.arange(M) / M
        vals = x ** 2 * (x - 2 * math.pi) ** 2
        grid_mu4 = F.FourierField.from_grid(vals, K=16)
        assert np.max(np.abs(mu4.coeffs - grid_mu4.coeffs)) < 1e-7


class TestMomentControlCH:
    def test_zero_initial_state(self):
        ctrl = moment_control_CH(F.constant(0.0, K), 1.0, std_profiles(),
                                 0.5, 6)
        assert ctrl.total_l2_norm < 1e-30
        assert ctrl.terminal_residual == 0.0 or math.isnan(ctrl.terminal_residual) is False

    def test_constant_initial_state(self):
        v0 = F.constant(1.0 / math.sqrt(2 * math.pi), K)
        ctrl = moment_control_CH(v0, 1.0, std_profiles(), 0.5, 8)
        assert ctrl.l2_norms[1] < 1e-25          # no sine content -> h5 = 0
        assert ctrl.l2_norms[0] > 0
        assert ctrl.terminal_residual < 1e-6

    def test_moment_identity_replay(self):
        v0 = v0_mix()
        phi, T, count = 1.0, 0.5, 8
        prof = std_profiles()
        ctrl = moment_control_CH(v0, phi, prof, T, count)
        h4 = ctrl.h_signals[0]
        rule = graded_gauss(T, 2.0 * max(abs(complex(r)) for r in h4.rates),
                            steep_end="start", nodes_per_panel=16)
        hv = h4.sample(rule.nodes).real
        mu4 = prof.profiles[3]
        for k in range(count):
            lam = ch_eigenvalue(k, phi)
            got = float(np.sum(rule.weights * hv * np.exp(lam * rule.nodes)))
            expect = -math.exp(lam * T) * F.pairing_cos(v0, k) / (
                phi * F.pairing_cos(mu4, k))
            assert got == pytest.approx(expect, rel=1e-6, abs=1e-12)

    def test_mixed_instance_residual(self):
        ctrl = moment_control_CH(v0_mix(), 1.0, std_profiles(), 0.5, 8)
        assert ctrl.terminal_residual < 1e-3
        assert ctrl.max_imag < 1e-12


class TestMomentControlKS:
    def test_zero_initial_state(self):
        ctrl = moment_control_KS(F.constant(0.0, K), 1.0, std_profiles(), 0.5, 9)
        assert ctrl.total_l2_norm < 1e-30

    def test_cos_instance(self):
        v0 = F.harmonic(1, cos_amp=0.1, K=K)
        ctrl = moment_control_KS(v0, 1.0, std_profiles(), 0.5, 9)
        assert ctrl.max_imag < 1e-12
        assert ctrl.terminal_residual < 1e-5

    def test_moment_identity_replay(self):
        v0 = F.harmonic(1, cos_amp=0.1, K=K)
        phi, T, count = 1.0, 0.5, 9
        prof = std_profiles()
        ctrl = moment_control_KS(v0, phi, prof, T, count)
        h = ctrl.h_signals[0]
        rule = graded_gauss(T, 2.0 * max(abs(complex(r)) for r in h.rates),
                            steep_end="start", nodes_per_panel=16)
        hv = h.sample(rule.nodes)
        mu4 = prof.profiles[3]
        expects = {}
        for m in range(1, count + 1):
            j = sigma_ks(m)
            lam = ks_eigenvalue(j, phi)
            expects[j] = (lam, -np.exp(lam * T) * F.pairing_exp(v0, j) / (
                phi * F.pairing_exp(mu4, j)))
        mmax = max(abs(e) for _, e in expects.values())
        for j, (lam, expect) in expects.items():
            kern = np.exp(lam * rule.nodes)
            got = complex(np.sum(rule.weights * hv * kern))
            # relative per mode, with an absolute floor for zero moments
            assert abs(got - expect) < 1e-6 * max(abs(expect), 1e-3 * mmax)


class TestGramianOracle:
    def test_zero_initial(self):
        orc = gramian_oracle(LinearModel.CH_LIN, 1.0, std_profiles(),
                             F.constant(0.0, K), 0.5, 4)
        assert orc.total_l2_norm < 1e-30

    def test_ch_small_instance(self):
        v0 = (F.constant(1.0 / math.sqrt(2 * math.pi), K)
              + F.harmonic(1, cos_amp=0.5 / math.sqrt(math.pi), K=K))
        orc = gramian_oracle(LinearModel.CH_LIN, 1.0, std_profiles(), v0, 0.5, 4)
        assert orc.terminal_residual < 1e-10
        ctrl = moment_control_CH(v0, 1.0, std_profiles(), 0.5, 4)
        assert ctrl.terminal_residual < 10 * max(orc.terminal_residual, 1e-12)
        assert orc.total_l2_norm <= ctrl.total_l2_norm * (1 + 1e-9) + 1e-12

    def test_ks_instance(self):
        v0 = F.harmonic(1, cos_amp=0.1, K=K)
        orc = gramian_oracle(LinearModel.KS_LIN, 1.0, std_profiles(), v0, 0.5, 9)
        assert orc.terminal_residual < 1e-8
        ctrl = moment_control_KS(v0, 1.0, std_profiles(), 0.5, 9)
        assert orc.total_l2_norm <= ctrl.total_l2_norm * (1 + 1e-9) + 1e-12

    def test_singular_when_pairing_vanishes(self):
        # mu4 with a zero cosine pairing at k=2
        c = poly_bump_mu4(K).coeffs.copy()
        c[K + 2] = 0.0
        c[K - 2] = 0.0
        mu4 = F.FourierField(c, _symmetrize=False)
        prof = ControlProfileSet.standard(K, mu4, poly_bump_mu5(K))
        with pytest.raises(SingularGramian):
            gramian_oracle(LinearModel.CH_LIN, 1.0, prof,
                           F.constant(1.0, K), 0.5, 4)


class TestCostLaw:
    def test_ch_cost_increases_as_horizon_shrinks(self):
        prof = std_profiles()
        v0 = v0_mix()
        norms = [moment_control_CH(v0, 1.0, prof, T, 8, verify=False).total_l2_norm
                 for T in (0.5, 0.35, 0.2)]
        assert norms[0] < norms[1] < norms[2]


class TestEnvelope:
    @pytest.mark.parametrize("model,phi", [(LinearModel.CH_LIN, 1.0),
                                           (LinearModel.KS_LIN, 1.0)])
    def test_defect_envelope_boundary(self, model, phi):
        # the stated envelope: defect < 1e-8 for count <= 12, T >= 0.2
        fam = biorthogonal_family(build_spectrum(model, phi, 12), 0.2)
        assert fam.defect < 1e-8
