"""Moment-method null control of the linearized systems.

The adjoint spectra are shifted into the right half plane via
``Lambda_k = -lambda_{k-1} + 1`` (CH, cosine/sine blocks decoupled by the
profile hypotheses) and ``Lambda_k = -lambda_{sigma(k)} + 1`` (KS, with the
integer bijection sigma). Biorthogonal families are built by solving the
Gram system of the exponential family in extended precision (mpmath): the
Gram matrix of clustered complex exponentials is severely ill-conditioned,
and the Gram solution is the minimum-norm biorthogonal family in the
spanned subspace. Controls are assembled as exponential sums and verified
through the quadrature path of ``flow_linearized``; a finite-dimensional
controllability-Gramian oracle cross-validates every instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import mpmath as mp
import numpy as np

from .dynamics import ControlProfileSet, LinearModel, flow_linearized, linear_symbol
from .errors import CertificateFailed, IllConditioned, SingularGramian
from .field import FourierField, pairing_cos, pairing_exp, pairing_sin, sobolev_norm
from .numerics import graded_gauss

__all__ = [
    "ExpSpectrum",
    "BiorthFamily",
    "MomentControl",
    "OracleControl",
    "build_spectrum",
    "biorthogonal_family",
    "moment_control_CH",
    "moment_control_KS",
    "gramian_oracle",
    "sigma_ks",
    "sigma_inv_ks",
]


def sigma_ks(m: int) -> int:
    """Bijection N* -> Z: m/2 for even m, (1-m)/2 for odd m."""
    if m < 1:
        raise ValueError("sigma is defined on positive integers")
    return m // 2 if m % 2 == 0 else (1 - m) // 2


def sigma_inv_ks(j: int) -> int:
    return 2 * j if j >= 1 else 1 - 2 * j


def ch_eigenvalue(k: int, phi: float) -> float:
    return -float(k) ** 4 + (1.0 - 3.0 * phi * phi) * float(k) ** 2


def ks_eigenvalue(k: int, phi: float) -> complex:
    """Adjoint eigenvalue on e^{ikx}: -k^4 + k^2 + i k Phi."""
    return complex(-float(k) ** 4 + float(k) ** 2, float(k) * phi)


@dataclass(frozen=True)
class ExpSpectrum:
    """Ordered shifted family Lambda_1..Lambda_count with H1-H3 certificates."""

    model: LinearModel | None
    phi: float
    values: tuple[complex, ...]
    theta: float
    kappa: float
    rho_required: float
    rho_observed: float

    @property
    def count(self) -> int:
        return len(self.values)

    def certificates(self) -> dict:
        return {
            "theta": self.theta,
            "kappa": self.kappa,
            "rho_required": self.rho_required,
            "rho_observed": self.rho_observed,
        }


def _certify(values: list[complex], rho_required: float,
             model, phi: float) -> ExpSpectrum:
    vals = [complex(v) for v in values]
    # H1: sector condition Re > 0, |Im| < sinh(theta) Re
    for v in vals:
        if v.real <= 0:
            raise CertificateFailed(f"Re Lambda = {v.real} is not positive")
    ratio = max((abs(v.imag) / v.real for v in vals), default=0.0)
    theta = math.asinh(ratio) + 1e-2
    # H2: counting function N(r) <= kappa r^{1/4}
    mags = sorted(abs(v) for v in vals)
    kappa = max((i + 1) / m ** 0.25 for i, m in enumerate(mags))
    # H3: gap
    gap = math.inf
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            gap = min(gap, abs(vals[i] - vals[j]))
    if len(vals) >= 2 and gap < rho_required * (1.0 - 1e-12):
        raise CertificateFailed(
            f"pairwise gap {gap:.6g} below required rho {rho_required:.6g}")
    return ExpSpectrum(model, phi, tuple(vals), theta, kappa,
                       rho_required, gap if len(vals) >= 2 else math.inf)


def build_spectrum(model: LinearModel, phi: float, count: int) -> ExpSpectrum:
    """Phi may be negative (linearization around a negative constant); the
    gap certificates use |Phi|."""
    if phi == 0:
        raise ValueError("Phi must be nonzero")
    if count < 2:
        raise ValueError("count must be at least 2")
    if model is LinearModel.CH_LIN:
        vals = [-ch_eigenvalue(k - 1, phi) + 1.0 for k in range(1, count + 1)]
        return _certify(vals, 3.0 * phi * phi, model, phi)
    if model is LinearModel.KS_LIN:
        vals = [-ks_eigenvalue(sigma_ks(k), phi) + 1.0 for k in range(1, count + 1)]
        return _certify(vals, abs(phi), model, phi)
    raise ValueError(model)


def spectrum_from_values(values, rho_required: float = 1e-8) -> ExpSpectrum:
    """Ad-hoc ordered family (used by oracle tests and custom runs)."""
    return _certify([complex(v) for v in values], rho_required, None, 0.0)


# -- biorthogonal family -------------------------------------------------------

def _mpc(z: complex) -> mp.mpc:
    return mp.mpc(z.real, z.imag)


def _gram_entry(li: mp.mpc, lj: mp.mpc, T: mp.mpf) -> mp.mpc:
    z = li + mp.conj(lj)
    return (1 - mp.e ** (-z * T)) / z


@dataclass
class BiorthFamily:
    """e_k(t) = sum_j C[k, j] e^{-conj(Lambda_j) t} with Gram-certified defect."""

    spectrum: ExpSpectrum
    T: float
    coeffs: list          # mpmath matrix rows (list of lists of mp.mpc)
    defect: float
    norms: list[float]
    precision_bits: int

    @property
    def count(self) -> int:
        return self.spectrum.count

    def evaluate(self, k: int, times) -> np.ndarray:
        """e_k at the given times (computed in extended precision)."""
        lam = [_mpc(v) for v in self.spectrum.values]
        row = self.coeffs[k]
        out = np.empty(len(times), dtype=np.complex128)
        for i, t in enumerate(times):
            tt = mp.mpf(float(t))
            acc = mp.mpc(0)
            for c, lv in zip(row, lam):
                acc += c * mp.e ** (-mp.conj(lv) * tt)
            out[i] = complex(acc)
        return out


def biorthogonal_family(spectrum: ExpSpectrum, T: float, *,
                        precision_bits: int = 384, defect_tol: float = 1e-8,
                        check_defect: bool = True) -> BiorthFamily:
    """Solve the Gram system G c_k = unit_k in extended precision.

    G_ij = integral_0^T e^{-(Lambda_i + conj(Lambda_j)) t} dt is Hermitian
    positive definite; the solution rows give the minimum-norm biorthogonal
    family. The defect max_kj |int e_k e^{-Lambda_j} - delta_kj| is measured
    by composite graded Gauss quadrature (independent of the closed form).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    n = spectrum.count
    with mp.workprec(precision_bits):
        lam = [_mpc(v) for v in spectrum.values]
        Tm = mp.mpf(T)
        G = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                G[i, j] = _gram_entry(lam[i], lam[j], Tm)
        try:
            Ginv = G ** -1
        except ZeroDivisionError as exc:
            raise IllConditioned(f"Gram solve failed: {exc}") from exc
        # G c_k = unit_k, so c_k is the k-th column of G^{-1}
        C = [[Ginv[j, k] for j in range(n)] for k in range(n)]
        norms = [float(mp.sqrt(mp.re(C[k][k]))) for k in range(n)]

        defect = 0.0
        if check_defect:
            max_rate = max(v.real for v in spectrum.values) + 1.0
            rule = graded_gauss(T, max_rate, steep_end="start")
            basis = [[mp.e ** (-mp.conj(lv) * mp.mpf(float(t))) for t in rule.nodes]
                     for lv in lam]
            w = [mp.mpf(float(x)) for x in rule.weights]
            for k in range(n):
                ek = [sum(C[k][m] * basis[m][i] for m in range(n))
                      for i in range(len(w))]
                for j in range(n):
                    acc = mp.mpc(0)
                    for i in range(len(w)):
                        acc += w[i] * ek[i] * mp.conj(basis[j][i])
                    target = 1 if j == k else 0
                    defect = max(defect, float(abs(acc - target)))
            if defect > defect_tol:
                raise IllConditioned(
                    f"biorthogonality defect {defect:.3e} above {defect_tol:.1e}; "
                    "truncation too large for this horizon")
    return BiorthFamily(spectrum, T, C, defect, norms, precision_bits)


# -- exponential-sum signals ---------------------------------------------------

class ExpSumSignal:
    """h(t) = sum_m coef_m e^{-rate_m t}, optionally evaluated time-reversed.

    The stored descriptor always has Re(rate) >= 0 (decaying), so a
    complex128 fast path is safe; it is enabled only after spot checks
    against the extended-precision evaluation agree. ``reverse_T`` makes
    calls evaluate h(T - t) without rewriting the descriptor into a
    float-unrepresentable coefficient/rate split.
    """

    def __init__(self, coefs, rates, precision_bits: int = 384,
                 reverse_T: float | None = None):
        self.coefs = list(coefs)    # mp.mpc
        self.rates = list(rates)    # mp.mpc
        self.precision_bits = precision_bits
        self.reverse_T = reverse_T
        self._fast = None           # (coef array, rate array) or False

    def _sample_mp(self, times) -> np.ndarray:
        out = np.empty(len(times), dtype=np.complex128)
        with mp.workprec(self.precision_bits):
            for i, t in enumerate(times):
                tt = mp.mpf(float(t))
                acc = mp.mpc(0)
                for c, r in zip(self.coefs, self.rates):
                    acc += c * mp.e ** (-r * tt)
                out[i] = complex(acc)
        return out

    def _ensure_fast(self, t_max: float):
        if self._fast is not None:
            return
        try:
            cf = np.array([complex(c) for c in self.coefs], dtype=np.complex128)
            rt = np.array([complex(r) for r in self.rates], dtype=np.complex128)
        except (OverflowError, ValueError):
            self._fast = False
            return
        if not (np.all(np.isfinite(cf)) and np.all(np.isfinite(rt))):
            self._fast = False
            return
        probe = np.linspace(0.0, max(t_max, 1e-6), 9)
        ref = self._sample_mp(probe)
        with np.errstate(over="ignore", invalid="ignore"):
            got = (cf[None, :] * np.exp(-np.outer(probe, rt))).sum(axis=1)
        scale = max(float(np.max(np.abs(ref))), 1e-300)
        if np.all(np.isfinite(got)) and float(np.max(np.abs(got - ref))) < 1e-9 * scale:
            self._fast = (cf, rt)
        else:
            self._fast = False

    def _forward_times(self, times: np.ndarray) -> np.ndarray:
        if self.reverse_T is None:
            return times
        return self.reverse_T - times

    def sample(self, times) -> np.ndarray:
        times = self._forward_times(np.asarray(times, dtype=np.float64))
        if len(times):
            self._ensure_fast(float(np.max(np.abs(times))))
        if self._fast:
            cf, rt = self._fast
            return (cf[None, :] * np.exp(-np.outer(times, rt))).sum(axis=1)
        return self._sample_mp(times)

    def __call__(self, t: float) -> float:
        t = float(t) if self.reverse_T is None else self.reverse_T - float(t)
        self._ensure_fast(abs(t))
        if self._fast:
            cf, rt = self._fast
            return float((cf * np.exp(-rt * t)).sum().real)
        return float(self._sample_mp([t]).real[0])

    def l2_norm(self, T: float) -> float:
        """Closed-form L2(0, T) norm (reversal does not change it)."""
        with mp.workprec(self.precision_bits):
            acc = mp.mpc(0)
            Tm = mp.mpf(T)
            for ci, ri in zip(self.coefs, self.rates):
                for cj, rj in zip(self.coefs, self.rates):
                    z = ri + mp.conj(rj)
                    if abs(z) < mp.mpf("1e-40"):
                        acc += ci * mp.conj(cj) * Tm
                    else:
                        acc += ci * mp.conj(cj) * (1 - mp.e ** (-z * Tm)) / z
            return float(mp.sqrt(abs(mp.re(acc))))

    def max_imag_on(self, times) -> float:
        vals = self.sample(times)
        scale = max(float(np.max(np.abs(vals))), 1e-300)
        return float(np.max(np.abs(vals.imag))) / scale

    def reversed_on(self, T: float) -> "ExpSumSignal":
        """View of h(T - t) sharing the decaying forward descriptor."""
        return ExpSumSignal(self.coefs, self.rates, self.precision_bits,
                            reverse_T=float(T))


@dataclass
class MomentControl:
    """Moment-method control signals and their verification report."""

    model: LinearModel
    T: float
    count: int
    h_signals: list            # ExpSumSignal per channel (h_i(t))
    p_signals: list            # time-reversed: p_i(t) = h_i(T - t)
    l2_norms: list[float]
    family_defect: float
    terminal_residual: float = math.nan     # controlled modes, relative
    tail_residual: float = math.nan         # uncontrolled tail, relative
    max_imag: float = 0.0
    certificates: dict = dfield(default_factory=dict)

    @property
    def total_l2_norm(self) -> float:
        return float(sum(self.l2_norms))

    def p_callable(self, samples: int = 2048):
        """Fast vectorized-sampled controls for re-simulation loops.

        The exponential sums are sampled once in extended precision on a
        grid graded toward t = 0 steepness (i.e. sigma = T) and evaluated
        by monotone linear interpolation afterwards.
        """
        rate = max(abs(complex(r)) for s in self.p_signals for r in s.rates)
        rule = graded_gauss(self.T, rate, steep_end="end",
                            nodes_per_panel=8)
        ts = np.concatenate([[0.0], rule.nodes, [self.T]])
        tables = [np.concatenate([[s.sample([0.0]).real[0]],
                                  s.sample(rule.nodes).real,
                                  [s.sample([self.T]).real[0]]])
                  for s in self.p_signals]

        def p_of_t(t: float) -> np.ndarray:
            return np.array([np.interp(t, ts, tab) for tab in tables])

        return p_of_t


# -- moment controls -----------------------------------------------------------

def _verify_linear_null(v0: FourierField, control_fn, phi: float,
                        model: LinearModel, profiles: ControlProfileSet,
                        T: float, controlled_modes: int,
                        quad_rate: float) -> tuple[float, float]:
    """(controlled-mode residual, tail residual), both relative to ||v0||."""
    vT = flow_linearized(v0, control_fn, phi, model, T, profiles=profiles,
                         quad_rate=quad_rate)
    K = v0.K
    idx = np.arange(-K, K + 1)
    controlled = np.abs(idx) <= controlled_modes - 1
    denom = max(sobolev_norm(v0, 0.0), 1e-300)
    res_c = float(np.sqrt(np.sum(np.abs(vT.coeffs[controlled]) ** 2))) / denom
    res_t = float(np.sqrt(np.sum(np.abs(vT.coeffs[~controlled]) ** 2))) / denom
    return res_c, res_t


def moment_control_CH(v0: FourierField, phi: float, profiles: ControlProfileSet,
                      T: float, count: int, *, precision_bits: int = 384,
                      defect_tol: float = 1e-8, verify: bool = True) -> MomentControl:
    """Null control (h4, h5) for the CH linearization via decoupled moments.

    h4 handles the cosine modes k = 0..count-1 through mu4, h5 the sine
    modes k = 1..count-1 through mu5; both ride on the same shifted family.
    """
    cert = profiles.ch_certificate(count)
    spec = build_spectrum(LinearModel.CH_LIN, phi, count)
    fam = biorthogonal_family(spec, T, precision_bits=precision_bits,
                              defect_tol=defect_tol)
    mu4, mu5 = profiles.profiles[3], profiles.profiles[4]
    with mp.workprec(precision_bits):
        Tm = mp.mpf(T)
        # moment right-hand sides
        m4, m5 = [], []
        for k in range(count):
            lam_k = mp.mpf(ch_eigenvalue(k, phi))
            num = mp.e ** (lam_k * Tm) * mp.mpf(pairing_cos(v0, k))
            den = mp.mpf(phi) * mp.mpf(pairing_cos(mu4, k))
            m4.append(-num / den)
        for k in range(1, count):
            lam_k = mp.mpf(ch_eigenvalue(k, phi))
            num = mp.e ** (lam_k * Tm) * mp.mpf(pairing_sin(v0, k))
            den = mp.mpf(phi) * mp.mpf(pairing_sin(mu5, k))
            m5.append(-num / den)
        lam = [_mpc(v) for v in spec.values]
        rates = [mp.conj(lv) + 1 for lv in lam]
        D4 = [sum(m4[k] * fam.coeffs[k][m] for k in range(count))
              for m in range(count)]
        D5 = [sum(m5[k - 1] * fam.coeffs[k][m] for k in range(1, count))
              for m in range(count)]
    h4 = ExpSumSignal(D4, rates, precision_bits)
    h5 = ExpSumSignal(D5, rates, precision_bits)
    p4 = h4.reversed_on(T)
    p5 = h5.reversed_on(T)
    ctrl = MomentControl(
        model=LinearModel.CH_LIN, T=T, count=count,
        h_signals=[h4, h5], p_signals=[p4, p5],
        l2_norms=[h4.l2_norm(T), h5.l2_norm(T)],
        family_defect=fam.defect,
        certificates={**cert, **spec.certificates()},
    )
    probe = np.linspace(0.0, T, 64)
    ctrl.max_imag = max(h4.max_imag_on(probe) if any(abs(c) > 0 for c in D4) else 0.0,
                        h5.max_imag_on(probe) if any(abs(c) > 0 for c in D5) else 0.0)
    if verify:
        a = linear_symbol(LinearModel.CH_LIN, phi, v0.K)
        rate = max(float(np.max(np.abs(a.real))),
                   max(v.real for v in spec.values)) + 1.0

        def control_fn(t: float):
            return (p4(t), p5(t))

        ctrl.terminal_residual, ctrl.tail_residual = _verify_linear_null(
            v0, control_fn, phi, LinearModel.CH_LIN, profiles, T,
            controlled_modes=count, quad_rate=rate)
    return ctrl


def moment_control_KS(v0: FourierField, phi: float, profiles: ControlProfileSet,
                      T: float, count: int, *, precision_bits: int = 384,
                      defect_tol: float = 1e-8, verify: bool = True) -> MomentControl:
    """Single real control h for the KS linearization over the sigma-indexed family."""
    js = [sigma_ks(m) for m in range(1, count + 1)]
    cert = profiles.ks_certificate(max(abs(j) for j in js))
    spec = build_spectrum(LinearModel.KS_LIN, phi, count)
    fam = biorthogonal_family(spec, T, precision_bits=precision_bits,
                              defect_tol=defect_tol)
    mu4 = profiles.profiles[3]
    with mp.workprec(precision_bits):
        Tm = mp.mpf(T)
        lam = [_mpc(v) for v in spec.values]
        rates = [mp.conj(lv) + 1 for lv in lam]
        D = [mp.mpc(0) for _ in range(count)]
        for m_idx, j in enumerate(js):
            lam_j = _mpc(ks_eigenvalue(j, phi))
            pv = _mpc(pairing_exp(v0, j))
            pm = _mpc(pairing_exp(mu4, j))
            mj = -(mp.e ** (lam_j * Tm)) * pv / (mp.mpf(phi) * pm)
            # psi_j = e^{-t} e_{sigma^{-1}(j)}; family row is m_idx (same order)
            for m in range(count):
                D[m] += mj * fam.coeffs[m_idx][m]
    h = ExpSumSignal(D, rates, precision_bits)
    p = h.reversed_on(T)
    ctrl = MomentControl(
        model=LinearModel.KS_LIN, T=T, count=count,
        h_signals=[h], p_signals=[p],
        l2_norms=[h.l2_norm(T)],
        family_defect=fam.defect,
        certificates={**cert, **spec.certificates()},
    )
    probe = np.linspace(0.0, T, 64)
    ctrl.max_imag = h.max_imag_on(probe)
    if verify:
        a = linear_symbol(LinearModel.KS_LIN, phi, v0.K)
        rate = max(float(np.max(np.abs(a.real))),
                   max(v.real for v in spec.values)) + 1.0
        controlled = max(abs(j) for j in js) + 1

        def control_fn(t: float):
            return (p(t),)

        ctrl.terminal_residual, ctrl.tail_residual = _verify_linear_null(
            v0, control_fn, phi, LinearModel.KS_LIN, profiles, T,
            controlled_modes=controlled, quad_rate=rate)
    return ctrl


# -- controllability-Gramian oracle ---------------------------------------------

@dataclass
class OracleControl:
    """Minimum-L2-norm control of the truncated diagonal system."""

    model: LinearModel
    T: float
    p_signals: list
    l2_norms: list[float]
    terminal_residual: float
    gramian_condition: float

    @property
    def total_l2_norm(self) -> float:
        return float(sum(self.l2_norms))


def _exp_integral(z, T):
    """integral_0^T e^{z s} ds, stable for any z; preserves real/complex type."""
    if abs(z) < mp.mpf("1e-30"):
        return T + z * 0
    return (mp.e ** (z * T) - 1) / z


def _single_input_gramian(rates, b, T):
    """Controllability Gramian of a real diagonal single-input block."""
    n = len(rates)
    W = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            W[i, j] = b[i] * b[j] * _exp_integral(rates[i] + rates[j], T)
    return W


def gramian_oracle(model: LinearModel, phi: float, profiles: ControlProfileSet,
                   v0: FourierField, T: float, count: int, *,
                   precision_bits: int = 384, verify: bool = True) -> OracleControl:
    """Cross-validation oracle: exact minimum-norm control from the Gramian."""
    with mp.workprec(precision_bits):
        Tm = mp.mpf(T)
        if model is LinearModel.CH_LIN:
            mu4, mu5 = profiles.profiles[3], profiles.profiles[4]
            blocks = []
            # cosine block (controlled by p4) and sine block (p5)
            for which, mu, ks in (("cos", mu4, range(count)),
                                  ("sin", mu5, range(1, count))):
                pair = pairing_cos if which == "cos" else pairing_sin
                rates = [mp.mpf(ch_eigenvalue(k, phi)) for k in ks]
                b = [mp.mpf(phi) * mp.mpf(pair(mu, k)) for k in ks]
                x0 = [mp.mpf(pair(v0, k)) for k in ks]
                if any(abs(bi) < mp.mpf("1e-200") for bi in b):
                    raise SingularGramian(f"vanishing pairing in {which} block")
                W = _single_input_gramian(rates, b, Tm)
                target = mp.matrix([[-(mp.e ** (r * Tm)) * x] for r, x in zip(rates, x0)])
                try:
                    eta = mp.lu_solve(W, target)
                except ZeroDivisionError as exc:
                    raise SingularGramian(str(exc)) from exc
                norm2 = sum(eta[i] * W[i, j] * eta[j]
                            for i in range(len(b)) for j in range(len(b)))
                blocks.append((rates, b, eta, norm2))
            signals = []
            norms = []
            for rates, b, eta, norm2 in blocks:
                # p(s) = sum_i b_i eta_i e^{r_i (T-s)}: decaying forward
                # descriptor in tau = T - s, evaluated time-reversed
                coefs = [b[i] * eta[i] for i in range(len(b))]
                sig_rates = [-rates[i] for i in range(len(b))]
                signals.append(ExpSumSignal(coefs, sig_rates, precision_bits,
                                            reverse_T=float(T)))
                norms.append(float(mp.sqrt(abs(mp.mpf(norm2)))))
            controlled = count
        elif model is LinearModel.KS_LIN:
            mu4 = profiles.profiles[3]
            js = sorted({sigma_ks(m) for m in range(1, count + 1)})
            pos = [j for j in js if j > 0]
            # realified state: [v_0, Re v_j, Im v_j ...] with forward symbols
            a0 = _mpc(complex(ks_eigenvalue(0, phi).conjugate()))
            avals = [a0] + [_mpc(complex(ks_eigenvalue(j, phi)).conjugate())
                            for j in pos]
            # b entries: control feeds mode j with Phi * mu4_hat(j)
            def mu_hat(j):
                return _mpc(pairing_exp(mu4, -j)) / mp.sqrt(2 * mp.pi)
            bvals = [mp.mpf(phi) * mu_hat(0)] + [mp.mpf(phi) * mu_hat(j) for j in pos]
            x0c = [_mpc(complex(v0.coeff(0)))] + [_mpc(complex(v0.coeff(j))) for j in pos]
            n_real = 1 + 2 * len(pos)
            W = mp.matrix(n_real, n_real)

            def idx_of(block, part):  # block 0 = mode 0; blocks 1.. = pairs
                return 0 if block == 0 else 1 + 2 * (block - 1) + part

            nb = len(pos) + 1
            for bi in range(nb):
                for bj in range(nb):
                    M1 = bvals[bi] * mp.conj(bvals[bj]) * _exp_integral(
                        avals[bi] + mp.conj(avals[bj]), Tm)
                    M2 = bvals[bi] * bvals[bj] * _exp_integral(
                        avals[bi] + avals[bj], Tm)
                    rr = mp.re(M1 + M2) / 2
                    ri = (mp.im(M2) - mp.im(M1)) / 2      # Re_i * Im_j
                    ir = (mp.im(M2) + mp.im(M1)) / 2      # Im_i * Re_j
                    ii = mp.re(M1 - M2) / 2
                    W[idx_of(bi, 0), idx_of(bj, 0)] = rr
                    if bj > 0:
                        W[idx_of(bi, 0), idx_of(bj, 1)] = ri
                    if bi > 0:
                        W[idx_of(bi, 1), idx_of(bj, 0)] = ir
                    if bi > 0 and bj > 0:
                        W[idx_of(bi, 1), idx_of(bj, 1)] = ii
            target = mp.matrix(n_real, 1)
            for bi in range(nb):
                z = -(mp.e ** (avals[bi] * Tm)) * x0c[bi]
                target[idx_of(bi, 0), 0] = mp.re(z)
                if bi > 0:
                    target[idx_of(bi, 1), 0] = mp.im(z)
            try:
                eta = mp.lu_solve(W, target)
            except ZeroDivisionError as exc:
                raise SingularGramian(str(exc)) from exc
            norm2 = sum(eta[i] * W[i, j] * eta[j]
                        for i in range(n_real) for j in range(n_real))
            # p(s) = b0 e^{a0 (T-s)} eta_0 + sum_j Re(conj(b_j) e^{conj(a_j)(T-s)} eta~_j);
            # Re z = (z + conj z)/2 gives a decaying descriptor in tau = T - s
            coefs, sig_rates = [], []
            for bi in range(nb):
                et = eta[idx_of(bi, 0)] + (1j * eta[idx_of(bi, 1)] if bi > 0 else 0)
                et = mp.mpc(et)
                w = mp.conj(bvals[bi]) * et
                r = mp.conj(avals[bi])
                scale = mp.mpf(1) if bi == 0 else mp.mpf("0.5")
                coefs.append(scale * w)
                sig_rates.append(-r)
                if bi > 0:
                    coefs.append(scale * mp.conj(w))
                    sig_rates.append(-mp.conj(r))
            signals = [ExpSumSignal(coefs, sig_rates, precision_bits,
                                    reverse_T=float(T))]
            norms = [float(mp.sqrt(abs(mp.re(mp.mpc(norm2)))))]
            controlled = max(pos) + 1 if pos else 1
        else:
            raise ValueError(model)

        cond = 0.0  # reported via norms of W and its inverse when cheap
    # the Gramian construction already yields the forward-time control p(s)
    residual = math.nan
    if verify:
        K = v0.K
        a = linear_symbol(model, phi, K)
        rate = float(np.max(np.abs(a.real))) + 1.0
        if model is LinearModel.CH_LIN:
            def control_fn(t: float):
                return (signals[0](t), signals[1](t))
        else:
            def control_fn(t: float):
                return (signals[0](t),)
        residual, _ = _verify_linear_null(v0, control_fn, phi, model, profiles,
                                          T, controlled_modes=controlled,
                                          quad_rate=rate)
    return OracleControl(model=model, T=T, p_signals=signals,
                         l2_norms=norms, terminal_residual=residual,
                         gramian_condition=cond)
