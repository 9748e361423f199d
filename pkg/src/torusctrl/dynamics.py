"""Controlled time integration of the fourth-order parabolic models.

The full equation is ``u_t + u_xxxx + u_xx + N(u) = <p(t), mu> u`` with
``N`` the Kuramoto-Sivashinsky (`u u_x`) or Cahn-Hilliard (`-(u^3)_xx`)
nonlinearity. The linear part is propagated exactly in Fourier space; the
nonlinear + bilinear remainder is handled by an embedded explicit
Dormand-Prince pair on the integrating-factor transformed system, with
adaptive substeps and a norm-growth guard.

Linearized-around-constant variants (used by the moment method) are
diagonal in Fourier space and integrated by exact variation of constants.
Sign conventions: the forward linearized symbol at mode k is
``-k^4 + (1 - 3 Phi^2) k^2`` (CH) and ``-k^4 + k^2 - i k Phi`` (KS); the
adjoint carries ``+ i k Phi``, matching the spectrum module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .errors import BlowupDetected, HypothesisViolated
from .field import FourierField, constant, harmonic
from .numerics import graded_gauss, phi1
from .schedule import ControlSchedule

__all__ = [
    "Nonlinearity",
    "ControlProfileSet",
    "SolveReport",
    "flow",
    "flow_fixed_reference",
    "flow_linearized",
    "linear_symbol",
    "stability_probe",
    "concatenate",
]

# re-export for callers that think of concatenation as a dynamics operation
from .schedule import concatenate  # noqa: E402,F401


class Nonlinearity(enum.Enum):
    KS = "ks"
    CH = "ch"


# -- raw-array spectral helpers (hot path) -----------------------------------

def _padded(M: int) -> int:
    return ((M + 15) // 16) * 16


def _to_grid(c: np.ndarray, K: int, M: int) -> np.ndarray:
    hat = np.zeros(M, dtype=np.complex128)
    hat[: K + 1] = c[K:]
    hat[M - K:] = c[:K]
    return np.fft.ifft(hat).real * M


def _from_grid(vals: np.ndarray, K: int) -> np.ndarray:
    M = vals.size
    hat = np.fft.fft(vals) / M
    c = np.empty(2 * K + 1, dtype=np.complex128)
    c[K:] = hat[: K + 1]
    c[:K] = hat[M - K:]
    return c


def _symmetrize(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + c[::-1].conj())


@dataclass(frozen=True)
class ControlProfileSet:
    """Spatial control profiles mu_1..mu_m; the first three are fixed modes."""

    profiles: tuple[FourierField, ...]

    def __post_init__(self):
        if not 3 <= len(self.profiles) <= 5:
            raise ValueError("profile count m must be 3, 4 or 5")

    @property
    def m(self) -> int:
        return len(self.profiles)

    @property
    def K(self) -> int:
        return self.profiles[0].K

    @staticmethod
    def standard(K: int, mu4: FourierField | None = None,
                 mu5: FourierField | None = None) -> "ControlProfileSet":
        base = [constant(1.0, K), harmonic(1, cos_amp=1.0, K=K), harmonic(1, sin_amp=1.0, K=K)]
        if mu4 is not None:
            base.append(mu4.with_truncation(K))
        if mu5 is not None:
            if mu4 is None:
                raise ValueError("mu5 requires mu4")
            base.append(mu5.with_truncation(K))
        return ControlProfileSet(tuple(base))

    # -- hypothesis certificates ------------------------------------------

    def ch_certificate(self, count: int, theta1: float = 2.0, theta2: float = 1.5,
                       zero_tol: float = 1e-12) -> dict:
        """Check the cosine/sine filtering hypothesis for the CH moment method."""
        from .field import pairing_cos, pairing_sin
        if self.m != 5:
            raise HypothesisViolated("CH exact control needs 5 profiles")
        mu4, mu5 = self.profiles[3], self.profiles[4]
        if abs(pairing_cos(mu4, 0)) <= zero_tol:
            raise HypothesisViolated("<mu4, c0> must be nonzero")
        if abs(pairing_cos(mu5, 0)) > zero_tol:
            raise HypothesisViolated("<mu5, c0> must vanish")
        c1 = math.inf
        c2 = math.inf
        for k in range(1, count):
            if abs(pairing_sin(mu4, k)) > zero_tol:
                raise HypothesisViolated(f"<mu4, s_{k}> must vanish")
            if abs(pairing_cos(mu5, k)) > zero_tol:
                raise HypothesisViolated(f"<mu5, c_{k}> must vanish")
            pc = abs(pairing_cos(mu4, k))
            ps = abs(pairing_sin(mu5, k))
            if pc <= zero_tol or ps <= zero_tol:
                raise HypothesisViolated(f"mode {k} pairing vanishes")
            c1 = min(c1, (k * k) ** theta1 * pc)
            c2 = min(c2, (k * k) ** theta2 * ps)
        return {"theta1": theta1, "C1": c1, "theta2": theta2, "C2": c2}

    def ks_certificate(self, mode_range: int, theta: float = 2.0,
                       zero_tol: float = 1e-12) -> dict:
        from .field import pairing_exp
        if self.m < 4:
            raise HypothesisViolated("KS exact control needs 4 profiles")
        mu4 = self.profiles[3]
        cmin = math.inf
        for k in range(-mode_range, mode_range + 1):
            p = abs(pairing_exp(mu4, k))
            if p <= zero_tol:
                raise HypothesisViolated(f"<mu4, e^{{i{k}x}}> vanishes")
            cmin = min(cmin, ((k * k) ** theta + 1.0) * p)
        return {"theta": theta, "C": cmin}


def poly_bump_mu4(K: int) -> FourierField:
    """The x^2 (x - 2 pi)^2 profile, built from its exact Fourier coefficients."""
    c = np.zeros(2 * K + 1, dtype=np.complex128)
    c[K] = 8.0 * math.pi ** 4 / 15.0
    for k in range(1, K + 1):
        c[K + k] = -24.0 / k ** 4
        c[K - k] = -24.0 / k ** 4
    return FourierField(c, _symmetrize=False)


def poly_bump_mu5(K: int) -> FourierField:
    """Odd companion profile: the derivative of poly_bump_mu4 (sine modes only)."""
    from .field import derivative
    return derivative(poly_bump_mu4(K), 1)


@dataclass
class SolveReport:
    samples: list = dfield(default_factory=list)  # (t, FourierField)
    sup_norm: float = 0.0
    norm_index: float = 0.0
    steps_accepted: int = 0
    steps_rejected: int = 0
    min_step: float = math.inf
    blowup_flag: bool = False
    blowup_time: float | None = None


# -- nonlinear flow ----------------------------------------------------------

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


class _NonlinearRHS:
    """G(u, t) = -N(u) + Q(t) u in Fourier coordinates."""

    def __init__(self, K: int, nl: Nonlinearity, profiles: ControlProfileSet,
                 control_fn):
        self.K = K
        self.nl = nl
        self.control_fn = control_fn  # t -> vector p (len m) or None
        self.k = np.arange(-K, K + 1).astype(np.float64)
        self.M2 = _padded(4 * K + 2)   # quadratic products
        self.M3 = _padded(6 * K + 2)   # cubic products
        self.ik = 1j * self.k
        self.msq = self.k ** 2
        self.mu_grids = [_to_grid(p.with_truncation(K).coeffs, K, self.M2)
                         for p in profiles.profiles]

    def __call__(self, c: np.ndarray, t: float) -> np.ndarray:
        K = self.K
        if self.nl is Nonlinearity.KS:
            u_vals = _to_grid(c, K, self.M2)
            ux_vals = _to_grid(self.ik * c, K, self.M2)
            out = -_from_grid(u_vals * ux_vals, K)
        else:
            vals = _to_grid(c, K, self.M3)
            cube_c = _from_grid(vals ** 3, K)
            out = -self.msq * cube_c  # -N_CH = +d^2/dx^2 (u^3)
            u_vals = None
        p = self.control_fn(t) if self.control_fn is not None else None
        if p is not None:
            q_vals = np.zeros(self.M2)
            for pi, mg in zip(p, self.mu_grids):
                if pi != 0.0:
                    q_vals += pi * mg
            if u_vals is None:
                u_vals = _to_grid(c, K, self.M2)
            out = out + _from_grid(q_vals * u_vals, K)
        return out


def _schedule_control_fn(control, m: int):
    """Normalize the control argument into (fn(t) -> vector | None, boundaries).

    Accepts None, a ControlSchedule, a callable, or a (callable, boundaries)
    pair; boundaries become forced step cuts so no step straddles a control
    discontinuity.
    """
    if control is None:
        return None, []
    if isinstance(control, ControlSchedule):
        if not control.segments:
            return None, []
        sched = control.padded_to(m) if control.dim < m else control
        if sched.dim > m:
            raise ValueError(f"control dimension {sched.dim} exceeds profile count {m}")
        return sched.value_at, sched.boundaries()
    if isinstance(control, tuple) and len(control) == 2 and callable(control[0]):
        return control[0], sorted(float(b) for b in control[1])
    if callable(control):
        return control, []
    raise TypeError("control must be a ControlSchedule, callable, or None")


def flow(u0: FourierField, control, nl: Nonlinearity, t: float,
         s: float = 1.0, *, profiles: ControlProfileSet | None = None,
         rtol: float = 1e-10, atol: float = 1e-13, guard: float = 1e8,
         max_step: float | None = None, sample_count: int = 0,
         raise_on_blowup: bool = True) -> tuple[FourierField, SolveReport]:
    """Solve the controlled PDE from u0 over [0, t]; returns (u(t), report)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    K = u0.K
    profiles = profiles or ControlProfileSet.standard(K)
    control_fn, boundaries = _schedule_control_fn(control, profiles.m)
    if isinstance(control, ControlSchedule) and control.segments \
            and t > control.total_duration + 1e-12:
        raise ValueError("t exceeds the schedule duration")

    kk = np.arange(-K, K + 1).astype(np.float64)
    ell = -(kk ** 4 - kk ** 2)  # linear symbol of -(d^4 + d^2)
    sob_w = (1.0 + kk ** 2) ** s
    rhs = _NonlinearRHS(K, nl, profiles, control_fn)

    report = SolveReport(norm_index=s)
    c = u0.coeffs.copy()
    report.sup_norm = math.sqrt(float(np.sum(sob_w * np.abs(c) ** 2)))
    sample_ts = list(np.linspace(0.0, t, sample_count)) if sample_count >= 2 else []
    if sample_ts:
        report.samples.append((0.0, FourierField(c, u0.N, _symmetrize=False)))
        sample_ts.pop(0)

    # integrate segment by segment so control discontinuities land on step ends
    cuts = sorted({0.0, t, *[b for b in boundaries if 0.0 < b < t]})
    n_stage = 7

    def ctrl_ceiling(tau: float) -> float:
        if control_fn is None:
            return math.inf
        p = control_fn(tau)
        pmax = float(np.max(np.abs(p))) if p is not None else 0.0
        return 0.5 / (1.0 + pmax)

    for seg_start, seg_end in zip(cuts[:-1], cuts[1:]):
        seg_dur = seg_end - seg_start
        t_loc = 0.0   # local segment clock avoids cancellation at boundaries
        h = min(seg_dur, 1e-2, ctrl_ceiling(seg_start + 1e-15))
        if max_step is not None:
            h = min(h, max_step)
        while t_loc < seg_dur * (1.0 - 1e-12):
            t_now = seg_start + t_loc
            h = min(h, seg_dur - t_loc)
            # stage computations with exact linear propagation
            Ks = [None] * n_stage
            Ks[0] = rhs(c, t_now)
            ok = True
            for i in range(1, n_stage):
                acc = np.exp(ell * (_DP_C[i] * h)) * c
                for j, aij in enumerate(_DP_A[i]):
                    if aij != 0.0:
                        acc = acc + (h * aij) * np.exp(ell * ((_DP_C[i] - _DP_C[j]) * h)) * Ks[j]
                if not np.all(np.isfinite(acc)):
                    ok = False
                    break
                Ks[i] = rhs(acc, t_now + _DP_C[i] * h)
            if ok:
                c_new = np.exp(ell * h) * c
                err = np.zeros_like(c)
                for i in range(n_stage):
                    fac = np.exp(ell * ((1.0 - _DP_C[i]) * h))
                    if _DP_B5[i] != 0.0:
                        c_new = c_new + (h * _DP_B5[i]) * fac * Ks[i]
                    db = _DP_B5[i] - _DP_B4[i]
                    if db != 0.0:
                        err = err + (h * db) * fac * Ks[i]
                scale = atol + rtol * max(float(np.linalg.norm(c)),
                                          float(np.linalg.norm(c_new)))
                enorm = float(np.linalg.norm(err)) / scale
            else:
                enorm = math.inf
            if enorm <= 1.0 and np.all(np.isfinite(c_new)):
                t_loc += h
                t_now = seg_start + t_loc
                c = _symmetrize(c_new)
                report.steps_accepted += 1
                report.min_step = min(report.min_step, h)
                norm_s = math.sqrt(float(np.sum(sob_w * np.abs(c) ** 2)))
                report.sup_norm = max(report.sup_norm, norm_s)
                while sample_ts and t_now >= sample_ts[0] - 1e-12:
                    sample_ts.pop(0)
                    report.samples.append((t_now, FourierField(c, u0.N, _symmetrize=False)))
                if norm_s > guard:
                    report.blowup_flag = True
                    report.blowup_time = t_now
                    if raise_on_blowup:
                        raise BlowupDetected(t_now, norm_s, guard)
                    return FourierField(c, u0.N, _symmetrize=False), report
                grow = 0.9 * enorm ** -0.2 if enorm > 0 else 5.0
                h = h * min(5.0, max(0.2, grow))
            else:
                report.steps_rejected += 1
                shrink = 0.9 * enorm ** -0.2 if math.isfinite(enorm) else 0.1
                h = h * max(0.1, min(0.5, shrink))
                if h < 1e-13 * seg_dur:
                    report.blowup_flag = True
                    report.blowup_time = t_now
                    if raise_on_blowup:
                        raise BlowupDetected(
                            t_now, float(np.linalg.norm(c)), guard)
                    return FourierField(c, u0.N, _symmetrize=False), report
            h = min(h, ctrl_ceiling(min(seg_start + t_loc + 1e-15, seg_end - 1e-15)))
            if max_step is not None:
                h = min(h, max_step)

    out = FourierField(c, u0.N, _symmetrize=False)
    if sample_ts or (sample_count >= 2 and (not report.samples
                                            or report.samples[-1][0] < t - 1e-12)):
        report.samples.append((t, out))
    return out, report


def flow_fixed_reference(u0: FourierField, control, nl: Nonlinearity, t: float,
                         n_steps: int, *, profiles: ControlProfileSet | None = None
                         ) -> FourierField:
    """Fixed-step classical RK4 with integrating factor: the reference oracle.

    Deliberately a separate, simpler code path from :func:`flow`; used by
    tests to validate the adaptive integrator by self-convergence.
    """
    K = u0.K
    profiles = profiles or ControlProfileSet.standard(K)
    control_fn, _ = _schedule_control_fn(control, profiles.m)
    kk = np.arange(-K, K + 1).astype(np.float64)
    ell = -(kk ** 4 - kk ** 2)
    rhs = _NonlinearRHS(K, nl, profiles, control_fn)
    h = t / n_steps
    E1 = np.exp(ell * h)
    Eh = np.exp(ell * (0.5 * h))
    c = u0.coeffs.copy()
    for n in range(n_steps):
        tn = n * h
        k1 = rhs(c, tn)
        k2 = rhs(Eh * c + (0.5 * h) * Eh * k1, tn + 0.5 * h)
        k3 = rhs(Eh * c + (0.5 * h) * k2, tn + 0.5 * h)
        k4 = rhs(E1 * c + h * Eh * k3, tn + h)
        c = E1 * c + (h / 6.0) * (E1 * k1 + 2.0 * Eh * (k2 + k3) + k4)
        c = _symmetrize(c)
    return FourierField(c, u0.N, _symmetrize=False)


# -- linearized flow ---------------------------------------------------------

class LinearModel(enum.Enum):
    CH_LIN = "ch_lin"
    KS_LIN = "ks_lin"


def linear_symbol(model: LinearModel, phi: float, K: int) -> np.ndarray:
    """Forward Fourier symbol a_k of the linearization around the constant phi."""
    k = np.arange(-K, K + 1).astype(np.float64)
    if model is LinearModel.CH_LIN:
        return (-(k ** 4) + (1.0 - 3.0 * phi ** 2) * k ** 2).astype(np.complex128)
    if model is LinearModel.KS_LIN:
        return -(k ** 4) + k ** 2 - 1j * k * phi
    raise ValueError(model)


def _linear_b_vectors(profiles: ControlProfileSet, phi: float, K: int,
                      model: LinearModel) -> list[np.ndarray]:
    chans = [3] if model is LinearModel.KS_LIN else [3, 4]
    out = []
    for idx in chans:
        if idx < profiles.m:
            out.append(phi * profiles.profiles[idx].with_truncation(K).coeffs)
    return out


def flow_linearized(v0: FourierField, control, phi: float, model: LinearModel,
                    t: float, *, profiles: ControlProfileSet,
                    source=None, quad_rate: float | None = None,
                    nodes_per_panel: int = 12) -> FourierField:
    """Linearized flow: exact diagonal propagation + variation of constants.

    ``control`` may be None, a ControlSchedule over the quartic channels
    (p4[, p5]), or a callable t -> vector of channel values. Schedules are
    integrated exactly per segment; callables and sources by composite
    graded Gauss quadrature (steep end at t where the kernel peaks).
    """
    if phi == 0:
        raise ValueError("the linearization constant must be nonzero")
    K = v0.K
    a = linear_symbol(model, phi, K)
    b_vecs = _linear_b_vectors(profiles, phi, K, model)
    c = np.exp(a * t) * v0.coeffs

    if isinstance(control, ControlSchedule) and control.segments:
        if control.dim != len(b_vecs):
            raise ValueError("schedule dimension must match the quartic channels")
        elapsed = 0.0
        for dur, val in control.segments:
            if elapsed >= t:
                break
            d = min(dur, t - elapsed)
            g = sum(p * b for p, b in zip(val, b_vecs))
            # contribution propagated from segment end to final time
            seg_term = d * phi1(a * d) * g
            c = c + np.exp(a * (t - (elapsed + d))) * seg_term
            elapsed += d
    elif callable(control):
        rate = quad_rate if quad_rate is not None else float(np.max(np.abs(a.real))) + 1.0
        rule = graded_gauss(t, rate, steep_end="end", nodes_per_panel=nodes_per_panel)
        pvals = np.array([np.atleast_1d(control(float(tau))) for tau in rule.nodes])
        kern = np.exp(np.outer(a, t - rule.nodes))  # (modes, nodes)
        for ch, b in enumerate(b_vecs):
            c = c + b * (kern * (pvals[:, ch] * rule.weights)).sum(axis=1)
    elif control is not None:
        raise TypeError("control must be None, a ControlSchedule, or callable")

    if source is not None:
        rate = quad_rate if quad_rate is not None else float(np.max(np.abs(a.real))) + 1.0
        rule = graded_gauss(t, rate, steep_end="end", nodes_per_panel=nodes_per_panel)
        svals = np.stack([np.asarray(source(float(tau))) for tau in rule.nodes], axis=1)
        kern = np.exp(np.outer(a, t - rule.nodes))
        c = c + (kern * svals * rule.weights).sum(axis=1)

    return FourierField(c, v0.N, _symmetrize=False)


def stability_probe(u0: FourierField, v0: FourierField, control,
                    nl: Nonlinearity, t: float, s: float = 1.0,
                    *, profiles: ControlProfileSet | None = None,
                    rtol: float = 1e-10) -> float:
    """||flow(u0) - flow(v0)||_s / ||u0 - v0||_s for a shared control."""
    from .field import sobolev_norm
    d0 = sobolev_norm(u0 - v0, s)
    if d0 == 0.0:
        raise ValueError("u0 and v0 must differ")
    a, _ = flow(u0, control, nl, t, s, profiles=profiles, rtol=rtol)
    b, _ = flow(v0, control, nl, t, s, profiles=profiles, rtol=rtol)
    return sobolev_norm(a - b, s) / d0
