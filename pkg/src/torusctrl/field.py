"""Truncated Fourier representation of real periodic functions on the torus.

Conventions used throughout the package:

* a field is ``u(x) = sum_{|k| <= K} u_k e^{ikx}`` with ``u_{-k} = conj(u_k)``
  (Hermitian symmetry, so ``u`` is real on the 2*pi-periodic torus);
* ``sobolev_norm(u, s)**2 = sum_k (1 + k^2)^s |u_k|^2``, hence ``s = 0`` equals
  the *normalized* L2 norm ``sqrt(mean_x |u(x)|^2)`` of the grid function;
* integer derivatives multiply mode ``k`` by ``(ik)^order`` so the PDE
  operators carry correct signs; the ``|k|^s`` symbol appears only inside
  norms.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AliasingBudgetExceeded

__all__ = [
    "FourierField",
    "SobolevIndex",
    "constant",
    "harmonic",
    "derivative",
    "product",
    "cube",
    "pointwise_map",
    "apply_exponent",
    "sobolev_norm",
    "write_field_csv",
    "read_field_csv",
]

HERMITIAN_TOL = 1e-12

# Default run configuration: truncation order and grid size.
DEFAULT_K = 64
DEFAULT_N = 256


@dataclass(frozen=True)
class SobolevIndex:
    """Regularity exponent s >= 0; controllability statements need s > 1/2."""

    s: float

    def __post_init__(self):
        if self.s < 0:
            raise ValueError(f"Sobolev index must be nonnegative, got {self.s}")


class FourierField:
    """Immutable truncated Fourier series of a real function on the torus.

    ``coeffs[i]`` holds the coefficient of ``e^{ikx}`` with ``k = i - K``.
    """

    __slots__ = ("coeffs", "K", "N")

    def __init__(self, coeffs, grid_size: int | None = None, *, _symmetrize: bool = True):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim != 1 or coeffs.size % 2 != 1:
            raise ValueError("coeffs must be a 1-d array of odd length 2K+1")
        K = coeffs.size // 2
        if _symmetrize:
            coeffs = 0.5 * (coeffs + coeffs[::-1].conj())
        N = int(grid_size) if grid_size is not None else max(DEFAULT_N, 2 * K + 2)
        if N < 2 * K + 2:
            raise ValueError(f"grid size {N} too small for truncation K={K}")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "N", N)

    def __setattr__(self, name, value):
        raise AttributeError("FourierField is immutable")

    # -- accessors ---------------------------------------------------------

    def coeff(self, k: int) -> complex:
        if abs(k) > self.K:
            return 0.0 + 0.0j
        return complex(self.coeffs[k + self.K])

    @property
    def mean(self) -> float:
        return float(self.coeffs[self.K].real)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - self.coeffs[::-1].conj())))

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_dict(entries: dict[int, complex], K: int = DEFAULT_K,
                  grid_size: int | None = None) -> "FourierField":
        c = np.zeros(2 * K + 1, dtype=np.complex128)
        for k, v in entries.items():
            if abs(k) > K:
                raise ValueError(f"mode {k} outside truncation K={K}")
            c[k + K] += v
            if k != 0:
                c[-k + K] += np.conj(v)
        return FourierField(c, grid_size)

    @staticmethod
    def from_grid(values, K: int = DEFAULT_K, grid_size: int | None = None) -> "FourierField":
        """Band-limit real grid samples (uniform on [0, 2*pi)) to |k| <= K."""
        values = np.asarray(values, dtype=np.float64)
        M = values.size
        if M < 2 * K + 1:
            raise ValueError("grid too coarse for requested truncation")
        hat = np.fft.fft(values) / M
        c = np.empty(2 * K + 1, dtype=np.complex128)
        c[K:] = hat[: K + 1]
        c[:K] = hat[M - K:]
        return FourierField(c, grid_size if grid_size is not None else max(M, 2 * K + 2))

    # -- evaluation --------------------------------------------------------

    def to_grid(self, M: int | None = None) -> np.ndarray:
        """Evaluate on M uniform points x_j = 2*pi*j/M (real values)."""
        M = int(M) if M is not None else self.N
        if M < 2 * self.K + 1:
            raise ValueError("evaluation grid too coarse")
        hat = np.zeros(M, dtype=np.complex128)
        hat[: self.K + 1] = self.coeffs[self.K:]
        hat[M - self.K:] = self.coeffs[: self.K]
        vals = np.fft.ifft(hat) * M
        return vals.real

    def with_truncation(self, K: int, grid_size: int | None = None) -> "FourierField":
        c = np.zeros(2 * K + 1, dtype=np.complex128)
        lo = min(K, self.K)
        c[K - lo: K + lo + 1] = self.coeffs[self.K - lo: self.K + lo + 1]
        return FourierField(c, grid_size if grid_size is not None else self.N, _symmetrize=False)

    # -- arithmetic (linear ops are exact in coefficients) ------------------

    def __add__(self, other):
        if isinstance(other, FourierField):
            K = max(self.K, other.K)
            a = self.with_truncation(K) if self.K < K else self
            b = other.with_truncation(K) if other.K < K else other
            return FourierField(a.coeffs + b.coeffs, max(self.N, other.N), _symmetrize=False)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, FourierField):
            return self + (-1.0) * other
        return NotImplemented

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float)):
            return FourierField(self.coeffs * float(scalar), self.N, _symmetrize=False)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __repr__(self):
        return f"FourierField(K={self.K}, N={self.N}, |u|_0={sobolev_norm(self, 0.0):.6g})"


def constant(c: float, K: int = DEFAULT_K, grid_size: int | None = None) -> FourierField:
    return FourierField.from_dict({0: complex(c)}, K, grid_size)


def harmonic(k: int, cos_amp: float = 0.0, sin_amp: float = 0.0,
             K: int = DEFAULT_K, grid_size: int | None = None) -> FourierField:
    """cos_amp*cos(kx) + sin_amp*sin(kx) as a field."""
    if k == 0:
        return constant(cos_amp, K, grid_size)
    val = 0.5 * cos_amp - 0.5j * sin_amp
    return FourierField.from_dict({k: val}, K, grid_size)


def derivative(f: FourierField, order: int) -> FourierField:
    """Spectral derivative: mode k of the result is (ik)^order * u_k.

    The first-order symbol is applied ``order`` times so that composing
    derivatives is bit-identical to asking for the higher order directly.
    """
    if order < 1 or order > 4:
        raise ValueError("orders 1..4 supported")
    k = np.arange(-f.K, f.K + 1)
    sym = 1j * k
    c = f.coeffs
    for _ in range(order):
        c = c * sym
    return FourierField(c, f.N, _symmetrize=False)


def _padded_grid(K_band: int) -> int:
    """Smallest convenient FFT length resolving a band of size K_band alias-free."""
    M = 2 * K_band + 2
    # round up to the next multiple of 16 for FFT friendliness
    return ((M + 15) // 16) * 16


def product(f: FourierField, g: FourierField) -> FourierField:
    """Dealiased pointwise product, truncated back to max(K_f, K_g).

    Alias-freedom of the retained band needs >= 3K+1 grid points (the 3/2
    rule); the padded grid used here is a hair larger for FFT friendliness.
    """
    K = max(f.K, g.K)
    M = _padded_grid(2 * K)
    vals = f.to_grid(M) * g.to_grid(M)
    return FourierField.from_grid(vals, K, max(f.N, g.N))


def cube(f: FourierField) -> FourierField:
    """Dealiased u^3 (cubic products need >= 4K+1 points)."""
    M = _padded_grid(3 * f.K)
    vals = f.to_grid(M) ** 3
    return FourierField.from_grid(vals, f.K, f.N)


def pointwise_map(f: FourierField, fn, output_truncation: int | None = None,
                  *, oversample: int = 4, aliasing_budget: float = 1e-8) -> FourierField:
    """Apply a scalar map on an oversampled grid and band-limit the result.

    The grid has at least ``oversample * K`` points (minimum 4K per the run
    configuration). The spectral tail discarded above ``output_truncation``
    is measured against the result's L2 mass; exceeding ``aliasing_budget``
    raises :class:`AliasingBudgetExceeded` rather than silently aliasing.
    """
    Kout = output_truncation if output_truncation is not None else f.K
    M = _padded_grid(max(oversample * f.K, 4 * Kout, 32))
    vals = np.asarray(fn(f.to_grid(M)), dtype=np.float64)
    hat = np.fft.fft(vals) / M
    total = float(np.sum(np.abs(hat) ** 2))
    kept = float(np.sum(np.abs(hat[: Kout + 1]) ** 2) + np.sum(np.abs(hat[M - Kout:]) ** 2))
    tail = max(total - kept, 0.0)
    frac = tail / total if total > 0 else 0.0
    if frac > aliasing_budget:
        raise AliasingBudgetExceeded(frac, aliasing_budget)
    c = np.empty(2 * Kout + 1, dtype=np.complex128)
    c[Kout:] = hat[: Kout + 1]
    c[:Kout] = hat[M - Kout:]
    return FourierField(c, max(f.N, 2 * Kout + 2))


def apply_exponent(exponent: FourierField, f: FourierField,
                   output_truncation: int | None = None,
                   *, aliasing_budget: float = 1e-8) -> FourierField:
    """Band-limited e^{exponent(x)} * f(x), evaluated on a shared fine grid."""
    Kout = output_truncation if output_truncation is not None else f.K
    M = _padded_grid(max(4 * exponent.K, 4 * f.K, 4 * Kout, 32))
    vals = np.exp(exponent.to_grid(M)) * f.to_grid(M)
    hat = np.fft.fft(vals) / M
    total = float(np.sum(np.abs(hat) ** 2))
    kept = float(np.sum(np.abs(hat[: Kout + 1]) ** 2) + np.sum(np.abs(hat[M - Kout:]) ** 2))
    frac = max(total - kept, 0.0) / total if total > 0 else 0.0
    if frac > aliasing_budget:
        raise AliasingBudgetExceeded(frac, aliasing_budget)
    c = np.empty(2 * Kout + 1, dtype=np.complex128)
    c[Kout:] = hat[: Kout + 1]
    c[:Kout] = hat[M - Kout:]
    return FourierField(c, max(f.N, 2 * Kout + 2))


def sobolev_norm(f: FourierField, s: float | SobolevIndex) -> float:
    s_val = s.s if isinstance(s, SobolevIndex) else float(s)
    if s_val < 0:
        raise ValueError("Sobolev index must be nonnegative")
    k = np.arange(-f.K, f.K + 1)
    w = (1.0 + k.astype(np.float64) ** 2) ** s_val
    return math.sqrt(float(np.sum(w * np.abs(f.coeffs) ** 2)))


def grid_l2_norm(f: FourierField, M: int | None = None) -> float:
    """Normalized grid L2 norm sqrt(mean |u|^2); equals sobolev_norm(f, 0)."""
    vals = f.to_grid(M if M is not None else max(f.N, 4 * f.K + 4))
    return math.sqrt(float(np.mean(vals ** 2)))


def pairing_exp(f: FourierField, k: int) -> complex:
    """<f, e^{ikx}/sqrt(2 pi)> in L2(T): equals sqrt(2 pi) * u_{-k}."""
    return math.sqrt(2.0 * math.pi) * f.coeff(-k)


def pairing_cos(f: FourierField, k: int) -> float:
    """<f, c_k> with c_0 = 1/sqrt(2 pi), c_k = cos(kx)/sqrt(pi)."""
    if k == 0:
        return math.sqrt(2.0 * math.pi) * f.mean
    return 2.0 * math.sqrt(math.pi) * float(f.coeff(k).real)


def pairing_sin(f: FourierField, k: int) -> float:
    """<f, s_k> with s_k = sin(kx)/sqrt(pi), k >= 1."""
    if k <= 0:
        raise ValueError("sine pairings need k >= 1")
    return -2.0 * math.sqrt(math.pi) * float(f.coeff(k).imag)


# -- serialization ----------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field_csv(f: FourierField, csv_path, sidecar_path=None) -> None:
    """CSV with columns k,re,im (k from -K to K) plus a JSON sidecar {K, N}."""
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "re", "im"])
        for i, k in enumerate(range(-f.K, f.K + 1)):
            w.writerow([k, _fmt(f.coeffs[i].real), _fmt(f.coeffs[i].imag)])
    if sidecar_path is not None:
        with open(sidecar_path, "w") as fh:
            json.dump({"K": f.K, "N": f.N}, fh, sort_keys=True)
            fh.write("\n")


def read_field_csv(csv_path, sidecar_path=None) -> FourierField:
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["k", "re", "im"]:
        raise ValueError("field CSV must start with header k,re,im")
    ks, vals = [], []
    for row in rows[1:]:
        ks.append(int(row[0]))
        vals.append(complex(float(row[1]), float(row[2])))
    K = max(abs(k) for k in ks)
    c = np.zeros(2 * K + 1, dtype=np.complex128)
    for k, v in zip(ks, vals):
        c[k + K] = v
    N = None
    if sidecar_path is not None:
        with open(sidecar_path) as fh:
            N = json.load(fh)["N"]
    return FourierField(c, N, _symmetrize=False)


def field_csv_text(f: FourierField) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["k", "re", "im"])
    for i, k in enumerate(range(-f.K, f.K + 1)):
        w.writerow([k, _fmt(f.coeffs[i].real), _fmt(f.coeffs[i].imag)])
    return buf.getvalue()
