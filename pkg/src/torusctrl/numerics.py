"""Shared numerical helpers: phi functions and exponential-aware quadrature."""

from __future__ import annotations

import numpy as np

__all__ = ["phi1", "phi2", "phi3", "graded_gauss", "GaussRule"]


def _phi_series(z, m: int):
    # phi_m(z) = sum_{j>=0} z^j / (j+m)!
    out = np.zeros_like(z)
    term = np.ones_like(z)
    fact = 1.0
    for j in range(m):
        fact *= (j + 1)
    term = term / fact
    out = out + term
    for j in range(1, 12):
        term = term * z / (j + m)
        out = out + term
    return out


def _phi_generic(z, m: int):
    """phi_m on complex arrays, series near 0, recurrence elsewhere."""
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 0.0, z)  # avoid divide-by-zero in the closed form
    if m == 1:
        closed = (np.exp(zs) - 1.0) / np.where(small, 1.0, zs)
    elif m == 2:
        closed = (np.exp(zs) - 1.0 - zs) / np.where(small, 1.0, zs) ** 2
    elif m == 3:
        closed = (np.exp(zs) - 1.0 - zs - 0.5 * zs ** 2) / np.where(small, 1.0, zs) ** 3
    else:
        raise ValueError("phi order 1..3 supported")
    return np.where(small, _phi_series(z, m), closed)


def phi1(z):
    """(e^z - 1)/z, stable near z = 0, complex-safe."""
    return _phi_generic(z, 1)


def phi2(z):
    return _phi_generic(z, 2)


def phi3(z):
    return _phi_generic(z, 3)


class GaussRule:
    """Composite Gauss-Legendre nodes/weights on [0, T]."""

    __slots__ = ("nodes", "weights", "edges")

    def __init__(self, nodes, weights, edges):
        self.nodes = nodes
        self.weights = weights
        self.edges = edges

    def integrate(self, values):
        return np.tensordot(np.asarray(values), self.weights, axes=([-1], [0]))


def graded_gauss(T: float, max_rate: float, *, steep_end: str = "start",
                 nodes_per_panel: int = 12, oversample: float = 10.0,
                 grading: float = 1.35, min_panels: int = 4) -> GaussRule:
    """Composite Gauss rule resolving exponentials with rates up to max_rate.

    Panels are geometrically graded toward the steep end so that each panel
    width stays below ``1/oversample`` of the local decay scale: this is the
    10x-oversampling policy for integrands like e^{-rate*t} * smooth.
    ``steep_end`` is "start" (boundary layer at t=0) or "end" (at t=T).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    rate = max(float(max_rate), 1.0 / T)
    t_min = 1.0 / (oversample * rate)
    edges = [0.0]
    pos = min(t_min, T)
    while pos < T:
        edges.append(pos)
        pos *= grading
    edges.append(T)
    edges = np.unique(np.asarray(edges))
    if len(edges) - 1 < min_panels:
        edges = np.linspace(0.0, T, min_panels + 1)
    if steep_end == "end":
        edges = (T - edges)[::-1]
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * x)
        weights.append(half * w)
    return GaussRule(np.concatenate(nodes), np.concatenate(weights), edges)
