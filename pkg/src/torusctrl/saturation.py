"""Exact rational algebra for the saturation chain H_0 c H_1 c ...

Everything here is exact: trigonometric polynomials carry Fraction
coefficients, span membership is decided by rational row reduction, and
derivation trees witness membership of concrete modes in the chain
generated from span{1, cos x, sin x} by the quartic-derivative rule.

A tree node is either a generator (rational combination of 1, cos x,
sin x) or a quartic node ``affine - sum_k w_k (child_k')^4`` with rational
weights w_k. Weighted quartic sums are exactly the rational linear
combinations of the generating elements ``phi_0 - sum (phi_k')^4`` that the
span closure produces, so depth still witnesses chain membership.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import BudgetExceeded

__all__ = [
    "TrigPolynomial",
    "PhaseTree",
    "Generator",
    "Quartic",
    "SpanBasis",
    "h0_basis",
    "generate_next",
    "expand_square_to_quartics",
    "cross_product_tree",
    "mode_ladder",
    "membership",
    "tree_to_sexpr",
    "tree_from_sexpr",
]

Q = Fraction


# -- exact trigonometric polynomials ----------------------------------------

class TrigPolynomial:
    """Finite  a_0 + sum_k (a_k cos kx + b_k sin kx)  with Fraction coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[int, tuple[Fraction, Fraction]] | None = None):
        clean: dict[int, tuple[Fraction, Fraction]] = {}
        for k, (a, b) in (terms or {}).items():
            if k < 0:
                raise ValueError("frequencies are nonnegative")
            a, b = Q(a), Q(b)
            if k == 0:
                b = Q(0)
            if a or b:
                clean[k] = (a, b)
        self.terms = clean

    @staticmethod
    def zero() -> "TrigPolynomial":
        return TrigPolynomial()

    @staticmethod
    def const(c) -> "TrigPolynomial":
        return TrigPolynomial({0: (Q(c), Q(0))})

    @staticmethod
    def cos(k: int, amp=1) -> "TrigPolynomial":
        return TrigPolynomial({k: (Q(amp), Q(0))})

    @staticmethod
    def sin(k: int, amp=1) -> "TrigPolynomial":
        return TrigPolynomial({k: (Q(0), Q(amp))})

    def coeff(self, k: int) -> tuple[Fraction, Fraction]:
        return self.terms.get(k, (Q(0), Q(0)))

    @property
    def max_freq(self) -> int:
        return max(self.terms) if self.terms else 0

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, TrigPolynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        out = dict(self.terms)
        for k, (a, b) in other.terms.items():
            ca, cb = out.get(k, (Q(0), Q(0)))
            out[k] = (ca + a, cb + b)
        return TrigPolynomial(out)

    def __sub__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return self + (-1) * other

    def __rmul__(self, scalar) -> "TrigPolynomial":
        s = Q(scalar)
        return TrigPolynomial({k: (s * a, s * b) for k, (a, b) in self.terms.items()})

    def derivative(self) -> "TrigPolynomial":
        out = {}
        for k, (a, b) in self.terms.items():
            if k > 0:
                out[k] = (k * b, -k * a)
        return TrigPolynomial(out)

    def __mul__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        """Product via the product-to-sum rules; exact."""
        if not isinstance(other, TrigPolynomial):
            return NotImplemented
        acc: dict[int, list[Fraction]] = {}

        def add(k: int, a: Fraction, b: Fraction):
            if k < 0:
                k, a, b = -k, a, -b
            cur = acc.setdefault(k, [Q(0), Q(0)])
            cur[0] += a
            cur[1] += b

        half = Q(1, 2)
        for k1, (a1, b1) in self.terms.items():
            for k2, (a2, b2) in other.terms.items():
                # cos k1 cos k2 = (cos(k1-k2) + cos(k1+k2))/2
                c = half * a1 * a2
                if c:
                    add(k1 - k2, c, Q(0))
                    add(k1 + k2, c, Q(0))
                # sin k1 sin k2 = (cos(k1-k2) - cos(k1+k2))/2
                c = half * b1 * b2
                if c:
                    add(k1 - k2, c, Q(0))
                    add(k1 + k2, -c, Q(0))
                # sin k1 cos k2 = (sin(k1+k2) + sin(k1-k2))/2
                c = half * b1 * a2
                if c:
                    add(k1 + k2, Q(0), c)
                    add(k1 - k2, Q(0), c)
                # cos k1 sin k2 = (sin(k1+k2) - sin(k1-k2))/2
                c = half * a1 * b2
                if c:
                    add(k1 + k2, Q(0), c)
                    add(k1 - k2, Q(0), -c)
        return TrigPolynomial({k: (v[0], v[1]) for k, v in acc.items()})

    def pow4(self) -> "TrigPolynomial":
        sq = self * self
        return sq * sq

    def to_field(self, K: int):
        """Float FourierField view (for the synthesis compiler)."""
        from .field import FourierField
        import numpy as np
        c = np.zeros(2 * K + 1, dtype=np.complex128)
        for k, (a, b) in self.terms.items():
            if k > K:
                raise ValueError(f"frequency {k} above truncation {K}")
            if k == 0:
                c[K] = float(a)
            else:
                c[K + k] = 0.5 * float(a) - 0.5j * float(b)
                c[K - k] = 0.5 * float(a) + 0.5j * float(b)
        return FourierField(c, _symmetrize=False)

    def __repr__(self):
        if self.is_zero():
            return "TrigPolynomial(0)"
        bits = []
        for k in sorted(self.terms):
            a, b = self.terms[k]
            if k == 0:
                bits.append(f"{a}")
            else:
                if a:
                    bits.append(f"{a}*cos{k}x")
                if b:
                    bits.append(f"{b}*sin{k}x")
        return "TrigPolynomial(" + " + ".join(bits) + ")"


# -- derivation trees ---------------------------------------------------------

class Generator:
    """lambda_0 * 1 + lambda_1 * cos x + lambda_2 * sin x, rational lambdas."""

    __slots__ = ("lam", "depth", "_eval", "_dp4")

    def __init__(self, lam):
        self.lam = tuple(Q(v) for v in lam)
        if len(self.lam) != 3:
            raise ValueError("generator needs three coefficients")
        self.depth = 0
        self._eval = None
        self._dp4 = None

    def evaluate(self) -> TrigPolynomial:
        if self._eval is None:
            c0, c1, s1 = self.lam
            self._eval = TrigPolynomial({0: (c0, Q(0)), 1: (c1, s1)})
        return self._eval

    def scaled(self, s) -> "Generator":
        s = Q(s)
        return Generator(tuple(s * v for v in self.lam))

    def node_count(self) -> int:
        return 1

    def __eq__(self, other):
        return isinstance(other, Generator) and self.lam == other.lam

    def __repr__(self):
        return f"Generator{self.lam}"


class Quartic:
    """affine - sum_k weight_k * (child_k')^4 with rational weights.

    Subtrees are shared aggressively by the ladder, so depth is computed at
    construction and evaluations are cached per node: walking the DAG stays
    linear in the number of distinct nodes.
    """

    __slots__ = ("children", "weights", "affine", "depth", "_eval", "_dp4")

    def __init__(self, children, weights, affine):
        self.children = tuple(children)
        self.weights = tuple(Q(w) for w in weights)
        self.affine = affine
        if len(self.children) != len(self.weights):
            raise ValueError("one weight per child")
        inner = max((c.depth for c in self.children), default=0)
        self.depth = 1 + max(inner, affine.depth)
        self._eval = None
        self._dp4 = None

    def evaluate(self) -> TrigPolynomial:
        if self._eval is None:
            acc = self.affine.evaluate()
            for w, child in zip(self.weights, self.children):
                acc = acc - w * _deriv_pow4(child)
            self._eval = acc
        return self._eval

    def scaled(self, s) -> "Quartic":
        s = Q(s)
        return Quartic(self.children, tuple(s * w for w in self.weights),
                       self.affine.scaled(s))

    def node_count(self) -> int:
        seen = set()

        def walk(t):
            if id(t) in seen:
                return 0
            seen.add(id(t))
            if isinstance(t, Generator):
                return 1
            return 1 + walk(t.affine) + sum(walk(c) for c in t.children)

        return walk(self)

    def __eq__(self, other):
        return (isinstance(other, Quartic) and self.weights == other.weights
                and self.affine == other.affine and self.children == other.children)

    def __repr__(self):
        return f"Quartic(d={self.depth}, n_children={len(self.children)})"


PhaseTree = Generator | Quartic


def _deriv_pow4(t: PhaseTree) -> TrigPolynomial:
    """(t')^4, cached on the node: shared subtrees are expanded once."""
    if t._dp4 is None:
        t._dp4 = t.evaluate().derivative().pow4()
    return t._dp4

_ZERO_GEN = Generator((Q(0), Q(0), Q(0)))


def tree_add(t1: PhaseTree, t2: PhaseTree) -> PhaseTree:
    """Exact sum of two witnesses; depth is the max of the depths."""
    if isinstance(t1, Generator) and isinstance(t2, Generator):
        return Generator(tuple(a + b for a, b in zip(t1.lam, t2.lam)))
    if isinstance(t1, Generator):
        t1, t2 = t2, t1
    if isinstance(t2, Generator):
        return Quartic(t1.children, t1.weights, tree_add(t1.affine, t2))
    return Quartic(t1.children + t2.children, t1.weights + t2.weights,
                   tree_add(t1.affine, t2.affine))


def tree_scale(t: PhaseTree, s) -> PhaseTree:
    return t.scaled(s)


# -- span bases and exact membership ------------------------------------------

def _poly_to_vec(p: TrigPolynomial, max_freq: int) -> list[Fraction]:
    """Coordinates over (1, cos x, sin x, cos 2x, sin 2x, ...)."""
    vec = [Q(0)] * (2 * max_freq + 1)
    for k, (a, b) in p.terms.items():
        if k > max_freq:
            raise ValueError("frequency above basis cap")
        if k == 0:
            vec[0] = a
        else:
            vec[2 * k - 1] = a
            vec[2 * k] = b
    return vec


def _vec_to_poly(vec) -> TrigPolynomial:
    terms = {}
    if vec[0]:
        terms[0] = (vec[0], Q(0))
    k = 1
    i = 1
    while i < len(vec):
        a = vec[i]
        b = vec[i + 1] if i + 1 < len(vec) else Q(0)
        if a or b:
            terms[k] = (a, b)
        i += 2
        k += 1
    return TrigPolynomial(terms)


class SpanBasis:
    """Rational span of trig polynomials, kept in reduced row echelon form."""

    def __init__(self, polys=(), max_freq: int = 16):
        self.max_freq = max_freq
        self.rows: list[list[Fraction]] = []
        for p in polys:
            self.add(p)

    def add(self, p: TrigPolynomial) -> bool:
        """Insert p; returns True if the span grew."""
        if p.max_freq > self.max_freq:
            raise BudgetExceeded(
                f"frequency {p.max_freq} above basis cap {self.max_freq}")
        vec = _poly_to_vec(p, self.max_freq)
        vec = self._reduce(vec)
        pivot = next((i for i, v in enumerate(vec) if v), None)
        if pivot is None:
            return False
        inv = Q(1) / vec[pivot]
        vec = [v * inv for v in vec]
        for row in self.rows:
            if row[pivot]:
                f = row[pivot]
                for i in range(len(row)):
                    row[i] -= f * vec[i]
        self.rows.append(vec)
        self.rows.sort(key=lambda r: next(i for i, v in enumerate(r) if v))
        return True

    def _reduce(self, vec: list[Fraction]) -> list[Fraction]:
        vec = list(vec)
        for row in self.rows:
            pivot = next(i for i, v in enumerate(row) if v)
            if vec[pivot]:
                f = vec[pivot]
                for i in range(len(vec)):
                    vec[i] -= f * row[i]
        return vec

    def residual(self, p: TrigPolynomial) -> TrigPolynomial:
        return _vec_to_poly(self._reduce(_poly_to_vec(p, self.max_freq)))

    def contains(self, p: TrigPolynomial) -> bool:
        return self.residual(p).is_zero()

    @property
    def dim(self) -> int:
        return len(self.rows)

    def polynomials(self) -> list[TrigPolynomial]:
        return [_vec_to_poly(r) for r in self.rows]

    def copy(self) -> "SpanBasis":
        out = SpanBasis((), self.max_freq)
        out.rows = [list(r) for r in self.rows]
        return out


def h0_basis(max_freq: int = 16) -> SpanBasis:
    return SpanBasis(
        [TrigPolynomial.const(1), TrigPolynomial.cos(1), TrigPolynomial.sin(1)],
        max_freq=max_freq,
    )


def membership(p: TrigPolynomial, basis: SpanBasis) -> tuple[bool, TrigPolynomial]:
    """Exact span membership; the residual is zero or the leftover polynomial."""
    r = basis.residual(p)
    return r.is_zero(), r


def generate_next(basis: SpanBasis, max_freq: int | None = None,
                  max_terms: int = 4096) -> SpanBasis:
    """One saturation step restricted to pairwise +- combinations.

    Adds every (phi_i')^4 and (phi_i' +- phi_j')^4 formed from the current
    basis polynomials; these are exactly the combinations the chain-growth
    identities use, and quartic products of squares follow from them by
    rational combination.
    """
    cap = max_freq if max_freq is not None else basis.max_freq
    polys = basis.polynomials()
    out = SpanBasis((), max_freq=max(cap, basis.max_freq))
    for p in polys:
        out.add(p)
    candidates: list[TrigPolynomial] = []
    for i, p in enumerate(polys):
        dp = p.derivative()
        candidates.append(dp.pow4())
        for q in polys[i + 1:]:
            dq = q.derivative()
            candidates.append((dp + dq).pow4())
            candidates.append((dp - dq).pow4())
    if len(candidates) > max_terms:
        raise BudgetExceeded(f"{len(candidates)} candidate terms exceed {max_terms}")
    for cand in candidates:
        if cand.max_freq > cap:
            raise BudgetExceeded(
                f"candidate frequency {cand.max_freq} above cap {cap}")
        out.add(cand)
    return out


# -- constructive ladder -------------------------------------------------------

def expand_square_to_quartics(phi: PhaseTree) -> PhaseTree:
    """A witness one level deeper evaluating exactly to (phi')^2.

    Uses a^2 b^2 = [(a+b)^4 + (a-b)^4 - 2a^4 - 2b^4] / 12 with the partner
    generators sin x and cos x, then (phi')^2 sin^2 x + (phi')^2 cos^2 x.
    """
    partners = [Generator((Q(0), Q(0), Q(1))),   # sin x, derivative cos x
                Generator((Q(0), Q(1), Q(0)))]   # cos x, derivative -sin x
    children: list[PhaseTree] = []
    weights: list[Fraction] = []
    for psi in partners:
        children.append(tree_add(phi, psi))
        weights.append(Q(-1, 12))
        children.append(tree_add(phi, psi.scaled(-1)))
        weights.append(Q(-1, 12))
        children.append(psi)
        weights.append(Q(1, 6))
    children.append(phi)
    weights.append(Q(1, 3))
    return Quartic(tuple(children), tuple(weights), _ZERO_GEN)


def cross_product_tree(phi1: PhaseTree, phi2: PhaseTree) -> PhaseTree:
    """Witness for phi1' * phi2' = [( (phi1+phi2)' )^2 - (phi1')^2 - (phi2')^2]/2."""
    s = expand_square_to_quartics(tree_add(phi1, phi2))
    a = expand_square_to_quartics(phi1)
    b = expand_square_to_quartics(phi2)
    half = Q(1, 2)
    return tree_add(tree_scale(s, half),
                    tree_add(tree_scale(a, -half), tree_scale(b, -half)))


_COS_PRIM = {}  # n -> tree with derivative cos nx
_SIN_PRIM = {}  # n -> tree with derivative sin nx


def _ladder(n: int, budget_freq: int, memo: dict) -> tuple[PhaseTree, PhaseTree]:
    """(cos nx tree, sin nx tree), built by minimal-depth frequency splits."""
    if n in memo:
        return memo[n]
    if 4 * n > budget_freq:
        raise BudgetExceeded(
            f"mode {n} needs internal frequency {4 * n} above budget {budget_freq}")
    if n == 1:
        cos_t = Generator((Q(0), Q(1), Q(0)))
        sin_t = Generator((Q(0), Q(0), Q(1)))
        memo[n] = (cos_t, sin_t)
        return memo[n]

    # choose the split a + b = n minimizing witness depth, preferring b = 1
    best = None
    for b in range(1, n // 2 + 1):
        a = n - b
        da = _ladder(a, budget_freq, memo)[0].depth if a > 1 else 0
        db = _ladder(b, budget_freq, memo)[0].depth if b > 1 else 0
        d = max(da, db)
        if best is None or d < best[0]:
            best = (d, a, b)
    _, a, b = best
    cos_a, sin_a = _ladder(a, budget_freq, memo)
    cos_b, sin_b = _ladder(b, budget_freq, memo)

    # primitives whose derivatives are the required harmonics
    d_cos_a = tree_scale(sin_a, Q(1, a))       # (sin ax / a)' = cos ax
    d_sin_a = tree_scale(cos_a, Q(-1, a))      # (-cos ax / a)' = sin ax
    d_cos_b = tree_scale(sin_b, Q(1, b))
    d_sin_b = tree_scale(cos_b, Q(-1, b))

    cc = cross_product_tree(d_cos_a, d_cos_b)  # cos ax cos bx
    ss = cross_product_tree(d_sin_a, d_sin_b)  # sin ax sin bx
    sc = cross_product_tree(d_sin_a, d_cos_b)  # sin ax cos bx
    cs = cross_product_tree(d_cos_a, d_sin_b)  # cos ax sin bx

    cos_n = tree_add(cc, tree_scale(ss, -1))
    sin_n = tree_add(sc, cs)
    memo[n] = (cos_n, sin_n)
    return memo[n]


def mode_ladder(n: int, budget_freq: int = 64) -> tuple[PhaseTree, PhaseTree]:
    """Witnesses whose exact evaluations are cos nx and sin nx."""
    if n < 1:
        raise ValueError("mode index must be >= 1")
    trees = _ladder(n, budget_freq, {})
    cos_t, sin_t = trees
    assert cos_t.evaluate() == TrigPolynomial.cos(n), "ladder verification failed"
    assert sin_t.evaluate() == TrigPolynomial.sin(n), "ladder verification failed"
    return trees


# -- s-expression serialization -----------------------------------------------

def tree_to_sexpr(t: PhaseTree) -> str:
    if isinstance(t, Generator):
        return f"(gen {t.lam[0]} {t.lam[1]} {t.lam[2]})"
    inner = " ".join(
        f"({w} {tree_to_sexpr(c)})" for w, c in zip(t.weights, t.children))
    return f"(quartic (affine {tree_to_sexpr(t.affine)}) {inner})"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def tree_from_sexpr(text: str) -> PhaseTree:
    tokens = _TOKEN.findall(text)
    pos = 0

    def parse():
        nonlocal pos
        assert tokens[pos] == "("
        pos += 1
        head = tokens[pos]
        pos += 1
        if head == "gen":
            vals = []
            while tokens[pos] != ")":
                vals.append(Q(tokens[pos]))
                pos += 1
            pos += 1
            return Generator(tuple(vals))
        if head == "quartic":
            assert tokens[pos] == "(" and tokens[pos + 1] == "affine"
            pos += 2
            affine = parse()
            assert tokens[pos] == ")"
            pos += 1
            children, weights = [], []
            while tokens[pos] != ")":
                assert tokens[pos] == "("
                pos += 1
                weights.append(Q(tokens[pos]))
                pos += 1
                children.append(parse())
                assert tokens[pos] == ")"
                pos += 1
            pos += 1
            return Quartic(tuple(children), tuple(weights), affine)
        raise ValueError(f"unknown node kind {head}")

    out = parse()
    if pos != len(tokens):
        raise ValueError("trailing tokens in s-expression")
    return out
