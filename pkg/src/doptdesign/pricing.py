"""Pricing problem: maximize p(x)^T G p(x) over the experiment space.

Three routes share one interface: a bit-flip/bit-swap ascent, exhaustive
enumeration, and an exact branch-and-bound over a linearization in which
every multilinear bit product gets an auxiliary variable with its McCormick
envelope.  Levels beyond two are binarized with ceil(log2 L) bits per factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .model import ExperimentSpace, MonomialModel, enumerate_space

DEFAULT_ENUM_CAP = 2**24
DEFAULT_NODE_LIMIT = 10**6
# Nodes whose LP bound is within this margin of the incumbent are still
# explored, so LP solver tolerance can never prune the true optimum.
BOUND_SAFETY = 1e-7


class EnumerationCapError(ValueError):
    """Feasible set too large to enumerate under the configured cap."""


@dataclass(frozen=True)
class PricingResult:
    x: np.ndarray
    value: float
    exact: bool
    nodes: int
    hit_node_limit: bool = False


def quad_value(G: np.ndarray, v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    return float(v @ G @ v)


def heuristic_search(
    G: np.ndarray,
    space: ExperimentSpace,
    model: MonomialModel,
    start: np.ndarray,
) -> PricingResult:
    """First-improvement ascent over single-level moves and level swaps.

    Neighbor order is deterministic: +/- e_i by increasing i, then e_i - e_j
    over ordered pairs.  The returned point is locally maximal in both
    neighborhoods restricted to the feasible set.
    """
    x = np.asarray(start, dtype=np.int64).copy()
    if not space.contains(x):
        raise ValueError("start point is infeasible")
    d = space.d
    value = quad_value(G, model.evaluate(x))
    evals = 1
    improved = True
    while improved:
        improved = False
        for i in range(d):
            for delta in (1, -1):
                x[i] += delta
                if space.contains(x):
                    cand = quad_value(G, model.evaluate(x))
                    evals += 1
                    if cand > value:
                        value = cand
                        improved = True
                        break
                x[i] -= delta
            if improved:
                break
        if improved:
            continue
        for i in range(d):
            for j in range(d):
                if i == j:
                    continue
                x[i] += 1
                x[j] -= 1
                if space.contains(x):
                    cand = quad_value(G, model.evaluate(x))
                    evals += 1
                    if cand > value:
                        value = cand
                        improved = True
                        break
                x[i] -= 1
                x[j] += 1
            if improved:
                break
    return PricingResult(x=x, value=value, exact=False, nodes=evals)


def solve_enum(
    G: np.ndarray,
    space: ExperimentSpace,
    model: MonomialModel,
    cap: int = DEFAULT_ENUM_CAP,
) -> PricingResult:
    """Exact optimum by enumeration; ties go to the lexicographically smallest x."""
    if space.L**space.d > cap:
        raise EnumerationCapError(
            f"{space.L ** space.d} membership tests exceed cap {cap}"
        )
    X = enumerate_space(space, cap)
    if X.shape[0] == 0:
        raise ValueError("feasible set is empty")
    P = model.evaluate_many(X).astype(float)
    vals = np.einsum("ij,jk,ik->i", P, G, P)
    best = int(np.argmax(vals))  # first argmax = lexicographically smallest
    return PricingResult(
        x=X[best].copy(), value=float(vals[best]), exact=True, nodes=X.shape[0]
    )


# --------------------------------------------------------------------------
# Linearization
# --------------------------------------------------------------------------


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for fa, ca in a.items():
        for fb, cb in b.items():
            key = fa | fb  # binary idempotence: z^2 = z
            out[key] = out.get(key, 0.0) + ca * cb
    return out


@dataclass
class LinearizedProgram:
    """Integer linear reformulation of the pricing quadratic.

    Variables are the factor bits followed by one auxiliary variable per
    distinct bit product of size >= 2.  Integer-feasible points are in
    bijection with the experiment space.
    """

    space: ExperimentSpace
    model: MonomialModel
    bits_per_factor: int
    aux_index: dict = field(repr=False)
    c: np.ndarray = field(repr=False)
    c0: float = 0.0
    A_ub: np.ndarray = field(default=None, repr=False)
    b_ub: np.ndarray = field(default=None, repr=False)
    fixed_bits: dict = field(default_factory=dict)

    @property
    def n_bits(self) -> int:
        return self.space.d * self.bits_per_factor

    @property
    def n_vars(self) -> int:
        return self.n_bits + len(self.aux_index)

    def bit(self, factor: int, t: int) -> int:
        return factor * self.bits_per_factor + t

    def decode_bits(self, z: np.ndarray) -> np.ndarray:
        nb = self.bits_per_factor
        x = np.zeros(self.space.d, dtype=np.int64)
        for j in range(self.space.d):
            for t in range(nb):
                x[j] += int(round(z[self.bit(j, t)])) << t
        return x

    def encode(self, x: np.ndarray) -> np.ndarray:
        nb = self.bits_per_factor
        z = np.zeros(self.n_bits, dtype=np.int64)
        for j, xj in enumerate(x):
            for t in range(nb):
                z[self.bit(j, t)] = (int(xj) >> t) & 1
        return z

    def objective_at_bits(self, z: np.ndarray) -> float:
        """Objective at an integer bit vector, with auxiliaries at their products."""
        full = np.zeros(self.n_vars)
        full[: self.n_bits] = z
        for F, col in self.aux_index.items():
            full[col] = float(np.prod([z[b] for b in F]))
        return self.c0 + float(self.c @ full)


def build_linearization(
    G: np.ndarray, space: ExperimentSpace, model: MonomialModel
) -> LinearizedProgram:
    """Lift the quadratic objective into a linear one over bits and products."""
    if model.order > 2:
        raise ValueError(f"model order {model.order} > 2 is unsupported")
    d = space.d
    nb = max(1, math.ceil(math.log2(space.L)))
    n_bits = d * nb

    def bit(j, t):
        return j * nb + t

    # monomial -> polynomial over bits with idempotent products
    monos = []
    for row in model.exponents:
        poly = {frozenset(): 1.0}
        for j, e in enumerate(row):
            factor_poly = {frozenset([bit(j, t)]): float(2**t) for t in range(nb)}
            for _ in range(e):
                poly = _poly_mul(poly, factor_poly)
        monos.append(poly)

    obj: dict = {}
    p = model.p
    for i in range(p):
        for j in range(i, p):
            w = float(G[i, j]) if i == j else 2.0 * float(G[i, j])
            if w == 0.0:
                continue
            for key, coeff in _poly_mul(monos[i], monos[j]).items():
                obj[key] = obj.get(key, 0.0) + w * coeff

    aux_index: dict = {}
    for key in sorted((k for k in obj if len(k) >= 2), key=sorted):
        aux_index[key] = n_bits + len(aux_index)

    n_vars = n_bits + len(aux_index)
    c = np.zeros(n_vars)
    c0 = obj.get(frozenset(), 0.0)
    for key, coeff in obj.items():
        if len(key) == 1:
            (b,) = key
            c[b] += coeff
        elif len(key) >= 2:
            c[aux_index[key]] += coeff

    rows, rhs = [], []

    def add_row(row, bound):
        rows.append(row)
        rhs.append(bound)

    # McCormick hull of y = prod of bits in F
    for F, col in aux_index.items():
        members = sorted(F)
        for b in members:
            row = np.zeros(n_vars)
            row[col] = 1.0
            row[b] = -1.0
            add_row(row, 0.0)  # y <= z_b
        row = np.zeros(n_vars)
        row[col] = -1.0
        for b in members:
            row[b] = 1.0
        add_row(row, float(len(members) - 1))  # y >= sum z_b - |F| + 1

    # side constraints A x <= b in bit space
    A, b = space.constraint_arrays()
    for m in range(A.shape[0]):
        row = np.zeros(n_vars)
        for j in range(d):
            for t in range(nb):
                row[bit(j, t)] = A[m, j] * (2**t)
        add_row(row, float(b[m]))

    # exclude levels >= L when the bit range overshoots
    if 2**nb - 1 > space.L - 1:
        for j in range(d):
            row = np.zeros(n_vars)
            for t in range(nb):
                row[bit(j, t)] = float(2**t)
            add_row(row, float(space.L - 1))

    fixed_bits = {}
    if space.fixed_first:
        fixed_bits[bit(0, 0)] = 1
        for t in range(1, nb):
            fixed_bits[bit(0, t)] = 0

    A_ub = np.array(rows) if rows else np.zeros((0, n_vars))
    b_ub = np.array(rhs)
    return LinearizedProgram(
        space=space,
        model=model,
        bits_per_factor=nb,
        aux_index=aux_index,
        c=c,
        c0=c0,
        A_ub=A_ub,
        b_ub=b_ub,
        fixed_bits=fixed_bits,
    )


# --------------------------------------------------------------------------
# Branch and bound
# --------------------------------------------------------------------------


def _lex_smaller(a: np.ndarray, b: np.ndarray) -> bool:
    for ai, bi in zip(a, b):
        if ai != bi:
            return ai < bi
    return False


def solve_bb(
    G: np.ndarray,
    space: ExperimentSpace,
    model: MonomialModel,
    incumbent: Optional[PricingResult] = None,
    target: Optional[float] = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
    lin: Optional[LinearizedProgram] = None,
) -> PricingResult:
    """Exact branch-and-bound on the linearized program.

    With a finite ``target``, returns early (exact=False) as soon as a point
    with value > target is known; this is all a local-search improving move
    needs.  Bounds come from the LP relaxation; branching picks the most
    fractional bit.
    """
    if lin is None:
        lin = build_linearization(G, space, model)

    best_x = None
    best_val = -np.inf
    if incumbent is not None:
        best_x = np.asarray(incumbent.x, dtype=np.int64)
        best_val = quad_value(G, model.evaluate(best_x))
    if target is not None and best_val > target:
        return PricingResult(x=best_x, value=best_val, exact=False, nodes=0)
    if target == -np.inf:
        if best_x is None:
            raise ValueError("target -inf needs an incumbent to return")
        return PricingResult(x=best_x, value=best_val, exact=False, nodes=0)

    base_bounds = [(0.0, 1.0)] * lin.n_vars
    for b, v in lin.fixed_bits.items():
        base_bounds[b] = (float(v), float(v))

    stack = [dict()]
    nodes = 0
    neg_c = -lin.c
    while stack:
        fixed = stack.pop()
        nodes += 1
        if nodes > node_limit:
            if best_x is None:
                raise RuntimeError("node limit hit before any feasible point was found")
            return PricingResult(
                x=best_x, value=best_val, exact=False, nodes=nodes, hit_node_limit=True
            )
        bounds = list(base_bounds)
        for b, v in fixed.items():
            bounds[b] = (float(v), float(v))
        res = linprog(neg_c, A_ub=lin.A_ub, b_ub=lin.b_ub, bounds=bounds, method="highs")
        if res.status != 0:
            continue  # infeasible subproblem
        bound = lin.c0 - res.fun
        safety = BOUND_SAFETY * max(1.0, abs(bound))
        if best_x is not None and bound <= best_val - safety:
            continue
        z = res.x[: lin.n_bits]
        frac = np.abs(z - np.round(z))
        branch_bit = -1
        worst = 1e-6
        for b in range(lin.n_bits):
            if b in fixed or b in lin.fixed_bits:
                continue
            if frac[b] > worst:
                worst = frac[b]
                branch_bit = b
        if branch_bit < 0:
            x = lin.decode_bits(np.round(z))
            if space.contains(x):
                value = quad_value(G, model.evaluate(x))
                if value > best_val or (
                    best_x is not None
                    and abs(value - best_val) <= 1e-12 * max(1.0, abs(best_val))
                    and _lex_smaller(x, best_x)
                ):
                    if value > best_val:
                        best_val = value
                    best_x = x
                    if target is not None and best_val > target:
                        return PricingResult(
                            x=best_x, value=best_val, exact=False, nodes=nodes
                        )
            continue
        for v in (0, 1):
            child = dict(fixed)
            child[branch_bit] = v
            stack.append(child)
    if best_x is None:
        raise ValueError("feasible set is empty")
    return PricingResult(x=best_x, value=best_val, exact=True, nodes=nodes)


@dataclass
class Pricer:
    """Pricing dispatcher: enumeration when the space is small, B&B otherwise."""

    space: ExperimentSpace
    model: MonomialModel
    enum_threshold: int = 2**16
    enum_cap: int = DEFAULT_ENUM_CAP
    node_limit: int = DEFAULT_NODE_LIMIT

    def heuristic(self, G: np.ndarray, start: np.ndarray) -> PricingResult:
        return heuristic_search(G, self.space, self.model, start)

    def exact(
        self,
        G: np.ndarray,
        incumbent: Optional[PricingResult] = None,
        target: Optional[float] = None,
    ) -> PricingResult:
        if self.space.L**self.space.d <= self.enum_threshold:
            return solve_enum(G, self.space, self.model, cap=self.enum_cap)
        return solve_bb(
            G,
            self.space,
            self.model,
            incumbent=incumbent,
            target=target,
            node_limit=self.node_limit,
        )
