"""Finite-dimensional super-commutative algebras and their operators.

Conventions fixed here and used everywhere else:

* elements are sparse dicts ``basis index -> Fraction`` and must be
  parity-homogeneous wherever a Koszul sign depends on them;
* the commutator of an operator with an algebra element is
  ``[D, a] = D . L_a - (-1)^{|D||a|} L_a . D`` with ``L_a`` left
  multiplication;
* the order filtration, derived multilinear maps and the exponential
  conjugation identity are all expressed through that commutator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .exactlin import ONE, ZERO, SparseMatrix, kernel_image

# ---------------------------------------------------------------------------
# sparse element helpers


def vec_add(x: dict, y: dict) -> dict:
    out = dict(x)
    for k, v in y.items():
        w = out.get(k, ZERO) + v
        if w:
            out[k] = w
        else:
            out.pop(k, None)
    return out


def vec_sub(x: dict, y: dict) -> dict:
    return vec_add(x, {k: -v for k, v in y.items()})


def vec_scale(a: Fraction, x: dict) -> dict:
    if not a:
        return {}
    return {k: a * v for k, v in x.items()}


def vec_axpy_into(out: dict, a: Fraction, x: dict) -> None:
    if not a:
        return
    for k, v in x.items():
        w = out.get(k, ZERO) + a * v
        if w:
            out[k] = w
        else:
            out.pop(k, None)


class MixedParityError(ValueError):
    """Single arguments of signed operations must be parity-homogeneous."""


def sort_with_sign(indices, parities) -> tuple[tuple, int]:
    """Sort an index tuple, returning the Koszul sign of the permutation.

    Each adjacent swap of entries with parities p, q contributes
    (-1)^{pq}.
    """
    idx = list(indices)
    sign = 1
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            if parities[idx[j - 1]] and parities[idx[j]]:
                sign = -sign
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            j -= 1
    return tuple(idx), sign


# ---------------------------------------------------------------------------
# super vector spaces


@dataclass(frozen=True)
class SuperSpace:
    labels: tuple
    parities: tuple

    def __post_init__(self):
        if len(self.labels) != len(self.parities):
            raise ValueError("labels/parities length mismatch")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate basis labels")
        if any(p not in (0, 1) for p in self.parities):
            raise ValueError("parities must be 0 or 1")

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(label)

    def pi(self) -> "SuperSpace":
        """Parity reversion: flip every basis parity."""
        return SuperSpace(self.labels, tuple(1 - p for p in self.parities))


def element_parity(space: SuperSpace, x: dict):
    """0/1 for homogeneous nonzero x, None for 0, raises when mixed."""
    ps = {space.parities[i] for i in x}
    if not ps:
        return None
    if len(ps) > 1:
        raise MixedParityError(f"element {x} mixes parities")
    return ps.pop()


# ---------------------------------------------------------------------------
# algebras


@dataclass(frozen=True)
class AlgebraPresentation:
    """Unital super-commutative algebra by basis and structure constants.

    ``structure[(i, j)]`` is the sparse expansion of ``b_i b_j``; missing
    keys mean the product is zero.  ``ideal`` designates a pronilpotent
    ideal by basis indices, with ``I^{ideal_exponent} = 0``.
    """

    space: SuperSpace
    unit: dict
    structure: dict
    ideal: tuple | None = None
    ideal_exponent: int | None = None
    _mult_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    def basis_element(self, i: int) -> dict:
        return {i: ONE}

    def mul(self, x: dict, y: dict) -> dict:
        out: dict = {}
        for i, a in x.items():
            for j, b in y.items():
                cij = self.structure.get((i, j))
                if cij:
                    vec_axpy_into(out, a * b, cij)
        return out

    def mult_operator(self, x: dict) -> SparseMatrix:
        """Left multiplication by x as a matrix."""
        key = tuple(sorted(x.items()))
        cached = self._mult_cache.get(key)
        if cached is not None:
            return cached
        n = self.dim
        entries: dict = {}
        for i, a in x.items():
            for j in range(n):
                cij = self.structure.get((i, j))
                if cij:
                    for k, v in cij.items():
                        w = entries.get((k, j), ZERO) + a * v
                        if w:
                            entries[(k, j)] = w
                        else:
                            entries.pop((k, j), None)
        M = SparseMatrix(n, n, entries)
        if len(self._mult_cache) < 4096:
            self._mult_cache[key] = M
        return M

    def in_ideal(self, x: dict) -> bool:
        if self.ideal is None:
            return False
        iset = set(self.ideal)
        return all(i in iset for i in x)

    def power(self, x: dict, k: int) -> dict:
        out = dict(self.unit)
        for _ in range(k):
            out = self.mul(out, x)
        return out


def _strip(d: dict) -> dict:
    return {k: v for k, v in d.items() if v}


def algebra_from_products(space, unit_index, products, ideal=None, ideal_exponent=None):
    """Assemble an AlgebraPresentation from a full basis product table."""
    structure = {}
    for (i, j), vec in products.items():
        vec = _strip(vec)
        if vec:
            structure[(i, j)] = vec
    return AlgebraPresentation(space, {unit_index: ONE}, structure, ideal, ideal_exponent)


def exterior_algebra(names) -> AlgebraPresentation:
    """Grassmann algebra on odd generators; basis = ordered subsets."""
    names = list(names)
    r = len(names)
    subsets = []
    for k in range(r + 1):
        subsets.extend(itertools.combinations(range(r), k))
    labels = tuple("1" if not s else "".join(names[i] for i in s) for s in subsets)
    parities = tuple(len(s) % 2 for s in subsets)
    space = SuperSpace(labels, parities)
    idx = {s: n for n, s in enumerate(subsets)}
    products = {}
    for a, s in enumerate(subsets):
        for b, t in enumerate(subsets):
            if set(s) & set(t):
                continue
            merged, sign = _merge_odd(s, t)
            products[(a, b)] = {idx[merged]: Fraction(sign)}
    ideal = tuple(n for n, s in enumerate(subsets) if s)
    return algebra_from_products(space, 0, products, ideal, 2 if r == 1 else r + 1)


def _merge_odd(s, t):
    """Merge two disjoint increasing tuples of odd symbols; count sign."""
    merged = list(s)
    sign = 1
    for x in t:
        pos = len(merged)
        while pos > 0 and merged[pos - 1] > x:
            pos -= 1
        sign *= (-1) ** (len(merged) - pos)
        merged.insert(pos, x)
    return tuple(merged), sign


def truncated_polynomial_algebra(name: str, m: int) -> AlgebraPresentation:
    """Q[x]/(x^m) with x even; basis 1, x, ..., x^{m-1}."""
    labels = tuple("1" if k == 0 else (name if k == 1 else f"{name}^{k}") for k in range(m))
    space = SuperSpace(labels, (0,) * m)
    products = {}
    for i in range(m):
        for j in range(m):
            if i + j < m:
                products[(i, j)] = {i + j: ONE}
    return algebra_from_products(space, 0, products, tuple(range(1, m)), m)


def tensor_algebra(A: AlgebraPresentation, B: AlgebraPresentation):
    """Super tensor product A (x) B; returns (algebra, flat, unflat).

    ``flat(i, j)`` is the basis index of ``a_i (x) b_j``;
    multiplication carries the Koszul sign (-1)^{|b_j||a_k|}.
    """
    nA, nB = A.dim, B.dim
    flat = lambda i, j: i * nB + j  # noqa: E731
    unflat = lambda n: divmod(n, nB)  # noqa: E731
    labels = []
    parities = []
    for i in range(nA):
        for j in range(nB):
            la, lb = A.space.labels[i], B.space.labels[j]
            labels.append(la if lb == "1" else (lb if la == "1" else f"{la}*{lb}"))
            parities.append((A.space.parities[i] + B.space.parities[j]) % 2)
    space = SuperSpace(tuple(labels), tuple(parities))
    structure = {}
    for (i1, i2), ca in A.structure.items():
        for (j1, j2), cb in B.structure.items():
            sign = -1 if (B.space.parities[j1] and A.space.parities[i2]) else 1
            vec = {}
            for k1, va in ca.items():
                for k2, vb in cb.items():
                    w = sign * va * vb
                    if w:
                        vec[flat(k1, k2)] = vec.get(flat(k1, k2), ZERO) + w
            vec = _strip(vec)
            if vec:
                structure[(flat(i1, j1), flat(i2, j2))] = vec
    unit = {}
    for i, a in A.unit.items():
        for j, b in B.unit.items():
            unit[flat(i, j)] = a * b
    ideal = None
    exponent = None
    if A.ideal is not None and B.ideal is not None:
        ia, ib = set(A.ideal), set(B.ideal)
        ideal = tuple(
            flat(i, j) for i in range(nA) for j in range(nB) if i in ia or j in ib
        )
        exponent = A.ideal_exponent + B.ideal_exponent - 1
    alg = AlgebraPresentation(space, unit, structure, ideal, exponent)
    return alg, flat, unflat


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class AlgebraReport:
    ok: bool
    failures: tuple

    def first(self, kind: str):
        for f in self.failures:
            if f[0] == kind:
                return f
        return None


def check_algebra(A: AlgebraPresentation) -> AlgebraReport:
    """Verify unit, associativity, super-commutativity, parity, ideal."""
    failures = []
    n = A.dim
    par = A.space.parities
    for i in range(n):
        b = A.basis_element(i)
        if A.mul(A.unit, b) != b or A.mul(b, A.unit) != b:
            failures.append(("unit", i))
            break
    for i in range(n):
        for j in range(n):
            prod = A.structure.get((i, j), {})
            if any(par[k] != (par[i] + par[j]) % 2 for k in prod):
                failures.append(("parity", (i, j)))
                break
        else:
            continue
        break
    comm_done = False
    for i in range(n):
        if comm_done:
            break
        for j in range(i, n):
            sign = -ONE if par[i] and par[j] else ONE
            left = A.structure.get((i, j), {})
            right = A.structure.get((j, i), {})
            if left != vec_scale(sign, right):
                failures.append(("commutativity", (i, j)))
                comm_done = True
                break
    assoc_done = False
    for i in range(n):
        if assoc_done:
            break
        bi = A.basis_element(i)
        for j in range(n):
            if assoc_done:
                break
            bj = A.basis_element(j)
            ij = A.mul(bi, bj)
            for k in range(n):
                bk = A.basis_element(k)
                if A.mul(ij, bk) != A.mul(bi, A.mul(bj, bk)):
                    failures.append(("associativity", (i, j, k)))
                    assoc_done = True
                    break
    if A.ideal is not None:
        iset = set(A.ideal)
        closed = True
        for i in A.ideal:
            for j in range(n):
                if any(k not in iset for k in A.structure.get((i, j), {})):
                    failures.append(("ideal_closure", (i, j)))
                    closed = False
                    break
            if not closed:
                break
        if closed and A.ideal_exponent is not None:
            span = [A.basis_element(i) for i in A.ideal]
            for _ in range(A.ideal_exponent - 1):
                nxt = []
                for i in A.ideal:
                    bi = A.basis_element(i)
                    for v in span:
                        w = A.mul(bi, v)
                        if w:
                            nxt.append(w)
                span = _span_basis(nxt, n)
                if not span:
                    break
            if span:
                failures.append(("ideal_nilpotency", A.ideal_exponent))
    return AlgebraReport(not failures, tuple(failures))


def _span_basis(vectors, dim):
    if not vectors:
        return []
    from .exactlin import matrix_from_rows

    rows = [tuple(v.get(i, ZERO) for i in range(dim)) for v in vectors]
    _, rref_rows = matrix_from_rows(rows, dim).rref()
    return [{i: x for i, x in enumerate(row) if x} for row in rref_rows]


# ---------------------------------------------------------------------------
# linear operators


@dataclass(frozen=True)
class LinearOperator:
    parity: int
    matrix: SparseMatrix

    def __call__(self, x: dict) -> dict:
        return self.matrix.apply(x)

    def is_zero(self) -> bool:
        return self.matrix.is_zero()

    def __add__(self, other):
        if self.parity != other.parity:
            raise ValueError("cannot add operators of different parity")
        return LinearOperator(self.parity, self.matrix + other.matrix)

    def __sub__(self, other):
        if self.parity != other.parity:
            raise ValueError("cannot subtract operators of different parity")
        return LinearOperator(self.parity, self.matrix - other.matrix)

    def scale(self, a) -> "LinearOperator":
        return LinearOperator(self.parity, self.matrix.scale(a))


def operator(space: SuperSpace, parity: int, entries) -> LinearOperator:
    """Build an operator, verifying parity consistency of every entry."""
    M = SparseMatrix.from_entries(space.dim, space.dim, entries)
    for (r, c) in M.entries:
        if space.parities[r] != (space.parities[c] + parity) % 2:
            raise ValueError(f"entry ({r},{c}) violates declared parity {parity}")
    return LinearOperator(parity, M)


def zero_operator(space: SuperSpace, parity: int) -> LinearOperator:
    return LinearOperator(parity, SparseMatrix.zero(space.dim, space.dim))


def compose(D: LinearOperator, E: LinearOperator) -> LinearOperator:
    return LinearOperator((D.parity + E.parity) % 2, D.matrix @ E.matrix)


def commutator(A: AlgebraPresentation, D: LinearOperator, a: dict) -> LinearOperator:
    """[D, a] = D L_a - (-1)^{|D||a|} L_a D for homogeneous a."""
    pa = element_parity(A.space, a)
    if pa is None:
        return zero_operator(A.space, D.parity)
    L = A.mult_operator(a)
    M = D.matrix @ L
    N = L @ D.matrix
    if D.parity and pa:
        M = M + N
    else:
        M = M - N
    return LinearOperator((D.parity + pa) % 2, M)


def plain_commutator_with(A: AlgebraPresentation, a: dict, D: LinearOperator) -> LinearOperator:
    """ad(a)(D) = L_a D - D L_a, no Koszul sign.

    This is the adjoint action entering Ad(e^a) = e^{ad a}, which holds
    for arbitrary a; for even a it agrees with the super commutator.
    """
    L = A.mult_operator(a)
    return LinearOperator(D.parity, L @ D.matrix - D.matrix @ L)


# ---------------------------------------------------------------------------
# order filtration and derived multilinear maps


def _commutator_levels(A: AlgebraPresentation, D: LinearOperator, depth: int):
    """levels[k] maps canonical index tuples t (|t| = k) to [[D,b_t1],...].

    Tuples are nondecreasing; repeated odd indices are skipped since the
    corresponding iterated commutator vanishes identically.
    """
    par = A.space.parities
    n = A.dim
    levels = [{(): D}]
    for _ in range(depth):
        prev = levels[-1]
        cur = {}
        for t, E in prev.items():
            if E.is_zero():
                continue
            start = t[-1] if t else 0
            for j in range(start, n):
                if t and j == t[-1] and par[j]:
                    continue
                cur[t + (j,)] = commutator(A, E, A.basis_element(j))
        levels.append(cur)
    return levels


def operator_order(A: AlgebraPresentation, D: LinearOperator, cap: int):
    """Smallest n <= cap with all (n+1)-fold commutators zero, else None."""
    levels = [{(): D}]
    for k in range(cap + 1):
        nxt = _commutator_levels_step(A, levels[-1])
        if all(E.is_zero() for E in nxt.values()):
            return k
        levels.append(nxt)
    return None


def _commutator_levels_step(A, prev):
    par = A.space.parities
    n = A.dim
    cur = {}
    for t, E in prev.items():
        if E.is_zero():
            continue
        start = t[-1] if t else 0
        for j in range(start, n):
            if t and j == t[-1] and par[j]:
                continue
            cur[t + (j,)] = commutator(A, E, A.basis_element(j))
    return cur


def has_order_at_most(A: AlgebraPresentation, D: LinearOperator, n: int) -> bool:
    """Order test through the derived-map criterion: m_{n+1} = 0."""
    return derived_map(A, D, n + 1).is_zero()


@dataclass(frozen=True)
class MultiMap:
    """Graded-symmetric multilinear map, tabulated on canonical tuples.

    Canonical tuples are nondecreasing with no repeated odd index; the
    value on any other tuple is recovered with the Koszul sign of the
    sorting permutation.
    """

    arity: int
    parity: int
    space: SuperSpace
    codomain: SuperSpace
    table: dict

    def __post_init__(self):
        par = self.space.parities
        cpar = self.codomain.parities
        for t, vec in self.table.items():
            if len(t) != self.arity:
                raise ValueError("tuple length != arity")
            expected = (sum(par[i] for i in t) + self.parity) % 2
            for k, v in vec.items():
                if not v:
                    raise ValueError("stored zero in MultiMap table")
                if cpar[k] != expected:
                    raise ValueError(f"value parity mismatch on {t}")

    def value_on_basis(self, idx_tuple) -> dict:
        par = self.space.parities
        t, sign = sort_with_sign(idx_tuple, par)
        for a, b in zip(t, t[1:]):
            if a == b and par[a]:
                return {}
        vec = self.table.get(t)
        if not vec:
            return {}
        return vec if sign == 1 else vec_scale(Fraction(sign), vec)

    def eval(self, vectors) -> dict:
        if len(vectors) != self.arity:
            raise ValueError("arity mismatch")
        out: dict = {}
        supports = [list(v.items()) for v in vectors]
        for combo in itertools.product(*supports):
            coeff = ONE
            for _, c in combo:
                coeff *= c
            vec_axpy_into(out, coeff, self.value_on_basis(tuple(i for i, _ in combo)))
        return out

    def is_zero(self) -> bool:
        return not self.table


def multimap_from_table(arity, parity, space, table, codomain=None) -> MultiMap:
    clean = {}
    for t, vec in table.items():
        vec = _strip(vec)
        if vec:
            clean[t] = vec
    return MultiMap(arity, parity, space, codomain or space, clean)


def canonical_tuples(space: SuperSpace, arity: int):
    """Nondecreasing index tuples without repeated odd indices."""
    par = space.parities
    n = space.dim

    def rec(start, k):
        if k == 0:
            yield ()
            return
        for j in range(start, n):
            for rest in rec(j + 1 if par[j] else j, k - 1):
                yield (j,) + rest

    return rec(0, arity)


def derived_map(A: AlgebraPresentation, D: LinearOperator, n: int) -> MultiMap:
    """m_n(a_1, ..., a_n) = [[...[D, a_1]...], a_n](1)."""
    return derived_maps(A, D, n)[n]


def derived_maps(A: AlgebraPresentation, D: LinearOperator, up_to: int) -> dict:
    """All derived maps m_1..m_{up_to} of D, sharing commutator levels."""
    par = A.space.parities
    n = A.dim
    out = {}
    level = {(): D}
    for arity in range(1, up_to + 1):
        table = {}
        for t, E in level.items():
            e1 = E.matrix.apply(A.unit)
            sign_E = (D.parity + sum(par[i] for i in t)) % 2
            start = t[-1] if t else 0
            for j in range(start, n):
                if t and j == t[-1] and par[j]:
                    continue
                # [E, b_j](1) = E(b_j) - (-1)^{|E||b_j|} b_j . E(1)
                val = E.matrix.apply(A.mul(A.basis_element(j), A.unit))
                s = -ONE if (sign_E and par[j]) else ONE
                val = vec_sub(val, vec_scale(s, A.mul(A.basis_element(j), e1)))
                if val:
                    table[t + (j,)] = val
        out[arity] = multimap_from_table(arity, D.parity, A.space, table)
        if arity < up_to:
            level = _commutator_levels_step(A, level)
    return out


# ---------------------------------------------------------------------------
# exponentials in a pronilpotent ideal


class IdealMembershipError(ValueError):
    pass


def exp_element(A: AlgebraPresentation, a: dict) -> dict:
    """e^a = sum a^k / k!, finite because a lies in the nilpotent ideal."""
    if not A.in_ideal(a) and a:
        raise IdealMembershipError("exp argument outside the designated ideal")
    out = dict(A.unit)
    term = dict(A.unit)
    k = 1
    bound = (A.ideal_exponent or 1) + 1
    while True:
        term = vec_scale(Fraction(1, k), A.mul(term, a))
        if not term:
            break
        out = vec_add(out, term)
        k += 1
        if k > bound:
            raise AssertionError("exp series failed to terminate")
    return out


def log_element(A: AlgebraPresentation, b: dict) -> dict:
    """log b for b - 1 in the ideal; inverse of exp_element."""
    u = vec_sub(b, A.unit)
    if not A.in_ideal(u) and u:
        raise IdealMembershipError("log argument is not 1 + (ideal element)")
    out: dict = {}
    term = dict(A.unit)
    k = 1
    bound = (A.ideal_exponent or 1) + 1
    while True:
        term = A.mul(term, u)
        if not term:
            break
        out = vec_add(out, vec_scale(Fraction((-1) ** (k + 1), k), term))
        k += 1
        if k > bound:
            raise AssertionError("log series failed to terminate")
    return out


def exp_conjugation_check(A: AlgebraPresentation, D: LinearOperator, a: dict) -> bool:
    """Verify D . L_{e^a} = L_{e^a} . e^{-ad(a)}(D) exactly.

    ad is the plain operator commutator, for which the identity holds
    for every ideal element a (homogeneous or not) and every D.
    """
    if not A.in_ideal(a) and a:
        raise IdealMembershipError("conjugation element outside the designated ideal")
    Lexp = A.mult_operator(exp_element(A, a))
    lhs = D.matrix @ Lexp
    term = D
    rhs_op = D.matrix
    k = 1
    bound = 2 * (A.ideal_exponent or 1) + 2
    while True:
        term = plain_commutator_with(A, a, term)
        if term.is_zero():
            break
        rhs_op = rhs_op + term.matrix.scale(Fraction((-1) ** k, _factorial(k)))
        k += 1
        if k > bound:
            raise AssertionError("ad-series failed to terminate")
    rhs = Lexp @ rhs_op
    return lhs == rhs


def _factorial(k: int) -> int:
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def operator_exp(delta: LinearOperator) -> SparseMatrix:
    """e^delta for a nilpotent even operator; exact, finite series."""
    if delta.parity != 0:
        raise ValueError("exponential of an odd operator is not an automorphism")
    n = delta.matrix.nrows
    out = SparseMatrix.identity(n)
    term = SparseMatrix.identity(n)
    k = 1
    while True:
        term = (delta.matrix @ term).scale(Fraction(1, k))
        if term.is_zero():
            return out
        out = out + term
        k += 1
        if k > n + 1:
            raise AssertionError("operator exponential did not terminate (not nilpotent?)")


def conjugate_operator(D: LinearOperator, delta: LinearOperator) -> LinearOperator:
    """e^delta . D . e^{-delta} for a nilpotent even derivation delta.

    When delta is a derivation this is conjugation by an algebra
    automorphism fixing 1, so it preserves D^2 = 0 and D(1) = 0.
    """
    phi = operator_exp(delta)
    phi_inv = operator_exp(delta.scale(Fraction(-1)))
    return LinearOperator(D.parity, phi @ D.matrix @ phi_inv)


# ---------------------------------------------------------------------------
# derivations and random data (used by generators and tests)


def exterior_subsets(r: int) -> list:
    """Basis subsets of exterior_algebra(r names), in construction order."""
    subsets = []
    for k in range(r + 1):
        subsets.extend(itertools.combinations(range(r), k))
    return subsets


def exterior_generator_index(r: int, i: int) -> int:
    return 1 + i


def exterior_derivation(A: AlgebraPresentation, r: int, images, parity: int) -> LinearOperator:
    """Derivation of a Grassmann algebra from its values on generators.

    images[i] is the value on the i-th generator; the extension to a
    monomial theta_{s_1}...theta_{s_k} inserts (-1)^{parity*(a-1)} when
    the derivation passes the first a-1 odd factors.
    """
    subsets = exterior_subsets(r)
    entries = []
    for col, S in enumerate(subsets):
        out: dict = {}
        for a, gen in enumerate(S):
            img = images[gen]
            if not img:
                continue
            sign = -ONE if (parity and a % 2) else ONE
            left = dict(A.unit)
            for g in S[:a]:
                left = A.mul(left, A.basis_element(exterior_generator_index(r, g)))
            right = dict(A.unit)
            for g in S[a + 1 :]:
                right = A.mul(right, A.basis_element(exterior_generator_index(r, g)))
            vec_axpy_into(out, sign, A.mul(A.mul(left, img), right))
        for row, v in out.items():
            entries.append((row, col, v))
    return operator(A.space, parity, entries)


def formal_derivative(A: AlgebraPresentation, m: int) -> LinearOperator:
    """d/dx on Q[x]/(x^m) acting on the monomial basis.

    Defined on representatives; not compatible with the truncated
    product at the top degree, which is exactly what makes it useful as
    a source of operators of unbounded order.
    """
    entries = [(k - 1, k, Fraction(k)) for k in range(1, m)]
    return operator(A.space, 0, entries)


def derivation_basis(A: AlgebraPresentation, parity: int) -> list:
    """Basis of the space of derivations of A with the given parity.

    Solves the Leibniz constraints X(b_i b_j) = X(b_i) b_j +
    (-1)^{p |b_i|} b_i X(b_j) as an exact linear system.
    """
    n = A.dim
    par = A.space.parities
    slots = [
        (r, c)
        for c in range(n)
        for r in range(n)
        if par[r] == (par[c] + parity) % 2
    ]
    slot_index = {rc: k for k, rc in enumerate(slots)}
    rows = []
    for i in range(n):
        for j in range(n):
            cij = A.structure.get((i, j), {})
            # coefficient map: row per target coordinate k
            coeffs: dict = {}

            def bump(k_target, rc, v):
                if rc not in slot_index:
                    return
                key = (k_target, slot_index[rc])
                coeffs[key] = coeffs.get(key, ZERO) + v

            for m, w in cij.items():
                for r in range(n):
                    bump(r, (r, m), w)  # X(b_i b_j) component
            for r in range(n):
                # X(b_i) b_j: X(b_i) = sum_r x_{r,i} b_r, multiply by b_j
                crj = A.structure.get((r, j), {})
                for k_t, w in crj.items():
                    bump(k_t, (r, i), -w)
                # (-1)^{p|b_i|} b_i X(b_j)
                cir = A.structure.get((i, r), {})
                sgn = -ONE if (parity and par[i]) else ONE
                for k_t, w in cir.items():
                    bump(k_t, (r, j), -sgn * w)
            for (k_t, sl), v in coeffs.items():
                if v:
                    rows.append((i * n * n + j * n + k_t, sl, v))
    M = SparseMatrix.from_entries(n * n * n, len(slots), rows)
    kernel, _ = kernel_image(M)
    ops = []
    for v in kernel:
        entries = [(r, c, x) for (r, c), x in zip(slots, v) if x]
        ops.append(operator(A.space, parity, entries))
    return ops


def random_element(A: AlgebraPresentation, rng, parity=None, ideal_only=False, span=3) -> dict:
    indices = list(A.ideal) if ideal_only and A.ideal is not None else list(range(A.dim))
    if parity is not None:
        indices = [i for i in indices if A.space.parities[i] == parity]
    out = {}
    for i in indices:
        if rng.random() < 0.5:
            v = Fraction(rng.randint(-span, span), rng.randint(1, 2))
            if v:
                out[i] = v
    return out


def random_operator(space: SuperSpace, parity: int, rng, density=0.3, span=3) -> LinearOperator:
    entries = []
    for c in range(space.dim):
        for r in range(space.dim):
            if space.parities[r] != (space.parities[c] + parity) % 2:
                continue
            if rng.random() < density:
                v = Fraction(rng.randint(-span, span), rng.randint(1, 2))
                if v:
                    entries.append((r, c, v))
    return operator(space, parity, entries)


def tensor_lift_left(space, flat, dimB, X: LinearOperator) -> LinearOperator:
    """X (x) id on a tensor algebra with flattened basis (no sign)."""
    entries = []
    for (r, c), v in X.matrix.entries.items():
        for j in range(dimB):
            entries.append((flat(r, j), flat(c, j), v))
    return operator(space, X.parity, entries)


def tensor_lift_right(space, flat, spaceA: SuperSpace, Y: LinearOperator) -> LinearOperator:
    """id (x) Y; picks up (-1)^{|Y||a_i|} on the left leg."""
    entries = []
    for i in range(spaceA.dim):
        sgn = -ONE if (Y.parity and spaceA.parities[i]) else ONE
        for (r, c), v in Y.matrix.entries.items():
            entries.append((flat(i, r), flat(i, c), sgn * v))
    return operator(space, Y.parity, entries)
