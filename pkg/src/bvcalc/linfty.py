"""L-infinity structures in the odd symmetric multilinear presentation.

A structure is a family of odd graded-symmetric brackets m_n on a super
space W (the parity reversion of the underlying space), subject to the
quadratic relations

    sum_{p+q=n+1} sum_{(p,n-p)-unshuffles S} eps(S)
        m_q(m_p(x_S), x_{S^c}) = 0

with eps(S) the Koszul sign computed from the parities of W.  Morphisms
are families of even symmetric maps f_n; both sides of their defining
equations are implemented below, together with Maurer-Cartan sets over
finite local test cdgas, the exponential cycle correspondence, and
homotopy transfer to minimal models.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction

from .exactlin import ONE, ZERO, SparseMatrix, homology, matrix_from_rows, solve_columns
from .superalg import (
    AlgebraPresentation,
    LinearOperator,
    MultiMap,
    SuperSpace,
    canonical_tuples,
    derived_maps,
    element_parity,
    exp_element,
    multimap_from_table,
    operator,
    tensor_algebra,
    tensor_lift_left,
    tensor_lift_right,
    vec_add,
    vec_axpy_into,
    vec_scale,
    vec_sub,
)


class CurvedOperatorError(ValueError):
    """D(1) != 0: would produce a curved structure, which is rejected."""


class SquareNotZeroError(ValueError):
    """D^2 != 0 passed where a square-zero operator is required."""


class MissingBracketError(ValueError):
    """An evaluation needs a bracket beyond the tabulated arity cap."""


# ---------------------------------------------------------------------------
# structures


@dataclass(frozen=True)
class LInftyStructure:
    """Brackets m_n (odd MultiMaps) on the bracket space ``space``.

    ``space`` is already the parity reversion of the underlying space;
    ``max_nonzero_arity`` certifies that every bracket above it is zero
    (None means unknown beyond ``arity_cap``).
    """

    space: SuperSpace
    brackets: dict
    arity_cap: int = 5
    max_nonzero_arity: int | None = None

    def __post_init__(self):
        for n, m in self.brackets.items():
            if m.arity != n or m.parity != 1:
                raise ValueError(f"bracket {n} must be an odd MultiMap of arity {n}")

    def bracket(self, n: int) -> MultiMap | None:
        b = self.brackets.get(n)
        if b is not None:
            return b
        if n <= self.arity_cap:
            return None  # tabulated range, zero
        if self.max_nonzero_arity is not None and n > self.max_nonzero_arity:
            return None
        raise MissingBracketError(f"bracket m_{n} not tabulated and not certified zero")

    def m1_operator(self) -> LinearOperator:
        m1 = self.brackets.get(1)
        if m1 is None:
            return LinearOperator(1, SparseMatrix.zero(self.space.dim, self.space.dim))
        return multimap_to_operator(m1)

    @property
    def underlying_space(self) -> SuperSpace:
        return self.space.pi()


def multimap_to_operator(m: MultiMap) -> LinearOperator:
    entries = []
    for (j,), vec in m.table.items():
        for i, v in vec.items():
            entries.append((i, j, v))
    return LinearOperator(
        m.parity, SparseMatrix.from_entries(m.codomain.dim, m.space.dim, entries)
    )


def operator_to_multimap(space: SuperSpace, D: LinearOperator) -> MultiMap:
    table = {}
    for j, col in D.matrix.columns().items():
        table[(j,)] = {i: v for i, v in col}
    return multimap_from_table(1, D.parity, space, table)


def abelian_structure(space: SuperSpace, D: LinearOperator, arity_cap: int = 5) -> LInftyStructure:
    """All brackets zero except m_1 = D."""
    brackets = {}
    if not D.is_zero():
        brackets[1] = operator_to_multimap(space, D)
    return LInftyStructure(space, brackets, arity_cap, max_nonzero_arity=1)


# ---------------------------------------------------------------------------
# Koszul bookkeeping


def unshuffle_sign(positions_S, parities) -> int:
    """Koszul sign moving the S-positions to the front, orders kept."""
    sign = 1
    Sset = set(positions_S)
    for i in positions_S:
        if not parities[i]:
            continue
        for j in range(i):
            if j not in Sset and parities[j]:
                sign = -sign
    return sign


def permutation_sign(seq, parities_by_position) -> int:
    """Koszul sign of rearranging 0..n-1 into ``seq``."""
    sign = 1
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b] and parities_by_position[seq[a]] and parities_by_position[seq[b]]:
                sign = -sign
    return sign


def set_partitions(n: int):
    """Set partitions of range(n); blocks ascending, ordered by minimum."""
    if n == 0:
        yield []
        return
    for rest in set_partitions(n - 1):
        yield rest + [[n - 1]]
        for i in range(len(rest)):
            yield rest[:i] + [rest[i] + [n - 1]] + rest[i + 1 :]


# ---------------------------------------------------------------------------
# relation checking


@dataclass(frozen=True)
class RelationReport:
    ok: bool
    first_failure: tuple | None  # (arity, tuple, residual vector)


def relation_value(L: LInftyStructure, idx_tuple) -> dict:
    """The quadratic relation at one basis tuple; zero iff it holds."""
    n = len(idx_tuple)
    par = L.space.parities
    pos_par = [par[i] for i in idx_tuple]
    out: dict = {}
    for p in range(1, n + 1):
        q = n + 1 - p
        mp = L.bracket(p)
        mq = L.bracket(q)
        if mp is None or mq is None:
            continue
        for S in itertools.combinations(range(n), p):
            sign = unshuffle_sign(S, pos_par)
            inner = mp.value_on_basis(tuple(idx_tuple[i] for i in S))
            if not inner:
                continue
            rest = tuple(idx_tuple[i] for i in range(n) if i not in set(S))
            for k, v in inner.items():
                vec_axpy_into(out, Fraction(sign) * v, mq.value_on_basis((k,) + rest))
    return out


def check_relations(L: LInftyStructure, up_to: int) -> RelationReport:
    """Verify the quadratic relations on all basis tuples of arity <= up_to."""
    if up_to > L.arity_cap:
        raise ValueError("relation check beyond the declared arity cap")
    for n in range(1, up_to + 1):
        for t in canonical_tuples(L.space, n):
            r = relation_value(L, t)
            if r:
                return RelationReport(False, (n, t, r))
    return RelationReport(True, None)


# ---------------------------------------------------------------------------
# structures from square-zero operators


def derived_structure(A: AlgebraPresentation, D: LinearOperator, arity_cap: int = 5) -> LInftyStructure:
    """Derived brackets of an odd operator, no square-zero gate.

    Tabulates m_1..m_{cap}; when m_{cap+1} vanishes identically the
    order criterion certifies that every higher bracket is zero too.
    """
    maps = derived_maps(A, D, arity_cap + 1)
    brackets = {n: maps[n] for n in range(1, arity_cap + 1) if not maps[n].is_zero()}
    top = arity_cap if maps[arity_cap + 1].is_zero() else None
    return LInftyStructure(A.space, brackets, arity_cap, max_nonzero_arity=top)


def from_operator(A: AlgebraPresentation, D: LinearOperator, arity_cap: int = 5) -> LInftyStructure:
    """L-infinity structure on the parity reversion of A from D.

    Requires D odd with D(1) = 0 and D^2 = 0.
    """
    if D.parity != 1:
        raise ValueError("operator must be odd")
    if D(A.unit):
        raise CurvedOperatorError("D(1) != 0 (curved structures are out of scope)")
    if not (D.matrix @ D.matrix).is_zero():
        raise SquareNotZeroError("D^2 != 0")
    return derived_structure(A, D, arity_cap)


# ---------------------------------------------------------------------------
# test cdgas


@dataclass(frozen=True)
class TestCDGA:
    """Finite-dimensional local cdga with nilpotent maximal ideal."""

    algebra: AlgebraPresentation
    differential: LinearOperator
    name: str = ""

    @property
    def exponent(self) -> int:
        return self.algebra.ideal_exponent

    @property
    def maximal_ideal(self) -> tuple:
        return self.algebra.ideal


def check_test_cdga(C: TestCDGA) -> list:
    """Return a list of defect descriptions (empty = valid)."""
    A, d = C.algebra, C.differential
    out = []
    if d.parity != 1:
        out.append("differential not odd")
    if not (d.matrix @ d.matrix).is_zero():
        out.append("d^2 != 0")
    if d(A.unit):
        out.append("d(1) != 0")
    if A.ideal is None or A.ideal_exponent is None:
        out.append("maximal ideal not designated")
        return out
    if len(A.ideal) != A.dim - 1:
        out.append("quotient by the maximal ideal is not one-dimensional")
    iset = set(A.ideal)
    for i in A.ideal:
        if any(k not in iset for k in d(A.basis_element(i))):
            out.append(f"d does not preserve the maximal ideal at {i}")
            break
    par = A.space.parities
    for i in range(A.dim):
        for j in range(A.dim):
            bi, bj = A.basis_element(i), A.basis_element(j)
            lhs = d(A.mul(bi, bj))
            sign = -ONE if par[i] else ONE
            rhs = vec_add(A.mul(d(bi), bj), vec_scale(sign, A.mul(bi, d(bj))))
            if lhs != rhs:
                out.append(f"not a derivation at ({i},{j})")
                return out
    return out


def cdga_zoo() -> list:
    """Finite local test cdgas; at least five, with and without d."""
    from .superalg import exterior_algebra, truncated_polynomial_algebra

    zoo = []
    dual = truncated_polynomial_algebra("e", 2)
    zoo.append(TestCDGA(dual, LinearOperator(1, SparseMatrix.zero(2, 2)), "dual-even"))
    oddline = exterior_algebra(["n"])
    zoo.append(TestCDGA(oddline, LinearOperator(1, SparseMatrix.zero(2, 2)), "dual-odd"))
    t4 = truncated_polynomial_algebra("t", 4)
    zoo.append(TestCDGA(t4, LinearOperator(1, SparseMatrix.zero(4, 4)), "trunc4"))
    pair = exterior_algebra(["n1", "n2"])
    zoo.append(TestCDGA(pair, LinearOperator(1, SparseMatrix.zero(4, 4)), "odd-pair"))
    two_eps, _, _ = tensor_algebra(
        truncated_polynomial_algebra("e1", 2), truncated_polynomial_algebra("e2", 2)
    )
    zoo.append(TestCDGA(two_eps, LinearOperator(1, SparseMatrix.zero(4, 4)), "two-eps"))
    contr, flat, _ = tensor_algebra(exterior_algebra(["n"]), truncated_polynomial_algebra("e", 2))
    d = operator(contr.space, 1, [(flat(0, 1), flat(1, 0), ONE)])  # d(n) = e
    zoo.append(TestCDGA(contr, d, "contractible"))
    return zoo


# ---------------------------------------------------------------------------
# Maurer-Cartan


@dataclass(frozen=True)
class MCElement:
    """Even element of C_+ (x) W, stored as (c index, w index) -> Fraction."""

    cdga: TestCDGA
    space: SuperSpace
    terms: dict

    def __post_init__(self):
        cpar = self.cdga.algebra.space.parities
        wpar = self.space.parities
        ideal = set(self.cdga.maximal_ideal)
        for (ci, wi), v in self.terms.items():
            if not v:
                raise ValueError("stored zero in MCElement")
            if ci not in ideal:
                raise ValueError("coefficient outside the maximal ideal")
            if (cpar[ci] + wpar[wi]) % 2:
                raise ValueError("MC element must be even")


def _coefficient_extension(maps_getter, C: TestCDGA, space: SuperSpace, terms: dict, include_d: bool):
    """sum_i 1/i! f_i^C(xi, ..., xi) (+ (d_C x id) xi when include_d).

    ``maps_getter(i)`` returns the arity-i map or None when it is zero.
    """
    CA = C.algebra
    cpar = CA.space.parities
    wpar = space.parities
    out: dict = {}
    if include_d:
        dcols = C.differential.matrix.columns()
        for (ci, wi), v in terms.items():
            for ri, dv in dcols.get(ci, ()):
                key = (ri, wi)
                w = out.get(key, ZERO) + dv * v
                if w:
                    out[key] = w
                else:
                    out.pop(key, None)
    term_list = list(terms.items())
    fact = 1
    for i in range(1, C.exponent):
        fact *= i
        fi = maps_getter(i)
        if fi is None:
            continue
        for combo in itertools.product(term_list, repeat=i):
            coeff = Fraction(1, fact)
            sign = 1
            cprod = dict(CA.unit)
            for j, ((cj, wj), vj) in enumerate(combo):
                coeff *= vj
                # Koszul: c_j moves left past w_1..w_{j-1}
                if cpar[cj]:
                    for k in range(j):
                        if wpar[combo[k][0][1]]:
                            sign = -sign
                cprod = CA.mul(cprod, CA.basis_element(cj))
                if not cprod:
                    break
            if not cprod:
                continue
            val = fi.value_on_basis(tuple(wj for (cj, wj), _ in combo))
            if not val:
                continue
            coeff *= sign
            for cidx, cv in cprod.items():
                for widx, wv in val.items():
                    key = (cidx, widx)
                    w = out.get(key, ZERO) + coeff * cv * wv
                    if w:
                        out[key] = w
                    else:
                        out.pop(key, None)
    return out


def mc_residual(L: LInftyStructure, C: TestCDGA, xi: MCElement) -> dict:
    """Left side of the Maurer-Cartan equation; xi is MC iff this is {}."""
    return _coefficient_extension(L.bracket, C, L.space, xi.terms, include_d=True)


@dataclass(frozen=True)
class MCExponentialResult:
    bool_mc: bool
    bool_cycle: bool

    @property
    def agree(self) -> bool:
        return self.bool_mc == self.bool_cycle


def mc_exponential_check(
    A: AlgebraPresentation,
    D: LinearOperator,
    C: TestCDGA,
    xi: MCElement,
    arity_cap: int | None = None,
) -> MCExponentialResult:
    """Compare the MC equation for xi with (d_C + D)(e^xi - 1) = 0.

    The two verdicts are computed along independent paths: the first by
    the multilinear bracket expansion, the second inside the tensor
    algebra C (x) A.
    """
    cap = arity_cap or max(4, C.exponent - 1)
    L = from_operator(A, D, cap)
    bool_mc = not mc_residual(L, C, xi)

    T, flat, _ = tensor_algebra(C.algebra, A)
    ideal = tuple(flat(ci, ai) for ci in C.maximal_ideal for ai in range(A.dim))
    T = replace(T, ideal=ideal, ideal_exponent=C.exponent)
    DT = tensor_lift_left(T.space, flat, A.dim, C.differential) + tensor_lift_right(
        T.space, flat, C.algebra.space, D
    )
    xi_flat = {flat(ci, ai): v for (ci, ai), v in xi.terms.items()}
    cycle = DT(vec_sub(exp_element(T, xi_flat), T.unit))
    return MCExponentialResult(bool_mc, not cycle)


def random_mc_element(C: TestCDGA, space: SuperSpace, rng, density=0.5, span=2) -> MCElement:
    cpar = C.algebra.space.parities
    wpar = space.parities
    terms = {}
    for ci in C.maximal_ideal:
        for wi in range(space.dim):
            if (cpar[ci] + wpar[wi]) % 2:
                continue
            if rng.random() < density:
                v = Fraction(rng.randint(-span, span), rng.randint(1, 2))
                if v:
                    terms[(ci, wi)] = v
    return MCElement(C, space, terms)


# ---------------------------------------------------------------------------
# morphisms


@dataclass(frozen=True)
class LInftyMorphism:
    """Taylor coefficients f_n: even symmetric maps source -> target."""

    source: LInftyStructure
    target: LInftyStructure
    coeffs: dict

    def __post_init__(self):
        for n, f in self.coeffs.items():
            if f.arity != n or f.parity != 0:
                raise ValueError(f"coefficient {n} must be an even MultiMap of arity {n}")

    def coeff(self, n: int):
        return self.coeffs.get(n)


@dataclass(frozen=True)
class MorphismReport:
    ok: bool
    first_failure: tuple | None


def morphism_defect(f: LInftyMorphism, idx_tuple) -> dict:
    """LHS - RHS of the morphism equation on one source basis tuple."""
    n = len(idx_tuple)
    src, tgt = f.source, f.target
    par = src.space.parities
    pos_par = [par[i] for i in idx_tuple]
    out: dict = {}
    for p in range(1, n + 1):
        q = n + 1 - p
        mp = src.bracket(p)
        fq = f.coeff(q)
        if mp is None or fq is None:
            continue
        for S in itertools.combinations(range(n), p):
            sign = unshuffle_sign(S, pos_par)
            inner = mp.value_on_basis(tuple(idx_tuple[i] for i in S))
            if not inner:
                continue
            rest = tuple(idx_tuple[i] for i in range(n) if i not in set(S))
            for k, v in inner.items():
                vec_axpy_into(out, Fraction(sign) * v, fq.value_on_basis((k,) + rest))
    for blocks in set_partitions(n):
        k = len(blocks)
        mk = tgt.bracket(k)
        if mk is None:
            continue
        vectors = []
        for B in blocks:
            fb = f.coeff(len(B))
            if fb is None:
                vectors = None
                break
            vec = fb.value_on_basis(tuple(idx_tuple[i] for i in B))
            if not vec:
                vectors = None
                break
            vectors.append(vec)
        if vectors is None:
            continue
        seq = [i for B in blocks for i in B]
        sign = permutation_sign(seq, pos_par)
        vec_axpy_into(out, Fraction(-sign), mk.eval(vectors))
    return out


def check_morphism(f: LInftyMorphism, up_to: int) -> MorphismReport:
    for n in range(1, up_to + 1):
        for t in canonical_tuples(f.source.space, n):
            d = morphism_defect(f, t)
            if d:
                return MorphismReport(False, (n, t, d))
    return MorphismReport(True, None)


def exp_morphism(A: AlgebraPresentation, D: LinearOperator, arity_cap: int = 5) -> LInftyMorphism:
    """The morphism xi -> e^xi - 1 from the derived-bracket structure to
    the abelian structure with the same differential.

    Taylor coefficients are the n-fold products f_n(a_1,...,a_n) =
    a_1 a_2 ... a_n; f_1 is the identity.
    """
    source = from_operator(A, D, arity_cap)
    target = abelian_structure(A.space, D, arity_cap)
    coeffs = {}
    for n in range(1, arity_cap + 1):
        table = {}
        for t in canonical_tuples(A.space, n):
            prod = A.basis_element(t[0])
            for i in t[1:]:
                prod = A.mul(prod, A.basis_element(i))
                if not prod:
                    break
            if prod:
                table[t] = prod
        coeffs[n] = multimap_from_table(n, 0, A.space, table)
    return LInftyMorphism(source, target, coeffs)


def mc_pushforward(f: LInftyMorphism, C: TestCDGA, xi: MCElement) -> MCElement:
    """F(xi) = sum 1/n! f_n^C(xi,...,xi) in C_+ (x) target."""
    terms = _coefficient_extension(f.coeff, C, f.source.space, xi.terms, include_d=False)
    return MCElement(C, f.target.space, terms)


# ---------------------------------------------------------------------------
# contractions and homotopy transfer


@dataclass(frozen=True)
class Contraction:
    """(W, m1) contracted onto its homology with side conditions.

    pi . iota = id,  iota . pi - id = m1 kappa + kappa m1,
    kappa^2 = kappa iota = pi kappa = 0.
    """

    space: SuperSpace
    h_space: SuperSpace
    m1: LinearOperator
    iota: SparseMatrix
    pi: SparseMatrix
    kappa: SparseMatrix

    def verify(self) -> None:
        n, h = self.space.dim, self.h_space.dim
        if (self.pi @ self.iota) != SparseMatrix.identity(h):
            raise AssertionError("pi . iota != id")
        lhs = self.iota @ self.pi - SparseMatrix.identity(n)
        rhs = self.m1.matrix @ self.kappa + self.kappa @ self.m1.matrix
        if lhs != rhs:
            raise AssertionError("homotopy identity fails")
        if not (self.kappa @ self.kappa).is_zero():
            raise AssertionError("kappa^2 != 0")
        if not (self.kappa @ self.iota).is_zero():
            raise AssertionError("kappa . iota != 0")
        if not (self.pi @ self.kappa).is_zero():
            raise AssertionError("pi . kappa != 0")


def contraction_of(space: SuperSpace, m1: LinearOperator) -> Contraction:
    """Build a contraction of (W, m1) onto its homology.

    The differential is split into its parity blocks, homology and
    preimages are computed exactly, and kappa sends each image basis
    vector b = m1(u) to -u.
    """
    if m1.parity != 1:
        raise ValueError("differential must be odd")
    if not (m1.matrix @ m1.matrix).is_zero():
        raise SquareNotZeroError("m1^2 != 0")
    n = space.dim
    par = space.parities
    even = [i for i in range(n) if par[i] == 0]
    odd = [i for i in range(n) if par[i] == 1]
    reps: list = []
    rep_par: list = []
    image_vecs: list = []
    preimages: list = []
    for part, other in ((even, odd), (odd, even)):
        pos = {g: k for k, g in enumerate(part)}
        pos_o = {g: k for k, g in enumerate(other)}
        d_out = SparseMatrix.from_entries(
            len(other),
            len(part),
            (
                (pos_o[r], pos[c], v)
                for (r, c), v in m1.matrix.entries.items()
                if c in pos
            ),
        )
        d_in = SparseMatrix.from_entries(
            len(part),
            len(other),
            (
                (pos[r], pos_o[c], v)
                for (r, c), v in m1.matrix.entries.items()
                if c in pos_o
            ),
        )
        H = homology(d_in, d_out)
        parity_here = par[part[0]] if part else 0
        for s in H.section:
            reps.append(_embed(s, part, n))
            rep_par.append(parity_here)
        sols = solve_columns(d_in, list(H.image_basis))
        for b, u in zip(H.image_basis, sols):
            if u is None:
                raise AssertionError("image vector without preimage")
            image_vecs.append(_embed(b, part, n))
            preimages.append(_embed(u, other, n))
    h = len(reps)
    r = len(image_vecs)
    # adapted basis: columns = reps | image | preimages
    cols = reps + image_vecs + preimages
    P = SparseMatrix.from_entries(
        n, n, ((i, j, col[i]) for j, col in enumerate(cols) for i in range(n) if col[i])
    )
    inv_cols = solve_columns(P, [tuple(ONE if i == j else ZERO for i in range(n)) for j in range(n)])
    if any(col is None for col in inv_cols):
        raise AssertionError("adapted basis is not invertible")
    Pinv = SparseMatrix.from_entries(
        n, n, ((i, j, col[i]) for j, col in enumerate(inv_cols) for i in range(n) if col[i])
    )
    iota = SparseMatrix.from_entries(
        n, h, ((i, j, reps[j][i]) for j in range(h) for i in range(n) if reps[j][i])
    )
    pi = SparseMatrix.from_entries(
        h, n, ((i, j, v) for (i, j), v in Pinv.entries.items() if i < h)
    )
    U = SparseMatrix.from_entries(
        n, r, ((i, j, preimages[j][i]) for j in range(r) for i in range(n) if preimages[j][i])
    )
    B_rows = SparseMatrix.from_entries(
        r, n, ((i - h, j, v) for (i, j), v in Pinv.entries.items() if h <= i < h + r)
    )
    kappa = (U @ B_rows).scale(Fraction(-1))
    h_space = SuperSpace(tuple(f"h{k}" for k in range(h)), tuple(rep_par))
    c = Contraction(space, h_space, m1, iota, pi, kappa)
    c.verify()
    return c


def _embed(vec, positions, n):
    out = [ZERO] * n
    for k, v in enumerate(vec):
        if v:
            out[positions[k]] = v
    return tuple(out)


def transfer_with_morphism(L: LInftyStructure, c: Contraction, up_to: int):
    """Minimal-model brackets on H plus the inclusion quasi-isomorphism.

    Recursive tree sum: theta_n collects m_k over set partitions into
    k >= 2 blocks of lower transferred inclusions; m'_n = pi theta_n and
    f_n = kappa theta_n.  Side conditions make the recursion closed.
    """
    hdim = c.h_space.dim
    hpar = c.h_space.parities
    f_vec: dict = {}
    iota_cols = c.iota.columns()
    for j in range(hdim):
        f_vec[(j,)] = {i: v for i, v in iota_cols.get(j, ())}
    f_tables: dict = {1: {t: v for t, v in f_vec.items() if v}}
    m_tables: dict = {}
    for n in range(2, up_to + 1):
        f_tables[n] = {}
        m_tables[n] = {}
        for t in canonical_tuples(c.h_space, n):
            pos_par = [hpar[i] for i in t]
            theta: dict = {}
            for blocks in set_partitions(n):
                if len(blocks) < 2:
                    continue
                mk = L.bracket(len(blocks))
                if mk is None:
                    continue
                vectors = []
                for B in blocks:
                    vec = f_vec.get(tuple(t[i] for i in B))
                    if not vec:
                        vectors = None
                        break
                    vectors.append(vec)
                if vectors is None:
                    continue
                seq = [i for B in blocks for i in B]
                sign = permutation_sign(seq, pos_par)
                vec_axpy_into(theta, Fraction(sign), mk.eval(vectors))
            if theta:
                mval = c.pi.apply(theta)
                fval = c.kappa.apply(theta)
                if mval:
                    m_tables[n][t] = mval
                if fval:
                    f_vec[t] = fval
                    f_tables[n][t] = fval
    brackets = {
        n: multimap_from_table(n, 1, c.h_space, tbl) for n, tbl in m_tables.items() if tbl
    }
    transferred = LInftyStructure(c.h_space, brackets, up_to)
    coeffs = {
        n: multimap_from_table(n, 0, c.h_space, tbl, codomain=c.space)
        for n, tbl in f_tables.items()
        if tbl
    }
    morphism = LInftyMorphism(transferred, L, coeffs)
    return transferred, morphism


def transfer(L: LInftyStructure, c: Contraction, up_to: int) -> LInftyStructure:
    """Homotopy transfer along a contraction; the result is minimal."""
    transferred, _ = transfer_with_morphism(L, c, up_to)
    return transferred


def is_homotopy_abelian_up_to(L: LInftyStructure, up_to: int) -> bool:
    """True iff all transferred minimal-model brackets vanish up to up_to."""
    c = contraction_of(L.space, L.m1_operator())
    transferred = transfer(L, c, up_to)
    return all(transferred.brackets.get(n) is None for n in range(2, up_to + 1))
