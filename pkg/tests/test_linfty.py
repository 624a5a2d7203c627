import random
from fractions import Fraction

import pytest

from helpers import (
    heisenberg_algebra,
    perturb_operator,
    random_square_zero_operator,
)

from bvcalc.exactlin import SparseMatrix
from bvcalc.linfty import (
    Contraction,
    CurvedOperatorError,
    LInftyMorphism,
    LInftyStructure,
    MCElement,
    SquareNotZeroError,
    abelian_structure,
    cdga_zoo,
    check_morphism,
    check_relations,
    check_test_cdga,
    contraction_of,
    derived_structure,
    exp_morphism,
    from_operator,
    is_homotopy_abelian_up_to,
    mc_exponential_check,
    mc_pushforward,
    mc_residual,
    multimap_to_operator,
    operator_to_multimap,
    random_mc_element,
    transfer,
    transfer_with_morphism,
)
from bvcalc.superalg import (
    LinearOperator,
    SuperSpace,
    exterior_algebra,
    multimap_from_table,
    operator,
    random_operator,
    truncated_polynomial_algebra,
    vec_scale,
)

F = Fraction


def heisenberg_dg_lie():
    """m2 = Heisenberg bracket on a purely odd 3-space, m1 = 0."""
    W = SuperSpace(("x", "y", "z"), (1, 1, 1))
    m2 = multimap_from_table(2, 1, W, {(0, 1): {2: F(1)}})
    return LInftyStructure(W, {2: m2}, arity_cap=4, max_nonzero_arity=2)


def test_abelian_relations_pass():
    A = exterior_algebra(["a", "b"])
    rng = random.Random(0)
    D = random_square_zero_operator(A, 2, rng, conjugate=False)
    L = abelian_structure(A.space, D)
    assert check_relations(L, 4).ok


def test_heisenberg_dg_lie_relations():
    L = heisenberg_dg_lie()
    assert check_relations(L, 4).ok
    # perturb the bracket so the Jacobi identity fails
    W = L.space
    m2 = multimap_from_table(2, 1, W, {(0, 1): {2: F(1)}, (1, 2): {1: F(1)}})
    bad = LInftyStructure(W, {2: m2}, arity_cap=4, max_nonzero_arity=2)
    rep = check_relations(bad, 4)
    assert not rep.ok
    assert rep.first_failure[0] == 3


def test_from_operator_gates():
    A = exterior_algebra(["a", "b"])
    even = LinearOperator(0, SparseMatrix.identity(4))
    with pytest.raises(ValueError):
        from_operator(A, even)
    curved = operator(A.space, 1, [(A.space.index("a"), 0, F(1))])
    with pytest.raises(CurvedOperatorError):
        from_operator(A, curved)
    rng = random.Random(1)
    D = random_square_zero_operator(A, 2, rng, conjugate=False)
    bad = perturb_operator(A, D, rng)
    while (bad.matrix @ bad.matrix).is_zero():
        bad = perturb_operator(A, bad, rng)
    with pytest.raises(SquareNotZeroError):
        from_operator(A, bad)


def test_kravchenko_equivalence_smoke():
    rng = random.Random(2)
    for r in (3, 4):
        A = exterior_algebra([f"t{i}" for i in range(1, r + 1)])
        for _ in range(5):
            D = random_square_zero_operator(A, r, rng)
            L = derived_structure(A, D, 4)
            assert check_relations(L, 4).ok
            bad = perturb_operator(A, D, rng)
            while (bad.matrix @ bad.matrix).is_zero():
                bad = perturb_operator(A, bad, rng)
            Lbad = derived_structure(A, bad, 4)
            assert not check_relations(Lbad, 4).ok


def test_from_operator_heisenberg_brackets():
    A, delta = heisenberg_algebra()
    L = from_operator(A, delta, 4)
    assert check_relations(L, 4).ok
    ix, iy, iz = (A.space.index(k) for k in ("x", "y", "z"))
    m2 = L.brackets[2]
    val = m2.value_on_basis((ix, iy))
    assert val in ({iz: F(1)}, {iz: F(-1)})
    assert 3 not in L.brackets  # order two: m3 = 0
    assert L.max_nonzero_arity == 4  # m5 vanished, so all higher brackets do


def test_zoo_is_valid():
    zoo = cdga_zoo()
    assert len(zoo) >= 5
    names = {C.name for C in zoo}
    assert len(names) == len(zoo)
    for C in zoo:
        assert check_test_cdga(C) == [], C.name
    assert any(not C.differential.is_zero() for C in zoo)


def test_mc_residual_zero_element():
    A, delta = heisenberg_algebra()
    L = from_operator(A, delta, 4)
    C = cdga_zoo()[0]
    xi = MCElement(C, L.space, {})
    assert mc_residual(L, C, xi) == {}


def test_mc_residual_dual_numbers():
    # C = Q[e]/(e^2): residual of e (x) a is e (x) m1(a); higher terms die
    A, delta = heisenberg_algebra()
    L = from_operator(A, delta, 4)
    C = next(c for c in cdga_zoo() if c.name == "dual-even")
    e = C.maximal_ideal[0]
    ixy = A.space.index("xy")
    iz = A.space.index("z")
    xi = MCElement(C, L.space, {(e, ixy): F(1)})
    assert mc_residual(L, C, xi) == {(e, iz): F(1)}
    Codd = next(c for c in cdga_zoo() if c.name == "dual-odd")
    n = Codd.maximal_ideal[0]
    xi2 = MCElement(Codd, L.space, {(n, iz): F(1)})  # m1(z) = 0
    assert mc_residual(L, Codd, xi2) == {}


def test_mc_residual_cross_term():
    # two odd coefficients: the n1 n2 component is the m2 cross term
    A, delta = heisenberg_algebra()
    L = from_operator(A, delta, 4)
    C = next(c for c in cdga_zoo() if c.name == "odd-pair")
    CA = C.algebra
    n1 = CA.space.index("n1")
    n2 = CA.space.index("n2")
    (n12,) = CA.mul(CA.basis_element(n1), CA.basis_element(n2)).keys()
    ix, iy = A.space.index("x"), A.space.index("y")
    xi = MCElement(C, L.space, {(n1, ix): F(1), (n2, iy): F(1)})
    res = mc_residual(L, C, xi)
    m2 = L.brackets[2]
    # ordered tuples (1,2) and (2,1) each contribute -1/2 n1n2 (x) m2(x,y)
    expected = {}
    for k, v in m2.value_on_basis((ix, iy)).items():
        expected[(n12, k)] = -v
    assert res == expected


def test_mc_exponential_heisenberg_fixture():
    A, delta = heisenberg_algebra()
    C = next(c for c in cdga_zoo() if c.name == "dual-even")
    e = C.maximal_ideal[0]
    ixy = A.space.index("xy")
    res = mc_exponential_check(A, delta, C, MCElement(C, A.space, {(e, ixy): F(1)}))
    assert not res.bool_mc and not res.bool_cycle and res.agree
    res0 = mc_exponential_check(A, delta, C, MCElement(C, A.space, {}))
    assert res0.bool_mc and res0.bool_cycle and res0.agree


def test_mc_exponential_agreement_random():
    rng = random.Random(3)
    A, delta = heisenberg_algebra()
    B = exterior_algebra(["t1", "t2", "t3"])
    ops = [(A, delta)] + [(B, random_square_zero_operator(B, 3, rng)) for _ in range(2)]
    for C in cdga_zoo():
        for Aa, D in ops:
            for _ in range(3):
                xi = random_mc_element(C, Aa.space, rng)
                res = mc_exponential_check(Aa, D, C, xi)
                assert res.agree


def test_exp_morphism_identity_linear_part():
    A, delta = heisenberg_algebra()
    f = exp_morphism(A, delta, 4)
    f1 = multimap_to_operator(f.coeffs[1])
    assert f1.matrix == SparseMatrix.identity(A.dim)


def test_exp_morphism_equations():
    A, delta = heisenberg_algebra()
    f = exp_morphism(A, delta, 4)
    assert check_morphism(f, 4).ok
    rng = random.Random(4)
    B = exterior_algebra(["t1", "t2", "t3"])
    for _ in range(3):
        D = random_square_zero_operator(B, 3, rng)
        g = exp_morphism(B, D, 4)
        assert check_morphism(g, 4).ok


def test_broken_morphism_detected():
    A, delta = heisenberg_algebra()
    f = exp_morphism(A, delta, 4)
    coeffs = dict(f.coeffs)
    tbl = dict(coeffs[2].table)
    ix, iy = A.space.index("x"), A.space.index("y")
    # f2(x,y) = 2xy unbalances m'_1(f_2(x,y)) against f_1(m_2(x,y))
    tbl[(ix, iy)] = vec_scale(F(2), tbl[(ix, iy)])
    coeffs[2] = multimap_from_table(2, 0, A.space, tbl)
    g = LInftyMorphism(f.source, f.target, coeffs)
    assert not check_morphism(g, 3).ok


def test_contraction_zero_differential():
    W = SuperSpace(("a", "b"), (0, 1))
    c = contraction_of(W, LinearOperator(1, SparseMatrix.zero(2, 2)))
    assert c.h_space.dim == 2
    assert c.kappa.is_zero()
    assert (c.iota @ c.pi) == SparseMatrix.identity(2)


def test_contraction_two_term_iso():
    W = SuperSpace(("a", "b"), (0, 1))
    m1 = operator(W, 1, [(1, 0, F(2))])  # a -> 2b
    c = contraction_of(W, m1)
    assert c.h_space.dim == 0
    # kappa inverts m1 up to sign: homotopy identity forces -id = m1 k + k m1
    assert c.kappa.apply({1: F(1)}) == {0: F(-1, 2)}


def test_contraction_heisenberg_dims():
    A, delta = heisenberg_algebra()
    c = contraction_of(A.space, delta)
    assert c.h_space.dim == 6


def test_transfer_abelian():
    A = exterior_algebra(["a", "b"])
    rng = random.Random(5)
    D = random_square_zero_operator(A, 2, rng, conjugate=False)
    L = abelian_structure(A.space, D)
    c = contraction_of(L.space, L.m1_operator())
    T = transfer(L, c, 4)
    assert all(n not in T.brackets for n in range(2, 5))


def test_transfer_minimal_is_identity():
    L = heisenberg_dg_lie()
    c = contraction_of(L.space, L.m1_operator())
    T = transfer(L, c, 4)
    assert T.brackets[2].table == L.brackets[2].table
    assert 3 not in T.brackets and 4 not in T.brackets
    assert not is_homotopy_abelian_up_to(L, 4)


def test_transfer_soundness_and_morphism():
    rng = random.Random(6)
    A = exterior_algebra(["t1", "t2", "t3"])
    for _ in range(3):
        D = random_square_zero_operator(A, 3, rng)
        L = from_operator(A, D, 4)
        c = contraction_of(L.space, L.m1_operator())
        T, f = transfer_with_morphism(L, c, 4)
        assert check_relations(T, 4).ok
        assert check_morphism(f, 4).ok
        assert 1 not in T.brackets  # minimal


def test_homotopy_abelian_from_operator():
    rng = random.Random(7)
    for r in (2, 3):
        A = exterior_algebra([f"t{i}" for i in range(1, r + 1)])
        for _ in range(3):
            D = random_square_zero_operator(A, r, rng)
            L = from_operator(A, D, 4)
            assert is_homotopy_abelian_up_to(L, 4)


def test_mc_functoriality_of_exp_morphism():
    # mc verdicts agree between a structure and its image under the
    # exponential morphism, and actual MC elements push to MC elements
    rng = random.Random(8)
    A, delta = heisenberg_algebra()
    f = exp_morphism(A, delta, 4)
    for C in cdga_zoo():
        for _ in range(3):
            xi = random_mc_element(C, A.space, rng, density=0.3)
            lhs = not mc_residual(f.source, C, xi)
            rhs = not mc_residual(f.target, C, mc_pushforward(f, C, xi))
            assert lhs == rhs
    C = next(c for c in cdga_zoo() if c.name == "dual-odd")
    n = C.maximal_ideal[0]
    iz = A.space.index("z")
    xi = MCElement(C, A.space, {(n, iz): F(1)})  # Delta(z) = 0: MC
    assert mc_residual(f.source, C, xi) == {}
    assert mc_residual(f.target, C, mc_pushforward(f, C, xi)) == {}
