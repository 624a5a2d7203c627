"""Shared randomized constructions for the test suite."""

from fractions import Fraction

from bvcalc.superalg import (
    conjugate_operator,
    exterior_algebra,
    exterior_derivation,
    exterior_subsets,
    operator,
)

F = Fraction


def heisenberg_algebra():
    """Lambda(x,y,z) together with the CE boundary xy -> z."""
    A = exterior_algebra(["x", "y", "z"])
    delta = operator(A.space, 1, [(A.space.index("z"), A.space.index("xy"), F(1))])
    return A, delta


def square_zero_derivation(A, r, rng):
    """alpha d/d(theta_1) with alpha even and free of theta_1: squares to zero."""
    subsets = exterior_subsets(r)
    alpha = {}
    for i, S in enumerate(subsets):
        if len(S) % 2 or 0 in S:
            continue
        if rng.random() < 0.6:
            v = F(rng.randint(-2, 2))
            if v:
                alpha[i] = v
    images = [alpha] + [{} for _ in range(r - 1)]
    return exterior_derivation(A, r, images, 1)


def nilpotent_even_derivation(A, r, rng):
    """Derivation raising word length by >= 2; its exponential is finite."""
    subsets = exterior_subsets(r)
    images = []
    for _ in range(r):
        img = {}
        for i, S in enumerate(subsets):
            if len(S) < 3 or len(S) % 2 == 0:
                continue
            if rng.random() < 0.4:
                v = F(rng.randint(-2, 2))
                if v:
                    img[i] = v
        images.append(img)
    return exterior_derivation(A, r, images, 0)


def random_square_zero_operator(A, r, rng, conjugate=True):
    """Odd D with D^2 = 0 and D(1) = 0, generically not a derivation."""
    D = square_zero_derivation(A, r, rng)
    if conjugate and r >= 3:
        delta = nilpotent_even_derivation(A, r, rng)
        D = conjugate_operator(D, delta)
    assert (D.matrix @ D.matrix).is_zero()
    assert not D(A.unit)
    return D


def random_exterior_derivation(A, r, rng, parity):
    """Random derivation of Lambda_r with the given parity."""
    subsets = exterior_subsets(r)
    target_parity = (1 + parity) % 2
    images = []
    for _ in range(r):
        img = {}
        for i, S in enumerate(subsets):
            if len(S) % 2 != target_parity:
                continue
            if rng.random() < 0.3:
                v = F(rng.randint(-2, 2))
                if v:
                    img[i] = v
        images.append(img)
    return exterior_derivation(A, r, images, parity)


def random_order_two_gauge(A, r, rng):
    """Random even operator of order <= 2 killing 1.

    Sums of products of two derivations of equal parity plus
    multiplication-composed derivations; every term kills 1.
    """
    from bvcalc.exactlin import SparseMatrix
    from bvcalc.superalg import LinearOperator, random_element

    acc = SparseMatrix.zero(A.dim, A.dim)
    for _ in range(2):
        p = rng.choice((0, 1))
        d1 = random_exterior_derivation(A, r, rng, p)
        d2 = random_exterior_derivation(A, r, rng, p)
        acc = acc + d1.matrix @ d2.matrix
    p = rng.choice((0, 1))
    u = random_element(A, rng, parity=p)
    if u:
        d = random_exterior_derivation(A, r, rng, p)
        acc = acc + A.mult_operator(u) @ d.matrix
    return LinearOperator(0, acc)


def perturb_operator(A, D, rng):
    """Add one random parity-consistent entry off the unit column.

    Keeps D(1) = 0 so a failed square-zero condition is the only defect.
    """
    space = A.space
    while True:
        r_i = rng.randrange(space.dim)
        c_i = rng.randrange(1, space.dim)
        if space.parities[r_i] != (space.parities[c_i] + D.parity) % 2:
            continue
        bump = operator(space, D.parity, [(r_i, c_i, F(rng.randint(1, 3)))])
        return D + bump
