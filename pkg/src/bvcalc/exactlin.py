"""Exact rational linear algebra and module invariants over k[h]/(h^N).

Everything here is exact: scalars are ``fractions.Fraction``, all
comparisons are equalities.  Row reduction is delegated to the kernel
backend selected in :mod:`bvcalc._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from ._kernels import rref

Rational = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


class CompositeNotZeroError(ValueError):
    """Raised when d_out . d_in != 0 in a would-be complex."""


class NilpotencyError(ValueError):
    """Raised when an h-action is not nilpotent of the declared order."""


def parse_rational(s: str) -> Fraction:
    """Parse ``"p/q"`` or ``"p"`` exactly; rejects zero denominators."""
    s = s.strip()
    if "/" in s:
        p, q = s.split("/", 1)
        den = int(q)
        if den == 0:
            raise ValueError(f"zero denominator in rational {s!r}")
        return Fraction(int(p), den)
    return Fraction(int(s))


def format_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# sparse matrices


@dataclass(frozen=True)
class SparseMatrix:
    """Immutable sparse matrix over the rationals; no stored zeros."""

    nrows: int
    ncols: int
    entries: dict = field(default_factory=dict)  # (row, col) -> Fraction

    def __post_init__(self):
        for (r, c), v in self.entries.items():
            if not (0 <= r < self.nrows and 0 <= c < self.ncols):
                raise IndexError(f"entry ({r},{c}) outside {self.nrows}x{self.ncols}")
            if v == 0:
                raise ValueError(f"stored zero at ({r},{c})")

    @staticmethod
    def from_entries(nrows: int, ncols: int, items: Iterable[tuple[int, int, Fraction]]) -> "SparseMatrix":
        d: dict = {}
        for r, c, v in items:
            v = Fraction(v)
            w = d.get((r, c), ZERO) + v
            if w:
                d[(r, c)] = w
            else:
                d.pop((r, c), None)
        return SparseMatrix(nrows, ncols, d)

    @staticmethod
    def from_dense(rows: Sequence[Sequence]) -> "SparseMatrix":
        nrows = len(rows)
        ncols = len(rows[0]) if nrows else 0
        d = {}
        for r, row in enumerate(rows):
            for c, v in enumerate(row):
                v = Fraction(v)
                if v:
                    d[(r, c)] = v
        return SparseMatrix(nrows, ncols, d)

    @staticmethod
    def zero(nrows: int, ncols: int) -> "SparseMatrix":
        return SparseMatrix(nrows, ncols, {})

    @staticmethod
    def identity(n: int) -> "SparseMatrix":
        return SparseMatrix(n, n, {(i, i): ONE for i in range(n)})

    def __getitem__(self, rc: tuple[int, int]) -> Fraction:
        return self.entries.get(rc, ZERO)

    def is_zero(self) -> bool:
        return not self.entries

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.ncols, self.nrows, {(c, r): v for (r, c), v in self.entries.items()})

    def columns(self) -> dict:
        """col -> list of (row, value); rebuilt on demand."""
        cols: dict = {}
        for (r, c), v in self.entries.items():
            cols.setdefault(c, []).append((r, v))
        return cols

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise ValueError("shape mismatch")
        d = dict(self.entries)
        for k, v in other.entries.items():
            w = d.get(k, ZERO) + v
            if w:
                d[k] = w
            else:
                d.pop(k, None)
        return SparseMatrix(self.nrows, self.ncols, d)

    def __sub__(self, other: "SparseMatrix") -> "SparseMatrix":
        return self + other.scale(Fraction(-1))

    def scale(self, a: Fraction) -> "SparseMatrix":
        a = Fraction(a)
        if a == 0:
            return SparseMatrix.zero(self.nrows, self.ncols)
        return SparseMatrix(self.nrows, self.ncols, {k: a * v for k, v in self.entries.items()})

    def __matmul__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.ncols != other.nrows:
            raise ValueError("shape mismatch in composition")
        self_cols = self.columns()
        d: dict = {}
        for (k, j), b in other.entries.items():
            col = self_cols.get(k)
            if not col:
                continue
            for i, a in col:
                key = (i, j)
                w = d.get(key, ZERO) + a * b
                if w:
                    d[key] = w
                else:
                    d.pop(key, None)
        return SparseMatrix(self.nrows, other.ncols, d)

    def power(self, k: int) -> "SparseMatrix":
        if self.nrows != self.ncols:
            raise ValueError("power of non-square matrix")
        out = SparseMatrix.identity(self.nrows)
        for _ in range(k):
            out = self @ out
        return out

    def apply(self, vec: dict) -> dict:
        """Apply to a sparse vector (dict index -> Fraction)."""
        cols = self.columns()
        out: dict = {}
        for j, b in vec.items():
            for i, a in cols.get(j, ()):
                w = out.get(i, ZERO) + a * b
                if w:
                    out[i] = w
                else:
                    out.pop(i, None)
        return out

    def to_dense(self) -> list:
        return [[self.entries.get((r, c), ZERO) for c in range(self.ncols)] for r in range(self.nrows)]

    def _kernel_rows(self) -> list:
        rows: dict = {}
        for (r, c), v in self.entries.items():
            rows.setdefault(r, []).append((c, v.numerator, v.denominator))
        return [sorted(rows[r]) for r in sorted(rows)]

    def rref(self) -> tuple[list, list]:
        """Canonical reduced row echelon form: (pivot_cols, rows).

        Rows come back as tuples of Fractions of length ncols.
        """
        pivots, rows = rref(self.nrows, self.ncols, self._kernel_rows())
        out = []
        for triples in rows:
            v = [ZERO] * self.ncols
            for col, num, den in triples:
                v[col] = Fraction(num, den)
            out.append(tuple(v))
        return pivots, out

    def rank(self) -> int:
        pivots, _ = self.rref()
        return len(pivots)


def kernel_image(M: SparseMatrix) -> tuple[list, list]:
    """Canonical bases of ker(M) and im(M); rank + nullity = ncols."""
    pivots, rows = M.rref()
    pivset = set(pivots)
    free = [c for c in range(M.ncols) if c not in pivset]
    kernel = []
    for f in free:
        v = [ZERO] * M.ncols
        v[f] = ONE
        for pc, row in zip(pivots, rows):
            if row[f]:
                v[pc] = -row[f]
        kernel.append(tuple(v))
    _, image = M.transpose().rref()
    return kernel, image


def matrix_from_rows(rows: Sequence[Sequence[Fraction]], ncols: int) -> SparseMatrix:
    return SparseMatrix.from_entries(
        len(rows), ncols, ((r, c, v) for r, row in enumerate(rows) for c, v in enumerate(row) if v)
    )


def solve_columns(M: SparseMatrix, bs: Sequence[Sequence[Fraction]]) -> list:
    """Particular solutions of M x = b for each b (None when inconsistent).

    One row reduction of [M | I] is shared by all right-hand sides: each
    RREF row is E_r . [M | I] with E_r recorded in the identity block, so
    rows with a pivot in the M block read off x[pivot] = E_r b and rows
    with zero M block are consistency conditions E_r b = 0.
    """
    n, m = M.nrows, M.ncols
    aug = dict(M.entries)
    for i in range(n):
        aug[(i, m + i)] = ONE
    pivots, rows = SparseMatrix(n, m + n, aug).rref()
    sols = []
    for b in bs:
        support = [i for i, v in enumerate(b) if v]
        x = [ZERO] * m
        ok = True
        for pc, row in zip(pivots, rows):
            eb = sum((row[m + i] * b[i] for i in support), ZERO)
            if pc < m:
                x[pc] = eb
            elif eb:
                ok = False
                break
        sols.append(tuple(x) if ok else None)
    return sols


def reduce_against(v: Sequence[Fraction], pivots: Sequence[int], rows: Sequence[Sequence[Fraction]]) -> tuple:
    """Reduce v modulo the row space of an RREF basis."""
    w = list(v)
    for pc, row in zip(pivots, rows):
        c = w[pc]
        if c:
            for j, rv in enumerate(row):
                if rv:
                    w[j] -= c * rv
    return tuple(w)


# ---------------------------------------------------------------------------
# subquotients (homology of a two-step complex)


@dataclass(frozen=True)
class SubquotientSpace:
    """ker(d_out)/im(d_in) with a chosen section of the quotient."""

    ambient_dim: int
    kernel_basis: tuple  # RREF rows spanning ker(d_out)
    image_basis: tuple  # RREF rows spanning im(d_in), contained in the kernel
    section: tuple  # representatives of a complement of the image in the kernel

    @property
    def dim(self) -> int:
        return len(self.section)

    def project(self, v: Sequence[Fraction]) -> tuple:
        """Coordinates of a kernel vector in the section basis.

        Section rows vanish on the image pivot columns, so stripping the
        image part first leaves an exact section combination.
        """
        ip, ir = _rref_of_rows(self.image_basis, self.ambient_dim)
        w = list(reduce_against(v, ip, ir))
        coords = []
        for s in self.section:
            pc = next(j for j, x in enumerate(s) if x)
            c = w[pc] / s[pc]
            coords.append(c)
            if c:
                for j, x in enumerate(s):
                    if x:
                        w[j] -= c * x
        if any(w):
            raise ValueError("vector not in the kernel subspace")
        return tuple(coords)

    def lift(self, coords: Sequence[Fraction]) -> tuple:
        v = [ZERO] * self.ambient_dim
        for c, s in zip(coords, self.section):
            if c:
                for j, x in enumerate(s):
                    if x:
                        v[j] += c * x
        return tuple(v)


def _rref_of_rows(rows, ncols):
    if not rows:
        return [], []
    return matrix_from_rows(rows, ncols).rref()


def homology(d_in: SparseMatrix, d_out: SparseMatrix) -> SubquotientSpace:
    """Homology of  source --d_in--> middle --d_out--> target.

    Raises CompositeNotZeroError unless d_out . d_in = 0.
    """
    if d_in.nrows != d_out.ncols:
        raise ValueError("d_in target and d_out source dimension mismatch")
    comp = d_out @ d_in
    if not comp.is_zero():
        raise CompositeNotZeroError(f"d_out . d_in has {len(comp.entries)} nonzero entries")
    n = d_in.nrows
    kernel, _ = kernel_image(d_out)
    _, image = kernel_image(d_in)
    kp, kr = _rref_of_rows(kernel, n)
    ip, ir = _rref_of_rows(image, n)
    for row in ir:
        if any(reduce_against(row, kp, kr)):
            raise AssertionError("image not contained in kernel")
    ipset = set(ip)
    section = tuple(row for pc, row in zip(kp, kr) if pc not in ipset)
    if len(section) != len(kernel) - len(image):
        raise AssertionError("section construction out of step with rank count")
    return SubquotientSpace(n, tuple(kr), tuple(ir), section)


# ---------------------------------------------------------------------------
# modules over k[h]/(h^N)


@dataclass(frozen=True)
class TruncModule:
    """A k[h]/(h^N)-module given by a nilpotent h-action on a k-space."""

    N: int
    dim: int
    h_action: SparseMatrix

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("truncation order must be >= 1")
        if self.h_action.nrows != self.dim or self.h_action.ncols != self.dim:
            raise ValueError("h_action shape mismatch")


@dataclass(frozen=True)
class BlockInvariants:
    """Multiset of sizes of the indecomposable k[h]/(h^j) summands."""

    N: int
    sizes: tuple

    @property
    def is_free(self) -> bool:
        return all(s == self.N for s in self.sizes)

    def multiplicity(self, j: int) -> int:
        return sum(1 for s in self.sizes if s == j)


def block_invariants(M: TruncModule) -> BlockInvariants:
    """Jordan-type block sizes of the h-action.

    multiplicity(j) = rank(h^{j-1}) - 2 rank(h^j) + rank(h^{j+1}); the
    module is free over k[h]/(h^N) iff every size equals N.
    """
    ranks = [M.dim]
    power = SparseMatrix.identity(M.dim)
    for _ in range(M.N + 1):
        power = M.h_action @ power
        ranks.append(power.rank())
    if ranks[M.N] != 0:
        raise NilpotencyError(f"h^{M.N} has rank {ranks[M.N]}, expected 0")
    sizes = []
    for j in range(1, M.N + 1):
        mult = ranks[j - 1] - 2 * ranks[j] + ranks[j + 1]
        if mult < 0:
            raise AssertionError("rank sequence not convex")
        sizes.extend([j] * mult)
    if sum(sizes) != M.dim:
        raise AssertionError("block sizes do not fill the module")
    return BlockInvariants(M.N, tuple(sorted(sizes)))
