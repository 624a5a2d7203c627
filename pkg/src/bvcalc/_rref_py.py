"""Reduced row echelon form over the rationals, pure-Python backend.

Rows travel as sorted ``(col, num, den)`` triples with ``den > 0`` and
``gcd(num, den) == 1``.  Internally each row is scaled to a primitive
integer vector and reduced by Gauss-Jordan elimination with a gcd
normalisation after every combination step, which keeps intermediate
entries small.  The RREF of a matrix is unique, so this backend and the
compiled one must produce identical output; the test suite and the
benchmark both rely on that.
"""

from __future__ import annotations

from math import gcd


def _int_rows(rows):
    out = []
    for row in rows:
        if not row:
            continue
        lcm = 1
        for _, _, den in row:
            lcm = lcm // gcd(lcm, den) * den
        d = dict()
        g = 0
        for col, num, den in row:
            v = num * (lcm // den)
            if v:
                d[col] = v
                g = gcd(g, v)
        if not d:
            continue
        if g > 1:
            for col in d:
                d[col] //= g
        out.append(d)
    return out


def _combine(row, piv_row, a, b):
    # a*row - b*piv_row, gcd-reduced
    new = {}
    for col, v in row.items():
        new[col] = a * v
    for col, v in piv_row.items():
        w = new.get(col, 0) - b * v
        if w:
            new[col] = w
        else:
            new.pop(col, None)
    g = 0
    for v in new.values():
        g = gcd(g, v)
    if g > 1:
        for col in new:
            new[col] //= g
    return new


def rref(nrows, ncols, rows):
    """Return ``(pivot_cols, out_rows)`` for the canonical RREF.

    ``out_rows[i]`` is the reduced row whose pivot sits in
    ``pivot_cols[i]``; pivot entries are 1 and zero rows are dropped.
    """
    work = _int_rows(rows)
    done = []  # (pivot_col, row dict)
    for c in range(ncols):
        piv_idx = -1
        for i, row in enumerate(work):
            if c in row:
                piv_idx = i
                break
        if piv_idx < 0:
            continue
        piv_row = work.pop(piv_idx)
        a = piv_row[c]
        work = [
            _combine(row, piv_row, a, row[c]) if c in row else row for row in work
        ]
        work = [row for row in work if row]
        done = [
            (pc, _combine(row, piv_row, a, row[c]) if c in row else row)
            for pc, row in done
        ]
        done.append((c, piv_row))
    done.sort(key=lambda t: t[0])
    pivot_cols = [pc for pc, _ in done]
    out_rows = []
    for pc, row in done:
        piv = row[pc]
        triples = []
        for col in sorted(row):
            num, den = row[col], piv
            if den < 0:
                num, den = -num, -den
            g = gcd(num, den)
            triples.append((col, num // g, den // g))
        out_rows.append(triples)
    return pivot_cols, out_rows
