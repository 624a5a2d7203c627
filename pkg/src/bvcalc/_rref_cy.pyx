# cython: language_level=3, boundscheck=False, wraparound=False
"""Reduced row echelon form over the rationals, compiled backend.

Same algorithm and same canonical output as ``_rref_py``; entries are
arbitrary-precision Python ints, the speedup comes from compiling the
elimination loops.
"""

from math import gcd


cdef dict _combine(dict row, dict piv_row, object a, object b):
    cdef dict new = {}
    cdef object col, v, w, g
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
            new[col] = new[col] // g
    return new


cdef list _int_rows(list rows):
    cdef list out = []
    cdef dict d
    cdef object lcm, g, v
    for row in rows:
        if not row:
            continue
        lcm = 1
        for _, _, den in row:
            lcm = lcm // gcd(lcm, den) * den
        d = {}
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
                d[col] = d[col] // g
        out.append(d)
    return out


def rref(nrows, ncols, rows):
    """Return ``(pivot_cols, out_rows)`` for the canonical RREF."""
    cdef list work = _int_rows(list(rows))
    cdef list done = []
    cdef Py_ssize_t c, i, piv_idx
    cdef dict row, piv_row
    cdef object a
    for c in range(ncols):
        piv_idx = -1
        for i in range(len(work)):
            if c in (<dict>work[i]):
                piv_idx = i
                break
        if piv_idx < 0:
            continue
        piv_row = <dict>work.pop(piv_idx)
        a = piv_row[c]
        work = [
            _combine(<dict>r, piv_row, a, (<dict>r)[c]) if c in (<dict>r) else r
            for r in work
        ]
        work = [r for r in work if r]
        done = [
            (pc, _combine(<dict>r, piv_row, a, (<dict>r)[c]) if c in (<dict>r) else r)
            for pc, r in done
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
