"""Exact integer lattice utilities: row Hermite form with transform,
integer kernels, membership and full-lattice tests.

Row convention throughout: a lattice is the set of integer combinations of
the ROWS of a matrix (lists of lists of ints).
"""

from __future__ import annotations

__all__ = [
    "hermite_with_transform",
    "integer_kernel",
    "lattice_contains",
    "is_full_lattice",
    "lattices_equal",
]


def hermite_with_transform(rows):
    """Row Hermite normal form H = U A with U unimodular.

    Returns (H, U).  H is in row echelon form with positive pivots, entries
    above each pivot reduced into [0, pivot).  Zero rows sink to the bottom.
    Deterministic.
    """
    H = [list(map(int, r)) for r in rows]
    m = len(H)
    n = len(H[0]) if m else 0
    U = [[1 if i == j else 0 for j in range(m)] for i in range(m)]
    row = 0
    for col in range(n):
        # find a nonzero entry in this column at or below `row`
        pivot_row = None
        for r in range(row, m):
            if H[r][col] != 0:
                pivot_row = r
                break
        if pivot_row is None:
            continue
        H[row], H[pivot_row] = H[pivot_row], H[row]
        U[row], U[pivot_row] = U[pivot_row], U[row]
        # kill the column below by Euclidean steps
        for r in range(row + 1, m):
            while H[r][col] != 0:
                q = H[row][col] // H[r][col]
                for k in range(n):
                    H[row][k] -= q * H[r][k]
                for k in range(m):
                    U[row][k] -= q * U[r][k]
                H[row], H[r] = H[r], H[row]
                U[row], U[r] = U[r], U[row]
        if H[row][col] < 0:
            H[row] = [-x for x in H[row]]
            U[row] = [-x for x in U[row]]
        # reduce entries above the pivot
        p = H[row][col]
        for r in range(row):
            q = H[r][col] // p
            if q:
                for k in range(n):
                    H[r][k] -= q * H[row][k]
                for k in range(m):
                    U[r][k] -= q * U[row][k]
        row += 1
        if row == m:
            break
    return H, U


def integer_kernel(matrix):
    """Basis (rows) of {x in Z^m : x A = 0} for an integer matrix A (m x n).

    The returned rows form an actual lattice basis of the kernel, not just a
    finite-index sublattice.
    """
    m = len(matrix)
    H, U = hermite_with_transform(matrix)
    return [U[i] for i in range(m) if all(v == 0 for v in H[i])]


def lattice_contains(basis_rows, x):
    """Is x an integer combination of the basis rows?"""
    if not basis_rows:
        return all(v == 0 for v in x)
    H, _ = hermite_with_transform(basis_rows)
    x = list(map(int, x))
    n = len(x)
    for row in H:
        if all(v == 0 for v in row):
            break
        col = next(i for i, v in enumerate(row) if v != 0)
        if x[col] != 0:
            if x[col] % row[col] != 0:
                return False
            q = x[col] // row[col]
            for k in range(n):
                x[k] -= q * row[k]
    return all(v == 0 for v in x)


def is_full_lattice(rows, ambient_rank):
    """Do the rows generate all of Z^ambient_rank as a group?"""
    if not rows:
        return ambient_rank == 0
    H, _ = hermite_with_transform(rows)
    nonzero = [r for r in H if any(v != 0 for v in r)]
    if len(nonzero) != ambient_rank:
        return False
    prod = 1
    for r in nonzero:
        col = next(i for i, v in enumerate(r) if v != 0)
        prod *= r[col]
    return abs(prod) == 1


def lattices_equal(rows_a, rows_b):
    """Do two row sets generate the same lattice?"""
    return all(lattice_contains(rows_b, r) for r in rows_a) and all(
        lattice_contains(rows_a, r) for r in rows_b
    )
