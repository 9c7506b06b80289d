"""Exact rational matrix arithmetic (small dense matrices, Fraction entries)."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

Matrix = tuple  # tuple of row tuples of Fraction


def mat(rows) -> Matrix:
    """Normalize nested lists / ints / strings like '5/4' into a Fraction matrix."""
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def identity(d: int) -> Matrix:
    return tuple(tuple(Fraction(1 if i == j else 0) for j in range(d)) for i in range(d))


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n, m, p = len(a), len(b), len(b[0])
    bt = tuple(zip(*b))
    return tuple(
        tuple(sum(a[i][k] * bt[j][k] for k in range(m)) for j in range(p))
        for i in range(n)
    )


def mat_pow(a: Matrix, n: int) -> Matrix:
    if n < 0:
        return mat_pow(mat_inv(a), -n)
    result = identity(len(a))
    base = a
    while n:
        if n & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        n >>= 1
    return result


def mat_det(a: Matrix) -> Fraction:
    # Fraction-exact Gaussian elimination; d is tiny so no pivot strategy needed
    d = len(a)
    m = [list(row) for row in a]
    det = Fraction(1)
    for col in range(d):
        pivot = next((r for r in range(col, d) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for r in range(col + 1, d):
            f = m[r][col] * inv
            if f:
                for c in range(col, d):
                    m[r][c] -= f * m[col][c]
    return det


def mat_inv(a: Matrix) -> Matrix:
    d = len(a)
    m = [list(row) + [Fraction(1 if i == j else 0) for j in range(d)] for i, row in enumerate(a)]
    for col in range(d):
        pivot = next((r for r in range(col, d) if m[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("singular matrix")
        m[col], m[pivot] = m[pivot], m[col]
        inv = 1 / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for r in range(d):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return tuple(tuple(row[d:]) for row in m)


def mat_transpose(a: Matrix) -> Matrix:
    return tuple(zip(*a))


def mat_eq(a: Matrix, b: Matrix) -> bool:
    return a == b


def to_float(a: Matrix) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in a], dtype=float)


def is_integer_matrix(a: Matrix) -> bool:
    return all(x.denominator == 1 for row in a for x in row)


def char_poly(a: Matrix) -> list[Fraction]:
    """Characteristic polynomial coefficients [1, c_{d-1}, ..., c_0] via Faddeev-LeVerrier."""
    d = len(a)
    coeffs = [Fraction(1)]
    m = identity(d)
    for k in range(1, d + 1):
        m = mat_mul(a, m)
        c = -Fraction(sum(m[i][i] for i in range(d)), k)
        coeffs.append(c)
        m = tuple(
            tuple(m[i][j] + (c if i == j else 0) for j in range(d))
            for i in range(d)
        )
    return coeffs


def serialize(a: Matrix) -> list[list[str]]:
    return [[str(x) for x in row] for row in a]


def deserialize(rows) -> Matrix:
    return mat(rows)
