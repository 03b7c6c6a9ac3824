"""Thomas algorithm for tridiagonal systems.

Works on plain Python sequences so the same code runs on floats and on
:class:`fractions.Fraction`.  No pivoting: callers must supply a diagonally
dominant matrix.
"""


def thomas(lower, diag, upper, rhs):
    """Solve ``A x = rhs`` for tridiagonal ``A``.

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` (``lower[0]`` ignored) and
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` ignored).
    """
    n = len(diag)
    if not (len(lower) == len(upper) == len(rhs) == n):
        raise ValueError("all bands and the rhs must have the same length")
    c = [None] * n
    d = [None] * n
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denom if i < n - 1 else 0
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom
    x = [None] * n
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def residual(lower, diag, upper, rhs, x):
    """Max-norm of ``A x - rhs``."""
    n = len(diag)
    worst = 0
    for i in range(n):
        r = diag[i] * x[i] - rhs[i]
        if i > 0:
            r += lower[i] * x[i - 1]
        if i < n - 1:
            r += upper[i] * x[i + 1]
        worst = max(worst, abs(r))
    return worst
