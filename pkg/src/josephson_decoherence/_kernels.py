"""Compiled master-equation right-hand side (only the valid (M+1)x(M+1) corners)."""
import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


def _rhs(rho, M_lo, hd, ho, sp, ew, gainL, gainR, g1, g2, out):
    B, D, _ = rho.shape
    A = np.zeros((D, D), dtype=np.complex128)
    C = np.zeros((D, D), dtype=np.complex128)
    for b in range(B):
        n = M_lo + b + 1
        r = rho[b]
        o = out[b]
        for i in range(n):
            for j in range(n):
                hr = hd[b, i] * r[i, j]
                if i + 1 < n:
                    hr += ho[b, i] * r[i + 1, j]
                if i > 0:
                    hr += ho[b, i - 1] * r[i - 1, j]
                rh = r[i, j] * hd[b, j]
                if j > 0:
                    rh += r[i, j - 1] * ho[b, j - 1]
                if j + 1 < n:
                    rh += r[i, j + 1] * ho[b, j]
                o[i, j] = -1j * (hr - rh) + ew[b, i, j] * r[i, j]
        for gamma, cu, cl in ((g1, 0.5 + 0j, 0.5 + 0j), (g2, -0.5j, 0.5j)):
            if gamma == 0.0:
                continue
            # A = S r, C = r S with S tridiagonal (up = cu*sp, lo = cl*sp)
            for i in range(n):
                for j in range(n):
                    a = 0j
                    c = 0j
                    if i + 1 < n:
                        a += cu * sp[b, i] * r[i + 1, j]
                    if i > 0:
                        a += cl * sp[b, i - 1] * r[i - 1, j]
                    if j > 0:
                        c += r[i, j - 1] * cu * sp[b, j - 1]
                    if j + 1 < n:
                        c += r[i, j + 1] * cl * sp[b, j]
                    A[i, j] = a
                    C[i, j] = c
            for i in range(n):
                for j in range(n):
                    sa = 0j
                    cs = 0j
                    as_ = 0j
                    if i + 1 < n:
                        sa += cu * sp[b, i] * A[i + 1, j]
                    if i > 0:
                        sa += cl * sp[b, i - 1] * A[i - 1, j]
                    if j > 0:
                        cs += C[i, j - 1] * cu * sp[b, j - 1]
                        as_ += A[i, j - 1] * cu * sp[b, j - 1]
                    if j + 1 < n:
                        cs += C[i, j + 1] * cl * sp[b, j]
                        as_ += A[i, j + 1] * cl * sp[b, j]
                    o[i, j] -= gamma * (sa + cs - 2 * as_)
        if b + 1 < B:
            r1 = rho[b + 1]
            for i in range(n):
                for j in range(n):
                    o[i, j] += gainL[b + 1, i, j] * r1[i, j] + gainR[b + 1, i + 1, j + 1] * r1[i + 1, j + 1]
    return out


rhs_compiled = njit(cache=True, nogil=True)(_rhs) if njit is not None else None
