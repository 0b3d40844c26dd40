"""Extended-precision (mpmath) evaluation of the flow and its entropy rate.

Used as an independent check of the double-precision dynamics: the state is
taken as exact, every step from spectrum to projection to dissipator is
recomputed at ``DPS`` digits, and ``dS/dt`` is obtained as a central finite
difference along the resulting ``drho/dt``. Near equilibrium the entropy
production is a tiny difference of much larger terms, which double precision
cannot resolve.
"""

from __future__ import annotations

import mpmath
import numpy as np

from .state import CLASSICAL, StateMatrix

DPS = 50
FD_STEP = "1e-20"
RANK_EPS = 1e-12
# elements whose normalised Gram eigenvalue falls below this are dependent
DEPENDENCE_TOL = 1e-10


def to_mp(a: np.ndarray) -> mpmath.matrix:
    a = np.asarray(a)
    m = mpmath.matrix(a.shape[0], a.shape[1])
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            z = complex(a[i, j])
            m[i, j] = mpmath.mpc(z.real, z.imag) if z.imag else mpmath.mpf(z.real)
    return m


def to_numpy(m: mpmath.matrix) -> np.ndarray:
    return np.array([[complex(m[i, j]) for j in range(m.cols)] for i in range(m.rows)])


def _diag(values) -> mpmath.matrix:
    return mpmath.diag(list(values))


def _hinner(a: mpmath.matrix, b: mpmath.matrix):
    """``Re Tr(A^dagger B)``."""
    total = mpmath.mpf(0)
    for i in range(a.rows):
        for j in range(a.cols):
            total += mpmath.re(mpmath.conj(a[i, j]) * b[i, j])
    return total


def _herm_eig(a: mpmath.matrix):
    """Eigenvalues (real, ascending) and eigenvector columns of a Hermitian matrix."""
    e, q = mpmath.eighe(a)
    lam = [mpmath.re(x) for x in e]
    order = sorted(range(len(lam)), key=lambda i: lam[i])
    qs = mpmath.matrix(q.rows, q.cols)
    for new, old in enumerate(order):
        for r in range(q.rows):
            qs[r, new] = q[r, old]
    return [lam[i] for i in order], qs


def _support(lam):
    top = max(lam)
    return [x > RANK_EPS * top for x in lam]


def _fn(lam, q, fn):
    support = _support(lam)
    vals = [fn(x) if s else mpmath.mpf(0) for x, s in zip(lam, support)]
    return q * _diag(vals) * q.H


def _residual(target, elements, scales):
    """``target`` minus its orthogonal projection onto ``span(elements)``."""
    keep = []
    for e, s in zip(elements, scales):
        if mpmath.sqrt(_hinner(e, e)) > RANK_EPS * s:
            keep.append(e)
    if not keep:
        return target
    n = len(keep)
    gram = mpmath.matrix(n, n)
    for i in range(n):
        for j in range(i, n):
            gram[i, j] = gram[j, i] = _hinner(keep[i], keep[j])
    norms = [mpmath.sqrt(gram[i, i]) for i in range(n)]
    normed = mpmath.matrix(n, n)
    for i in range(n):
        for j in range(n):
            normed[i, j] = gram[i, j] / (norms[i] * norms[j])
    w, v = mpmath.eigsy(normed)
    rhs = [_hinner(keep[i], target) / norms[i] for i in range(n)]
    wmax = max(w)
    coef = [mpmath.mpf(0)] * n
    for k in range(n):
        if w[k] <= DEPENDENCE_TOL * wmax:
            continue
        proj = sum(v[i, k] * rhs[i] for i in range(n)) / w[k]
        for i in range(n):
            coef[i] += v[i, k] * proj
    out = target
    for c, e, nm in zip(coef, keep, norms):
        out = out - (c / nm) * e
    return out


def _op_norm(a: mpmath.matrix):
    # only sets the scale of the negligible-element threshold; double suffices
    return mpmath.mpf(float(np.max(np.abs(np.linalg.eigvalsh(to_numpy(a))))))


def _eigvals(a: mpmath.matrix):
    return [mpmath.re(x) for x in mpmath.eighe(a, eigvals_only=True)]


def _single_dissipative(root, root_log, gens_mp, tau):
    elements = [root] + [root * g for g in gens_mp]
    scales = [mpmath.mpf(1)] + [_op_norm(g) for g in gens_mp]
    d = _residual(root_log, elements, scales)
    sym = root * d + d.H * root
    return d, -sym / (2 * tau)


def _entropy_of(lam, k):
    total = mpmath.mpf(0)
    for mu in lam:
        if mu > 0:
            total -= mu * mpmath.log(mu)
    return k * total


def _clean(rho: StateMatrix):
    """Exact spectral data of ``rho`` with kernel eigenvalues set to zero."""
    lam, q = _herm_eig(to_mp(rho.entries))
    lam = [x if s else mpmath.mpf(0) for x, s in zip(lam, _support(lam))]
    return lam, q


def _fd_rate(lam, q, rho_dot, k):
    """Central difference of ``S`` at ``diag(lam)`` along ``q^dagger rho_dot q``."""
    g = q.H * rho_dot * q
    g = (g + g.H) / 2
    base = _diag(lam)
    eps = mpmath.mpf(FD_STEP)
    plus = _entropy_of(_eigvals(base + eps * g), k)
    minus = _entropy_of(_eigvals(base - eps * g), k)
    return (plus - minus) / (2 * eps)


def single_rate(rho: StateMatrix, generators, tau: float = 1.0, k: float = 1.0,
                hbar: float = 1.0) -> tuple[float, float]:
    """``(dS/dt by finite difference, (k/tau) ||D||^2)`` in extended precision."""
    with mpmath.workdps(DPS):
        if rho.backend == CLASSICAL:
            return _classical_rate(rho, generators, tau, k)
        lam, q = _clean(rho)
        rho_mp = q * _diag(lam) * q.H
        root = _fn(lam, q, mpmath.sqrt)
        root_log = _fn(lam, q, lambda x: mpmath.sqrt(x) * mpmath.log(x))
        gens_mp = [to_mp(g) for g in generators]
        d, diss = _single_dissipative(root, root_log, gens_mp, tau)
        h = gens_mp[0]
        comm = (h * rho_mp - rho_mp * h) * mpmath.mpc(0, -1) / hbar
        rate = _fd_rate(lam, q, diss + comm, k)
        return float(rate), float(k / tau * _hinner(d, d))


def _classical_rate(rho, generators, tau, k):
    p = [mpmath.mpf(float(x)) for x in rho.entries]
    top = max(p)
    p = [x if x > RANK_EPS * top else mpmath.mpf(0) for x in p]
    root = [mpmath.sqrt(x) for x in p]
    root_log = [mpmath.sqrt(x) * mpmath.log(x) if x > 0 else mpmath.mpf(0) for x in p]
    col = lambda v: mpmath.matrix([[x] for x in v])  # noqa: E731
    gens = [[mpmath.mpf(float(x)) for x in np.real(g)] for g in generators]
    elements = [col(root)] + [col([r * x for r, x in zip(root, g)]) for g in gens]
    scales = [mpmath.mpf(1)] + [max(abs(x) for x in g) for g in gens]
    d = _residual(col(root_log), elements, scales)
    diss = [-root[i] * d[i] / tau for i in range(len(p))]
    eps = mpmath.mpf(FD_STEP)
    plus = _entropy_of([a + eps * b for a, b in zip(p, diss)], k)
    minus = _entropy_of([a - eps * b for a, b in zip(p, diss)], k)
    return float((plus - minus) / (2 * eps)), float(k / tau * _hinner(d, d))


def _partial_trace(x, keep, da, db):
    n = da if keep == "A" else db
    out = mpmath.matrix(n, n)
    for i in range(n):
        for j in range(n):
            if keep == "A":
                out[i, j] = sum(x[i * db + m, j * db + m] for m in range(db))
            else:
                out[i, j] = sum(x[m * db + i, m * db + j] for m in range(da))
    return out


def _reduced(x, rho_a, rho_b, which, da, db):
    """``Tr_B[(I x rho_B) X]`` or ``Tr_A[(rho_A x I) X]``."""
    if which == "A":
        out = mpmath.matrix(da, da)
        for i in range(da):
            for j in range(da):
                out[i, j] = sum(rho_b[kk, ll] * x[i * db + ll, j * db + kk]
                                for kk in range(db) for ll in range(db))
    else:
        out = mpmath.matrix(db, db)
        for kk in range(db):
            for ll in range(db):
                out[kk, ll] = sum(rho_a[i, m] * x[m * db + kk, i * db + ll]
                                  for i in range(da) for m in range(da))
    return (out + out.H) / 2


def _kron(a, b):
    out = mpmath.matrix(a.rows * b.rows, a.cols * b.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            for kk in range(b.rows):
                for ll in range(b.cols):
                    out[i * b.rows + kk, j * b.cols + ll] = a[i, j] * b[kk, ll]
    return out


def composite_rate(rho: StateMatrix, h: np.ndarray, dims, tau_a: float = 1.0, tau_b: float = 1.0,
                   k: float = 1.0, hbar: float = 1.0) -> tuple[float, float]:
    """Composite analogue of :func:`single_rate`."""
    da, db = dims
    with mpmath.workdps(DPS):
        lam, q = _clean(rho)
        rho_mp = q * _diag(lam) * q.H
        h_mp = to_mp(h)
        s_op = _fn(lam, q, lambda x: -k * mpmath.log(x))
        rho_a = _partial_trace(rho_mp, "A", da, db)
        rho_b = _partial_trace(rho_mp, "B", da, db)
        parts = []
        for which, sub, tau in (("A", rho_a, tau_a), ("B", rho_b, tau_b)):
            sl, sq = _herm_eig((sub + sub.H) / 2)
            root = _fn(sl, sq, mpmath.sqrt)
            h_eff = _reduced(h_mp, rho_a, rho_b, which, da, db)
            s_eff = _reduced(s_op, rho_a, rho_b, which, da, db)
            d = _residual(root * s_eff, [root, root * h_eff], [mpmath.mpf(1), _op_norm(h_eff)])
            sym = root * d + d.H * root
            parts.append((d, sym / (2 * k * tau)))
        (d_a, sym_a), (d_b, sym_b) = parts
        diss = _kron(sym_a, rho_b) + _kron(rho_a, sym_b)
        comm = (h_mp * rho_mp - rho_mp * h_mp) * mpmath.mpc(0, -1) / hbar
        rate = _fd_rate(lam, q, diss + comm, k)
        prod = _hinner(d_a, d_a) / (k * tau_a) + _hinner(d_b, d_b) / (k * tau_b)
        return float(rate), float(prod)
