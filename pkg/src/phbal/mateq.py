"""Dense matrix-equation kernels.

This module is the numerical engine of the package: Lyapunov solves,
stabilizing/anti-stabilizing Riccati solves (Hamiltonian Schur form with a
Newton polish, plus a QZ pencil variant for equations with indefinite weight
and cross terms), the H-infinity norm, and semidefinite factorizations.

All routines work on plain 2-D ``numpy`` arrays and are pure functions of
their inputs.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    DimensionMismatch,
    IllConditioned,
    NoStabilizingSolution,
    NotConverged,
    NotPsd,
    SingularSylvester,
    UnstableSystem,
)

__all__ = [
    "SolverTolerances",
    "DEFAULT_TOL",
    "PsdFactor",
    "solve_lyapunov",
    "solve_care",
    "solve_care_general",
    "hinf_norm",
    "psd_factor",
    "is_psd",
    "spectral_abscissa",
]

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverTolerances:
    """Relative tolerances shared by the dense solvers.

    riccati_residual_rel
        Certified relative residual for Lyapunov/Riccati solves.
    psd_floor_rel
        Most negative admissible eigenvalue (relative) before a matrix is
        rejected as not PSD.
    hinf_rel
        Relative accuracy of the computed H-infinity norm.
    rank_rel
        Relative cut-off for numerical rank decisions.
    """

    riccati_residual_rel: float = 1e-10
    psd_floor_rel: float = 1e-8
    hinf_rel: float = 1e-6
    rank_rel: float = 1e-11

    def __post_init__(self):
        for name in ("riccati_residual_rel", "psd_floor_rel", "hinf_rel", "rank_rel"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_TOL = SolverTolerances()


@dataclass(frozen=True)
class PsdFactor:
    """Full-row-rank factor of a symmetric PSD matrix, S = factor^T factor."""

    factor: np.ndarray  # (k, n), rows linearly independent
    rank: int
    tolerance: float

    @property
    def cols(self):
        return self.factor.shape[1]


def _sym(x):
    return 0.5 * (x + x.T)


def _fro(x):
    return float(np.linalg.norm(x, "fro")) if x.size else 0.0


def _as_square(a, name="A"):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return a


def spectral_abscissa(a):
    """Largest real part of the eigenvalues of ``a``."""
    a = _as_square(a)
    if a.shape[0] == 0:
        return -np.inf
    return float(np.max(np.real(sla.eigvals(a))))


def is_psd(s, tol=1e-8):
    """True iff ``lambda_min(sym(s)) >= -tol * max(||s||_2, 1)``."""
    s = _sym(_as_square(s, "S"))
    if s.shape[0] == 0:
        return True
    w = sla.eigvalsh(s)
    return bool(w[0] >= -tol * max(abs(w[0]), abs(w[-1]), 1.0))


def _lyap_residual(a, x, w):
    return a @ x + x @ a.T + w


def solve_lyapunov(a, w, tol=None):
    """Solve the continuous Lyapunov equation ``A X + X A^T + W = 0``.

    Uses Bartels--Stewart on the real Schur form (via SciPy), followed by at
    most two steps of iterative refinement so that the Frobenius residual is
    below ``riccati_residual_rel * (||A|| ||X|| + ||W||)``.

    Parameters
    ----------
    a : (n, n) array
        Coefficient matrix; must have no eigenvalue pairing
        ``lambda_i + conj(lambda_j) = 0`` (in practice: asymptotically stable).
    w : (n, n) array
        Symmetric constant term.
    tol : SolverTolerances, optional

    Returns
    -------
    (n, n) array, symmetrized on return.
    """
    tol = tol or DEFAULT_TOL
    a = _as_square(a)
    w = _sym(_as_square(w, "W"))
    if a.shape != w.shape:
        raise DimensionMismatch(f"A {a.shape} and W {w.shape} must agree")
    if a.shape[0] == 0:
        return np.zeros((0, 0))

    try:
        with warnings.catch_warnings():
            # scipy perturbs the coefficients when lambda_i + conj(lambda_j) ~ 0
            # and only warns; that silent perturbation is an error here
            warnings.simplefilter("error", RuntimeWarning)
            x = sla.solve_continuous_lyapunov(a, -w)
    except RuntimeWarning as exc:
        raise SingularSylvester(f"Lyapunov operator singular: {exc}") from exc
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSylvester(f"Lyapunov solve failed: {exc}") from exc

    def thresh(x):
        return tol.riccati_residual_rel * (_fro(a) * _fro(x) + _fro(w))

    res = _lyap_residual(a, x, w)
    for _ in range(2):
        if _fro(res) <= thresh(x) or not np.all(np.isfinite(x)):
            break
        x = x + sla.solve_continuous_lyapunov(a, res)
        res = _lyap_residual(a, x, w)

    if not np.all(np.isfinite(x)):
        raise SingularSylvester("Lyapunov solution is non-finite")
    if _fro(res) > thresh(x):
        ev = sla.eigvals(a)
        pair = np.min(np.abs(ev[:, None] + ev[None, :].conj()))
        if pair <= 1e3 * _EPS * max(_fro(a), 1.0):
            raise SingularSylvester(
                f"eigenvalue pairing lambda_i + conj(lambda_j) ~ 0 (min {pair:.2e})"
            )
        raise NotConverged(
            f"Lyapunov residual {_fro(res):.2e} above threshold {thresh(x):.2e}"
        )
    return _sym(x)


def _quasi_tri_eigvals(t):
    """Eigenvalues of a real quasi-upper-triangular (Schur) matrix."""
    n = t.shape[0]
    ev = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > 0.0:
            ev.extend(np.linalg.eigvals(t[i : i + 2, i : i + 2]))
            i += 2
        else:
            ev.append(t[i, i] + 0.0j)
            i += 1
    return np.asarray(ev)


def _care_residual(a, g, qw, p):
    return a.T @ p + p @ a - p @ g @ p + qw


def _newton_refine(a, g, qw, p, thresh, max_steps=8):
    """Kleinman-type Newton correction steps for the standard CARE."""
    res = _care_residual(a, g, qw, p)
    rn = _fro(res)
    for _ in range(max_steps):
        if rn <= thresh or not np.isfinite(rn):
            break
        acl = a - g @ p
        try:
            delta = sla.solve_continuous_lyapunov(acl.T, res)
        except (np.linalg.LinAlgError, ValueError):
            break
        p_new = _sym(p + delta)
        res_new = _care_residual(a, g, qw, p_new)
        rn_new = _fro(res_new)
        if not np.isfinite(rn_new) or rn_new >= rn:
            break
        p, res, rn = p_new, res_new, rn_new
    return p, rn


def _care_scale(a, g, qw, p):
    return max(
        _fro(a.T @ p) + _fro(p @ a) + _fro(p @ g @ p) + _fro(qw),
        1.0,
    )


def solve_care(a, b, qw, mode="stabilizing", k0=None, tol=None):
    """Solve ``A^T P + P A - P B B^T P + Qw = 0``.

    The default path orders the real Schur form of the 2n x 2n Hamiltonian
    matrix (eigenvalue selection by ``mode``) and polishes the extracted
    solution with Newton-Kleinman steps until the residual is certified.
    When an initial stabilizing feedback ``k0`` is supplied (mode
    ``stabilizing`` only), a pure Newton-Kleinman iteration started from
    ``A - B k0`` is used instead, which only needs n x n Lyapunov solves.

    Parameters
    ----------
    a : (n, n) array
    b : (n, m) array
    qw : (n, n) array
        Symmetric constant term.
    mode : {"stabilizing", "antistabilizing"}
        Sign of the real parts of the closed-loop spectrum of ``A - B B^T P``.
    k0 : (m, n) array, optional
        Initial feedback with ``A - B k0`` asymptotically stable.
    tol : SolverTolerances, optional

    Returns
    -------
    (n, n) symmetric array.
    """
    tol = tol or DEFAULT_TOL
    a = _as_square(a)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"B has {b.shape[0]} rows, expected {a.shape[0]}")
    qw = _sym(_as_square(qw, "Qw"))
    if mode not in ("stabilizing", "antistabilizing"):
        raise ValueError(f"unknown mode {mode!r}")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    g = b @ b.T

    p = None
    if k0 is not None and mode == "stabilizing":
        k = np.atleast_2d(np.asarray(k0, dtype=float))
        if spectral_abscissa(a - b @ k) < 0.0:
            p = _kleinman(a, b, g, qw, k, tol)
            if p is None:
                log.debug("Newton-Kleinman stalled; falling back to Hamiltonian Schur")
        else:
            log.debug("supplied k0 is not stabilizing; using Hamiltonian Schur")

    if p is None:
        p = _care_hamiltonian(a, g, qw, mode, tol)

    thresh = tol.riccati_residual_rel * _care_scale(a, g, qw, p)
    p, rn = _newton_refine(a, g, qw, p, thresh)
    if rn > thresh:
        raise NotConverged(f"CARE residual {rn:.2e} above threshold {thresh:.2e}")

    alpha = spectral_abscissa(a - g @ p)
    margin = 1e-8 * max(1.0, _fro(a))
    if mode == "stabilizing" and alpha > margin:
        raise NoStabilizingSolution(f"closed loop not stable (abscissa {alpha:.2e})")
    if mode == "antistabilizing" and alpha < -margin and n > 0:
        ev = sla.eigvals(a - g @ p)
        if np.min(np.real(ev)) < -margin:
            raise NoStabilizingSolution(
                f"closed loop not anti-stable (min real part {np.min(np.real(ev)):.2e})"
            )
    return p


def _kleinman(a, b, g, qw, k, tol, max_iter=60):
    """Newton-Kleinman iteration from a stabilizing feedback. None on stall."""
    thresh = None
    p = None
    rn_prev = np.inf
    for _ in range(max_iter):
        acl = a - b @ k
        try:
            p = _sym(sla.solve_continuous_lyapunov(acl.T, -(qw + k.T @ k)))
        except (np.linalg.LinAlgError, ValueError):
            return None
        k = b.T @ p
        rn = _fro(_care_residual(a, g, qw, p))
        thresh = tol.riccati_residual_rel * _care_scale(a, g, qw, p)
        if rn <= thresh:
            return p
        if rn >= rn_prev * (1.0 - 1e-12) and rn < 1e-6 * _care_scale(a, g, qw, p):
            # quadratic phase exhausted; hand over to the polish step
            return p
        rn_prev = rn
    return p if (thresh is not None and rn_prev < np.sqrt(thresh)) else None


def _care_hamiltonian(a, g, qw, mode, tol):
    """Extract the CARE solution from the ordered Schur form of the Hamiltonian."""
    n = a.shape[0]
    h = np.block([[a, -g], [-qw, -a.T]])
    sort = "lhp" if mode == "stabilizing" else "rhp"
    try:
        t, z, sdim = sla.schur(h, output="real", sort=sort)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NoStabilizingSolution(f"Schur decomposition failed: {exc}") from exc

    ev = _quasi_tri_eigvals(t)
    axis_tol = 1e3 * _EPS * max(_fro(h), 1.0)
    if sdim != n or np.min(np.abs(ev.real)) <= axis_tol:
        raise NoStabilizingSolution(
            f"Hamiltonian has eigenvalues on the imaginary axis "
            f"(selected {sdim} of {n}, min |Re| {np.min(np.abs(ev.real)):.2e})"
        )
    u1 = z[:n, :n]
    u2 = z[n:, :n]
    cond = np.linalg.cond(u1)
    if not np.isfinite(cond) or cond > 1.0 / np.sqrt(_EPS):
        raise IllConditioned(f"invariant subspace extraction cond(U1) = {cond:.2e}")
    p = sla.solve(u1.T, u2.T).T
    return _sym(p)


def solve_care_general(a, b, qw, rw, sw, mode="stabilizing", tol=None):
    """Solve ``A^T X + X A + Qw - (X B + S) Rw^{-1} (B^T X + S^T) = 0``.

    Deflating-subspace method on the extended (2n+m) pencil

        M - lambda N,  M = [[A, 0, B], [-Qw, -A^T, -S], [S^T, B^T, Rw]],
                       N = blkdiag(I, I, 0),

    which keeps the data well scaled even for nearly singular ``Rw`` (the
    regularized passivity Riccati equation uses ``Rw = -eps I``).  Eigenvalue
    selection: ``stabilizing`` picks the n generalized eigenvalues in the open
    left half-plane, so that ``A - B Rw^{-1} (B^T X + S^T)`` is stable;
    ``antistabilizing`` picks the right half-plane.

    Returns the symmetric solution ``X``.
    """
    tol = tol or DEFAULT_TOL
    a = _as_square(a)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    n = a.shape[0]
    m = b.shape[1]
    qw = _sym(_as_square(qw, "Qw"))
    rw = _sym(np.atleast_2d(np.asarray(rw, dtype=float)))
    sw = np.atleast_2d(np.asarray(sw, dtype=float))
    if b.shape[0] != n or sw.shape != (n, m) or rw.shape != (m, m):
        raise DimensionMismatch("inconsistent CARE pencil dimensions")

    mm = np.block(
        [
            [a, np.zeros((n, n)), b],
            [-qw, -a.T, -sw],
            [sw.T, b.T, rw],
        ]
    )
    nn = np.zeros_like(mm)
    nn[: 2 * n, : 2 * n] = np.eye(2 * n)

    sort = "lhp" if mode == "stabilizing" else "rhp"
    try:
        _, _, alpha, beta, _, z = sla.ordqz(mm, nn, sort=sort, output="real")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NoStabilizingSolution(f"QZ decomposition failed: {exc}") from exc

    with np.errstate(divide="ignore", invalid="ignore"):
        lam = alpha / beta
    finite = np.isfinite(lam)
    selected = finite & ((lam.real < 0.0) if sort == "lhp" else (lam.real > 0.0))
    if int(np.sum(selected)) != n:
        raise NoStabilizingSolution(
            f"pencil selected {int(np.sum(selected))} eigenvalues, expected {n}"
        )
    u = z[:, :n]
    u1 = u[:n]
    u2 = u[n : 2 * n]
    cond = np.linalg.cond(u1)
    if not np.isfinite(cond) or cond > 1.0 / np.sqrt(_EPS):
        raise IllConditioned(f"deflating subspace extraction cond(U1) = {cond:.2e}")
    x = _sym(sla.solve(u1.T, u2.T).T)

    res = a.T @ x + x @ a + qw - (x @ b + sw) @ sla.solve(rw, (x @ b + sw).T)
    scale = max(_fro(a.T @ x) + _fro(x @ a) + _fro(qw), 1.0)
    # the near-singular Rw amplifies rounding in the residual evaluation
    if _fro(res) > 1e-6 * scale * max(1.0, np.linalg.cond(rw) * _EPS):
        raise NotConverged(f"pencil CARE residual {_fro(res):.2e} (scale {scale:.2e})")
    return x


def _gain_at(a, b, c, d, w):
    """sigma_max of C (iw I - A)^{-1} B + D."""
    n = a.shape[0]
    try:
        x = sla.solve(1j * w * np.eye(n) - a, b)
    except (np.linalg.LinAlgError, ValueError):
        return np.inf
    return float(np.linalg.norm(c @ x + d, 2))


def _hinf_hamiltonian(a, b, c, d, gamma):
    """Hamiltonian test matrix whose imaginary eigenvalues mark sigma crossings."""
    m = b.shape[1]
    p = c.shape[0]
    r = d.T @ d - gamma**2 * np.eye(m)
    s = d @ d.T - gamma**2 * np.eye(p)
    rbtc = sla.solve(r, d.T @ c)
    core = a - b @ rbtc
    return np.block(
        [
            [core, -gamma * b @ sla.solve(r, b.T)],
            [gamma * c.T @ sla.solve(s, c), -core.T],
        ]
    )


def hinf_norm(a, b, c, d=None, tol=None, max_iter=60):
    """H-infinity norm of ``G(s) = C (sI - A)^{-1} B + D`` for stable ``A``.

    Bisection-type iteration on the level gamma with the classical test
    "the Hamiltonian matrix of (A, B, C, D; gamma) has purely imaginary
    eigenvalues"; the lower bound is seeded from the gain at zero frequency,
    at the weakly damped pole frequencies and on a logarithmic grid, and is
    tightened from the frequencies returned by each failed test.

    Returns gamma with ``|gamma - ||G||_inf| <= hinf_rel * gamma``.
    """
    tol = tol or DEFAULT_TOL
    a = _as_square(a)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    n = a.shape[0]
    if b.size == 0 and n > 0:
        b = b.reshape(n, -1)
    if c.size == 0 and n > 0:
        c = c.reshape(-1, n)
    m = b.shape[1]
    p = c.shape[0]
    d = np.zeros((p, m)) if d is None else np.atleast_2d(np.asarray(d, dtype=float))
    if d.shape != (p, m):
        raise DimensionMismatch(f"D must be {(p, m)}, got {d.shape}")
    if m == 0 or p == 0:
        return 0.0
    if n == 0:
        return float(np.linalg.norm(d, 2))

    alpha = spectral_abscissa(a)
    if alpha >= 0.0:
        raise UnstableSystem(f"spectral abscissa {alpha:.2e} >= 0")

    poles = sla.eigvals(a)
    mags = np.abs(poles)
    grid = {0.0}
    osc = poles[np.abs(poles.imag) > 1e-12 * np.maximum(mags, 1.0)]
    if osc.size:
        zeta = np.abs(osc.real) / np.abs(osc)
        order = np.argsort(zeta)
        grid.update(float(abs(w)) for w in osc.imag[order[:30]])
    wlo = max(np.min(mags) / 10.0, 1e-8 * max(np.max(mags), 1.0))
    whi = np.max(mags) * 10.0
    grid.update(np.logspace(np.log10(wlo), np.log10(whi), 15))

    gamma_lb = float(np.linalg.norm(d, 2))
    for w in sorted(grid):
        gamma_lb = max(gamma_lb, _gain_at(a, b, c, d, w))
    if gamma_lb <= 0.0:
        return 0.0

    delta = 0.5 * tol.hinf_rel
    for _ in range(max_iter):
        g_test = gamma_lb * (1.0 + 2.0 * delta)
        ham = _hinf_hamiltonian(a, b, c, d, g_test)
        if not np.all(np.isfinite(ham)):
            raise NotConverged("Hamiltonian test matrix is non-finite")
        ev = sla.eigvals(ham)
        near_imag = np.abs(ev.real) <= np.sqrt(_EPS) * (1.0 + np.abs(ev))
        ws = np.unique(np.abs(ev.imag[near_imag]))
        ws = ws[ws > 0.0]
        if ws.size < 2:
            # no crossings (or a tangency at the peak): g_test is an upper bound
            return 0.5 * (gamma_lb + g_test)
        cand = np.concatenate([ws, 0.5 * (ws[1:] + ws[:-1])])
        new_lb = max(_gain_at(a, b, c, d, w) for w in cand)
        if new_lb <= gamma_lb * (1.0 + 1e-13):
            delta *= 4.0
            if delta > 0.25:
                return gamma_lb * (1.0 + 0.5 * tol.hinf_rel)
            continue
        gamma_lb = new_lb
    raise NotConverged(f"H-infinity iteration did not converge in {max_iter} steps")


def psd_factor(s, tol=None):
    """Factor a symmetric PSD matrix as ``S = factor^T factor``.

    Eigendecomposition-based with descending eigenvalue ordering and a
    deterministic sign convention (first significant entry of every
    eigenvector made positive), so factors are reproducible across runs.
    The numerical rank counts eigenvalues above ``rank_rel * lambda_max``;
    negative dust down to ``-psd_floor_rel * ||S||`` is clipped.

    Returns
    -------
    PsdFactor with ``factor`` of shape (rank, n).
    """
    tol = tol or DEFAULT_TOL
    s = _sym(_as_square(s, "S"))
    n = s.shape[0]
    if n == 0:
        return PsdFactor(np.zeros((0, 0)), 0, tol.rank_rel)
    w, v = sla.eigh(s)
    w = w[::-1]
    v = v[:, ::-1]
    scale = max(abs(w[0]), abs(w[-1]))
    if w[-1] < -tol.psd_floor_rel * max(scale, 1e-300):
        raise NotPsd(f"lambda_min = {w[-1]:.3e} below -psd_floor_rel * ||S||")
    if w[0] <= 0.0:
        return PsdFactor(np.zeros((0, n)), 0, tol.rank_rel)
    rank = int(np.sum(w > tol.rank_rel * w[0]))
    v = v[:, :rank].copy()
    for j in range(rank):
        col = v[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))[0]
        if nz.size and col[nz[0]] < 0.0:
            v[:, j] = -col
    factor = (np.sqrt(w[:rank])[:, None]) * v.T
    return PsdFactor(factor, rank, tol.rank_rel)
