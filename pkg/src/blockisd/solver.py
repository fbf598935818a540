"""Truncated basis pursuit denoising over the complex field.

Solves::

    minimize    sum_{w in W} |g(w)|
    subject to  ||theta @ g - y||_2 <= delta

where ``|.|`` is the complex modulus and ``W`` is a boolean mask of penalized
entries.  Entries outside ``W`` are free.  The solver is ADMM on the splitting
``x = z`` (weighted soft threshold) and ``theta @ x = u`` (projection onto the
l2 ball around ``y``).  Because both constraints carry the same penalty, the
x-update is independent of the penalty parameter and a single p x p
factorization of ``I + A A^H`` serves every iteration and every support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .exceptions import DimensionError, RankDeficiencyError

__all__ = [
    "SolverParams",
    "TruncatedBpProblem",
    "SolverResult",
    "BpdnSolver",
    "solve_truncated_bp",
    "min_norm_feasible",
    "default_delta",
]


@dataclass(frozen=True)
class SolverParams:
    """ADMM knobs.

    ``rho`` is the penalty applied after column normalization of theta.
    With ``adaptive_rho`` the penalty is rebalanced whenever the primal and
    dual residuals drift apart by more than a factor ``10``.
    """

    max_iter: int = 2000
    rho: float = 1.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    adaptive_rho: bool = False
    relaxation: float = 1.0
    certify_every: int = 10
    tie_break: str = "refit"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")
        if self.rel_tol <= 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be positive")
        if self.tie_break not in ("refit", "min_norm", "none"):
            raise ValueError(f"unknown tie_break {self.tie_break!r}")


@dataclass
class SolverResult:
    g_hat: np.ndarray
    objective: float
    fidelity_residual: float
    iterations: int
    converged: bool


@dataclass
class TruncatedBpProblem:
    """One instance of the weighted (truncated) BP subproblem.

    ``free_set`` is a boolean mask over the columns of ``theta``; ``True``
    marks an entry whose modulus is penalized.
    """

    theta: np.ndarray
    y: np.ndarray
    free_set: np.ndarray
    delta: float = 0.0
    params: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=complex)
        self.y = np.asarray(self.y, dtype=complex).ravel()
        self.free_set = np.asarray(self.free_set, dtype=bool).ravel()
        if self.theta.ndim != 2:
            raise DimensionError("theta must be a matrix")
        p, n = self.theta.shape
        if self.y.shape != (p,):
            raise DimensionError(f"y has length {self.y.size}, expected {p}")
        if self.free_set.shape != (n,):
            raise DimensionError(f"free_set has length {self.free_set.size}, expected {n}")
        if not self.delta >= 0:
            raise ValueError("delta must be non-negative")


def default_delta(noise_variance: float, n_pilots: int) -> float:
    """Fidelity radius ``sqrt(sigma^2 p) (1 + 2/sqrt(p))``; zero when noiseless."""
    if noise_variance <= 0:
        return 0.0
    return float(np.sqrt(noise_variance * n_pilots) * (1.0 + 2.0 / np.sqrt(n_pilots)))


def min_norm_feasible(theta, y, delta=0.0):
    """Minimum-norm point of ``{g : ||theta g - y|| <= delta}``.

    This is the pseudo-inverse solution ``theta^H (theta theta^H)^{-1} y``
    shrunk toward zero until the constraint is active, or zero if zero is
    already feasible.  Raises :class:`RankDeficiencyError` when
    ``theta theta^H`` is singular.
    """
    theta = np.asarray(theta, dtype=complex)
    y = np.asarray(y, dtype=complex).ravel()
    ynorm = np.linalg.norm(y)
    if ynorm <= delta:
        return np.zeros(theta.shape[1], dtype=complex)
    gram = theta @ theta.conj().T
    try:
        cho = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("theta theta^H is singular") from exc
    g = theta.conj().T @ scipy.linalg.cho_solve(cho, y)
    return g * (1.0 - delta / ynorm)


_CERT_TOL = 1e-9


def _shrink(v, thresh):
    mag = np.abs(v)
    scale = np.zeros_like(mag)
    nz = mag > thresh
    scale[nz] = 1.0 - thresh[nz] / mag[nz]
    return v * scale


def _project_ball(v, center, radius):
    d = v - center
    nd = np.linalg.norm(d)
    if nd <= radius:
        return v
    return center + d * (radius / nd)


def _min_norm_in_ball(B, r, radius):
    """Smallest ``x`` with ``||B x - r|| <= radius`` (ridge path root)."""
    rnorm = np.linalg.norm(r)
    if rnorm <= radius:
        return np.zeros(B.shape[1], dtype=complex)
    U, sv, Vh = np.linalg.svd(B, full_matrices=False)
    c = U.conj().T @ r
    perp2 = max(rnorm**2 - np.vdot(c, c).real, 0.0)
    s2 = sv**2
    c2 = np.abs(c) ** 2

    def excess(lam):
        return np.sqrt(np.sum((lam / (s2 + lam)) ** 2 * c2) + perp2) - radius

    if excess(0.0) >= 0:
        lam = 0.0
    else:
        hi = 1.0
        while excess(hi) < 0:
            hi *= 10.0
        lam = scipy.optimize.brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        filt = np.where(s2 + lam > 0, sv / (s2 + lam), 0.0)
    return Vh.conj().T @ (filt * c)


class BpdnSolver:
    """Reusable truncated-BP solver bound to one sensing matrix.

    The column normalization and the ``(I + A A^H)^{-1}`` factor are computed
    once, so repeated solves with different supports (the ISD loop) only pay
    for the iterations.
    """

    def __init__(self, theta, params: SolverParams | None = None):
        self.theta = np.asarray(theta, dtype=complex)
        if self.theta.ndim != 2:
            raise DimensionError("theta must be a matrix")
        self.params = params or SolverParams()
        p, n = self.theta.shape
        col_norms = np.linalg.norm(self.theta, axis=0)
        col_norms[col_norms == 0] = 1.0
        self._col_norms = col_norms
        A = self.theta / col_norms
        self._A = A
        self._AH = A.conj().T
        K = np.linalg.inv(np.eye(p) + A @ self._AH)
        self._K = (K + K.conj().T) / 2
        self._G = self._AH @ self._K

    @property
    def shape(self):
        return self.theta.shape

    def solve(self, y, free_set, delta=0.0, x0=None) -> SolverResult:
        p, n = self.theta.shape
        y = np.asarray(y, dtype=complex).ravel()
        free = np.asarray(free_set, dtype=bool).ravel()
        if y.shape != (p,) or free.shape != (n,):
            raise DimensionError("y / free_set do not match theta")
        if delta < 0:
            raise ValueError("delta must be non-negative")

        ynorm = np.linalg.norm(y)
        if ynorm <= delta:
            # zero is feasible with zero objective
            g = np.zeros(n, dtype=complex)
            return self._result(g, y, free, 0, True)
        if not free.any():
            g = min_norm_feasible(self.theta, y, delta)
            return self._result(g, y, free, 0, True)

        prm = self.params
        A, AH, K, G = self._A, self._AH, self._K, self._G
        # unit-scale data so the tolerances are meaningful
        yb = y / ynorm
        rad = delta / ynorm
        weights = np.where(free, 1.0 / self._col_norms, 0.0)

        if x0 is None:
            z = np.zeros(n, dtype=complex)
        else:
            z = np.asarray(x0, dtype=complex).ravel() * self._col_norms / ynorm
        u = _project_ball(A @ z, yb, rad)
        lam = np.zeros(n, dtype=complex)
        mu = np.zeros(p, dtype=complex)
        rho = prm.rho
        alpha = prm.relaxation
        sqdim = np.sqrt(n + p)

        converged = False
        it = 0
        for it in range(1, prm.max_iter + 1):
            b = z - lam + AH @ (u - mu)
            c = A @ b
            x = b - G @ c
            Ax = K @ c

            z_old, u_old = z, u
            xr = alpha * x + (1 - alpha) * z_old
            Axr = alpha * Ax + (1 - alpha) * u_old
            z = _shrink(xr + lam, weights / rho)
            u = _project_ball(Axr + mu, yb, rad)

            lam = lam + (xr - z)
            mu = mu + (Axr - u)
            rx = x - z
            ru = Ax - u

            r_norm = np.sqrt(np.vdot(rx, rx).real + np.vdot(ru, ru).real)
            dz = z - z_old
            du = u - u_old
            s_norm = rho * np.sqrt(np.vdot(dz, dz).real + np.vdot(du, du).real)
            pri_scale = max(
                np.sqrt(np.vdot(x, x).real + np.vdot(Ax, Ax).real),
                np.sqrt(np.vdot(z, z).real + np.vdot(u, u).real),
            )
            dual_scale = rho * np.sqrt(np.vdot(lam, lam).real + np.vdot(mu, mu).real)
            eps_pri = sqdim * prm.abs_tol + prm.rel_tol * pri_scale
            eps_dual = sqdim * prm.abs_tol + prm.rel_tol * dual_scale
            if r_norm <= eps_pri and s_norm <= eps_dual:
                converged = True
                break
            if rad == 0 and prm.certify_every and it % prm.certify_every == 0:
                polished = self._certify(z, -rho * mu, free, weights, yb)
                if polished is not None:
                    z = polished
                    converged = True
                    break

            if prm.adaptive_rho and it % 10 == 0:
                if r_norm > 10 * s_norm:
                    rho *= 2.0
                    lam /= 2.0
                    mu /= 2.0
                elif s_norm > 10 * r_norm:
                    rho /= 2.0
                    lam *= 2.0
                    mu *= 2.0

        if rad > 0 and prm.tie_break != "none":
            z = self._refit(z, free, yb, rad if prm.tie_break == "min_norm" else None)
        g = z / self._col_norms * ynorm
        return self._result(g, y, free, it, converged)

    def _refit(self, z, free, yb, radius=None):
        # The objective only sees the penalized entries, so re-solving for the
        # rest inside the fidelity ball keeps the point optimal.
        fixed = np.flatnonzero(~free)
        if fixed.size == 0:
            return z
        A = self._A
        rhs = yb - A[:, free] @ z[free]
        if radius is None:
            coef = np.linalg.lstsq(A[:, fixed], rhs, rcond=None)[0]
        else:
            coef = _min_norm_in_ball(A[:, fixed], rhs, radius)
        z = z.copy()
        z[fixed] = coef
        return z

    def _certify(self, z, nu, free, weights, yb):
        """Exact solve on the support of ``z``, returned only if it is provably optimal.

        Equality-constrained case only.  The candidate is the unique solution
        of ``A_S g_S = y`` on ``S = supp(z) | ~free``; it is accepted when the
        ADMM dual estimate ``nu``, corrected to match the subgradient on ``S``,
        satisfies ``|a_i^H nu| <= w_i`` on every column outside ``S``.
        """
        p = self._A.shape[0]
        in_supp = ~free | (z != 0)
        idx = np.flatnonzero(in_supp)
        if idx.size > p:
            return None
        AS = self._A[:, idx]
        gS, _, rank, _ = np.linalg.lstsq(AS, yb, rcond=None)
        if rank < idx.size or np.linalg.norm(AS @ gS - yb) > _CERT_TOL:
            return None
        fS = free[idx]
        mags = np.abs(gS[fS])
        if np.any(mags <= _CERT_TOL):
            return None
        target = np.zeros(idx.size, dtype=complex)
        target[fS] = weights[idx][fS] * gS[fS] / mags
        ASH = AS.conj().T
        nu = nu + np.linalg.lstsq(ASH, target - ASH @ nu, rcond=None)[0]
        if np.linalg.norm(ASH @ nu - target) > _CERT_TOL * (1 + np.linalg.norm(target)):
            return None
        off = np.flatnonzero(~in_supp)
        if off.size and np.any(np.abs(self._AH[off] @ nu) > weights[off] * (1 + _CERT_TOL)):
            return None
        g = np.zeros_like(z)
        g[idx] = gS
        return g

    def _result(self, g, y, free, iterations, converged):
        return SolverResult(
            g_hat=g,
            objective=float(np.abs(g[free]).sum()),
            fidelity_residual=float(np.linalg.norm(self.theta @ g - y)),
            iterations=iterations,
            converged=converged,
        )


def solve_truncated_bp(problem: TruncatedBpProblem) -> SolverResult:
    """One-shot solve of a :class:`TruncatedBpProblem`."""
    solver = BpdnSolver(problem.theta, problem.params)
    return solver.solve(problem.y, problem.free_set, problem.delta)
