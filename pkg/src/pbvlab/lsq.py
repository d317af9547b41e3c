"""Damped (Levenberg-Marquardt) least-squares minimization.

Small self-contained implementation used by the line, polarization and
antibunching fits. The damping update is fixed: multiply lambda by 10 when a
step is rejected, divide by 10 when accepted. Iteration stops when the
relative parameter step of an accepted move falls below ``rel_step_tol`` or
after ``max_iter`` iterations.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FitError

_EPS = np.finfo(float).eps


@dataclass
class LMResult:
    x: np.ndarray
    rss: float
    ok: bool
    iterations: int
    message: str


def _numeric_jacobian(fun, x, f0):
    n = x.size
    jac = np.empty((f0.size, n))
    for i in range(n):
        h = np.sqrt(_EPS) * max(abs(x[i]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (fun(xp) - fun(xm)) / (2.0 * h)
    return jac


def levenberg_marquardt(fun, x0, max_iter=200, rel_step_tol=1e-8, lam0=1e-3,
                        lam_max=1e12, jac=None):
    """Minimize ``sum(fun(x)**2)`` starting from ``x0``.

    ``fun`` maps a parameter vector to a residual vector. ``jac`` may supply
    an analytic Jacobian; otherwise central differences are used. Returns an
    :class:`LMResult`; ``ok`` is False when the iteration budget or damping
    limit is hit without meeting the step tolerance (best-effort parameters
    are still returned).
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1:
        raise FitError("parameter vector must be 1-D")
    r = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals at the initial point are not finite")
    rss = float(r @ r)
    lam = lam0

    for it in range(1, max_iter + 1):
        jmat = jac(x) if jac is not None else _numeric_jacobian(fun, x, r)
        jtj = jmat.T @ jmat
        jtr = jmat.T @ r
        diag = np.diag(jtj).copy()
        diag[diag < _EPS] = _EPS

        # inner loop: grow damping until a step is accepted
        while True:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                x_new = x + step
                r_new = np.asarray(fun(x_new), dtype=float)
                if np.all(np.isfinite(r_new)):
                    rss_new = float(r_new @ r_new)
                    if rss_new <= rss:
                        break
            lam *= 10.0
            if lam > lam_max:
                return LMResult(x, rss, False, it, "damping limit reached")

        rel_step = float(np.max(np.abs(step) / (np.abs(x_new) + _EPS)))
        x, r, rss = x_new, r_new, rss_new
        lam = max(lam / 10.0, 1e-15)
        if rel_step < rel_step_tol:
            return LMResult(x, rss, True, it, "converged")

    return LMResult(x, rss, False, max_iter, "iteration limit reached")
