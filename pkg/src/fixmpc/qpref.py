"""High-accuracy reference QP solutions used as oracles.

Solves ``min 0.5 z'Hz + g'z  s.t.  G z <= h, A z = b`` with an interior-point
method (cvxopt) and then polishes the result by re-solving the KKT system of
the detected active set, which typically lands within 1e-12 of the true
optimum.  This path is algorithmically independent of the first-order solvers
it is used to check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from cvxopt import matrix as cvxmat
from cvxopt import solvers as cvxsolvers

from .errors import OracleFailure

_CVXOPT_OPTIONS = {
    "show_progress": False,
    "abstol": 1e-11,
    "reltol": 1e-11,
    "feastol": 1e-11,
    "maxiters": 200,
}


@dataclass
class QpSolution:
    z: np.ndarray
    obj: float
    duals_ineq: np.ndarray
    duals_eq: np.ndarray
    kkt_residual: float
    polished: bool


def _kkt_residual(h_mat, g_vec, g_ineq, h_ineq, a_eq, b_eq, z, lam, nu) -> float:
    worst = 0.0
    stat = h_mat @ z + g_vec
    if g_ineq is not None and g_ineq.shape[0]:
        slack = h_ineq - g_ineq @ z
        worst = max(worst, float(np.max(-slack, initial=0.0)))  # primal violation
        worst = max(worst, float(np.max(-lam, initial=0.0)))  # dual sign
        worst = max(worst, float(np.max(np.abs(lam * slack), initial=0.0)))  # complementarity
        stat = stat + g_ineq.T @ lam
    if a_eq is not None and a_eq.shape[0]:
        stat = stat + a_eq.T @ nu
        worst = max(worst, float(np.max(np.abs(a_eq @ z - b_eq), initial=0.0)))
    worst = max(worst, float(np.max(np.abs(stat), initial=0.0)))
    return worst


def _polish(h_mat, g_vec, g_ineq, h_ineq, a_eq, b_eq, z0, lam0, slack_tol):
    n = len(z0)
    if g_ineq is not None and g_ineq.shape[0]:
        slack = h_ineq - g_ineq @ z0
        active = np.where((slack < slack_tol) | (lam0 > slack_tol))[0]
        ga = g_ineq[active]
        ha = h_ineq[active]
    else:
        active = np.array([], dtype=int)
        ga = np.zeros((0, n))
        ha = np.zeros(0)
    ae = a_eq if a_eq is not None else np.zeros((0, n))
    be = b_eq if b_eq is not None else np.zeros(0)
    na, ne = ga.shape[0], ae.shape[0]
    kkt = np.zeros((n + na + ne, n + na + ne))
    kkt[:n, :n] = h_mat
    kkt[:n, n : n + na] = ga.T
    kkt[:n, n + na :] = ae.T
    kkt[n : n + na, :n] = ga
    kkt[n + na :, :n] = ae
    rhs = np.concatenate([-g_vec, ha, be])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    z = sol[:n]
    lam = np.zeros(g_ineq.shape[0] if g_ineq is not None else 0)
    lam[active] = sol[n : n + na]
    nu = sol[n + na :]
    return z, lam, nu


def solve_qp(h_mat, g_vec, g_ineq=None, h_ineq=None, a_eq=None, b_eq=None) -> QpSolution:
    h_mat = np.asarray(h_mat, dtype=float)
    g_vec = np.asarray(g_vec, dtype=float)
    n = len(g_vec)
    if g_ineq is not None:
        g_ineq = np.asarray(g_ineq, dtype=float).reshape(-1, n)
        h_ineq = np.asarray(h_ineq, dtype=float).reshape(-1)
    if a_eq is not None:
        a_eq = np.asarray(a_eq, dtype=float).reshape(-1, n)
        b_eq = np.asarray(b_eq, dtype=float).reshape(-1)

    args = [cvxmat(0.5 * (h_mat + h_mat.T)), cvxmat(g_vec)]
    if g_ineq is not None and g_ineq.shape[0]:
        args += [cvxmat(g_ineq), cvxmat(h_ineq)]
    else:
        args += [cvxmat(np.zeros((0, n))), cvxmat(np.zeros(0))]
    if a_eq is not None and a_eq.shape[0]:
        args += [cvxmat(a_eq), cvxmat(b_eq)]
    try:
        res = cvxsolvers.qp(*args, options=_CVXOPT_OPTIONS)
    except Exception as exc:  # cvxopt raises on numerical breakdown
        raise OracleFailure(f"interior-point solve failed: {exc}") from exc
    if res["status"] not in ("optimal", "unknown"):
        raise OracleFailure(f"interior-point status {res['status']!r}")

    z = np.asarray(res["x"]).reshape(-1)
    lam = np.asarray(res["z"]).reshape(-1) if g_ineq is not None and g_ineq.shape[0] else np.zeros(0)
    nu = np.asarray(res["y"]).reshape(-1) if a_eq is not None and a_eq.shape[0] else np.zeros(0)
    best = (z, np.clip(lam, 0.0, None), nu, False)
    best_res = _kkt_residual(h_mat, g_vec, g_ineq, h_ineq, a_eq, b_eq, *best[:3])

    for slack_tol in (1e-6, 1e-8):
        zp, lp, np_ = _polish(h_mat, g_vec, g_ineq, h_ineq, a_eq, b_eq, z, lam, slack_tol)
        if not np.all(np.isfinite(zp)):
            continue
        r = _kkt_residual(h_mat, g_vec, g_ineq, h_ineq, a_eq, b_eq, zp, np.clip(lp, 0.0, None), np_)
        if r < best_res:
            best = (zp, np.clip(lp, 0.0, None), np_, True)
            best_res = r

    if res["status"] == "unknown" and best_res > 1e-6:
        raise OracleFailure(f"could not verify solution (KKT residual {best_res:.2e})")
    z, lam, nu, polished = best
    obj = float(0.5 * z @ h_mat @ z + g_vec @ z)
    return QpSolution(z, obj, lam, nu, best_res, polished)


def box_rows(lo, hi):
    """Inequality rows for finite box bounds: returns (G, h)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(lo)
    rows, rhs = [], []
    eye = np.eye(n)
    for i in range(n):
        if np.isfinite(hi[i]):
            rows.append(eye[i])
            rhs.append(hi[i])
        if np.isfinite(lo[i]):
            rows.append(-eye[i])
            rhs.append(-lo[i])
    if rows:
        return np.vstack(rows), np.array(rhs)
    return np.zeros((0, n)), np.zeros(0)


def solve_box_qp(h_mat, g_vec, lo, hi) -> QpSolution:
    g_ineq, h_ineq = box_rows(lo, hi)
    return solve_qp(h_mat, g_vec, g_ineq, h_ineq)


def feasibility_gap(g_ineq, h_ineq, a_eq=None, b_eq=None) -> float:
    """Smallest uniform inequality relaxation that admits a feasible point.

    Solves ``min t  s.t.  G z <= h + t, A z = b``; a strictly positive value
    certifies infeasibility of the original constraints.
    """
    g_ineq = np.asarray(g_ineq, dtype=float)
    h_ineq = np.asarray(h_ineq, dtype=float)
    m, n = g_ineq.shape
    # Small quadratic regularization keeps the problem bounded in z.
    h_mat = np.zeros((n + 1, n + 1))
    h_mat[:n, :n] = 1e-9 * np.eye(n)
    g_vec = np.zeros(n + 1)
    g_vec[n] = 1.0
    g_aug = np.hstack([g_ineq, -np.ones((m, 1))])
    a_aug = None
    b_aug = None
    if a_eq is not None and np.asarray(a_eq).size:
        a_eq = np.asarray(a_eq, dtype=float)
        a_aug = np.hstack([a_eq, np.zeros((a_eq.shape[0], 1))])
        b_aug = np.asarray(b_eq, dtype=float)
    sol = solve_qp(h_mat, g_vec, g_aug, h_ineq, a_aug, b_aug)
    return float(sol.z[n])
