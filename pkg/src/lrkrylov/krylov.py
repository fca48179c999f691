"""Arnoldi / Golub-Kahan factorizations (standard and flexible), projected
Tikhonov solves, and the solvers built on them: GMRES, LSQR, RS-LR-GMRES,
LR-FGMRES, LR-FLSQR.

All bases are kept orthonormal with one full re-orthogonalization pass;
bases are stored dense (desk scale, N <= 65536, <= 200 steps).
"""

from dataclasses import dataclass, field

import numpy as np

from .lowrank import svd, truncate
from .linops import unvec
from .report import Discrepancy, SolveReport

__all__ = [
    "ArnoldiState",
    "GkbState",
    "arnoldi_start",
    "arnoldi_step",
    "gkb_start",
    "gkb_step",
    "projected_tikhonov",
    "gmres",
    "lsqr",
    "rs_lr_gmres",
    "lr_fgmres",
    "lr_flsqr",
]

_BREAKDOWN_REL = 1e-12


def _orthogonalize(w, basis):
    """Modified Gram-Schmidt with one full re-orthogonalization pass."""
    coeffs = np.zeros(len(basis))
    for _ in range(2):
        for j, q in enumerate(basis):
            c = float(q @ w)
            coeffs[j] += c
            w = w - c * q
    return w, coeffs


def _stack(cols, height):
    M = np.zeros((height, len(cols)))
    for i, col in enumerate(cols):
        M[: len(col), i] = col
    return M


@dataclass
class ArnoldiState:
    """Partial (flexible) Arnoldi factorization  A Z_k = V_{k+1} H_k."""

    beta: float
    V: list = field(default_factory=list)
    Z: list = field(default_factory=list)
    Hcols: list = field(default_factory=list)
    breakdown: bool = False

    @property
    def k(self):
        return len(self.Z)

    def V_mat(self):
        return np.column_stack(self.V)

    def Z_mat(self):
        return np.column_stack(self.Z)

    def H_mat(self):
        return _stack(self.Hcols, self.k + 1)


def arnoldi_start(op, b):
    if op.rows != op.cols:
        raise ValueError("Arnoldi requires a square operator")
    b = np.asarray(b, dtype=float)
    beta = np.linalg.norm(b)
    if beta == 0:
        raise ValueError("start vector is zero")
    return ArnoldiState(beta=beta, V=[b / beta])


def arnoldi_step(state, op, precondition=None):
    """Expand the factorization by one column; reports (not raises) breakdown."""
    if state.breakdown:
        return state
    v = state.V[state.k]
    z = precondition(v) if precondition is not None else v
    w = op.matvec(z)
    w, h = _orthogonalize(w, state.V)
    hnorm = np.linalg.norm(w)
    col = np.append(h, hnorm)
    state.Z.append(z)
    state.Hcols.append(col)
    scale = max(np.abs(col).max(), 1.0)
    if hnorm <= _BREAKDOWN_REL * scale:
        state.breakdown = True
    else:
        state.V.append(w / hnorm)
    return state


@dataclass
class GkbState:
    """Partial (flexible) Golub-Kahan factorization:
    A Z_k = U_{k+1} M_k  and  A^T U_k = V_k T_k."""

    beta: float
    U: list = field(default_factory=list)
    V: list = field(default_factory=list)
    Z: list = field(default_factory=list)
    Mcols: list = field(default_factory=list)
    Tcols: list = field(default_factory=list)
    breakdown: bool = False

    @property
    def k(self):
        return len(self.Z)

    def U_mat(self):
        return np.column_stack(self.U)

    def V_mat(self):
        return np.column_stack(self.V)

    def Z_mat(self):
        return np.column_stack(self.Z)

    def M_mat(self):
        return _stack(self.Mcols, self.k + 1)

    def T_mat(self):
        return _stack(self.Tcols, self.k)


def gkb_start(op, b):
    b = np.asarray(b, dtype=float)
    beta = np.linalg.norm(b)
    if beta == 0:
        raise ValueError("start vector is zero")
    return GkbState(beta=beta, U=[b / beta])


def gkb_step(state, op, precondition=None):
    """One (flexible) Golub-Kahan step: new v_i, z_i, u_{i+1}."""
    if state.breakdown:
        return state
    u = state.U[state.k]
    w = op.rmatvec(u)
    w, t = _orthogonalize(w, state.V)
    tnorm = np.linalg.norm(w)
    if tnorm <= _BREAKDOWN_REL * max(np.abs(t).max() if t.size else 0.0, 1.0):
        state.breakdown = True
        return state
    v = w / tnorm
    state.V.append(v)
    state.Tcols.append(np.append(t, tnorm))
    z = precondition(v) if precondition is not None else v
    w = op.matvec(z)
    w, m = _orthogonalize(w, state.U)
    mnorm = np.linalg.norm(w)
    state.Z.append(z)
    state.Mcols.append(np.append(m, mnorm))
    if mnorm <= _BREAKDOWN_REL * max(np.abs(m).max(), 1.0):
        state.breakdown = True
    else:
        state.U.append(w / mnorm)
    return state


def projected_tikhonov(Hk, beta, lambda_hat):
    """Solve min ||H y - beta e1||^2 + lambda ||y||^2.

    Returns (y, projected residual norm ||H y - beta e1||).  lambda = 0
    with rank-deficient H falls back to the minimum-norm solution.
    """
    if lambda_hat < 0:
        raise ValueError("lambda_hat must be nonnegative")
    Hk = np.atleast_2d(np.asarray(Hk, dtype=float))
    mp1, k = Hk.shape
    rhs = np.zeros(mp1)
    rhs[0] = beta
    if lambda_hat > 0:
        A = np.vstack([Hk, np.sqrt(lambda_hat) * np.eye(k)])
        b = np.concatenate([rhs, np.zeros(k)])
    else:
        A, b = Hk, rhs
    y = np.linalg.lstsq(A, b, rcond=None)[0]
    return y, float(np.linalg.norm(Hk @ y - rhs))


def _stop_from(stop):
    if stop is None:
        return None
    if isinstance(stop, Discrepancy):
        return stop
    raise TypeError(f"unsupported stopping rule {stop!r}")


class _LambdaRule:
    """Per-iteration regularization parameter selection for hybrid solves.

    ``kind`` is one of zero / fixed / secant / optimal.  The secant rule
    keeps a (lambda, residual) history and is reset per inner cycle; the
    optimal rule needs the exact solution projected on the current basis.
    """

    def __init__(self, kind="zero", value=0.0, stop=None, x_exact=None,
                 lam_max=1e10):
        if kind not in ("zero", "fixed", "secant", "optimal"):
            raise ValueError(f"unknown lambda rule {kind!r}")
        self.kind = kind
        self.value = value
        self.stop = stop
        self.x_exact = x_exact
        self.lam_max = lam_max
        self.reset()

    def reset(self):
        self.history = []
        self.current = self.value if self.kind == "fixed" else 0.0

    def observe(self, H, residual):
        if self.kind != "secant" or self.stop is None:
            return
        from .nnr import secant_lambda_update  # local: avoids import cycle

        self.history.append((self.current, residual))
        self.current = secant_lambda_update(
            self.history, self.stop.epsilon, self.stop.theta,
            h_norm2=float(np.linalg.norm(H) ** 2), lam_max=self.lam_max,
        )

    def solve(self, H, beta, target=None):
        """Projected Tikhonov with the rule's current lambda; for the
        optimal rule, pick lambda minimizing ||target - y(lambda)||."""
        if self.kind == "optimal" and target is not None:
            from .nnr import optimal_lambda_search

            self.current = optimal_lambda_search(H, beta, target)
        y, resid = projected_tikhonov(H, beta, self.current)
        lam_used = self.current
        self.observe(H, resid)
        return y, resid, lam_used


def _make_rule(lambda_rule, stop, x_exact):
    if lambda_rule is None:
        return _LambdaRule("zero", stop=stop, x_exact=x_exact)
    if isinstance(lambda_rule, _LambdaRule):
        return lambda_rule
    if isinstance(lambda_rule, (int, float)):
        return _LambdaRule("fixed", value=float(lambda_rule), stop=stop,
                           x_exact=x_exact)
    return _LambdaRule(lambda_rule, stop=stop, x_exact=x_exact)


def gmres(op, b, max_iter, stop=None, lambda_rule=None, x_exact=None):
    """(Hybrid) GMRES via the Arnoldi factorization."""
    stop = _stop_from(stop)
    rule = _make_rule(lambda_rule, stop, x_exact)
    state = arnoldi_start(op, b)
    report = SolveReport(solver="gmres")
    for it in range(1, max_iter + 1):
        arnoldi_step(state, op)
        target = None
        if rule.kind == "optimal" and x_exact is not None:
            target = state.V_mat()[:, : state.k].T @ x_exact
        y, resid, lam = rule.solve(state.H_mat(), state.beta, target)
        x = state.V_mat()[:, : state.k] @ y
        report.record(it, 0, x, resid, lam, x_exact)
        if stop is not None and stop.satisfied(resid):
            report.stop_reason = "discrepancy"
            break
        if state.breakdown:
            report.stop_reason = "breakdown"
            break
    if report.final_x is not None:
        report.add_spectrum(0, svd(unvec(report.best_x, op.image_side)).sigma)
    return report


def lsqr(op, b, max_iter, stop=None, lambda_rule=None, x_exact=None):
    """(Hybrid) LSQR via Golub-Kahan bidiagonalization."""
    stop = _stop_from(stop)
    rule = _make_rule(lambda_rule, stop, x_exact)
    state = gkb_start(op, b)
    report = SolveReport(solver="lsqr")
    for it in range(1, max_iter + 1):
        gkb_step(state, op)
        if state.k < it:
            report.stop_reason = "breakdown"
            break
        target = None
        if rule.kind == "optimal" and x_exact is not None:
            target = state.V_mat().T @ x_exact
        y, resid, lam = rule.solve(state.M_mat(), state.beta, target)
        x = state.V_mat() @ y
        report.record(it, 0, x, resid, lam, x_exact)
        if stop is not None and stop.satisfied(resid):
            report.stop_reason = "discrepancy"
            break
        if state.breakdown:
            report.stop_reason = "breakdown"
            break
    if report.final_x is not None:
        report.add_spectrum(0, svd(unvec(report.best_x, op.image_side)).sigma)
    return report


def rs_lr_gmres(op, b, restart_len, truncation_rank, max_outer, stop=None,
                x_exact=None):
    """Restarted GMRES with rank truncation of basis vectors and iterates.

    Inner basis vectors are orthogonalized against the previous
    (non-orthonormal) basis through a Gram solve, then truncated; the
    outer update truncates x + V_m y with y from the oblique projection
    (U_m^T A V_m) y = U_m^T r, U_m = A V_m.
    """
    if op.rows != op.cols:
        raise ValueError("RS-LR-GMRES requires a square operator")
    stop = _stop_from(stop)
    b = np.asarray(b, dtype=float)
    n = op.image_side
    x = np.zeros(op.cols)
    report = SolveReport(solver="rs-lr-gmres")
    it = 0
    for outer in range(max_outer):
        r = b - op.matvec(x)
        rnorm = np.linalg.norm(r)
        if rnorm <= _BREAKDOWN_REL * np.linalg.norm(b):
            report.stop_reason = "zero_residual"
            break
        V = [r / rnorm]
        AV = [op.matvec(V[0])]
        stopped = False
        for _ in range(restart_len):
            it += 1
            u = AV[-1]
            Vm = np.column_stack(V)
            G = Vm.T @ Vm
            rhs = Vm.T @ u
            try:
                coef = np.linalg.solve(G, rhs)
            except np.linalg.LinAlgError:
                coef = np.linalg.solve(G + 1e-12 * np.eye(G.shape[0]), rhs)
            w = u - Vm @ coef
            wt = truncate(w, truncation_rank)
            wnorm = np.linalg.norm(wt)
            if wnorm > _BREAKDOWN_REL * max(np.linalg.norm(u), 1.0):
                V.append(wt / wnorm)
                AV.append(op.matvec(V[-1]))
            # projected oblique solve on the current basis, for metrics
            Vm = np.column_stack(V)
            Um = np.column_stack(AV[: len(V)])
            Gk = Um.T @ Um
            rhsk = Um.T @ r
            try:
                y = np.linalg.solve(Gk, rhsk)
            except np.linalg.LinAlgError:
                y = np.linalg.solve(Gk + 1e-12 * np.eye(Gk.shape[0]), rhsk)
            xt = truncate(x + Vm @ y, truncation_rank)
            resid = np.linalg.norm(b - op.matvec(xt))
            report.record(it, outer, xt, resid, 0.0, x_exact)
            if stop is not None and stop.satisfied(resid):
                report.stop_reason = "discrepancy"
                stopped = True
                break
        x = report.final_x
        if stopped:
            break
    if report.final_x is not None:
        report.add_spectrum(0, svd(unvec(report.best_x, n)).sigma)
    return report


def _lr_flexible(op, b, kappa_B, kappa, max_iter, stop, lambda_rule, x_exact,
                 gkb_mode):
    stop = _stop_from(stop)
    rule = _make_rule(lambda_rule, stop, x_exact)
    precond = lambda v: truncate(v, kappa_B)
    if gkb_mode:
        state = gkb_start(op, b)
        step, proj = gkb_step, GkbState.M_mat
        name = "lr-flsqr"
    else:
        if op.rows != op.cols:
            raise ValueError("LR-FGMRES requires a square operator")
        state = arnoldi_start(op, b)
        step, proj = arnoldi_step, ArnoldiState.H_mat
        name = "lr-fgmres"
    report = SolveReport(solver=name)
    for it in range(1, max_iter + 1):
        step(state, op, precondition=precond)
        if state.k < it:
            report.stop_reason = "breakdown"
            break
        y, resid, lam = rule.solve(proj(state), state.beta)
        x = truncate(state.Z_mat() @ y, kappa)
        report.record(it, 0, x, resid, lam, x_exact)
        if stop is not None and stop.satisfied(resid):
            report.stop_reason = "discrepancy"
            break
        if state.breakdown:
            report.stop_reason = "breakdown"
            break
    if report.final_x is not None:
        report.add_spectrum(0, svd(unvec(report.best_x, op.image_side)).sigma)
    return report


def lr_fgmres(op, b, kappa_B, kappa, max_iter, stop=None, lambda_rule=None,
              x_exact=None):
    """Flexible GMRES with rank-truncated solution basis vectors."""
    return _lr_flexible(op, b, kappa_B, kappa, max_iter, stop, lambda_rule,
                        x_exact, gkb_mode=False)


def lr_flsqr(op, b, kappa_B, kappa, max_iter, stop=None, lambda_rule=None,
             x_exact=None):
    """Flexible LSQR with rank-truncated solution basis vectors."""
    return _lr_flexible(op, b, kappa_B, kappa, max_iter, stop, lambda_rule,
                        x_exact, gkb_mode=True)
