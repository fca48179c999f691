import numpy as np
import pytest

from lrkrylov import krylov
from lrkrylov.krylov import (
    arnoldi_start,
    arnoldi_step,
    gkb_start,
    gkb_step,
    gmres,
    lr_fgmres,
    lr_flsqr,
    lsqr,
    projected_tikhonov,
    rs_lr_gmres,
)
from lrkrylov.linops import from_dense, identity_operator
from lrkrylov.lowrank import truncate
from lrkrylov.problems import star_problem
from lrkrylov.report import Discrepancy


def random_square_op(n_side, seed, shift=0.0):
    rng = np.random.default_rng(seed)
    N = n_side * n_side
    A = rng.standard_normal((N, N)) / np.sqrt(N) + shift * np.eye(N)
    return from_dense(A, n_side), A


class TestArnoldi:
    def test_identity_breaks_down_immediately(self):
        op = identity_operator(4)
        state = arnoldi_start(op, np.arange(1.0, 17.0))
        arnoldi_step(state, op)
        assert state.breakdown
        assert np.allclose(state.H_mat(), [[1.0], [0.0]], atol=1e-14)

    def test_factorization_identity(self):
        op, A = random_square_op(4, 0)
        b = np.random.default_rng(1).standard_normal(16)
        state = arnoldi_start(op, b)
        for _ in range(5):
            arnoldi_step(state, op)
        V, H = state.V_mat(), state.H_mat()
        assert np.linalg.norm(A @ state.Z_mat() - V @ H) <= 1e-10
        assert np.linalg.norm(V.T @ V - np.eye(6)) <= 1e-12

    def test_flexible_matches_direct_transcription(self):
        # oracle: a literal restatement of the flexible Arnoldi recurrence
        op, A = random_square_op(4, 2)
        rng = np.random.default_rng(3)
        b = rng.standard_normal(16)
        precond = lambda v: truncate(v, 2)

        beta = np.linalg.norm(b)
        V = [b / beta]
        Z, H = [], np.zeros((6, 5))
        for i in range(5):
            z = precond(V[i])
            w = A @ z
            for j in range(i + 1):
                H[j, i] = V[j] @ w
                w = w - H[j, i] * V[j]
            for j in range(i + 1):  # re-orthogonalization pass
                c = V[j] @ w
                H[j, i] += c
                w = w - c * V[j]
            H[i + 1, i] = np.linalg.norm(w)
            V.append(w / H[i + 1, i])
            Z.append(z)

        state = arnoldi_start(op, b)
        for _ in range(5):
            arnoldi_step(state, op, precondition=precond)
        assert np.linalg.norm(state.H_mat() - H) <= 1e-12
        assert np.linalg.norm(state.V_mat() - np.column_stack(V)) <= 1e-12
        assert np.linalg.norm(state.Z_mat() - np.column_stack(Z)) <= 1e-12

    def test_rectangular_rejected(self):
        rng = np.random.default_rng(4)
        op = from_dense(rng.standard_normal((10, 16)), 4)
        with pytest.raises(ValueError):
            arnoldi_start(op, np.ones(10))

    def test_zero_start_rejected(self):
        with pytest.raises(ValueError):
            arnoldi_start(identity_operator(4), np.zeros(16))


class TestGolubKahan:
    def test_first_coefficient(self):
        op, A = random_square_op(4, 5)
        b = np.random.default_rng(6).standard_normal(16)
        state = gkb_start(op, b)
        gkb_step(state, op)
        assert np.isclose(state.T_mat()[0, 0],
                          np.linalg.norm(A.T @ (b / np.linalg.norm(b))))

    def test_factorization_identities(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((20, 16))
        op = from_dense(A, 4)
        state = gkb_start(op, rng.standard_normal(20))
        for _ in range(6):
            gkb_step(state, op)
        U, V, M, T = (state.U_mat(), state.V_mat(), state.M_mat(),
                      state.T_mat())
        assert np.linalg.norm(A @ state.Z_mat() - U @ M) <= 1e-10
        assert np.linalg.norm(A.T @ U[:, :6] - V @ T) <= 1e-10
        assert np.linalg.norm(U.T @ U - np.eye(7)) <= 1e-12
        assert np.linalg.norm(V.T @ V - np.eye(6)) <= 1e-12

    def test_unpreconditioned_projection_is_bidiagonal(self):
        rng = np.random.default_rng(8)
        op = from_dense(rng.standard_normal((20, 16)), 4)
        state = gkb_start(op, rng.standard_normal(20))
        for _ in range(6):
            gkb_step(state, op)
        M = state.M_mat()
        band = np.zeros_like(M)
        for i in range(6):
            band[i, i] = M[i, i]
            band[i + 1, i] = M[i + 1, i]
        assert np.abs(M - band).max() <= 1e-10


class TestProjectedTikhonov:
    def test_scalar_unregularized(self):
        y, resid = projected_tikhonov(np.array([[1.0], [0.0]]), 2.0, 0.0)
        assert np.isclose(y[0], 2.0) and resid <= 1e-14

    def test_scalar_regularized(self):
        y, resid = projected_tikhonov(np.array([[1.0], [0.0]]), 2.0, 1.0)
        assert np.isclose(y[0], 1.0) and np.isclose(resid, 1.0)

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(9)
        H = rng.standard_normal((7, 6))
        beta, lam = 1.7, 0.3
        rhs = np.zeros(7)
        rhs[0] = beta
        want = np.linalg.solve(H.T @ H + lam * np.eye(6), H.T @ rhs)
        y, resid = projected_tikhonov(H, beta, lam)
        assert np.linalg.norm(y - want) <= 1e-10
        assert np.isclose(resid, np.linalg.norm(H @ y - rhs))

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            projected_tikhonov(np.eye(2), 1.0, -1e-3)


class TestGmresLsqr:
    def test_gmres_identity_solves_in_one_step(self):
        op = identity_operator(4)
        b = np.random.default_rng(10).standard_normal(16)
        rep = gmres(op, b, 5)
        assert np.linalg.norm(rep.final_x - b) <= 1e-12

    def test_gmres_finite_termination(self):
        op, A = random_square_op(4, 11, shift=2.0)
        x_true = np.random.default_rng(12).standard_normal(16)
        rep = gmres(op, A @ x_true, 16, x_exact=x_true)
        assert rep.residuals[-1] <= 1e-9
        assert np.linalg.norm(rep.final_x - x_true) <= 1e-7

    def test_gmres_residuals_monotone(self):
        op, _ = random_square_op(4, 13, shift=1.0)
        rep = gmres(op, np.random.default_rng(14).standard_normal(16), 12)
        r = np.asarray(rep.residuals)
        assert np.all(r[1:] <= r[:-1] + 1e-12)

    def test_lsqr_rectangular_least_squares(self):
        rng = np.random.default_rng(15)
        A = rng.standard_normal((24, 16))
        op = from_dense(A, 4)
        b = rng.standard_normal(24)
        rep = lsqr(op, b, 16)
        want = np.linalg.lstsq(A, b, rcond=None)[0]
        assert np.linalg.norm(rep.final_x - want) <= 1e-8

    def test_discrepancy_stop(self):
        prob = star_problem(16, noise_level=1e-2, seed=3)
        stop = Discrepancy(prob.noise_norm, 1.01)
        rep = gmres(prob.op, prob.b, 50, stop=stop)
        assert rep.stop_reason == "discrepancy"
        assert rep.residuals[-1] <= 1.01 * prob.noise_norm


class TestTruncatedSolvers:
    def test_rs_lr_gmres_full_rank_matches_gmres(self):
        # after m inner steps the basis spans the (m+1)-dim Krylov space
        prob = star_problem(16, noise_level=1e-3, seed=4)
        rep_lr = rs_lr_gmres(prob.op, prob.b, 9, 16, 1,
                             x_exact=prob.x_exact)
        rep = gmres(prob.op, prob.b, 10, x_exact=prob.x_exact)
        assert np.linalg.norm(rep_lr.final_x - rep.final_x) <= \
            1e-8 * max(np.linalg.norm(rep.final_x), 1.0)

    def test_rs_lr_gmres_zero_residual_stop(self):
        op = identity_operator(4)
        b = np.random.default_rng(16).standard_normal(16)
        rep = rs_lr_gmres(op, b, 3, 4, 3)
        assert rep.stop_reason == "zero_residual"
        assert np.linalg.norm(rep.final_x - b) <= 1e-10

    def test_rs_lr_gmres_restarts_recorded(self):
        prob = star_problem(16, noise_level=1e-3, seed=5)
        rep = rs_lr_gmres(prob.op, prob.b, 4, 2, 3, x_exact=prob.x_exact)
        assert max(rep.outer_indices) == 2
        assert rep.iterations == list(range(1, len(rep.iterations) + 1))

    @pytest.mark.parametrize("fn,base", [(lr_fgmres, gmres),
                                         (lr_flsqr, lsqr)])
    def test_full_rank_degenerates_to_standard(self, fn, base):
        prob = star_problem(16, noise_level=1e-3, seed=6)
        rep_lr = fn(prob.op, prob.b, 16, 16, 8, x_exact=prob.x_exact)
        rep = base(prob.op, prob.b, 8, x_exact=prob.x_exact)
        assert np.linalg.norm(rep_lr.final_x - rep.final_x) <= \
            1e-8 * max(np.linalg.norm(rep.final_x), 1.0)

    def test_iterates_obey_rank_bound(self):
        prob = star_problem(16, noise_level=1e-3, seed=7)
        rep = lr_fgmres(prob.op, prob.b, 3, 3, 10, x_exact=prob.x_exact)
        from lrkrylov.linops import unvec
        from lrkrylov.lowrank import svd
        s = svd(unvec(rep.final_x, 16)).sigma
        assert s[3] <= 1e-10 * max(s[0], 1e-300)
