"""Dense convex QP solver: primal-dual interior point with Mehrotra correction.

Problem form:

    minimize    0.5 x'Qx + c'x + c0
    subject to  A_eq x  = b_eq        (duals nu)
                A_in x <= b_in        (duals lam >= 0)

Dual sign convention: Qx + c + A_eq' nu + A_in' lam = 0 at optimality.

The KKT system is solved by a dense LDL' factorization of the symmetric
quasi-definite matrix with static diagonal regularization. A presolve pass
removes variables fixed by equal bounds, drops zero/duplicate equality rows,
and eliminates redundant equalities so the reduced equality block has full
row rank; duals for every removed row are recovered exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
DIAG_FLOOR = 1e-10
STATIC_REG = 1e-10
STEP_FRACTION = 0.99


class QpError(RuntimeError):
    pass


@dataclass
class QuadProgram:
    Q: np.ndarray
    c: np.ndarray
    c0: float = 0.0
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_in: np.ndarray | None = None
    b_in: np.ndarray | None = None

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = self.c.size
        if self.Q.shape != (n, n):
            raise ValueError(f"Q must be {n}x{n}, got {self.Q.shape}")
        scale = max(1.0, float(np.abs(self.Q).max()) if self.Q.size else 1.0)
        if float(np.abs(self.Q - self.Q.T).max()) > 1e-10 * scale:
            raise ValueError("Q must be symmetric")
        min_eig = float(np.linalg.eigvalsh(self.Q).min()) if n else 0.0
        if min_eig < -1e-9 * scale:
            raise ValueError(f"Q must be positive semidefinite (min eigenvalue {min_eig:g})")
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0], "b_eq")
        self.A_in = _as_matrix(self.A_in, n)
        self.b_in = _as_vector(self.b_in, self.A_in.shape[0], "b_in")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def n_eq(self) -> int:
        return self.A_eq.shape[0]

    @property
    def n_in(self) -> int:
        return self.A_in.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.c @ x + self.c0)


def _as_matrix(a, n: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.shape[1] != n:
        raise ValueError(f"constraint matrix has {a.shape[1]} columns, expected {n}")
    return a


def _as_vector(b, rows: int, name: str) -> np.ndarray:
    if b is None:
        b = np.zeros(0)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.size != rows:
        raise ValueError(f"{name} has length {b.size}, expected {rows}")
    return b


@dataclass
class QpSolution:
    x: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    objective: float
    status: str  # optimal | infeasible | unbounded | max-iterations
    iterations: int
    kkt_residuals: dict[str, float]
    diagnostics: dict = field(default_factory=dict)


def evaluate_kkt(qp: QuadProgram, x: np.ndarray, nu: np.ndarray, lam: np.ndarray) -> dict[str, float]:
    """Raw KKT residuals, recomputed from the problem data.

    dual:            inf-norm of Qx + c + A_eq' nu + A_in' lam
    primal_eq:       inf-norm of A_eq x - b_eq
    primal_in:       largest positive violation of A_in x <= b_in
    complementarity: lam' (b_in - A_in x)
    """
    stationarity = qp.Q @ x + qp.c
    if qp.n_eq:
        stationarity = stationarity + qp.A_eq.T @ nu
    if qp.n_in:
        stationarity = stationarity + qp.A_in.T @ lam
    dual = float(np.abs(stationarity).max()) if qp.n else 0.0
    primal_eq = float(np.abs(qp.A_eq @ x - qp.b_eq).max()) if qp.n_eq else 0.0
    if qp.n_in:
        violation = qp.A_in @ x - qp.b_in
        primal_in = float(max(0.0, violation.max()))
        comp = float(lam @ (qp.b_in - qp.A_in @ x))
    else:
        primal_in = 0.0
        comp = 0.0
    return {
        "dual": dual,
        "primal_eq": primal_eq,
        "primal_in": primal_in,
        "complementarity": comp,
    }


def meets_tolerance(qp: QuadProgram, residuals: dict[str, float], tol: float) -> bool:
    c_scale = 1.0 + (float(np.abs(qp.c).max()) if qp.n else 0.0)
    return (
        residuals["dual"] <= tol * c_scale
        and residuals["primal_eq"] <= tol
        and residuals["primal_in"] <= tol
        and abs(residuals["complementarity"]) <= tol * max(1, qp.n_in)
    )


# --- presolve ----------------------------------------------------------------


class InfeasibleProblem(QpError):
    pass


@dataclass
class PresolveTransform:
    original: QuadProgram
    kept_vars: np.ndarray
    fixed_vars: list[tuple[int, float]]
    fixed_bound_rows: dict[int, list[tuple[int, float, float]]]  # var -> (row, coeff, rhs)
    kept_eq: np.ndarray
    kept_in: np.ndarray

    def recover(self, reduced: QpSolution) -> QpSolution:
        qp = self.original
        x = np.zeros(qp.n)
        x[self.kept_vars] = reduced.x
        for j, value in self.fixed_vars:
            x[j] = value

        nu = np.zeros(qp.n_eq)
        if self.kept_eq.size:
            nu[self.kept_eq] = reduced.nu
        lam = np.zeros(qp.n_in)
        if self.kept_in.size:
            lam[self.kept_in] = reduced.lam

        # Duals on the removed bound rows of each fixed variable are chosen to
        # cancel the stationarity residual left on that coordinate.
        if self.fixed_vars:
            grad = qp.Q @ x + qp.c
            if qp.n_eq:
                grad = grad + qp.A_eq.T @ nu
            if qp.n_in:
                grad = grad + qp.A_in.T @ lam
            for j, _ in self.fixed_vars:
                rows = self.fixed_bound_rows.get(j, [])
                g = grad[j]
                if abs(g) < 1e-14 or not rows:
                    continue
                if g < 0:
                    candidates = [(r, a, b) for r, a, b in rows if a > 0]
                    pick = min(candidates, key=lambda t: t[2] / t[1], default=None)
                else:
                    candidates = [(r, a, b) for r, a, b in rows if a < 0]
                    pick = max(candidates, key=lambda t: t[2] / t[1], default=None)
                if pick is not None:
                    lam[pick[0]] = -g / pick[1]

        residuals = evaluate_kkt(qp, x, nu, lam)
        diagnostics = dict(reduced.diagnostics)
        diagnostics["presolve"] = {
            "fixed_variables": len(self.fixed_vars),
            "dropped_eq_rows": qp.n_eq - int(self.kept_eq.size),
            "dropped_in_rows": qp.n_in - int(self.kept_in.size),
        }
        return QpSolution(
            x=x,
            nu=nu,
            lam=lam,
            objective=qp.objective(x),
            status=reduced.status,
            iterations=reduced.iterations,
            kkt_residuals=residuals,
            diagnostics=diagnostics,
        )


def presolve(qp: QuadProgram, feas_tol: float = 1e-9) -> tuple[QuadProgram, PresolveTransform]:
    """Remove fixed variables and redundant rows; raises InfeasibleProblem on inconsistency."""
    n = qp.n
    A_in, b_in = qp.A_in, qp.b_in
    A_eq, b_eq = qp.A_eq, qp.b_eq

    # Variables pinned by matching upper and lower singleton inequality rows.
    uppers: dict[int, float] = {}
    lowers: dict[int, float] = {}
    singleton_rows: dict[int, list[tuple[int, float, float]]] = {}
    for r in range(qp.n_in):
        row = A_in[r]
        nz = np.flatnonzero(row)
        if nz.size != 1:
            continue
        j, a = int(nz[0]), float(row[nz[0]])
        bound = b_in[r] / a
        singleton_rows.setdefault(j, []).append((r, a, float(b_in[r])))
        if a > 0:
            uppers[j] = min(uppers.get(j, np.inf), bound)
        else:
            lowers[j] = max(lowers.get(j, -np.inf), bound)

    fixed_vars: list[tuple[int, float]] = []
    fixed_bound_rows: dict[int, list[tuple[int, float, float]]] = {}
    for j in sorted(set(uppers) & set(lowers)):
        u, l = uppers[j], lowers[j]
        if l > u + feas_tol * (1.0 + abs(u)):
            raise InfeasibleProblem(f"variable {j} has empty bound interval [{l}, {u}]")
        if u - l <= 1e-12 * (1.0 + abs(u)):
            fixed_vars.append((j, u))
            fixed_bound_rows[j] = singleton_rows[j]

    fixed_idx = np.array([j for j, _ in fixed_vars], dtype=int)
    fixed_val = np.array([v for _, v in fixed_vars], dtype=float)
    kept_vars = np.setdiff1d(np.arange(n), fixed_idx)

    Q = qp.Q[np.ix_(kept_vars, kept_vars)]
    c = qp.c[kept_vars]
    c0 = qp.c0
    if fixed_idx.size:
        cross = qp.Q[np.ix_(kept_vars, fixed_idx)]
        c = c + cross @ fixed_val
        c0 = c0 + 0.5 * fixed_val @ qp.Q[np.ix_(fixed_idx, fixed_idx)] @ fixed_val
        c0 = float(c0 + qp.c[fixed_idx] @ fixed_val)
        b_eq = b_eq - A_eq[:, fixed_idx] @ fixed_val if qp.n_eq else b_eq
        b_in = b_in - A_in[:, fixed_idx] @ fixed_val if qp.n_in else b_in
    A_eq = A_eq[:, kept_vars]
    A_in = A_in[:, kept_vars]

    drop_in = {r for rows in fixed_bound_rows.values() for r, _, _ in rows}
    keep_in = []
    for r in range(qp.n_in):
        if r in drop_in:
            continue
        row = A_in[r]
        if np.abs(row).max(initial=0.0) <= 1e-14:
            if b_in[r] < -feas_tol:
                raise InfeasibleProblem(f"inequality row {r} reduced to 0 <= {b_in[r]:g}")
            continue
        keep_in.append(r)
    kept_in = np.array(keep_in, dtype=int)

    keep_eq: list[int] = []
    seen: dict[bytes, int] = {}
    for r in range(qp.n_eq):
        row = A_eq[r]
        if np.abs(row).max(initial=0.0) <= 1e-14:
            if abs(b_eq[r]) > feas_tol:
                raise InfeasibleProblem(f"equality row {r} reduced to 0 == {b_eq[r]:g}")
            continue
        key = np.concatenate([row, [b_eq[r]]]).tobytes()
        if key in seen:
            continue
        seen[key] = r
        keep_eq.append(r)
    kept_eq = np.array(keep_eq, dtype=int)

    # Redundant (linearly dependent) equality rows: keep a full-row-rank subset
    # selected by pivoted QR; consistency of the dropped rows is then implied
    # by a bounded least-squares residual.
    if kept_eq.size:
        sub = A_eq[kept_eq]
        rhs = b_eq[kept_eq]
        r_fact = scipy.linalg.qr(sub.T, mode="r", pivoting=True)
        r_mat, piv = r_fact[0], r_fact[1]
        diag = np.abs(np.diag(r_mat)) if r_mat.size else np.zeros(0)
        threshold = max(sub.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
        rank = int((diag > threshold).sum())
        if rank < kept_eq.size:
            solution, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
            residual = sub @ solution - rhs
            scale = 1.0 + float(np.abs(rhs).max(initial=0.0))
            if np.abs(residual).max(initial=0.0) > 1e-8 * scale:
                raise InfeasibleProblem("inconsistent equality constraints")
            kept_eq = np.sort(kept_eq[piv[:rank]])

    reduced = QuadProgram(
        Q=Q,
        c=c,
        c0=c0,
        A_eq=A_eq[kept_eq] if kept_eq.size else None,
        b_eq=b_eq[kept_eq] if kept_eq.size else None,
        A_in=A_in[kept_in] if kept_in.size else None,
        b_in=b_in[kept_in] if kept_in.size else None,
    )
    transform = PresolveTransform(
        original=qp,
        kept_vars=kept_vars,
        fixed_vars=fixed_vars,
        fixed_bound_rows=fixed_bound_rows,
        kept_eq=kept_eq,
        kept_in=kept_in,
    )
    return reduced, transform


# --- interior point core -------------------------------------------------------


def _ldl_solver(K: np.ndarray):
    lu, d, perm = scipy.linalg.ldl(K, lower=True)
    lower = lu[perm]

    def solve(rhs: np.ndarray) -> np.ndarray:
        y = scipy.linalg.solve_triangular(lower, rhs[perm], lower=True, unit_diagonal=True)
        u = np.linalg.solve(d, y)
        z = scipy.linalg.solve_triangular(lower.T, u, lower=False, unit_diagonal=True)
        out = np.empty_like(z)
        out[perm] = z
        return out

    return solve


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    mask = dv < 0
    if not np.any(mask):
        return np.inf
    return float(np.min(-v[mask] / dv[mask]))


def _dual_objective(Qw, c0, c, A_eq, b_eq, A_in, b_in, nu, lam) -> float:
    r = c.copy()
    if b_eq.size:
        r = r + A_eq.T @ nu
    if b_in.size:
        r = r + A_in.T @ lam
    x_hat, *_ = np.linalg.lstsq(Qw, -r, rcond=None)
    if np.abs(Qw @ x_hat + r).max(initial=0.0) > 1e-7 * (1.0 + np.abs(r).max(initial=0.0)):
        return -np.inf
    value = -0.5 * x_hat @ Qw @ x_hat + c0
    if b_eq.size:
        value -= nu @ b_eq
    if b_in.size:
        value -= lam @ b_in
    return float(value)


def _ipm(qp: QuadProgram, tol: float, max_iter: int) -> QpSolution:
    n, p, q = qp.n, qp.n_eq, qp.n_in
    A_eq, b_eq = qp.A_eq, qp.b_eq
    A_in, b_in = qp.A_in, qp.b_in

    diag = np.diag(qp.Q).copy()
    floor_applied = bool(np.any(diag < DIAG_FLOOR))
    Qw = qp.Q.copy()
    np.fill_diagonal(Qw, np.maximum(diag, DIAG_FLOOR))
    diagnostics: dict = {"diag_floor_applied": floor_applied, "trace": []}

    def finish(x, nu, lam, status, iterations):
        residuals = evaluate_kkt(qp, x, nu, lam)
        return QpSolution(
            x=x,
            nu=nu,
            lam=lam,
            objective=qp.objective(x),
            status=status,
            iterations=iterations,
            kkt_residuals=residuals,
            diagnostics=diagnostics,
        )

    if q == 0:
        # Pure equality-constrained QP: one regularized KKT solve plus
        # iterative refinement against the unregularized system.
        if p:
            K = np.block(
                [
                    [Qw + STATIC_REG * np.eye(n), A_eq.T],
                    [A_eq, -STATIC_REG * np.eye(p)],
                ]
            )
            rhs = np.concatenate([-qp.c, b_eq])
            solver = _ldl_solver(K)
            sol = solver(rhs)
            for _ in range(3):
                residual = rhs - np.concatenate(
                    [Qw @ sol[:n] + A_eq.T @ sol[n:], A_eq @ sol[:n]]
                )
                sol = sol + solver(residual)
            x, nu = sol[:n], sol[n:]
        else:
            x = np.linalg.solve(Qw + STATIC_REG * np.eye(n), -qp.c)
            nu = np.zeros(0)
        lam = np.zeros(0)
        status = "optimal" if meets_tolerance(qp, evaluate_kkt(qp, x, nu, lam), tol) else "max-iterations"
        return finish(x, nu, lam, status, 1)

    # Least-squares starting point: least-norm solution of the equality block,
    # slacks shifted to be >= 1, unit inequality duals, least-squares nu.
    if p:
        x, *_ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
    else:
        x = np.zeros(n)
    s_raw = b_in - A_in @ x
    s = s_raw + max(0.0, 1.0 - float(s_raw.min()))
    lam = np.ones(q)
    if p:
        nu, *_ = np.linalg.lstsq(A_eq.T, -(Qw @ x + qp.c + A_in.T @ lam), rcond=None)
    else:
        nu = np.zeros(0)

    for iteration in range(1, max_iter + 1):
        r_d = Qw @ x + qp.c + A_in.T @ lam
        if p:
            r_d = r_d + A_eq.T @ nu
        r_p = (A_eq @ x - b_eq) if p else np.zeros(0)
        r_i = A_in @ x + s - b_in
        mu = float(s @ lam) / q

        residuals = evaluate_kkt(qp, x, nu, lam)
        diagnostics["trace"].append(
            {
                "iteration": iteration,
                "primal_objective": qp.objective(x),
                "dual_objective": _dual_objective(Qw, qp.c0, qp.c, A_eq, b_eq, A_in, b_in, nu, lam),
                "mu": mu,
                "residuals": residuals,
            }
        )
        if meets_tolerance(qp, residuals, tol):
            return finish(x, nu, lam, "optimal", iteration)

        if np.abs(x).max(initial=0.0) > 1e9:
            return finish(x, nu, lam, "unbounded", iteration)
        if np.abs(lam).max(initial=0.0) > 1e8 and (
            residuals["primal_eq"] > tol or residuals["primal_in"] > tol
        ):
            return finish(x, nu, lam, "infeasible", iteration)

        W = lam / s
        M = Qw + (A_in.T * W) @ A_in + STATIC_REG * np.eye(n)
        if p:
            K = np.block([[M, A_eq.T], [A_eq, -STATIC_REG * np.eye(p)]])
        else:
            K = M
        solver = _ldl_solver(K)

        def direction(rhs_c):
            rhs1 = -(r_d + A_in.T @ (rhs_c / s + W * r_i))
            rhs = np.concatenate([rhs1, -r_p]) if p else rhs1
            step = solver(rhs)
            dx = step[:n]
            dnu = step[n:] if p else np.zeros(0)
            dlam = rhs_c / s + W * (r_i + A_in @ dx)
            ds = -r_i - A_in @ dx
            return dx, dnu, dlam, ds

        # Predictor (affine scaling) step.
        dx_a, dnu_a, dlam_a, ds_a = direction(-s * lam)
        alpha_aff = min(1.0, _max_step(s, ds_a), _max_step(lam, dlam_a))
        mu_aff = float((s + alpha_aff * ds_a) @ (lam + alpha_aff * dlam_a)) / q
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # Corrector step reuses the factorization.
        rhs_c = sigma * mu - s * lam - ds_a * dlam_a
        dx, dnu, dlam, ds = direction(rhs_c)
        alpha = min(1.0, STEP_FRACTION * _max_step(s, ds), STEP_FRACTION * _max_step(lam, dlam))
        if alpha <= 1e-14:
            return finish(x, nu, lam, "max-iterations", iteration)

        x = x + alpha * dx
        s = s + alpha * ds
        lam = lam + alpha * dlam
        if p:
            nu = nu + alpha * dnu

    return finish(x, nu, lam, "max-iterations", max_iter)


def solve(
    qp: QuadProgram,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    use_presolve: bool = True,
) -> QpSolution:
    """Solve the QP and return primal and dual solutions with KKT residuals."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not use_presolve:
        return _ipm(qp, tol, max_iter)
    try:
        reduced, transform = presolve(qp)
    except InfeasibleProblem as exc:
        return QpSolution(
            x=np.full(qp.n, np.nan),
            nu=np.zeros(qp.n_eq),
            lam=np.zeros(qp.n_in),
            objective=np.nan,
            status="infeasible",
            iterations=0,
            kkt_residuals={"dual": np.inf, "primal_eq": np.inf, "primal_in": np.inf, "complementarity": np.inf},
            diagnostics={"reason": str(exc)},
        )
    if reduced.n == 0:
        empty = QpSolution(
            x=np.zeros(0),
            nu=np.zeros(reduced.n_eq),
            lam=np.zeros(reduced.n_in),
            objective=reduced.c0,
            status="optimal",
            iterations=0,
            kkt_residuals={"dual": 0.0, "primal_eq": 0.0, "primal_in": 0.0, "complementarity": 0.0},
            diagnostics={"diag_floor_applied": False, "trace": []},
        )
        recovered = transform.recover(empty)
        feasible = (
            recovered.kkt_residuals["primal_eq"] <= max(tol, 1e-9)
            and recovered.kkt_residuals["primal_in"] <= max(tol, 1e-9)
        )
        if not feasible:
            recovered.status = "infeasible"
        return recovered
    reduced_solution = _ipm(reduced, tol, max_iter)
    return transform.recover(reduced_solution)
