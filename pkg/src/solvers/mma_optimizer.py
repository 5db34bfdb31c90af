"""
Method of Moving Asymptotes for the relaxed layout problem, with penalty
continuation and moving limits.

Each iteration builds the convex separable MMA approximation of the scaled
objective around the current design, writes the affine constraints in the
same MMA form (their Jacobian never changes, so the coefficient matrices keep
the sparsity of the spacing matrix), and solves the subproblem with the
primal-dual interior-point Newton method of Svanberg's subsolv.
"""

import logging
import time
from typing import Optional, Tuple

import numpy as np
from scipy import sparse

from src.solvers.problem import LayoutProblem
from src.solvers.results import IterationRecord, MmaSettings, SolveResult, SolverError, Termination
from src.solvers.rounding import round_design

logger = logging.getLogger(__name__)

MIN_ASYMPTOTE_OFFSET = 0.01
MAX_ASYMPTOTE_OFFSET = 10.0
# KKT residual of the solved subproblem above which the iteration is aborted
SUBPROBLEM_ABORT_TOLERANCE = 1e-4
MAX_NEWTON_STEPS = 500
MAX_LINE_SEARCH_HALVINGS = 50


class MMA:
    """
    MMA state for n variables in [0, 1] and the constant linear constraints
    A x <= b (A sparse, m rows). Artificial variables y_i enter the
    subproblem with cost c*y_i + d/2*y_i**2; a_0 = 1 and a_i = 0, so the
    variable z decouples from the constraints.
    """

    def __init__(self, x_init: np.ndarray, A: sparse.csr_matrix, settings: MmaSettings):
        self.settings = settings
        self.n = x_init.size
        self.m = A.shape[0]

        self.x = np.array(x_init, dtype=float)
        self.x1 = self.x.copy()
        self.x2 = self.x.copy()

        self.A_pos = A.maximum(0).tocsr()
        self.A_neg = (-A).maximum(0).tocsr()

        self.L = np.zeros(self.n)
        self.U = np.ones(self.n)
        self.alpha = np.zeros(self.n)
        self.beta = np.ones(self.n)
        self.p0 = np.zeros(self.n)
        self.q0 = np.zeros(self.n)
        self.P = sparse.csr_matrix((self.m, self.n))
        self.Q = sparse.csr_matrix((self.m, self.n))
        self.b = np.zeros(self.m)

        self.dual = np.zeros(self.m)
        self.kkt_residual = 0.0
        self.mma_iter = 0

    def update_asymptotes(self):
        s = self.settings
        if self.mma_iter < 2:
            self.L = self.x - s.asyinit
            self.U = self.x + s.asyinit
        else:
            # oscillating variables contract, monotone ones relax
            indc = (self.x - self.x1) * (self.x1 - self.x2)
            factor = np.where(indc > 0, s.asyincr, np.where(indc < 0, s.asydecr, 1.0))
            self.L = self.x - factor * (self.x1 - self.L)
            self.U = self.x + factor * (self.U - self.x1)

            self.L = np.minimum(self.L, self.x - MIN_ASYMPTOTE_OFFSET)
            self.L = np.maximum(self.L, self.x - MAX_ASYMPTOTE_OFFSET)
            self.U = np.maximum(self.U, self.x + MIN_ASYMPTOTE_OFFSET)
            self.U = np.minimum(self.U, self.x + MAX_ASYMPTOTE_OFFSET)

        self.alpha = np.maximum.reduce([
            self.L + s.albefa * (self.x - self.L),
            self.x - s.move_limit,
            np.zeros(self.n),
        ])
        self.beta = np.minimum.reduce([
            self.U - s.albefa * (self.U - self.x),
            self.x + s.move_limit,
            np.ones(self.n),
        ])

    def build_subproblem(self, f: float, df: np.ndarray, g: np.ndarray):
        """MMA coefficients at the current point for objective f and constraint values g"""
        s = self.settings
        ux1 = self.U - self.x
        xl1 = self.x - self.L
        ux2 = ux1 ** 2
        xl2 = xl1 ** 2

        df_pos = np.maximum(df, 0.0)
        df_neg = np.maximum(-df, 0.0)
        reg = s.raa0 / (self.U - self.L)
        self.p0 = ux2 * (1.001 * df_pos + 0.001 * df_neg + reg)
        self.q0 = xl2 * (0.001 * df_pos + 1.001 * df_neg + reg)

        self.P = (self.A_pos @ sparse.diags(ux2)).tocsr()
        self.Q = (self.A_neg @ sparse.diags(xl2)).tocsr()
        # the approximation reproduces g at the current point
        self.b = self.A_pos @ ux1 + self.A_neg @ xl1 - g

    def _kkt_residual(self, x, y, z, lam, xsi, eta, mu, zet, slack, epsi: float) -> np.ndarray:
        s = self.settings
        ux1 = self.U - x
        xl1 = x - self.L
        plam = self.p0 + self.P.T @ lam
        qlam = self.q0 + self.Q.T @ lam
        gvec = self.P @ (1.0 / ux1) + self.Q @ (1.0 / xl1)
        return np.concatenate([
            plam / ux1 ** 2 - qlam / xl1 ** 2 - xsi + eta,
            s.c + s.d * y - mu - lam,
            [1.0 - zet],
            gvec - y + slack - self.b,
            xsi * (x - self.alpha) - epsi,
            eta * (self.beta - x) - epsi,
            mu * y - epsi,
            [zet * z - epsi],
            lam * slack - epsi,
        ])

    def solve_subproblem(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Primal-dual Newton solve of the current subproblem

            min  sum p0/(U-x) + q0/(x-L) + z + sum c*y + d/2*y**2
            s.t. sum_j P_ij/(U_j-x_j) + Q_ij/(x_j-L_j) - y_i <= b_i
                 alpha <= x <= beta, y >= 0, z >= 0

        with the barrier parameter reduced tenfold down to the subproblem
        tolerance. The Newton system is reduced to the n design variables.
        Returns the design and the multipliers.
        """
        s = self.settings
        m = self.m
        alpha, beta = self.alpha, self.beta
        c = np.full(m, s.c)
        d = np.full(m, s.d)

        x = 0.5 * (alpha + beta)
        y = np.ones(m)
        z = 1.0
        lam = np.ones(m)
        xsi = np.maximum(1.0 / (x - alpha), 1.0)
        eta = np.maximum(1.0 / (beta - x), 1.0)
        mu = np.maximum(1.0, 0.5 * c)
        zet = 1.0
        slack = np.ones(m)

        epsi = 1.0
        while epsi > 0.5 * s.subproblem_tolerance:
            residual = self._kkt_residual(x, y, z, lam, xsi, eta, mu, zet, slack, epsi)
            residual_norm = float(np.linalg.norm(residual))
            residual_max = float(np.max(np.abs(residual)))

            steps = 0
            while residual_max > 0.9 * epsi and steps < MAX_NEWTON_STEPS:
                steps += 1
                ux1 = self.U - x
                xl1 = x - self.L
                ux2 = ux1 ** 2
                xl2 = xl1 ** 2
                plam = self.p0 + self.P.T @ lam
                qlam = self.q0 + self.Q.T @ lam
                gvec = self.P @ (1.0 / ux1) + self.Q @ (1.0 / xl1)
                GG = (self.P @ sparse.diags(1.0 / ux2) - self.Q @ sparse.diags(1.0 / xl2)).tocsr()

                delx = plam / ux2 - qlam / xl2 - epsi / (x - alpha) + epsi / (beta - x)
                dely = c + d * y - lam - epsi / y
                delz = 1.0 - epsi / z
                dellam = gvec - y - self.b + epsi / lam
                diagx = 2.0 * (plam / (ux2 * ux1) + qlam / (xl2 * xl1)) + xsi / (x - alpha) + eta / (beta - x)
                diagy = d + mu / y
                diaglamyi = slack / lam + 1.0 / diagy
                dellamyi = dellam + dely / diagy

                # the volume rows couple every site, so the reduced matrix is dense
                Axx = (sparse.diags(diagx) + GG.T @ sparse.diags(1.0 / diaglamyi) @ GG).toarray()
                bx = delx + GG.T @ (dellamyi / diaglamyi)
                dx = np.linalg.solve(Axx, -bx)
                dz = -delz * z / zet
                dlam = (GG @ dx + dellamyi) / diaglamyi

                dy = (dlam - dely) / diagy
                dxsi = -xsi + epsi / (x - alpha) - xsi * dx / (x - alpha)
                deta = -eta + epsi / (beta - x) + eta * dx / (beta - x)
                dmu = -mu + epsi / y - mu * dy / y
                dzet = -zet + epsi / z - zet * dz / z
                dslack = -slack + epsi / lam - slack * dlam / lam

                # largest step keeping every positive variable strictly interior
                positive = np.concatenate([y, [z], lam, xsi, eta, mu, [zet], slack])
                dpositive = np.concatenate([dy, [dz], dlam, dxsi, deta, dmu, [dzet], dslack])
                steg = 1.0 / max(
                    float(np.max(-1.01 * dpositive / positive)),
                    float(np.max(-1.01 * dx / (x - alpha))),
                    float(np.max(1.01 * dx / (beta - x))),
                    1.0,
                )

                old = (x, y, z, lam, xsi, eta, mu, zet, slack)
                direction = (dx, dy, dz, dlam, dxsi, deta, dmu, dzet, dslack)
                new_norm = 2.0 * residual_norm
                halvings = 0
                while new_norm > residual_norm and halvings < MAX_LINE_SEARCH_HALVINGS:
                    halvings += 1
                    x, y, z, lam, xsi, eta, mu, zet, slack = (v + steg * dv for v, dv in zip(old, direction))
                    residual = self._kkt_residual(x, y, z, lam, xsi, eta, mu, zet, slack, epsi)
                    new_norm = float(np.linalg.norm(residual))
                    steg /= 2.0
                stalled = new_norm > residual_norm
                residual_norm = new_norm
                residual_max = float(np.max(np.abs(residual)))
                if stalled:
                    break
            epsi *= 0.1

        kkt = self._kkt_residual(x, y, z, lam, xsi, eta, mu, zet, slack, 0.0)
        self.kkt_residual = float(np.max(np.abs(kkt))) if np.all(np.isfinite(kkt)) else float("inf")
        if self.kkt_residual > s.subproblem_tolerance:
            logger.debug(f"MMA subproblem KKT residual {self.kkt_residual:.2e}")
        if not self.kkt_residual <= SUBPROBLEM_ABORT_TOLERANCE:
            raise SolverError(
                f"MMA subproblem did not converge (KKT residual {self.kkt_residual:.3e})",
                iteration_dump=self.dump(lam),
            )
        return np.clip(x, alpha, beta), lam

    def update(self, f: float, df: np.ndarray, g: np.ndarray) -> np.ndarray:
        """One MMA step from the current point; returns the new design"""
        self.update_asymptotes()
        self.build_subproblem(f, df, g)
        x_new, self.dual = self.solve_subproblem()

        self.x2 = self.x1.copy()
        self.x1 = self.x.copy()
        self.x = x_new
        self.mma_iter += 1
        return x_new

    def dump(self, lam: Optional[np.ndarray] = None) -> dict:
        return {
            "mma_iter": self.mma_iter,
            "x": self.x.tolist(),
            "L": self.L.tolist(),
            "U": self.U.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "dual": (self.dual if lam is None else lam).tolist(),
            "kkt_residual": self.kkt_residual,
        }


def mma_solve(problem: LayoutProblem, settings: MmaSettings) -> SolveResult:
    """
    Run MMA with penalty continuation from the uniform initial density.

    Stops when the step norm drops below the tolerance once the penalty has
    reached its floor, or after max_iterations. The continuous result is
    rounded and repaired into a binary layout.
    """
    start = time.perf_counter()
    constraints = problem.constraints
    x = np.full(problem.n_sites, settings.initial_density)
    mma = MMA(x, constraints.jacobian(), settings)

    scale = None
    history = []
    iterates = []
    termination = Termination.MAX_ITERATIONS
    q = settings.penalty_at(1)
    iteration = 0

    for iteration in range(1, settings.max_iterations + 1):
        q = settings.penalty_at(iteration)
        report = problem.evaluate(x, q)
        g = constraints.values(x)
        if not (np.isfinite(report.aep_gwh) and np.all(np.isfinite(report.gradient)) and np.all(np.isfinite(g))):
            raise SolverError(
                f"Non-finite objective or gradient at iteration {iteration}",
                iteration_dump={"iteration": iteration, "q": q, **mma.dump()},
            )
        if scale is None:
            # objective scaled by the AEP at the initial design
            scale = report.aep_gwh if report.aep_gwh > 0 else 1.0

        x_new = mma.update(report.objective / scale, report.gradient / scale, g)
        step = float(np.linalg.norm(x_new - x))
        violation = float(max(0.0, g.max()))

        history.append(IterationRecord(iteration=iteration, q=q, aep_gwh=report.aep_gwh,
                                       max_violation=violation, step_norm=step))
        iterates.append(x.copy())
        logger.info(f"MMA {iteration:4d} | q={q:5.2f} | AEP={report.aep_gwh:10.3f} GWh | "
                    f"viol={violation:.2e} | step={step:.2e}")

        x = x_new
        if step < settings.step_tolerance and settings.continuation_done(q):
            termination = Termination.CONVERGED
            break

    final_continuous = problem.evaluate(x, q).aep_gwh
    rounding = round_design(x, constraints)
    aep_binary = problem.binary_aep(rounding.selected)
    elapsed = time.perf_counter() - start

    logger.info(f"MMA finished ({termination}) after {iteration} iterations: "
                f"{int(rounding.selected.sum())} turbines, AEP {aep_binary:.3f} GWh")

    return SolveResult(
        solver="mma",
        rho=x,
        selected=rounding.selected,
        aep_gwh=aep_binary,
        iterations=iteration,
        evaluations=iteration,
        termination=termination,
        wall_seconds=elapsed,
        feasible=rounding.feasible,
        repair_needed=rounding.repair_needed,
        aep_continuous_gwh=final_continuous,
        final_q=q,
        history=history,
        iterates=iterates,
    )
