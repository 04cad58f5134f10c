"""Space-time interface problems and their iterative solution.

Two formulations are provided on a box decomposition with one time grid per
subdomain:

* the Schur (Steklov-Poincare) problem for a Dirichlet trace ``lam`` that lives
  on one master time grid, optionally preconditioned by weighted Neumann
  solves;
* the Robin problem for one Robin datum ``zeta_i`` per subdomain, each on the
  subdomain's own grid, solved by GMRES or by Jacobi iterations (optimized
  Schwarz waveform relaxation).

Interface data are arrays of shape ``(M, n_edges)``. Traces move between time
grids only through the piecewise-constant L2 projection, once per exchange.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GridMismatch, InvalidRobinParameter, WindowFailure
from .geometry import Decomposition
from .linsolve import KrylovReport, gmres
from .mhfe import Coefficients, InterfaceBC, Patch
from .propagate import MarchResult, SpaceTimeSolution, SubdomainProblem, SubdomainSolver
from .timegrid import TimeGrid, project_values


class Method(enum.Enum):
    SCHUR = "gtp-schur"
    SCHUR_NN = "gtp-schur-nn"
    ROBIN = "gto-schwarz"

    @property
    def sweeps_per_iteration(self) -> int:
        return 2 if self is Method.SCHUR_NN else 1


@dataclass
class Weights:
    """Neumann-Neumann weights sigma_{i,j}, one value per edge of the (i, j) interface."""

    sigma: dict

    @classmethod
    def from_diffusion(cls, decomp: Decomposition, d: np.ndarray, normalize: bool = False) -> "Weights":
        sigma = {}
        for (i, j), edges in decomp.interface_edges.items():
            ee = decomp.mesh.edge_elements[edges]
            owner = decomp.elem_sub[ee[:, 0]]
            d_minus, d_plus = d[ee[:, 0]], d[ee[:, 1]]
            d_i = np.where(owner == i, d_minus, d_plus)
            d_j = np.where(owner == i, d_plus, d_minus)
            s_ij = (d_i / (d_i + d_j)) ** 2
            s_ji = (d_j / (d_i + d_j)) ** 2
            if normalize:
                s_ij, s_ji = s_ij / (s_ij + s_ji), s_ji / (s_ij + s_ji)
            sigma[(i, j)] = s_ij
            sigma[(j, i)] = s_ji
        return cls(sigma)


@dataclass
class DDResult:
    method: str
    solutions: list  # SpaceTimeSolution per subdomain
    interface: object  # converged lam array or list of zeta arrays
    report: KrylovReport
    c_final: np.ndarray  # global, per element
    phi_final: np.ndarray  # global, (n_elements, 4)
    b_history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.report.converged


class DDProblem:
    """A decomposed advection-diffusion problem with per-subdomain time grids.

    ``alpha`` gives the Robin parameters: a scalar, a pair ``(a12, a21)`` for
    two subdomains, or a dict ``{(i, j): alpha_ij}`` over ordered neighbour
    pairs. ``master`` selects the subdomain whose grid carries ``lam``.
    """

    def __init__(self, decomp: Decomposition, coeffs: Coefficients, grids, source=None, c0=None,
                 dirichlet=None, alpha=None, master: int = 0, t_offset: float = 0.0,
                 normalize_weights: bool = False):
        self.decomp = decomp
        self.mesh = decomp.mesh
        self.coeffs = coeffs
        n_sub = decomp.n_sub
        if isinstance(grids, TimeGrid):
            grids = [grids] * n_sub
        if len(grids) != n_sub:
            raise GridMismatch(f"{len(grids)} time grids for {n_sub} subdomains")
        T = grids[0].T
        for g in grids:
            if abs(g.T - T) > 1e-13 * T:
                raise GridMismatch("all subdomain grids must share the horizon")
        self.grids = list(grids)
        self.master = int(master)
        c0 = np.zeros(self.mesh.n_elements) if c0 is None else np.asarray(c0, dtype=float)
        self.gamma = decomp.gamma_edges
        g_pos = -np.ones(self.mesh.n_edges, dtype=np.int64)
        g_pos[self.gamma] = np.arange(len(self.gamma))

        self.subs: list[SubdomainSolver] = []
        self.gamma_cols = []  # positions of subdomain i's interface edges in gamma
        self.pair_cols = []  # pair_cols[i][j]: columns of the (i, j) interface in i's traces
        for i in range(n_sub):
            edges = np.sort(np.concatenate(
                [decomp.interface_edges[(min(i, j), max(i, j))] for j in decomp.neighbors[i]]
            )) if decomp.neighbors[i] else np.zeros(0, dtype=np.int64)
            elems = decomp.sub_elements[i]
            patch = Patch(self.mesh, elems, iface_edges=edges)
            pos = {int(e): p for p, e in enumerate(edges)}
            cols = {}
            neighbor = -np.ones(len(edges), dtype=np.int64)
            for j in decomp.neighbors[i]:
                pe = decomp.interface_edges[(min(i, j), max(i, j))]
                cols[j] = np.array([pos[int(e)] for e in pe], dtype=np.int64)
                neighbor[cols[j]] = j
            pb = SubdomainProblem(i, patch, coeffs.restrict(elems), self.grids[i], c0[elems], source,
                                  dirichlet, t_offset, neighbor)
            self.subs.append(SubdomainSolver(pb))
            self.gamma_cols.append(g_pos[edges])
            self.pair_cols.append(cols)
        self.weights = Weights.from_diffusion(decomp, coeffs.d, normalize_weights)
        if alpha is not None:
            self.set_alpha(alpha)

    # ------------------------------------------------------------------ setup
    @property
    def n_sub(self) -> int:
        return len(self.subs)

    @property
    def master_grid(self) -> TimeGrid:
        return self.grids[self.master]

    @property
    def solve_count(self) -> int:
        return sum(s.solve_count for s in self.subs)

    def set_alpha(self, alpha):
        pairs = [(i, j) for i in range(self.n_sub) for j in self.decomp.neighbors[i]]
        if isinstance(alpha, dict):
            table = {k: float(v) for k, v in alpha.items()}
        elif np.ndim(alpha) == 0:
            table = {p: float(alpha) for p in pairs}
        else:
            a12, a21 = (float(v) for v in alpha)
            table = {p: (a12 if p[0] < p[1] else a21) for p in pairs}
        for p in pairs:
            if p not in table:
                raise InvalidRobinParameter(f"missing Robin parameter for pair {p}")
            if not table[p] > 0:
                raise InvalidRobinParameter(f"Robin parameter for pair {p} must be positive")
        self.alpha = table
        for i, sub in enumerate(self.subs):
            n_if = sub.problem.n_iface
            a_in, a_out = np.zeros(n_if), np.zeros(n_if)
            for j, cols in self.pair_cols[i].items():
                a_in[cols] = table[(i, j)]
                a_out[cols] = table[(j, i)]
            if n_if:
                sub.set_robin(a_in, a_out)

    def set_window(self, c0_global: np.ndarray, t_offset: float):
        """Restart from a new initial state at absolute time ``t_offset``."""
        for i, sub in enumerate(self.subs):
            sub.problem.c0 = np.asarray(c0_global, dtype=float)[self.decomp.sub_elements[i]].copy()
            sub.problem.t_offset = float(t_offset)
            sub.reset_data()

    def reset_counts(self):
        for s in self.subs:
            s.solve_count = 0

    # ---------------------------------------------------------------- weights
    def schur_weights(self) -> np.ndarray:
        g = self.master_grid
        return np.outer(g.dt, self.mesh.edge_length[self.gamma]).ravel()

    def robin_weights(self) -> np.ndarray:
        return np.concatenate([np.outer(s.grid.dt, s.problem.patch.iface_length).ravel() for s in self.subs])

    # ------------------------------------------------------------------ Schur
    def _to_sub(self, lam: np.ndarray, i: int) -> np.ndarray:
        return project_values(lam[:, self.gamma_cols[i]], self.master_grid, self.grids[i])

    def _flux_sum(self, results) -> np.ndarray:
        out = np.zeros((self.master_grid.M, len(self.gamma)))
        for i, res in enumerate(results):
            out[:, self.gamma_cols[i]] += project_values(res.flux, self.grids[i], self.master_grid)
        return out

    def schur_apply(self, lam: np.ndarray) -> np.ndarray:
        """Flux jump sum_i -phi_i(lam, 0, 0) . n_i on the master grid."""
        lam = np.asarray(lam, dtype=float).reshape(self.master_grid.M, len(self.gamma))
        results = [s.march(InterfaceBC.DIRICHLET, self._to_sub(lam, i), homogeneous=True)
                   for i, s in enumerate(self.subs)]
        return self._flux_sum(results)

    def schur_rhs(self) -> np.ndarray:
        """sum_i phi_i(0, f, c0) . n_i, so that S lam = chi is flux continuity."""
        results = [s.march(InterfaceBC.DIRICHLET, np.zeros((s.grid.M, s.problem.n_iface)))
                   for s in self.subs]
        return -self._flux_sum(results)

    def nn_precondition(self, r: np.ndarray, weights: Optional[Weights] = None) -> np.ndarray:
        """sum_i D_i N_i D_i r with D_i = sqrt(sigma_ij) per edge, back on the master grid."""
        w = weights or self.weights
        r = np.asarray(r, dtype=float).reshape(self.master_grid.M, len(self.gamma))
        out = np.zeros_like(r)
        for i, s in enumerate(self.subs):
            delta = np.zeros(s.problem.n_iface)
            for j, cols in self.pair_cols[i].items():
                delta[cols] = np.sqrt(w.sigma[(i, j)])
            psi = self._to_sub(r, i) * delta
            res = s.march(InterfaceBC.NEUMANN, psi, homogeneous=True)
            out[:, self.gamma_cols[i]] += project_values(res.theta * delta, self.grids[i], self.master_grid)
        return out

    def reconstruct_schur(self, lam: np.ndarray):
        lam = np.asarray(lam, dtype=float).reshape(self.master_grid.M, len(self.gamma))
        return [s.march(InterfaceBC.DIRICHLET, self._to_sub(lam, i), keep_fields=True)
                for i, s in enumerate(self.subs)]

    # ------------------------------------------------------------------ Robin
    def zero_robin(self) -> list:
        return [np.zeros((s.grid.M, s.problem.n_iface)) for s in self.subs]

    def pack(self, zeta) -> np.ndarray:
        return np.concatenate([np.asarray(z, dtype=float).ravel() for z in zeta])

    def unpack(self, v: np.ndarray) -> list:
        out, start = [], 0
        for s in self.subs:
            size = s.grid.M * s.problem.n_iface
            out.append(np.asarray(v[start:start + size]).reshape(s.grid.M, s.problem.n_iface))
            start += size
        return out

    def exchange(self, outgoing) -> list:
        """Incoming Robin data: zeta_j <- Pi_{j,i}(outgoing_i) over each interface."""
        incoming = self.zero_robin()
        for i in range(self.n_sub):
            for j, cols_i in self.pair_cols[i].items():
                cols_j = self.pair_cols[j][i]
                incoming[j][:, cols_j] = project_values(outgoing[i][:, cols_i], self.grids[i], self.grids[j])
        return incoming

    def _robin_sweep(self, zeta, homogeneous: bool, keep_fields: bool = False):
        results = [s.march(InterfaceBC.ROBIN, zeta[i], homogeneous=homogeneous, keep_fields=keep_fields)
                   for i, s in enumerate(self.subs)]
        outgoing = [s.outgoing_robin(r) for s, r in zip(self.subs, results)]
        return results, outgoing

    def robin_apply(self, zeta) -> list:
        """zeta_i - Pi_{i,j}(-phi_j . n_i + alpha_ij theta_j)(zeta_j, 0, 0)."""
        _, outgoing = self._robin_sweep(zeta, homogeneous=True)
        incoming = self.exchange(outgoing)
        return [z - g for z, g in zip(zeta, incoming)]

    def robin_rhs(self) -> list:
        _, outgoing = self._robin_sweep(self.zero_robin(), homogeneous=False)
        return self.exchange(outgoing)

    def b_quantity(self, outgoing) -> float:
        """Weighted squared norm of the outgoing Robin traces on their own grids."""
        total = 0.0
        for s, g in zip(self.subs, outgoing):
            total += float(np.sum(s.grid.dt[:, None] * s.problem.patch.iface_length[None, :] * g**2))
        return total

    def robin_norm(self, zeta) -> float:
        return float(np.sqrt(np.sum(self.robin_weights() * self.pack(zeta) ** 2)))

    # ---------------------------------------------------------------- drivers
    def oswr_jacobi(self, g=None, tol: float = 1e-6, max_iter: int = 200,
                    fixed_iterations: Optional[int] = None, reconstruct: bool = True,
                    callback=None) -> DDResult:
        """Jacobi iterations on the Robin data (optimized Schwarz waveform relaxation).

        The residual of iterate k is ``zeta^{k+1} - zeta^k``, available after the
        sweep that produces ``zeta^{k+1}``; the history is relative to the norm
        of the right-hand side (or to the initial residual when it vanishes).
        With ``fixed_iterations`` exactly that many sweeps are made.
        """
        zeta = self.zero_robin() if g is None else [np.array(z, dtype=float) for z in g]
        warm = any(np.any(z != 0) for z in zeta)
        report = KrylovReport()
        ref = None
        if warm:
            chi = self.robin_rhs()
            ref = self.robin_norm(chi)
        b_hist = []
        n_iter = fixed_iterations if fixed_iterations is not None else max_iter
        results = None
        for k in range(n_iter + 1):
            results, outgoing = self._robin_sweep(zeta, homogeneous=False, keep_fields=False)
            new = self.exchange(outgoing)
            b_hist.append(self.b_quantity(outgoing))
            res = self.robin_norm([a - b for a, b in zip(new, zeta)])
            if ref is None:
                ref = res  # zero initial guess: r^0 = chi
            if ref == 0.0:
                ref = res if res > 0 else 1.0
            rel = res / ref if ref > 0 else 0.0
            report.residual_history.append(rel)
            if callback is not None:
                callback(k, rel)
            if res == 0.0 or (fixed_iterations is None and rel <= tol):
                report.converged = True
                break
            if k == n_iter:
                break
            zeta = new
            report.iterations = k + 1
        if fixed_iterations is not None:
            report.converged = report.residual_history[-1] <= tol
        report.subdomain_solve_count = report.iterations
        sols = None
        if reconstruct:
            sols = [r.solution for r in self._robin_sweep(zeta, homogeneous=False, keep_fields=True)[0]]
        return self._result(Method.ROBIN.value + "-jacobi", sols, zeta, report, b_hist)

    def solve_gmres(self, method, tol: float = 1e-6, max_iter: int = 500, x0=None,
                    restart: Optional[int] = None, reconstruct: bool = True, callback=None) -> DDResult:
        method = Method(method)
        if method is Method.ROBIN:
            b = self.pack(self.robin_rhs())
            apply = lambda v: self.pack(self.robin_apply(self.unpack(v)))
            precond = None
            w = self.robin_weights()
            x0v = None if x0 is None else self.pack(x0)
        else:
            b = self.schur_rhs().ravel()
            apply = lambda v: self.schur_apply(v).ravel()
            precond = (lambda v: self.nn_precondition(v).ravel()) if method is Method.SCHUR_NN else None
            w = self.schur_weights()
            x0v = None if x0 is None else np.asarray(x0, dtype=float).ravel()
        x, report = gmres(apply, b, x0=x0v, tol=tol, max_iter=max_iter, precond=precond,
                          restart=restart, weights=w, callback=callback)
        report.subdomain_solve_count = report.iterations * method.sweeps_per_iteration
        sols = None
        if method is Method.ROBIN:
            data = self.unpack(x)
            if reconstruct:
                sols = [r.solution for r in self._robin_sweep(data, homogeneous=False, keep_fields=True)[0]]
        else:
            data = x.reshape(self.master_grid.M, len(self.gamma))
            if reconstruct:
                sols = [r.solution for r in self.reconstruct_schur(data)]
        return self._result(method.value, sols, data, report)

    def _result(self, name, sols, data, report, b_hist=None) -> DDResult:
        c = np.zeros(self.mesh.n_elements)
        phi = np.zeros((self.mesh.n_elements, 4))
        if sols is not None:
            for i, sol in enumerate(sols):
                els = self.decomp.sub_elements[i]
                c[els] = sol.c_final
                if sol.states:
                    phi[els] = sol.phi_final
        return DDResult(name, sols, data, report, c, phi, b_hist or [])

    def solve(self, method: str, tol: float = 1e-6, max_iter: int = 500, x0=None, **kw) -> DDResult:
        """Dispatch on a method name, including ``"oswr-jacobi"``."""
        if method == "oswr-jacobi":
            return self.oswr_jacobi(g=x0, tol=tol, max_iter=max_iter, **kw)
        return self.solve_gmres(method, tol=tol, max_iter=max_iter, x0=x0, **kw)


@dataclass
class WindowedResult:
    windows: list  # DDResult per window
    c_history: list  # global c at the end of each window
    t_end: list

    @property
    def c_final(self) -> np.ndarray:
        return self.c_history[-1]

    @property
    def iterations(self) -> list:
        return [w.report.iterations for w in self.windows]


def run_time_windows(problem: DDProblem, window_count: int, method: str, tol: float = 1e-6,
                     max_iter: int = 500, c0=None, on_window=None) -> WindowedResult:
    """Solve consecutive windows of length ``problem``'s horizon.

    Each window starts from the previous window's final concentration and uses
    the previous converged interface data as the initial guess.
    """
    if window_count < 1:
        raise ValueError("window_count must be positive")
    T = problem.master_grid.T
    if c0 is None:
        c = np.zeros(problem.mesh.n_elements)
        for i, s in enumerate(problem.subs):
            c[problem.decomp.sub_elements[i]] = s.problem.c0
    else:
        c = np.array(c0, dtype=float)
    base = problem.subs[0].problem.t_offset
    guess = None
    out = WindowedResult([], [], [])
    for w in range(window_count):
        problem.set_window(c, base + w * T)
        res = problem.solve(method, tol=tol, max_iter=max_iter, x0=guess)
        if not res.converged:
            raise WindowFailure(w, f"{method} did not reach {tol} in {max_iter} iterations")
        guess = res.interface
        c = res.c_final
        out.windows.append(res)
        out.c_history.append(c.copy())
        out.t_end.append(base + (w + 1) * T)
        if on_window is not None:
            on_window(w, res)
    return out


def write_residual_csv(path, report: KrylovReport, sweeps_per_iteration: int = 1):
    """CSV with columns iteration, relative_residual, cumulative_subdomain_solves."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "relative_residual", "cumulative_subdomain_solves"])
        for k, r in enumerate(report.residual_history):
            wr.writerow([k, f"{r:.12e}", k * sweeps_per_iteration])
