"""Optimized two-sided Robin parameters and parameter sweeps.

The convergence factor comes from the Fourier reduction of the two-half-plane
problem, in time (frequency k) and along the interface (wavenumber xi). Side
``i`` has diffusion ``d_i``, porosity ``w_i``, normal velocity
``a_i = u_i . n_i`` measured with its own outward normal and tangential
velocity ``b_i`` along a common tangent; its flux symbol is

    z_i(k, xi) = (sqrt(a_i^2 + 4 d_i (w_i i k + d_i xi^2 + i b_i xi)) - a_i) / 2,

and one double Jacobi sweep contracts a Fourier mode by

    rho = |(a12 - z_2)(a21 - z_1)| / |(a12 + z_1)(a21 + z_2)|.

A model without a tangential band uses xi = 0 only (the 1D reduction).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidRobinParameter

N_FREQ = 200
N_XI = 30  # tangential wavenumbers per sign


@dataclass(frozen=True)
class InterfaceModel:
    d: tuple  # (d_1, d_2)
    omega: tuple  # porosities
    a: tuple  # normal velocities u_i . n_i
    band: tuple  # (k_min, k_max)
    tangential: tuple = (0.0, 0.0)  # velocities b_i along the interface
    xi_band: Optional[tuple] = None  # (xi_min, xi_max); None for the 1D reduction

    def __post_init__(self):
        if min(self.d) <= 0 or min(self.omega) <= 0:
            raise ValueError("diffusion and porosity must be positive")
        if not 0 < self.band[0] < self.band[1]:
            raise ValueError(f"bad frequency band {self.band}")
        if self.xi_band is not None and not 0 < self.xi_band[0] < self.xi_band[1]:
            raise ValueError(f"bad tangential band {self.xi_band}")

    @classmethod
    def from_grids(cls, d, omega, a, T: float, dt_min: float, tangential=(0.0, 0.0),
                   length: Optional[float] = None, h: Optional[float] = None) -> "InterfaceModel":
        """Band [pi/T, pi/dt_min] in time and, given the interface length and
        mesh size, [pi/length, pi/h] along the interface."""
        xi_band = None if length is None or h is None else (np.pi / length, np.pi / h)
        return cls(tuple(map(float, d)), tuple(map(float, omega)), tuple(map(float, a)),
                   (np.pi / T, np.pi / dt_min), tuple(map(float, tangential)), xi_band)

    @classmethod
    def from_problem(cls, problem, i: int = 0, j: int = 1) -> "InterfaceModel":
        """Interface-averaged model of the (i, j) interface of a DDProblem."""
        d, w, a, tang, edges = [], [], [], [], []
        for s, t in ((i, j), (j, i)):
            sub = problem.subs[s]
            pb = sub.problem
            cols = problem.pair_cols[s][t]
            k, face = pb.patch.iface_phi[cols, 0], pb.patch.iface_phi[cols, 1]
            d.append(np.mean(pb.coeffs.d[k]))
            w.append(np.mean(pb.coeffs.omega[k]))
            a.append(np.mean(pb.coeffs.u_edge[k, face]))
            tface = np.where(face < 2, 3, 1)  # a face of the other direction
            tang.append(np.mean(pb.coeffs.u_edge[k, tface]))
            mesh = pb.patch.mesh
            edges.append(mesh.edge_length[mesh.elem_edges[pb.patch.elements[k], face]])
        dt_min = min(float(np.min(problem.grids[s].dt)) for s in (i, j))
        length = float(np.sum(edges[0]))
        h = float(max(np.max(e) for e in edges))
        return cls.from_grids(d, w, a, problem.master_grid.T, dt_min, tang, length, h)

    def swapped(self) -> "InterfaceModel":
        return InterfaceModel(self.d[::-1], self.omega[::-1], self.a[::-1], self.band, self.tangential[::-1],
                              self.xi_band)

    def frequencies(self, n: int = N_FREQ) -> np.ndarray:
        return np.geomspace(self.band[0], self.band[1], n)

    def wavenumbers(self, n: int = N_XI) -> np.ndarray:
        """Tangential wavenumbers of both signs, or [0] for the 1D reduction."""
        if self.xi_band is None:
            return np.zeros(1)
        xi = np.geomspace(self.xi_band[0], self.xi_band[1], n)
        return np.concatenate([-xi[::-1], xi])

    def symbols(self, k, xi=0.0) -> tuple:
        k = np.asarray(k, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = []
        for d, w, a, b in zip(self.d, self.omega, self.a, self.tangential):
            s = np.sqrt(a * a + 4 * d * (1j * w * k + d * xi * xi + 1j * b * xi))  # principal branch
            out.append(0.5 * (s - a))
        return tuple(out)

    def symbol_grid(self) -> tuple:
        """Symbols over the full (k, xi) frequency set, flattened."""
        K, X = np.meshgrid(self.frequencies(), self.wavenumbers())
        return self.symbols(K.ravel(), X.ravel())


def _factor(z1, z2, alpha12: float, alpha21: float) -> np.ndarray:
    return np.abs((alpha12 - z2) * (alpha21 - z1)) / np.abs((alpha12 + z1) * (alpha21 + z2))


def convergence_factor(model: InterfaceModel, alpha12: float, alpha21: float, k, xi=0.0) -> np.ndarray:
    if not (alpha12 > 0 and alpha21 > 0):
        raise InvalidRobinParameter(f"Robin parameters must be positive, got {alpha12}, {alpha21}")
    return _factor(*model.symbols(k, xi), alpha12, alpha21)


def max_factor(model: InterfaceModel, alpha12: float, alpha21: float, k=None) -> float:
    """Maximum over the model's frequency set, or over ``k`` at xi = 0."""
    if k is not None:
        return float(np.max(convergence_factor(model, alpha12, alpha21, k)))
    if not (alpha12 > 0 and alpha21 > 0):
        raise InvalidRobinParameter(f"Robin parameters must be positive, got {alpha12}, {alpha21}")
    return float(np.max(_factor(*model.symbol_grid(), alpha12, alpha21)))


def symbol_scale(model: InterfaceModel) -> float:
    """Geometric mean of |z_i| at the time band ends (xi = 0); the natural size of a Robin parameter."""
    z1, z2 = model.symbols(np.array(model.band))
    return float(np.exp(np.mean(np.log(np.abs(np.concatenate([z1, z2])) + 1e-300))))


def optimize_parameters(model: InterfaceModel, n_grid: int = 41, symmetric: bool = False) -> tuple:
    """Minimize the band maximum of the convergence factor over (alpha12, alpha21).

    A log-spaced grid search around the symbol magnitudes is refined by
    Nelder-Mead in log-parameter space. The result is deterministic, and
    swapping the two sides of the model swaps the returned pair. With
    ``symmetric`` a single parameter alpha12 = alpha21 is optimized.
    """
    center = symbol_scale(model)
    span = np.geomspace(center * 1e-3, center * 1e3, n_grid)
    if symmetric:
        vals = [max_factor(model, a, a) for a in span]
        a0 = span[int(np.argmin(vals))]
        res = minimize(lambda p: max_factor(model, float(np.exp(p[0])), float(np.exp(p[0]))),
                       [np.log(a0)], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
        a = float(np.exp(res.x[0])) if res.fun <= min(vals) else float(a0)
        return a, a
    best = (np.inf, center, center)
    z1, z2 = model.symbol_grid()
    for a12 in span:
        num1 = np.abs(a12 - z2)
        den1 = np.abs(a12 + z1)
        for a21 in span:
            val = float(np.max(num1 * np.abs(a21 - z1) / (den1 * np.abs(a21 + z2))))
            if val < best[0]:
                best = (val, a12, a21)

    def obj(p):
        return max_factor(model, float(np.exp(p[0])), float(np.exp(p[1])))

    res = minimize(obj, np.log([best[1], best[2]]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    p = res.x if res.fun <= best[0] else np.log([best[1], best[2]])
    a12, a21 = float(np.exp(p[0])), float(np.exp(p[1]))
    if (model.d[0] == model.d[1] and model.omega[0] == model.omega[1] and model.a[0] == model.a[1]
            and model.tangential[0] == model.tangential[1]):
        # the min-max problem is symmetric; remove round-off asymmetry
        a12 = a21 = 0.5 * (a12 + a21)
    return a12, a21


@dataclass
class SweepResult:
    alpha12: np.ndarray
    alpha21: np.ndarray
    residual: np.ndarray  # (len(alpha12), len(alpha21))
    iterations: int

    def argmin(self) -> tuple:
        i, j = np.unravel_index(np.argmin(self.residual), self.residual.shape)
        return float(self.alpha12[i]), float(self.alpha21[j]), float(self.residual[i, j])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["alpha12", "alpha21", "relative_residual"])
            for i, a in enumerate(self.alpha12):
                for j, b in enumerate(self.alpha21):
                    wr.writerow([f"{a:.10e}", f"{b:.10e}", f"{self.residual[i, j]:.10e}"])


def jacobi_residual(problem, alpha12: float, alpha21: float, iterations: int, g=None) -> float:
    """Relative residual after exactly ``iterations`` Jacobi sweeps."""
    problem.set_alpha((alpha12, alpha21))
    res = problem.oswr_jacobi(g=g, fixed_iterations=iterations, reconstruct=False)
    return res.report.residual_history[-1]


def parameter_sweep(problem, alpha12_values, alpha21_values, iterations: int, g=None,
                    seed: Optional[int] = None) -> SweepResult:
    """Relative Jacobi residuals over a parameter grid.

    ``g`` is the common initial guess; without one, a random guess is drawn
    from ``seed`` so that every grid point starts from the same data.
    """
    if g is None:
        rng = np.random.default_rng(seed)
        g = [rng.standard_normal(z.shape) for z in problem.zero_robin()]
    a12 = np.asarray(alpha12_values, dtype=float)
    a21 = np.asarray(alpha21_values, dtype=float)
    out = np.zeros((len(a12), len(a21)))
    for i, x in enumerate(a12):
        for j, y in enumerate(a21):
            out[i, j] = jacobi_residual(problem, x, y, iterations, g)
    return SweepResult(a12, a21, out, iterations)
