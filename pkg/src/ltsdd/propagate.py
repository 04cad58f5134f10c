"""Global-in-time subdomain solvers, the monodomain reference and Darcy flow.

A subdomain solve marches backward Euler over the subdomain's own time grid
with interface data that are piecewise constant on that grid, and returns
interface traces on the same grid. Traces are flux densities ``-phi . n_i``
(outward normal of the subdomain) and multipliers ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import GridMismatch, InvalidRobinParameter
from .geometry import Mesh
from .mhfe import Coefficients, FieldState, InterfaceBC, Patch, StepSystem, element_source
from .timegrid import TimeGrid, TimeSeries

Source = Optional[Callable[[np.ndarray, np.ndarray, float], np.ndarray]]


@dataclass(frozen=True, eq=False)
class InterfaceTrace(TimeSeries):
    """Per-interval, per-interface-edge data: ``values`` has shape (M, n_edges)."""

    kind: str = "dirichlet"


@dataclass
class SpaceTimeSolution:
    grid: TimeGrid
    patch: Patch
    c0: np.ndarray
    states: list  # FieldState per interval, states[m] at t_{m+1}

    @property
    def c_final(self) -> np.ndarray:
        return self.states[-1].c if self.states else self.c0

    @property
    def phi_final(self) -> np.ndarray:
        return self.states[-1].phi

    def c_at(self, m: int) -> np.ndarray:
        """Concentration at t_m (m = 0 gives the initial value)."""
        return self.c0 if m == 0 else self.states[m - 1].c


def boundary_values(patch: Patch, spec, t: float = 0.0) -> Optional[np.ndarray]:
    """Dirichlet data on the patch's exterior Dirichlet edges.

    ``spec`` is None (homogeneous), a callable ``g(x, y, t)``, or a dict
    mapping side names to constants.
    """
    edges = patch.edges[patch.dirichlet_edges]
    if spec is None or len(edges) == 0:
        return None
    mesh = patch.mesh
    if callable(spec):
        mid = mesh.edge_midpoint[edges]
        return np.broadcast_to(spec(mid[:, 0], mid[:, 1], t), (len(edges),)).astype(float)
    from .geometry import SIDES

    out = np.zeros(len(edges))
    sides = mesh.edge_side[edges]
    for name, value in spec.items():
        out[sides == SIDES.index(name)] = float(value)
    return out


@dataclass
class SubdomainProblem:
    """Data of one subdomain for a run over ``grid``.

    ``alpha_in[p]`` is the Robin parameter of this subdomain on its p-th
    interface edge (alpha_{i,j}); ``alpha_out[p]`` is the neighbour's one
    (alpha_{j,i}), used for the outgoing Robin trace.
    """

    index: int
    patch: Patch
    coeffs: Coefficients
    grid: TimeGrid
    c0: np.ndarray
    source: Source = None
    dirichlet: object = None
    t_offset: float = 0.0
    neighbor: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    alpha_in: Optional[np.ndarray] = None
    alpha_out: Optional[np.ndarray] = None

    @property
    def n_iface(self) -> int:
        return len(self.patch.iface_edges)


@dataclass
class MarchResult:
    flux: np.ndarray  # (M, n_iface): -phi . n_i density
    theta: np.ndarray  # (M, n_iface)
    c_final: np.ndarray
    solution: Optional[SpaceTimeSolution] = None


class SubdomainSolver:
    """Cached step systems and the backward-Euler march for one subdomain.

    One factorization is kept per (time step, interface condition, Robin
    parameters) and reused for every step and every outer iteration.
    """

    def __init__(self, problem: SubdomainProblem):
        self.problem = problem
        self._systems = {}
        self._source = None
        self._dirichlet = None
        self.solve_count = 0

    @property
    def grid(self) -> TimeGrid:
        return self.problem.grid

    def system(self, dt: float, bc: InterfaceBC) -> StepSystem:
        key = (round(float(dt), 14), bc)
        sys_ = self._systems.get(key)
        if sys_ is None:
            alpha = self.problem.alpha_in if bc is InterfaceBC.ROBIN else None
            if bc is InterfaceBC.ROBIN and alpha is None and self.problem.n_iface:
                raise InvalidRobinParameter(f"subdomain {self.problem.index} has no Robin parameters")
            sys_ = StepSystem(self.problem.patch, self.problem.coeffs, float(dt), bc,
                              alpha if self.problem.n_iface else None)
            sys_.factorization
            self._systems[key] = sys_
        return sys_

    def set_robin(self, alpha_in, alpha_out):
        alpha_in = np.asarray(alpha_in, dtype=float)
        if np.any(~(alpha_in > 0)) or np.any(~(np.asarray(alpha_out) > 0)):
            raise InvalidRobinParameter("Robin parameters must be positive")
        self.problem.alpha_in = alpha_in
        self.problem.alpha_out = np.asarray(alpha_out, dtype=float)
        self._systems = {k: v for k, v in self._systems.items() if k[1] is not InterfaceBC.ROBIN}

    def sources(self) -> np.ndarray:
        if self._source is None:
            pb = self.problem
            t = pb.grid.t_points[1:] + pb.t_offset
            self._source = np.array([element_source(pb.patch, pb.source, tm) for tm in t])
        return self._source

    def dirichlet_values(self):
        if self._dirichlet is None:
            pb = self.problem
            t = pb.grid.t_points[1:] + pb.t_offset
            vals = [boundary_values(pb.patch, pb.dirichlet, tm) for tm in t]
            self._dirichlet = None if vals[0] is None else np.array(vals)
        return self._dirichlet

    def reset_data(self):
        """Forget cached source/boundary data (after changing the problem's data)."""
        self._source = None
        self._dirichlet = None

    def march(self, bc: InterfaceBC, data=None, homogeneous: bool = False,
              keep_fields: bool = False, c0=None) -> MarchResult:
        pb = self.problem
        grid = pb.grid
        n = pb.patch.n_elements
        n_if = pb.n_iface
        if data is not None:
            data = np.asarray(data, dtype=float)
            if data.shape != (grid.M, n_if):
                raise GridMismatch(f"interface data of shape {data.shape}, expected {(grid.M, n_if)}")
        if c0 is None:
            c0 = pb.c0
        c = np.zeros(n) if homogeneous else np.array(c0, dtype=float)
        start = c.copy()
        src = None if homogeneous else self.sources()
        dirv = None if homogeneous else self.dirichlet_values()
        flux = np.zeros((grid.M, n_if))
        theta = np.zeros((grid.M, n_if))
        states = [] if keep_fields else None
        inv_len = 1.0 / pb.patch.iface_length
        for m, dt in enumerate(grid.dt):
            S = self.system(dt, bc)
            b = np.zeros(pb.patch.n_unknowns)
            b[:n] = S.mass_coeff * c
            if src is not None:
                b[:n] += src[m]
            if dirv is not None:
                b += S.dirichlet_map @ dirv[m]
            if data is not None and n_if:
                b[S.iface_rows] = data[m]
            x = S.factorization.solve(b)
            c = x[:n]
            if n_if:
                flux[m] = -x[S.iface_phi_cols] * inv_len
                theta[m] = x[S.iface_theta_cols]
            if keep_fields:
                states.append(S.unpack(x, None if dirv is None else dirv[m]))
        self.solve_count += 1
        sol = SpaceTimeSolution(grid, pb.patch, start, states) if keep_fields else None
        return MarchResult(flux=flux, theta=theta, c_final=c.copy(), solution=sol)

    def outgoing_robin(self, result: MarchResult) -> np.ndarray:
        """Robin trace sent to the neighbours: -phi_i . n_j + alpha_{j,i} theta_i."""
        return -result.flux + self.problem.alpha_out * result.theta


def _check_grid(sub: SubdomainSolver, trace):
    if isinstance(trace, TimeSeries):
        if trace.grid != sub.grid:
            raise GridMismatch("interface data must live on the subdomain's own time grid")
        return trace.values
    return trace


def solve_dirichlet(sub: SubdomainSolver, lam, homogeneous: bool = False, keep_fields: bool = True):
    """Dirichlet interface data -> (solution, flux trace -phi . n_i)."""
    res = sub.march(InterfaceBC.DIRICHLET, _check_grid(sub, lam), homogeneous, keep_fields)
    return res.solution, InterfaceTrace(sub.grid, res.flux, kind="flux")


def solve_neumann(sub: SubdomainSolver, psi, keep_fields: bool = True):
    """Neumann data ``-phi . n_i = psi`` with zero source and initial value -> theta trace."""
    res = sub.march(InterfaceBC.NEUMANN, _check_grid(sub, psi), True, keep_fields)
    return res.solution, InterfaceTrace(sub.grid, res.theta, kind="multiplier")


def solve_robin(sub: SubdomainSolver, zeta, homogeneous: bool = False, keep_fields: bool = True):
    """Robin data ``-phi . n_i + alpha_{i,j} theta = zeta`` -> outgoing Robin trace."""
    res = sub.march(InterfaceBC.ROBIN, _check_grid(sub, zeta), homogeneous, keep_fields)
    return res.solution, InterfaceTrace(sub.grid, sub.outgoing_robin(res), kind="robin")


def solve_monodomain(mesh: Mesh, coeffs: Coefficients, source: Source, c0, grid: TimeGrid,
                     dirichlet=None, t_offset: float = 0.0) -> SpaceTimeSolution:
    patch = Patch(mesh, np.arange(mesh.n_elements))
    pb = SubdomainProblem(0, patch, coeffs, grid, np.asarray(c0, dtype=float), source, dirichlet, t_offset)
    return SubdomainSolver(pb).march(InterfaceBC.DIRICHLET, keep_fields=True).solution


def solve_darcy(mesh: Mesh, conductivity, head_dirichlet):
    """Steady mixed-hybrid Darcy solve.

    Returns the head per element and the face velocities ``u_KE`` (flux per
    unit length, outward of K), an (n_elements, 4) array.
    """
    K = np.broadcast_to(np.asarray(conductivity, dtype=float), (mesh.n_elements,))
    if np.any(K <= 0):
        raise ValueError("hydraulic conductivity must be positive")
    patch = Patch(mesh, np.arange(mesh.n_elements))
    coeffs = Coefficients(np.ones(mesh.n_elements), K.copy(), np.zeros((mesh.n_elements, 4)))
    S = StepSystem(patch, coeffs, None)
    g = boundary_values(patch, head_dirichlet)
    b = S.rhs(dirichlet_values=g)
    x = S.factorization.solve(b)
    st = S.unpack(x, g)
    faces = mesh.edge_length[mesh.elem_edges]
    return st.c, st.phi / faces
