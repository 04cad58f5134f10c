"""Upwind mixed-hybrid RT0 discretization on rectangles.

Unknowns of one backward-Euler step are stored as ``[c | phi | theta]``:
one concentration per element, four normal fluxes per element (local faces
left, right, bottom, top; ``phi_KE`` is the total flux leaving K through E,
integrated over E), and one multiplier per edge that is not an exterior
Dirichlet edge. Interface data are exchanged as flux densities
(``phi_KE / |E|``) so that Robin parameters carry velocity units.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sps

from .errors import DegenerateElement, InvalidRobinParameter
from .geometry import DIRICHLET, INTERIOR, NEUMANN, Mesh
from .linsolve import Factorization, as_sparse

IFACE = 3


class UpwindMode(enum.Enum):
    CENTERED_THETA = "centered"
    FULL_UPWIND = "upwind"


class InterfaceBC(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    ROBIN = "robin"


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Per-element porosity, isotropic diffusion and RT0 normal velocities."""

    omega: np.ndarray
    d: np.ndarray
    u_edge: np.ndarray  # (n_elements, 4): average of u . n_K over each face
    upwind_mode: UpwindMode = UpwindMode.CENTERED_THETA

    def restrict(self, elements) -> "Coefficients":
        return Coefficients(self.omega[elements], self.d[elements], self.u_edge[elements], self.upwind_mode)


def local_mass_matrix(dx: float, dy: float, d: float) -> np.ndarray:
    """RT0 mass matrix ``int_K D^{-1} w_E' . w_E`` for a dx-by-dy rectangle."""
    return local_mass_matrices(np.array([dx]), np.array([dy]), np.array([d]))[0]


def local_mass_matrices(dx, dy, d) -> np.ndarray:
    dx, dy, d = (np.asarray(v, dtype=float) for v in (dx, dy, d))
    if np.any(dx <= 0) or np.any(dy <= 0) or not np.all(np.isfinite(dx * dy)):
        raise DegenerateElement("element with non-positive side length")
    if np.any(d <= 0):
        raise ValueError("diffusion coefficient must be positive")
    ax = dx / (dy * d)
    ay = dy / (dx * d)
    A = np.zeros(dx.shape + (4, 4))
    A[..., 0, 0] = A[..., 1, 1] = ax / 3.0
    A[..., 0, 1] = A[..., 1, 0] = -ax / 6.0
    A[..., 2, 2] = A[..., 3, 3] = ay / 3.0
    A[..., 2, 3] = A[..., 3, 2] = -ay / 6.0
    return A


_FACE_NORMALS = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])


def project_velocity(mesh: Mesh, u) -> np.ndarray:
    """Face averages ``u_KE = |E|^{-1} int_E u . n_K`` as an (n_elements, 4) array.

    ``u`` is a constant 2-vector or a callable ``u(x, y) -> (ux, uy)``; the edge
    integral uses two-point Gauss quadrature.
    """
    if not callable(u):
        ux, uy = (float(v) for v in u)
        return np.tile(np.array([-ux, ux, -uy, uy]), (mesh.n_elements, 1))
    ll = mesh.elem_lower_left
    dx, dy = mesh.elem_dx, mesh.elem_dy
    g = 0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)
    out = np.zeros((mesh.n_elements, 4))
    for s in g:
        for face, (ox, oy, tx, ty) in enumerate(((0, 0, 0, 1), (1, 0, 0, 1), (0, 0, 1, 0), (0, 1, 1, 0))):
            px = ll[:, 0] + dx * (ox + s * tx)
            py = ll[:, 1] + dy * (oy + s * ty)
            ux, uy = u(px, py)
            ux = np.broadcast_to(ux, px.shape)
            uy = np.broadcast_to(uy, px.shape)
            out[:, face] += 0.5 * (ux * _FACE_NORMALS[face, 0] + uy * _FACE_NORMALS[face, 1])
    return out


def upwind_value(c_K, theta_E, u_KE, mode: UpwindMode = UpwindMode.CENTERED_THETA):
    if mode is UpwindMode.CENTERED_THETA:
        return np.asarray(theta_E, dtype=float) * 1.0
    return np.where(np.asarray(u_KE) >= 0, c_K, 2.0 * np.asarray(theta_E) - c_K)


def _upwind_factors(u: np.ndarray, mode: UpwindMode):
    """Split U_KE = fc * c_K + ft * theta_E into its two coefficients."""
    if mode is UpwindMode.CENTERED_THETA:
        return np.zeros_like(u), np.ones_like(u)
    pos = u >= 0
    return np.where(pos, 1.0, -1.0), np.where(pos, 0.0, 2.0)


class Patch:
    """A set of elements with the classification of their edges.

    Edges of the patch are exterior Dirichlet, exterior Neumann, interior, or
    interface (shared with an element outside the patch). ``iface_edges``
    fixes the column order of interface traces.
    """

    def __init__(self, mesh: Mesh, elements, iface_edges=None):
        self.mesh = mesh
        self.elements = np.asarray(elements, dtype=np.int64)
        n = len(self.elements)
        in_patch = np.zeros(mesh.n_elements, dtype=bool)
        in_patch[self.elements] = True
        g_edges = mesh.elem_edges[self.elements]
        self.edges = np.unique(g_edges)
        g2l = -np.ones(mesh.n_edges, dtype=np.int64)
        g2l[self.edges] = np.arange(len(self.edges))
        self.g2l = g2l
        self.el_edges = g2l[g_edges]

        adj = mesh.edge_elements[self.edges]
        both = (adj >= 0).all(axis=1)
        inside = np.where(adj >= 0, in_patch[np.maximum(adj, 0)], False)
        kind = mesh.boundary_kind[self.edges].copy()
        kind[both & inside.all(axis=1)] = INTERIOR
        kind[both & ~inside.all(axis=1)] = IFACE
        self.kind = kind

        # (local element, face) incident to each local edge; second slot only for interior edges
        k_loc = -np.ones(mesh.n_elements, dtype=np.int64)
        k_loc[self.elements] = np.arange(n)
        loc = mesh.edge_local[self.edges]
        inc_el = np.where(inside, k_loc[np.maximum(adj, 0)], -1)
        inc_face = np.where(inside, loc, -1)
        first = np.where(inc_el[:, 0] >= 0, 0, 1)
        rows = np.arange(len(self.edges))
        self.inc1 = np.column_stack([inc_el[rows, first], inc_face[rows, first]])
        self.inc2 = np.where(kind[:, None] == INTERIOR, np.column_stack([inc_el[:, 1], inc_face[:, 1]]), -1)

        self.theta_index = -np.ones(len(self.edges), dtype=np.int64)
        keep = kind != DIRICHLET
        self.theta_index[keep] = np.arange(int(keep.sum()))
        self.n_theta = int(keep.sum())
        self.dirichlet_edges = np.flatnonzero(kind == DIRICHLET)
        self.neumann_edges = np.flatnonzero(kind == NEUMANN)

        found = self.edges[kind == IFACE]
        if iface_edges is None:
            iface_edges = found
        iface_edges = np.asarray(iface_edges, dtype=np.int64)
        if len(iface_edges) != len(found) or not np.array_equal(np.sort(iface_edges), np.sort(found)):
            raise IndexError("interface edge list does not match the patch boundary")
        self.iface_edges = iface_edges
        self.iface_local = g2l[iface_edges]
        self.iface_length = mesh.edge_length[iface_edges]
        self.iface_phi = self.inc1[self.iface_local]  # (k, face) on our side

        self.dx = mesh.elem_dx[self.elements]
        self.dy = mesh.elem_dy[self.elements]
        self.area = self.dx * self.dy
        self.center = mesh.elem_center[self.elements]
        self.edge_length = mesh.edge_length[self.edges]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_unknowns(self) -> int:
        return 5 * self.n_elements + self.n_theta

    def phi_col(self, k, face):
        return self.n_elements + 4 * np.asarray(k) + np.asarray(face)

    def theta_col(self, local_edge):
        return 5 * self.n_elements + self.theta_index[local_edge]


@dataclass
class FieldState:
    c: np.ndarray  # (n_elements,)
    phi: np.ndarray  # (n_elements, 4)
    theta: np.ndarray  # per local edge of the patch, Dirichlet values filled in


class StepSystem:
    """One backward-Euler step (or a steady solve when ``dt is None``)."""

    def __init__(self, patch: Patch, coeffs: Coefficients, dt: Optional[float],
                 interface_bc: InterfaceBC = InterfaceBC.DIRICHLET, alpha=None):
        self.patch = patch
        self.coeffs = coeffs
        self.dt = dt
        self.interface_bc = InterfaceBC(interface_bc)
        n_if = len(patch.iface_edges)
        if self.interface_bc is InterfaceBC.ROBIN:
            if alpha is None:
                raise InvalidRobinParameter("Robin interface condition needs alpha")
            alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (n_if,)).copy()
            if np.any(~(alpha > 0)):
                raise InvalidRobinParameter(f"Robin parameters must be positive, got {alpha.min()}")
        self.alpha = alpha
        if dt is not None and not dt > 0:
            raise ValueError("time step must be positive")
        self._assemble()
        self._factor = None

    def _assemble(self):
        p, cf = self.patch, self.coeffs
        n = p.n_elements
        if len(cf.omega) != n:
            raise ValueError("coefficients do not match the patch")
        A = local_mass_matrices(p.dx, p.dy, cf.d)
        # RT0 interpolant of u: face flux = |E| * face average
        u = cf.u_edge * np.column_stack([p.dy, p.dy, p.dx, p.dx])
        fc, ft = _upwind_factors(u, cf.upwind_mode)
        self.mass_coeff = np.zeros(n) if self.dt is None else p.area * cf.omega / self.dt

        rows, cols, vals = [], [], []
        k = np.arange(n)
        # mass balance rows
        rows.append(k), cols.append(k), vals.append(self.mass_coeff)
        for e in range(4):
            rows.append(k), cols.append(p.phi_col(k, e)), vals.append(np.ones(n))

        # flux rows, one per (K, E)
        dir_rows, dir_cols, dir_vals = [], [], []
        dir_pos = -np.ones(len(p.edges), dtype=np.int64)
        dir_pos[p.dirichlet_edges] = np.arange(len(p.dirichlet_edges))
        for e in range(4):
            r = p.phi_col(k, e)
            c_coef = -np.ones(n)
            for e2 in range(4):
                rows.append(r), cols.append(p.phi_col(k, e2)), vals.append(A[:, e, e2])
                adv = -A[:, e, e2] * u[:, e2]
                c_coef = c_coef + adv * fc[:, e2]
                t_coef = adv * ft[:, e2] + (1.0 if e2 == e else 0.0)
                edge = p.el_edges[:, e2]
                free = p.theta_index[edge] >= 0
                rows.append(r[free]), cols.append(p.theta_col(edge[free])), vals.append(t_coef[free])
                dir_rows.append(r[~free]), dir_cols.append(dir_pos[edge[~free]]), dir_vals.append(-t_coef[~free])
            rows.append(r), cols.append(k), vals.append(c_coef)

        # one row per multiplier unknown
        base = 5 * n
        kinds = p.kind
        for kind in (INTERIOR, NEUMANN, IFACE):
            le = np.flatnonzero(kinds == kind)
            if kind == IFACE:
                le = p.iface_local
            r = base + p.theta_index[le]
            k1, f1 = p.inc1[le, 0], p.inc1[le, 1]
            if kind == INTERIOR:
                k2, f2 = p.inc2[le, 0], p.inc2[le, 1]
                rows += [r, r]
                cols += [p.phi_col(k1, f1), p.phi_col(k2, f2)]
                vals += [np.ones(len(le)), np.ones(len(le))]
            elif kind == NEUMANN:
                rows.append(r), cols.append(p.phi_col(k1, f1)), vals.append(np.ones(len(le)))
            elif self.interface_bc is InterfaceBC.DIRICHLET:
                rows.append(r), cols.append(p.theta_col(le)), vals.append(np.ones(len(le)))
            else:
                rows.append(r), cols.append(p.phi_col(k1, f1)), vals.append(-1.0 / p.edge_length[le])
                if self.interface_bc is InterfaceBC.ROBIN:
                    rows.append(r), cols.append(p.theta_col(le)), vals.append(self.alpha)

        N = p.n_unknowns
        self.matrix = as_sparse(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (N, N))
        self.dirichlet_map = as_sparse(
            np.concatenate(dir_rows), np.concatenate(dir_cols), np.concatenate(dir_vals),
            (N, len(p.dirichlet_edges)),
        ).tocsr()
        self.iface_rows = base + p.theta_index[p.iface_local]
        self.neumann_rows = base + p.theta_index[p.neumann_edges]
        k1, f1 = p.iface_phi[:, 0], p.iface_phi[:, 1]
        self.iface_phi_cols = p.phi_col(k1, f1)
        self.iface_theta_cols = p.theta_col(p.iface_local)

    @property
    def factorization(self) -> Factorization:
        if self._factor is None:
            self._factor = Factorization(self.matrix)
        return self._factor

    def rhs(self, source_integral=None, c_prev=None, interface_values=None,
            dirichlet_values=None, neumann_flux=None) -> np.ndarray:
        """Right-hand side for given data; ``None`` means zero.

        ``source_integral`` holds ``int_K f`` per element, ``neumann_flux`` the
        outward flux density on exterior Neumann edges, ``interface_values``
        the interface data in the units of the interface condition.
        """
        p = self.patch
        n = p.n_elements
        b = np.zeros(p.n_unknowns)
        if source_integral is not None:
            b[:n] += source_integral
        if c_prev is not None:
            b[:n] += self.mass_coeff * c_prev
        if dirichlet_values is not None and len(p.dirichlet_edges):
            b += self.dirichlet_map @ dirichlet_values
        if neumann_flux is not None and len(p.neumann_edges):
            b[self.neumann_rows] = p.edge_length[p.neumann_edges] * neumann_flux
        if interface_values is not None and len(self.iface_rows):
            b[self.iface_rows] = interface_values
        return b

    def unpack(self, x: np.ndarray, dirichlet_values=None) -> FieldState:
        p = self.patch
        n = p.n_elements
        theta = np.zeros(len(p.edges))
        free = p.theta_index >= 0
        theta[free] = x[5 * n + p.theta_index[free]]
        if dirichlet_values is not None:
            theta[p.dirichlet_edges] = dirichlet_values
        return FieldState(c=x[:n].copy(), phi=x[n:5 * n].reshape(n, 4).copy(), theta=theta)

    def residual(self, state: FieldState, b: np.ndarray) -> np.ndarray:
        p = self.patch
        x = np.concatenate([state.c, state.phi.ravel(), state.theta[p.theta_index >= 0]])
        return self.matrix @ x - b


def assemble_step(patch: Patch, coeffs: Coefficients, dt, interface_bc=InterfaceBC.DIRICHLET, alpha=None) -> StepSystem:
    return StepSystem(patch, coeffs, dt, interface_bc, alpha)


def solve_step(system: StepSystem, source_integral=None, c_prev=None, interface_values=None,
               dirichlet_values=None, neumann_flux=None) -> FieldState:
    b = system.rhs(source_integral, c_prev, interface_values, dirichlet_values, neumann_flux)
    x = system.factorization.solve(b)
    return system.unpack(x, dirichlet_values)


def element_source(patch: Patch, f: Optional[Callable], t: float) -> np.ndarray:
    """Midpoint-rule ``int_K f(x, y, t)`` per element."""
    if f is None:
        return np.zeros(patch.n_elements)
    xc, yc = patch.center[:, 0], patch.center[:, 1]
    return patch.area * np.broadcast_to(f(xc, yc, t), xc.shape)


def cell_average(mesh: Mesh, g: Callable, elements=None, order: int = 3) -> np.ndarray:
    """Gauss-Legendre cell averages of ``g(x, y)``."""
    els = np.arange(mesh.n_elements) if elements is None else np.asarray(elements)
    ll = mesh.elem_lower_left[els]
    dx, dy = mesh.elem_dx[els], mesh.elem_dy[els]
    pts, wts = np.polynomial.legendre.leggauss(order)
    pts, wts = 0.5 * (pts + 1.0), 0.5 * wts
    out = np.zeros(len(els))
    for a, wa in zip(pts, wts):
        for b, wb in zip(pts, wts):
            out += wa * wb * g(ll[:, 0] + a * dx, ll[:, 1] + b * dy)
    return out
