"""Error norms, convergence rates and conservation checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Mesh

GAUSS_ORDER = 4


@dataclass
class ErrorReport:
    c_error: float
    phi_error: float
    label: str = ""
    rates: dict = field(default_factory=dict)


def _gauss(order: int):
    pts, wts = np.polynomial.legendre.leggauss(order)
    return 0.5 * (pts + 1.0), 0.5 * wts


def rt0_field(mesh: Mesh, phi: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Evaluate the RT0 field with face fluxes ``phi`` at reference point (a, b) of every element."""
    dx, dy = mesh.elem_dx, mesh.elem_dy
    vx = (1.0 - a) * (-phi[:, 0] / dy) + a * (phi[:, 1] / dy)
    vy = (1.0 - b) * (-phi[:, 2] / dx) + b * (phi[:, 3] / dx)
    return vx, vy


def error_norms(mesh: Mesh, c: np.ndarray, phi: Optional[np.ndarray], c_exact: Callable,
                phi_exact: Optional[Callable] = None, sampling: str = "quadrature",
                order: int = GAUSS_ORDER) -> ErrorReport:
    """Relative L2(Omega) errors of a P0 concentration and an RT0 flux field.

    ``c_exact(x, y)`` and ``phi_exact(x, y) -> (px, py)`` are evaluated by
    Gauss quadrature on each element (``sampling="quadrature"``), or at the
    element centres and face midpoints (``sampling="midpoint"``).
    """
    ll = mesh.elem_lower_left
    dx, dy, area = mesh.elem_dx, mesh.elem_dy, mesh.elem_area
    if sampling == "midpoint":
        xc, yc = mesh.elem_center[:, 0], mesh.elem_center[:, 1]
        ce = c_exact(xc, yc)
        c_err = np.sqrt(np.sum(area * (c - ce) ** 2) / np.sum(area * ce**2))
        phi_err = np.nan
        if phi is not None and phi_exact is not None:
            faces = np.column_stack([dy, dy, dx, dx])
            mids = [(ll[:, 0], yc), (ll[:, 0] + dx, yc), (xc, ll[:, 1]), (xc, ll[:, 1] + dy)]
            normals = [(-1, 0), (1, 0), (0, -1), (0, 1)]
            ex = np.zeros_like(phi)
            for f, ((x, y), (nx, ny)) in enumerate(zip(mids, normals)):
                px, py = phi_exact(x, y)
                ex[:, f] = (nx * np.asarray(px) + ny * np.asarray(py)) * faces[:, f]
            w = area[:, None] / faces**2
            phi_err = np.sqrt(np.sum(w * (phi - ex) ** 2) / np.sum(w * ex**2))
        return ErrorReport(float(c_err), float(phi_err))
    if sampling != "quadrature":
        raise ValueError(f"unknown sampling {sampling!r}")

    pts, wts = _gauss(order)
    num_c = den_c = num_p = den_p = 0.0
    for a, wa in zip(pts, wts):
        for b, wb in zip(pts, wts):
            x = ll[:, 0] + a * dx
            y = ll[:, 1] + b * dy
            w = wa * wb * area
            ce = c_exact(x, y)
            num_c += np.sum(w * (c - ce) ** 2)
            den_c += np.sum(w * ce**2)
            if phi is not None and phi_exact is not None:
                vx, vy = rt0_field(mesh, phi, a, b)
                px, py = phi_exact(x, y)
                num_p += np.sum(w * ((vx - px) ** 2 + (vy - py) ** 2))
                den_p += np.sum(w * (np.asarray(px) ** 2 + np.asarray(py) ** 2))
    phi_err = np.sqrt(num_p / den_p) if den_p > 0 else np.nan
    return ErrorReport(float(np.sqrt(num_c / den_c)), float(phi_err))


def discrete_errors(mesh: Mesh, c: np.ndarray, phi: Optional[np.ndarray], c_ref: np.ndarray,
                    phi_ref: Optional[np.ndarray] = None) -> ErrorReport:
    """Relative L2 errors against a reference solution on the same mesh."""
    area = mesh.elem_area
    c_err = np.sqrt(np.sum(area * (c - c_ref) ** 2) / np.sum(area * c_ref**2))
    phi_err = np.nan
    if phi is not None and phi_ref is not None:
        pts, wts = _gauss(2)
        num = den = 0.0
        for a, wa in zip(pts, wts):
            for b, wb in zip(pts, wts):
                vx, vy = rt0_field(mesh, phi - phi_ref, a, b)
                rx, ry = rt0_field(mesh, phi_ref, a, b)
                num += np.sum(wa * wb * area * (vx**2 + vy**2))
                den += np.sum(wa * wb * area * (rx**2 + ry**2))
        phi_err = np.sqrt(num / den)
    return ErrorReport(float(c_err), float(phi_err))


def rate(e_coarse: float, e_fine: float, factor: float = 2.0) -> float:
    """Observed order between two levels refined by ``factor``; NaN when undefined."""
    if not (e_coarse > 0 and e_fine > 0) or e_coarse == e_fine:
        return float("nan")
    return float(np.log(e_coarse / e_fine) / np.log(factor))


def conservation_defects(solution, coeffs, sources) -> tuple:
    """Largest relative mass-balance defect and interior flux antisymmetry defect.

    ``solution`` is a SpaceTimeSolution of one patch and ``sources[m]`` the
    element source integrals used at step m.
    """
    p = solution.patch
    area = p.area
    mass, anti = 0.0, 0.0
    c_prev = solution.c0
    inner = np.flatnonzero(p.inc2[:, 0] >= 0)
    k1, f1 = p.inc1[inner, 0], p.inc1[inner, 1]
    k2, f2 = p.inc2[inner, 0], p.inc2[inner, 1]
    for m, dt in enumerate(solution.grid.dt):
        st = solution.states[m]
        storage = area * coeffs.omega * (st.c - c_prev) / dt
        out = st.phi.sum(axis=1)
        src = sources[m] if sources is not None else 0.0
        scale = max(np.max(np.abs(storage)), np.max(np.abs(out)), np.max(np.abs(src)), 1e-300)
        mass = max(mass, float(np.max(np.abs(storage + out - src)) / scale))
        if len(inner):
            fscale = max(float(np.max(np.abs(st.phi))), 1e-300)
            anti = max(anti, float(np.max(np.abs(st.phi[k1, f1] + st.phi[k2, f2]))) / fscale)
        c_prev = st.c
    return mass, anti
