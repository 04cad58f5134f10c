"""Benchmark problems: a manufactured solution, discontinuous coefficients and a waste-storage prototype."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Decomposition, Mesh, build_mesh, decompose, uniform_coords
from .mhfe import Coefficients, UpwindMode, cell_average, project_velocity
from .propagate import solve_darcy
from .timegrid import TimeGrid

PI = np.pi


@dataclass
class Case:
    name: str
    mesh: Mesh
    decomp: Decomposition
    coeffs: Coefficients
    grids: list
    source: Optional[Callable] = None
    c0: Optional[np.ndarray] = None
    dirichlet: object = None
    c_exact: Optional[Callable] = None  # c(x, y, t)
    phi_exact: Optional[Callable] = None  # phi(x, y, t) -> (px, py)
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.grids[0].T


# ----------------------------------------------------------------- test 1
def exact_test1(x, y, t):
    return np.exp(-4.0 * t) * np.sin(PI * x) * np.sin(PI * y)


def manufactured_source_test1(x, y, t):
    """Source for c = exp(-4t) sin(pi x) sin(pi y) with omega = 1, d = 1, u = (1, 1)."""
    e = np.exp(-4.0 * t)
    s = np.sin(PI * x) * np.sin(PI * y)
    grad = np.cos(PI * x) * np.sin(PI * y) + np.sin(PI * x) * np.cos(PI * y)
    return (-4.0 + 2.0 * PI**2) * e * s + PI * e * grad


def flux_test1(x, y, t):
    """Total flux -grad c + u c of the manufactured solution."""
    e = np.exp(-4.0 * t)
    c = exact_test1(x, y, t)
    return (-PI * e * np.cos(PI * x) * np.sin(PI * y) + c, -PI * e * np.sin(PI * x) * np.cos(PI * y) + c)


def two_halves(n: int, ny: Optional[int] = None):
    mesh = build_mesh(uniform_coords(0.0, 1.0, n), uniform_coords(0.0, 1.0, ny or n))
    return mesh, decompose(mesh, [(0.0, 0.5, 0.0, 1.0), (0.5, 1.0, 0.0, 1.0)])


def test1(n: int = 20, M1: int = 80, M2: int = 60, T: float = 0.1,
          upwind_mode: UpwindMode = UpwindMode.CENTERED_THETA) -> Case:
    mesh, dec = two_halves(n)
    ne = mesh.n_elements
    coeffs = Coefficients(np.ones(ne), np.ones(ne), project_velocity(mesh, (1.0, 1.0)), upwind_mode)
    c0 = cell_average(mesh, lambda x, y: exact_test1(x, y, 0.0))
    return Case("test1", mesh, dec, coeffs, [TimeGrid.uniform(T, M1), TimeGrid.uniform(T, M2)],
                manufactured_source_test1, c0, None, exact_test1, flux_test1,
                {"n": n, "M1": M1, "M2": M2, "T": T})


# ----------------------------------------------------------------- test 2
TEST2 = {
    # problem: (d1, u1, d2, u2)
    "a": (1.0, (-0.02, -0.5), 0.1, (-0.02, -0.05)),
    "b": (0.01, (-0.02, -0.5), 0.1, (-0.02, -0.05)),
    "c": (0.02, (0.5, 1.0), 0.002, (0.5, 0.1)),
}


def gaussian_bump(x, y, t=0.0):
    return np.exp(-100.0 * ((x - 0.2) ** 2 + (y - 0.2) ** 2))


def test2_coefficients(mesh: Mesh, dec: Decomposition, problem: str) -> Coefficients:
    d1, u1, d2, u2 = TEST2[problem]
    ne = mesh.n_elements
    left = dec.elem_sub == 0
    d = np.where(left, d1, d2)
    u_edge = np.where(left[:, None], project_velocity(mesh, u1), project_velocity(mesh, u2))
    return Coefficients(np.ones(ne), d, u_edge)


def test2(problem: str = "c", n: int = 100, dt2: float = 1.0 / 75, ratio: float = 0.75, T: float = 1.0,
          with_data: bool = False) -> Case:
    """Discontinuous coefficients; by default the error equation (zero data).

    With ``with_data`` the Gaussian source and initial bump are used.
    """
    if problem not in TEST2:
        raise KeyError(f"unknown test-2 problem {problem!r}")
    mesh, dec = two_halves(n)
    coeffs = test2_coefficients(mesh, dec, problem)
    M2 = int(round(T / dt2))
    M1 = int(round(T / (ratio * dt2)))
    grids = [TimeGrid.uniform(T, M1), TimeGrid.uniform(T, M2)]
    src = c0 = None
    if with_data:
        src = gaussian_bump
        c0 = cell_average(mesh, lambda x, y: x * y * (1 - x) * (1 - y) * gaussian_bump(x, y))
    return Case(f"test2{problem}", mesh, dec, coeffs, grids, src, c0,
                meta={"problem": problem, "n": n, "M1": M1, "M2": M2, "T": T})


TIME_GRIDS = {1: ("c", "c"), 2: ("c", "f"), 3: ("f", "c"), 4: ("f", "f")}


def test2_time_grids(grid: int, level: int = 0, T: float = 0.5, Mc: int = 12, Mf: int = 16):
    """The four coarse/fine combinations, refined ``level`` times by 2."""
    counts = {"c": Mc * 2**level, "f": Mf * 2**level}
    a, b = TIME_GRIDS[grid]
    return [TimeGrid.uniform(T, counts[a]), TimeGrid.uniform(T, counts[b])]


def test2_accuracy(grid: int = 1, level: int = 0, n: int = 200, T: float = 0.5) -> Case:
    mesh, dec = two_halves(n)
    coeffs = test2_coefficients(mesh, dec, "c")
    c0 = cell_average(mesh, lambda x, y: x * y * (1 - x) * (1 - y) * gaussian_bump(x, y))
    return Case(f"test2-time{grid}", mesh, dec, coeffs, test2_time_grids(grid, level, T), gaussian_bump, c0,
                meta={"grid": grid, "level": level, "n": n, "T": T})


# ----------------------------------------------------------------- test 3
# zone: (hydraulic conductivity m/year, porosity, molecular diffusion m^2/year)
ZONES = {
    "terrain": (94608.0, 0.30, 1.0),
    "radier": (3.1536e-4, 0.15, 6.31e-5),
    "forme": (3.1536e-3, 0.20, 1.58e-3),
    "drainant": (94608.0, 0.30, 5.36e-2),
    "voile": (3.1536e-3, 0.20, 1.58e-3),
    "remplissage": (5045.76, 0.30, 5.36e-2),
    "dalleprotec": (3.1536e-3, 0.20, 1.58e-3),
    "dalleobtur": (3.1536e-3, 0.20, 1.58e-3),
    "drain": (94608.0, 0.30, 1.0),
    "conteneur": (3.1536e-4, 0.12, 4.47e-4),
    "dechet": (3.1536e-4, 0.30, 1.37e-3),
}

# Approximate layout (metres): later rectangles overwrite earlier ones.
# The drawing of the storage is not given in coordinates, so this is a
# best-effort nested-rectangle stand-in with the same zone sequence.
STORAGE_LAYOUT = [
    ("terrain", (0.0, 72.0, 0.0, 66.0)),
    ("drain", (0.0, 72.0, 24.0, 26.0)),
    ("forme", (12.0, 60.0, 26.0, 28.0)),
    ("radier", (14.0, 58.0, 28.0, 30.0)),
    ("voile", (14.0, 16.0, 30.0, 44.0)),
    ("voile", (56.0, 58.0, 30.0, 44.0)),
    ("remplissage", (16.0, 56.0, 30.0, 44.0)),
    ("conteneur", (19.0, 29.0, 31.0, 41.0)),
    ("dechet", (21.0, 27.0, 33.0, 39.0)),
    ("conteneur", (33.0, 43.0, 31.0, 41.0)),
    ("dechet", (35.0, 41.0, 33.0, 39.0)),
    ("dalleobtur", (14.0, 58.0, 44.0, 46.0)),
    ("dalleprotec", (12.0, 60.0, 46.0, 48.0)),
    ("drainant", (10.0, 62.0, 48.0, 50.0)),
]

STORAGE_BOXES = [
    (0.0, 46.0, 0.0, 24.0),
    (46.0, 72.0, 0.0, 24.0),
    (0.0, 46.0, 24.0, 48.0),
    (46.0, 72.0, 24.0, 48.0),
    (0.0, 46.0, 48.0, 66.0),
    (46.0, 72.0, 48.0, 66.0),
]


def graded_coords(breaks, n_cells: int) -> np.ndarray:
    """Split the segments between ``breaks`` into exactly ``n_cells`` cells, nearly uniform."""
    breaks = np.unique(np.asarray(breaks, dtype=float))
    lengths = np.diff(breaks)
    ideal = lengths / lengths.sum() * n_cells
    counts = np.maximum(1, np.floor(ideal).astype(int))
    while counts.sum() < n_cells:
        counts[np.argmax(ideal - counts)] += 1
    while counts.sum() > n_cells:
        j = np.argmax(np.where(counts > 1, counts - ideal, -np.inf))
        counts[j] -= 1
    pts = [np.linspace(a, b, k + 1)[:-1] for a, b, k in zip(breaks[:-1], breaks[1:], counts)]
    return np.concatenate(pts + [breaks[-1:]])


def storage_mesh(nx: int = 171, ny: int = 158, layout=STORAGE_LAYOUT, boxes=STORAGE_BOXES):
    xb = [v for _, r in layout for v in r[:2]] + [v for b in boxes for v in b[:2]]
    yb = [v for _, r in layout for v in r[2:]] + [v for b in boxes for v in b[2:]]
    x = graded_coords(xb, nx)
    y = graded_coords(yb, ny)
    mesh = build_mesh(x, y, {"left": "neumann", "right": "neumann", "top": "dirichlet", "bottom": "dirichlet"})
    names = list(ZONES)
    zone = np.zeros(mesh.n_elements, dtype=np.int64)
    cx, cy = mesh.elem_center[:, 0], mesh.elem_center[:, 1]
    for name, (x0, x1, y0, y1) in layout:
        inside = (cx > x0) & (cx < x1) & (cy > y0) & (cy < y1)
        zone[inside] = names.index(name)
    return mesh, zone, names


def test3(window: float = 5.0, nx: int = 171, ny: int = 158, fine_sub: int = 2, M_fine: int = 50,
          M_coarse: int = 10, layout=STORAGE_LAYOUT, boxes=STORAGE_BOXES) -> Case:
    """Waste-storage prototype on an approximate geometry; time in years."""
    mesh, zone, names = storage_mesh(nx, ny, layout, boxes)
    data = np.array([ZONES[n] for n in names])[zone]
    K, omega, dm = data[:, 0], data[:, 1], data[:, 2]
    head, u_edge = solve_darcy(mesh, K, {"top": 10.0, "bottom": 9.998})
    coeffs = Coefficients(omega, omega * dm, u_edge)
    dec = decompose(mesh, boxes)
    grids = [TimeGrid.uniform(window, M_fine if i == fine_sub else M_coarse) for i in range(dec.n_sub)]
    c0 = (zone == names.index("dechet")).astype(float)
    return Case("test3", mesh, dec, coeffs, grids, None, c0, None,
                meta={"zone": zone, "zone_names": names, "head": head, "approximate_geometry": True,
                      "window": window})
