"""One-step explicit schemes for Maxwell's equations.

1D system (free space, unit speed): dH/dt = dE/dx, dE/dt = dH/dx.
2D TMz system on u = (Hx, Hy, Ez):

    dHx/dt = -dEz/dy,  dHy/dt = dEz/dx,  dEz/dt = dHy/dx - dHx/dy,

with materials eps (divides the Ez update) and mu (divides the H updates).

Scheme kinds
  cd        centered differences in space, forward Euler in time
  lf        same derivative terms with the Lax-Friedrichs neighbor average
            replacing the center value
  theta     convex blend: (1 - theta)*cd + theta*lf center term
  ls_cd     centered-difference analog with least-squares gradients,
            valid on non-uniform (point-shifted) grids
  ls_theta  least-squares gradients and the fitted center value replacing
            the point value (reduces to theta = 0.8 on uniform grids)

All schemes are one-step and linear; `direction="backward"` negates dt
(the averaging terms are part of the spatial operator and keep their sign).
Steps never mutate their input state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .grid import Grid2, STENCIL_OFFSETS
from .lsq import batched_fit_weights

SCHEME_KINDS = ("cd", "lf", "theta", "ls_cd", "ls_theta")
DIRECTIONS = ("forward", "backward")


def _check_material(arr, shape, name):
    if arr is None:
        return None
    arr = np.asarray(arr, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} shape {arr.shape} does not match fields {shape}")
    if np.any(arr <= 0):
        raise ValueError(f"{name} must be positive everywhere")
    return arr


@dataclass
class FieldState1:
    """E and H on a periodic 1D grid; eps/mu default to free space."""

    E: np.ndarray
    H: np.ndarray
    eps: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        if self.E.shape != self.H.shape or self.E.ndim != 1:
            raise ValueError(f"E and H must be equal-length 1D arrays, got {self.E.shape} and {self.H.shape}")
        self.eps = _check_material(self.eps, self.E.shape, "eps")
        self.mu = _check_material(self.mu, self.E.shape, "mu")

    @property
    def n(self):
        return self.E.shape[0]


@dataclass
class FieldState2:
    """TMz fields (Hx, Hy, Ez) on a 2D grid, indexed [i, j] ~ (x_i, y_j)."""

    Hx: np.ndarray
    Hy: np.ndarray
    Ez: np.ndarray
    eps: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None

    def __post_init__(self):
        self.Hx = np.asarray(self.Hx, dtype=float)
        self.Hy = np.asarray(self.Hy, dtype=float)
        self.Ez = np.asarray(self.Ez, dtype=float)
        if not (self.Hx.shape == self.Hy.shape == self.Ez.shape) or self.Hx.ndim != 2:
            raise ValueError("Hx, Hy, Ez must be 2D arrays of one shape")
        self.eps = _check_material(self.eps, self.Ez.shape, "eps")
        self.mu = _check_material(self.mu, self.Ez.shape, "mu")

    @property
    def shape(self):
        return self.Ez.shape


@dataclass(frozen=True)
class SchemeSpec:
    """Underlying-scheme selector: kind, time step, theta, direction."""

    kind: str
    dt: float
    theta: float = 0.0
    direction: str = "forward"

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}; expected one of {SCHEME_KINDS}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")

    def reversed(self) -> "SchemeSpec":
        other = "backward" if self.direction == "forward" else "forward"
        return replace(self, direction=other)

    @property
    def signed_dt(self) -> float:
        return self.dt if self.direction == "forward" else -self.dt


def lincomb1(ca: float, a: FieldState1, cb: float, b: FieldState1) -> FieldState1:
    return FieldState1(ca * a.E + cb * b.E, ca * a.H + cb * b.H, a.eps, a.mu)


def lincomb2(ca: float, a: FieldState2, cb: float, b: FieldState2) -> FieldState2:
    return FieldState2(ca * a.Hx + cb * b.Hx, ca * a.Hy + cb * b.Hy,
                       ca * a.Ez + cb * b.Ez, a.eps, a.mu)


def _center_blend(theta_eff, f, axis1d=False):
    """(1 - theta)*f + theta*(neighbor average), periodic."""
    if theta_eff == 0.0:
        return f
    if axis1d:
        avg = 0.5 * (np.roll(f, 1) + np.roll(f, -1))
    else:
        avg = 0.25 * (np.roll(f, 1, axis=0) + np.roll(f, -1, axis=0)
                      + np.roll(f, 1, axis=1) + np.roll(f, -1, axis=1))
    if theta_eff == 1.0:
        return avg
    return (1.0 - theta_eff) * f + theta_eff * avg


def _theta_eff(spec: SchemeSpec) -> float:
    return {"cd": 0.0, "lf": 1.0, "theta": spec.theta}[spec.kind]


def step_1d(spec: SchemeSpec, state: FieldState1, dx: float) -> FieldState1:
    """One step of a uniform-grid scheme on a periodic 1D state."""
    if spec.kind in ("ls_cd", "ls_theta"):
        raise ValueError("least-squares kinds are 2D schemes; use step_2d")
    if not dx > 0:
        raise ValueError(f"dx must be positive, got {dx}")
    lam = spec.signed_dt / dx
    inv_eps = 1.0 if state.eps is None else 1.0 / state.eps
    inv_mu = 1.0 if state.mu is None else 1.0 / state.mu
    th = _theta_eff(spec)
    # (f_{j+1} - f_{j-1}) / 2
    de = 0.5 * (np.roll(state.E, -1) - np.roll(state.E, 1))
    dh = 0.5 * (np.roll(state.H, -1) - np.roll(state.H, 1))
    e_new = _center_blend(th, state.E, axis1d=True) + lam * inv_eps * dh
    h_new = _center_blend(th, state.H, axis1d=True) + lam * inv_mu * de
    return FieldState1(e_new, h_new, state.eps, state.mu)


def _dx_c(f):
    return 0.5 * (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0))


def _dy_c(f):
    return 0.5 * (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1))


class StencilGeometry:
    """Per-point 5-point stencil indices and offsets for a Grid2.

    Update points are all points (periodic) or the interior ring-1 points
    (bounded; the outer ring has no update rule and is held fixed).
    Weights for the linear least-squares fit can be computed fresh per use
    (`weights()`) or precomputed once (`cached_weights()`); both paths run
    the same factorization.
    """

    def __init__(self, grid: Grid2):
        self.grid = grid
        nx, ny = grid.nx, grid.ny
        periodic = grid.boundary_kind == "periodic"
        if periodic:
            ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        else:
            ii, jj = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1), indexing="ij")
        ii = ii.ravel()
        jj = jj.ravel()
        self.points = ii * ny + jj
        m = self.points.shape[0]
        self.neighbors = np.empty((m, 5), dtype=np.intp)
        self.offsets = np.empty((m, 5, 2))
        cx = grid.coords[:, :, 0].ravel()
        cy = grid.coords[:, :, 1].ravel()
        for s, (di, dj) in enumerate(STENCIL_OFFSETS):
            ni, nj = ii + di, jj + dj
            shift_x = np.zeros(m)
            shift_y = np.zeros(m)
            if periodic:
                shift_x = np.where(ni < 0, -grid.width, np.where(ni >= nx, grid.width, 0.0))
                shift_y = np.where(nj < 0, -grid.height, np.where(nj >= ny, grid.height, 0.0))
                ni = ni % nx
                nj = nj % ny
            flat = ni * ny + nj
            self.neighbors[:, s] = flat
            self.offsets[:, s, 0] = cx[flat] + shift_x - cx[self.points]
            self.offsets[:, s, 1] = cy[flat] + shift_y - cy[self.points]
        self._weights = None

    def weights(self):
        w, _ = batched_fit_weights(self.offsets)
        return w

    def cached_weights(self):
        if self._weights is None:
            self._weights = self.weights()
        return self._weights


def _ls_fit_all(geom: StencilGeometry, weights, *fields):
    """Fitted (a, d/dx, d/dy) for each flat field at the update points."""
    out = []
    for f in fields:
        s = f.ravel()[geom.neighbors]
        out.append(np.einsum("mjs,ms->mj", weights, s))
    return out


def step_2d(spec: SchemeSpec, state: FieldState2, grid: Grid2,
            geometry: Optional[StencilGeometry] = None,
            weights=None) -> FieldState2:
    """One step of the selected scheme on a 2D state.

    Kinds cd/lf/theta require a uniform periodic grid (roll kernels);
    ls_cd/ls_theta work on any Grid2 through local least-squares fits.
    Passing `geometry` (and optionally `weights`) reuses precomputed
    stencil data; otherwise both are built fresh.
    """
    if state.shape != (grid.nx, grid.ny):
        raise ValueError(f"state shape {state.shape} does not match grid {(grid.nx, grid.ny)}")
    sdt = spec.signed_dt
    inv_eps = 1.0 if state.eps is None else 1.0 / state.eps
    inv_mu = 1.0 if state.mu is None else 1.0 / state.mu

    if spec.kind in ("cd", "lf", "theta"):
        if grid.boundary_kind != "periodic":
            raise ValueError(f"kind {spec.kind!r} uses periodic roll kernels; bounded grids need a ls_* kind")
        if not grid.is_uniform(tol=1e-12 * min(grid.dx, grid.dy)):
            raise ValueError(f"kind {spec.kind!r} requires a uniform grid; use ls_cd or ls_theta")
        lx = sdt / grid.dx
        ly = sdt / grid.dy
        th = _theta_eff(spec)
        hx = _center_blend(th, state.Hx) - ly * inv_mu * _dy_c(state.Ez)
        hy = _center_blend(th, state.Hy) + lx * inv_mu * _dx_c(state.Ez)
        ez = (_center_blend(th, state.Ez)
              + inv_eps * (lx * _dx_c(state.Hy) - ly * _dy_c(state.Hx)))
        return FieldState2(hx, hy, ez, state.eps, state.mu)

    geom = geometry if geometry is not None else StencilGeometry(grid)
    w = weights if weights is not None else geom.weights()
    fit_hx, fit_hy, fit_ez = _ls_fit_all(geom, w, state.Hx, state.Hy, state.Ez)
    pts = geom.points
    ie = inv_eps if np.isscalar(inv_eps) else inv_eps.ravel()[pts]
    im = inv_mu if np.isscalar(inv_mu) else inv_mu.ravel()[pts]
    if spec.kind == "ls_cd":
        base_hx = state.Hx.ravel()[pts]
        base_hy = state.Hy.ravel()[pts]
        base_ez = state.Ez.ravel()[pts]
    else:  # ls_theta: fitted center value replaces the point value
        base_hx = fit_hx[:, 0]
        base_hy = fit_hy[:, 0]
        base_ez = fit_ez[:, 0]
    hx = state.Hx.copy().ravel()
    hy = state.Hy.copy().ravel()
    ez = state.Ez.copy().ravel()
    hx[pts] = base_hx - sdt * im * fit_ez[:, 2]
    hy[pts] = base_hy + sdt * im * fit_ez[:, 1]
    ez[pts] = base_ez + sdt * ie * (fit_hy[:, 1] - fit_hx[:, 2])
    shape = state.shape
    return FieldState2(hx.reshape(shape), hy.reshape(shape), ez.reshape(shape),
                       state.eps, state.mu)
