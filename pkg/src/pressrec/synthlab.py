"""Ground-truth flows, momentum source terms, velocity noise and point seedings.

Random draws use numpy's Philox counter-based generator keyed by the seed,
so a given ``(seed, call)`` reproduces the same stream on any platform
numpy supports.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .errors import EmptyFieldError, ShapeError, UnsupportedGridError
from .fields import CartesianGrid2, PointSet2, ScalarSamples, VectorSamples


def philox(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


@dataclass(frozen=True)
class TaylorGreenParams:
    U: float = 1.0
    k: float = 1.0
    nu: float = 0.0
    rho: float = 1.0

    def __post_init__(self):
        if not (self.U > 0 and self.k > 0 and self.rho > 0 and self.nu >= 0):
            raise ValueError(f"invalid Taylor-Green parameters {self}")

    @property
    def mu(self):
        return self.rho * self.nu


@dataclass(frozen=True)
class NoiseSpec:
    level: float
    rng_seed: int = 0
    direction_dim: int = 3

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("noise level must be non-negative")
        if self.direction_dim not in (2, 3):
            raise ValueError("direction_dim must be 2 or 3")


def taylor_green_eval(params: TaylorGreenParams, points: PointSet2, t=0.0, grid=None):
    """Closed-form decaying Taylor-Green vortex.

    Returns a dict with ``velocity``, ``pressure`` and ``pressure_gradient``
    samples at ``points``.
    """
    U, k, rho = params.U, params.k, params.rho
    F = np.exp(-2.0 * params.nu * k * k * t)
    x, y = points.x, points.y
    u = -U * np.cos(k * x) * np.sin(k * y) * F
    v = U * np.sin(k * x) * np.cos(k * y) * F
    p = -(rho * U * U / 4.0) * (np.cos(2 * k * x) + np.cos(2 * k * y)) * F * F
    amp = rho * U * U * k / 2.0 * F * F
    dp = np.column_stack([amp * np.sin(2 * k * x), amp * np.sin(2 * k * y)])
    return {
        "velocity": VectorSamples(points, np.column_stack([u, v]), grid),
        "pressure": ScalarSamples(points, p, grid),
        "pressure_gradient": VectorSamples(points, dp, grid),
    }


def taylor_green_pressure(params: TaylorGreenParams, xy, t=0.0):
    xy = np.asarray(xy, float)
    F2 = np.exp(-4.0 * params.nu * params.k ** 2 * t)
    k = params.k
    return -(params.rho * params.U ** 2 / 4.0) * (np.cos(2 * k * xy[:, 0]) + np.cos(2 * k * xy[:, 1])) * F2


def taylor_green_gradient(params: TaylorGreenParams, xy, t=0.0):
    xy = np.asarray(xy, float)
    F2 = np.exp(-4.0 * params.nu * params.k ** 2 * t)
    k = params.k
    amp = params.rho * params.U ** 2 * k / 2.0 * F2
    return np.column_stack([amp * np.sin(2 * k * xy[:, 0]), amp * np.sin(2 * k * xy[:, 1])])


# --- finite differences -----------------------------------------------------

def _d1(f, h, axis):
    return np.gradient(f, h, axis=axis, edge_order=2)


def _d2(f, h, axis):
    """Second derivative, central inside and one-sided second order at the edges."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h ** 2
    if f.shape[0] >= 4:
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h ** 2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h ** 2
    else:
        out[0], out[-1] = out[1], out[-2]
    return np.moveaxis(out, 0, axis)


def momentum_source(u_prev: VectorSamples, u_now: VectorSamples, u_next: VectorSamples,
                    dt, rho=1.0, mu=0.0) -> VectorSamples:
    """Pressure gradient -rho*Du/Dt + mu*lap(u) from three velocity snapshots.

    All derivatives are second-order central; the time derivative uses the
    outer snapshots, the spatial ones the middle snapshot. Only the in-plane
    velocity components enter the momentum balance.
    """
    grid = u_now.grid
    if grid is None:
        raise ShapeError("momentum_source needs snapshots attached to a CartesianGrid2")
    shapes = {s.values.shape for s in (u_prev, u_now, u_next)}
    if len(shapes) != 1 or any(s.grid != grid for s in (u_prev, u_next)):
        raise ShapeError(f"snapshot shapes differ: {sorted(shapes)}")
    h = grid.h
    U0 = u_prev.as_grid()[..., :2]
    U1 = u_now.as_grid()[..., :2]
    U2 = u_next.as_grid()[..., :2]
    dudt = (U2 - U0) / (2.0 * dt)
    ux = U1[..., 0]
    uy = U1[..., 1]
    g = np.empty_like(U1)
    for c in range(2):
        f = U1[..., c]
        fx = _d1(f, h, axis=1)
        fy = _d1(f, h, axis=0)
        lap = _d2(f, h, axis=1) + _d2(f, h, axis=0)
        g[..., c] = -rho * (dudt[..., c] + ux * fx + uy * fy) + mu * lap
    return VectorSamples(u_now.points, g.reshape(-1, 2), grid)


# --- noise ------------------------------------------------------------------

def add_noise(velocity: VectorSamples, spec: NoiseSpec) -> VectorSamples:
    """Perturb each valid sample by ``a * d``.

    ``a ~ Normal(0, sigma^2)`` with ``2*sigma = level * V_max`` and ``d`` a unit
    vector uniform on the circle or sphere; for 2-component fields only the
    in-plane part of a spherical direction is applied.
    """
    if spec.level == 0:
        return velocity
    usable = velocity.usable
    if not usable.any():
        raise EmptyFieldError("no valid velocity samples to perturb")
    vals = velocity.values
    vmax = float(np.max(np.linalg.norm(vals[usable], axis=1)))
    sigma = spec.level * vmax / 2.0
    n = len(vals)
    rng = philox(spec.rng_seed)
    a = rng.normal(0.0, sigma, size=n)
    if spec.direction_dim == 2:
        theta = rng.uniform(0.0, 2 * np.pi, size=n)
        d = np.column_stack([np.cos(theta), np.sin(theta), np.zeros(n)])
    else:
        w = rng.standard_normal((n, 3))
        d = w / np.linalg.norm(w, axis=1, keepdims=True)
    delta = a[:, None] * d[:, : velocity.ncomp]
    delta[~usable] = 0.0
    return VectorSamples(velocity.points, vals + delta, velocity.grid)


# --- seedings ---------------------------------------------------------------

def seed_perturbed_grid(n_per_side, domain=(-0.5, 0.5, -0.5, 0.5), eps_std=4e-4, rng_seed=0) -> PointSet2:
    """Regular lattice with Gaussian jitter on interior points only."""
    if n_per_side < 3:
        raise ValueError("n_per_side must be at least 3")
    x0, x1, y0, y1 = domain
    X, Y = np.meshgrid(np.linspace(x0, x1, n_per_side), np.linspace(y0, y1, n_per_side))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    edge = np.zeros((n_per_side, n_per_side), bool)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    edge = edge.ravel()
    if eps_std > 0:
        eps = philox(rng_seed).normal(0.0, eps_std, size=pts.shape)
        pts[~edge] += eps[~edge]
    return PointSet2(pts, boundary=edge)


def seed_uniform_random(n, L=1.0, rng_seed=0) -> PointSet2:
    """``n`` i.i.d. points in ``(-L/2, L/2)^2``; hull vertices flagged as boundary."""
    if n < 3:
        raise ValueError("need at least 3 points")
    pts = philox(rng_seed).uniform(-L / 2, L / 2, size=(n, 2))
    hull = np.zeros(n, bool)
    hull[ConvexHull(pts).vertices] = True
    return PointSet2(pts, boundary=hull)


# --- spectral derivative ----------------------------------------------------

def spectral_gradient(field: ScalarSamples) -> VectorSamples:
    grid = field.grid
    if grid is None or not grid.periodic:
        raise UnsupportedGridError("spectral_gradient needs a periodic CartesianGrid2")
    if grid.nx % 2 or grid.ny % 2:
        raise UnsupportedGridError("spectral_gradient needs even nx and ny")
    F = np.fft.fft2(field.as_grid())
    kx = 2 * np.pi * np.fft.fftfreq(grid.nx, d=grid.h)
    ky = 2 * np.pi * np.fft.fftfreq(grid.ny, d=grid.h)
    kx[grid.nx // 2] = 0.0
    ky[grid.ny // 2] = 0.0
    gx = np.fft.ifft2(1j * kx[None, :] * F).real
    gy = np.fft.ifft2(1j * ky[:, None] * F).real
    return VectorSamples(field.points, np.column_stack([gx.ravel(), gy.ravel()]), grid)


def seed_disk(n_boundary=256, radius=1.0, center=(0.0, 0.0)) -> PointSet2:
    """Concentric rings filling a disk; the outer ring has ``n_boundary`` points.

    Ring spacing matches the outer arc length, so triangles stay near
    equilateral and the boundary loop has exactly ``n_boundary`` elements.
    """
    h = 2 * np.pi * radius / n_boundary
    n_rings = max(1, int(round(radius / h)))
    pts = [np.zeros((1, 2))]
    flags = [np.zeros(1, bool)]
    for i in range(1, n_rings + 1):
        r = radius * i / n_rings
        m = n_boundary if i == n_rings else max(6, int(round(2 * np.pi * r / h)))
        th = 2 * np.pi * (np.arange(m) + 0.5 * (i % 2)) / m
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        flags.append(np.full(m, i == n_rings))
    P = np.vstack(pts) + np.asarray(center, float)
    return PointSet2(P, boundary=np.concatenate(flags))
