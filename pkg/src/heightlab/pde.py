"""Explicit solver for the limiting nonlinear diffusion.

The macroscopic height profile follows

    dh/dt = div( grad sigma( grad h ) )    in D,
    h = f                                   on the boundary,

solved here with a flux-form forward Euler scheme on a node grid aligned
with the domain walls: face gradients are central differences, the flux
is evaluated on faces, and interior nodes gain the divergence of the
face fluxes.  The time step obeys dt <= spacing^2 / (2 d C2) where C2
bounds the flux Lipschitz constant, which keeps the update a convex
combination and the solution inside its initial bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolation, FluxRangeExceeded, NonFinite
from .lattice import DomainSpec


class GaussianFlux:
    """Closed-form flux for the quadratic potential: grad sigma(u) = u."""

    label = "gaussian-exact"
    monotone_lower = 1.0
    lipschitz_upper = 1.0

    def grad_many(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float)


class TableFlux:
    """Flux interpolated from a surface-tension table.

    Refuses tables whose monotonicity probe is not strictly positive;
    a degenerate flux would make the limiting equation ill-posed.  Clamp
    events beyond ``clamp_tol`` of all queries raise
    ``FluxRangeExceeded`` at the end of a solve.
    """

    def __init__(self, table, c1: float | None = None, c2: float | None = None):
        lo, hi = table.monotonicity_bounds()
        self.monotone_lower = float(c1 if c1 is not None else lo)
        self.lipschitz_upper = float(
            c2 if c2 is not None else max(hi, table.lipschitz_upper())
        )
        if self.monotone_lower <= 0:
            raise ValueError(
                f"flux table is not monotone (C1 = {self.monotone_lower:g})"
            )
        self.table = table
        self.label = f"table({table.meta.get('potential', '?')})"

    @property
    def clamp_events(self) -> int:
        return self.table.clamp_events

    def grad_many(self, pts: np.ndarray) -> np.ndarray:
        return self.table.grad_many(pts)


class PdeGrid:
    """Uniform node grid over the domain's bounding box.

    Nodes sit at lo + k * spacing per axis, including both walls, so box
    boundaries carry nodes exactly.  A node is interior when it lies
    strictly inside the domain; every other node is clamped to boundary
    data.
    """

    def __init__(self, spec: DomainSpec, spacing: float):
        lo, hi = spec.bounding_box()
        counts = []
        for a, b in zip(lo, hi):
            n = (b - a) / spacing
            n_round = round(n)
            if abs(n - n_round) > 1e-9 or n_round < 2:
                raise ValueError(
                    f"spacing {spacing:g} does not tile the bounding box span {b - a:g}"
                )
            counts.append(int(n_round) + 1)
        self.spec = spec
        self.spacing = float(spacing)
        self.d = spec.d
        self.axes = [lo[i] + spacing * np.arange(counts[i]) for i in range(self.d)]
        self.shape = tuple(counts)
        pts = self.points()
        self.interior = self._strictly_inside(pts).reshape(self.shape)

    def _strictly_inside(self, pts: np.ndarray) -> np.ndarray:
        spec = self.spec
        if spec.shape == "box":
            lo, hi = spec.bounding_box()
            return np.all((pts > lo + 1e-12) & (pts < hi - 1e-12), axis=1)
        if spec.shape == "ball":
            c = np.asarray(spec.center, dtype=float)
            r2 = np.einsum("ij,ij->i", pts - c, pts - c)
            return r2 < spec.radius**2 - 1e-12
        a = np.asarray(spec.normals, dtype=float)
        b = np.asarray(spec.offsets, dtype=float)
        return np.all(pts @ a.T < b - 1e-12, axis=1)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def evaluate(self, fn) -> np.ndarray:
        return np.asarray(fn(self.points()), dtype=float).reshape(self.shape)


class GridField:
    """Nodal values with multilinear sampling, for L2 comparisons."""

    def __init__(self, grid: PdeGrid, values: np.ndarray):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    @property
    def cell_volume(self) -> float:
        return self.grid.spacing**self.grid.d

    def cell_centers(self) -> np.ndarray:
        return self.grid.points()

    def sample(self, points: np.ndarray) -> np.ndarray:
        from scipy.interpolate import RegularGridInterpolator

        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([a[0] for a in self.grid.axes])
        hi = np.array([a[-1] for a in self.grid.axes])
        rgi = RegularGridInterpolator(self.grid.axes, self.values, method="linear")
        return rgi(np.clip(pts, lo, hi))


@dataclass
class PdeSolution:
    grid: PdeGrid
    final: np.ndarray
    snapshots: dict = field(default_factory=dict)
    dt: float = 0.0
    steps: int = 0
    linf_ok: bool = True
    flux_label: str = ""

    def field_at(self, t: float) -> GridField:
        for key, vals in self.snapshots.items():
            if abs(key - t) <= 1e-12 * max(1.0, abs(t)):
                return GridField(self.grid, vals)
        raise KeyError(f"no snapshot recorded at t={t:g}")


def _divergence(h: np.ndarray, flux, spacing: float) -> np.ndarray:
    """Flux-form divergence of grad sigma(grad h) at all inner nodes."""
    d = h.ndim
    div = np.zeros_like(h)
    node_grads = np.gradient(h, spacing) if d > 1 else None
    for i in range(d):
        lower = tuple(slice(None, -1) if k == i else slice(None) for k in range(d))
        upper = tuple(slice(1, None) if k == i else slice(None) for k in range(d))
        face_grad = (h[upper] - h[lower]) / spacing  # axis-i derivative on faces
        comps = []
        for j in range(d):
            if j == i:
                comps.append(face_grad)
            else:
                avg = 0.5 * (node_grads[j][lower] + node_grads[j][upper])
                comps.append(avg)
        face_vec = np.stack([c.ravel() for c in comps], axis=-1)
        flux_i = flux.grad_many(face_vec)[:, i].reshape(face_grad.shape)
        inner = tuple(slice(1, -1) if k == i else slice(None) for k in range(d))
        take_hi = tuple(slice(1, None) if k == i else slice(None) for k in range(d))
        take_lo = tuple(slice(None, -1) if k == i else slice(None) for k in range(d))
        div[inner] += (flux_i[take_hi] - flux_i[take_lo]) / spacing
    return div


def solve(
    grid: PdeGrid,
    h0,
    flux,
    t_end: float,
    boundary=None,
    dt: float | None = None,
    record=(),
    safety: float = 0.9,
    clamp_tol: float = 1e-3,
) -> PdeSolution:
    """Integrate to ``t_end``, recording snapshots at the given times.

    ``h0`` is a callable on points or a nodal array; ``boundary`` is the
    callable supplying values at non-interior nodes (defaults to freezing
    the initial values there).  A user ``dt`` above the CFL cap raises
    ``CflViolation``; the automatic step is ``safety`` times the cap and
    each recording segment lands exactly.
    """
    h = grid.evaluate(h0) if callable(h0) else np.array(h0, dtype=float)
    if h.shape != grid.shape:
        raise ValueError("initial data does not match the grid")
    if boundary is not None:
        bvals = grid.evaluate(boundary)
    else:
        bvals = h.copy()
    exterior = ~grid.interior
    h[exterior] = bvals[exterior]

    cap = grid.spacing**2 / (2.0 * grid.d * flux.lipschitz_upper)
    if dt is not None and dt > cap * (1 + 1e-12):
        raise CflViolation(f"dt={dt:g} exceeds CFL cap {cap:g}")
    dt_base = dt if dt is not None else safety * cap

    record = sorted(set(float(t) for t in record) | {float(t_end)})
    if record[0] < 0 or record[-1] > t_end + 1e-12:
        raise ValueError("recording times must lie in [0, t_end]")
    clamp_before = getattr(flux, "clamp_events", 0)
    queries = 0

    bound0 = float(np.abs(h).max())
    sol = PdeSolution(
        grid=grid, final=h, dt=dt_base, flux_label=getattr(flux, "label", "?")
    )
    t = 0.0
    steps = 0
    for t_next in record:
        span = t_next - t
        if span > 1e-15:
            n = max(1, int(np.ceil(span / dt_base - 1e-12)))
            dt_eff = span / n
            for _ in range(n):
                div = _divergence(h, flux, grid.spacing)
                h[grid.interior] += dt_eff * div[grid.interior]
                h[exterior] = bvals[exterior]
                steps += 1
                queries += grid.d * h.size  # upper bound on flux queries
                if not np.isfinite(h).all():
                    raise NonFinite(f"PDE state left float range at step {steps}")
                if np.abs(h).max() > bound0 + 1e-9:
                    sol.linf_ok = False
        t = t_next
        sol.snapshots[t_next] = h.copy()
    sol.final = h
    sol.steps = steps
    clamped = getattr(flux, "clamp_events", 0) - clamp_before
    if queries and clamped / queries > clamp_tol:
        raise FluxRangeExceeded(
            f"{clamped} of ~{queries} flux queries left the tabulated range"
        )
    return sol


def l2_compare(a, b, spec: DomainSpec) -> float:
    """Squared L2(D) distance by midpoint rule on the finer field's cells.

    Both arguments expose ``spacing``, ``cell_volume``, ``cell_centers``
    and ``sample``; the finer field supplies the quadrature points, so
    comparisons across coarse fields against one fine reference share
    identical quadrature geometry.
    """
    finer = a if a.spacing <= b.spacing else b
    pts = finer.cell_centers()
    inside = spec.contains(pts)
    if not inside.any():
        return 0.0
    pts = pts[inside]
    diff = np.asarray(a.sample(pts)) - np.asarray(b.sample(pts))
    return float(np.sum(diff**2) * finer.cell_volume)
