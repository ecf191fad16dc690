"""Surface tension of the tilted ensemble and its gradient.

The free-energy cost per bond of a mean tilt u is sigma(u), normalized
so sigma(0) = 0.  Tilt differentiation of the partition function gives
the exact finite-N identity

    (grad sigma)_i (u) = E_u[ V'(eta(e_i)) ],

so the gradient is a plain Gibbs expectation and sigma itself is the
line integral sigma(u) = int_0^1 u . grad sigma(s u) ds, evaluated with
a Gauss-Legendre rule over Monte Carlo gradient estimates.

``decompose_flux`` splits the gradient as grad sigma(u) = A(u) u + a(u)
with the diagonal A from the convex curvature averaged along the tilt
segment; each A sample is pinched between the certified curvature bounds,
which is what makes the decomposition useful for uniqueness arguments.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gibbs import batch_means, make_sampler
from .potential import potential_from_spec, spec_of
from .rng import seed_key


def grad_sigma(
    pot,
    N: int,
    u,
    sweeps: int = 20000,
    seed=0,
    kind: str = "mala",
    step: float | None = None,
    burn_in: int | None = None,
    thin: int = 1,
):
    """Monte Carlo estimate of grad sigma(u); returns (vector, stderr)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    d = len(u)
    sampler = make_sampler(
        pot, N, u, kind=kind, step=step, burn_in=burn_in, thin=thin, seed=seed
    )
    obs = {
        f"g{i}": (lambda et, i=i: float(pot.vp(et[i] + u[i]).mean())) for i in range(d)
    }
    series = sampler.collect(sweeps, obs)
    vec = np.zeros(d)
    err = np.zeros(d)
    for i in range(d):
        vec[i], err[i], _ = batch_means(series[f"g{i}"], sampler.n_batches)
    return vec, err


@dataclass(frozen=True)
class SigmaEstimate:
    value: float
    stderr: float          # Monte Carlo + quadrature parts combined
    mc_error: float
    quad_error: float
    nodes: np.ndarray      # integration abscissae in [0, 1]
    node_values: np.ndarray
    node_stderr: np.ndarray


def sigma(
    pot,
    N: int,
    u,
    nodes: int = 8,
    sweeps: int = 12000,
    seed=0,
    kind: str = "mala",
    step: float | None = None,
    burn_in: int | None = None,
    thin: int = 1,
) -> SigmaEstimate:
    """Thermodynamic integration of grad sigma along the ray to u.

    The quadrature error proxy is the magnitude of the two highest
    Legendre coefficients the node values can resolve; for the smooth
    integrands here it is dominated by the Monte Carlo error.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not u.any():
        z = np.zeros(nodes)
        return SigmaEstimate(0.0, 0.0, 0.0, 0.0, z, z, z)
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = (x + 1.0) / 2.0
    ws = w / 2.0
    vals = np.zeros(nodes)
    errs = np.zeros(nodes)
    for j in range(nodes):
        g, ge = grad_sigma(
            pot, N, s[j] * u, sweeps=sweeps, kind=kind, step=step,
            burn_in=burn_in, thin=thin, seed=tuple(seed_key(seed)) + (j,),
        )
        vals[j] = float(u @ g)
        errs[j] = float(np.sqrt(np.sum(u**2 * ge**2)))
    value = float(ws @ vals)
    mc_err = float(np.sqrt(np.sum(ws**2 * errs**2)))
    coeffs = np.array(
        [
            (2 * k + 1) / 2.0 * np.sum(w * vals * np.polynomial.legendre.legval(
                x, np.eye(nodes)[k]))
            for k in range(nodes)
        ]
    )
    quad_err = float((abs(coeffs[-1]) + abs(coeffs[-2])) / (2 * nodes - 1))
    return SigmaEstimate(
        value=value,
        stderr=mc_err + quad_err,
        mc_error=mc_err,
        quad_error=quad_err,
        nodes=s,
        node_values=vals,
        node_stderr=errs,
    )


# ---------------------------------------------------------------------------
# convexity probe


@dataclass
class ConvexityReport:
    """Monotonicity quotients (u-v).(g(u)-g(v)) / |u-v|^2 over tilt pairs."""

    pairs: list
    quotients: np.ndarray
    stderr: np.ndarray
    c1_hat: float
    c1_err: float
    c2_hat: float
    c2_err: float

    @property
    def any_nonpositive(self) -> bool:
        return bool((self.quotients <= 0).any())


def convexity_probe(gradient_provider, pairs) -> ConvexityReport:
    """Probe strong monotonicity of a gradient map over tilt pairs.

    ``gradient_provider(u) -> (vector, stderr)`` may be a Monte Carlo
    closure or a table lookup.  Each distinct tilt is queried once.
    """
    cache: dict = {}

    def query(u):
        key = tuple(np.round(np.atleast_1d(u).astype(float), 12))
        if key not in cache:
            cache[key] = gradient_provider(np.asarray(key))
        return cache[key]

    quotients = []
    errors = []
    for u, v in pairs:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        dvec = u - v
        n2 = float(dvec @ dvec)
        if n2 == 0.0:
            raise ValueError("convexity probe needs distinct tilts in each pair")
        gu, su = query(u)
        gv, sv = query(v)
        quotients.append(float(dvec @ (gu - gv)) / n2)
        errors.append(float(np.sqrt(np.sum(dvec**2 * (su**2 + sv**2)))) / n2)
    quotients = np.asarray(quotients)
    errors = np.asarray(errors)
    i_min = int(np.argmin(quotients))
    i_max = int(np.argmax(quotients))
    return ConvexityReport(
        pairs=list(pairs),
        quotients=quotients,
        stderr=errors,
        c1_hat=float(quotients[i_min]),
        c1_err=float(errors[i_min]),
        c2_hat=float(quotients[i_max]),
        c2_err=float(errors[i_max]),
    )


# ---------------------------------------------------------------------------
# flux decomposition


@dataclass
class FluxDecomposition:
    """Diagonal split grad sigma(u) = A(u) u + a(u) with sample bounds."""

    tilt: np.ndarray
    A: np.ndarray
    A_err: np.ndarray
    a: np.ndarray
    a_err: np.ndarray
    A_sample_min: np.ndarray   # per-bond, per-sweep extremes of the A integrand
    A_sample_max: np.ndarray
    c_minus: float
    c_plus: float
    sweeps: int
    meta: dict = field(default_factory=dict)

    def reconstruct(self):
        """(value, stderr) of A u + a, componentwise."""
        val = self.A * self.tilt + self.a
        err = np.sqrt(self.tilt**2 * self.A_err**2 + self.a_err**2)
        return val, err

    @property
    def samples_in_bounds(self) -> bool:
        return bool(
            (self.A_sample_min >= self.c_minus - 1e-12).all()
            and (self.A_sample_max <= self.c_plus + 1e-12).all()
        )


def decompose_flux(
    pot,
    N: int,
    u,
    sweeps: int = 20000,
    seed=0,
    nodes: int = 8,
    kind: str = "mala",
    step: float | None = None,
    burn_in: int | None = None,
    thin: int = 1,
) -> FluxDecomposition:
    """Estimate A_ii(u) = E int_0^1 V0''(eta(e_i) - s u_i) ds and
    a_i(u) = E[V0'(eta(e_i) - u_i)] + E[g'(eta(e_i))].

    The segment integral is a Gauss-Legendre rule in s, so every sample
    of the A integrand is a convex combination of V0'' values and lands
    in [c_minus, c_plus] whenever the certified bounds hold.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    d = len(u)
    sampler = make_sampler(
        pot, N, u, kind=kind, step=step, burn_in=burn_in, thin=thin, seed=seed
    )
    x, w = np.polynomial.legendre.leggauss(nodes)
    lam = (x + 1.0) / 2.0
    wl = w / 2.0

    mins = np.full(d, np.inf)
    maxs = np.full(d, -np.inf)

    def a_obs(et, i):
        eta = et[i] + u[i]
        return float(pot.v0p(eta - u[i]).mean() + pot.gp(eta).mean())

    def big_a_obs(et, i):
        eta = et[i] + u[i]
        per_bond = sum(
            wl[m] * pot.v0pp(eta - lam[m] * u[i]) for m in range(nodes)
        )
        mins[i] = min(mins[i], float(per_bond.min()))
        maxs[i] = max(maxs[i], float(per_bond.max()))
        return float(per_bond.mean())

    obs = {}
    for i in range(d):
        obs[f"A{i}"] = lambda et, i=i: big_a_obs(et, i)
        obs[f"a{i}"] = lambda et, i=i: a_obs(et, i)
    series = sampler.collect(sweeps, obs)

    A = np.zeros(d)
    A_err = np.zeros(d)
    avec = np.zeros(d)
    a_err = np.zeros(d)
    for i in range(d):
        A[i], A_err[i], _ = batch_means(series[f"A{i}"], sampler.n_batches)
        avec[i], a_err[i], _ = batch_means(series[f"a{i}"], sampler.n_batches)
    return FluxDecomposition(
        tilt=u,
        A=A,
        A_err=A_err,
        a=avec,
        a_err=a_err,
        A_sample_min=mins,
        A_sample_max=maxs,
        c_minus=pot.c_minus,
        c_plus=pot.c_plus,
        sweeps=sweeps,
        meta={"potential": pot.name, "N": N, "nodes": nodes},
    )


# ---------------------------------------------------------------------------
# tabulated surface tension


class SurfaceTensionTable:
    """Gradient and value of sigma on a tensor grid of tilts.

    Queries interpolate multilinearly and clamp to the grid box,
    counting clamp events so a PDE run can detect leaving the tabulated
    range.  The sigma column comes from composite trapezoid integration
    of the gradient along grid paths rooted at the origin node.
    """

    def __init__(self, axes, dsigma, dsigma_err, sigma_vals, sigma_err, meta=None):
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        self.d = len(self.axes)
        self.dsigma = np.asarray(dsigma, dtype=float)
        self.dsigma_err = np.asarray(dsigma_err, dtype=float)
        self.sigma = np.asarray(sigma_vals, dtype=float)
        self.sigma_err = np.asarray(sigma_err, dtype=float)
        self.meta = dict(meta or {})
        self.clamp_events = 0
        grid_shape = tuple(len(a) for a in self.axes)
        if self.sigma.shape != grid_shape or self.dsigma.shape != grid_shape + (self.d,):
            raise ValueError("table arrays do not match the axes")

    def _clamp(self, pts: np.ndarray) -> np.ndarray:
        lo = np.array([a[0] for a in self.axes])
        hi = np.array([a[-1] for a in self.axes])
        clipped = np.clip(pts, lo, hi)
        self.clamp_events += int((clipped != pts).any(axis=1).sum())
        return clipped

    def _interp(self, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
        from scipy.interpolate import RegularGridInterpolator

        rgi = RegularGridInterpolator(self.axes, values, method="linear")
        return rgi(pts)

    def grad(self, u):
        """(vector, stderr) at one tilt, clamped multilinear interpolation."""
        pts = self._clamp(np.atleast_2d(np.asarray(u, dtype=float)))
        g = np.stack([self._interp(self.dsigma[..., i], pts) for i in range(self.d)], -1)
        e = np.stack(
            [self._interp(self.dsigma_err[..., i], pts) for i in range(self.d)], -1
        )
        return g[0], e[0]

    def grad_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized gradient lookup for PDE flux evaluation."""
        pts = self._clamp(np.atleast_2d(np.asarray(pts, dtype=float)))
        return np.stack(
            [self._interp(self.dsigma[..., i], pts) for i in range(self.d)], -1
        )

    def sigma_at(self, u) -> float:
        pts = self._clamp(np.atleast_2d(np.asarray(u, dtype=float)))
        return float(self._interp(self.sigma, pts)[0])

    # -- probes used by the PDE solver --------------------------------------

    def monotonicity_bounds(self):
        """(min, max) of axis-neighbour quotients (g(u')-g(u)).e_k / du."""
        lo, hi = np.inf, -np.inf
        for k in range(self.d):
            dvals = np.diff(self.dsigma[..., k], axis=k)
            du = np.diff(self.axes[k]).reshape(
                [-1 if i == k else 1 for i in range(self.d)] + [1]
            )[..., 0]
            q = dvals / du
            lo = min(lo, float(q.min()))
            hi = max(hi, float(q.max()))
        return lo, hi

    def lipschitz_upper(self) -> float:
        """Max over neighbouring nodes of |grad change| / |tilt change|."""
        worst = 0.0
        for k in range(self.d):
            dg = np.diff(self.dsigma, axis=k)
            du = np.diff(self.axes[k]).reshape(
                [-1 if i == k else 1 for i in range(self.d)] + [1]
            )
            worst = max(worst, float((np.linalg.norm(dg, axis=-1) / du[..., 0]).max()))
        return worst

    # -- serialization --------------------------------------------------------

    def to_csv(self, path) -> None:
        grid_shape = tuple(len(a) for a in self.axes)
        idx = np.indices(grid_shape).reshape(self.d, -1).T
        with open(path, "w", newline="") as fh:
            for key in sorted(self.meta):
                fh.write(f"# {key}={self.meta[key]}\n")
            writer = csv.writer(fh)
            header = (
                [f"u_{i}" for i in range(self.d)]
                + ["sigma", "sigma_err"]
                + [f"dsigma_{i}" for i in range(self.d)]
                + [f"dsigma_err_{i}" for i in range(self.d)]
            )
            writer.writerow(header)
            for multi in idx:
                key = tuple(multi)
                row = [repr(float(self.axes[i][multi[i]])) for i in range(self.d)]
                row += [repr(float(self.sigma[key])), repr(float(self.sigma_err[key]))]
                row += [repr(float(self.dsigma[key + (i,)])) for i in range(self.d)]
                row += [repr(float(self.dsigma_err[key + (i,)])) for i in range(self.d)]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "SurfaceTensionTable":
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            header = None
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key.strip()] = val
                    continue
                if header is None:
                    header = line.split(",")
                    continue
                if line:
                    rows.append([float(tok) for tok in line.split(",")])
        if header is None or not rows:
            raise ValueError(f"no table data in {path}")
        d = sum(1 for name in header if name.startswith("u_"))
        data = np.asarray(rows)
        axes = [np.unique(data[:, i]) for i in range(d)]
        grid_shape = tuple(len(a) for a in axes)
        if int(np.prod(grid_shape)) != len(rows):
            raise ValueError("table rows do not form a complete tensor grid")
        order = np.lexsort(tuple(data[:, i] for i in reversed(range(d))))
        data = data[order]
        sigma_vals = data[:, d].reshape(grid_shape)
        sigma_err = data[:, d + 1].reshape(grid_shape)
        dsig = data[:, d + 2 : 2 * d + 2].reshape(grid_shape + (d,))
        dsig_err = data[:, 2 * d + 2 : 3 * d + 2].reshape(grid_shape + (d,))
        return cls(axes, dsig, dsig_err, sigma_vals, sigma_err, meta)


def _table_node(args):
    spec, N, u, sweeps, seed_tuple, kind, step, burn_in, thin = args
    pot = potential_from_spec(spec)
    return grad_sigma(
        pot, N, u, sweeps=sweeps, seed=seed_tuple, kind=kind, step=step,
        burn_in=burn_in, thin=thin,
    )


def build_table(
    pot,
    N: int,
    axes,
    sweeps: int = 8000,
    seed=0,
    kind: str = "mala",
    step: float | None = None,
    burn_in: int | None = None,
    thin: int = 1,
    workers: int = 0,
) -> SurfaceTensionTable:
    """Tabulate grad sigma on a tensor grid and integrate for sigma.

    Each node runs an independent chain streamed by its flat index, so a
    process pool (``workers > 0``) returns bit-identical numbers to the
    serial run.  The grid must contain the origin, which anchors
    sigma = 0.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    d = len(axes)
    grid_shape = tuple(len(a) for a in axes)
    anchor = []
    for a in axes:
        hits = np.where(np.isclose(a, 0.0, atol=1e-12))[0]
        if len(hits) != 1:
            raise ValueError("each table axis must contain the origin exactly once")
        anchor.append(int(hits[0]))
    anchor = tuple(anchor)

    idx = np.indices(grid_shape).reshape(d, -1).T
    tilts = np.stack([axes[i][idx[:, i]] for i in range(d)], axis=-1)
    jobs = [
        (
            spec_of(pot), N, tilts[j], sweeps,
            tuple(seed_key(seed)) + (j,), kind, step, burn_in, thin,
        )
        for j in range(len(tilts))
    ]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_table_node, jobs))
    else:
        results = [_table_node(job) for job in jobs]

    dsigma = np.zeros(grid_shape + (d,))
    dsigma_err = np.zeros(grid_shape + (d,))
    for j, (g, e) in enumerate(results):
        key = tuple(idx[j])
        dsigma[key] = g
        dsigma_err[key] = e

    sigma_vals = np.zeros(grid_shape)
    sigma_var = np.zeros(grid_shape)
    filled = np.zeros(grid_shape, dtype=bool)
    filled[anchor] = True
    for k in range(d):
        # extend along axis k from the filled sub-grid (axes > k at anchor)
        base_slices = [slice(None)] * d
        for m in range(k + 1, d):
            base_slices[m] = anchor[m]
        ax = axes[k]
        for direction in (1, -1):
            start = anchor[k]
            rng_idx = (
                range(start + 1, len(ax)) if direction == 1 else range(start - 1, -1, -1)
            )
            for i in rng_idx:
                prev = i - direction
                sl_cur = list(base_slices)
                sl_prev = list(base_slices)
                sl_cur[k] = i
                sl_prev[k] = prev
                du = ax[i] - ax[prev]
                g_cur = dsigma[tuple(sl_cur) + (k,)]
                g_prev = dsigma[tuple(sl_prev) + (k,)]
                e_cur = dsigma_err[tuple(sl_cur) + (k,)]
                e_prev = dsigma_err[tuple(sl_prev) + (k,)]
                sigma_vals[tuple(sl_cur)] = (
                    sigma_vals[tuple(sl_prev)] + 0.5 * du * (g_cur + g_prev)
                )
                sigma_var[tuple(sl_cur)] = sigma_var[tuple(sl_prev)] + (
                    0.25 * du**2 * (e_cur**2 + e_prev**2)
                )

    meta = {
        "potential": pot.name,
        "N": N,
        "sweeps": sweeps,
        "seed": tuple(seed_key(seed)),
        "kind": kind,
    }
    return SurfaceTensionTable(
        axes, dsigma, dsigma_err, sigma_vals, np.sqrt(sigma_var), meta
    )
