"""Diffusive-scaling experiments: microscopic profiles against the PDE.

For each lattice scale N the microscopic system starts from cell
averages of the initial profile, evolves under the Langevin dynamics for
N^2 t microscopic time units, and is rescaled to a piecewise-constant
macroscopic profile.  The squared L2 distance to the limiting PDE
solution, averaged over independent realizations, should shrink as N
grows; the convergence table records exactly that.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import DirichletSystem, macro_height, run_dirichlet, step_cap
from .lattice import DomainSpec, boundary_height, cell_average, discretize_domain
from .pde import GaussianFlux, PdeGrid, TableFlux, l2_compare, solve
from .surface import SurfaceTensionTable


def profile_zero(points: np.ndarray) -> np.ndarray:
    return np.zeros(len(np.atleast_2d(points)))


def make_bump(amp: float = 0.4, radius: float = 0.3, center=None):
    """Smooth compactly supported bump, peak ``amp`` at ``center``."""

    def bump(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.zeros(pts.shape[1]) if center is None else np.asarray(center)
        s2 = np.einsum("ij,ij->i", pts - c, pts - c) / radius**2
        out = np.zeros(len(pts))
        inside = s2 < 1.0
        out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        return out

    return bump


def make_linear(slope):
    slope = np.atleast_1d(np.asarray(slope, dtype=float))

    def linear(points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(points, dtype=float)) @ slope

    return linear


@dataclass
class HydroExperiment:
    pot: object
    spec: DomainSpec
    boundary: object          # f, callable on (M, d) points
    initial: object           # h0, callable; must equal f near the boundary
    scales: tuple = (8, 16, 32)
    times: tuple = (0.05,)
    realizations: int = 32
    seed: int = 0
    dt: float | None = None          # microscopic step; default 0.9 * cap
    pde_spacing: float | None = None  # default (4 max N)^-1
    flux: object = "auto"            # "auto", flux object, or a table


@dataclass
class ConvergenceTable:
    """Rows (N, t, mean squared L2 gap, stderr, realizations)."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def gaps(self, t: float):
        """Scales and mean gaps at one checkpoint time, sorted by N."""
        sel = sorted(
            (r for r in self.rows if abs(r["t"] - t) < 1e-12), key=lambda r: r["N"]
        )
        return (
            [r["N"] for r in sel],
            [r["mean_sq_gap"] for r in sel],
            [r["stderr"] for r in sel],
        )

    def strictly_decreasing(self, t: float, n_se: float = 0.0) -> bool:
        """Whether gaps drop as N doubles, by at least n_se combined SEs."""
        _, gaps, errs = self.gaps(t)
        return all(
            gaps[i] - gaps[i + 1] >= n_se * np.hypot(errs[i], errs[i + 1])
            for i in range(len(gaps) - 1)
        )


def resolve_flux(flux, pot):
    if flux == "auto":
        if pot.name == "gaussian":
            return GaussianFlux()
        raise ValueError(
            "no closed-form flux for this potential; pass a surface table"
        )
    if flux == "gaussian":
        return GaussianFlux()
    if isinstance(flux, SurfaceTensionTable):
        return TableFlux(flux)
    return flux


def run(exp: HydroExperiment) -> ConvergenceTable:
    """Run the scaling study and collect the convergence table."""
    if not exp.scales:
        raise ValueError("need at least one lattice scale")
    times = tuple(sorted(float(t) for t in exp.times))
    if not times or times[0] <= 0:
        raise ValueError("checkpoint times must be positive")
    d = exp.spec.d
    max_n = max(exp.scales)
    spacing = exp.pde_spacing if exp.pde_spacing else 1.0 / (4 * max_n)
    flux = resolve_flux(exp.flux, exp.pot)

    grid = PdeGrid(exp.spec, spacing)
    reference = solve(
        grid, exp.initial, flux, t_end=times[-1], boundary=exp.boundary, record=times
    )

    table = ConvergenceTable(
        meta={
            "potential": exp.pot.name,
            "domain": exp.spec.shape,
            "d": d,
            "realizations": exp.realizations,
            "seed": exp.seed,
            "pde_spacing": spacing,
            "flux": getattr(flux, "label", str(exp.flux)),
            "times": times,
        }
    )
    dt = exp.dt if exp.dt is not None else 0.9 * step_cap(exp.pot, d)
    per_seed: dict = {}
    for N in exp.scales:
        dom = discretize_domain(exp.spec, N)
        psi = boundary_height(exp.boundary, N, dom.sites)
        phi0 = psi.copy()
        phi0[: dom.n_interior] = N * cell_average(
            exp.initial, N, dom.sites[: dom.n_interior]
        )
        system = DirichletSystem(
            dom, exp.pot, psi, phi0=phi0, seed=(exp.seed, N), replicas=exp.realizations
        )
        gaps = {t: None for t in times}

        def checkpoint(t, sys):
            fields = macro_height(sys, t)
            ref = reference.field_at(t)
            gaps[t] = np.array([l2_compare(fld, ref, exp.spec) for fld in fields])

        run_dirichlet(system, dt, times, collect=checkpoint)
        for t in times:
            g = gaps[t]
            table.rows.append(
                {
                    "N": N,
                    "t": t,
                    "mean_sq_gap": float(g.mean()),
                    "stderr": float(g.std(ddof=1) / np.sqrt(len(g))),
                    "realizations": len(g),
                }
            )
            per_seed[(N, t)] = g
    table.meta["per_seed"] = per_seed
    return table


def report(table: ConvergenceTable, outdir, meta: dict | None = None) -> list:
    """Write convergence CSV, plain plot data, and a log-log figure."""
    if not table.rows:
        raise ValueError("empty convergence table")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    header_meta = dict(meta or {})
    for key in ("potential", "domain", "d", "flux", "realizations"):
        if key in table.meta:
            header_meta.setdefault(key, table.meta[key])

    paths = []
    csv_path = outdir / "convergence.csv"
    with open(csv_path, "w", newline="") as fh:
        for key in sorted(header_meta):
            fh.write(f"# {key}={header_meta[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(["N", "t", "mean_sq_gap", "stderr", "realizations"])
        for row in table.rows:
            writer.writerow(
                [
                    row["N"],
                    repr(row["t"]),
                    repr(row["mean_sq_gap"]),
                    repr(row["stderr"]),
                    row["realizations"],
                ]
            )
    paths.append(csv_path)

    dat_path = outdir / "gap_vs_N.dat"
    with open(dat_path, "w") as fh:
        fh.write("# columns: N t mean_sq_gap stderr\n")
        for row in table.rows:
            fh.write(
                f"{row['N']} {row['t']!r} {row['mean_sq_gap']!r} {row['stderr']!r}\n"
            )
    paths.append(dat_path)

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return paths

    fig, ax = plt.subplots(figsize=(5, 4))
    times = sorted(set(row["t"] for row in table.rows))
    for t in times:
        ns, gaps, errs = table.gaps(t)
        ax.errorbar(ns, gaps, yerr=errs, marker="o", label=f"t={t:g}")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("lattice scale N")
    ax.set_ylabel("mean squared L2 gap")
    ax.legend()
    fig.tight_layout()
    png_path = outdir / "gap_vs_N.png"
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    paths.append(png_path)
    return paths
