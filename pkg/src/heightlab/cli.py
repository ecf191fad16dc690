"""Command-line front end.

Every subcommand is driven by the same config tree: defaults, then an
optional JSON config file, then --set dotted overrides, then the short
convenience flags.  Artifacts land in ``<output root>/<command>-<config
hash>/`` and each CSV header carries the hash and master seed, so a
rerun of the same config in serial mode reproduces the bytes exactly.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from .config import (
    RunConfig,
    apply_overrides,
    build_domain,
    build_potential,
    build_profile,
    config_hash,
    tilt_vector,
)
from .dynamics import (
    DirichletSystem,
    energy_diagnostic,
    macro_height,
    run_dirichlet,
    step_cap,
)
from .errors import HeightLabError
from .gibbs import (
    dlr_check,
    estimate_bond_variance,
    estimate_identity2,
    make_sampler,
)
from .hydro import HydroExperiment, report as hydro_report, run as hydro_run
from .io import save_field, write_csv
from .lattice import boundary_height, cell_average, discretize_domain
from .pde import GaussianFlux, PdeGrid, TableFlux, solve
from .potential import certify
from .surface import SurfaceTensionTable, convexity_probe, decompose_flux, grad_sigma, sigma


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heightlab",
        description="Lattice interface model laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "certify-potential": "check a potential against its declared constants",
        "sample-gibbs": "sample the tilted gradient ensemble, report estimates",
        "surface-tension": "estimate sigma(u) by thermodynamic integration",
        "convexity-probe": "monotonicity quotient between two tilts",
        "decompose-flux": "uniformly elliptic flux decomposition at a tilt",
        "simulate": "Langevin evolution in a domain with boundary data",
        "pde-solve": "deterministic limit equation solver",
        "hydro": "microscopic vs PDE scaling study",
        "dlr-check": "conditional-law check in a frozen window",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            metavar="KEY=VALUE",
            help="override a config leaf, e.g. sampler.sweeps=4000",
        )
        p.add_argument("--pot", help="potential kind: gaussian | cosine | split_bump")
        p.add_argument("--u", help="tilt, comma separated, e.g. 1,0")
        p.add_argument("--N", type=int, help="lattice scale")
        p.add_argument("--d", type=int, help="dimension")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output root directory")
        p.add_argument("--workers", type=int, help="process pool size, 0 = serial")
    sub.choices["convexity-probe"].add_argument(
        "--v", help="second tilt for the probe, comma separated"
    )
    sub.choices["surface-tension"].add_argument(
        "--table", action="store_true", help="tabulate the whole grid from config"
    )
    return parser


def _flag_overrides(args) -> list:
    items = list(args.overrides or [])
    if args.pot:
        items.append(f"potential.kind={args.pot}")
    if args.u is not None:
        parts = [float(p) for p in args.u.split(",")]
        items.append(f"lattice.tilt={list(parts)}")
        if args.d is None:
            items.append(f"lattice.d={len(parts)}")
    if args.d is not None:
        items.append(f"lattice.d={args.d}")
    if args.N is not None:
        items.append(f"lattice.N={args.N}")
    if args.seed is not None:
        items.append(f"seed={args.seed}")
    if args.workers is not None:
        items.append(f"workers={args.workers}")
    return items


def _load(args) -> tuple[RunConfig, dict, str]:
    cfg = cfgmod.load_config(args.config) if args.config else RunConfig()
    cfg = apply_overrides(cfg, _flag_overrides(args))
    digest = config_hash(cfg)
    root = args.out or os.environ.get("HEIGHTLAB_OUT") or cfg.output_dir
    outdir = os.path.join(root, f"{args.command}-{digest}")
    meta = {"config": digest, "seed": cfg.seed}
    return cfg, meta, outdir


def _print_report(rep) -> None:
    print(
        f"{rep.name} = {rep.value:.6f} +/- {rep.stderr:.6f}"
        f"  (ess {rep.ess:.0f}, sweeps {rep.sweeps})"
    )


def cmd_certify_potential(cfg: RunConfig, meta, outdir) -> int:
    pot = build_potential(cfg.potential)
    rep = certify(pot)
    print(f"potential {pot.name}: c_minus={pot.c_minus!r} c_plus={pot.c_plus!r} c_g={pot.c_g!r}")
    for label, flag in (
        ("curvature window", rep.curvature_ok),
        ("perturbation bound", rep.g_ok),
        ("symmetry", rep.symmetry_ok),
        ("split consistency", rep.split_ok),
        ("drift lipschitz", rep.lipschitz_ok),
    ):
        print(f"  {label}: {'ok' if flag else 'FAIL'}")
    write_csv(
        os.path.join(outdir, "certify.csv"),
        {
            "v0pp_min": [rep.v0pp_min],
            "v0pp_max": [rep.v0pp_max],
            "g_bound_max": [rep.g_bound_max],
            "symmetry_defect": [rep.symmetry_defect],
            "split_defect": [rep.split_defect],
            "vp_slope_max": [rep.vp_slope_max],
            "ok": [int(rep.ok)],
        },
        meta | {"potential": pot.name},
    )
    return 0 if rep.ok else 3


def cmd_sample_gibbs(cfg: RunConfig, meta, outdir) -> int:
    pot = build_potential(cfg.potential)
    u = tilt_vector(cfg.lattice)
    s = cfg.sampler
    sampler = make_sampler(
        pot, cfg.lattice.N, u, kind=s.kind,
        step=s.step or None, burn_in=None if s.burn_in < 0 else s.burn_in,
        thin=s.thin, seed=cfg.seed,
    )
    reports = [estimate_bond_variance(sampler, i, s.sweeps) for i in range(len(u))]
    reports.append(estimate_identity2(sampler, s.sweeps))
    print(
        f"sampler {s.kind}: step={sampler.step:.4g} "
        f"acceptance={sampler.acceptance_rate:.3f}"
    )
    for rep in reports:
        _print_report(rep)
    write_csv(
        os.path.join(outdir, "gibbs.csv"),
        {
            "name": [r.name for r in reports],
            "value": [r.value for r in reports],
            "stderr": [r.stderr for r in reports],
            "ess": [r.ess for r in reports],
        },
        meta | {
            "potential": pot.name, "N": cfg.lattice.N,
            "tilt": ",".join(repr(x) for x in u),
            "kind": s.kind, "step": repr(sampler.step),
            "acceptance": repr(sampler.acceptance_rate),
        },
    )
    return 0


def cmd_surface_tension(cfg: RunConfig, meta, outdir, args) -> int:
    pot = build_potential(cfg.potential)
    u = tilt_vector(cfg.lattice)
    s, sf = cfg.sampler, cfg.surface
    if getattr(args, "table", False):
        lo, hi, count = sf.grid
        axes = [np.linspace(lo, hi, int(count)) for _ in range(cfg.lattice.d)]
        from .surface import build_table

        table = build_table(
            pot, cfg.lattice.N, axes, sweeps=sf.sweeps, seed=cfg.seed,
            kind=s.kind, thin=s.thin, workers=cfg.workers,
        )
        table.meta.update(config=meta["config"])
        path = os.path.join(outdir, "surface_table.csv")
        os.makedirs(outdir, exist_ok=True)
        table.to_csv(path)
        print(f"surface table: {table.sigma.size} nodes -> {path}")
        return 0
    est = sigma(
        pot, cfg.lattice.N, u, nodes=sf.nodes, sweeps=sf.sweeps,
        seed=cfg.seed, kind=s.kind, thin=s.thin,
    )
    grad, gerr = grad_sigma(
        pot, cfg.lattice.N, u, sweeps=sf.sweeps, seed=cfg.seed,
        kind=s.kind, thin=s.thin,
    )
    u_label = "(" + ",".join(f"{x:g}" for x in u) + ")"
    print(f"sigma({u_label}) = {est.value:.6f} +/- {est.stderr:.6f}")
    print(
        "grad sigma = ["
        + ", ".join(f"{g:.5f}+/-{e:.5f}" for g, e in zip(grad, gerr))
        + "]"
    )
    write_csv(
        os.path.join(outdir, "surface.csv"),
        {
            "sigma": [est.value],
            "stderr": [est.stderr],
            "mc_err": [est.mc_error],
            "quad_err": [est.quad_error],
            **{f"dsigma_{i}": [grad[i]] for i in range(len(u))},
            **{f"dsigma_err_{i}": [gerr[i]] for i in range(len(u))},
        },
        meta | {
            "potential": pot.name, "N": cfg.lattice.N,
            "tilt": ",".join(repr(x) for x in u),
        },
    )
    return 0


def cmd_convexity_probe(cfg: RunConfig, meta, outdir, args) -> int:
    pot = build_potential(cfg.potential)
    u = tilt_vector(cfg.lattice)
    if getattr(args, "v", None):
        v = np.array([float(p) for p in args.v.split(",")])
    else:
        v = np.zeros_like(u)
    s, sf = cfg.sampler, cfg.surface

    def provider(w):
        return grad_sigma(
            pot, cfg.lattice.N, w, sweeps=sf.sweeps, seed=cfg.seed,
            kind=s.kind, thin=s.thin,
        )

    rep = convexity_probe(provider, [(u, v)])
    q, qe = rep.quotients[0], rep.stderr[0]
    print(f"quotient <grad diff, u-v>/|u-v|^2 = {q:.5f} +/- {qe:.5f}")
    print(f"c1_hat = {rep.c1_hat:.5f} +/- {rep.c1_err:.5f}, "
          f"c2_hat = {rep.c2_hat:.5f} +/- {rep.c2_err:.5f}")
    write_csv(
        os.path.join(outdir, "convexity.csv"),
        {
            "quotient": rep.quotients,
            "stderr": rep.stderr,
            "c1_hat": [rep.c1_hat] * len(rep.quotients),
            "c2_hat": [rep.c2_hat] * len(rep.quotients),
        },
        meta | {
            "potential": pot.name, "N": cfg.lattice.N,
            "u": ",".join(repr(x) for x in u),
            "v": ",".join(repr(x) for x in v),
        },
    )
    return 0 if not rep.any_nonpositive else 3


def cmd_decompose_flux(cfg: RunConfig, meta, outdir) -> int:
    pot = build_potential(cfg.potential)
    u = tilt_vector(cfg.lattice)
    s, sf = cfg.sampler, cfg.surface
    dec = decompose_flux(
        pot, cfg.lattice.N, u, sweeps=sf.sweeps, seed=cfg.seed,
        nodes=sf.nodes, kind=s.kind, thin=s.thin,
    )
    grad, gerr = grad_sigma(
        pot, cfg.lattice.N, u, sweeps=sf.sweeps, seed=cfg.seed,
        kind=s.kind, thin=s.thin,
    )
    recon, recon_err = dec.reconstruct()
    print(f"A diag = {dec.A}")
    print(f"a vec  = {dec.a}")
    print(f"samples in [c_minus, c_plus]: {dec.samples_in_bounds}")
    print(f"A u + a = {recon} vs grad sigma = {grad}")
    d = len(u)
    write_csv(
        os.path.join(outdir, "flux.csv"),
        {
            "axis": np.arange(d),
            "A_diag": dec.A,
            "A_err": dec.A_err,
            "a_vec": dec.a,
            "a_err": dec.a_err,
            "reconstructed": recon,
            "reconstructed_err": recon_err,
            "dsigma": grad,
            "dsigma_err": gerr,
        },
        meta | {
            "potential": pot.name, "N": cfg.lattice.N,
            "tilt": ",".join(repr(x) for x in u),
            "in_bounds": int(dec.samples_in_bounds),
        },
    )
    ok = dec.samples_in_bounds and np.all(
        np.abs(recon - grad) <= 3.0 * np.hypot(recon_err, gerr) + 1e-12
    )
    return 0 if ok else 3


def cmd_simulate(cfg: RunConfig, meta, outdir) -> int:
    pot = build_potential(cfg.potential)
    d = cfg.lattice.d
    N = cfg.lattice.N
    spec = build_domain(cfg.domain, d)
    f = build_profile(cfg.boundary, d)
    h0 = build_profile(cfg.initial, d)
    dom = discretize_domain(spec, N)
    psi = boundary_height(f, N, dom.sites)
    phi0 = psi.copy()
    phi0[: dom.n_interior] = N * cell_average(h0, N, dom.sites[: dom.n_interior])
    system = DirichletSystem(dom, pot, psi, phi0=phi0, seed=cfg.seed)
    dyn = cfg.dynamics
    dt = dyn.dt or 0.9 * step_cap(pot, d)
    times = (dyn.t_end,)
    trace = run_dirichlet(system, dt, times, noise_scale=dyn.noise_scale)
    field = macro_height(system, dyn.t_end)
    diag = energy_diagnostic(trace, pot.c_minus)
    print(
        f"simulate: N={N} t={dyn.t_end} dt={dt:.3g} "
        f"|h|^2={field.l2_norm_sq():.6f} energy_ok={diag.ok}"
    )
    save_field(
        os.path.join(outdir, "final_height.csv"),
        field.sites,
        field.values,
        meta | {"potential": pot.name, "N": N, "t": repr(dyn.t_end)},
    )
    write_csv(
        os.path.join(outdir, "energy.csv"),
        {
            "t": trace.times,
            "h_norm_sq": trace.h_norm_sq.mean(axis=1),
            "dirichlet_integral": trace.dirichlet_integral.mean(axis=1),
        },
        meta | {"potential": pot.name, "N": N},
    )
    return 0


def _resolve_flux_arg(name: str):
    if name == "gaussian":
        return GaussianFlux()
    return TableFlux(SurfaceTensionTable.from_csv(name))


def cmd_pde_solve(cfg: RunConfig, meta, outdir) -> int:
    d = cfg.lattice.d
    spec = build_domain(cfg.domain, d)
    grid = PdeGrid(spec, cfg.pde.spacing)
    h0 = build_profile(cfg.initial, d)
    f = build_profile(cfg.boundary, d)
    flux = _resolve_flux_arg(cfg.pde.flux)
    sol = solve(
        grid, h0, flux, t_end=cfg.pde.t_end, boundary=f,
        record=cfg.pde.record or (),
    )
    print(
        f"pde: t={cfg.pde.t_end} steps={sol.steps} dt={sol.dt:.3g} "
        f"max_ok={sol.linf_ok} flux={sol.flux_label}"
    )
    pts = grid.points()
    write_csv(
        os.path.join(outdir, "pde_final.csv"),
        {**{f"x{i}": pts[:, i] for i in range(d)}, "value": sol.final.ravel()},
        meta | {
            "t": repr(cfg.pde.t_end), "spacing": repr(cfg.pde.spacing),
            "flux": sol.flux_label, "steps": sol.steps,
        },
    )
    return 0


def cmd_hydro(cfg: RunConfig, meta, outdir) -> int:
    pot = build_potential(cfg.potential)
    d = cfg.lattice.d
    spec = build_domain(cfg.domain, d)
    f = build_profile(cfg.boundary, d)
    h0 = build_profile(cfg.initial, d)
    if cfg.pde.flux == "gaussian":
        flux = "gaussian"
    else:
        flux = SurfaceTensionTable.from_csv(cfg.pde.flux)
    exp = HydroExperiment(
        pot=pot, spec=spec, boundary=f, initial=h0,
        scales=tuple(cfg.hydro.scales), times=tuple(cfg.hydro.times),
        realizations=cfg.hydro.realizations, seed=cfg.seed,
        dt=cfg.dynamics.dt or None, pde_spacing=cfg.pde.spacing or None,
        flux=flux,
    )
    table = hydro_run(exp)
    for row in table.rows:
        print(
            f"N={row['N']:>4} t={row['t']:g} gap^2={row['mean_sq_gap']:.3e} "
            f"+/- {row['stderr']:.1e} ({row['realizations']} runs)"
        )
    hydro_report(table, outdir, meta)
    return 0


def cmd_dlr_check(cfg: RunConfig, meta, outdir) -> int:
    pot = build_potential(cfg.potential)
    u = tilt_vector(cfg.lattice)
    dl = cfg.dlr
    rep = dlr_check(
        pot, cfg.lattice.N, u, window=dl.window, n_samples=dl.n_samples,
        chains=dl.chains, thin=dl.thin, burn=dl.burn, bins=dl.bins,
        seed=cfg.seed,
    )
    sup = "n/a" if rep.sup_distance is None else f"{rep.sup_distance:.4f}"
    print(
        f"dlr window={dl.window}: sup|hist - exact| = {sup} "
        f"start-group distance = {rep.two_start_distance:.4f} "
        f"({rep.n_samples} samples)"
    )
    write_csv(
        os.path.join(outdir, "dlr.csv"),
        {
            "sup_distance": [np.nan if rep.sup_distance is None else rep.sup_distance],
            "two_start_distance": [rep.two_start_distance],
            "mean": [rep.mean_emp],
            "mean_exact": [np.nan if rep.mean_quad is None else rep.mean_quad],
            "var": [rep.var_emp],
            "var_exact": [np.nan if rep.var_quad is None else rep.var_quad],
            "n_samples": [rep.n_samples],
        },
        meta | {"potential": pot.name, "window": dl.window},
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        cfg, meta, outdir = _load(args)
        if args.command == "certify-potential":
            return cmd_certify_potential(cfg, meta, outdir)
        if args.command == "sample-gibbs":
            return cmd_sample_gibbs(cfg, meta, outdir)
        if args.command == "surface-tension":
            return cmd_surface_tension(cfg, meta, outdir, args)
        if args.command == "convexity-probe":
            return cmd_convexity_probe(cfg, meta, outdir, args)
        if args.command == "decompose-flux":
            return cmd_decompose_flux(cfg, meta, outdir)
        if args.command == "simulate":
            return cmd_simulate(cfg, meta, outdir)
        if args.command == "pde-solve":
            return cmd_pde_solve(cfg, meta, outdir)
        if args.command == "hydro":
            return cmd_hydro(cfg, meta, outdir)
        if args.command == "dlr-check":
            return cmd_dlr_check(cfg, meta, outdir)
        print(f"error: unknown command {args.command}", file=sys.stderr)
        return 2
    except (HeightLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
