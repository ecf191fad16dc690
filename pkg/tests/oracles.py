"""Independent reference computations used by the test suite.

Everything here is written directly against numpy/scipy, not against
the package under test, so a bug in the package cannot silently agree
with its own oracle.
"""

import numpy as np
from scipy.integrate import simpson


def laplacian_eigenvalues(N: int, d: int) -> np.ndarray:
    """Eigenvalues of the lattice Laplacian on the d-torus, shape (N,)*d."""
    k = np.arange(N)
    s2 = 4.0 * np.sin(np.pi * k / N) ** 2
    lam = np.zeros((N,) * d)
    for i in range(d):
        shape = [1] * d
        shape[i] = N
        lam = lam + s2.reshape(shape)
    return lam


def gaussian_bond_variance(N: int, d: int, axis: int) -> float:
    """Var of one gradient component under the zero-tilt Gaussian ensemble.

    Fourier diagonalization: Var = N^-d sum_{k != 0} 4 sin^2(pi k_axis/N)
    / lambda_k with lambda_k the Laplacian eigenvalue.
    """
    lam = laplacian_eigenvalues(N, d)
    k = np.arange(N)
    shape = [1] * d
    shape[axis] = N
    num = (4.0 * np.sin(np.pi * k / N) ** 2).reshape(shape) * np.ones((N,) * d)
    mask = lam > 0
    return float(np.sum(num[mask] / lam[mask]) / N**d)


def em_gaussian_bond_variance(N: int, d: int, axis: int, dt: float) -> float:
    """Stationary bond variance of the Euler chain for the quadratic model.

    The update is linear, phi' = (1 - dt L) phi + sqrt(2 dt) xi, so each
    Fourier mode is an AR(1) with stationary variance
    2 dt / (1 - (1 - dt lambda)^2) = 1 / (lambda (1 - dt lambda / 2)).
    """
    lam = laplacian_eigenvalues(N, d)
    k = np.arange(N)
    shape = [1] * d
    shape[axis] = N
    num = (4.0 * np.sin(np.pi * k / N) ** 2).reshape(shape) * np.ones((N,) * d)
    mask = lam > 0
    denom = lam[mask] * (1.0 - dt * lam[mask] / 2.0)
    return float(np.sum(num[mask] / denom) / N**d)


def heat_solution(h0, x, t, n_terms: int = 200, n_quad: int = 4001):
    """Dirichlet heat equation on [0,1] by sine series.

    Coefficients are computed with Simpson quadrature of the initial
    profile, so this shares no code with the finite-difference solver it
    checks.
    """
    xs = np.linspace(0.0, 1.0, n_quad)
    vals = np.asarray(h0(xs[:, None])).ravel()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    for k in range(1, n_terms + 1):
        bk = 2.0 * simpson(vals * np.sin(k * np.pi * xs), x=xs)
        out += bk * np.exp(-((k * np.pi) ** 2) * t) * np.sin(k * np.pi * x)
    return out


def conditional_density_1d(v, left, right, grid):
    """Normalized density of the middle height given frozen neighbours.

    One-site window in d=1: two bonds contribute, weight
    exp(-v(phi - left) - v(right - phi)); trapezoid normalization.
    """
    logw = -(v(grid - left) + v(right - grid))
    logw -= logw.max()
    w = np.exp(logw)
    z = np.trapezoid(w, grid)
    return w / z


def density_moments(density, grid):
    m = np.trapezoid(density * grid, grid)
    var = np.trapezoid(density * (grid - m) ** 2, grid)
    return float(m), float(var)


def brute_force_interior(contains, N: int, d: int, span: int = None):
    """All sites whose 5/N-cube sits inside the region, by dense sampling.

    ``contains`` maps (M, d) points to booleans.  Cube membership is
    checked on a 7-point-per-axis tensor cloud spanning the half-open
    cube [-2.5, 2.5)^d / N; the open side is shaved by a small epsilon.
    """
    if span is None:
        span = 3 * N
    ticks = np.arange(-span, span + 1)
    grids = np.meshgrid(*([ticks] * d), indexing="ij")
    sites = np.stack([g.ravel() for g in grids], axis=1)
    lo, hi = -2.5 / N, 2.5 / N - 1e-12
    probe = np.linspace(lo, hi, 7)
    cloud = np.meshgrid(*([probe] * d), indexing="ij")
    cloud = np.stack([c.ravel() for c in cloud], axis=1)
    keep = []
    for x in sites:
        pts = x / N + cloud
        if contains(pts).all():
            keep.append(x)
    return np.array(keep, dtype=int).reshape(-1, d)


def fd_gradient(fn, x, h: float = 1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat = g.ravel()
    xf = x.ravel()
    for i in range(x.size):
        xp = xf.copy()
        xm = xf.copy()
        xp[i] += h
        xm[i] -= h
        flat[i] = (fn(xp.reshape(x.shape)) - fn(xm.reshape(x.shape))) / (2 * h)
    return g


def hamiltonian_torus(v, phi, tilt):
    """Reference tilted energy on the torus: sum over directed bonds in
    the positive axis directions of v(gradient + tilt component)."""
    phi = np.asarray(phi, dtype=float)
    d = phi.ndim
    total = 0.0
    for i in range(d):
        eta = np.roll(phi, -1, axis=i) - phi + tilt[i]
        total += v(eta).sum()
    return float(total)


def hamiltonian_domain(v, phi, heads, tails):
    """Reference Dirichlet energy: sum of v over the closure bond list."""
    return float(v(phi[heads] - phi[tails]).sum())
