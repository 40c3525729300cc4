"""Heat semigroup estimation and functional-inequality verification.

Two independent routes to the semigroup P_T = exp(T L / 2) live here:

* Monte Carlo: P_T f(x) is the sample mean of f(x * g_T) over simulated group
  Brownian endpoints.  One endpoint set is drawn per sampler and reused for
  every function and every evaluation point, so finite differences of the
  semigroup share their noise (common random numbers) and differences of
  estimates are themselves mean estimates.
* A grid PDE solver for the three-dimensional group (n=2, d=1), stepping
  du/dt = (X^2 + Y^2)u/2 with X = d/dw1 - (w2/2) d/dc, Y = d/dw2 + (w1/2) d/dc
  by second-order centered stencils and explicit Euler in time.

Each inequality check produces one VerificationRecord with both sides, the
propagated statistical errors, and the stated deterministic slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .curvature import CurvatureConstants
from .groups import GroupElement, OmegaForm, multiply, multiply_arrays, translate_endpoints
from .records import VerificationRecord, coords_str
from .rng import mix64
from .stochastic import sample_endpoints

try:
    from numba import njit, prange
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

__all__ = [
    "BumpFunction", "SemigroupEstimate", "SemigroupSampler", "GridDensity",
    "pde_oracle_h3", "apply_h3_generator", "mollified_sampler",
    "semigroup_mc", "gamma_semigroup_mc",
    "verify_reverse_poincare", "verify_reverse_logsobolev",
    "verify_wang_harnack", "verify_integrated_harnack", "verify_strong_feller",
    "strong_feller_modulus", "density_kde",
]


# --------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class BumpFunction:
    """Smooth compactly supported bump plus a constant floor.

    f(z) = floor + height * exp(-1 / (1 - r^2)) for r < 1 and floor outside,
    where r is the Euclidean distance of the full coordinate vector from the
    center, divided by the radius.  A positive floor keeps the function
    strictly positive, as the logarithmic inequalities require.
    """

    center: GroupElement
    radius: float
    height: float = 1.0
    floor: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")
        if self.floor < 0:
            raise ValueError("bump floor must be nonnegative")

    def __call__(self, coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        delta = coords - self.center.coords()[None, :]
        r2 = np.sum(delta * delta, axis=1) / (self.radius * self.radius)
        out = np.full(r2.shape, self.floor)
        inside = r2 < 1.0
        out[inside] += self.height * np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    def sup_bound(self) -> float:
        return self.floor + self.height * math.exp(-1.0)


# --------------------------------------------------------------------------
# Monte Carlo semigroup


@dataclass
class SemigroupEstimate:
    value: float
    stderr: float
    samples: int
    T: float
    steps: int
    point: GroupElement


class SemigroupSampler:
    """One endpoint set, many semigroup estimates under common random numbers.

    Optionally composes every endpoint with an independent Gaussian start
    point (diagonal standard deviations ``mollifier``), which matches a grid
    solve whose delta initial condition was mollified by the same Gaussian.
    """

    def __init__(self, form: OmegaForm, T: float, steps: int, samples: int,
                 seed: int, stream: int = 0, mollifier=None):
        self.form = form
        self.T = float(T)
        self.steps = int(steps)
        self.samples = int(samples)
        self.seed = int(seed)
        W, C = sample_endpoints(form, T, steps, samples, seed, stream=stream)
        if mollifier is not None:
            sig = np.asarray(mollifier, dtype=float)
            if sig.shape != (form.n + form.d,):
                raise ValueError("mollifier needs one standard deviation per coordinate")
            rng = np.random.Generator(np.random.Philox(key=mix64(seed, "mollifier", stream)))
            start = rng.standard_normal((samples, form.n + form.d)) * sig[None, :]
            W, C = multiply_arrays(form, start[:, :form.n], start[:, form.n:], W, C)
        self._W = W
        self._C = C

    def endpoints(self):
        """The cached endpoint coordinate arrays (W, C); read-only by convention."""
        return self._W, self._C

    def values(self, func, x: GroupElement) -> np.ndarray:
        """Per-sample values f(x * g_i); the raw material of every estimate."""
        W, C = translate_endpoints(self.form, x, self._W, self._C)
        return np.asarray(func(np.concatenate([W, C], axis=1)), dtype=float)

    def estimate(self, func, x: GroupElement) -> SemigroupEstimate:
        vals = self.values(func, x)
        se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        return SemigroupEstimate(float(vals.mean()), se, self.samples, self.T,
                                 self.steps, x)

    # -- common-random-number derivative estimates ---------------------------

    def _shift(self, x, direction, h):
        w = np.zeros(self.form.n)
        c = np.zeros(self.form.d)
        kind, idx = direction
        if kind == "w":
            w[idx] = h
        else:
            c[idx] = h
        return multiply(self.form, x, GroupElement(w, c))

    def _difference(self, func, x, direction, h):
        vp = self.values(func, self._shift(x, direction, h))
        vm = self.values(func, self._shift(x, direction, -h))
        diff = (vp - vm) / (2.0 * h)
        return float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(len(diff)))

    def _log_difference(self, func, x, direction, h):
        vp = self.values(func, self._shift(x, direction, h))
        vm = self.values(func, self._shift(x, direction, -h))
        up, um = vp.mean(), vm.mean()
        if up <= 0 or um <= 0:
            raise ValueError("semigroup estimate not positive; log derivative undefined")
        est = (math.log(up) - math.log(um)) / (2.0 * h)
        lin = vp / up - vm / um
        se = float(lin.std(ddof=1) / np.sqrt(len(lin)) / (2.0 * h))
        return est, se

    def _squared_gradient(self, func, x, h, directions, use_log):
        one = self._log_difference if use_log else self._difference
        total, var, bias = 0.0, 0.0, 0.0
        for direction in directions:
            d_h, se = one(func, x, direction, h)
            d_half, _ = one(func, x, direction, 0.5 * h)
            total += d_half * d_half
            var += (2.0 * d_half * se) ** 2
            # Richardson gap bounds the residual O(h^2) differencing bias
            bias += abs(d_half * d_half - d_h * d_h)
        return total, math.sqrt(var), bias

    def gamma_estimate(self, func, x, h, rank=None, use_log=False):
        """Squared horizontal gradient of P_T f (or of ln P_T f) at x."""
        rank = self.form.n if rank is None else rank
        dirs = [("w", i) for i in range(rank)]
        return self._squared_gradient(func, x, h, dirs, use_log)

    def gamma_z_estimate(self, func, x, h, use_log=False):
        """Squared vertical gradient of P_T f (or of ln P_T f) at x."""
        dirs = [("c", l) for l in range(self.form.d)]
        return self._squared_gradient(func, x, h, dirs, use_log)


def mollified_sampler(form, T, steps, samples, seed, grid_steps, cells=2.0,
                      stream: int = 0) -> SemigroupSampler:
    """Sampler whose start point matches a grid delta mollified by ``cells``."""
    sig = np.array([cells * grid_steps[0], cells * grid_steps[1], cells * grid_steps[2]])
    return SemigroupSampler(form, T, steps, samples, seed, stream=stream, mollifier=sig)


def semigroup_mc(form, f, x: GroupElement, T: float, samples: int, steps: int,
                 seed: int) -> SemigroupEstimate:
    """One-shot semigroup estimate; build a SemigroupSampler to share draws."""
    return SemigroupSampler(form, T, steps, samples, seed).estimate(f, x)


def gamma_semigroup_mc(form, f, x: GroupElement, T: float, h: float,
                       samples: int, steps: int, seed: int, rank=None):
    """One-shot squared-gradient estimate of P_T f at x; returns
    (value, stderr, differencing slack)."""
    sampler = SemigroupSampler(form, T, steps, samples, seed)
    return sampler.gamma_estimate(f, x, h, rank=rank)


# --------------------------------------------------------------------------
# grid PDE oracle for the three-dimensional group


@dataclass
class GridDensity:
    axes: tuple          # (w1, w2, c) node coordinate arrays
    values: np.ndarray   # (len(w1), len(w2), len(c))
    T: float
    mass: float
    mass_ok: bool
    meta: dict = field(default_factory=dict)

    def steps(self):
        return tuple(float(a[1] - a[0]) for a in self.axes)

    def quadrature(self, integrand=None) -> float:
        """Trapezoid integral of integrand (defaults to the density itself)."""
        vals = self.values if integrand is None else integrand
        return _trapezoid3(self.axes, vals)

    def interpolator(self):
        return RegularGridInterpolator(self.axes, self.values, bounds_error=False,
                                       fill_value=0.0)

    def grid_coords(self):
        w1, w2, c = np.meshgrid(*self.axes, indexing="ij")
        return w1, w2, c

    def value_at(self, point) -> float:
        return float(self.interpolator()(np.asarray(point, dtype=float)[None, :])[0])


def _trapezoid3(axes, vals) -> float:
    w1, w2, c = axes
    return float(np.trapezoid(np.trapezoid(np.trapezoid(vals, c, axis=2),
                                           w2, axis=1), w1, axis=0))


def _stability_bound(w1, w2, c):
    dw1, dw2, dc = w1[1] - w1[0], w2[1] - w2[0], c[1] - c[0]
    maxspeed = 0.5 * math.sqrt(max(abs(w1[0]), abs(w1[-1])) ** 2 +
                               max(abs(w2[0]), abs(w2[-1])) ** 2)
    return 0.2 * min(dw1 * dw1, dw2 * dw2, dc * dc / (maxspeed * maxspeed))


if _HAVE_NUMBA:
    @njit(parallel=True, cache=True)
    def _step_kernel(u, unew, w1, w2, idw1sq, idw2sq, idcsq, i4w2c, i4w1c, dt):
        I, J, L = u.shape
        for i in prange(1, I - 1):
            for j in range(1, J - 1):
                a = w1[i]
                b = w2[j]
                vc = (a * a + b * b) * 0.125
                for k in range(1, L - 1):
                    uc = u[i, j, k]
                    lap = (u[i + 1, j, k] - 2 * uc + u[i - 1, j, k]) * idw1sq \
                        + (u[i, j + 1, k] - 2 * uc + u[i, j - 1, k]) * idw2sq
                    ucc = (u[i, j, k + 1] - 2 * uc + u[i, j, k - 1]) * idcsq
                    m2c = (u[i, j + 1, k + 1] - u[i, j - 1, k + 1]
                           - u[i, j + 1, k - 1] + u[i, j - 1, k - 1]) * i4w2c
                    m1c = (u[i + 1, j, k + 1] - u[i - 1, j, k + 1]
                           - u[i + 1, j, k - 1] + u[i - 1, j, k - 1]) * i4w1c
                    unew[i, j, k] = uc + dt * (0.5 * lap + 0.5 * (a * m2c - b * m1c)
                                               + vc * ucc)


def _step_numpy(u, unew, w1, w2, idw1sq, idw2sq, idcsq, i4w2c, i4w1c, dt):
    ui = u[1:-1, 1:-1, 1:-1]
    lap = (u[2:, 1:-1, 1:-1] - 2 * ui + u[:-2, 1:-1, 1:-1]) * idw1sq \
        + (u[1:-1, 2:, 1:-1] - 2 * ui + u[1:-1, :-2, 1:-1]) * idw2sq
    ucc = (u[1:-1, 1:-1, 2:] - 2 * ui + u[1:-1, 1:-1, :-2]) * idcsq
    m2c = (u[1:-1, 2:, 2:] - u[1:-1, :-2, 2:] - u[1:-1, 2:, :-2]
           + u[1:-1, :-2, :-2]) * i4w2c
    m1c = (u[2:, 1:-1, 2:] - u[:-2, 1:-1, 2:] - u[2:, 1:-1, :-2]
           + u[:-2, 1:-1, :-2]) * i4w1c
    a = w1[1:-1, None, None]
    b = w2[None, 1:-1, None]
    vc = (a * a + b * b) * 0.125
    unew[1:-1, 1:-1, 1:-1] = ui + dt * (0.5 * lap + 0.5 * (a * m2c - b * m1c) + vc * ucc)


def apply_h3_generator(axes, values) -> np.ndarray:
    """One application of (X^2 + Y^2)/2 by the same stencils; zero on the boundary."""
    w1, w2, c = axes
    dw1, dw2, dc = w1[1] - w1[0], w2[1] - w2[0], c[1] - c[0]
    out = np.zeros_like(values)
    _step_numpy(values, out, w1, w2, 1 / dw1**2, 1 / dw2**2, 1 / dc**2,
                1 / (4 * dw2 * dc), 1 / (4 * dw1 * dc), 1.0)
    out[1:-1, 1:-1, 1:-1] -= values[1:-1, 1:-1, 1:-1]
    return out


def _mollified_delta(axes, cells):
    w1, w2, c = axes
    sig = (cells * (w1[1] - w1[0]), cells * (w2[1] - w2[0]), cells * (c[1] - c[0]))
    g1 = np.exp(-0.5 * (w1 / sig[0]) ** 2) / (sig[0] * math.sqrt(2 * math.pi))
    g2 = np.exp(-0.5 * (w2 / sig[1]) ** 2) / (sig[1] * math.sqrt(2 * math.pi))
    g3 = np.exp(-0.5 * (c / sig[2]) ** 2) / (sig[2] * math.sqrt(2 * math.pi))
    return g1[:, None, None] * g2[None, :, None] * g3[None, None, :]


def pde_oracle_h3(initial, T: float, box=((-6.0, 6.0), (-6.0, 6.0), (-8.0, 8.0)),
                  shape=(96, 96, 128), dt: float | None = None,
                  cfl_fraction: float = 0.5, mollifier_cells: float = 2.0,
                  use_numba: bool = True) -> GridDensity:
    """Explicit grid solve of the group heat equation on the n=2, d=1 group.

    ``initial`` is "delta" (a Gaussian of ``mollifier_cells`` cells per axis,
    normalized to unit mass), a callable on (N, 3) coordinates, or a grid
    array.  dt must respect the stability bound
    0.2 * min(dw^2, dc^2 / maxspeed^2) with maxspeed the largest vertical
    drift speed |w|/2 on the box; the default is half the bound.  Boundary
    values are pinned to zero, so mass leaks only through the box walls.
    """
    if not T > 0:
        raise ValueError("terminal time must be positive")
    axes = tuple(np.linspace(lo, hi, num) for (lo, hi), num in zip(box, shape))
    w1, w2, c = axes
    bound = _stability_bound(w1, w2, c)
    if dt is None:
        dt = cfl_fraction * bound
    if dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} exceeds the stability bound {bound:.3e}")
    steps = max(1, int(math.ceil(T / dt)))
    dt = T / steps

    is_density = isinstance(initial, str) and initial == "delta"
    if is_density:
        u = _mollified_delta(axes, mollifier_cells)
    elif callable(initial):
        g1, g2, g3 = np.meshgrid(w1, w2, c, indexing="ij")
        pts = np.stack([g1.ravel(), g2.ravel(), g3.ravel()], axis=1)
        u = np.asarray(initial(pts), dtype=float).reshape(shape)
    else:
        u = np.array(initial, dtype=float)
        if u.shape != shape:
            raise ValueError(f"initial grid has shape {u.shape}, expected {shape}")
    u[0, :, :] = u[-1, :, :] = 0.0
    u[:, 0, :] = u[:, -1, :] = 0.0
    u[:, :, 0] = u[:, :, -1] = 0.0

    if is_density:
        u /= _trapezoid3(axes, u)

    dw1, dw2, dc = w1[1] - w1[0], w2[1] - w2[0], c[1] - c[0]
    args = (w1, w2, 1 / dw1**2, 1 / dw2**2, 1 / dc**2,
            1 / (4 * dw2 * dc), 1 / (4 * dw1 * dc), dt)
    stepper = _step_kernel if (_HAVE_NUMBA and use_numba) else _step_numpy
    unew = np.zeros_like(u)
    for _ in range(steps):
        stepper(u, unew, *args)
        u, unew = unew, u

    mass = _trapezoid3(axes, u)
    mass_ok = (0.99 <= mass <= 1.0 + 1e-9) if is_density else True
    return GridDensity(axes, u, T, mass, mass_ok,
                       {"dt": dt, "steps": steps, "stability_bound": bound,
                        "mollifier_cells": mollifier_cells if is_density else None})


# --------------------------------------------------------------------------
# inequality verifiers


def _combined(se_list):
    return math.sqrt(sum(se * se for se in se_list))


def verify_reverse_poincare(sampler: SemigroupSampler, f, x: GroupElement,
                            constants: CurvatureConstants, h: float,
                            rank: int | None = None,
                            record_id: str = "reverse-poincare",
                            preset: str = "") -> VerificationRecord:
    """Squared gradients of P_T f against the variance bound at x."""
    T = sampler.T
    grad, se_g, bias_g = sampler.gamma_estimate(f, x, h, rank=rank)
    gradz, se_gz, bias_gz = sampler.gamma_z_estimate(f, x, h)
    vals = sampler.values(f, x)
    vsq = vals * vals
    m1, m2 = vals.mean(), vsq.mean()
    var_est = m2 - m1 * m1
    lin = (vsq - m2) - 2.0 * m1 * (vals - m1)
    se_var = float(lin.std(ddof=1) / np.sqrt(len(lin)))
    coeff = constants.harnack_coeff / T
    lhs = grad + constants.rho2 * T * gradz
    rhs = coeff * var_est
    se_lhs = _combined([se_g, constants.rho2 * T * se_gz])
    se_rhs = coeff * se_var
    slack = bias_g + constants.rho2 * T * bias_gz
    margin = rhs - lhs
    return VerificationRecord(
        record_id=record_id, preset=preset, rank=rank or sampler.form.n, T=T,
        x=coords_str(x.coords()), lhs=lhs, rhs=rhs,
        stderr_lhs=se_lhs, stderr_rhs=se_rhs, margin=margin,
        passed=bool(margin >= -3.0 * _combined([se_lhs, se_rhs]) - slack),
        detail={"grad_sq": grad, "grad_z_sq": gradz, "variance": var_est,
                "richardson_slack": slack, "h": h, "samples": sampler.samples},
    )


def verify_reverse_logsobolev(sampler: SemigroupSampler, f: BumpFunction,
                              x: GroupElement, constants: CurvatureConstants,
                              h: float, rank: int | None = None,
                              record_id: str = "reverse-logsobolev",
                              preset: str = "") -> VerificationRecord:
    """Squared gradients of ln P_T f against the entropy bound at x."""
    if not getattr(f, "floor", 0.0) > 0.0:
        raise ValueError("reverse log-Sobolev needs a strictly positive test function")
    T = sampler.T
    grad, se_g, bias_g = sampler.gamma_estimate(f, x, h, rank=rank, use_log=True)
    gradz, se_gz, bias_gz = sampler.gamma_z_estimate(f, x, h, use_log=True)
    fv = sampler.values(f, x)
    av = fv * np.log(fv)
    b, a = fv.mean(), av.mean()
    if b <= 0:
        raise ValueError("nonpositive semigroup estimate for a positive function")
    rhs_core = a / b - math.log(b)
    lin = (av - a) / b - (a / (b * b) + 1.0 / b) * (fv - b)
    se_core = float(lin.std(ddof=1) / np.sqrt(len(lin)))
    coeff = constants.harnack_coeff / T
    lhs = grad + constants.rho2 * T * gradz
    rhs = coeff * rhs_core
    se_lhs = _combined([se_g, constants.rho2 * T * se_gz])
    se_rhs = coeff * se_core
    slack = bias_g + constants.rho2 * T * bias_gz
    margin = rhs - lhs
    return VerificationRecord(
        record_id=record_id, preset=preset, rank=rank or sampler.form.n, T=T,
        x=coords_str(x.coords()), lhs=lhs, rhs=rhs,
        stderr_lhs=se_lhs, stderr_rhs=se_rhs, margin=margin,
        passed=bool(margin >= -3.0 * _combined([se_lhs, se_rhs]) - slack),
        detail={"entropy_core": rhs_core, "richardson_slack": slack, "h": h},
    )


def verify_wang_harnack(sampler: SemigroupSampler, f, x: GroupElement,
                        y: GroupElement, p: float, dist_sq: float,
                        constants: CurvatureConstants,
                        record_id: str = "wang-harnack",
                        preset: str = "") -> VerificationRecord:
    """(P_T f)^p(x) against P_T f^p(y) times the distance-exponential factor."""
    if not p > 1:
        raise ValueError("the exponent must exceed one")
    T = sampler.T
    vx = sampler.values(f, x)
    vyp = sampler.values(f, y) ** p
    mx, sx = vx.mean(), vx.std(ddof=1) / math.sqrt(len(vx))
    my, sy = vyp.mean(), vyp.std(ddof=1) / math.sqrt(len(vyp))
    factor = math.exp(constants.harnack_coeff * dist_sq / (4.0 * (p - 1.0) * T))
    lhs = mx ** p
    se_lhs = p * mx ** (p - 1.0) * sx
    rhs = my * factor
    se_rhs = factor * sy
    margin = rhs - lhs
    return VerificationRecord(
        record_id=record_id, preset=preset, rank=sampler.form.n, T=T, p_or_q=p,
        x=coords_str(x.coords()), y=coords_str(y.coords()),
        lhs=lhs, rhs=rhs, stderr_lhs=se_lhs, stderr_rhs=se_rhs, margin=margin,
        passed=bool(margin >= -3.0 * _combined([se_lhs, se_rhs])),
        detail={"dist_sq": dist_sq, "factor": factor},
    )


def verify_integrated_harnack(density: GridDensity, form: OmegaForm,
                              y: GroupElement, q: float, dist_sq: float,
                              constants: CurvatureConstants,
                              grid_tol: float = 0.02,
                              record_id: str = "integrated-harnack",
                              preset: str = "") -> VerificationRecord:
    """L^q norm of the density ratio under right translation, from the grid.

    LHS is the 1/q power of the trapezoid integral of
    (p(z y^-1) / p(z))^q p(z); p(z y^-1) is trilinear-interpolated, zero
    outside the box.  The record is flagged when the density mass excluded by
    the shifted evaluation or the positivity floor exceeds one percent.
    """
    if not q > 1:
        raise ValueError("the exponent must exceed one")
    T = density.T
    w1, w2, c = density.grid_coords()
    # z * y^{-1} = (w_z - w_y, c_z - c_y - form(w_z, w_y)/2)
    wy1, wy2 = y.w[0], y.w[1]
    pairing = form.coeffs[0, 1, 0] * (w1 * wy2 - w2 * wy1)
    shifted = np.stack([
        (w1 - wy1).ravel(), (w2 - wy2).ravel(),
        (c - y.c[0] - 0.5 * pairing).ravel(),
    ], axis=1)
    interp = density.interpolator()
    p_shift = interp(shifted).reshape(density.values.shape)
    inside = ((shifted[:, 0] >= density.axes[0][0]) & (shifted[:, 0] <= density.axes[0][-1])
              & (shifted[:, 1] >= density.axes[1][0]) & (shifted[:, 1] <= density.axes[1][-1])
              & (shifted[:, 2] >= density.axes[2][0]) & (shifted[:, 2] <= density.axes[2][-1]))
    inside = inside.reshape(density.values.shape)
    floor = 1e-15 * float(density.values.max())
    valid = inside & (density.values > floor)
    integrand = np.zeros_like(density.values)
    pv = density.values[valid]
    integrand[valid] = (p_shift[valid] / pv) ** q * pv
    excluded_mass = density.quadrature(np.where(valid, 0.0, density.values))
    lhs = density.quadrature(integrand) ** (1.0 / q)
    rhs = math.exp(constants.harnack_coeff * q * dist_sq / (4.0 * T))
    margin = rhs * (1.0 + grid_tol) - lhs
    flagged = excluded_mass > 0.01
    return VerificationRecord(
        record_id=record_id, preset=preset, rank=form.n, T=T, p_or_q=q,
        y=coords_str(y.coords()), lhs=lhs, rhs=rhs, margin=margin,
        passed=bool(margin >= 0.0 and not flagged),
        detail={"dist_sq": dist_sq, "excluded_mass": excluded_mass,
                "grid_tol": grid_tol, "flagged": flagged},
    )


def verify_strong_feller(sampler: SemigroupSampler, f, x: GroupElement,
                         y: GroupElement, dist_sq: float,
                         constants: CurvatureConstants, sup_bound: float,
                         record_id: str = "strong-feller",
                         preset: str = "") -> VerificationRecord:
    """|P_T f(x) - P_T f(y)|^2 against the distance-modulus bound."""
    T = sampler.T
    vx = sampler.values(f, x)
    vy = sampler.values(f, y)
    diff = vx - vy
    m = diff.mean()
    se_m = diff.std(ddof=1) / math.sqrt(len(diff))
    lhs = m * m
    se_lhs = 2.0 * abs(m) * se_m
    rhs = sup_bound**2 * math.expm1(constants.harnack_coeff * dist_sq / (2.0 * T))
    margin = rhs - lhs
    return VerificationRecord(
        record_id=record_id, preset=preset, rank=sampler.form.n, T=T,
        x=coords_str(x.coords()), y=coords_str(y.coords()),
        lhs=lhs, rhs=rhs, stderr_lhs=se_lhs, margin=margin,
        passed=bool(margin >= -3.0 * se_lhs),
        detail={"dist_sq": dist_sq, "difference": m, "sup_bound": sup_bound},
    )


def strong_feller_modulus(sampler: SemigroupSampler, f, x: GroupElement,
                          direction: np.ndarray, offsets,
                          constants: CurvatureConstants, sup_bound: float,
                          preset: str = ""):
    """Bound records over shrinking horizontal offsets, plus the shrink flag.

    Offsets move y = x * (h * direction, 0); the CRN differences must both
    satisfy the modulus bound and decrease as the offset shrinks.
    """
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    records = []
    diffs = []
    for h in offsets:
        y = multiply(sampler.form, x,
                     GroupElement(h * direction, np.zeros(sampler.form.d)))
        rec = verify_strong_feller(sampler, f, x, y, h * h, constants, sup_bound,
                                   record_id=f"strong-feller-h{h:g}", preset=preset)
        records.append(rec)
        diffs.append(abs(rec.detail["difference"]))
    shrinking = all(b <= a + 1e-12 for a, b in zip(diffs, diffs[1:]))
    return records, shrinking, diffs


# --------------------------------------------------------------------------
# kernel density estimation (qualitative cross-checks only)


def density_kde(W, C, bandwidth, query_points) -> np.ndarray:
    """Product-Gaussian kernel density estimate in the full coordinates.

    Too noisy for tail ratios; never used in pass/fail records.
    """
    pts = np.concatenate([W, C], axis=1)
    queries = np.atleast_2d(np.asarray(query_points, dtype=float))
    bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), (pts.shape[1],))
    if np.any(bw <= 0):
        raise ValueError("bandwidth must be positive")
    norm = np.prod(bw) * (2 * math.pi) ** (pts.shape[1] / 2.0)
    out = np.empty(len(queries))
    for idx, qp in enumerate(queries):
        z = (pts - qp[None, :]) / bw[None, :]
        out[idx] = np.exp(-0.5 * np.sum(z * z, axis=1)).mean() / norm
    return out
