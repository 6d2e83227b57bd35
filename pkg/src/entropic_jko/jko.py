"""Entropic JKO proximal steps and the flow runner.

One step solves  min_rho  D_eps(mu, rho)^2 / (2 tau) + F(rho)  through a
generalized Sinkhorn iteration: the mu-marginal projection is the usual
scaling update, while the second projection is replaced by a pointwise solve
of the strictly increasing scalar equation

    lambda log(rho / s) + V_eff + f'(rho) = 0,      lambda = eps / tau,

where s = K_eps a is the kernel-propagated scaling and V_eff = V + W * rho_lag.
The heat-kernel time inside a step is eps itself (the rescaled dynamics has
diffusivity eps/(2 tau) over a window of length tau); the KL weight is
lambda = eps/tau. The interaction term is handled by an outer lagged loop with
0.5-damping on oscillation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .energy import EnergySpec, InternalEnergy, entropy, eval_F
from .errors import ConfigurationError, ConvergenceError, DomainError
from .measures import GridMeasure
from .schrodinger import DualPotentials, LogHeatApplier
from .torus_grid import apply_heat, convolve

log = logging.getLogger(__name__)

Array = np.ndarray


@dataclass(frozen=True)
class JkoConfig:
    tau: float
    eps: float
    n_steps: int = 1
    inner_tol: float = 1e-10
    inner_max_iter: int = 50_000
    interaction_tol: float = 1e-9
    interaction_max_iter: int = 80
    newton_tol: float = 1e-12

    def __post_init__(self):
        if self.tau <= 0 or self.eps <= 0:
            raise ConfigurationError(f"tau and eps must be positive, got {self.tau}, {self.eps}")
        if min(self.inner_tol, self.interaction_tol, self.newton_tol) <= 0:
            raise ConfigurationError("solver tolerances must be positive")
        if self.n_steps < 0:
            raise ConfigurationError(f"n_steps must be >= 0, got {self.n_steps}")

    @property
    def lam(self) -> float:
        return self.eps / self.tau


@dataclass
class StepDiagnostics:
    d_eps_sq: float
    f_before: float
    f_after: float
    h_before: float
    h_after: float
    optimality_residual: float
    inner_iterations: int
    dissipation_slack: float
    mass_correction: float


@dataclass
class Trajectory:
    """Time-stamped states; realizes the piecewise-constant curve t -> rho_{ceil(t/tau)}."""

    times: Array
    states: list[GridMeasure]
    diagnostics: list[StepDiagnostics]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def state_at(self, t: float) -> GridMeasure:
        """Snapshot nearest to t."""
        idx = int(np.argmin(np.abs(self.times - t)))
        return self.states[idx]


def _root_solve_log(
    lam: float,
    log_s: Array,
    v_eff: Array,
    internal: InternalEnergy,
    tol: float,
    max_doublings: int = 200,
    y_init: Array | None = None,
) -> Array:
    """Vectorized safeguarded Newton for lambda (y - log s) + v_eff + f'(e^y) = 0, y = log rho.

    The map is strictly increasing in y (derivative >= lambda > 0), so a sign
    bracket grown geometrically from the Zero-internal closed form
    y0 = log s - v_eff/lambda is always valid.
    """
    y0 = np.clip(log_s - v_eff / lam, -600.0, 600.0)
    if internal.kind == "zero":
        return y0
    if y_init is not None:
        y0 = np.clip(y_init, -600.0, 600.0)

    def G(y):
        if internal.kind == "entropy":
            fp = y + 1.0  # f'(e^y) = y + 1, linear in y
        else:
            m = internal.m
            fp = m * np.exp(np.clip(y * (m - 1.0), -700.0, 690.0)) / (m - 1.0)
        return lam * (y - log_s) + v_eff + fp

    def G_prime(y):
        if internal.kind == "entropy":
            return lam + 1.0
        m = internal.m
        return lam + m * np.exp(np.clip(y * (m - 1.0), -700.0, 690.0))

    lo = y0.copy()
    hi = y0.copy()
    step = np.ones_like(y0)
    glo = G(lo)
    for k in range(max_doublings + 1):
        mask = glo > 0.0
        if not mask.any():
            break
        lo[mask] -= step[mask]
        step[mask] *= 2.0
        glo = G(lo)
    else:
        node = int(np.argmax(glo > 0.0))
        raise ConvergenceError(
            f"root bracket search exceeded {max_doublings} doublings at node {node} "
            f"(lo={lo[node]:.3e}); pathological effective potential"
        )
    step = np.ones_like(y0)
    ghi = G(hi)
    for k in range(max_doublings + 1):
        mask = ghi < 0.0
        if not mask.any():
            break
        hi[mask] += step[mask]
        step[mask] *= 2.0
        ghi = G(hi)
    else:
        node = int(np.argmax(ghi < 0.0))
        raise ConvergenceError(
            f"root bracket search exceeded {max_doublings} doublings at node {node} "
            f"(hi={hi[node]:.3e}); pathological effective potential"
        )

    y = np.clip(y0, lo, hi)
    for k in range(220):
        gy = G(y)
        done = np.abs(gy) <= tol
        if done.all():
            return y
        pos = gy > 0.0
        hi = np.where(pos, y, hi)
        lo = np.where(pos, lo, y)
        if k % 3 == 2:
            cand = 0.5 * (lo + hi)  # periodic forced bisection: Newton can creep on e^y
        else:
            cand = y - gy / G_prime(y)
        inside = (cand >= lo) & (cand <= hi)
        y = np.where(done, y, np.where(inside, cand, 0.5 * (lo + hi)))
        if float(((hi - lo) / (1.0 + np.abs(y))).max()) < 1e-15:
            return y
    gy = G(y)
    if np.abs(gy).max() > 100 * tol:
        node = int(np.argmax(np.abs(gy)))
        raise ConvergenceError(
            f"marginal root solve stalled at node {node}: |G|={abs(gy[node]):.3e}, "
            f"bracket [{lo[node]:.6e}, {hi[node]:.6e}]"
        )
    return y


def _rho_f_double_prime(internal: InternalEnergy, rho: Array) -> Array:
    """rho * f''(rho) without domain checks (rho > 0 guaranteed by the log solve)."""
    if internal.kind == "zero":
        return np.zeros_like(rho)
    if internal.kind == "entropy":
        return np.ones_like(rho)
    return internal.m * rho ** (internal.m - 1.0)


def _solve_mass_projected(
    lam: float,
    log_s: Array,
    v_eff: Array,
    internal: InternalEnergy,
    tol: float,
) -> Array:
    """Pointwise root solve with the additive constant pinned by unit mass.

    Solves lambda log(rho/s) + (v_eff - lambda c) + f'(rho) = 0 jointly with
    mean(rho) = 1. Constants in the effective potential are the mass Lagrange
    multiplier (the first-order condition only determines zeta up to one), and
    projecting it out each update removes the slowest convergence mode of the
    alternating scheme; the joint fixed point is unchanged.
    """
    c = 0.0
    log_rho = _root_solve_log(lam, log_s, v_eff, internal, tol)
    for _ in range(60):
        rho = np.exp(np.minimum(log_rho, 700.0))  # transient iterates may spike
        mass = float(rho.mean())
        if abs(mass - 1.0) <= 1e-13:
            break
        # d log rho / dc = lam / (lam + rho f''(rho)) for the shifted equation
        dlog = lam / (lam + _rho_f_double_prime(internal, rho))
        slope = float((rho * dlog).mean())
        dc = -(mass - 1.0) / max(slope, 1e-300)
        c += dc
        log_rho = _root_solve_log(
            lam, log_s + c, v_eff, internal, tol, y_init=log_rho + dlog * dc
        )
    return log_rho


def marginal_update_root(
    lam: float, s: float, v_eff: float, internal: InternalEnergy, tol: float = 1e-12
) -> float:
    """Unique root rho* of rho -> lambda log(rho/s) + v_eff + f'(rho) on (d-, d+)."""
    if lam <= 0 or s <= 0:
        raise ConfigurationError(f"lambda and s must be positive, got {lam}, {s}")
    y = _root_solve_log(
        lam, np.array([math.log(s)]), np.array([float(v_eff)]), internal, tol
    )
    return float(np.exp(y[0]))


def optimality_residual(rho_next: GridMeasure, phi: Array, spec: EnergySpec) -> float:
    """Relative non-constancy of zeta = phi + V + W*rho + f'(rho).

    Population std of zeta, normalized by the dynamic range of the energy
    landscape V + W*rho + f'(rho) (which equals -phi up to a constant at an
    exactly converged step), plus a machine floor. Near 0 when zeta is constant.
    """
    r = rho_next.rho
    if spec.internal.kind != "zero":
        spec.internal._check_interior(r)
    landscape = spec.V + (
        spec.internal.f_prime(r) if spec.internal.kind != "zero" else 0.0
    )
    if spec.has_interaction:
        landscape = landscape + convolve(spec.grid, spec.W, r)
    zeta = np.asarray(phi, dtype=float) + landscape
    scale = float(landscape.max() - landscape.min()) + np.finfo(float).eps
    return float(zeta.std() / scale)


def _generalized_sinkhorn(
    grid,
    log_mu: Array,
    mu_rho: Array,
    v_eff: Array,
    internal: InternalEnergy,
    cfg: JkoConfig,
    log_b: Array,
) -> tuple[Array, Array, Array, int, float]:
    """Inner loop: scaling update on the mu side, pointwise root solve on the other."""
    lam = cfg.lam
    kernel = LogHeatApplier(grid, cfg.eps)
    log_a = np.zeros_like(log_b)
    log_rho = log_mu.copy()
    residual = math.inf
    for it in range(1, cfg.inner_max_iter + 1):
        log_a = log_mu - kernel(log_b)
        log_s = kernel(log_a)
        log_rho = _solve_mass_projected(lam, log_s, v_eff, internal, cfg.newton_tol)
        log_b = log_rho - log_s
        marginal = np.exp(np.minimum(log_a + kernel(log_b), 700.0))
        residual = float(np.abs(marginal - mu_rho).mean())
        if residual <= cfg.inner_tol:
            return log_a, log_b, log_rho, it, residual
    raise ConvergenceError(
        f"generalized Sinkhorn did not reach inner_tol={cfg.inner_tol:.1e} in "
        f"{cfg.inner_max_iter} iterations",
        residual=residual,
    )


def prox_step(
    mu: GridMeasure,
    spec: EnergySpec,
    cfg: JkoConfig,
    log_b0: Array | None = None,
) -> tuple[GridMeasure, DualPotentials, StepDiagnostics]:
    """One proximal step: argmin over rho of D_eps(mu, rho)^2/(2 tau) + F(rho)."""
    if mu.grid != spec.grid:
        raise ConfigurationError("measure and energy live on different grids")
    grid = mu.grid
    mu = mu.floored()
    log_mu = np.log(mu.rho)
    lam = cfg.lam

    f_before = eval_F(spec, mu)
    h_before = entropy(mu)
    if not math.isfinite(f_before):
        raise DomainError("prox step started from a state with infinite energy")

    if log_b0 is None:
        # the converged potential satisfies lam*log b = -(V_eff + f'(rho)) + const
        # with rho close to mu after one step; seed with that shape
        landscape = spec.V + convolve(grid, spec.W, mu.rho) if spec.has_interaction else spec.V
        if spec.internal.kind != "zero":
            landscape = landscape + spec.internal.f_prime(np.maximum(mu.rho, 1e-12))
        log_b = -landscape / lam
        log_b -= log_b.mean()
    else:
        log_b = np.asarray(log_b0, dtype=float).copy()
    rho_lag = mu.rho.copy()
    total_inner = 0
    prev_outer = math.inf
    for outer in range(1, cfg.interaction_max_iter + 1):
        v_eff = spec.V + convolve(grid, spec.W, rho_lag) if spec.has_interaction else spec.V
        try:
            log_a, log_b, log_rho, inner_its, residual = _generalized_sinkhorn(
                grid, log_mu, mu.rho, v_eff, spec.internal, cfg, log_b
            )
        except ConvergenceError as err:
            err.diagnostics = {"outer_pass": outer, "inner_iterations": total_inner}
            raise
        total_inner += inner_its
        rho = np.exp(log_rho)
        if not spec.has_interaction:
            break
        outer_res = float(np.abs(rho_lag - rho).mean())
        if outer_res <= cfg.interaction_tol:
            break
        if outer_res > prev_outer:
            rho_lag = 0.5 * rho_lag + 0.5 * rho  # damp oscillation
        else:
            rho_lag = rho
        prev_outer = outer_res
    else:
        raise ConvergenceError(
            f"interaction lag loop did not reach {cfg.interaction_tol:.1e} in "
            f"{cfg.interaction_max_iter} passes",
            residual=prev_outer,
        )

    mass = float(rho.mean())
    mass_correction = abs(mass - 1.0)
    if mass_correction > 1e-8:
        log.warning("prox step mass correction %.3e exceeds 1e-8", mass_correction)
    rho_next = GridMeasure.from_values(grid, rho)

    gauge = float(log_b.mean())
    log_b = log_b - gauge
    log_a = log_a + gauge
    pot = DualPotentials(
        grid=grid, eps=cfg.eps, eps_eff=lam, log_a=log_a, log_b=log_b, converged=True
    )

    d_eps_sq = float(2.0 * cfg.eps * ((log_a * mu.rho).mean() + (log_b * rho_next.rho).mean()))
    f_after = eval_F(spec, rho_next)
    h_after = entropy(rho_next)
    heat_competitor = GridMeasure.from_values(grid, apply_heat(grid, cfg.eps, mu.rho))
    slack = (
        cfg.eps * h_before / cfg.tau
        + eval_F(spec, heat_competitor)
        - (d_eps_sq / (2.0 * cfg.tau) + f_after)
    )
    diag = StepDiagnostics(
        d_eps_sq=d_eps_sq,
        f_before=f_before,
        f_after=f_after,
        h_before=h_before,
        h_after=h_after,
        optimality_residual=optimality_residual(rho_next, lam * log_b, spec),
        inner_iterations=total_inner,
        dissipation_slack=slack,
        mass_correction=mass_correction,
    )
    return rho_next, pot, diag


def run_flow(rho0: GridMeasure, spec: EnergySpec, cfg: JkoConfig) -> Trajectory:
    """Iterate the proximal step; on failure the partial trajectory rides on the error."""
    f0 = eval_F(spec, rho0)
    h0 = entropy(rho0)
    if not (math.isfinite(f0) and math.isfinite(h0)):
        raise ConfigurationError("initial state must have finite energy and entropy")
    times = [0.0]
    states = [rho0]
    diags: list[StepDiagnostics] = []
    log_b = None
    state = rho0
    for k in range(1, cfg.n_steps + 1):
        try:
            state, pot, diag = prox_step(state, spec, cfg, log_b0=log_b)
        except ConvergenceError as err:
            err.partial_trajectory = Trajectory(
                times=np.asarray(times), states=states, diagnostics=diags
            )
            raise
        log_b = pot.log_b  # warm start the next step
        times.append(k * cfg.tau)
        states.append(state)
        diags.append(diag)
    return Trajectory(times=np.asarray(times), states=states, diagnostics=diags)
