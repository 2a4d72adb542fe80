"""
Norton-Hoff flow rule with 1/k regularization, the truncation family, the
thermal-stress function f and the yield radius beta.

Every law accepts either a SymTensor3 (returning SymTensor3 / float) or
component arrays of shape (..., 6) with matching theta arrays, which is how
the finite-element assembly calls them at all quadrature points at once.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonConvergence, ParameterError
from .expressions import compile_theta_function, evaluate_theta_function
from .tensors import (
    DEVIATORIC_PROJECTOR,
    METRIC,
    ElasticModuli,
    SymTensor3,
    deviator,
    frobenius_norm,
    hooke,
    hooke_inverse,
)
from .utils import get_thermo_setting

logger = logging.getLogger(__name__)

THERMAL_STRESS_KINDS = ("default", "zero", "expression")
YIELD_KINDS = ("constant", "smooth_clamp", "expression")


@dataclass(frozen=True)
class ThermalStressSpec:
    """
    Descriptor of the thermal-stress function f(theta).

    default:    B((1+theta)^alpha - 1) for theta >= 0, -B~((1+|theta|)^(1/2) - 1) below
    zero:       f = 0 (mechanics decoupled from temperature)
    expression: custom law in theta; must pass validate_material
    """

    kind: str = "default"
    a: float = 0.0
    B: float = 1.0
    B_tilde: float = 1.0
    alpha: float = 0.7
    expression: str = ""

    def __post_init__(self):
        if self.kind not in THERMAL_STRESS_KINDS:
            raise ParameterError(f"unknown thermal stress kind {self.kind!r}")
        if self.a < 0 or self.B < 0:
            raise ParameterError("thermal stress growth constants a and B must be nonnegative")
        if not self.B_tilde > 0:
            raise ParameterError("thermal stress constant B_tilde must be positive")
        if not 0.5 < self.alpha < 5.0 / 6.0:
            raise ParameterError(
                f"alpha must lie in the open interval (1/2, 5/6) required by the growth "
                f"condition on f, got {self.alpha}"
            )
        if self.kind == "expression":
            if not self.expression:
                raise ParameterError("thermal stress kind 'expression' needs an expression in theta")
            compile_theta_function(self.expression)


@dataclass(frozen=True)
class YieldSpec:
    """
    Descriptor of the yield radius beta(theta).

    constant:     beta = d
    smooth_clamp: d - theta clamped onto [0, d], corners rounded over a width
                  `smoothing` so that beta is C1 and |beta'| <= 1
    expression:   custom law in theta; must pass validate_material
    """

    kind: str = "smooth_clamp"
    d: float = 1.0
    d_tilde: float = 1.0
    smoothing: float = 0.1
    expression: str = ""

    def __post_init__(self):
        if self.kind not in YIELD_KINDS:
            raise ParameterError(f"unknown yield kind {self.kind!r}")
        if not self.d > 0:
            raise ParameterError(f"yield bound d must be positive, got {self.d}")
        if not self.d_tilde > 0:
            raise ParameterError(f"yield Lipschitz bound d_tilde must be positive, got {self.d_tilde}")
        if self.kind == "smooth_clamp" and not 0 < self.smoothing <= self.d / 2:
            raise ParameterError(f"smoothing must lie in (0, d/2], got {self.smoothing}")
        if self.kind == "expression":
            if not self.expression:
                raise ParameterError("yield kind 'expression' needs an expression in theta")
            compile_theta_function(self.expression)


@dataclass(frozen=True)
class MaterialModel:
    moduli: ElasticModuli = field(default_factory=ElasticModuli)
    r_exp: float = 2.0
    trunc_k: float = math.inf
    f_spec: ThermalStressSpec = field(default_factory=ThermalStressSpec)
    beta_spec: YieldSpec = field(default_factory=YieldSpec)

    def __post_init__(self):
        if not self.r_exp > 1:
            raise ParameterError(
                f"Norton-Hoff exponent r_exp must be > 1 (r = 1 is unsupported), got {self.r_exp}"
            )
        if not self.trunc_k > 0:
            raise ParameterError(f"truncation level k must be positive, got {self.trunc_k}")

    @property
    def truncated(self):
        return not math.isinf(self.trunc_k)


@dataclass(frozen=True)
class MaterialPointState:
    stress: SymTensor3
    temperature: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.stress.components)) or not math.isfinite(self.temperature):
            raise ParameterError("material point state must be finite")


def _unwrap(T):
    if isinstance(T, SymTensor3):
        return T.components, True
    return np.asarray(T, dtype=float), False


def _scalar(value, wrapped):
    value = np.asarray(value, dtype=float)
    return float(value) if wrapped and value.ndim == 0 else value


def truncate(level, x):
    """T_k: clamp x onto [-level, level]."""
    if not level > 0:
        raise ParameterError(f"truncation level must be positive, got {level}")
    result = np.clip(x, -level, level)
    return float(result) if np.ndim(result) == 0 else result


def truncation_primitive(level, x):
    """phi_k: convex even primitive of T_k, quadratic inside the band and linear outside."""
    if not level > 0:
        raise ParameterError(f"truncation level must be positive, got {level}")
    x = np.asarray(x, dtype=float)
    if math.isinf(level):
        result = 0.5 * x * x
    else:
        magnitude = np.abs(x)
        result = np.where(
            magnitude <= level,
            0.5 * x * x,
            0.5 * level * level + level * (magnitude - level),
        )
    return float(result) if result.ndim == 0 else result


def f_eval(model, theta):
    spec = model.f_spec
    theta_array = np.asarray(theta, dtype=float)
    if spec.kind == "zero":
        value = np.zeros_like(theta_array)
    elif spec.kind == "default":
        magnitude = np.abs(theta_array)
        value = np.where(
            theta_array >= 0.0,
            spec.B * ((1.0 + magnitude) ** spec.alpha - 1.0),
            -spec.B_tilde * (np.sqrt(1.0 + magnitude) - 1.0),
        )
    else:
        function, _ = compile_theta_function(spec.expression)
        value = evaluate_theta_function(function, theta_array)
    return float(value) if value.ndim == 0 else value


def f_derivative(model, theta):
    """df/dtheta; the default law uses the right derivative at theta = 0."""
    spec = model.f_spec
    theta_array = np.asarray(theta, dtype=float)
    if spec.kind == "zero":
        value = np.zeros_like(theta_array)
    elif spec.kind == "default":
        magnitude = np.abs(theta_array)
        value = np.where(
            theta_array >= 0.0,
            spec.B * spec.alpha * (1.0 + magnitude) ** (spec.alpha - 1.0),
            0.5 * spec.B_tilde / np.sqrt(1.0 + magnitude),
        )
    else:
        _, derivative = compile_theta_function(spec.expression)
        value = evaluate_theta_function(derivative, theta_array)
    return float(value) if value.ndim == 0 else value


def _smooth_clamp(y, upper, width):
    # clip(y, 0, upper) with quadratic C1 blends of half-width `width` at both corners
    value = np.clip(y, 0.0, upper)
    slope = ((y > 0.0) & (y < upper)).astype(float)
    low = np.abs(y) < width
    high = np.abs(y - upper) < width
    value = np.where(low, (y + width) ** 2 / (4.0 * width), value)
    slope = np.where(low, (y + width) / (2.0 * width), slope)
    value = np.where(high, upper - (upper + width - y) ** 2 / (4.0 * width), value)
    slope = np.where(high, (upper + width - y) / (2.0 * width), slope)
    return value, slope


def beta_eval(model, theta):
    """
    Yield radius and its derivative.

    Returns:
        (value, derivative) with value in [0, d] for the built-in kinds
    """
    spec = model.beta_spec
    theta_array = np.asarray(theta, dtype=float)
    if spec.kind == "constant":
        value = np.full_like(theta_array, spec.d)
        derivative = np.zeros_like(theta_array)
    elif spec.kind == "smooth_clamp":
        value, slope = _smooth_clamp(spec.d - theta_array, spec.d, spec.smoothing)
        derivative = -slope
    else:
        function, dfunction = compile_theta_function(spec.expression)
        value = evaluate_theta_function(function, theta_array)
        derivative = evaluate_theta_function(dfunction, theta_array)
    if value.ndim == 0:
        return float(value), float(derivative)
    return value, derivative


def yield_excess(model, T, theta):
    """{|dev T| - beta(theta)}_+"""
    components, wrapped = _unwrap(T)
    beta, _ = beta_eval(model, theta)
    excess = np.maximum(frobenius_norm(deviator(components)) - beta, 0.0)
    return _scalar(excess, wrapped)


def _flow_scale(model, rho, beta):
    # G = scale * dev T with scale = {rho - beta}_+^r / rho, zero at rho = 0
    excess = np.maximum(rho - beta, 0.0)
    numerator = excess ** model.r_exp
    return np.divide(numerator, rho, out=np.zeros_like(numerator), where=rho > 0.0)


def flow_rate(model, T, theta):
    """{|dev T| - beta}_+^r dev T / |dev T|; zero where dev T vanishes."""
    components, wrapped = _unwrap(T)
    beta, _ = beta_eval(model, theta)
    dev = deviator(components)
    rho = frobenius_norm(dev)
    rate = _flow_scale(model, rho, np.asarray(beta))[..., None] * dev
    return SymTensor3(rate) if wrapped else rate


def regularization_rate(model, T):
    """(1/k) |dev T|^(2r-2) dev T; zero for k = inf."""
    components, wrapped = _unwrap(T)
    dev = deviator(components)
    if not model.truncated:
        rate = np.zeros_like(dev)
    else:
        rho = frobenius_norm(dev)
        rate = ((rho ** (2.0 * model.r_exp - 2.0)) / model.trunc_k)[..., None] * dev
    return SymTensor3(rate) if wrapped else rate


def dissipation_density(model, T, theta, include_regularization=False):
    """{|dev T| - beta}_+^r |dev T|, plus (1/k)|dev T|^(2r) when flagged."""
    components, wrapped = _unwrap(T)
    beta, _ = beta_eval(model, theta)
    rho = frobenius_norm(deviator(components))
    density = np.maximum(rho - beta, 0.0) ** model.r_exp * rho
    if include_regularization and model.truncated:
        density = density + rho ** (2.0 * model.r_exp) / model.trunc_k
    return _scalar(density, wrapped)


def flow_jacobian(model, stress, beta):
    """
    Derivative of G(S) = g(|dev S|) dev S / |dev S| in the storage basis,
    g(rho) = {rho - beta}_+^r + (1/k) rho^(2r-1).

    With n = dev S / rho the result is g'(rho) n n^T W + g(rho)/rho (P - n n^T W),
    zero where dev S vanishes. At the yield kink the plastic-side derivative is used.
    """
    stress = np.asarray(stress, dtype=float)
    dev = deviator(stress)
    rho = frobenius_norm(dev)
    beta = np.asarray(beta, dtype=float)
    r = model.r_exp
    excess = np.maximum(rho - beta, 0.0)
    g = excess ** r
    dg = r * excess ** (r - 1.0)
    if model.truncated:
        g = g + rho ** (2.0 * r - 1.0) / model.trunc_k
        dg = dg + (2.0 * r - 1.0) * rho ** (2.0 * r - 2.0) / model.trunc_k
    positive = rho > 0.0
    safe_rho = np.where(positive, rho, 1.0)
    n = dev / safe_rho[..., None]
    radial = np.einsum("...i,...j->...ij", n, n * METRIC)
    secant = np.where(positive, g / safe_rho, 0.0)
    jacobian = dg[..., None, None] * radial + secant[..., None, None] * (DEVIATORIC_PROJECTOR - radial)
    return np.where(positive[..., None, None], jacobian, 0.0)


def integrate_stress(model, stress_now, strain_increment, theta, dt, tol=None, max_iter=None):
    """
    Backward-Euler update of the flow rule at a batch of material points.

    Solves C^-1 (S - S_now) + dt (G(S, theta) + regularization(S)) = strain_increment
    for S by damped Newton started from the elastic predictor.

    Args:
        stress_now: (n, 6) stresses at the start of the step
        strain_increment: (n, 6) strain increment over the step (rate * dt)
        theta: (n,) temperatures inside beta
        dt: time step

    Returns:
        (stress, tangent) with tangent = dS/d(strain_increment), shape (n, 6, 6)
    """
    if not dt > 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    tol = get_thermo_setting("NEWTON_TOL") if tol is None else tol
    max_iter = get_thermo_setting("NEWTON_MAX_ITER") if max_iter is None else max_iter
    max_halvings = get_thermo_setting("MAX_HALVINGS")

    stress_now = np.atleast_2d(np.asarray(stress_now, dtype=float))
    strain_increment = np.atleast_2d(np.asarray(strain_increment, dtype=float))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), stress_now.shape[:1])
    beta, _ = beta_eval(model, theta)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), theta.shape)
    compliance = model.moduli.compliance_matrix()

    def residual(stress, increment, start, radius):
        dev = deviator(stress)
        flow = _flow_scale(model, frobenius_norm(dev), radius)[..., None] * dev
        return hooke_inverse(model.moduli, stress - start) + dt * (flow + regularization_rate(model, stress)) - increment

    stress = stress_now + hooke(model.moduli, strain_increment)
    current = residual(stress, strain_increment, stress_now, beta)
    current_norm = frobenius_norm(current)
    # |R|/dt <= tol (1 + |rate|), floored at round-off of the compliance term
    increment_norm = frobenius_norm(strain_increment)
    round_off = 1e3 * np.finfo(float).eps * (frobenius_norm(hooke_inverse(model.moduli, stress_now)) + increment_norm)
    target = np.maximum(tol * (dt + increment_norm), round_off)
    active = np.flatnonzero(current_norm > target)

    iteration = 0
    while active.size and iteration < max_iter:
        iteration += 1
        jacobian = compliance + dt * flow_jacobian(model, stress[active], beta[active])
        step = -np.linalg.solve(jacobian, current[active][..., None])[..., 0]
        base = stress[active]
        damping = np.ones(active.size)
        trial = base + step
        trial_residual = residual(trial, strain_increment[active], stress_now[active], beta[active])
        trial_norm = frobenius_norm(trial_residual)
        worse = ~(trial_norm < current_norm[active])
        halvings = 0
        while worse.any() and halvings < max_halvings:
            halvings += 1
            damping[worse] *= 0.5
            trial[worse] = base[worse] + damping[worse, None] * step[worse]
            trial_residual[worse] = residual(
                trial[worse], strain_increment[active][worse], stress_now[active][worse], beta[active][worse]
            )
            trial_norm[worse] = frobenius_norm(trial_residual[worse])
            worse = worse & ~(trial_norm < current_norm[active])
        stress[active] = trial
        current[active] = trial_residual
        current_norm[active] = trial_norm
        active = active[current_norm[active] > target[active]]

    if active.size:
        worst = float(np.max(current_norm[active] / np.maximum(target[active], 1e-300)))
        raise NonConvergence(
            f"material point Newton did not converge at {active.size} point(s) after {max_iter} "
            f"iterations (worst residual/target = {worst:.3e})"
        )
    tangent = np.linalg.inv(compliance + dt * flow_jacobian(model, stress, beta))
    return stress, tangent


def material_point_step(model, state, strain_rate, theta_next, dt, tol=None, max_iter=None):
    """
    One implicit step of the flow rule at a single material point.

    Returns T_next solving C^-1 (T_next - T_now)/dt + flow_rate(T_next, theta_next)
    + regularization_rate(T_next) = strain_rate.
    """
    stress, _ = integrate_stress(
        model,
        state.stress.components[None, :],
        dt * strain_rate.components[None, :],
        np.array([theta_next], dtype=float),
        dt,
        tol=tol,
        max_iter=max_iter,
    )
    return SymTensor3(stress[0])


def drive_material_point(model, times, strains, temperatures, dt, initial_stress=None):
    """
    Drive a material point along a piecewise-linear strain/temperature path.

    Args:
        times: increasing path times, first entry is the start time
        strains: (n, 6) total strain at each path time
        temperatures: (n,) temperature at each path time
        dt: integration step

    Returns:
        list of MaterialPointState, one per integration step including the start
    """
    times = np.asarray(times, dtype=float)
    strains = np.asarray(strains, dtype=float)
    temperatures = np.asarray(temperatures, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ParameterError("material point path needs at least two strictly increasing times")
    n_steps = max(1, int(round((times[-1] - times[0]) / dt)))
    grid = times[0] + dt * np.arange(n_steps + 1)
    grid[-1] = min(grid[-1], times[-1])
    strain_path = np.column_stack([np.interp(grid, times, strains[:, i]) for i in range(6)])
    theta_path = np.interp(grid, times, temperatures)

    stress = SymTensor3.zero() if initial_stress is None else initial_stress
    history = [MaterialPointState(stress=stress, temperature=float(theta_path[0]), time=float(grid[0]))]
    for index in range(1, grid.size):
        step = grid[index] - grid[index - 1]
        rate = SymTensor3((strain_path[index] - strain_path[index - 1]) / step)
        stress = material_point_step(model, history[-1], rate, theta_path[index], step)
        history.append(MaterialPointState(stress=stress, temperature=float(theta_path[index]),
                                          time=float(grid[index])))
    logger.info(f"Material point driven through {grid.size - 1} steps to t = {grid[-1]:.6g}")
    return history


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_ratio: float
    detail: str = ""


@dataclass(frozen=True)
class MaterialReport:
    checks: tuple

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    @property
    def failures(self):
        return [check for check in self.checks if not check.passed]

    def lines(self):
        return [
            f"{check.name}: {'pass' if check.passed else 'FAIL'} (worst ratio {check.worst_ratio:.6g})"
            + (f" - {check.detail}" if check.detail else "")
            for check in self.checks
        ]


def validate_material(model, sample_count=None):
    """
    Check the growth conditions on f and the range and Lipschitz conditions on
    beta on log-spaced samples.

    Returns:
        MaterialReport with one CheckResult per condition
    """
    sample_count = get_thermo_setting("VALIDATION_SAMPLES") if sample_count is None else sample_count
    if sample_count < 100:
        raise ParameterError(f"sample_count must be at least 100, got {sample_count}")
    spec = model.f_spec
    beta_spec = model.beta_spec
    tolerance = 1e-9
    positive = np.logspace(-6.0, 8.0, sample_count)

    def bounded(name, values, bounds, detail):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(bounds > 0, np.abs(values) / bounds, np.where(np.abs(values) > 0, np.inf, 0.0))
        worst = float(np.max(ratios))
        return CheckResult(name, bool(worst <= 1.0 + tolerance), worst, detail)

    checks = [
        bounded(
            "f_growth_positive",
            f_eval(model, positive),
            spec.a + spec.B * positive ** spec.alpha,
            "|f(theta)| <= a + B theta^alpha for theta >= 0",
        ),
        bounded(
            "f_growth_negative",
            f_eval(model, -positive),
            spec.B_tilde * np.sqrt(1.0 + positive),
            "|f(theta)| <= B~ (1 + |theta|)^(1/2) for theta < 0",
        ),
    ]

    window = 10.0 * max(beta_spec.d, 1.0)
    grid = np.unique(np.concatenate([
        -positive, [0.0], positive, np.linspace(-window, window, 20 * sample_count + 1),
    ]))
    beta, derivative = beta_eval(model, grid)
    beta = np.asarray(beta, dtype=float)
    derivative = np.asarray(derivative, dtype=float)
    lowest = float(np.min(beta))
    range_ratio = float(np.max(beta) / beta_spec.d)
    in_range = lowest >= -tolerance and range_ratio <= 1.0 + tolerance
    checks.append(CheckResult("beta_range", bool(in_range), range_ratio, f"beta in [0, d], min beta = {lowest:.6g}"))

    # skip near-duplicate points left by merging the two grids
    spaced = np.concatenate([[True], np.diff(grid) > 1e-9 * (1.0 + np.abs(grid[1:]))])
    secants = np.abs(np.diff(beta[spaced]) / np.diff(grid[spaced]))
    lipschitz_ratio = float(max(np.max(secants), np.max(np.abs(derivative))) / beta_spec.d_tilde)
    checks.append(CheckResult("beta_lipschitz", bool(lipschitz_ratio <= 1.0 + 1e-6), lipschitz_ratio,
                              "|beta'| <= d~ from secants and the derivative"))

    report = MaterialReport(checks=tuple(checks))
    for check in report.failures:
        logger.warning(f"Material check {check.name} failed: worst ratio {check.worst_ratio:.6g}")
    return report
