"""Closed-loop network simulation: oscillator agents under diffusive
nonlinear couplings with per-edge disturbances, fixed-step RK4 integration,
and finite-horizon norms and inner products for the certificate checks.

Per edge ``k = (i, j)`` the coupling argument is ``x_k = y_i - y_j + w_k``
(the sign convention rides on the canonical incidence orientation), the
coupling output is ``v_k = theta_k(x_k)``, and the stacked node inputs are
``u = -D v``, which sums to zero across the network.  The disturbance is
held constant over each integration step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .certificates import (
    DissipationMatrices,
    EdgeCertificate,
    GainBound,
    SectorBound,
    UncertifiedBoundError,
)
from .goodwin import GoodwinParams
from .graphs import Graph, incidence
from .noise import normals

__all__ = [
    "SimulationDiverged",
    "UncertifiedBoundError",
    "CouplingSpec",
    "SectorCheck",
    "DisturbanceSpec",
    "NetworkModel",
    "CouplingSignals",
    "SimulationTrace",
    "BoundCheck",
    "linear_coupling",
    "affine_sinusoid_coupling",
    "piecewise_linear_coupling",
    "verify_sector",
    "coupling_input",
    "rk4_step",
    "step",
    "run",
    "bound_check",
]

_COUPLING_KINDS = ("linear", "affine_sinusoid", "piecewise_linear")
_DISTURBANCE_KINDS = ("gaussian", "zero", "constant")

# Coupling arguments below this magnitude are treated as zero when slope
# ratios are formed; the sector midpoint is substituted there.
SLOPE_EPS = 1e-12


class SimulationDiverged(RuntimeError):
    """The integrator produced a non-finite state."""

    def __init__(self, time: float, message: str | None = None) -> None:
        self.time = time
        super().__init__(message or f"non-finite state at t = {time:.6g}")


@dataclass(frozen=True)
class CouplingSpec:
    """One odd, sector-bounded scalar coupling nonlinearity.

    Oddness is structural: every kind is built from odd primitives (identity,
    sine, odd extension of a half-line polyline), so only ``x >= 0`` shapes
    are ever specified.  The declared sector is a claim checked separately by
    :func:`verify_sector`.
    """

    kind: str
    sector: SectorBound
    gain: float = 0.0
    amplitude: float = 0.0
    knots: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _COUPLING_KINDS:
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        if self.kind in ("linear", "affine_sinusoid"):
            if not (math.isfinite(self.gain) and self.gain > 0.0):
                raise ValueError(f"coupling gain must be positive, got {self.gain}")
        if self.kind == "affine_sinusoid" and not math.isfinite(self.amplitude):
            raise ValueError(f"sinusoid amplitude must be finite, got {self.amplitude}")
        if self.kind == "piecewise_linear":
            if not self.knots:
                raise ValueError("piecewise_linear coupling needs at least one knot")
            prev_x = 0.0
            for x, y in self.knots:
                if not (math.isfinite(x) and math.isfinite(y) and x > prev_x):
                    raise ValueError(
                        "knot abscissae must be finite, positive and strictly "
                        f"increasing, got {self.knots!r}"
                    )
                prev_x = x

    def __call__(self, x):
        """Evaluate elementwise on scalars or arrays."""
        if self.kind == "linear":
            return self.gain * x
        if self.kind == "affine_sinusoid":
            return self.gain * x + self.amplitude * np.sin(x)
        xs = np.concatenate(([0.0], [k[0] for k in self.knots]))
        ys = np.concatenate(([0.0], [k[1] for k in self.knots]))
        arg = np.asarray(x, dtype=float)
        mag = np.abs(arg)
        val = np.interp(mag, xs, ys)
        # continue with the final segment slope instead of clamping, so the
        # ratio to x stays inside a positive sector at large arguments
        last_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        beyond = mag > xs[-1]
        val = np.where(beyond, ys[-1] + last_slope * (mag - xs[-1]), val)
        out = np.sign(arg) * val
        return out if out.shape else float(out)


def linear_coupling(gain: float) -> CouplingSpec:
    """Pure gain; its sector is the single point ``gain``."""
    return CouplingSpec(kind="linear", sector=SectorBound(gain, gain), gain=gain)


def affine_sinusoid_coupling(gain: float, amplitude: float,
                             sector: SectorBound) -> CouplingSpec:
    return CouplingSpec(kind="affine_sinusoid", sector=sector, gain=gain,
                        amplitude=amplitude)


def piecewise_linear_coupling(knots, sector: SectorBound) -> CouplingSpec:
    return CouplingSpec(kind="piecewise_linear", sector=sector,
                        knots=tuple((float(x), float(y)) for x, y in knots))


@dataclass(frozen=True, eq=False)
class SectorCheck:
    """Worst slope ratios of a sampled sector verification."""

    passed: bool
    ratio_min: float
    ratio_max: float
    arg_at_min: float
    arg_at_max: float


def verify_sector(spec: CouplingSpec, samples: int = 2000,
                  tol: float = 1e-9) -> SectorCheck:
    """Check the declared sector on a log-spaced grid of arguments.

    Magnitudes cover ``[1e-6, 1e6]`` on both signs; the spec passes when
    every ratio ``spec(x)/x`` stays within ``[alpha_lo - tol, alpha_hi +
    tol]``.  A sampled check, so it can only ever refute the declaration.
    """
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    mags = np.logspace(-6.0, 6.0, samples // 2)
    args = np.concatenate((mags, -mags))
    ratios = np.asarray(spec(args)) / args
    k_min = int(np.argmin(ratios))
    k_max = int(np.argmax(ratios))
    passed = bool(
        ratios[k_min] >= spec.sector.alpha_lo - tol
        and ratios[k_max] <= spec.sector.alpha_hi + tol
    )
    return SectorCheck(passed=passed, ratio_min=float(ratios[k_min]),
                       ratio_max=float(ratios[k_max]),
                       arg_at_min=float(args[k_min]),
                       arg_at_max=float(args[k_max]))


@dataclass(frozen=True)
class DisturbanceSpec:
    """Per-edge link disturbance: seeded white Gaussian (held per step),
    a constant, or zero.  ``scale`` is the standard deviation for the
    Gaussian kind and the value itself for the constant kind."""

    kind: str = "zero"
    scale: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if not (math.isfinite(self.scale) and self.scale >= 0.0):
            raise ValueError(f"scale must be nonnegative, got {self.scale}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")

    def held_values(self, count: int) -> np.ndarray:
        """The sequence of values held over successive integration steps."""
        if self.kind == "gaussian":
            return self.scale * normals(self.seed, count)
        if self.kind == "constant":
            return np.full(count, self.scale)
        return np.zeros(count)


def _apply_couplings(couplings, x):
    """Evaluate per-edge nonlinearities on the last axis of ``x``."""
    if not couplings:
        return np.zeros_like(x)
    first = couplings[0]
    if all(c == first for c in couplings[1:]):
        return first(x)
    out = np.empty_like(np.asarray(x, dtype=float))
    for k, coupling in enumerate(couplings):
        out[..., k] = coupling(x[..., k])
    return out


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """A graph of oscillators plus couplings, disturbances and initial
    states; everything :func:`run` needs."""

    graph: Graph
    agents: tuple[GoodwinParams, ...]
    couplings: tuple[CouplingSpec, ...]
    disturbances: tuple[DisturbanceSpec, ...]
    initial_states: np.ndarray

    def __post_init__(self) -> None:
        n, p = self.graph.n, self.graph.edge_count
        if len(self.agents) != n:
            raise ValueError(f"{len(self.agents)} agents for {n} nodes")
        if len(self.couplings) != p:
            raise ValueError(f"{len(self.couplings)} couplings for {p} edges")
        if len(self.disturbances) != p:
            raise ValueError(f"{len(self.disturbances)} disturbances for {p} edges")
        for other in self.agents[1:]:
            if not self.agents[0].same_chain(other):
                raise ValueError(
                    "all oscillators must share chain parameters; "
                    "only input gains may differ"
                )
        x0 = np.array(self.initial_states, dtype=float)
        if x0.shape != (n, 3):
            raise ValueError(f"initial states have shape {x0.shape}, expected ({n}, 3)")
        object.__setattr__(self, "initial_states", x0)

    @cached_property
    def incidence_matrix(self) -> np.ndarray:
        return incidence(self.graph).astype(float)

    @cached_property
    def input_gains(self) -> np.ndarray:
        return np.array([a.input_gain for a in self.agents])

    @property
    def sectors(self) -> tuple[SectorBound, ...]:
        return tuple(c.sector for c in self.couplings)

    def derivative(self, state: np.ndarray, w_row: np.ndarray) -> np.ndarray:
        """Right-hand side of the coupled network at one time instant.

        Diverging states overflow here without a warning; the step-boundary
        finiteness check is what reports blow-up.
        """
        chain = self.agents[0]
        x1 = state[:, 0]
        x2 = state[:, 1]
        x3 = state[:, 2]
        with np.errstate(over="ignore", invalid="ignore"):
            repression = -1.0 / (x3 ** chain.hill + 1.0)
            v = _apply_couplings(self.couplings, x1 @ self.incidence_matrix + w_row)
            u = self.incidence_matrix @ v  # the physical input is -u
            out = np.empty_like(state)
            out[:, 0] = -chain.a1 * x1 - repression - self.input_gains * u
            out[:, 1] = chain.b2 * x1 - chain.a2 * x2
            out[:, 2] = chain.b3 * x2 - chain.a3 * x3
        return out


@dataclass(frozen=True, eq=False)
class CouplingSignals:
    """Stacked coupling argument, coupling output and node inputs."""

    arguments: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray


def coupling_input(outputs, disturbance, g: Graph, couplings) -> CouplingSignals:
    """Coupling signals for node outputs ``y`` and edge disturbances ``w``.

    Returns ``x = D.T y + w``, ``v = theta(x)`` and ``u = -D v``; the inputs
    always sum to zero over the network because each incidence column does.
    """
    y = np.asarray(outputs, dtype=float)
    w = np.asarray(disturbance, dtype=float)
    if y.shape != (g.n,):
        raise ValueError(f"outputs have shape {y.shape}, expected ({g.n},)")
    if w.shape != (g.edge_count,):
        raise ValueError(
            f"disturbance has shape {w.shape}, expected ({g.edge_count},)"
        )
    couplings = tuple(couplings)
    if len(couplings) != g.edge_count:
        raise ValueError(f"{len(couplings)} couplings for {g.edge_count} edges")
    d = incidence(g).astype(float)
    x = y @ d + w
    v = _apply_couplings(couplings, x)
    return CouplingSignals(arguments=x, outputs=v, inputs=-(d @ v))


def rk4_step(field, t: float, state, dt: float):
    """One classical fourth-order Runge-Kutta step of ``state' = field(t,
    state)``."""
    k1 = field(t, state)
    k2 = field(t + 0.5 * dt, state + (0.5 * dt) * k1)
    k3 = field(t + 0.5 * dt, state + (0.5 * dt) * k2)
    k4 = field(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def step(model: NetworkModel, state: np.ndarray, t: float, dt: float,
         w_row: np.ndarray) -> np.ndarray:
    """Advance the network one RK4 step with the disturbance row held
    constant; raises :class:`SimulationDiverged` on non-finite results."""
    nxt = rk4_step(lambda _t, s: model.derivative(s, w_row), t, state, dt)
    if not np.isfinite(nxt).all():
        raise SimulationDiverged(t + dt)
    return nxt


def _cumtrapz(values: np.ndarray, dt: float) -> np.ndarray:
    """Running trapezoidal integral of a sampled scalar signal."""
    csum = np.cumsum(values)
    return dt * (csum - 0.5 * (values[0] + values))


def _cumtrapz_norm_sq(signal: np.ndarray, dt: float) -> np.ndarray:
    return _cumtrapz(np.einsum("ti,ti->t", signal, signal), dt)


def _cumtrapz_bilinear(left: np.ndarray, form: np.ndarray, right: np.ndarray,
                       dt: float) -> np.ndarray:
    return _cumtrapz(np.einsum("ti,ij,tj->t", left, form, right), dt)


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Full-grid simulation record plus running certificate quantities.

    ``held_disturbance`` row ``m`` is the value applied on the step that
    starts at ``t_m``; trapezoidal integrals use the grid-point values of all
    signals.  Everything derived (relative outputs, coupling outputs, node
    inputs, running norms) is computed lazily and cached.
    """

    model: NetworkModel
    dt: float
    stride: int
    states: np.ndarray
    held_disturbance: np.ndarray

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    @cached_property
    def times(self) -> np.ndarray:
        return np.arange(self.states.shape[0]) * self.dt

    @cached_property
    def outputs(self) -> np.ndarray:
        return self.states[:, :, 0]

    @cached_property
    def relative_outputs(self) -> np.ndarray:
        return self.outputs @ self.model.incidence_matrix

    @cached_property
    def coupling_arguments(self) -> np.ndarray:
        return self.relative_outputs + self.held_disturbance

    @cached_property
    def coupling_outputs(self) -> np.ndarray:
        return _apply_couplings(self.model.couplings, self.coupling_arguments)

    @cached_property
    def inputs(self) -> np.ndarray:
        return -(self.coupling_outputs @ self.model.incidence_matrix.T)

    @cached_property
    def norm_rel_sq(self) -> np.ndarray:
        """Running squared norm of the relative outputs."""
        return _cumtrapz_norm_sq(self.relative_outputs, self.dt)

    @cached_property
    def norm_dist_sq(self) -> np.ndarray:
        """Running squared norm of the held disturbance."""
        return _cumtrapz_norm_sq(self.held_disturbance, self.dt)

    @cached_property
    def sample_indices(self) -> np.ndarray:
        idx = np.arange(0, self.steps + 1, self.stride)
        if idx[-1] != self.steps:
            idx = np.append(idx, self.steps)
        return idx

    def index_at(self, horizon: float) -> int:
        idx = int(round(horizon / self.dt))
        if idx < 0 or idx > self.steps or \
                abs(idx * self.dt - horizon) > 1e-9 * max(1.0, abs(horizon)):
            raise ValueError(f"horizon {horizon} is not on the simulation grid")
        return idx

    def norm_rel(self, horizon: float) -> float:
        return math.sqrt(float(self.norm_rel_sq[self.index_at(horizon)]))

    def norm_dist(self, horizon: float) -> float:
        return math.sqrt(float(self.norm_dist_sq[self.index_at(horizon)]))

    def disagreement(self, index: int = -1) -> float:
        """Largest pairwise output difference at one grid index."""
        row = self.outputs[index]
        return float(row.max() - row.min())

    def realized_slopes(self, indices=None) -> np.ndarray:
        """Coupling slope ratios ``v/x`` per edge at the given grid indices;
        where ``|x|`` falls below ``SLOPE_EPS`` the sector midpoint is
        substituted."""
        idx = self.sample_indices if indices is None else np.asarray(indices)
        x = self.coupling_arguments[idx]
        v = self.coupling_outputs[idx]
        mids = np.array([c.sector.midpoint for c in self.model.couplings])
        eta = np.broadcast_to(mids, x.shape).copy()
        usable = np.abs(x) > SLOPE_EPS
        np.divide(v, x, out=eta, where=usable)
        return eta

    def dissipation_curves(self, mats: DissipationMatrices) -> tuple[np.ndarray, np.ndarray]:
        """Residual and right-hand side of the network dissipation
        inequality at every grid time."""
        v = self.coupling_outputs
        rel = self.relative_outputs
        lhs = -_cumtrapz_bilinear(v, mats.pair_weight, rel, self.dt)
        rhs = (
            _cumtrapz_bilinear(rel, mats.output_quadratic, rel, self.dt)
            + _cumtrapz_bilinear(v, mats.coupling_quadratic, v, self.dt)
            + mats.bias_total
        )
        return lhs - rhs, rhs

    def pair_residual_curves(self, edge_index: int,
                             certificate: EdgeCertificate) -> tuple[np.ndarray, np.ndarray]:
        """Residual and right-hand side of one pair's dissipativity
        inequality at every grid time, using the realized node inputs."""
        i, j = self.model.graph.edges[edge_index]
        du = self.inputs[:, i - 1] - self.inputs[:, j - 1]
        dy = self.outputs[:, i - 1] - self.outputs[:, j - 1]
        lhs = _cumtrapz(du * dy, self.dt)
        energy = (
            _cumtrapz(self.inputs[:, i - 1] ** 2, self.dt)
            + _cumtrapz(self.inputs[:, j - 1] ** 2, self.dt)
        )
        rhs = (certificate.nu * energy
               + certificate.gamma * _cumtrapz(dy * dy, self.dt)
               + certificate.beta)
        return lhs - rhs, rhs

    def margin_curve(self, bound: GainBound) -> np.ndarray:
        """``gain * ||W||_T + offset - ||relative outputs||_T`` at every grid
        time."""
        if not bound.certified:
            raise UncertifiedBoundError(
                "gain bound is not certified (n_min <= 0); no margin to evaluate"
            )
        return (bound.gain * np.sqrt(self.norm_dist_sq) + bound.offset
                - np.sqrt(self.norm_rel_sq))


def run(model: NetworkModel, horizon: float, dt: float = 1e-3,
        stride: int = 100) -> SimulationTrace:
    """Integrate the closed network over ``[0, horizon]``.

    ``horizon`` must be a positive integer multiple of ``dt``.  The per-edge
    disturbances are drawn up front (one extra value pads the final grid
    point) and held constant across each step.  Identical models, horizons
    and seeds reproduce the trace bit for bit.
    """
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    if isinstance(stride, bool) or not isinstance(stride, (int, np.integer)) or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * max(1.0, abs(horizon)):
        raise ValueError(
            f"horizon {horizon} must be a positive integer multiple of dt = {dt}"
        )
    n, p = model.graph.n, model.graph.edge_count
    if p:
        held = np.column_stack([spec.held_values(steps + 1)
                                for spec in model.disturbances])
    else:
        held = np.zeros((steps + 1, 0))
    states = np.empty((steps + 1, n, 3))
    states[0] = model.initial_states
    state = model.initial_states.copy()
    deriv = model.derivative
    sixth = dt / 6.0
    half = 0.5 * dt
    # non-finite intermediates must not warn; the isfinite check raises
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(steps):
            w_row = held[m]
            k1 = deriv(state, w_row)
            k2 = deriv(state + half * k1, w_row)
            k3 = deriv(state + half * k2, w_row)
            k4 = deriv(state + dt * k3, w_row)
            state = state + sixth * (k1 + 2.0 * (k2 + k3) + k4)
            if not np.isfinite(state).all():
                raise SimulationDiverged((m + 1) * dt)
            states[m + 1] = state
    return SimulationTrace(model=model, dt=dt, stride=int(stride), states=states,
                           held_disturbance=held)


@dataclass(frozen=True, eq=False)
class BoundCheck:
    """Gain-bound margins at the sampled horizons."""

    times: np.ndarray
    margins: np.ndarray
    thresholds: np.ndarray
    satisfied: bool

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins))


def bound_check(trace: SimulationTrace, bound: GainBound,
                tol: float = 0.0) -> BoundCheck:
    """Evaluate the certified bound along a trace at the sampled horizons.

    The margin at horizon ``T`` is ``gain * ||W||_T + offset - ||relative
    outputs||_T``; the check passes when every sampled margin stays above
    ``-tol * (1 + gain * ||W||_T)``.
    """
    if not bound.certified:
        raise UncertifiedBoundError(
            "gain bound is not certified (n_min <= 0); nothing to check"
        )
    idx = trace.sample_indices
    margins = trace.margin_curve(bound)[idx]
    thresholds = -tol * (1.0 + bound.gain * np.sqrt(trace.norm_dist_sq[idx]))
    return BoundCheck(times=trace.times[idx], margins=margins,
                      thresholds=thresholds,
                      satisfied=bool(np.all(margins >= thresholds)))
