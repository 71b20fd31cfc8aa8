"""Three-species oscillator agents with Hill-type repression, their
closed-form pairwise dissipativity certificates, and a grid search over the
two free certificate parameters.

An agent is the chain::

    x1' = -a1 x1 - f(x3) + b1 u        f(x) = -1 / (x**hill + 1)
    x2' = -a2 x2 + b2 x1
    x3' = -a3 x3 + b3 x2

with output ``y = x1``.  Agents across a network share the chain parameters
and differ only in the input gain ``b1``; that heterogeneity is what the
certificates measure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .certificates import (
    EdgeCertificate,
    MarginReport,
    NetworkCertificate,
    SectorBound,
    sync_margins,
)
from .graphs import Graph, edge_stats

__all__ = [
    "InadmissibleParams",
    "GoodwinParams",
    "CertParams",
    "SearchResult",
    "hill_slope",
    "hill_slope_max",
    "admissible_theta3_interval",
    "resolve_weights",
    "certify_edge",
    "certify_network",
    "search_params",
]


class InadmissibleParams(ValueError):
    """Free certificate parameters outside their admissible region."""


@dataclass(frozen=True)
class GoodwinParams:
    """One oscillator: decay rates ``a1..a3``, chain gains ``b2, b3``, the
    node-specific input gain, and the Hill coefficient of the repression."""

    a1: float
    a2: float
    a3: float
    b2: float
    b3: float
    input_gain: float
    hill: int

    def __post_init__(self) -> None:
        for name in ("a1", "a2", "a3", "b2", "b3", "input_gain"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        _check_hill(self.hill)

    def same_chain(self, other: "GoodwinParams") -> bool:
        """True when everything except the input gain coincides."""
        return (self.a1, self.a2, self.a3, self.b2, self.b3, self.hill) == (
            other.a1, other.a2, other.a3, other.b2, other.b3, other.hill)


def _check_hill(hill) -> None:
    if isinstance(hill, bool) or not isinstance(hill, (int, np.integer)) or hill < 2:
        raise ValueError(f"hill coefficient must be an integer >= 2, got {hill!r}")


def hill_slope(hill: int) -> float:
    """Slope constant of the repression ``-1/(x**h + 1)`` used by the
    pairwise certificates.

    This is the slope evaluated at ``x = ((h-1)/(h+1))**(1/(h-1))``, slightly
    off the true maximiser; see :func:`hill_slope_max` for the numerical
    maximum.  The two agree to about 1e-4 for large ``h`` but differ by
    roughly 0.11 at ``h = 2``, so certificates report both.
    """
    _check_hill(hill)
    h = float(hill)
    core = ((h - 1.0) / (h + 1.0)) ** (h / (h - 1.0))
    return h * (h - 1.0) / ((core + 1.0) ** 2 * (h + 1.0))


def _golden_max(f, lo: float, hi: float, tol: float = 1e-12,
                max_iter: int = 300) -> float:
    """Maximum of a unimodal function on [lo, hi] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return max(fc, fd)


@lru_cache(maxsize=None)
def hill_slope_max(hill: int) -> float:
    """Exact maximum slope of ``-1/(x**h + 1)`` over ``x > 0``, located by
    golden-section search (the maximiser always lies below 1)."""
    _check_hill(hill)
    h = float(hill)

    def slope(x: float) -> float:
        return h * x ** (h - 1.0) / (x ** h + 1.0) ** 2

    return _golden_max(slope, 1e-9, 2.0)


@lru_cache(maxsize=None)
def _certificate_slope(hill: int) -> float:
    """Closed-form slope constant, warning once when it strays more than 1%
    from the numerical maximum."""
    closed = hill_slope(hill)
    exact = hill_slope_max(hill)
    if abs(closed - exact) > 0.01 * exact:
        warnings.warn(
            f"closed-form slope constant {closed:.6g} for hill={hill} is more "
            f"than 1% away from the numerical maximum {exact:.6g}; "
            "certificates use the closed form",
            UserWarning,
            stacklevel=2,
        )
    return closed


@dataclass(frozen=True)
class CertParams:
    """The two free parameters of the pairwise certificate construction."""

    theta: float
    theta3: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.theta) and self.theta > 0.0):
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not (math.isfinite(self.theta3) and self.theta3 > 0.0):
            raise ValueError(f"theta3 must be positive, got {self.theta3}")


def admissible_theta3_interval(params: GoodwinParams) -> tuple[float, float]:
    """Open interval of ``theta3`` for which both derived weights are
    positive: ``(b3**2 / (2 a3), 2 a2)``."""
    return params.b3 ** 2 / (2.0 * params.a3), 2.0 * params.a2


def resolve_weights(cp: CertParams, params: GoodwinParams) -> tuple[float, float]:
    """Derived certificate weights ``(theta1, theta2)``.

    Raises :class:`InadmissibleParams` naming the violated bound when
    ``theta3`` leaves the admissible interval.
    """
    lo, hi = admissible_theta3_interval(params)
    if cp.theta3 <= lo:
        raise InadmissibleParams(
            f"theta3 = {cp.theta3:.6g} must exceed b3^2/(2*a3) = {lo:.6g}"
        )
    if cp.theta3 >= hi:
        raise InadmissibleParams(
            f"theta3 = {cp.theta3:.6g} must stay below 2*a2 = {hi:.6g}"
        )
    delta = _certificate_slope(params.hill)
    theta1 = delta * delta * cp.theta3 / (2.0 * params.a3 * cp.theta3 - params.b3 ** 2)
    theta2 = params.b2 ** 2 / (2.0 * params.a2 - cp.theta3)
    return theta1, theta2


def _pair_nu(theta: float, gain_i: float, gain_j: float) -> float:
    deviation = max(abs(gain_i - 1.0), abs(gain_j - 1.0))
    return -deviation * deviation / (2.0 * theta)


def _pair_gamma(cp: CertParams, params: GoodwinParams) -> float:
    theta1, theta2 = resolve_weights(cp, params)
    return params.a1 - cp.theta - 0.5 * theta1 - 0.5 * theta2


def certify_edge(params_i: GoodwinParams, params_j: GoodwinParams, cp: CertParams,
                 x0_i, x0_j) -> EdgeCertificate:
    """Closed-form pairwise certificate for two oscillators sharing chain
    parameters (only the input gains may differ).

    ``nu = -btilde**2 / (2 theta)`` with ``btilde`` the larger deviation of
    the two input gains from 1; ``gamma = a1 - theta - theta1/2 - theta2/2``
    with the derived weights from :func:`resolve_weights`; ``beta`` is minus
    half the squared distance between the two initial states.
    """
    if not params_i.same_chain(params_j):
        raise ValueError(
            "oscillators must share a1, a2, a3, b2, b3 and hill; "
            "only input gains may differ"
        )
    xi = np.asarray(x0_i, dtype=float)
    xj = np.asarray(x0_j, dtype=float)
    if xi.shape != (3,) or xj.shape != (3,):
        raise ValueError(
            f"initial states must have shape (3,), got {xi.shape} and {xj.shape}"
        )
    nu = _pair_nu(cp.theta, params_i.input_gain, params_j.input_gain)
    gamma = _pair_gamma(cp, params_i)
    beta = -0.5 * float(np.sum((xi - xj) ** 2))
    return EdgeCertificate(nu=nu, gamma=gamma, beta=beta)


def certify_network(agents, g: Graph, cp: CertParams, sectors,
                    initial_states=None, mode: str = "uniform") -> NetworkCertificate:
    """Stack pairwise certificates over the graph.

    ``mode="uniform"`` uses the worst input-gain deviation over all edges,
    so every edge carries the same ``nu``; ``mode="per_edge"`` uses each
    edge's own deviation, which can only enlarge the margins.  ``beta`` is
    always edge specific.  ``initial_states`` is ``(n, 3)`` and defaults to
    zeros.
    """
    agents = tuple(agents)
    if len(agents) != g.n:
        raise ValueError(f"{len(agents)} agents for {g.n} nodes")
    for other in agents[1:]:
        if not agents[0].same_chain(other):
            raise ValueError(
                "all oscillators must share a1, a2, a3, b2, b3 and hill; "
                "only input gains may differ"
            )
    if mode not in ("uniform", "per_edge"):
        raise ValueError(f"mode must be 'uniform' or 'per_edge', got {mode!r}")
    if initial_states is None:
        x0 = np.zeros((g.n, 3))
    else:
        x0 = np.asarray(initial_states, dtype=float)
        if x0.shape != (g.n, 3):
            raise ValueError(
                f"initial states have shape {x0.shape}, expected ({g.n}, 3)"
            )
    gamma = _pair_gamma(cp, agents[0])
    deviations = [
        max(abs(agents[i - 1].input_gain - 1.0), abs(agents[j - 1].input_gain - 1.0))
        for i, j in g.edges
    ]
    if mode == "uniform" and deviations:
        worst = max(deviations)
        deviations = [worst] * len(deviations)
    certs = []
    for k, (i, j) in enumerate(g.edges):
        nu = -deviations[k] ** 2 / (2.0 * cp.theta)
        beta = -0.5 * float(np.sum((x0[i - 1] - x0[j - 1]) ** 2))
        certs.append(EdgeCertificate(nu=nu, gamma=gamma, beta=beta))
    return NetworkCertificate(graph=g, sectors=tuple(sectors),
                              certificates=tuple(certs))


@dataclass(frozen=True, eq=False)
class SearchResult:
    """Best grid point of the free-parameter search plus the full grid.

    ``rows`` holds ``(theta, theta3, min_slack, feasible)`` in grid order
    (theta outer, theta3 inner); infeasible points carry nan slack.
    """

    best_theta: float
    best_theta3: float
    best_min_slack: float
    rows: tuple[tuple[float, float, float, bool], ...]


def _parse_range(rng, name: str) -> np.ndarray:
    lo, hi, count = rng
    count = int(count)
    if count < 1:
        raise ValueError(f"{name} range needs at least one point, got count={count}")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
        raise ValueError(f"{name} range must satisfy lo <= hi, got ({lo}, {hi})")
    if lo <= 0.0:
        raise ValueError(f"{name} values must be positive, got lower end {lo}")
    if count == 1:
        return np.array([lo])
    return np.linspace(lo, hi, count)


def search_params(agents, g: Graph, sectors, theta_range, theta3_range,
                  mode: str = "uniform") -> SearchResult:
    """Grid-maximise the worst edge margin over ``(theta, theta3)``.

    Ranges are ``(lo, hi, count)`` with ``count >= 1``; ties prefer smaller
    ``theta`` and then smaller ``theta3``.  Margins do not involve the bias
    term, so no initial states are needed.  Raises
    :class:`InadmissibleParams` when no grid point is admissible.
    """
    agents = tuple(agents)
    stats = edge_stats(g)
    sectors = tuple(sectors)
    thetas = _parse_range(theta_range, "theta")
    theta3s = _parse_range(theta3_range, "theta3")
    best: tuple[float, float, float] | None = None
    rows: list[tuple[float, float, float, bool]] = []
    for theta in thetas:
        for theta3 in theta3s:
            cp = CertParams(theta=float(theta), theta3=float(theta3))
            try:
                cert = certify_network(agents, g, cp, sectors, mode=mode)
            except InadmissibleParams:
                rows.append((float(theta), float(theta3), math.nan, False))
                continue
            report = sync_margins(stats, sectors, cert.certificates)
            min_slack = report.min_slack
            rows.append((float(theta), float(theta3), min_slack, True))
            if best is None or min_slack > best[2]:
                best = (float(theta), float(theta3), min_slack)
    if best is None:
        lo, hi = admissible_theta3_interval(agents[0])
        raise InadmissibleParams(
            f"no admissible theta3 in the grid; need "
            f"b3^2/(2*a3) = {lo:.6g} < theta3 < 2*a2 = {hi:.6g}"
        )
    return SearchResult(best_theta=best[0], best_theta3=best[1],
                        best_min_slack=best[2], rows=tuple(rows))
