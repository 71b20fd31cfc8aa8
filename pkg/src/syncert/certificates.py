"""Per-edge dissipativity certificates, the distributed synchronisation
margin, and the certified disagreement gain bound.

Three ingredients meet here: a slope :class:`SectorBound` for each coupling
nonlinearity, an :class:`EdgeCertificate` ``(nu, gamma, beta)`` for each agent
pair joined by an edge, and the graph statistics.  From them the module
assembles the per-edge margin check, the network quadratic forms, and the
``gain * ||disturbance||_T + offset`` bound on the relative outputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .graphs import EdgeStats, Graph, build_graph, incidence, weight_matrices, edge_stats
from .linalg import jacobi_eigenvalues

__all__ = [
    "POSITIVITY_TOL",
    "SectorBound",
    "EdgeCertificate",
    "NetworkCertificate",
    "MarginReport",
    "DissipationMatrices",
    "CertificateForms",
    "GainBound",
    "UncertifiedBoundError",
    "sync_margins",
    "dissipation_matrices",
    "quadratic_forms",
    "gain_bound",
    "gain_bound_from_forms",
    "dissipation_residual",
    "certificate_to_dict",
    "certificate_from_dict",
]

# Margins are declared satisfied only beyond this slack; exact zeros fail.
POSITIVITY_TOL = 1e-12


class UncertifiedBoundError(ValueError):
    """A gain bound with nonpositive ``n_min`` cannot be evaluated."""


@dataclass(frozen=True)
class SectorBound:
    """Slope sector ``[alpha_lo, alpha_hi]`` of a scalar coupling
    nonlinearity, with ``0 < alpha_lo <= alpha_hi < inf``."""

    alpha_lo: float
    alpha_hi: float

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha_lo <= self.alpha_hi < math.inf):
            raise ValueError(
                "sector must satisfy 0 < alpha_lo <= alpha_hi < inf, "
                f"got ({self.alpha_lo}, {self.alpha_hi})"
            )

    @property
    def is_point(self) -> bool:
        return self.alpha_lo == self.alpha_hi

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.alpha_lo + self.alpha_hi)


@dataclass(frozen=True)
class EdgeCertificate:
    """Relative-dissipativity parameters of one agent pair.

    ``nu <= 0`` weights the pair's input energy, ``gamma`` the
    relative-output energy, and ``beta`` is the trajectory-independent bias
    (typically built from initial conditions).  ``gamma`` may be positive
    here; every consumer clamps it to ``min(gamma, 0)`` first, which only
    weakens the certified inequality, and keeps the raw value for reporting.
    """

    nu: float
    gamma: float
    beta: float

    def __post_init__(self) -> None:
        if not (self.nu <= 0.0):  # also rejects nan
            raise ValueError(f"nu must be <= 0, got {self.nu}")
        if not (math.isfinite(self.gamma) and math.isfinite(self.beta)):
            raise ValueError(
                f"gamma and beta must be finite, got ({self.gamma}, {self.beta})"
            )


@dataclass(frozen=True, eq=False)
class NetworkCertificate:
    """Edge certificates and sectors stacked over a graph, plus the derived
    per-node and network aggregates."""

    graph: Graph
    sectors: tuple[SectorBound, ...]
    certificates: tuple[EdgeCertificate, ...]

    def __post_init__(self) -> None:
        p = self.graph.edge_count
        if len(self.sectors) != p:
            raise ValueError(f"{len(self.sectors)} sectors for {p} edges")
        if len(self.certificates) != p:
            raise ValueError(f"{len(self.certificates)} certificates for {p} edges")

    @cached_property
    def nu(self) -> np.ndarray:
        return np.array([c.nu for c in self.certificates])

    @cached_property
    def gamma_raw(self) -> np.ndarray:
        return np.array([c.gamma for c in self.certificates])

    @cached_property
    def gamma(self) -> np.ndarray:
        """Clamped to zero from above; the inequality survives the clamp."""
        return np.minimum(self.gamma_raw, 0.0)

    @cached_property
    def beta(self) -> np.ndarray:
        return np.array([c.beta for c in self.certificates])

    @cached_property
    def bias_total(self) -> float:
        return float(np.sum(self.beta))

    @cached_property
    def nu_node(self) -> np.ndarray:
        """Per-node sum of ``nu`` over incident edges."""
        acc = np.zeros(self.graph.n)
        for k, (i, j) in enumerate(self.graph.edges):
            acc[i - 1] += self.nu[k]
            acc[j - 1] += self.nu[k]
        return acc

    @cached_property
    def alpha_lo(self) -> np.ndarray:
        return np.array([s.alpha_lo for s in self.sectors])

    @cached_property
    def alpha_hi(self) -> np.ndarray:
        return np.array([s.alpha_hi for s in self.sectors])


@dataclass(frozen=True, eq=False)
class MarginReport:
    """Per-edge synchronisation slacks and the aggregate verdict."""

    graph: Graph
    slacks: np.ndarray
    edge_ok: np.ndarray
    satisfied: bool

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slacks))

    def rows(self) -> list[tuple[str, float, bool]]:
        return [
            (self.graph.edge_label(k), float(self.slacks[k]), bool(self.edge_ok[k]))
            for k in range(self.graph.edge_count)
        ]


def sync_margins(stats: EdgeStats, sectors, certificates) -> MarginReport:
    """Distributed per-edge synchronisation margin.

    For edge ``(i, j)`` with degree ``r``, common count ``c`` and exclusive
    count ``e`` the slack is::

        (2 + c)/alpha_hi
        - (1 + alpha_lo**2) * e / (2 * alpha_lo**2)
        + min(gamma, 0) / alpha_lo**2
        - r_i * |nu_node_i| - r_j * |nu_node_j|

    where ``nu_node_i`` sums ``nu`` over the edges incident to node ``i``.
    Every quantity is local to the edge and its endpoints, so each agent pair
    can evaluate its own slack.  All slacks strictly positive (beyond
    ``POSITIVITY_TOL``) yield a satisfied report.
    """
    g = stats.graph
    p = g.edge_count
    sectors = tuple(sectors)
    certificates = tuple(certificates)
    if len(sectors) != p:
        raise ValueError(f"{len(sectors)} sectors for {p} edges")
    if len(certificates) != p:
        raise ValueError(f"{len(certificates)} certificates for {p} edges")

    nu = np.array([c.nu for c in certificates])
    gamma = np.minimum(np.array([c.gamma for c in certificates]), 0.0)
    nu_node = np.zeros(g.n)
    for k, (i, j) in enumerate(g.edges):
        nu_node[i - 1] += nu[k]
        nu_node[j - 1] += nu[k]

    slacks = np.empty(p)
    for k, (i, j) in enumerate(g.edges):
        lo = sectors[k].alpha_lo
        hi = sectors[k].alpha_hi
        r_i, r_j = stats.endpoint_degrees(k)
        slacks[k] = (
            (2.0 + stats.common[k]) / hi
            - (1.0 + lo * lo) * stats.exclusive[k] / (2.0 * lo * lo)
            + gamma[k] / (lo * lo)
            - r_i * abs(nu_node[i - 1])
            - r_j * abs(nu_node[j - 1])
        )
    edge_ok = slacks > POSITIVITY_TOL
    return MarginReport(graph=g, slacks=slacks, edge_ok=edge_ok,
                        satisfied=bool(np.all(edge_ok)))


@dataclass(frozen=True, eq=False)
class DissipationMatrices:
    """Constant matrices of the network dissipation inequality.

    ``gamma`` and the weight matrices are diagonal in edge space;
    ``nu_node`` is diagonal in node space and ``edge_nu_form`` is its
    incidence conjugation ``D.T @ nu_node @ D``.
    """

    gamma: np.ndarray
    nu_node: np.ndarray
    edge_nu_form: np.ndarray
    common_weight: np.ndarray
    exclusive_weight: np.ndarray
    bias_total: float

    @property
    def pair_weight(self) -> np.ndarray:
        """Weight ``2 I + common_weight`` applied between coupling outputs
        and relative outputs."""
        return 2.0 * np.eye(self.common_weight.shape[0]) + self.common_weight

    @property
    def output_quadratic(self) -> np.ndarray:
        """Form ``gamma - exclusive_weight`` acting on the relative outputs."""
        return self.gamma - self.exclusive_weight

    @property
    def coupling_quadratic(self) -> np.ndarray:
        """Form ``edge_nu_form - exclusive_weight`` acting on the coupling
        outputs."""
        return self.edge_nu_form - self.exclusive_weight


def dissipation_matrices(g: Graph, cert: NetworkCertificate) -> DissipationMatrices:
    """Assemble the matrices entering the network dissipation inequality."""
    if cert.graph != g:
        raise ValueError("certificate was assembled over a different graph")
    stats = edge_stats(g)
    weights = weight_matrices(stats)
    d = incidence(g).astype(float)
    nu_node = np.diag(cert.nu_node)
    return DissipationMatrices(
        gamma=np.diag(cert.gamma),
        nu_node=nu_node,
        edge_nu_form=d.T @ nu_node @ d,
        common_weight=weights.common,
        exclusive_weight=weights.exclusive_half,
        bias_total=cert.bias_total,
    )


@dataclass(frozen=True, eq=False)
class CertificateForms:
    """Symmetric edge-space forms whose positivity underlies the gain bound.

    ``coupling_form`` acts on the stacked coupling outputs;
    ``margin_form`` adds the worst-case sector weighting of the output term
    and must be positive definite for the network margin to hold.
    """

    coupling_form: np.ndarray
    margin_form: np.ndarray
    margin_min_eig: float


def quadratic_forms(g: Graph, cert: NetworkCertificate) -> CertificateForms:
    """Assemble the certificate quadratic forms and the smallest eigenvalue
    of the margin form (via the in-package eigenvalue oracle).

    ``coupling_form = D.T @ nu_node @ D - exclusive_weight
    + diag((2 + common) / alpha_hi)`` and
    ``margin_form = coupling_form + diag((gamma - exclusive/2) / alpha_lo**2)``.
    """
    mats = dissipation_matrices(g, cert)
    p = g.edge_count
    common_diag = np.diagonal(mats.common_weight)
    exclusive_diag = np.diagonal(mats.exclusive_weight)
    coupling_form = (
        mats.edge_nu_form
        - mats.exclusive_weight
        + np.diag((2.0 + common_diag) / cert.alpha_hi)
    )
    margin_form = coupling_form + np.diag(
        (cert.gamma - exclusive_diag) / (cert.alpha_lo ** 2)
    )
    if p == 0:
        raise ValueError("graph has no edges, the certificate forms are empty")
    min_eig = float(jacobi_eigenvalues(margin_form)[0])
    return CertificateForms(coupling_form=coupling_form, margin_form=margin_form,
                            margin_min_eig=min_eig)


@dataclass(frozen=True)
class GainBound:
    """Certified bound ``||relative outputs||_T <= gain * ||W||_T + offset``.

    ``n_min`` and ``m_max`` are the extreme eigenvalues of the slope-scanned
    response forms; the bound is certified only when ``n_min > 0``, otherwise
    ``gain`` and ``offset`` are nan.  ``estimate`` is ``"exact"`` when every
    sector is a point (single slope sample), else ``"sampled"``.
    """

    gain: float
    offset: float
    certified: bool
    n_min: float
    m_max: float
    weight_max: float
    slope_max: float
    bias_total: float
    estimate: str
    samples: int


def gain_bound_from_forms(coupling_form: np.ndarray, output_shift: np.ndarray,
                          weight_max: float, slope_max: float, bias_total: float,
                          slope_samples, estimate: str = "sampled") -> GainBound:
    """Scan slope samples and assemble the gain bound from raw forms.

    For each per-edge slope vector ``eta`` the response forms are
    ``M = diag(eta) @ coupling_form @ diag(eta)`` and ``N = M + output_shift``;
    ``n_min`` is the worst smallest eigenvalue of ``N`` and ``m_max`` the
    largest eigenvalue of ``M`` over the scan.  With ``n_min > 0``::

        gain   = sqrt(1/2 + (4 slope_max^2 weight_max^2 + 8 m_max^2) / n_min^2)
        offset = sqrt(2 |bias_total| / n_min)
    """
    samples = [np.asarray(h, dtype=float) for h in slope_samples]
    if not samples:
        raise ValueError("at least one slope sample is required")
    p = coupling_form.shape[0]
    n_min = math.inf
    m_max = -math.inf
    for h in samples:
        if h.shape != (p,):
            raise ValueError(f"slope sample has shape {h.shape}, expected ({p},)")
        m_form = coupling_form * np.outer(h, h)
        n_min = min(n_min, float(jacobi_eigenvalues(m_form + output_shift)[0]))
        m_max = max(m_max, float(jacobi_eigenvalues(m_form)[-1]))
    certified = n_min > 0.0
    if certified:
        gain = math.sqrt(
            0.5 + (4.0 * slope_max ** 2 * weight_max ** 2 + 8.0 * m_max ** 2) / n_min ** 2
        )
        offset = math.sqrt(2.0 * abs(bias_total) / n_min)
    else:
        gain = math.nan
        offset = math.nan
    return GainBound(gain=gain, offset=offset, certified=certified, n_min=n_min,
                     m_max=m_max, weight_max=weight_max, slope_max=slope_max,
                     bias_total=bias_total, estimate=estimate, samples=len(samples))


# Sector boxes are scanned at their vertices by default; past this edge count
# the vertex set is too large and the caller must supply samples.
_MAX_VERTEX_SCAN_EDGES = 12


def _default_slope_samples(cert: NetworkCertificate) -> list[np.ndarray]:
    if all(s.is_point for s in cert.sectors):
        return [cert.alpha_lo.copy()]
    p = cert.graph.edge_count
    if p > _MAX_VERTEX_SCAN_EDGES:
        raise ValueError(
            f"{p} edges with non-point sectors: supply slope_samples explicitly "
            f"(default vertex scan is limited to {_MAX_VERTEX_SCAN_EDGES} edges)"
        )
    corners = [
        np.array(v)
        for v in itertools.product(*[(s.alpha_lo, s.alpha_hi) for s in cert.sectors])
    ]
    corners.append(np.array([s.midpoint for s in cert.sectors]))
    return corners


def gain_bound(g: Graph, cert: NetworkCertificate, slope_samples=None) -> GainBound:
    """Certified disagreement gain bound for a network certificate.

    ``slope_samples`` is an iterable of per-edge slope vectors inside the
    sector box; omitted, it defaults to the single point for point sectors
    and to all box vertices plus the midpoint otherwise.  Samples outside the
    box are rejected.  For point sectors the scan is exact; otherwise the
    reported extremes are sampled estimates and are labelled as such.
    """
    if cert.graph != g:
        raise ValueError("certificate was assembled over a different graph")
    if g.edge_count == 0:
        raise ValueError("graph has no edges, nothing to bound")
    forms = quadratic_forms(g, cert)
    mats = dissipation_matrices(g, cert)
    stats = edge_stats(g)
    if slope_samples is None:
        samples = _default_slope_samples(cert)
    else:
        samples = [np.asarray(h, dtype=float) for h in slope_samples]
        for h in samples:
            if h.shape != (g.edge_count,):
                raise ValueError(
                    f"slope sample has shape {h.shape}, expected ({g.edge_count},)"
                )
            if np.any(h < cert.alpha_lo - 1e-12) or np.any(h > cert.alpha_hi + 1e-12):
                k = int(np.argmax(np.maximum(cert.alpha_lo - h, h - cert.alpha_hi)))
                raise ValueError(
                    f"slope sample leaves the sector box at edge {g.edge_label(k)}"
                )
    estimate = "exact" if all(s.is_point for s in cert.sectors) else "sampled"
    weight_max = float(2 + max(stats.common))
    slope_max = float(np.max(cert.alpha_hi))
    return gain_bound_from_forms(
        coupling_form=forms.coupling_form,
        output_shift=mats.output_quadratic,
        weight_max=weight_max,
        slope_max=slope_max,
        bias_total=cert.bias_total,
        slope_samples=samples,
        estimate=estimate,
    )


def dissipation_residual(v_vs_rel: float, rel_quad: float, v_quad: float,
                         bias_total: float) -> float:
    """Residual of the network dissipation inequality at one horizon.

    Arguments are finite-horizon inner products from a simulation trace:

    - ``v_vs_rel``: coupling outputs against ``pair_weight @ relative outputs``
    - ``rel_quad``: relative outputs against ``output_quadratic`` times itself
    - ``v_quad``: coupling outputs against ``coupling_quadratic`` times itself

    The certified inequality states ``-v_vs_rel >= rel_quad + v_quad +
    bias_total``; the returned residual is the left side minus the right and
    should be nonnegative up to discretisation error.
    """
    return -v_vs_rel - (rel_quad + v_quad + bias_total)


def certificate_to_dict(cert: NetworkCertificate) -> dict:
    """JSON-ready payload with one entry per edge (raw ``gamma``)."""
    return {
        "edges": [
            {
                "edge": [i, j],
                "nu": cert.certificates[k].nu,
                "gamma": cert.certificates[k].gamma,
                "beta": cert.certificates[k].beta,
                "alpha_lo": cert.sectors[k].alpha_lo,
                "alpha_hi": cert.sectors[k].alpha_hi,
            }
            for k, (i, j) in enumerate(cert.graph.edges)
        ]
    }


def certificate_from_dict(payload: dict, n: int | None = None) -> NetworkCertificate:
    """Rebuild a :class:`NetworkCertificate` from its JSON payload.

    ``n`` defaults to the largest node index appearing in the edge list.
    Entries may arrive in any order; they are matched to the canonical edge
    indexing of the reconstructed graph.
    """
    try:
        entries = payload["edges"]
    except (TypeError, KeyError):
        raise ValueError("certificate payload must be a dict with an 'edges' list") from None
    if not entries:
        raise ValueError("certificate payload has no edges")
    pairs = []
    for entry in entries:
        i, j = entry["edge"]
        pairs.append((int(i), int(j)))
    if n is None:
        n = max(max(i, j) for i, j in pairs)
    g = build_graph(n, pairs)
    by_edge = {}
    for entry in entries:
        i, j = entry["edge"]
        key = (min(int(i), int(j)), max(int(i), int(j)))
        by_edge[key] = entry
    sectors = []
    certs = []
    for key in g.edges:
        entry = by_edge[key]
        sectors.append(SectorBound(alpha_lo=float(entry["alpha_lo"]),
                                   alpha_hi=float(entry["alpha_hi"])))
        certs.append(EdgeCertificate(nu=float(entry["nu"]),
                                     gamma=float(entry["gamma"]),
                                     beta=float(entry["beta"])))
    return NetworkCertificate(graph=g, sectors=tuple(sectors),
                              certificates=tuple(certs))
