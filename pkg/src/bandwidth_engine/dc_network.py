"""DC power-flow machinery for the zone.

Flows are computed in MW directly: angles are carried in a base-folded scale
(theta_pu * base MVA) so that ``flow_mw = (phi_u - phi_v) / x_pu``. DC flows
from MW injections are invariant to the base choice, and no angle is ever
reported, so the fold is unobservable; ``base_mva`` stays configurable on the
zone for unit bookkeeping.

The surrounding grid enters through export-positive boundary flows and the
outbound sensitivities recorded on the zone. The effective sensitivity of an
internal line to an injection therefore combines the zone network with the
recorded boundary response — this is what :func:`compute_ptdf` evaluates.

:class:`FullNetwork` is a whole-grid helper for building synthetic test
fixtures: it produces reference boundary flows and outbound sensitivities that
are consistent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import Contingency, ZoneModel, _connected_components

BALANCE_TOL_MW = 1e-6
FLOW_CONSISTENCY_TOL = 1e-8


class IslandingError(Exception):
    """A topology island cannot be solved (no boundary, singular matrix)."""


class BalanceError(Exception):
    """Injections and boundary flows do not balance."""


@dataclass(frozen=True)
class TopologyState:
    """Active internal/outbound elements under an (optional) contingency."""

    active_lines: tuple[str, ...]
    active_outbound: tuple[str, ...]
    contingency_id: str | None
    islands: tuple[frozenset[str], ...]

    @staticmethod
    def base(zone: ZoneModel) -> "TopologyState":
        return TopologyState._build(zone, None)

    @staticmethod
    def for_contingency(zone: ZoneModel, contingency: Contingency | str) -> "TopologyState":
        if isinstance(contingency, str):
            contingency = zone.contingency(contingency)
        return TopologyState._build(zone, contingency)

    @staticmethod
    def _build(zone: ZoneModel, contingency: Contingency | None) -> "TopologyState":
        lines = zone.active_lines(contingency)
        olines = zone.active_outbound(contingency)
        islands = _connected_components(
            zone.bus_ids(), [(l.from_bus, l.to_bus) for l in lines]
        )
        return TopologyState(
            active_lines=tuple(l.id for l in lines),
            active_outbound=tuple(o.id for o in olines),
            contingency_id=contingency.id if contingency else None,
            islands=tuple(frozenset(c) for c in islands),
        )

    def island_of(self, bus: str) -> frozenset[str]:
        for island in self.islands:
            if bus in island:
                return island
        raise KeyError(bus)


@dataclass(frozen=True)
class PtdfMatrix:
    """Sensitivities of line flows to +1 MW bus injections (remote slack).

    ``line_factors`` cover the topology's active internal lines (signed in the
    line's from->to orientation); ``outbound_factors`` echo the zone's recorded
    export sensitivities for the topology. ``slack_bus`` names the balancing
    bus; zone-derived matrices balance at the surrounding grid's remote slack.
    """

    slack_bus: str
    line_factors: dict[str, dict[str, float]]
    outbound_factors: dict[str, dict[str, float]]

    def factor(self, element_id: str, bus: str) -> float:
        if element_id in self.line_factors:
            return self.line_factors[element_id][bus]
        return self.outbound_factors[element_id][bus]


def _outbound_ptdf(zone: ZoneModel, oline_id: str, contingency_id: str | None) -> dict[str, float]:
    o = zone.outbound(oline_id)
    if contingency_id is None:
        return o.ptdf_normal
    return o.ptdf_contingency[contingency_id]


def _solve_island_angles(
    zone: ZoneModel,
    island: frozenset[str],
    active_line_ids: tuple[str, ...],
    injections: np.ndarray,
    bus_pos: dict[str, int],
) -> dict[str, np.ndarray]:
    """Angles (base-folded) for one island, reference fixed at its lowest bus id.

    ``injections`` is (n_buses, k) — k right-hand sides solved at once.
    Returns per-bus angle rows for the island.
    """
    members = sorted(island)
    if len(members) == 1:
        return {members[0]: np.zeros(injections.shape[1])}
    pos = {b: i for i, b in enumerate(members)}
    n = len(members)
    B = np.zeros((n, n))
    for lid in active_line_ids:
        line = zone.line(lid)
        if line.from_bus not in island:
            continue
        b = 1.0 / line.reactance_pu
        i, j = pos[line.from_bus], pos[line.to_bus]
        B[i, i] += b
        B[j, j] += b
        B[i, j] -= b
        B[j, i] -= b
    keep = list(range(1, n))  # members[0] is the reference
    rhs = np.stack([injections[bus_pos[b]] for b in members[1:]])
    try:
        theta_red = np.linalg.solve(B[np.ix_(keep, keep)], rhs)
    except np.linalg.LinAlgError:
        raise IslandingError(
            f"singular network matrix on island {{{','.join(members)}}}"
        ) from None
    angles = {members[0]: np.zeros(injections.shape[1])}
    for b, row in zip(members[1:], theta_red):
        angles[b] = row
    return angles


def dc_flows(
    zone: ZoneModel,
    topology: TopologyState,
    injections_mw: dict[str, float],
    boundary_flows_mw: dict[str, float],
) -> dict[str, float]:
    """DC flows on the topology's active internal lines, in MW.

    ``boundary_flows_mw`` are export-positive per active outbound line and are
    treated as injections of the opposite sign at their boundary bus. Every
    electrical island must balance to :data:`BALANCE_TOL_MW`.
    """
    bus_ids = zone.bus_ids()
    bus_pos = {b: i for i, b in enumerate(bus_ids)}
    p = np.zeros((len(bus_ids), 1))
    for b, v in injections_mw.items():
        p[bus_pos[b], 0] += v
    for oid in topology.active_outbound:
        o = zone.outbound(oid)
        p[bus_pos[o.boundary_bus], 0] -= boundary_flows_mw[oid]

    for island in topology.islands:
        net = float(sum(p[bus_pos[b], 0] for b in island))
        if abs(net) > BALANCE_TOL_MW:
            raise BalanceError(
                f"island {{{','.join(sorted(island))}}} has {net:.6e} MW imbalance "
                f"between injections and boundary flows"
            )

    angles: dict[str, np.ndarray] = {}
    for island in topology.islands:
        angles.update(_solve_island_angles(zone, island, topology.active_lines, p, bus_pos))

    flows = {}
    for lid in topology.active_lines:
        line = zone.line(lid)
        flows[lid] = float(
            (angles[line.from_bus][0] - angles[line.to_bus][0]) / line.reactance_pu
        )
    return flows


def compute_ptdf(zone: ZoneModel, topology: TopologyState) -> PtdfMatrix:
    """Effective sensitivities of active internal lines to zone-bus injections.

    A +1 MW injection at bus k raises each active outbound export by the
    recorded sensitivity; the zone network redistributes the remainder. When
    the outage is internal the matrix is recomputed on the reduced topology —
    exact, and cheap at zone scale.
    """
    bus_ids = zone.bus_ids()
    bus_pos = {b: i for i, b in enumerate(bus_ids)}
    n = len(bus_ids)
    P = np.zeros((n, n))  # column k: net nodal injection pattern for bus k
    for k, bus in enumerate(bus_ids):
        P[bus_pos[bus], k] += 1.0
        for oid in topology.active_outbound:
            o = zone.outbound(oid)
            P[bus_pos[o.boundary_bus], k] -= _outbound_ptdf(zone, oid, topology.contingency_id)[bus]

    for island in topology.islands:
        if not any(zone.outbound(oid).boundary_bus in island for oid in topology.active_outbound):
            raise IslandingError(
                f"island {{{','.join(sorted(island))}}} has no outbound line; "
                f"injection sensitivities are undefined there"
            )
        for k, bus in enumerate(bus_ids):
            net = float(sum(P[bus_pos[b], k] for b in island))
            if abs(net) > 1e-9 * max(1.0, 1.0):
                raise IslandingError(
                    f"island {{{','.join(sorted(island))}}} cannot absorb injection at "
                    f"{bus!r} (residual {net:.3e}); outbound sensitivities are inconsistent"
                )

    angles: dict[str, np.ndarray] = {}
    for island in topology.islands:
        angles.update(_solve_island_angles(zone, island, topology.active_lines, P, bus_pos))

    line_factors: dict[str, dict[str, float]] = {}
    for lid in topology.active_lines:
        line = zone.line(lid)
        sens = (angles[line.from_bus] - angles[line.to_bus]) / line.reactance_pu
        line_factors[lid] = {bus: float(sens[k]) for k, bus in enumerate(bus_ids)}

    outbound_factors = {
        oid: dict(_outbound_ptdf(zone, oid, topology.contingency_id))
        for oid in topology.active_outbound
    }
    return PtdfMatrix("__remote__", line_factors, outbound_factors)


# ---------------------------------------------------------------------------
# whole-grid helper for synthetic fixtures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FullLine:
    id: str
    from_bus: str
    to_bus: str
    reactance_pu: float


@dataclass(frozen=True)
class FullNetwork:
    """A complete synthetic grid used to derive consistent zone boundary data."""

    buses: tuple[str, ...]
    lines: tuple[FullLine, ...]
    slack: str

    def without(self, line_id: str) -> "FullNetwork":
        kept = tuple(l for l in self.lines if l.id != line_id)
        if len(kept) == len(self.lines):
            raise KeyError(line_id)
        return FullNetwork(self.buses, kept, self.slack)

    def _components(self) -> list[set[str]]:
        return _connected_components(
            list(self.buses), [(l.from_bus, l.to_bus) for l in self.lines]
        )

    def flows(self, injections_mw: dict[str, float]) -> dict[str, float]:
        """Flows with the slack absorbing each component's residual.

        Components not containing the slack must balance on their own.
        """
        comps = self._components()
        pos = {b: i for i, b in enumerate(self.buses)}
        p = np.zeros(len(self.buses))
        for b, v in injections_mw.items():
            p[pos[b]] += v
        for comp in comps:
            resid = float(sum(p[pos[b]] for b in comp))
            if self.slack in comp:
                p[pos[self.slack]] -= resid
            elif abs(resid) > BALANCE_TOL_MW:
                raise BalanceError(
                    f"component {{{','.join(sorted(comp))}}} without slack has "
                    f"{resid:.6e} MW imbalance"
                )
        angles: dict[str, float] = {}
        for comp in comps:
            members = sorted(comp)
            npos = {b: i for i, b in enumerate(members)}
            B = np.zeros((len(members), len(members)))
            for l in self.lines:
                if l.from_bus not in comp:
                    continue
                b = 1.0 / l.reactance_pu
                i, j = npos[l.from_bus], npos[l.to_bus]
                B[i, i] += b
                B[j, j] += b
                B[i, j] -= b
                B[j, i] -= b
            if len(members) == 1:
                angles[members[0]] = 0.0
                continue
            keep = list(range(1, len(members)))
            theta = np.linalg.solve(
                B[np.ix_(keep, keep)], np.array([p[pos[b]] for b in members[1:]])
            )
            angles[members[0]] = 0.0
            for b, t in zip(members[1:], theta):
                angles[b] = float(t)
        return {
            l.id: (angles[l.from_bus] - angles[l.to_bus]) / l.reactance_pu
            for l in self.lines
        }

    def injection_sensitivity(self, bus: str) -> dict[str, float]:
        """Per-line flow change for +1 MW at ``bus``, -1 MW at the slack."""
        if bus == self.slack:
            return {l.id: 0.0 for l in self.lines}
        comps = self._components()
        comp = next(c for c in comps if bus in c)
        if self.slack not in comp:
            raise IslandingError(
                f"bus {bus!r} is disconnected from the slack {self.slack!r}; "
                f"injection sensitivity is undefined"
            )
        return self.flows({bus: 1.0})
