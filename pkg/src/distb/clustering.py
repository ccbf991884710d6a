"""Energy-aware cluster head selection and the per-round loop.

Selection walks the node list in a single composite order (energy descending,
distance to the base station ascending, id ascending). The first unassigned
node becomes a head; every later unassigned node strictly inside the head's
coverage radius becomes its member. Heads therefore never have less energy
than their members, and member assignment is first-wins.

Each round re-sorts, re-elects, then charges energy: a head pays
head_cost + tx_cost * len(members), a member pays tx_cost. Depleted nodes
drop out of later rounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import ExhaustedNetworkError
from .topology import NodeSet, TopologyParams, distance, refresh_dist_bs


@dataclass(frozen=True)
class Cluster:
    head_id: int
    member_ids: tuple[int, ...]


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple[Cluster, ...]
    round: int = 0

    def head_ids(self) -> list[int]:
        return [c.head_id for c in self.clusters]

    def assignment(self) -> dict[int, int]:
        """Map node id -> head id (heads map to themselves)."""
        out: dict[int, int] = {}
        for c in self.clusters:
            out[c.head_id] = c.head_id
            for m in c.member_ids:
                out[m] = c.head_id
        return out


def sort_key(node) -> tuple[float, float, int]:
    return (-node.energy, node.dist_bs, node.id)


def sort_nodes(node_set: NodeSet) -> NodeSet:
    """Order by energy descending, dist_bs ascending, id ascending (stable, total)."""
    return NodeSet(
        nodes=sorted(node_set.nodes, key=sort_key),
        base_station=node_set.base_station,
    )


def select_cluster_heads(node_set: NodeSet, round_no: int = 0) -> ClusterSet:
    """Elect heads and assign members over an already-sorted node set.

    Every node ends as exactly one of head or member. Membership uses the
    strict predicate distance(head, candidate) < head.area.
    """
    nodes = node_set.nodes
    if not nodes:
        raise ValueError("cannot cluster an empty node set")
    assigned: set[int] = set()
    clusters: list[Cluster] = []
    for i, cand in enumerate(nodes):
        if cand.id in assigned:
            continue
        assigned.add(cand.id)
        members: list[int] = []
        for other in nodes[i + 1 :]:
            if other.id in assigned:
                continue
            if distance(cand.location, other.location) < cand.area:
                members.append(other.id)
                assigned.add(other.id)
        clusters.append(Cluster(head_id=cand.id, member_ids=tuple(members)))
    return ClusterSet(clusters=tuple(clusters), round=round_no)


def run_round(
    node_set: NodeSet,
    params: TopologyParams,
    round_no: int = 0,
) -> tuple[ClusterSet, NodeSet]:
    """One clustering epoch: refresh dist_bs, sort, elect, charge energy.

    Returns the election result and the post-charge node set (flags updated,
    depleted nodes kept in the list but excluded from the election). Raises
    ExhaustedNetworkError when no node holds energy.
    """
    refreshed = refresh_dist_bs(node_set)
    alive = [n for n in refreshed.nodes if not n.depleted]
    if not alive:
        raise ExhaustedNetworkError("all nodes depleted")
    sorted_alive = sort_nodes(NodeSet(nodes=alive, base_station=refreshed.base_station))
    clusters = select_cluster_heads(sorted_alive, round_no=round_no)

    head_ids = set(clusters.head_ids())
    member_counts = {c.head_id: len(c.member_ids) for c in clusters.clusters}
    updated = []
    for n in refreshed.nodes:
        if n.depleted:
            updated.append(replace(n, head=False, member=False))
        elif n.id in head_ids:
            cost = params.head_cost_j + params.tx_cost_j * member_counts[n.id]
            updated.append(replace(n, head=True, member=False, energy=max(0.0, n.energy - cost)))
        else:
            updated.append(replace(n, head=False, member=True, energy=max(0.0, n.energy - params.tx_cost_j)))
    return clusters, NodeSet(nodes=updated, base_station=refreshed.base_station)


def cluster_set_to_json(cluster_set: ClusterSet) -> str:
    doc = {
        "round": cluster_set.round,
        "clusters": [
            {"head_id": c.head_id, "member_ids": list(c.member_ids)}
            for c in cluster_set.clusters
        ],
    }
    return json.dumps(doc, sort_keys=True)
