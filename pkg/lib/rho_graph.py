from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Generic, Hashable, Iterable, TypeVar

N = TypeVar("N", bound=Hashable)


@dataclass
class SuccessorGraph(Generic[N]):
    """Directed graph where every node has exactly one outgoing edge.

    Used for the rho operator on reduced forms: rho permutes the reduced forms
    of a discriminant, so the graph is a disjoint union of cycles."""

    nodes: set[N]
    adjacency_list: dict[N, list[N]]

    @property
    def size(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_successor(
        cls, nodes: Iterable[N], successor: Callable[[N], N]
    ) -> "SuccessorGraph[N]":
        nodes = set(nodes)
        adjacency_list = {}
        for n in nodes:
            nxt = successor(n)
            if nxt not in nodes:
                raise ValueError(f"successor of {n} is {nxt}, outside the node set")
            adjacency_list[n] = [nxt]
        return cls(nodes=nodes, adjacency_list=adjacency_list)

    def successor(self, node: N) -> N:
        return self.adjacency_list[node][0]

    def traversal_dfs(self, start_node: N) -> list[N]:
        """Nodes reachable from start_node, in the order they are visited.

        With one successor per node this is the orbit of start_node."""
        # keeps visiting order and gives quick membership checks
        visited_nodes: OrderedDict[N, None] = OrderedDict()
        to_visit_stack = [start_node]

        while to_visit_stack:
            current = to_visit_stack.pop()
            if current in visited_nodes:
                continue
            visited_nodes[current] = None
            for neighbor in self.adjacency_list[current]:
                to_visit_stack.append(neighbor)
        return list(visited_nodes)

    def is_permutation(self) -> bool:
        targets = [self.successor(n) for n in self.nodes]
        return len(set(targets)) == len(targets)

    def cycles(self) -> list[list[N]]:
        """Split the nodes into cycles, each starting at its least member.

        Only valid when the successor map is a permutation."""
        if not self.is_permutation():
            raise ValueError("successor map is not a permutation, no cycle partition")
        components: list[list[N]] = []
        # nodes not yet placed in a cycle
        nodes = self.nodes.copy()
        while nodes:
            start = min(nodes)
            orbit = self.traversal_dfs(start)
            components.append(orbit)
            nodes.difference_update(orbit)
        return sorted(components, key=lambda c: c[0])
