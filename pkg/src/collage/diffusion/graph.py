"""Node layout and adjacency for the entity interaction graph.

Nodes are ordered agents first, then objects; every entity attends to every
other entity but not to itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import ConfigurationError


@dataclass(frozen=True)
class InteractionGraph:
    num_agents: int
    num_objects: int

    def __post_init__(self) -> None:
        if self.num_agents < 0 or self.num_objects < 0:
            raise ConfigurationError("entity counts must be non-negative")
        if self.num_nodes < 1:
            raise ConfigurationError("graph needs at least one node")

    @property
    def num_nodes(self) -> int:
        return self.num_agents + self.num_objects

    def agent_slice(self) -> slice:
        return slice(0, self.num_agents)

    def object_slice(self) -> slice:
        return slice(self.num_agents, self.num_nodes)

    def adjacency(self) -> torch.Tensor:
        """Boolean [V, V]; adjacency[i, j] means node i attends to node j."""
        full = torch.ones(self.num_nodes, self.num_nodes, dtype=torch.bool)
        return full & ~torch.eye(self.num_nodes, dtype=torch.bool)

    def to_dict(self) -> dict:
        return {"num_agents": self.num_agents, "num_objects": self.num_objects}

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionGraph":
        try:
            return cls(num_agents=int(d["num_agents"]), num_objects=int(d["num_objects"]))
        except KeyError as exc:
            raise ConfigurationError(f"malformed graph record: {exc}") from exc
