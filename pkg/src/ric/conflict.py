"""
Conflict manager for RIC control requests.

Two requests conflict when they target the same UE with different cells.
Requests are evaluated FIFO under a per-tick budget; the remainder spills
to the next tick.
"""

from collections import deque
from typing import Deque, Dict, List, Sequence, Tuple

from ric.types import RicControlRequest


def _winner_key(policy: str):
    if policy == "priority":
        return lambda r: (-r.priority, r.request_id)
    if policy == "first-wins":
        return lambda r: (r.tick, r.request_id)
    raise ValueError(f"unknown conflict policy {policy!r}")


def resolve_conflicts(pending: Sequence[RicControlRequest],
                      policy: str = "priority") -> Tuple[List[RicControlRequest], List[RicControlRequest]]:
    """
    Split `pending` into (accepted, rejected).

    Per UE the winner is chosen by policy (ties broken by lowest request_id);
    requests agreeing with the winner's target are accepted with it. Both
    lists keep the input order.
    """
    key = _winner_key(policy)
    groups: Dict[str, List[RicControlRequest]] = {}
    for request in pending:
        groups.setdefault(request.ue_id, []).append(request)

    winning_target = {ue_id: min(group, key=key).target_cell for ue_id, group in groups.items()}
    accepted, rejected = [], []
    for request in pending:
        if request.target_cell == winning_target[request.ue_id]:
            accepted.append(request)
        else:
            rejected.append(request)
    return accepted, rejected


class ConflictManager:
    def __init__(self, budget: int, policy: str = "priority"):
        _winner_key(policy)
        self.budget = budget
        self.policy = policy
        self.queue: Deque[RicControlRequest] = deque()
        self._seen_ids = set()

    def submit(self, request: RicControlRequest) -> bool:
        """Queue `request`; False if its id was already used in this run."""
        if request.request_id in self._seen_ids:
            return False
        self._seen_ids.add(request.request_id)
        self.queue.append(request)
        return True

    def take_batch(self) -> List[RicControlRequest]:
        """Pop up to `budget` requests from the head of the queue."""
        count = min(self.budget, len(self.queue))
        return [self.queue.popleft() for _ in range(count)]

    def resolve_tick(self) -> Tuple[List[RicControlRequest], List[RicControlRequest], int]:
        """Evaluate one tick's batch. Returns (accepted, rejected, spilled count)."""
        batch = self.take_batch()
        accepted, rejected = resolve_conflicts(batch, self.policy)
        return accepted, rejected, len(self.queue)

    def purge(self, issuer: str) -> List[RicControlRequest]:
        kept, purged = deque(), []
        for request in self.queue:
            (purged if request.issuer == issuer else kept).append(request)
        self.queue = kept
        return purged

    def __len__(self) -> int:
        return len(self.queue)
