"""Discrete-event network of ledger nodes with random per-link delays.

Used to check agreement, total order, termination and validity: a full
mesh of nodes, some authorities and some plain validators, exchanging
transactions and blocks with delays drawn from a seeded generator.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..contracts import note_payload
from .keys import HmacKey
from .node import ChainParams, Node, make_params
from .types import Block, Transaction


@dataclass
class NetworkStats:
    blocks_sealed: int = 0
    messages: int = 0
    rejections: dict = field(default_factory=dict)
    submit_height: dict = field(default_factory=dict)  # tx hash -> height of submitting node's head


class Network:
    def __init__(
        self,
        n_miners: int = 6,
        n_non_miners: int = 6,
        max_delay_ms: int = 100,
        seed: int = 0,
        interval_ms: int = 500,
        block_capacity: int = 128,
        tick_ms: int = 25,
    ):
        self.rng = random.Random(seed)
        self.max_delay_ms = max_delay_ms
        self.tick_ms = tick_ms
        self.miner_keys = [HmacKey.from_seed(f"miner-{i}") for i in range(n_miners)]
        self.client_keys = [HmacKey.from_seed(f"client-{i}") for i in range(n_non_miners)]
        self.params: ChainParams = make_params(
            self.miner_keys, self.client_keys, interval_ms=interval_ms, block_capacity=block_capacity
        )
        self.nodes = [Node(self.params, [k], name=f"miner-{i}") for i, k in enumerate(self.miner_keys)]
        self.nodes += [Node(self.params, [], name=f"peer-{i}") for i in range(n_non_miners)]
        self.crashed: set[int] = set()
        self.now = 0
        self._events: list = []
        self._seq = itertools.count()
        self.stats = NetworkStats()
        self._next_nonce = {k.address: 1 for k in self.client_keys}

    # ---- event plumbing --------------------------------------------------

    def live(self) -> list[Node]:
        return [n for i, n in enumerate(self.nodes) if i not in self.crashed]

    def crash(self, index: int) -> None:
        self.crashed.add(index)

    def schedule(self, at_ms: int, action: Callable[[], None]) -> None:
        heapq.heappush(self._events, (at_ms, next(self._seq), action))

    def _broadcast(self, origin: int, deliver: Callable[[Node], None]) -> None:
        for j, node in enumerate(self.nodes):
            if j == origin or j in self.crashed:
                continue
            delay = self.rng.randint(0, self.max_delay_ms)
            self.stats.messages += 1
            self.schedule(self.now + delay, lambda node=node: deliver(node))

    def gossip_block(self, origin: int, block: Block) -> None:
        def deliver(node: Node) -> None:
            status = node.receive_block(block)
            if status.startswith("rejected"):
                self.stats.rejections[status] = self.stats.rejections.get(status, 0) + 1

        self._broadcast(origin, deliver)

    def gossip_tx(self, origin: int, tx: Transaction) -> None:
        self._broadcast(origin, lambda node: node.receive_tx(tx))

    # ---- workload --------------------------------------------------------

    def make_tx(self, client: int, data: bytes) -> Transaction:
        key = self.client_keys[client]
        nonce = self._next_nonce[key.address]
        self._next_nonce[key.address] = nonce + 1
        return Transaction.create(key, nonce, note_payload(data))

    def submit(self, node_index: int, tx: Transaction) -> None:
        node = self.nodes[node_index]
        node.submit_tx(tx)
        self.stats.submit_height[tx.hash] = node.height
        self.gossip_tx(node_index, tx)

    def _tick(self) -> None:
        for i, node in enumerate(self.nodes):
            if i in self.crashed or not node.is_authority():
                continue
            block = node.try_propose(self.now)
            if block is not None:
                self.stats.blocks_sealed += 1
                self.gossip_block(i, block)

    def run_until(self, until_ms: int, produce: bool = True) -> None:
        if produce:
            t = (self.now // self.tick_ms + 1) * self.tick_ms
            while t <= until_ms:
                self.schedule(t, self._tick)
                t += self.tick_ms
        while self._events and self._events[0][0] <= until_ms:
            at, _, action = heapq.heappop(self._events)
            self.now = at
            action()
        self.now = until_ms

    def drain(self) -> None:
        """Deliver every message in flight without producing new blocks."""
        while self._events:
            at, _, action = heapq.heappop(self._events)
            self.now = max(self.now, at)
            if action.__name__ != "_tick":
                action()

    # ---- checks ----------------------------------------------------------

    def heads(self) -> set[bytes]:
        return {n.head for n in self.live()}

    def agreed(self) -> bool:
        live = self.live()
        return len(self.heads()) == 1 and len({n.chain_bytes() for n in live}) == 1 and len(
            {n.confirmed_log() for n in live}
        ) == 1

    def confirmation_delays(self, reference: Optional[Node] = None) -> dict[bytes, int]:
        """Blocks between submission and confirmation, per submitted tx."""
        node = reference or self.live()[0]
        out = {}
        for tx_hash, h0 in self.stats.submit_height.items():
            loc = node.tx_index.get(tx_hash)
            out[tx_hash] = (loc[0] - h0) if loc else -1
        return out


def run_consensus_workload(
    n_tx: int = 1000,
    seed: int = 0,
    crash: Optional[int] = 3,
    max_delay_ms: int = 100,
    tx_per_interval: int = 20,
) -> Network:
    """Submit ``n_tx`` valid transactions through random live peers, then quiesce."""
    net = Network(seed=seed, max_delay_ms=max_delay_ms)
    if crash is not None:
        net.crash(crash)
    interval = net.params.interval_ms
    n_clients = len(net.client_keys)
    sent = 0
    step = 0
    while sent < n_tx:
        batch = min(tx_per_interval, n_tx - sent)
        for _ in range(batch):
            client = sent % n_clients
            # each client submits through its own peer so nonce order holds at admission
            peer = len(net.miner_keys) + client
            net.submit(peer, net.make_tx(client, f"tx-{sent}".encode()))
            sent += 1
        step += 1
        net.run_until(step * interval)
    # let every transaction land and settle
    for _ in range(12):
        step += 1
        net.run_until(step * interval)
    net.drain()
    return net
