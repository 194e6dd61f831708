"""A ready-to-use trust fabric: one authority node with the access contracts.

The fabric owns a single-authority ledger, deploys the registration and
capability contracts, and offers helpers to register VIDs and issue
tokens. It backs the gateway, the bench and the end-to-end tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Optional

from ..chain import HmacKey, Node, Transaction, make_params
from ..chain.service import ChainService, wall_ms
from ..contracts import call_payload, deploy_payload
from ..contracts import capability, registration


class FabricError(RuntimeError):
    pass


class TxFailed(FabricError):
    def __init__(self, error: str):
        super().__init__(error)
        self.error = error


@dataclass
class Client:
    vid: str
    key: HmacKey

    @property
    def address_hex(self) -> str:
        return self.key.address.hex()


@dataclass
class Fabric:
    """Single-authority ledger plus deployed contracts.

    Until :meth:`start` is called, blocks are sealed on a synthetic clock so
    set-up is instant; afterwards a background ticker seals on wall time.
    """

    n_clients: int = 4
    interval_ms: int = 200
    seed: str = "fabric"
    admin: HmacKey = field(init=False)
    clients: list = field(init=False)
    node: Node = field(init=False)
    service: ChainService = field(init=False)
    registry: bytes = field(init=False)
    capability: bytes = field(init=False)

    def __post_init__(self):
        self.admin = HmacKey.from_seed(f"{self.seed}/admin")
        self.clients = [Client(f"vid-{i}", HmacKey.from_seed(f"{self.seed}/client/{i}")) for i in range(self.n_clients)]
        params = make_params([self.admin], [c.key for c in self.clients], interval_ms=self.interval_ms)
        self.node = Node(params, [self.admin], name="fabric")
        self._synthetic_now = 0
        self._live = False
        self.service = ChainService(self.node, clock=self._clock)
        self.registry = self._expect_contract(self.transact(self.admin, deploy_payload(registration.CODE_ID)))
        self.capability = self._expect_contract(self.transact(self.admin, deploy_payload(capability.CODE_ID)))
        self.call(self.admin, self.capability, "set_registry", self.registry.hex())

    # ---- clock and sealing ---------------------------------------------

    def _clock(self) -> int:
        if self._live:
            return max(wall_ms(), self._synthetic_now)
        return self._synthetic_now

    def seal(self) -> int:
        """Seal one block now on the synthetic clock (set-up phase only)."""
        if self._live:
            raise FabricError("fabric is live; blocks are sealed by the ticker")

        def _seal(node: Node) -> int:
            self._synthetic_now = node.head_block.header.timestamp + node.params.interval_ms
            node.propose(self._synthetic_now)
            return node.height

        return self.service.run(_seal)

    def start(self) -> "Fabric":
        self._live = True
        self.service.start()
        return self

    def close(self) -> None:
        self.service.close()

    @property
    def height(self) -> int:
        return self.service.run(lambda n: n.height)

    # ---- transactions ----------------------------------------------------

    def submit(self, key: HmacKey, payload: bytes) -> bytes:
        def _submit(node: Node) -> bytes:
            confirmed = node.head_state.nonce(key.address)
            nonce = confirmed + node.mempool.pending_run(key.address, confirmed) + 1
            return node.submit_tx(Transaction.create(key, nonce, payload))

        return self.service.run(_submit)

    def wait(self, tx_hash: bytes, timeout: float = 10.0):
        """Block until ``tx_hash`` is confirmed; returns its receipt."""
        deadline = time.monotonic() + timeout
        while True:
            status = self.service.run(lambda n: n.tx_status(tx_hash))
            if status.state == "confirmed":
                return status.receipt
            if status.state == "rejected":
                raise TxFailed(status.reason)
            if not self._live:
                self.seal()
                continue
            if time.monotonic() > deadline:
                raise FabricError(f"tx {tx_hash.hex()} not confirmed within {timeout} s")
            time.sleep(self.interval_ms / 4000.0)

    def transact(self, key: HmacKey, payload: bytes):
        receipt = self.wait(self.submit(key, payload))
        if not receipt.ok:
            raise TxFailed(receipt.error)
        return receipt

    def call(self, key: HmacKey, contract: bytes, function: str, *args: Any) -> Any:
        return self.transact(key, call_payload(contract, function, *args)).result

    def query(self, contract: bytes, function: str, *args: Any, height: Optional[int] = None) -> Any:
        def _query(node: Node):
            h = node.height if height is None else height
            return node.state_at(h).world.query(contract, function, list(args), height=h), h

        return self.service.run(_query)[0]

    def query_at_head(self, contract: bytes, function: str, *args: Any) -> tuple[Any, int]:
        def _query(node: Node):
            h = node.height
            return node.head_state.world.query(contract, function, list(args), height=h), h

        return self.service.run(_query)

    @staticmethod
    def _expect_contract(receipt) -> bytes:
        if receipt.contract is None:
            raise FabricError("deploy produced no contract")
        return receipt.contract

    # ---- access set-up -----------------------------------------------------

    def register(self, client: Client) -> None:
        self.call(self.admin, self.registry, "register", client.vid, client.address_hex)

    def register_all(self) -> None:
        hashes = [
            self.submit(self.admin, call_payload(self.registry, "register", c.vid, c.address_hex))
            for c in self.clients
        ]
        for h in hashes:
            receipt = self.wait(h)
            if not receipt.ok:
                raise TxFailed(receipt.error)

    def own(self, resource_root: str) -> None:
        self.call(self.admin, self.capability, "set_owner", resource_root, self.admin.address.hex())

    def issue(self, client: Client, resource: str, actions, ttl: int = 1_000_000, depth: int = 0) -> str:
        return self.call(self.admin, self.capability, "issue", client.address_hex, resource, list(actions), ttl, depth)

    def revoke(self, token_id: str) -> None:
        self.call(self.admin, self.capability, "revoke", token_id)
