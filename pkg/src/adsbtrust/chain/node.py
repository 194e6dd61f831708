"""A permissioned ledger node with round-robin proof-of-authority.

The authority at ``authorities[(height + skips) % n]`` may seal the block at
``height``. Slot ``k`` (``skips == k``) opens ``interval * (1 + 2k)``
milliseconds after the parent, so a silent proposer is passed over after
twice the block interval. Fork choice: longest chain, ties broken by the
lexicographically lower head hash.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..contracts.base import World, execute
from ..contracts.base import ROLE_AUTHORITY, Receipt
from .encoding import encode
from .keys import AccountKey, SigningKey
from .merkle import merkle_root
from .types import Block, BlockHeader, Transaction, genesis_block

log = logging.getLogger(__name__)


class ChainError(Exception):
    code = "ChainError"


def _chain_error(name: str):
    return type(name, (ChainError,), {"code": name})


BadSignature = _chain_error("BadSignature")
UnknownSender = _chain_error("UnknownSender")
NonceGap = _chain_error("NonceGap")
DuplicateTx = _chain_error("DuplicateTx")
NotMyTurn = _chain_error("NotMyTurn")
IntervalNotElapsed = _chain_error("IntervalNotElapsed")
UnknownTx = _chain_error("UnknownTx")


class InvalidBlock(ChainError):
    code = "InvalidBlock"

    def __init__(self, reason: str, index: Optional[int] = None, detail: str = ""):
        self.reason = reason
        self.index = index
        label = f"{reason}({index})" if index is not None else reason
        super().__init__(f"{label}: {detail}" if detail else label)


@dataclass(frozen=True)
class ChainParams:
    authorities: tuple  # addresses, rotation order
    accounts: dict  # address -> AccountKey, every registered sender
    interval_ms: int = 500
    block_capacity: int = 128
    liveness_bound: int = 3
    finality_depth: int = 2
    genesis_time: int = 0
    service_managers: tuple = ()

    def expected_proposer(self, height: int, skips: int = 0) -> bytes:
        return self.authorities[(height + skips) % len(self.authorities)]

    def slot_open(self, parent_ts: int, skips: int) -> int:
        return parent_ts + self.interval_ms * (1 + 2 * skips)

    def roles(self) -> dict:
        roles = {a: "service_manager" for a in self.service_managers}
        roles.update({a: ROLE_AUTHORITY for a in self.authorities})
        return roles


def make_params(authority_keys: Sequence[SigningKey], client_keys: Sequence[SigningKey] = (), **kwargs) -> ChainParams:
    accounts = {k.address: AccountKey.of(k) for k in itertools.chain(authority_keys, client_keys)}
    return ChainParams(authorities=tuple(k.address for k in authority_keys), accounts=accounts, **kwargs)


@dataclass
class BlockState:
    """Ledger state after applying a block."""

    nonces: dict
    world: World
    receipts: dict = field(default_factory=dict)  # tx hash -> Receipt

    def nonce(self, sender: bytes) -> int:
        return self.nonces.get(sender, 0)


@dataclass(frozen=True)
class TxStatus:
    state: str  # pending | confirmed | rejected
    height: Optional[int] = None
    reason: Optional[str] = None
    receipt: Optional[Receipt] = None


def better_head(a: BlockHeader, b: BlockHeader) -> bool:
    """True when ``a`` should win fork choice over ``b``."""
    if a.height != b.height:
        return a.height > b.height
    return a.hash < b.hash


class Mempool:
    def __init__(self):
        self._txs: dict[bytes, tuple[Transaction, int]] = {}
        self._seq = itertools.count()

    def __contains__(self, tx_hash: bytes) -> bool:
        return tx_hash in self._txs

    def __len__(self) -> int:
        return len(self._txs)

    def add(self, tx: Transaction) -> None:
        if tx.hash not in self._txs:
            self._txs[tx.hash] = (tx, next(self._seq))

    def discard(self, tx_hash: bytes) -> None:
        self._txs.pop(tx_hash, None)

    def ordered(self) -> list[Transaction]:
        entries = sorted(self._txs.values(), key=lambda e: (e[0].sender, e[0].nonce, e[1]))
        return [tx for tx, _ in entries]

    def pending_run(self, sender: bytes, confirmed_nonce: int) -> int:
        """Length of the contiguous nonce run queued after ``confirmed_nonce``."""
        nonces = {tx.nonce for tx, _ in self._txs.values() if tx.sender == sender}
        n = confirmed_nonce
        while n + 1 in nonces:
            n += 1
        return n - confirmed_nonce

    def prune(self, nonces: dict) -> None:
        stale = [h for h, (tx, _) in self._txs.items() if tx.nonce <= nonces.get(tx.sender, 0)]
        for h in stale:
            del self._txs[h]


class Node:
    """One ledger replica.

    All mutation goes through ``submit_tx``, ``receive_tx``,
    ``receive_block`` and ``propose``; callers serialize them (see
    :class:`adsbtrust.chain.service.ChainService`).
    """

    def __init__(self, params: ChainParams, keys: Sequence[SigningKey] = (), name: str = ""):
        self.params = params
        self.name = name
        self.keys = {k.address: k for k in keys}
        self.genesis = genesis_block(params.genesis_time)
        self.blocks: dict[bytes, Block] = {self.genesis.hash: self.genesis}
        self.states: dict[bytes, BlockState] = {
            self.genesis.hash: BlockState({}, World(params.roles()))
        }
        self.head: bytes = self.genesis.hash
        self.canonical: list[bytes] = [self.genesis.hash]
        self.tx_index: dict[bytes, tuple[int, int]] = {}  # tx hash -> (height, index)
        self.mempool = Mempool()
        self.orphans: dict[bytes, list[Block]] = {}
        self.rejected: dict[bytes, str] = {}
        self.rejected_blocks: dict[bytes, str] = {}
        self.proposed_on: set[bytes] = set()

    # ---- queries -------------------------------------------------------

    @property
    def head_block(self) -> Block:
        return self.blocks[self.head]

    @property
    def height(self) -> int:
        return self.head_block.height

    @property
    def head_state(self) -> BlockState:
        return self.states[self.head]

    def block_at(self, height: int) -> Block:
        if not 0 <= height < len(self.canonical):
            raise KeyError(f"no canonical block at height {height}")
        return self.blocks[self.canonical[height]]

    def block_by_hash(self, block_hash: bytes) -> Block:
        return self.blocks[block_hash]

    def state_at(self, height: int) -> BlockState:
        return self.states[self.canonical[min(height, self.height)]]

    def is_authority(self) -> bool:
        return any(a in self.keys for a in self.params.authorities)

    def tx_status(self, tx_hash: bytes) -> TxStatus:
        if tx_hash in self.tx_index:
            height, _ = self.tx_index[tx_hash]
            receipt = self.states[self.canonical[height]].receipts.get(tx_hash)
            return TxStatus("confirmed", height=height, receipt=receipt)
        if tx_hash in self.mempool:
            return TxStatus("pending")
        if tx_hash in self.rejected:
            return TxStatus("rejected", reason=self.rejected[tx_hash])
        raise UnknownTx(tx_hash.hex())

    def confirmed_log(self) -> bytes:
        """Octet log of (height, index, tx hash) along the canonical chain."""
        out = bytearray()
        for height, bh in enumerate(self.canonical):
            for i, tx in enumerate(self.blocks[bh].transactions):
                out += encode(height, i, tx.hash)
        return bytes(out)

    def chain_bytes(self) -> bytes:
        return b"".join(self.blocks[h].encoded for h in self.canonical)

    # ---- transactions ----------------------------------------------------

    def _check_signature(self, tx: Transaction) -> None:
        account = self.params.accounts.get(tx.sender)
        if account is None:
            raise UnknownSender(tx.sender.hex())
        if not account.verify(tx.signing_bytes, tx.signature):
            raise BadSignature(tx.hash.hex())

    def submit_tx(self, tx: Transaction) -> bytes:
        """Client entry point: strict admission with nonce sequencing."""
        if tx.hash in self.mempool or tx.hash in self.tx_index:
            raise DuplicateTx(tx.hash.hex())
        try:
            self._check_signature(tx)
            confirmed = self.head_state.nonce(tx.sender)
            expected = confirmed + self.mempool.pending_run(tx.sender, confirmed) + 1
            if tx.nonce != expected:
                raise NonceGap(f"nonce {tx.nonce}, expected {expected}")
        except ChainError as exc:
            self.rejected[tx.hash] = exc.code
            raise
        self.mempool.add(tx)
        self.rejected.pop(tx.hash, None)
        return tx.hash

    def receive_tx(self, tx: Transaction) -> bool:
        """Gossip entry point: future nonces are held until the gap fills."""
        if tx.hash in self.mempool or tx.hash in self.tx_index:
            return False
        try:
            self._check_signature(tx)
        except ChainError as exc:
            self.rejected[tx.hash] = exc.code
            return False
        if tx.nonce <= self.head_state.nonce(tx.sender):
            return False
        self.mempool.add(tx)
        return True

    # ---- blocks ----------------------------------------------------------

    def validate_block(self, block: Block) -> BlockState:
        """Check ``block`` against its parent; returns the post-state or raises InvalidBlock."""
        header = block.header
        parent = self.blocks.get(header.parent_hash)
        if parent is None:
            raise InvalidBlock("UnknownParent")
        p = self.params
        if header.height != parent.height + 1:
            raise InvalidBlock("BadHeight", detail=f"{header.height} after {parent.height}")
        if not 0 <= header.skips < len(p.authorities):
            raise InvalidBlock("WrongProposer", detail=f"skips {header.skips}")
        if header.proposer != p.expected_proposer(header.height, header.skips):
            raise InvalidBlock("WrongProposer")
        account = p.accounts.get(header.proposer)
        if account is None or not account.verify(header.signing_bytes, header.proposer_signature):
            raise InvalidBlock("BadProposerSignature")
        if header.timestamp <= parent.header.timestamp:
            raise InvalidBlock("NonMonotoneTime")
        if header.timestamp < p.slot_open(parent.header.timestamp, header.skips):
            raise InvalidBlock("TooEarly")
        if len(block.transactions) > p.block_capacity:
            raise InvalidBlock("OverCapacity")
        if header.merkle_root != merkle_root([tx.encoded for tx in block.transactions]):
            raise InvalidBlock("BadMerkleRoot")

        pstate = self.states[parent.hash]
        nonces = dict(pstate.nonces)
        for i, tx in enumerate(block.transactions):
            acct = p.accounts.get(tx.sender)
            if acct is None or not acct.verify(tx.signing_bytes, tx.signature):
                raise InvalidBlock("BadTx", i, "signature")
            if tx.nonce != nonces.get(tx.sender, 0) + 1:
                raise InvalidBlock("BadTx", i, "nonce")
            nonces[tx.sender] = tx.nonce

        world = pstate.world.copy()
        receipts = {}
        for tx in block.transactions:
            receipts[tx.hash] = execute(world, tx.sender, tx.nonce, tx.payload, header.height, tx.hash)
        return BlockState(nonces, world, receipts)

    def receive_block(self, block: Block) -> str:
        """Validate and store ``block``; returns accepted/duplicate/orphan/rejected:<reason>."""
        if block.hash in self.blocks:
            return "duplicate"
        if block.hash in self.rejected_blocks:
            return f"rejected:{self.rejected_blocks[block.hash]}"
        if block.header.parent_hash not in self.blocks:
            self.orphans.setdefault(block.header.parent_hash, []).append(block)
            return "orphan"
        try:
            state = self.validate_block(block)
        except InvalidBlock as exc:
            self.rejected_blocks[block.hash] = exc.reason
            log.debug("%s rejected block %s: %s", self.name, block.hash.hex()[:12], exc)
            return f"rejected:{exc.reason}"
        self._store(block, state)
        for child in self.orphans.pop(block.hash, []):
            self.receive_block(child)
        return "accepted"

    def _store(self, block: Block, state: BlockState) -> None:
        self.blocks[block.hash] = block
        self.states[block.hash] = state
        self.append_and_resolve(block)

    def append_and_resolve(self, block: Block) -> bool:
        """Fork choice after ``block`` was stored; returns True when the head moved."""
        if not better_head(block.header, self.head_block.header):
            return False
        # walk back to the fork point
        branch = []
        h = block.hash
        while True:
            b = self.blocks[h]
            if b.height < len(self.canonical) and self.canonical[b.height] == h:
                break
            branch.append(h)
            h = b.header.parent_hash
        fork_height = self.blocks[h].height
        dropped = self.canonical[fork_height + 1 :]
        for bh in dropped:
            for tx in self.blocks[bh].transactions:
                self.tx_index.pop(tx.hash, None)
        self.canonical = self.canonical[: fork_height + 1] + branch[::-1]
        for bh in branch[::-1]:
            b = self.blocks[bh]
            for i, tx in enumerate(b.transactions):
                self.tx_index[tx.hash] = (b.height, i)
                self.mempool.discard(tx.hash)
        # replay: transactions from abandoned blocks go back to the pool
        for bh in dropped:
            for tx in self.blocks[bh].transactions:
                if tx.hash not in self.tx_index:
                    self.mempool.add(tx)
        self.head = block.hash
        self.mempool.prune(self.head_state.nonces)
        if dropped:
            log.info("%s reorg: dropped %d block(s) at height %d", self.name, len(dropped), fork_height + 1)
        return True

    # ---- production ------------------------------------------------------

    def my_slot(self, parent: Block) -> Optional[tuple[int, SigningKey]]:
        """Lowest rotation slot a local authority holds for the next height."""
        h = parent.height + 1
        for k in range(len(self.params.authorities)):
            key = self.keys.get(self.params.expected_proposer(h, k))
            if key is not None:
                return k, key
        return None

    def propose(self, now: int) -> Block:
        parent = self.head_block
        slot = self.my_slot(parent)
        if slot is None or parent.hash in self.proposed_on:
            raise NotMyTurn(self.name)
        k, key = slot
        opens = self.params.slot_open(parent.header.timestamp, k)
        if now < opens:
            if k == 0:
                raise IntervalNotElapsed(f"{opens - now} ms left")
            raise NotMyTurn(f"slot {k} opens in {opens - now} ms")
        txs = self._select_transactions()
        block = Block.build(parent.header, txs, max(now, opens), key, skips=k)
        self.proposed_on.add(parent.hash)
        status = self.receive_block(block)
        if status != "accepted":
            raise ChainError(f"own block not accepted: {status}")
        return block

    def try_propose(self, now: int) -> Optional[Block]:
        try:
            return self.propose(now)
        except (NotMyTurn, IntervalNotElapsed):
            return None

    def _select_transactions(self) -> list[Transaction]:
        state = self.head_state
        next_nonce: dict[bytes, int] = {}
        chosen = []
        for tx in self.mempool.ordered():
            if len(chosen) >= self.params.block_capacity:
                break
            expected = next_nonce.get(tx.sender, state.nonce(tx.sender)) + 1
            if tx.nonce != expected:
                continue
            chosen.append(tx)
            next_nonce[tx.sender] = tx.nonce
        return chosen

    def receive_all(self, blocks: Iterable[Block]) -> list[str]:
        return [self.receive_block(b) for b in blocks]
