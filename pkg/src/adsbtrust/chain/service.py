"""Serialized access to a node for threaded callers.

Every mutation and query runs on one worker thread, in submission order;
a background ticker asks the node to seal blocks on its turns.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, TypeVar

from .node import Node

T = TypeVar("T")


def wall_ms() -> int:
    return int(time.time() * 1000)


class ChainService:
    def __init__(self, node: Node, clock: Callable[[], int] = wall_ms, tick_ms: Optional[int] = None):
        self.node = node
        self.clock = clock
        self.tick_ms = tick_ms if tick_ms is not None else max(10, node.params.interval_ms // 5)
        self._queue = ThreadPoolExecutor(max_workers=1, thread_name_prefix=f"chain-{node.name}")
        self._stop = threading.Event()
        self._ticker: Optional[threading.Thread] = None
        self._head_listeners: list[Callable[[int], None]] = []

    def run(self, fn: Callable[[Node], T], timeout: Optional[float] = 10.0) -> T:
        """Execute ``fn(node)`` on the command queue and wait for the result."""
        return self._queue.submit(fn, self.node).result(timeout=timeout)

    def on_new_head(self, listener: Callable[[int], None]) -> None:
        self._head_listeners.append(listener)

    def tick(self) -> bool:
        def _tick(node: Node) -> bool:
            return node.try_propose(self.clock()) is not None

        produced = self.run(_tick)
        if produced:
            h = self.node.height
            for listener in self._head_listeners:
                listener(h)
        return produced

    def start(self) -> "ChainService":
        if self._ticker is None:
            self._stop.clear()
            self._ticker = threading.Thread(target=self._loop, name="chain-ticker", daemon=True)
            self._ticker.start()
        return self

    def _loop(self) -> None:
        while not self._stop.wait(self.tick_ms / 1000.0):
            try:
                self.tick()
            except RuntimeError:
                break

    def wait_for_height(self, height: int, timeout: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.run(lambda n: n.height) >= height:
                return True
            time.sleep(self.tick_ms / 2000.0)
        return False

    def stop(self) -> None:
        self._stop.set()
        if self._ticker is not None:
            self._ticker.join(timeout=2.0)
            self._ticker = None

    def close(self) -> None:
        self.stop()
        self._queue.shutdown(wait=True)
