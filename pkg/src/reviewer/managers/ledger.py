# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Idempotency ledger of webhook deliveries.

The ledger is an append-only text file. Each claim writes the delivery id on its own
line; a release writes the id again behind `RELEASED_PREFIX`. Replaying the file in
order gives the set of claimed deliveries. Without a path it only lives in memory.
"""

import logging
import os
import threading

logger = logging.getLogger(__name__)

RELEASED_PREFIX = "released "


class DeliveryLedger:
    """Linearizable set of processed delivery ids."""

    def __init__(self, path: str | None = None):
        self.path = path
        self._lock = threading.Lock()
        self._seen: set[str] = set()
        if path and os.path.exists(path):
            with open(path, "r") as f:
                for line in f:
                    entry = line.strip()
                    if entry.startswith(RELEASED_PREFIX):
                        self._seen.discard(entry[len(RELEASED_PREFIX) :])
                    elif entry:
                        self._seen.add(entry)
            logger.info(f"Loaded {len(self._seen)} deliveries from {path}")

    def __contains__(self, delivery_id: str) -> bool:
        """Delivery already processed."""
        with self._lock:
            return delivery_id in self._seen

    def __len__(self) -> int:
        """Number of processed deliveries."""
        with self._lock:
            return len(self._seen)

    def _append(self, entry: str) -> None:
        if self.path:
            with open(self.path, "a") as f:
                f.write(f"{entry}\n")

    def claim(self, delivery_id: str) -> bool:
        """Record the delivery; False when it was already recorded.

        Raises:
            OSError: if the ledger file cannot be written; the delivery stays unclaimed.
        """
        with self._lock:
            if delivery_id in self._seen:
                return False
            self._append(delivery_id)
            self._seen.add(delivery_id)
            return True

    def release(self, delivery_id: str) -> None:
        """Forget a claim whose processing failed, so a redelivery can retry it."""
        with self._lock:
            if delivery_id not in self._seen:
                return
            self._append(f"{RELEASED_PREFIX}{delivery_id}")
            self._seen.discard(delivery_id)
