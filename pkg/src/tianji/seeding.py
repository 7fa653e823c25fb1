"""Schedule-independent random suggestions.

Every draw is a pure function of ``(master_seed, *key)``: a keyed BLAKE2b hash
of the key tuple gives a 64-bit value that is reduced modulo the size of the
remaining set. With at most a few dozen horses the modulo bias stays far below
2**-57, so no rejection loop is needed and draws never depend on how many
other draws happened first.
"""

from __future__ import annotations

import hashlib

import numpy as np

from tianji.game import HorseSet, Side

MASK64 = (1 << 64) - 1


def derive_u64(master_seed: int, *key) -> int:
    h = hashlib.blake2b(
        "|".join(str(k) for k in key).encode(),
        digest_size=8,
        key=(master_seed & MASK64).to_bytes(8, "little"),
        person=b"tianji-suggest",
    )
    return int.from_bytes(h.digest(), "little")


class SuggestionStream:
    def __init__(self, master_seed: int):
        self.master_seed = master_seed

    def suggest(self, pairing_id: str, tournament: int, round_index: int,
                side: Side, remaining: HorseSet) -> int:
        """Uniform draw over ``remaining`` for this exact slot of the run."""
        speeds = list(remaining)
        if not speeds:
            raise ValueError("cannot suggest from an empty set")
        u = derive_u64(self.master_seed, pairing_id, tournament, round_index, side.value)
        return speeds[u % len(speeds)]

    def agent_rng(self, pairing_id: str, side: Side) -> np.random.Generator:
        """Private generator for agents that randomize on their own."""
        return np.random.default_rng(derive_u64(self.master_seed, pairing_id, side.value, "agent"))
