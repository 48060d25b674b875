"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
the user seed (plus a domain tag) and whose counter encodes the logical
position of the draw, e.g. ``(frame, particle)``. A stream therefore depends
only on ``(seed, tag, key)`` and never on the order in which streams are
created, so per-particle work can run in any order (or in parallel) and still
reproduce bit-identical results.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

_U64 = (1 << 64) - 1

# Domain tags keep independent uses of one seed from sharing streams.
TAG_TEMPLATE = 0
TAG_KINETIC = 1
TAG_RESAMPLE = 2
TAG_INIT = 3
TAG_SYNTH = 4


def stream(seed: int, *key: int, tag: int = 0) -> np.random.Generator:
    """Return the generator for the logical draw position ``key``.

    Parameters
    ----------
    seed : int
        64-bit seed.
    *key : int
        Up to three non-negative integers naming the draw position.
    tag : int
        Domain tag (see ``TAG_*``); occupies the high word of the Philox key.
    """
    if len(key) > 3:
        raise ContractError(f"stream key has at most 3 components, got {len(key)}")
    for k in (seed, tag, *key):
        if not 0 <= int(k) <= _U64:
            raise ContractError(f"stream key component {k} outside the unsigned 64-bit range")
    # counter word 0 is left for Philox's own block increment
    counter = np.zeros(4, dtype=np.uint64)
    counter[1 : 1 + len(key)] = [int(k) for k in key]
    bitgen = np.random.Philox(key=int(seed) | (int(tag) << 64), counter=counter)
    return np.random.Generator(bitgen)
