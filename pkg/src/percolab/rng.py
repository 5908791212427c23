"""Per-trial random streams.

Every trial owns an independent Philox4x64-10 stream (numpy's
``numpy.random.Philox``). The 128-bit key is ``(master_seed, trial_index)``,
each reduced mod 2**64 and given as the two 64-bit key words in that order;
the 256-bit counter state starts at zero and numpy increments it before
computing each four-word block. Doubles come from
``numpy.random.Generator.random``, i.e. the top 53 bits of successive 64-bit
outputs scaled by 2**-53. Because streams are keyed by trial index, a trial's
draws do not depend on how trials are split across workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def trial_stream(master_seed: int, trial: int) -> np.random.Generator:
    key = np.array([master_seed & MASK64, trial & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
