"""Counter-based random streams.

Every stochastic quantity in a run is drawn from a Philox4x64-10 stream
(numpy's ``Philox`` bit generator).  A stream is addressed by a 2-word key
``(seed, tag)`` and a 4-word counter whose last word holds the round index
``t``, so the draws for round ``t`` never depend on how many rounds were
generated before it.

Tags are fixed integers so other implementations can replay the streams.
"""

import numpy as np

TAG_NOISE = 0x4E4F495345          # "NOISE"
TAG_ADVERSARY = 0x414456          # "ADV"
TAG_THETA = 0x5448455441          # "THETA"
TAG_ATTACK_SET = 0x415345         # "ASE"
TAG_GRAPH = 0x47524150            # "GRAP"

_MASK64 = (1 << 64) - 1


def derive_seed(seed, tag):
    """Deterministic 63-bit sub-seed for ``(seed, tag)``."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, int(tag) & _MASK64])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def round_generator(seed, tag, t):
    """Generator positioned at the start of round ``t`` of stream ``(seed, tag)``."""
    bitgen = np.random.Philox(
        key=np.array([int(seed) & _MASK64, int(tag) & _MASK64], dtype=np.uint64),
        counter=np.array([0, 0, 0, int(t) & _MASK64], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


class NoiseStream:
    """Standard-normal draws addressed by ``(round, row)``.

    ``standard_normal(t, size)`` returns the first ``size`` normals of round
    ``t``; a node owning rows ``[a, b)`` of the stacked measurement vector
    always receives ``z[a:b]``, independent of evaluation order.
    """

    def __init__(self, seed, tag=TAG_NOISE):
        self.seed = int(seed)
        self.tag = int(tag)

    def standard_normal(self, t, size):
        return round_generator(self.seed, self.tag, t).standard_normal(size)

    def uniform(self, t, low, high, size):
        return round_generator(self.seed, self.tag, t).uniform(low, high, size)
