import hashlib

import numpy as np

# stream domains
ESTEP = 0
PREDICT = 1
SYNTH = 2


def stream(seed, *key):
    """Counter-based generator for the stream ``key`` under ``seed``.

    Streams are independent of the order in which they are requested, so
    splitting work across threads does not change any draw.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def coordinate_ranks(Y_obs):
    """Row of each output coordinate in a block of per-coordinate random numbers.

    Coordinates are ordered by a digest of their observed outputs, so
    permuting the output columns permutes the random numbers with them.
    Identical columns keep their original relative order.
    """
    N = Y_obs[0].shape[1]
    digests = [hashlib.sha256(b"".join(np.ascontiguousarray(Y[:, j], dtype=float).tobytes()
                                       for Y in Y_obs)).digest() for j in range(N)]
    order = sorted(range(N), key=digests.__getitem__)
    rank = np.empty(N, dtype=np.intp)
    rank[order] = np.arange(N)
    return rank
