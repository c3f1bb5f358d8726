"""Counter-based random streams.

Every normal variate is a pure function of ``(seed, path, tag, position)``:
a Philox4x32-10 block is evaluated at counter ``(position // 2, path, tag)``
and turned into two normals by Box-Muller. No generator state is shared, so
paths can be simulated in any order or in parallel with identical results.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels

DW = 1
LEVY = 2
ORACLE = 3
PROBE = 4

_TWO53 = 9007199254740992.0


def make_tag(purpose, level=0):
    """Pack a purpose id (8 bits) and a level key (24 bits) into a counter word."""
    if not 0 <= purpose < 256 or not 0 <= level < 2**24:
        raise ValueError("purpose must fit 8 bits and level 24 bits")
    return purpose | (level << 8)


def _uniform(hi, lo):
    # 53-bit uniform on the open interval (0, 1)
    a = (hi >> np.uint32(5)).astype(np.float64)
    b = (lo >> np.uint32(6)).astype(np.float64)
    return (a * 67108864.0 + b + 0.5) / _TWO53


def words_to_normals(words):
    """(..., 4) uint32 Philox output -> (..., 2) standard normals."""
    u1 = _uniform(words[..., 0], words[..., 1])
    u2 = _uniform(words[..., 2], words[..., 3])
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def normals(seed, paths, tag, start, count, kernels=None):
    """Standard normals at stream positions ``start .. start+count-1``.

    Returns an array of shape (len(paths), count).
    """
    k = kernels or _kernels
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    if count <= 0:
        return np.empty((paths.size, 0))
    b0, off = divmod(int(start), 2)
    nb = (off + count + 1) // 2
    words = k.philox_blocks(seed & 0xFFFFFFFF, seed >> 32, paths, tag, b0, nb)
    z = words_to_normals(words).reshape(paths.size, 2 * nb)
    return z[:, off:off + count]


@dataclass
class Stream:
    """A positioned handle on one (seed, path, tag) stream.

    Drawing advances ``position``; copying the handle replays the same values.
    """

    seed: int
    path: int = 0
    tag: int = make_tag(DW)
    position: int = 0

    def normal(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        z = normals(self.seed, [self.path], self.tag, self.position, n)[0]
        self.position += n
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def child(self, purpose, level=0):
        """Independent stream for the same (seed, path) and another purpose."""
        return Stream(self.seed, self.path, make_tag(purpose, level), 0)

    def copy(self):
        return Stream(self.seed, self.path, self.tag, self.position)
