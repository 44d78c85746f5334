"""Counter-based random number streams.

Every stream is a Philox4x64 key ``(seed, stream_id)``.  Draws for path ``j``
of a batch live at a fixed counter offset, so any block of paths can be
regenerated without producing the ones before it.  Normals come from the
inverse normal CDF applied to 53-bit uniforms.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import InvalidArgumentError

_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngStream:
    """Address of a reproducible stream of standard normals.

    ``counter`` is the first Philox block (4 x 64 bits) the stream uses.
    """

    seed: int
    stream_id: int = 0
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")
        if self.stream_id < 0 or self.counter < 0:
            raise InvalidArgumentError("stream_id and counter must be non-negative")

    def spawn(self, label):
        """Independent child stream; distinct labels give distinct keys."""
        sid = _splitmix64((self.stream_id * 0x100000001B3 + int(label) + 1) & _MASK64)
        return RngStream(self.seed, sid, 0)

    def same_key(self, other):
        return self.seed == other.seed and self.stream_id == other.stream_id

    def raw(self, n, offset=0):
        """``n`` raw 64-bit words starting ``offset`` words into the stream."""
        block, skip = divmod(int(offset), 4)
        bg = np.random.Philox(key=[self.seed, self.stream_id],
                              counter=[self.counter + block, 0, 0, 0])
        return bg.random_raw(n + skip)[skip:]

    def uniforms(self, n, offset=0):
        r = self.raw(n, offset)
        return ((r >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def normals(self, n, offset=0):
        return ndtri(self.uniforms(n, offset))

    def path_normals(self, n_paths, per_path, path_offset=0):
        """Array ``(n_paths, per_path)``; row ``j`` belongs to path ``path_offset + j``.

        Rows start on 4-word boundaries so a row never depends on how the
        batch was split.
        """
        stride = -(-per_path // 4) * 4
        z = self.normals(n_paths * stride, path_offset * stride)
        return z.reshape(n_paths, stride)[:, :per_path]
