"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def block_products(sur, ref, max_delay, block):
    """Block sums of ``sur[n] * conj(ref[n - tau])`` for tau = 0..max_delay.

    ``ref`` is zero before its first sample. The trailing partial block, if
    any, is summed as-is. Returns shape ``(max_delay + 1, ceil(N / block))``.
    """
    sur = np.ascontiguousarray(sur, dtype=np.complex128)
    ref = np.ascontiguousarray(ref, dtype=np.complex128)
    n = sur.shape[0]
    nb = -(-n // block)
    out = np.empty((max_delay + 1, nb), dtype=np.complex128)
    prod = np.zeros(nb * block, dtype=np.complex128)
    for tau in range(max_delay + 1):
        prod[:] = 0
        if tau < n:
            np.multiply(sur[tau:], np.conj(ref[: n - tau]), out=prod[tau:n])
        out[tau] = prod.reshape(nb, block).sum(axis=1)
    return out
