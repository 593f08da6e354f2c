"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures, same in-place output convention. Used when the extension is
not built or when ``RIRSF_PURE_PYTHON=1`` is set.
"""
import numpy as np

_CHUNK = 1 << 14


def _lattice(dims, reach):
    nmax = np.ceil(reach / (2.0 * dims)).astype(int) + 1
    axes = [np.arange(-n, n + 1) for n in nmax]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def ism_rir(dims, source, mics, beta, fs, c, max_order, table, out):
    dims = np.asarray(dims, dtype=float)
    source = np.asarray(source, dtype=float)
    length = out.shape[1]
    res = table.shape[0] - 1
    taps = table.shape[1]
    half = taps // 2
    reach = (length + half) / fs * c
    lattice = _lattice(dims, reach)
    offsets = np.arange(-half, half + 1)

    for parity in np.ndindex(2, 2, 2):
        parity = np.asarray(parity)
        order = np.abs(2 * lattice - parity).sum(axis=1)
        keep = order <= max_order if max_order >= 0 else np.ones(len(order), bool)
        pos = (1 - 2 * parity) * source + 2 * lattice[keep] * dims
        amp0 = np.power(beta, order[keep]) / (4.0 * np.pi)
        for m in range(mics.shape[0]):
            d = np.sqrt(((pos - mics[m]) ** 2).sum(axis=1))
            tau = d / c * fs
            near = tau < length + half
            tau, amp = tau[near], amp0[near] / d[near]
            # round half away from zero, as C lround does
            n0 = np.floor(tau + 0.5).astype(np.int64)
            if taps == 1:
                ok = n0 < length
                out[m] += np.bincount(n0[ok], weights=amp[ok], minlength=length)
                continue
            where = (tau - n0 + 0.5) * res
            j = np.minimum(np.floor(where).astype(np.int64), res - 1)
            wgt = where - j
            for s in range(0, len(tau), _CHUNK):
                sl = slice(s, s + _CHUNK)
                row, nxt = table[j[sl]], table[j[sl] + 1]
                vals = amp[sl, None] * (row + wgt[sl, None] * (nxt - row))
                idx = n0[sl, None] + offsets[None, :]
                ok = (idx >= 0) & (idx < length)
                out[m] += np.bincount(idx[ok], weights=vals[ok], minlength=length)


def matched_filter(spec, kernel, k, out):
    n_frames = spec.shape[0]
    out[...] = 0
    for n in range(min(k, n_frames)):
        out[: n_frames - n] += np.conj(kernel[n]) * spec[n:]


def ism_energy_histogram(dims, source, mic, fs, c, hist):
    dims = np.asarray(dims, dtype=float)
    length, n_orders = hist.shape
    lattice = _lattice(dims, length / fs * c)
    for parity in np.ndindex(2, 2, 2):
        parity = np.asarray(parity)
        order = np.abs(2 * lattice - parity).sum(axis=1)
        pos = (1 - 2 * parity) * np.asarray(source, float) + 2 * lattice * dims
        d2 = ((pos - np.asarray(mic, float)) ** 2).sum(axis=1)
        n0 = np.floor(np.sqrt(d2) / c * fs + 0.5).astype(np.int64)
        ok = n0 < length
        hist += np.bincount(n0[ok] * n_orders + order[ok], weights=1.0 / d2[ok],
                            minlength=length * n_orders).reshape(length, n_orders)
