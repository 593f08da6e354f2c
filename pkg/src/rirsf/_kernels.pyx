# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay numerically in step with ``_kernels_py``."""

from libc.math cimport ceil, floor, sqrt, lround, pow, M_PI

cdef extern from *:
    """
    /* restrict lets the compiler vectorise the tap loop; AVX2 is picked at load time when present */
    #if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
    __attribute__((target_clones("avx2", "default")))
    #endif
    static void rirsf_add_taps(double *restrict dst, const double *restrict row,
                                      const double *restrict nxt, double amp, double wgt, int n)
    {
        for (int k = 0; k < n; k++)
            dst[k] += amp * (row[k] + wgt * (nxt[k] - row[k]));
    }
    """
    void rirsf_add_taps(double* dst, const double* row, const double* nxt, double amp, double wgt, int n) nogil


def ism_rir(const double[::1] dims, const double[::1] source, const double[:, ::1] mics,
            double beta, double fs, double c, int max_order,
            const double[:, ::1] table, double[:, ::1] out):
    """Accumulate shoebox image-source arrivals into ``out`` (M x L), in place.

    ``table`` holds the fractional-delay filter sampled at ``res + 1`` evenly
    spaced offsets in [-0.5, 0.5]; rows are linearly interpolated. A table with
    a single column means nearest-sample placement.
    """
    cdef Py_ssize_t n_mics = mics.shape[0]
    cdef Py_ssize_t length = out.shape[1]
    cdef int res = table.shape[0] - 1
    cdef int taps = table.shape[1]
    cdef int half = taps // 2
    cdef double reach = (length + half) / fs * c
    cdef int nmax[3]
    cdef int ax
    for ax in range(3):
        nmax[ax] = <int>ceil(reach / (2.0 * dims[ax])) + 1

    cdef int px, py, pz, nx, ny, nz, order, k, klo, khi, j
    cdef Py_ssize_t m
    cdef long n0
    cdef double ix, iy, iz, dx, dy, dz, d, tau, frac, amp, amp0, pos, wgt
    cdef const double* row
    cdef const double* nxt

    for px in range(2):
        for py in range(2):
            for pz in range(2):
                for nx in range(-nmax[0], nmax[0] + 1):
                    ix = (1 - 2 * px) * source[0] + 2 * nx * dims[0]
                    for ny in range(-nmax[1], nmax[1] + 1):
                        iy = (1 - 2 * py) * source[1] + 2 * ny * dims[1]
                        for nz in range(-nmax[2], nmax[2] + 1):
                            order = abs(2 * nx - px) + abs(2 * ny - py) + abs(2 * nz - pz)
                            if max_order >= 0 and order > max_order:
                                continue
                            iz = (1 - 2 * pz) * source[2] + 2 * nz * dims[2]
                            amp0 = pow(beta, order) / (4.0 * M_PI)
                            for m in range(n_mics):
                                dx = ix - mics[m, 0]
                                dy = iy - mics[m, 1]
                                dz = iz - mics[m, 2]
                                d = sqrt(dx * dx + dy * dy + dz * dz)
                                tau = d / c * fs
                                if tau >= length + half:
                                    continue
                                amp = amp0 / d
                                n0 = lround(tau)
                                if taps == 1:
                                    if n0 < length:
                                        out[m, n0] += amp
                                    continue
                                frac = tau - n0
                                pos = (frac + 0.5) * res
                                j = <int>floor(pos)
                                if j >= res:
                                    j = res - 1
                                wgt = pos - j
                                row = &table[j, 0]
                                nxt = &table[j + 1, 0]
                                klo = -half if n0 >= half else -n0
                                khi = half if n0 + half < length else length - 1 - n0
                                rirsf_add_taps(&out[m, n0 + klo], row + klo + half, nxt + klo + half,
                                               amp, wgt, khi - klo + 1)


def matched_filter(const double complex[:, ::1] spec, const double complex[:, ::1] kernel,
                   int k, double complex[:, ::1] out):
    """out[t, f] = sum_{n<k} conj(kernel[n, f]) * spec[t + n, f], zero past the end."""
    cdef Py_ssize_t n_frames = spec.shape[0]
    cdef Py_ssize_t n_bins = spec.shape[1]
    cdef Py_ssize_t t, n, f
    cdef double complex acc
    for t in range(n_frames):
        for f in range(n_bins):
            acc = 0
            for n in range(k):
                if t + n >= n_frames:
                    break
                acc = acc + kernel[n, f].conjugate() * spec[t + n, f]
            out[t, f] = acc


def ism_energy_histogram(const double[::1] dims, const double[::1] source, const double[::1] mic,
                         double fs, double c, double[:, ::1] hist):
    """Add ``1/d**2`` of every image arriving before ``hist.shape[0]`` into ``hist[n, order]``.

    ``n`` is the arrival rounded to the nearest sample; ``hist`` needs at least
    ``sum(2 * nmax + 1)`` order columns.
    """
    cdef Py_ssize_t length = hist.shape[0]
    cdef double reach = length / fs * c
    cdef int nmax[3]
    cdef int ax
    for ax in range(3):
        nmax[ax] = <int>ceil(reach / (2.0 * dims[ax])) + 1
    cdef int px, py, pz, nx, ny, nz, order
    cdef long n0
    cdef double ix, iy, iz, dx, dy, dz, d2
    for px in range(2):
        for py in range(2):
            for pz in range(2):
                for nx in range(-nmax[0], nmax[0] + 1):
                    ix = (1 - 2 * px) * source[0] + 2 * nx * dims[0]
                    dx = ix - mic[0]
                    for ny in range(-nmax[1], nmax[1] + 1):
                        iy = (1 - 2 * py) * source[1] + 2 * ny * dims[1]
                        dy = iy - mic[1]
                        for nz in range(-nmax[2], nmax[2] + 1):
                            iz = (1 - 2 * pz) * source[2] + 2 * nz * dims[2]
                            dz = iz - mic[2]
                            d2 = dx * dx + dy * dy + dz * dz
                            n0 = lround(sqrt(d2) / c * fs)
                            if n0 >= length:
                                continue
                            order = abs(2 * nx - px) + abs(2 * ny - py) + abs(2 * nz - pz)
                            hist[n0, order] += 1.0 / d2
