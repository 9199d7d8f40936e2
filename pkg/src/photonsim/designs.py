"""Unitary-design diagnostics for linear optics on the symmetric subspace.

``lift_to_fock`` maps ``u`` in U(m) to its action on ``n`` photons, a
``d x d`` unitary with ``d = C(n+m-1, n)``.  Frame potentials of ensembles of
such lifts, with and without interleaved SNAP gates, measure how close the
ensemble is to a unitary design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fock import fock_basis, fock_dimension

N_BATCHES = 20
ZERO_TOL = 1e-10


def haar_unitary(m: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random unitary (or a stack of ``size`` of them) via QR with phase fixing."""
    if m < 1:
        raise ValueError("m must be positive")
    shape = (m, m) if size is None else (size, m, m)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def _symmetrizer(n: int, m: int) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Columns: normalized symmetric vectors in (C^m)^{tensor n} for each Fock state."""
    basis = fock_basis(n, m)
    S = np.zeros((m**n, len(basis)), dtype=complex)
    index = {occ: i for i, occ in enumerate(basis)}
    for flat in range(m**n):
        word = np.unravel_index(flat, (m,) * n) if n else ()
        occ = [0] * m
        for w in word:
            occ[w] += 1
        S[flat, index[tuple(occ)]] = 1.0
    S /= np.linalg.norm(S, axis=0)
    return S, basis


_SYM_CACHE: dict[tuple[int, int], tuple[np.ndarray, list]] = {}


def symmetrizer(n: int, m: int):
    key = (n, m)
    if key not in _SYM_CACHE:
        fock_dimension(n, m)
        if m**n > 2**22:
            raise OverflowError(f"tensor space m^n = {m**n} too large for dense lifting")
        _SYM_CACHE[key] = _symmetrizer(n, m)
    return _SYM_CACHE[key]


def lift_to_fock(u: np.ndarray, n: int) -> np.ndarray:
    """Matrix of ``u`` on ``n`` photons in the basis of :func:`fock_basis`.

    Computed as ``S^T u^{tensor n} S`` with ``S`` the normalized symmetrizer;
    entry ``[out, in]`` is ``<out|phi(u)|in>``.  Accepts a stack of unitaries.
    """
    u = np.asarray(u, dtype=complex)
    if n < 1:
        raise ValueError("photon number must be at least 1")
    m = u.shape[-1]
    S, _ = symmetrizer(n, m)
    batch = u.shape[:-2]
    uu = u.reshape((-1, m, m))
    d = S.shape[1]
    # apply u to each tensor factor of the symmetric columns
    t = S.T.reshape((1, d) + (m,) * n).repeat(uu.shape[0], axis=0)
    for axis in range(n):
        t = np.moveaxis(np.einsum("bij,bcj...->bci...", uu, np.moveaxis(t, 2 + axis, 2)), 2, 2 + axis)
    t = t.reshape(uu.shape[0], d, m**n)
    out = np.einsum("fa,bcf->bac", S.conj(), t)
    return out.reshape(batch + (d, d))


def snap_diagonal(n: int, m: int, mode: int, k: int, theta: float) -> np.ndarray:
    """Diagonal of the SNAP gate ``exp(i theta |k><k|_mode)`` on ``n`` photons."""
    return np.array([np.exp(1j * theta) if occ[mode] == k else 1.0 for occ in fock_basis(n, m)], dtype=complex)


def ns_diagonal(n: int, m: int, mode: int) -> np.ndarray:
    """The non-linear sign gate: phase -1 when all ``n`` photons sit in ``mode``."""
    return snap_diagonal(n, m, mode, n, math.pi)


@dataclass(frozen=True)
class FramePotentialEstimate:
    t: int
    mean: float
    stderr: float
    samples: int

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.stderr


def frame_potential(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    t: int,
    samples: int,
    rng: np.random.Generator,
    batches: int = N_BATCHES,
) -> FramePotentialEstimate:
    """Monte Carlo mean of ``|Tr(U^dag V)|^(2t)`` over independent pairs.

    ``sampler(rng, count)`` returns a ``(count, d, d)`` stack.  The standard
    error is from batch means over ``batches`` equal batches.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    if t < 1:
        raise ValueError("design order t must be positive")
    batches = max(1, min(batches, samples))
    sizes = [samples // batches + (1 if i < samples % batches else 0) for i in range(batches)]
    means = []
    values = []
    for size in sizes:
        u = sampler(rng, size)
        v = sampler(rng, size)
        tr = np.einsum("bij,bij->b", u.conj(), v)
        x = np.abs(tr) ** (2 * t)
        values.append(x)
        means.append(x.mean())
    allv = np.concatenate(values)
    mean = float(allv.mean())
    if batches > 1:
        stderr = float(np.std(means, ddof=1) / math.sqrt(batches))
    else:
        stderr = float(allv.std(ddof=1) / math.sqrt(allv.size))
    return FramePotentialEstimate(t, mean, stderr, samples)


def haar_sampler(d: int):
    return lambda rng, count: haar_unitary(d, rng, count)


def lo_sampler(n: int, m: int):
    """Lifted Haar-random linear optics on ``n`` photons in ``m`` modes."""
    return lambda rng, count: lift_to_fock(haar_unitary(m, rng, count), n)


def lo_ns_sampler(n: int, m: int, n_ns: int):
    """``U_1 NS U_2 NS ... NS U_{N+1}`` with Haar ``U_i`` and uniform NS modes."""
    diags = np.stack([ns_diagonal(n, m, s) for s in range(m)])

    def sample(rng, count):
        out = lift_to_fock(haar_unitary(m, rng, count), n)
        for _ in range(n_ns):
            modes = rng.integers(0, m, size=count)
            nxt = lift_to_fock(haar_unitary(m, rng, count), n)
            out = np.einsum("bij,bj,bjk->bik", out, diags[modes], nxt)
        return out

    return sample


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    m: int
    n_ns: int
    samples: int
    seed: int = 0

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError("sample count must be at least 2")
        if self.n_ns < 0:
            raise ValueError("NS-gate count must be non-negative")
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 and m >= 1")


def welch_ratio(spec: EnsembleSpec, rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Second frame potential of the LO+NS ensemble divided by 2, with its stderr."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    est = frame_potential(lo_ns_sampler(spec.n, spec.m, spec.n_ns), 2, spec.samples, rng)
    return est.mean / 2.0, est.stderr / 2.0


def welch_sweep(n: int, m: int, ns_values: Sequence[int], samples: int, seed: int, workers: int = 1) -> list[dict]:
    """Welch ratios for each NS count, each with an independent spawned stream."""
    seqs = np.random.SeedSequence(seed).spawn(len(ns_values))

    def task(args):
        n_ns, ss = args
        ratio, err = welch_ratio(EnsembleSpec(n, m, n_ns, samples), np.random.default_rng(ss))
        return {"n": n, "m": m, "N_NS": n_ns, "ratio": ratio, "stderr": err}

    jobs = list(zip(ns_values, seqs))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(task, jobs))
    return [task(j) for j in jobs]


# ---------------------------------------------------------------------------
# two-copy universality witness (m = 2)


def two_mode_basis(n: int) -> list[tuple[int, int]]:
    """Basis ``(n,0), (n-1,1), ..., (0,n)`` of ``n`` photons in two modes."""
    return [(n - a, a) for a in range(n + 1)]


def zeta_vector(n: int) -> np.ndarray:
    """``sum_a (-1)^a |a, n-a> (x) |n-a, a>`` in the two-copy space, unnormalized.

    Indices follow :func:`two_mode_basis` in each copy (row-major Kronecker).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    d = n + 1
    z = np.zeros(d * d, dtype=complex)
    for a in range(n + 1):
        i = n - a  # index of |a, n-a>
        j = a  # index of |n-a, a>
        z[i * d + j] += (-1) ** a
    return z


def snap_two_copy(n: int, k: int, theta: float) -> np.ndarray:
    """Diagonal of ``S_{k,0}(theta) (x) S_{k,0}(theta)`` on the two-copy space."""
    s = np.array([np.exp(1j * theta) if occ[0] == k else 1.0 for occ in two_mode_basis(n)])
    return np.kron(s, s)


def zeta_difference(n: int, k: int, theta: float) -> np.ndarray:
    """Direct ``S^{(x)2} zeta - zeta``."""
    z = zeta_vector(n)
    return snap_two_copy(n, k, theta) * z - z


def zeta_difference_closed_form(n: int, k: int, theta: float) -> np.ndarray:
    """Branch formula for ``S^{(x)2} zeta - zeta``.

    For ``n != 2k`` only the terms with ``a = k`` or ``a = n - k`` pick up one
    factor ``e^{i theta}``; for ``n = 2k`` the single term ``a = k`` picks up
    ``e^{2 i theta}``.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    d = n + 1
    out = np.zeros(d * d, dtype=complex)

    def put(a, c):
        out[(n - a) * d + a] += c * (-1) ** a

    if n == 2 * k:
        put(k, np.exp(2j * theta) - 1)
    else:
        for a in (k, n - k):
            put(a, np.exp(1j * theta) - 1)
    return out


def snap_universality_check(n: int, k: int, theta: float) -> tuple[float, str]:
    """Spectral norm of ``[V (x) V, |zeta><zeta|]`` and a verdict.

    The verdict is ``"nonzero"`` above ``1e-10``.  A vanishing commutator is
    ``"zero"`` unless ``theta`` is not a multiple of ``2 pi`` while ``n = 2k``
    and ``e^{2 i theta} = 1``: there the test cannot decide, hence
    ``"inconclusive"``.
    """
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need n >= 1 and 0 <= k <= n, got n={n}, k={k}")
    z = zeta_vector(n)
    v = snap_two_copy(n, k, theta)
    proj = np.outer(z, z.conj())
    comm = v[:, None] * proj - proj * v[None, :]
    norm = float(np.linalg.norm(comm, 2))
    if norm > ZERO_TOL:
        return norm, "nonzero"
    trivial = abs(np.exp(1j * theta) - 1) < ZERO_TOL
    if not trivial and n == 2 * k:
        return norm, "inconclusive"
    return norm, "zero"
