"""Independent reference computations used by the tests.

These deliberately avoid the package's own algorithms: permanents by
expansion over permutations, dense Kraus operators for loss, and
first-quantized formulas for two-photon interference.
"""

import itertools
import math

import numpy as np


def permanent(a):
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    return complex(sum(np.prod([a[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n))))


def mode_list(occ):
    """Mode index of each photon, e.g. (2, 0, 1) -> [0, 0, 2]."""
    return [j for j, n in enumerate(occ) for _ in range(n)]


def fock_amplitude(u, occ_in, occ_out):
    """<out|phi(U)|in> = perm(U[out, in]) / sqrt(prod n_in! prod n_out!)."""
    u = np.asarray(u, dtype=complex)
    sub = u[np.ix_(mode_list(occ_out), mode_list(occ_in))]
    norm = math.prod(math.factorial(v) for v in occ_in) * math.prod(math.factorial(v) for v in occ_out)
    return permanent(sub) / math.sqrt(norm)


def loss_kraus(n_max, eta):
    """Kraus operators A_k of single-mode loss on the truncated space 0..n_max."""
    ops = []
    for k in range(n_max + 1):
        a = np.zeros((n_max + 1, n_max + 1))
        for n in range(k, n_max + 1):
            a[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
        ops.append(a)
    return ops


def apply_kraus(ops, rho):
    return sum(a @ rho @ a.conj().T for a in ops)


def random_unitary(m, rng):
    z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def hom_coincidence(overlap_sq):
    """Two-photon coincidence on a balanced splitter: (1 - |<xi|xi'>|^2) / 2."""
    return (1.0 - overlap_sq) / 2.0
