"""Coherent-state rank representation of photonic states.

A state is a finite superposition ``sum_i c_i |alpha_i>`` of multi-mode
coherent states.  Linear optics maps ``alpha -> U alpha`` and so preserves
the rank; Fock states are approximated with a root-of-unity construction
whose error vanishes as a power of the radius ``eps``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import check_unitary

MAX_N = 8
DEDUP_TOL = 1e-12
NORM_DEFICIT_TOL = 1e-6
DEFAULT_EPS = 0.1


class PrecisionError(ValueError):
    """Raised when a requested approximation cannot be represented accurately."""


def _log_sqrt_factorial(n) -> np.ndarray:
    from scipy.special import gammaln

    return 0.5 * gammaln(np.asarray(n, dtype=float) + 1.0)


@dataclass(frozen=True)
class CoherentRankState:
    """``sum_i coeffs[i] |alphas[i]>`` on ``alphas.shape[1]`` modes.

    ``photon_number`` is an optional hint (the number of photons being
    approximated) used as the default sampling cutoff.
    """

    coeffs: np.ndarray
    alphas: np.ndarray
    photon_number: int | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        a = np.asarray(self.alphas, dtype=complex)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.shape[0] != c.shape[0]:
            raise ValueError(f"{c.shape[0]} coefficients for {a.shape[0]} displacement vectors")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a))):
            raise ValueError("coefficients and displacements must be finite")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "alphas", a)

    @property
    def rank(self) -> int:
        return self.coeffs.shape[0]

    @property
    def m(self) -> int:
        return self.alphas.shape[1]

    def __len__(self) -> int:
        return self.rank

    def dedup(self, tol: float = DEDUP_TOL) -> "CoherentRankState":
        """Merge terms whose displacement vectors agree within ``tol``."""
        keep_a: list[np.ndarray] = []
        keep_c: list[complex] = []
        order = np.lexsort(np.round(np.concatenate([self.alphas.real, self.alphas.imag], axis=1).T, 9)[::-1])
        for i in order:
            a = self.alphas[i]
            if keep_a and np.max(np.abs(keep_a[-1] - a)) <= tol:
                keep_c[-1] += self.coeffs[i]
                continue
            # fall back to a full scan for near-ties that rounding split apart
            for j in range(len(keep_a) - 1, max(-1, len(keep_a) - 4), -1):
                if np.max(np.abs(keep_a[j] - a)) <= tol:
                    keep_c[j] += self.coeffs[i]
                    break
            else:
                keep_a.append(a)
                keep_c.append(self.coeffs[i])
        return CoherentRankState(np.array(keep_c), np.array(keep_a).reshape(len(keep_a), self.m), self.photon_number)

    def scaled(self, factor: complex) -> "CoherentRankState":
        return CoherentRankState(self.coeffs * factor, self.alphas, self.photon_number)

    def norm_squared(self) -> float:
        return float(inner_product(self, self).real)

    def normalize(self) -> "CoherentRankState":
        return self.scaled(1.0 / math.sqrt(self.norm_squared()))

    def fock_amplitude(self, occupation: Sequence[int]) -> complex:
        """<n|psi> = sum_i c_i prod_j exp(-|a_ij|^2/2) a_ij^{n_j} / sqrt(n_j!)."""
        n = np.asarray(occupation, dtype=int)
        if n.shape != (self.m,):
            raise ValueError(f"occupation has length {n.shape}, state has {self.m} modes")
        return complex(np.sum(self.coeffs * _fock_factors(self.alphas, n)))


def _fock_factors(alphas: np.ndarray, n: np.ndarray) -> np.ndarray:
    """prod_j <n_j|alpha_j> for each row of ``alphas``."""
    a = alphas
    with np.errstate(divide="ignore"):
        powers = np.where(n == 0, 1.0 + 0j, a ** n)
    return np.prod(np.exp(-0.5 * np.abs(a) ** 2) * powers * np.exp(-_log_sqrt_factorial(n)), axis=1)


def coherent_state(alpha: Sequence[complex]) -> CoherentRankState:
    return CoherentRankState(np.ones(1), np.asarray(alpha, dtype=complex).reshape(1, -1))


def tensor(*states: CoherentRankState) -> CoherentRankState:
    """Product state; ranks multiply and modes concatenate left to right."""
    coeffs = np.ones(1, dtype=complex)
    alphas = np.zeros((1, 0), dtype=complex)
    photons: int | None = 0
    for s in states:
        coeffs = np.kron(coeffs, s.coeffs)
        alphas = np.concatenate(
            [np.repeat(alphas, s.rank, axis=0), np.tile(s.alphas, (alphas.shape[0], 1))], axis=1
        )
        photons = None if photons is None or s.photon_number is None else photons + s.photon_number
    return CoherentRankState(coeffs, alphas, photons)


def fock_to_coherent(c: Sequence[complex], eps: float = DEFAULT_EPS, *, normalize: bool = True) -> CoherentRankState:
    """Single-mode decomposition of ``sum_n c[n] |n>`` into ``N+1`` coherent states.

    Uses ``alpha_k = eps w^k`` with ``w = exp(2 pi i/(N+1))`` and
    ``c_k = exp(eps^2/2)/(N+1) sum_n sqrt(n!) c_n eps^-n w^-nk``.  Photon
    numbers ``n`` are reproduced exactly apart from aliases at
    ``n + j(N+1)``, which carry relative weight ``O(eps^(2(N+1)))``.  The
    vacuum maps to the single exact term ``|0>``.
    """
    amps = np.asarray(c, dtype=complex).reshape(-1)
    nz = np.nonzero(np.abs(amps) > 0)[0]
    if nz.size == 0:
        raise ValueError("cannot decompose the zero vector")
    n_max = int(nz[-1])
    if n_max == 0:
        return CoherentRankState(amps[:1], np.zeros((1, 1)), 0)
    if n_max > MAX_N:
        raise PrecisionError(f"photon number {n_max} exceeds the double-precision cap N <= {MAX_N}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = np.arange(n_max + 1)
    growth = np.max(np.abs(amps[: n_max + 1]) * np.exp(_log_sqrt_factorial(n)) * float(eps) ** (-n))
    if growth * np.finfo(float).eps > NORM_DEFICIT_TOL:
        raise PrecisionError(
            f"eps={eps} is too small for N={n_max}: coefficients of size {growth:.3e} lose all precision"
        )
    P = n_max + 1
    k = np.arange(P)
    w = np.exp(2j * np.pi / P)
    weights = amps[:P] * np.exp(_log_sqrt_factorial(n)) * float(eps) ** (-n)
    coeffs = math.exp(eps**2 / 2) / P * (w ** (-np.outer(k, n)) @ weights)
    state = CoherentRankState(coeffs, (eps * w**k).reshape(-1, 1), n_max if nz.size == 1 else None)
    return state.normalize() if normalize else state


def fock_product(occupation: Sequence[int], eps: float = DEFAULT_EPS) -> CoherentRankState:
    """Decomposition of ``|n_1, ..., n_m>``, of rank ``prod_j (n_j + 1)``."""
    parts = []
    for n in occupation:
        c = np.zeros(int(n) + 1, dtype=complex)
        c[-1] = 1.0
        parts.append(fock_to_coherent(c, eps))
    out = tensor(*parts)
    return CoherentRankState(out.coeffs, out.alphas, int(sum(occupation)))


def alias_infidelity(N: int, eps: float, terms: int = 6) -> float:
    """Closed-form infidelity of :func:`fock_to_coherent` applied to ``|N>``.

    The unnormalized decomposition has amplitude ``sqrt(N!/m!) eps^(m-N)`` on
    ``m = N + j(N+1)`` for ``j >= 0`` and zero elsewhere.
    """
    tail = sum(
        math.exp(math.lgamma(N + 1) - math.lgamma(N + j * (N + 1) + 1)) * eps ** (2 * j * (N + 1))
        for j in range(1, terms + 1)
    )
    return tail / (1.0 + tail)


def fock_infidelity(state: CoherentRankState, target: int, cutoff: int | None = None) -> float:
    """Single-mode infidelity with ``|target>``, summed over the other Fock components.

    Summing the small complementary weights avoids the cancellation in
    ``1 - |<N|psi>|^2``.
    """
    if state.m != 1:
        raise ValueError("fock_infidelity expects a single-mode state")
    cutoff = 6 * (target + 1) + target if cutoff is None else cutoff
    weights = np.array([abs(state.fock_amplitude((m,))) ** 2 for m in range(cutoff + 1)])
    return float((weights.sum() - weights[target]) / weights.sum())


# ---------------------------------------------------------------------------
# evolution and overlaps


def apply_lo_coherent(u: np.ndarray, s: CoherentRankState) -> CoherentRankState:
    """Linear optics: every displacement vector maps to ``u @ alpha``."""
    u = check_unitary(u)
    if u.shape[0] != s.m:
        raise ValueError(f"transfer matrix of size {u.shape[0]} for a {s.m}-mode state")
    return CoherentRankState(s.coeffs, s.alphas @ u.T, s.photon_number)


def overlap_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """<a_i|b_j> for rows of ``a`` and ``b``."""
    expo = (
        -0.5 * np.sum(np.abs(a) ** 2, axis=1)[:, None]
        - 0.5 * np.sum(np.abs(b) ** 2, axis=1)[None, :]
        + a.conj() @ b.T
    )
    return np.exp(expo)


def coherent_overlap(alpha: Sequence[complex], beta: Sequence[complex]) -> complex:
    """prod_j exp(-|a_j - b_j|^2/2 - i Im(a_j conj(b_j)))."""
    a = np.asarray(alpha, dtype=complex).reshape(-1)
    b = np.asarray(beta, dtype=complex).reshape(-1)
    return complex(np.exp(np.sum(-0.5 * np.abs(a - b) ** 2 - 1j * np.imag(a * b.conj()))))


def inner_product(s1: CoherentRankState, s2: CoherentRankState) -> complex:
    """<s1|s2> by the double sum over terms, O(m k1 k2)."""
    if s1.m != s2.m:
        raise ValueError(f"states have {s1.m} and {s2.m} modes")
    return complex(s1.coeffs.conj() @ overlap_matrix(s1.alphas, s2.alphas) @ s2.coeffs)


# ---------------------------------------------------------------------------
# exact transition amplitudes and permanents


def _phase_vectors(occ: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Root-of-unity vectors p_i (zero on vacuum modes) and their coefficient phases."""
    grids = []
    for n in occ:
        grids.append(range(n + 1) if n > 0 else range(1))
    ks = np.array(list(itertools.product(*grids)), dtype=float).reshape(-1, len(occ))
    occ_arr = np.asarray(occ, dtype=float)
    P = occ_arr + 1.0
    angles = 2 * np.pi * ks / P
    vecs = np.where(occ_arr > 0, np.exp(1j * angles), 0.0)
    phases = np.exp(-1j * np.sum(occ_arr * angles, axis=1))
    return vecs, phases


def transition_amplitude_exact(u: np.ndarray, n1: Sequence[int], n2: Sequence[int]) -> complex:
    """<n2| U |n1> from the eps-free root-of-unity formula.

    ``prod_j sqrt(n1_j!)/(n1_j+1) / prod_l sqrt(n2_l!)`` times
    ``sum_i phase_i prod_l (U p_i)_l^{n2_l}``, where ``p_i`` runs over the
    root-of-unity vectors of ``n1``.  The side with the smaller rank is
    expanded, using ``<n2|U|n1> = conj(<n1|U^dag|n2>)``.
    """
    u = np.asarray(u, dtype=complex)
    n1 = tuple(int(v) for v in n1)
    n2 = tuple(int(v) for v in n2)
    if sum(n1) != sum(n2):
        raise ValueError(f"photon numbers differ: {sum(n1)} vs {sum(n2)}")
    if u.shape != (len(n1), len(n1)) or len(n1) != len(n2):
        raise ValueError("transfer matrix and occupations disagree in mode count")
    rank1 = math.prod(v + 1 for v in n1)
    rank2 = math.prod(v + 1 for v in n2)
    if rank2 < rank1:
        return transition_amplitude_exact(u.conj().T, n2, n1).conjugate()
    vecs, phases = _phase_vectors(n1)
    out = vecs @ u.T
    powers = np.prod(np.where(np.asarray(n2) > 0, out ** np.asarray(n2), 1.0), axis=1)
    log_pref = float(np.sum(_log_sqrt_factorial(n1)) - np.sum(np.log(np.asarray(n1) + 1.0)) - np.sum(_log_sqrt_factorial(n2)))
    return complex(math.exp(log_pref) * np.sum(phases * powers))


def glynn_permanent(a: np.ndarray) -> complex:
    """Permanent by Glynn's formula with the first sign fixed, O(n^2 2^(n-1)).

    ``perm(A) = 2^-(n-1) sum_{d, d_1 = 1} (prod_k d_k) prod_j sum_i d_i a_ij``.
    The free signs are split into a high block, looped over, and a low block
    handled with one vectorized product.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    a = a.astype(complex)
    if n == 1:
        return complex(a[0, 0])
    free = n - 1
    low = free // 2
    high = free - low

    def sign_block(bits: int) -> np.ndarray:
        idx = np.arange(2**bits)[:, None]
        return 1 - 2 * ((idx >> np.arange(bits)[None, :]) & 1)

    d_low = sign_block(low).astype(float)
    d_high = sign_block(high).astype(float)
    rows_low = a[1 : 1 + low]
    rows_high = a[1 + low :]
    part_low = d_low @ rows_low if low else np.zeros((1, n), dtype=complex)
    part_high = (d_high @ rows_high if high else np.zeros((1, n), dtype=complex)) + a[0]
    sign_low = np.prod(d_low, axis=1) if low else np.ones(1)
    sign_high = np.prod(d_high, axis=1) if high else np.ones(1)
    total = 0j
    for h in range(part_high.shape[0]):
        prods = np.prod(part_low + part_high[h], axis=1)
        total += sign_high[h] * np.dot(sign_low, prods)
    return complex(total / 2**free)


def permanent_bruteforce(a: np.ndarray) -> complex:
    """Permanent by expansion over all permutations (n! terms)."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    rows = np.arange(n)
    return complex(sum(np.prod(a[rows, list(p)]) for p in itertools.permutations(range(n))))


# ---------------------------------------------------------------------------
# non-Gaussian operations


@dataclass(frozen=True)
class Monomial:
    """``coeff * prod_j (a_j^dag)^create[j] a_j^annihilate[j]`` (normally ordered)."""

    coeff: complex
    create: tuple[int, ...]
    annihilate: tuple[int, ...]


def number_operator(mode: int, m: int) -> list[Monomial]:
    e = tuple(int(j == mode) for j in range(m))
    return [Monomial(1.0, e, e)]


def creation_operator(mode: int, m: int, power: int = 1) -> list[Monomial]:
    e = tuple(power if j == mode else 0 for j in range(m))
    return [Monomial(1.0, e, (0,) * m)]


def apply_creation_polynomial(
    op: Sequence[Monomial], s: CoherentRankState, p: int | Sequence[int] | None = None, delta: float | None = None
) -> CoherentRankState:
    """Apply a normally ordered polynomial in creation and annihilation operators.

    Annihilators act as ``alpha^q``.  Creation powers are derivatives of the
    unnormalized coherent state ``exp(alpha a^dag)|0>``, evaluated on a
    root-of-unity stencil ``alpha + delta w^k`` of ``p_j + 1`` points per
    mode, with ``p_j`` the declared maximum creation power on mode ``j``.
    All monomials share the stencil, so the rank grows by ``prod_j (p_j+1)``
    (a factor ``p + 1`` when only one mode carries creation operators).
    The default ``delta = eps_machine^(1/(2 max_p + 1))`` balances the
    truncation error ``O(delta^(p+1))`` against cancellation.
    """
    m = s.m
    op = list(op)
    if not op:
        raise ValueError("empty operator")
    for mono in op:
        if len(mono.create) != m or len(mono.annihilate) != m:
            raise ValueError(f"monomial {mono} does not match {m} modes")
    needed = [max(mono.create[j] for mono in op) for j in range(m)]
    if p is None:
        powers = needed
    elif isinstance(p, (int, np.integer)):
        powers = [int(p) if needed[j] else 0 for j in range(m)]
    else:
        powers = [int(x) for x in p]
    if any(powers[j] < needed[j] for j in range(m)):
        raise ValueError(f"declared creation powers {powers} below operator content {needed}")
    pmax = max(powers)
    if delta is None:
        delta = np.finfo(float).eps ** (1.0 / (2 * pmax + 1)) if pmax else 1.0
    stencil_modes = [j for j in range(m) if powers[j] > 0]
    sizes = [powers[j] + 1 for j in stencil_modes]
    offsets = list(itertools.product(*[range(P) for P in sizes])) or [()]

    new_a = []
    new_c = []
    base_norm = np.exp(-0.5 * np.sum(np.abs(s.alphas) ** 2, axis=1))
    for ks in offsets:
        shift = np.zeros(m, dtype=complex)
        for j, k, P in zip(stencil_modes, ks, sizes):
            shift[j] = delta * np.exp(2j * np.pi * k / P)
        beta = s.alphas + shift
        weight = np.zeros(s.rank, dtype=complex)
        for mono in op:
            w = mono.coeff * np.prod(np.where(np.asarray(mono.annihilate) > 0, s.alphas ** np.asarray(mono.annihilate), 1.0), axis=1)
            stencil = 1.0 + 0j
            for j, k, P in zip(stencil_modes, ks, sizes):
                q = mono.create[j]
                stencil *= math.factorial(q) / (P * delta**q) * np.exp(-2j * np.pi * q * k / P)
            weight += w * stencil
        # exp(alpha a^dag)|0> = exp(|alpha|^2/2) |alpha>
        new_c.append(s.coeffs * base_norm * weight * np.exp(0.5 * np.sum(np.abs(beta) ** 2, axis=1)))
        new_a.append(beta)
    return CoherentRankState(np.concatenate(new_c), np.concatenate(new_a), None)


def apply_snap_coherent(s: CoherentRankState, mode: int, k: int, theta: float, cutoff: int | None = None) -> CoherentRankState:
    """SNAP gate ``1 + (e^{i theta} - 1)|k><k|`` on one mode.

    The projector is the phase-rotation average
    ``(1/(n+1)) sum_j w^{-jk} R(2 pi j/(n+1))`` with ``R(phi)|a> = |a e^{i phi}>``,
    exact on components with at most ``n = cutoff`` photons in ``mode``.
    The rank grows by a factor ``n + 1``.
    """
    if cutoff is None:
        cutoff = s.photon_number
    if cutoff is None:
        raise ValueError("SNAP on a coherent-rank state needs a photon-number cutoff")
    if not 0 <= mode < s.m:
        raise IndexError(f"mode {mode} out of range for {s.m} modes")
    if not 0 <= k <= cutoff:
        raise ValueError(f"SNAP photon count {k} outside 0..{cutoff}")
    factor = np.exp(1j * theta) - 1.0
    if abs(factor) < 1e-15:
        return s
    P = cutoff + 1
    coeffs = []
    alphas = []
    for j in range(P):
        rot = np.exp(2j * np.pi * j / P)
        a = s.alphas.copy()
        a[:, mode] *= rot
        c = s.coeffs * factor / P * np.exp(-2j * np.pi * j * k / P)
        if j == 0:
            c = c + s.coeffs
        coeffs.append(c)
        alphas.append(a)
    return CoherentRankState(np.concatenate(coeffs), np.concatenate(alphas), s.photon_number)


# ---------------------------------------------------------------------------
# sampling


def _fock_column(alpha: np.ndarray, cutoff: int) -> np.ndarray:
    """<n|alpha> for n = 0..cutoff, shape (cutoff+1, k)."""
    n = np.arange(cutoff + 1)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(n == 0, 1.0 + 0j, alpha[None, :] ** n)
    return np.exp(-0.5 * np.abs(alpha[None, :]) ** 2) * vals * np.exp(-_log_sqrt_factorial(n))


def sample_fock_measurement(
    s: CoherentRankState,
    rng: np.random.Generator | int | None = None,
    *,
    shots: int | None = None,
    cutoff: int | None = None,
    check_norm: bool = True,
):
    """Photon-counting samples by mode-by-mode conditional probabilities.

    Each mode's outcome ``n`` in ``0..cutoff`` is drawn from its conditional
    distribution given earlier outcomes; later modes enter through overlaps
    of the remaining displacement components.  Raises
    :class:`PrecisionError` if more than ``1e-6`` of the state's weight lies
    beyond ``cutoff``.  Returns one tuple, or a list of ``shots`` tuples.
    """
    rng = np.random.default_rng(rng)
    if cutoff is None:
        cutoff = s.photon_number
    if cutoff is None:
        raise ValueError("sampling needs a photon-number cutoff")
    norm = s.norm_squared()
    if check_norm and abs(norm - 1.0) > NORM_DEFICIT_TOL:
        raise PrecisionError(f"state norm {norm:.3e} is not 1; normalize first")
    m = s.m
    a = s.alphas
    # overlaps of the not-yet-measured tail, per mode
    per_mode = np.exp(
        -0.5 * np.abs(a)[:, None, :] ** 2 - 0.5 * np.abs(a)[None, :, :] ** 2 + a.conj()[:, None, :] * a[None, :, :]
    )
    tails = np.ones((m + 1,) + per_mode.shape[:2], dtype=complex)
    for j in range(m - 1, -1, -1):
        tails[j] = tails[j + 1] * per_mode[:, :, j]
    cols = [_fock_column(a[:, j], cutoff) for j in range(m)]
    base = np.outer(s.coeffs.conj(), s.coeffs)

    def one() -> tuple[int, ...]:
        w = base
        out = []
        for j in range(m):
            f = cols[j]
            probs = np.einsum("ni,ij,nj->n", f.conj(), w * tails[j + 1], f).real
            mass = float(np.einsum("ij,ij->", w, tails[j]).real)
            if check_norm and mass - probs.sum() > NORM_DEFICIT_TOL * max(mass, 1e-300) + 1e-15:
                raise PrecisionError(
                    f"{mass - probs.sum():.3e} of the weight lies above cutoff {cutoff} in mode {j}"
                )
            probs = np.clip(probs, 0.0, None)
            n = int(rng.choice(cutoff + 1, p=probs / probs.sum()))
            out.append(n)
            w = w * np.outer(f[n].conj(), f[n])
        return tuple(out)

    if shots is None:
        return one()
    return [one() for _ in range(int(shots))]


def fock_probabilities(s: CoherentRankState, cutoff: int) -> dict[tuple[int, ...], float]:
    """All photon-counting probabilities with at most ``cutoff`` photons per mode."""
    out = {}
    for occ in itertools.product(range(cutoff + 1), repeat=s.m):
        out[occ] = abs(s.fock_amplitude(occ)) ** 2
    return out
