"""Sparse Fock-basis states, linear-optical evolution and photon counting.

A state lives on ``n_modes`` physical modes, each carrying ``n_internal``
internal copies (internal index 0 is the ideal photon state).  Occupation
tuples are laid out physical-major with the internal index varying fastest,
so the full mode index of ``(physical p, internal c)`` is ``p * n_internal + c``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

Occupation = tuple[int, ...]

PRUNE_TOL = 1e-14
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10
INDEX_LIMIT = 2**63 - 1

# a^dag -> (a^dag + b^dag)/sqrt2, b^dag -> (a^dag - b^dag)/sqrt2; the second
# mode receives the phase.
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)


class DimensionError(ValueError):
    """Raised when mode counts or matrix shapes do not line up."""


class NotUnitaryError(ValueError):
    """Raised when a transfer matrix fails the unitarity check."""


def fock_dimension(n: int, m: int, limit: int = INDEX_LIMIT) -> int:
    """Number of Fock states of ``n`` photons in ``m`` modes, C(n+m-1, n).

    Raises ``OverflowError`` when the count exceeds ``limit`` (by default the
    largest signed 64-bit integer, since dense routines index with int64).
    """
    if n < 0 or m < 1:
        raise ValueError(f"need n >= 0 and m >= 1, got n={n}, m={m}")
    d = math.comb(n + m - 1, n)
    if d > limit:
        raise OverflowError(f"Fock dimension C({n + m - 1},{n}) = {d} exceeds {limit}")
    return d


def fock_basis(n: int, m: int) -> list[Occupation]:
    """All occupation tuples of ``n`` photons in ``m`` modes.

    Ordered reverse-lexicographically, so ``(n, 0, ..., 0)`` comes first and
    ``(0, ..., 0, n)`` last.
    """
    fock_dimension(n, m)

    def rec(remaining: int, modes: int) -> Iterator[Occupation]:
        if modes == 1:
            yield (remaining,)
            return
        for first in range(remaining, -1, -1):
            for rest in rec(remaining - first, modes - 1):
                yield (first,) + rest

    return list(rec(n, m))


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"transfer matrix must be square, got shape {u.shape}")
    defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if defect > tol:
        raise NotUnitaryError(f"matrix is not unitary: max |U^dag U - I| = {defect:.3e}")
    return u


class PureState:
    """Sparse pure state at fixed total photon number.

    Parameters
    ----------
    amplitudes : mapping
        Occupation tuple (length ``n_modes * n_internal``) to complex amplitude.
    n_modes : int
        Number of physical modes.
    n_internal : int
        Number of internal copies per physical mode.
    normalized : bool
        If true the squared norm is checked against 1 within ``NORM_TOL``.
    """

    __slots__ = ("amplitudes", "n_modes", "n_internal", "photon_number", "normalized")

    def __init__(
        self,
        amplitudes: Mapping[Occupation, complex],
        n_modes: int,
        n_internal: int = 1,
        *,
        normalized: bool = True,
        prune: float = PRUNE_TOL,
    ):
        if n_modes < 1 or n_internal < 1:
            raise DimensionError("need at least one physical mode and one internal copy")
        width = n_modes * n_internal
        amps: dict[Occupation, complex] = {}
        photon_number = None
        for key, amp in amplitudes.items():
            key = tuple(int(v) for v in key)
            if len(key) != width:
                raise DimensionError(f"occupation {key} has length {len(key)}, expected {width}")
            if min(key) < 0:
                raise ValueError(f"negative occupation in {key}")
            n = sum(key)
            if photon_number is None:
                photon_number = n
            elif n != photon_number:
                raise ValueError(f"mixed photon numbers {photon_number} and {n} in one state")
            amp = complex(amp)
            if abs(amp) > prune:
                amps[key] = amp
        self.amplitudes = amps
        self.n_modes = n_modes
        self.n_internal = n_internal
        self.photon_number = photon_number if photon_number is not None else 0
        self.normalized = normalized
        if normalized and amps:
            norm = self.norm_squared()
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state flagged normalized but has squared norm {norm!r}")

    # construction helpers -------------------------------------------------

    @classmethod
    def basis(cls, occupation: Sequence[int], n_internal: int = 1) -> "PureState":
        """Fock basis state from per-physical-mode counts, all photons ideal."""
        occ = tuple(int(v) for v in occupation)
        return cls({embed_occupation(occ, 1, n_internal): 1.0}, len(occ), n_internal)

    def _replace(self, amplitudes, *, n_modes=None, n_internal=None, normalized=None) -> "PureState":
        return PureState(
            amplitudes,
            self.n_modes if n_modes is None else n_modes,
            self.n_internal if n_internal is None else n_internal,
            normalized=self.normalized if normalized is None else normalized,
        )

    # basic algebra --------------------------------------------------------

    @property
    def total_modes(self) -> int:
        return self.n_modes * self.n_internal

    def __len__(self) -> int:
        return len(self.amplitudes)

    def __repr__(self) -> str:
        return (
            f"PureState(n={self.photon_number}, modes={self.n_modes}, "
            f"internal={self.n_internal}, terms={len(self.amplitudes)})"
        )

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(occupation), 0j)

    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalize(self) -> "PureState":
        norm = math.sqrt(self.norm_squared())
        if norm == 0.0:
            raise ZeroDivisionError("cannot normalize the zero vector")
        return self._replace({k: a / norm for k, a in self.amplitudes.items()}, normalized=True)

    def scaled(self, factor: complex) -> "PureState":
        return self._replace({k: a * factor for k, a in self.amplitudes.items()}, normalized=False)

    def inner(self, other: "PureState") -> complex:
        """<self|other>, after embedding both in a common internal registry."""
        a, b = align_internal(self, other)
        if a.n_modes != b.n_modes:
            raise DimensionError("states live on different mode counts")
        small, large = (a, b) if len(a) <= len(b) else (b, a)
        total = 0j
        for key, amp in small.amplitudes.items():
            other_amp = large.amplitudes.get(key)
            if other_amp is not None:
                total += amp.conjugate() * other_amp if small is a else other_amp.conjugate() * amp
        return total

    def physical_occupation(self, key: Occupation) -> Occupation:
        k = self.n_internal
        if k == 1:
            return key
        return tuple(sum(key[p * k:(p + 1) * k]) for p in range(self.n_modes))

    def embed_internal(self, n_internal: int) -> "PureState":
        """Re-express the state in a registry with ``n_internal`` copies."""
        if n_internal == self.n_internal:
            return self
        if n_internal < self.n_internal:
            for key in self.amplitudes:
                for p in range(self.n_modes):
                    if any(key[p * self.n_internal + c] for c in range(n_internal, self.n_internal)):
                        raise DimensionError("state occupies internal copies beyond the new registry")
        amps = {
            embed_occupation(key, self.n_internal, n_internal): a for key, a in self.amplitudes.items()
        }
        return self._replace(amps, n_internal=n_internal)

    def map_keys(self, fn, *, n_modes=None, n_internal=None) -> "PureState":
        """Apply a key relabelling (must be injective) keeping amplitudes."""
        out: dict[Occupation, complex] = defaultdict(complex)
        for key, a in self.amplitudes.items():
            out[fn(key)] += a
        return self._replace(out, n_modes=n_modes, n_internal=n_internal)

    def to_vector(self, basis: Sequence[Occupation]) -> np.ndarray:
        return np.array([self.amplitudes.get(tuple(b), 0j) for b in basis], dtype=complex)


def embed_occupation(key: Occupation, k_old: int, k_new: int) -> Occupation:
    """Move an occupation tuple from a ``k_old`` to a ``k_new`` internal registry."""
    if k_old == k_new:
        return tuple(key)
    n_modes = len(key) // k_old
    out = [0] * (n_modes * k_new)
    for p in range(n_modes):
        for c in range(k_old):
            v = key[p * k_old + c]
            if v:
                if c >= k_new:
                    raise DimensionError(f"internal index {c} exceeds registry size {k_new}")
                out[p * k_new + c] = v
    return tuple(out)


def align_internal(*states: PureState) -> list[PureState]:
    k = max(s.n_internal for s in states)
    return [s.embed_internal(k) for s in states]


def tensor(a: PureState, b: PureState) -> PureState:
    """Place ``b``'s modes after ``a``'s (left-to-right concatenation)."""
    a, b = align_internal(a, b)
    amps = {ka + kb: x * y for ka, x in a.amplitudes.items() for kb, y in b.amplitudes.items()}
    return PureState(amps, a.n_modes + b.n_modes, a.n_internal, normalized=a.normalized and b.normalized)


def superpose(terms: Iterable[tuple[complex, PureState]], *, normalize: bool = True) -> PureState:
    terms = list(terms)
    states = align_internal(*(s for _, s in terms))
    out: dict[Occupation, complex] = defaultdict(complex)
    for (c, _), s in zip(terms, states):
        for key, a in s.amplitudes.items():
            out[key] += c * a
    psi = PureState(out, states[0].n_modes, states[0].n_internal, normalized=False)
    return psi.normalize() if normalize else psi


# ---------------------------------------------------------------------------
# linear optics


def _full_transfer(u: np.ndarray, psi: PureState) -> np.ndarray:
    if u.shape[0] == psi.total_modes:
        return u
    if u.shape[0] == psi.n_modes:
        return np.kron(u, np.eye(psi.n_internal)) if psi.n_internal > 1 else u
    raise DimensionError(
        f"transfer matrix of size {u.shape[0]} does not match {psi.n_modes} physical "
        f"or {psi.total_modes} total modes"
    )


def _product_polynomial(u: np.ndarray, key: Occupation) -> dict[Occupation, complex]:
    """Expand prod_i (sum_j u_ji a_j^dag)^{n_i} as monomials in creation operators."""
    m = len(key)
    poly: dict[Occupation, complex] = {(0,) * m: 1.0 + 0j}
    for i, count in enumerate(key):
        if not count:
            continue
        column = [(j, u[j, i]) for j in range(m) if abs(u[j, i]) > 0.0]
        for _ in range(count):
            nxt: dict[Occupation, complex] = defaultdict(complex)
            for mono, c in poly.items():
                for j, uji in column:
                    lst = list(mono)
                    lst[j] += 1
                    nxt[tuple(lst)] += c * uji
            poly = nxt
    return poly


@lru_cache(maxsize=None)
def _sqrt_factorial(n: int) -> float:
    return math.sqrt(math.factorial(n))


def apply_transfer(u: np.ndarray, psi: PureState, *, check: bool = True) -> PureState:
    """Evolve ``psi`` through the linear-optical network with transfer matrix ``u``.

    Each creation operator is mapped to ``sum_j u[j, i] a_j^dag`` and the
    evolved operators are multiplied onto the vacuum; general states follow
    by linearity.  ``u`` may act on the physical modes (copied onto every
    internal copy) or on all ``n_modes * n_internal`` modes.
    """
    u = check_unitary(u) if check else np.asarray(u, dtype=complex)
    full = _full_transfer(u, psi)
    out: dict[Occupation, complex] = defaultdict(complex)
    for key, amp in psi.amplitudes.items():
        norm_in = 1.0
        for v in key:
            norm_in *= _sqrt_factorial(v)
        for mono, c in _product_polynomial(full, key).items():
            norm_out = 1.0
            for v in mono:
                norm_out *= _sqrt_factorial(v)
            out[mono] += amp * c * norm_out / norm_in
    return psi._replace(out)


def _two_mode_table(block: np.ndarray, a: int, b: int) -> np.ndarray:
    """Output amplitudes over (a+b-d, d), d = 0..a+b, for input |a, b>."""
    u00, u01, u10, u11 = block[0, 0], block[0, 1], block[1, 0], block[1, 1]
    # polynomial in y (second mode) with x implicit
    p = np.array([math.comb(a, r) * u00 ** (a - r) * u10**r for r in range(a + 1)], dtype=complex)
    q = np.array([math.comb(b, r) * u01 ** (b - r) * u11**r for r in range(b + 1)], dtype=complex)
    coeffs = np.convolve(p, q)
    n = a + b
    scale = np.array(
        [_sqrt_factorial(n - d) * _sqrt_factorial(d) for d in range(n + 1)]
    ) / (_sqrt_factorial(a) * _sqrt_factorial(b))
    return coeffs * scale


def apply_two_mode(psi: PureState, i: int, j: int, block: np.ndarray) -> PureState:
    """Apply a 2x2 transfer block between full-layout modes ``i`` and ``j``."""
    if i == j:
        raise DimensionError("beamsplitter needs two distinct modes")
    tables: dict[tuple[int, int], np.ndarray] = {}
    out: dict[Occupation, complex] = defaultdict(complex)
    for key, amp in psi.amplitudes.items():
        a, b = key[i], key[j]
        if a == 0 and b == 0:
            out[key] += amp
            continue
        table = tables.get((a, b))
        if table is None:
            table = tables[(a, b)] = _two_mode_table(block, a, b)
        lst = list(key)
        n = a + b
        for d, c in enumerate(table):
            if c == 0:
                continue
            lst[i] = n - d
            lst[j] = d
            out[tuple(lst)] += amp * c
    return psi._replace(out)


def apply_beamsplitter(psi: PureState, i: int, j: int, block: np.ndarray = HADAMARD) -> PureState:
    """Beamsplitter on physical modes ``i``, ``j``, acting on every internal copy."""
    block = check_unitary(block)
    if block.shape != (2, 2):
        raise DimensionError("beamsplitter block must be 2x2")
    _check_mode(psi, i)
    _check_mode(psi, j)
    k = psi.n_internal
    for c in range(k):
        psi = apply_two_mode(psi, i * k + c, j * k + c, block)
    return psi


def apply_phase(psi: PureState, mode: int, angle: float) -> PureState:
    """Phase shifter exp(i angle n) on a physical mode."""
    _check_mode(psi, mode)
    k = psi.n_internal
    phase = complex(math.cos(angle), math.sin(angle))
    amps = {}
    for key, a in psi.amplitudes.items():
        n = sum(key[mode * k:(mode + 1) * k])
        amps[key] = a * phase**n
    return psi._replace(amps)


def permute_modes(psi: PureState, perm: Sequence[int]) -> PureState:
    """Send physical mode ``p`` to position ``perm[p]``."""
    k = psi.n_internal
    if sorted(perm) != list(range(psi.n_modes)):
        raise DimensionError(f"{perm} is not a permutation of {psi.n_modes} modes")

    def relabel(key):
        out = [0] * len(key)
        for p, target in enumerate(perm):
            out[target * k:(target + 1) * k] = key[p * k:(p + 1) * k]
        return tuple(out)

    return psi.map_keys(relabel)


def apply_snap(psi: PureState, s: int, k: int, theta: float) -> PureState:
    """SNAP gate exp(i theta |k><k|_s): phase on terms with ``k`` photons in mode ``s``.

    With internal copies the photon count is the total over copies of ``s``.
    """
    _check_mode(psi, s)
    if k < 0 or k > psi.photon_number:
        raise ValueError(f"SNAP photon count {k} outside 0..{psi.photon_number}")
    ni = psi.n_internal
    phase = complex(math.cos(theta), math.sin(theta))
    amps = {}
    for key, a in psi.amplitudes.items():
        amps[key] = a * phase if sum(key[s * ni:(s + 1) * ni]) == k else a
    return psi._replace(amps)


def transition_amplitude_fock(u: np.ndarray, occ_in: Sequence[int], occ_out: Sequence[int]) -> complex:
    """<out| phi(U) |in> via evolution of the input basis state."""
    if sum(occ_in) != sum(occ_out):
        raise ValueError(f"photon numbers differ: {sum(occ_in)} vs {sum(occ_out)}")
    if len(occ_in) != len(occ_out):
        raise DimensionError("occupations have different lengths")
    out = apply_transfer(u, PureState.basis(occ_in))
    return out.amplitude(tuple(occ_out))


def _check_mode(psi: PureState, mode: int) -> None:
    if not 0 <= mode < psi.n_modes:
        raise IndexError(f"mode {mode} out of range for {psi.n_modes} modes")


# ---------------------------------------------------------------------------
# mixtures and measurement


@dataclass
class MixtureState:
    """Weighted mixture of pure states.

    Weights need not sum to one: heralded outputs keep their success
    probability as total weight.  Use :meth:`normalized` for a density operator.
    """

    branches: list[tuple[float, PureState]] = field(default_factory=list)

    @classmethod
    def pure(cls, psi: PureState) -> "MixtureState":
        return cls([(1.0, psi)])

    @property
    def trace(self) -> float:
        return float(sum(w for w, _ in self.branches))

    def __len__(self) -> int:
        return len(self.branches)

    def __bool__(self) -> bool:
        return bool(self.branches)

    def __iter__(self):
        return iter(self.branches)

    def normalized(self) -> "MixtureState":
        t = self.trace
        if t <= 0:
            raise ZeroDivisionError("mixture has zero weight")
        return MixtureState([(w / t, s) for w, s in self.branches])

    def scaled(self, factor: float) -> "MixtureState":
        return MixtureState([(w * factor, s) for w, s in self.branches])

    def map(self, fn) -> "MixtureState":
        """Apply a pure-state map to every branch (weights kept)."""
        return MixtureState([(w, fn(s)) for w, s in self.branches])

    def __add__(self, other: "MixtureState") -> "MixtureState":
        return MixtureState(self.branches + other.branches)

    def expectation_projector(self, target: PureState) -> float:
        """sum_b w_b |<target|psi_b>|^2 (unnormalized if the mixture is)."""
        return float(sum(w * abs(target.inner(s)) ** 2 for w, s in self.branches))

    def probability_where(self, predicate) -> float:
        """Total weight of basis terms whose occupation satisfies ``predicate``."""
        total = 0.0
        for w, s in self.branches:
            total += w * sum(abs(a) ** 2 for k, a in s.amplitudes.items() if predicate(s, k))
        return total

    def filter_terms(self, predicate) -> "MixtureState":
        """Project every branch onto the basis terms accepted by ``predicate``.

        The result is unnormalized: branch weights shrink by the kept norm.
        """
        out = []
        for w, s in self.branches:
            kept = {k: a for k, a in s.amplitudes.items() if predicate(s, k)}
            norm = sum(abs(a) ** 2 for a in kept.values())
            if norm > PRUNE_TOL**2:
                sub = PureState(kept, s.n_modes, s.n_internal, normalized=False).normalize()
                out.append((w * norm, sub))
        return MixtureState(out)


def density_matrix(mix: MixtureState, keys: Sequence[Occupation] | None = None):
    """Dense density operator over ``keys`` (default: union of supports)."""
    states = align_internal(*(s for _, s in mix.branches)) if mix.branches else []
    if keys is None:
        seen: dict[Occupation, None] = {}
        for s in states:
            for k in s.amplitudes:
                seen.setdefault(k, None)
        keys = sorted(seen)
    rho = np.zeros((len(keys), len(keys)), dtype=complex)
    for (w, _), s in zip(mix.branches, states):
        v = s.to_vector(keys)
        rho += w * np.outer(v, v.conj())
    return list(keys), rho


def trace_distance(a: MixtureState, b: MixtureState) -> float:
    """Half the trace norm of ``a - b`` over the union of both supports."""
    sa = [s for _, s in a.branches]
    sb = [s for _, s in b.branches]
    k = max(s.n_internal for s in sa + sb)
    a = MixtureState([(w, s.embed_internal(k)) for w, s in a.branches])
    b = MixtureState([(w, s.embed_internal(k)) for w, s in b.branches])
    keys = sorted({key for _, s in a.branches + b.branches for key in s.amplitudes})
    _, ra = density_matrix(a, keys)
    _, rb = density_matrix(b, keys)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(ra - rb))))


@dataclass(frozen=True)
class Outcome:
    """One photon-counting pattern with its probability and post-measurement state."""

    pattern: tuple[int, ...]
    probability: float
    state: MixtureState


def _split_measurement(psi: PureState, modes: Sequence[int]):
    modes = list(modes)
    if not modes:
        raise ValueError("empty measurement mode set")
    if len(set(modes)) != len(modes):
        raise ValueError(f"repeated modes in {modes}")
    for mode in modes:
        _check_mode(psi, mode)
    k = psi.n_internal
    measured = set(modes)
    kept_phys = [p for p in range(psi.n_modes) if p not in measured]
    kept_idx = [p * k + c for p in kept_phys for c in range(k)]
    meas_idx = [[p * k + c for c in range(k)] for p in modes]
    groups: dict[tuple, dict[tuple, dict[Occupation, complex]]] = {}
    for key, amp in psi.amplitudes.items():
        micro = tuple(key[i] for block in meas_idx for i in block)
        pattern = tuple(sum(key[i] for i in block) for block in meas_idx)
        rest = tuple(key[i] for i in kept_idx)
        groups.setdefault(pattern, {}).setdefault(micro, {})[rest] = amp
    return groups, len(kept_phys)


def _branches(micro_map, n_rest: int, n_internal: int, scale: float = 1.0):
    branches = []
    for rest_amps in micro_map.values():
        w = sum(abs(a) ** 2 for a in rest_amps.values())
        if w <= 0.0:
            continue
        if n_rest == 0:
            # nothing left unmeasured; keep a one-mode vacuum placeholder
            sub = PureState({(0,) * n_internal: 1.0}, 1, n_internal)
        else:
            sub = PureState(rest_amps, n_rest, n_internal, normalized=False).normalize()
        branches.append((w * scale, sub))
    return branches


def measure(psi: PureState, modes: Sequence[int]) -> list[Outcome]:
    """Photon-number-resolving measurement of ``modes``, keeping unnormalized weights.

    Patterns report the total count per physical mode.  Distinct internal
    microconfigurations of a pattern are orthogonal and become separate
    branches of the post-measurement mixture, whose total weight is the
    pattern probability times the squared norm of ``psi``.  Remaining modes
    keep their relative order.
    """
    groups, n_rest = _split_measurement(psi, modes)
    out = []
    for pattern in sorted(groups):
        branches = _branches(groups[pattern], n_rest, psi.n_internal)
        prob = float(sum(w for w, _ in branches))
        out.append(Outcome(pattern, prob, MixtureState(branches)))
    return out


def measure_pnr(psi: PureState, modes: Sequence[int]) -> list[Outcome]:
    """Like :func:`measure` but with each reduced state renormalized.

    Probabilities are relative to the norm of ``psi``, so they sum to one.
    """
    norm = psi.norm_squared()
    out = []
    for o in measure(psi, modes):
        if o.probability <= 0:
            continue
        out.append(Outcome(o.pattern, o.probability / norm, o.state.normalized()))
    return out


def post_select(psi: PureState, modes: Sequence[int], pattern: Sequence[int]):
    """Probability of ``pattern`` on ``modes`` and the renormalized reduced state.

    The state slot is ``None`` when the pattern cannot occur.
    """
    pattern = tuple(pattern)
    if len(pattern) != len(list(modes)):
        raise ValueError("pattern length must equal the number of measured modes")
    groups, n_rest = _split_measurement(psi, modes)
    if pattern not in groups:
        return 0.0, None
    branches = _branches(groups[pattern], n_rest, psi.n_internal)
    prob = float(sum(w for w, _ in branches)) / psi.norm_squared()
    if prob <= 0:
        return 0.0, None
    return prob, MixtureState(branches).normalized()
