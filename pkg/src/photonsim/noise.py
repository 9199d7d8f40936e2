"""Photon loss and partial distinguishability.

Loss is modelled by dilation onto a fictitious vacuum mode.  Distinguishability
is modelled by giving photons internal states: orthogonal internal states are
separate copies of every physical mode, and the same linear-optical circuit
acts on every copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from numbers import Real
from typing import Sequence

import numpy as np

from .circuit import Beamsplitter, Circuit, Loss, Phase
from .fock import (
    DimensionError,
    MixtureState,
    Occupation,
    PureState,
    apply_transfer,
    embed_occupation,
    measure,
)

MODELS = ("OBB", "SBB", "OBP")


def _check_eta(eta: float) -> None:
    if not 0.0 <= float(eta) <= 1.0:
        raise ValueError(f"transmission eta must lie in [0, 1], got {eta}")


# ---------------------------------------------------------------------------
# loss


def loss_channel(n1: int, n2: int, eta) -> list[tuple[float, tuple[int, int]]]:
    """Image of the matrix element |n1><n2| under single-mode loss.

    Returns ``(coefficient, (n1 - k, n2 - k))`` for ``k = 0..min(n1, n2)``,
    with coefficient ``eta^((n1+n2)/2 - k) (1-eta)^k sqrt(C(n1,k) C(n2,k))``.
    Exact rationals are kept when the square root is exact.
    """
    if n1 < 0 or n2 < 0:
        raise ValueError("occupations must be non-negative")
    _check_eta(eta)
    out = []
    for k in range(min(n1, n2) + 1):
        half = Fraction(n1 + n2, 2) - k
        binom = math.comb(n1, k) * math.comb(n2, k)
        root = math.isqrt(binom)
        if isinstance(eta, Fraction) and half.denominator == 1 and root * root == binom:
            coeff = eta ** int(half) * (1 - eta) ** k * root
        else:
            coeff = float(eta) ** float(half) * (1.0 - float(eta)) ** k * math.sqrt(binom)
        out.append((coeff, (n1 - k, n2 - k)))
    return out


def loss_block(eta: float) -> np.ndarray:
    """2x2 dilation block: a^dag -> sqrt(eta) a^dag + sqrt(1-eta) f^dag."""
    _check_eta(eta)
    s, c = math.sqrt(eta), math.sqrt(1.0 - eta)
    return np.array([[s, -c], [c, s]], dtype=complex)


def apply_loss(psi: PureState, mode: int, eta: float, *, rng: np.random.Generator | None = None) -> MixtureState:
    """Loss channel with transmission ``eta`` on one physical mode.

    The mode is mixed with an appended vacuum mode by :func:`loss_block` and
    the appended mode is then traced out, one branch per lost-photon count and
    internal configuration.  With ``rng`` a single branch is sampled instead
    and returned with unit weight.
    """
    _check_eta(eta)
    if not 0 <= mode < psi.n_modes:
        raise IndexError(f"mode {mode} out of range for {psi.n_modes} modes")
    if eta == 1.0 or psi.photon_number == 0:
        return MixtureState.pure(psi)
    k = psi.n_internal
    m = psi.n_modes + 1
    widened = PureState(
        {key + (0,) * k: a for key, a in psi.amplitudes.items()}, m, k, normalized=psi.normalized
    )
    u = np.eye(m, dtype=complex)
    block = loss_block(eta)
    f = m - 1
    u[np.ix_([mode, f], [mode, f])] = block
    out = apply_transfer(u, widened, check=False)
    branches = [b for o in measure(out, [f]) for b in o.state.branches]
    mix = MixtureState(branches)
    if rng is None:
        return mix
    weights = np.array([w for w, _ in branches])
    pick = rng.choice(len(branches), p=weights / weights.sum())
    return MixtureState([(1.0, branches[pick][1])])


def apply_loss_mixture(mix: MixtureState, mode: int, eta: float) -> MixtureState:
    return MixtureState([(w * w2, s2) for w, s in mix for w2, s2 in apply_loss(s, mode, eta)])


def commute_losses(circuit: Circuit) -> Circuit:
    """Push loss elements towards the circuit start where they commute.

    Uniform loss on both modes of a beamsplitter commutes with it, so at each
    beamsplitter the common factor ``max(eta_i, eta_j)`` moves through and
    only the residual ratios stay behind.  Phases commute with loss on any
    mode.  Consecutive losses on a mode merge multiplicatively.  Circuits
    with other element types are returned unchanged.
    """
    elements = list(circuit.elements)
    if not all(isinstance(e, (Beamsplitter, Loss, Phase)) for e in elements):
        return circuit
    pending = [1.0] * circuit.modes
    rebuilt: list = []
    for e in reversed(elements):
        if isinstance(e, Loss):
            pending[e.mode] *= e.eta
        elif isinstance(e, Phase):
            rebuilt.append(e)
        else:
            i, j = e.i, e.j
            c = max(pending[i], pending[j])
            residual = []
            for q in sorted((i, j)):
                r = pending[q] / c if c > 0 else 1.0
                if r < 1.0:
                    residual.append(Loss(q, r))
            rebuilt.extend(reversed(residual))
            rebuilt.append(e)
            pending[i] = pending[j] = c
    front = [Loss(q, pending[q]) for q in range(circuit.modes) if pending[q] < 1.0]
    rebuilt.extend(reversed(front))
    return circuit.replace(elements=list(reversed(rebuilt)))


# ---------------------------------------------------------------------------
# distinguishability


def create_photons(
    photons: Sequence[tuple[int, Sequence[complex]]], n_modes: int, n_internal: int
) -> PureState:
    """Normalized product of creation operators acting on vacuum.

    Each photon is ``(physical mode, internal amplitudes)``; the internal
    amplitudes need not be orthogonal between photons.
    """
    width = n_modes * n_internal
    poly: dict[Occupation, complex] = {(0,) * width: 1.0 + 0j}
    for mode, vec in photons:
        vec = list(vec)
        if len(vec) > n_internal:
            raise DimensionError(f"internal amplitude vector longer than registry size {n_internal}")
        if not 0 <= mode < n_modes:
            raise IndexError(f"mode {mode} out of range")
        nxt: dict[Occupation, complex] = {}
        for key, c in poly.items():
            for idx, v in enumerate(vec):
                if v == 0:
                    continue
                pos = mode * n_internal + idx
                lst = list(key)
                lst[pos] += 1
                t = tuple(lst)
                # a^dag |n> = sqrt(n+1) |n+1>
                nxt[t] = nxt.get(t, 0j) + c * v * math.sqrt(lst[pos])
        poly = nxt
    return PureState(poly, n_modes, n_internal, normalized=False).normalize()


def apply_internal(psi: PureState, mode: int, w: np.ndarray) -> PureState:
    """Unitary ``w`` on the internal copies of one physical mode.

    A generic hook for changing photon internal states partway through a
    circuit; no particular physical process is implied.
    """
    k = psi.n_internal
    w = np.asarray(w, dtype=complex)
    if w.shape != (k, k):
        raise DimensionError(f"internal unitary must be {k}x{k}")
    u = np.eye(psi.total_modes, dtype=complex)
    sl = slice(mode * k, (mode + 1) * k)
    u[sl, sl] = w
    return apply_transfer(u, psi)


@dataclass(frozen=True)
class ErrorModel:
    """Distinguishability error model.

    ``OBB``: each photon independently ideal with probability ``1 - eps``,
    otherwise in its own orthogonal state.  ``SBB``: as OBB but all error
    photons share one state.  ``OBP``: photons come in pairs, a pair is
    ideal with probability ``(1 - eps)^2`` and otherwise both photons share
    a fresh state.
    """

    kind: str
    epsilon: Real

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in MODELS:
            raise ValueError(f"unknown error model {self.kind!r}; choose from {MODELS}")
        object.__setattr__(self, "kind", kind)
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def pair_error(self):
        """Per-pair error probability for OBP, eps (2 - eps)."""
        return self.epsilon * (2 - self.epsilon)

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorModel":
        return cls(str(d["model"]), d["epsilon"])


@dataclass(frozen=True)
class SectorAssignment:
    """Internal-state label per photon (0 is ideal) and the sector probability."""

    labels: tuple[int, ...]
    probability: Real

    @property
    def n_error_states(self) -> int:
        return len({x for x in self.labels if x})

    @property
    def n_internal(self) -> int:
        return max(self.labels, default=0) + 1


def _sector_pattern(model: str, n_photons: int):
    if model == "OBP":
        if n_photons % 2:
            raise ValueError("OBP needs an even photon count (photons paired as (0,1), (2,3), ...)")
        units = n_photons // 2
    else:
        units = n_photons
    for bad in product((False, True), repeat=units):
        labels = []
        fresh = 0
        for b in bad:
            if model == "SBB":
                labels.append(1 if b else 0)
            elif model == "OBB":
                if b:
                    fresh += 1
                labels.append(fresh if b else 0)
            else:
                if b:
                    fresh += 1
                labels.extend([fresh, fresh] if b else [0, 0])
        yield bad, tuple(labels)


def enumerate_sectors(model: ErrorModel | str, n_photons: int, epsilon=None) -> list[SectorAssignment]:
    """All internal-state sectors of ``n_photons`` with their probabilities.

    Error labels are allocated in photon order, so OBB uses labels
    ``1..(number of errors)``.  Probabilities are exact when ``epsilon`` is a
    :class:`~fractions.Fraction` (or int).
    """
    if isinstance(model, str):
        model = ErrorModel(model, 0 if epsilon is None else epsilon)
    eps = model.epsilon
    p_bad = model.pair_error if model.kind == "OBP" else eps
    out = []
    for bad, labels in _sector_pattern(model.kind, n_photons):
        nb = sum(bad)
        prob = p_bad**nb * (1 - p_bad) ** (len(bad) - nb)
        out.append(SectorAssignment(labels, prob))
    return out


def sector_input_state(
    assignment: SectorAssignment | Sequence[int], base_occupation: Sequence[int], n_internal: int | None = None
) -> PureState:
    """Fock input with photon ``p`` (in reading order) in internal copy ``labels[p]``."""
    labels = assignment.labels if isinstance(assignment, SectorAssignment) else tuple(assignment)
    base = tuple(int(v) for v in base_occupation)
    if len(labels) != sum(base):
        raise ValueError(f"{len(labels)} labels for {sum(base)} photons")
    k = max(labels, default=0) + 1 if n_internal is None else n_internal
    if labels and max(labels) >= k:
        raise DimensionError(f"internal index {max(labels)} exceeds registry size {k}")
    photons = []
    it = iter(labels)
    for mode, count in enumerate(base):
        for _ in range(count):
            vec = [0.0] * k
            vec[next(it)] = 1.0
            photons.append((mode, vec))
    return create_photons(photons, len(base), k)


def ideal_input(base_occupation: Sequence[int], n_internal: int = 1) -> PureState:
    return PureState({embed_occupation(tuple(base_occupation), 1, n_internal): 1.0}, len(base_occupation), n_internal)
