"""Dual-rail fusion measurements, GHZ-state generation and photon distillation.

Qubit ``i`` of a dual-rail register occupies modes ``(2i, 2i+1)`` with
``|0> = |1,0>`` and ``|1> = |0,1>``.  All Hadamard beamsplitters use the
convention in :data:`photonsim.fock.HADAMARD`, where the second listed mode
receives the minus sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .circuit import bs_block
from .fock import (
    HADAMARD,
    MixtureState,
    PureState,
    apply_beamsplitter,
    apply_phase,
    apply_transfer,
    measure,
    permute_modes,
    superpose,
)
from .noise import SectorAssignment, sector_input_state

StateLike = Union[PureState, MixtureState]


def _as_mixture(state: StateLike) -> MixtureState:
    return MixtureState.pure(state) if isinstance(state, PureState) else state


@dataclass(frozen=True)
class HeraldRecord:
    """Measured counts, success flag and the odd-mode photon count."""

    pattern: tuple[int, ...]
    success: bool
    s_odd: int

    @property
    def x_value(self) -> int:
        return -1 if self.s_odd % 2 else 1


@dataclass(frozen=True)
class Heralded:
    """One measurement record with its probability and unnormalized output."""

    record: HeraldRecord
    probability: float
    state: MixtureState

    def normalized(self) -> MixtureState:
        return self.state.normalized()


def _measure_mixture(mix: MixtureState, modes: Sequence[int]) -> dict[tuple[int, ...], MixtureState]:
    groups: dict[tuple[int, ...], list] = {}
    for w, s in mix:
        for o in measure(s, modes):
            groups.setdefault(o.pattern, []).extend((w * w2, s2) for w2, s2 in o.state.branches)
    return {p: MixtureState(b) for p, b in sorted(groups.items())}


# ---------------------------------------------------------------------------
# measurements


def generalized_x_measurement(state: StateLike, modes: tuple[int, int]) -> list[Heralded]:
    """Hadamard on ``modes`` followed by photon counting of both.

    Success means exactly one photon was seen; ``s_odd`` counts photons in the
    second mode, so the reported sign is ``+`` for ``(1,0)`` and ``-`` for
    ``(0,1)``.  Measured modes are removed from the output.
    """
    a, b = modes
    if a == b:
        raise ValueError("generalized X measurement needs two distinct modes")
    mix = _as_mixture(state).map(lambda s: apply_beamsplitter(s, a, b, HADAMARD))
    out = []
    for pattern, sub in _measure_mixture(mix, [a, b]).items():
        rec = HeraldRecord(pattern, sum(pattern) == 1, pattern[1])
        out.append(Heralded(rec, sub.trace, sub))
    return out


def type_i_fusion(state: StateLike, modes: tuple[int, int]) -> list[Heralded]:
    """Type I fusion: generalized X measurement on one mode of each of two qubits."""
    return generalized_x_measurement(state, modes)


def analyzer_pairs(n: int) -> list[tuple[int, int]]:
    """Local Hadamard pairs (1,2), (3,4), ..., (2n-1, 0) of the n-GHZ analyzer."""
    if n < 1:
        raise ValueError("analyzer needs n >= 1")
    return [(2 * j + 1, (2 * j + 2) % (2 * n)) for j in range(n)]


HERALD_RULES = ("pairs", "clicks")


def ghz_analyzer(
    state: StateLike, n: int, modes: Sequence[int] | None = None, *, herald: str = "pairs"
) -> list[Heralded]:
    """n-GHZ analyzer on ``2n`` dual-rail modes (by default the last ``2n``).

    Hadamards act on the local pairs of :func:`analyzer_pairs` with the phase
    on the second listed mode, then all ``2n`` modes are counted.  The
    reported X-eigenvalue is ``(-1)^s_odd`` with ``s_odd`` the count in odd
    local modes.  For an input ``c10 |phi10>|(1,0)^n> + c01 |phi01>|(0,1)^n>``
    the output is ``c10 |phi10> + (-1)^(n - s_odd) c01 |phi01>``, since the
    minus sign lands on even local modes.  In GHZ generation the input carries
    an extra ``(-1)^n`` and the reported value is the sign of the raw output.

    Two success rules are available.  ``"pairs"`` requires one photon per
    Hadamard pair.  ``"clicks"`` requires ``n`` detectors to see exactly one
    photon each and the rest none.  They agree for indistinguishable photons,
    but ``"clicks"`` also accepts two distinguishable photons leaving one
    Hadamard pair through different ports.
    """
    if herald not in HERALD_RULES:
        raise ValueError(f"unknown herald rule {herald!r}; choose from {HERALD_RULES}")
    mix = _as_mixture(state)
    some = mix.branches[0][1]
    if modes is None:
        if some.n_modes < 2 * n:
            raise ValueError(f"state has {some.n_modes} modes, analyzer needs {2 * n}")
        modes = list(range(some.n_modes - 2 * n, some.n_modes))
    modes = list(modes)
    if len(modes) != 2 * n or len(set(modes)) != 2 * n:
        raise ValueError(f"analyzer needs {2 * n} distinct modes, got {modes}")
    pairs = analyzer_pairs(n)

    def circuit(s: PureState) -> PureState:
        for p, q in pairs:
            s = apply_beamsplitter(s, modes[p], modes[q], HADAMARD)
        return s

    mix = mix.map(circuit)
    out = []
    for pattern, sub in _measure_mixture(mix, modes).items():
        if herald == "pairs":
            success = all(pattern[p] + pattern[q] == 1 for p, q in pairs)
        else:
            success = sum(pattern) == n and max(pattern) <= 1
        s_odd = sum(pattern[j] for j in range(1, 2 * n, 2))
        out.append(Heralded(HeraldRecord(pattern, success, s_odd), sub.trace, sub))
    return out


def type_ii_fusion(state: StateLike, modes: Sequence[int], *, herald: str = "pairs") -> list[Heralded]:
    """Type II fusion: the 2-GHZ analyzer (measures XX and ZZ) on four modes."""
    return ghz_analyzer(state, 2, modes, herald=herald)


# ---------------------------------------------------------------------------
# GHZ generation


def ghz_state(n: int, n_internal: int = 1, sign: int = 1) -> PureState:
    """(|1,0>^n + sign |0,1>^n) / sqrt2 on ``2n`` modes."""
    zero = PureState.basis((1, 0) * n, n_internal)
    one = PureState.basis((0, 1) * n, n_internal)
    return superpose([(1.0, zero), (float(sign), one)])


def bell_state(s1: int, s2: int, n_internal: int = 1) -> PureState:
    """Bell state with XX eigenvalue ``s1`` and ZZ eigenvalue ``s2`` on 4 modes."""
    if s2 == 1:
        a, b = (1, 0, 1, 0), (0, 1, 0, 1)
    else:
        a, b = (1, 0, 0, 1), (0, 1, 1, 0)
    return superpose(
        [(1.0, PureState.basis(a, n_internal)), (float(s1), PureState.basis(b, n_internal))]
    )


def ghz_circuit_state(n: int, labels: Sequence[int]) -> PureState:
    """Protocol state just before the analyzer: input, pair Hadamards, splitting."""
    if n < 2:
        raise ValueError("GHZ generation needs n >= 2")
    labels = tuple(labels)
    if len(labels) != 2 * n:
        raise ValueError(f"need {2 * n} photon labels, got {len(labels)}")
    psi = sector_input_state(labels, (1,) * (2 * n) + (0,) * (2 * n))
    for i in range(n):
        psi = apply_beamsplitter(psi, 2 * i, 2 * i + 1, HADAMARD)
    for i in range(2 * n):
        psi = apply_beamsplitter(psi, i, 2 * n + i, HADAMARD)
    return psi


def ghz_generate_outcomes(n: int, labels: Sequence[int], *, raw: bool = False) -> list[Heralded]:
    """Successful analyzer outcomes of GHZ generation, each corrected unless ``raw``."""
    psi = ghz_circuit_state(n, labels)
    out = []
    for h in ghz_analyzer(psi, n):
        if not h.record.success or h.probability <= 0:
            continue
        st = h.state
        if not raw and h.record.s_odd % 2:
            st = st.map(lambda s: apply_phase(s, 1, math.pi))
        out.append(Heralded(h.record, h.probability, st))
    return out


def ghz_generate(
    n: int, sector: SectorAssignment | Sequence[int] | None = None, *, raw: bool = False
) -> tuple[float, MixtureState]:
    """Run GHZ generation on ``2n`` photons and return (herald probability, output).

    The output mixture on the first ``2n`` modes is normalized.  Unless
    ``raw``, a phase of -1 on mode 1 is applied after odd ``s_odd`` so that
    ideal inputs give exactly :func:`ghz_state`.
    """
    if sector is None:
        labels = (0,) * (2 * n)
    elif isinstance(sector, SectorAssignment):
        labels = sector.labels
    else:
        labels = tuple(sector)
    outcomes = ghz_generate_outcomes(n, labels, raw=raw)
    branches = [b for h in outcomes for b in h.state.branches]
    mix = MixtureState(branches)
    prob = mix.trace
    return prob, (mix.normalized() if prob > 0 else mix)


# ---------------------------------------------------------------------------
# superoperators on dual-rail registers


def _check_pair(state: PureState, i: int) -> None:
    if not 0 <= 2 * i + 1 < state.n_modes:
        raise IndexError(f"qubit {i} out of range for {state.n_modes} modes")


def pauli_x(state: PureState, i: int) -> PureState:
    _check_pair(state, i)
    perm = list(range(state.n_modes))
    perm[2 * i], perm[2 * i + 1] = 2 * i + 1, 2 * i
    return permute_modes(state, perm)


def pauli_z(state: PureState, i: int) -> PureState:
    _check_pair(state, i)
    return apply_phase(state, 2 * i + 1, math.pi)


def distinguish(state: PureState, i: int, target: int | None = None) -> PureState:
    """Move photons of qubit ``i`` from internal copy 0 to ``target`` (and back).

    By default ``target`` is a fresh copy appended to the registry.  On one
    photon per pair this replaces the ideal internal state by an orthogonal one.
    """
    _check_pair(state, i)
    if target is None:
        target = state.n_internal
    state = state.embed_internal(max(state.n_internal, target + 1))
    k = state.n_internal
    u = np.eye(state.total_modes, dtype=complex)
    for mode in (2 * i, 2 * i + 1):
        a, b = mode * k, mode * k + target
        u[[a, b], [a, b]] = 0.0
        u[a, b] = u[b, a] = 1.0
    return apply_transfer(u, state)


@dataclass(frozen=True)
class SuperOp:
    """``kind`` in {"X", "Z", "D"} acting on qubit ``qubit``, or a composition.

    ``X`` and ``Z`` denote the Pauli mixtures P_A(g) = (g + A g A^dag)/2.
    Compositions in ``parts`` apply right to left, like function composition.
    """

    kind: str
    qubit: int = 0
    parts: tuple["SuperOp", ...] = ()
    target: int | None = None

    @classmethod
    def compose(cls, *ops: "SuperOp") -> "SuperOp":
        return cls("compose", parts=tuple(ops))


def apply_superop(op: SuperOp, rho: StateLike) -> MixtureState:
    """Apply a Pauli mixture, distinguishability swap or their composition."""
    rho = _as_mixture(rho)
    if op.kind == "compose":
        for part in reversed(op.parts):
            rho = apply_superop(part, rho)
        return rho
    if op.kind == "X":
        return rho.scaled(0.5) + rho.map(lambda s: pauli_x(s, op.qubit)).scaled(0.5)
    if op.kind == "Z":
        return rho.scaled(0.5) + rho.map(lambda s: pauli_z(s, op.qubit)).scaled(0.5)
    if op.kind == "D":
        return rho.map(lambda s: distinguish(s, op.qubit, op.target))
    raise ValueError(f"unknown superoperator kind {op.kind!r}")


def dual_rail_projection(rho: StateLike, n_qubits: int | None = None) -> MixtureState:
    """Keep only terms with exactly one photon per dual-rail pair (unnormalized)."""
    rho = _as_mixture(rho)

    def legit(s: PureState, key) -> bool:
        occ = s.physical_occupation(key)
        q = len(occ) // 2 if n_qubits is None else n_qubits
        return all(occ[2 * i] + occ[2 * i + 1] == 1 for i in range(q))

    return rho.filter_terms(legit)


def first_order_error_target(n: int, i: int) -> MixtureState:
    """(P_X(P_Z(B) + D(B)))/2 for an error on qubit ``i`` of the n-GHZ state B."""
    b = MixtureState.pure(ghz_state(n))
    inner = apply_superop(SuperOp("Z", i), b).scaled(0.5) + apply_superop(SuperOp("D", i, target=1), b).scaled(0.5)
    return apply_superop(SuperOp("X", i), inner)


def pair_error_target(n: int, i: int) -> MixtureState:
    """P_Z(D(B)) for a pair error on qubit ``i`` of the n-GHZ state B."""
    b = MixtureState.pure(ghz_state(n))
    return apply_superop(SuperOp.compose(SuperOp("Z", i), SuperOp("D", i, target=1)), b)


# ---------------------------------------------------------------------------
# three-photon distillation


# Layout BS(0,1), BS(1,2), BS(0,1), each given as (theta, phi).  Found with
# search_distillation_angles(np.random.default_rng(1), starts=6); every
# |U_ij|^2 equals 1/3 to machine precision.
DEFAULT_DISTILL_ANGLES: tuple[float, ...] = (
    0.7853981634360396,
    0.9764036047077231,
    2.1862760645877017,
    0.9168491114809882,
    0.785398110788051,
    2.5471999065781024,
)


def distillation_unitary(angles: Sequence[float]) -> np.ndarray:
    """Three-mode transfer matrix from ``(theta1, phi1, theta2, phi2, theta3, phi3)``."""
    angles = [float(a) for a in angles]
    if len(angles) != 6:
        raise ValueError(f"distillation needs 6 angles (theta, phi per beamsplitter), got {len(angles)}")
    u = np.eye(3, dtype=complex)
    for (p, q), (theta, phi) in zip([(0, 1), (1, 2), (0, 1)], zip(angles[::2], angles[1::2])):
        g = np.eye(3, dtype=complex)
        g[np.ix_([p, q], [p, q])] = bs_block(theta, phi)
        u = g @ u
    return u


@dataclass(frozen=True)
class DistillResult:
    probability: float
    output: MixtureState

    @property
    def error(self) -> float:
        """Weight of the output photon outside the ideal internal state."""
        if self.probability <= 0:
            return float("nan")
        rho = self.output.normalized()
        ideal = 0.0
        for w, s in rho:
            ideal += w * sum(abs(a) ** 2 for key, a in s.amplitudes.items() if key[0] == 1)
        return 1.0 - ideal


def distill_3(angles: Sequence[float] | None, inputs: Sequence[Sequence[complex]] | Sequence[int]) -> DistillResult:
    """Three single photons through the distillation network, post-selecting (1,1).

    ``inputs`` gives each photon's internal state either as an amplitude
    vector or as an orthogonal-state label.  Photons enter modes 0, 1, 2;
    modes 1 and 2 are measured and the output photon is in mode 0.
    """
    if angles is None:
        angles = DEFAULT_DISTILL_ANGLES
    inputs = list(inputs)
    if len(inputs) != 3:
        raise ValueError(f"distillation takes exactly 3 photons, got {len(inputs)}")
    from .noise import create_photons

    vecs = []
    for v in inputs:
        if isinstance(v, (int, np.integer)):
            vec = [0.0] * (int(v) + 1)
            vec[int(v)] = 1.0
            vecs.append(vec)
        else:
            vecs.append(list(v))
    k = max(len(v) for v in vecs)
    psi = create_photons([(mode, v) for mode, v in enumerate(vecs)], 3, k)
    out = apply_transfer(distillation_unitary(angles), psi)
    groups = {o.pattern: o for o in measure(out, [1, 2])}
    hit = groups.get((1, 1))
    if hit is None:
        return DistillResult(0.0, MixtureState())
    return DistillResult(hit.probability, hit.state)


def distill_mixed(angles: Sequence[float] | None, epsilon: float, model: str = "SBB") -> DistillResult:
    """Distillation of three photons each in ``(1-eps) rho_0 + eps rho_perp``.

    With the default ``"SBB"`` all error photons share one orthogonal state;
    ``"OBB"`` gives every error photon its own.
    """
    from .noise import enumerate_sectors

    branches = []
    for sec in enumerate_sectors(model, 3, epsilon):
        if sec.probability == 0:
            continue
        r = distill_3(angles, list(sec.labels))
        branches.extend((float(sec.probability) * w, s.embed_internal(4)) for w, s in r.output)
    mix = MixtureState(branches)
    return DistillResult(mix.trace, mix)


def distillation_objective(angles: Sequence[float], epsilon: float = 0.05) -> dict[str, float]:
    """Ideal and single-error herald rates plus the output/input error ratio.

    The single-error rate is averaged over the three error positions and
    ``error_spread`` is the largest deviation from that average.
    """
    ideal = distill_3(angles, [0, 0, 0]).probability
    singles = [distill_3(angles, [int(j == i) for j in range(3)]).probability for i in range(3)]
    mean = sum(singles) / 3
    mixed = distill_mixed(angles, epsilon)
    return {
        "ideal_rate": ideal,
        "error_rate": mean,
        "error_spread": max(abs(x - mean) for x in singles),
        "ratio": mixed.error / epsilon,
    }


def search_distillation_angles(
    rng: np.random.Generator | None = None,
    *,
    starts: int = 16,
    targets: tuple[float, float, float] = (1 / 3, 1 / 9, 1 / 3),
    epsilon: float = 0.05,
) -> np.ndarray:
    """Random starts plus Nelder-Mead refinement towards the target rates.

    Minimizes the squared deviation of (ideal herald rate, single-error
    herald rate for each error position, output/input error ratio) from
    ``targets``.  The ratio target is approximate at finite ``epsilon`` so
    it carries a smaller weight.
    """
    from scipy.optimize import minimize

    rng = np.random.default_rng(0) if rng is None else rng

    def loss(x):
        obj = distillation_objective(x, epsilon)
        return (
            (obj["ideal_rate"] - targets[0]) ** 2
            + (obj["error_rate"] - targets[1]) ** 2
            + obj["error_spread"] ** 2
            + 0.01 * (obj["ratio"] - targets[2]) ** 2
        )

    best_x, best_f = None, math.inf
    for _ in range(starts):
        x0 = rng.uniform(0, math.pi, size=6)
        res = minimize(loss, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 4000})
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
    return np.asarray(best_x)
