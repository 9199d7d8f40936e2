"""Circuit elements, JSON (de)serialization and sequential execution.

Circuits compose left to right: elements act in list order and, when two
circuits are concatenated, the second one's modes follow the first one's.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence, Union

import numpy as np

from .fock import (
    HADAMARD,
    MixtureState,
    PureState,
    apply_beamsplitter,
    apply_phase,
    apply_snap,
    check_unitary,
    measure,
)


def bs_block(theta: float, phi: float = 0.0) -> np.ndarray:
    """Beamsplitter block with transmission amplitude cos(theta)."""
    c, s = math.cos(theta), math.sin(theta)
    e = cmath.exp(1j * phi)
    return np.array([[c, -s * e.conjugate()], [s * e, c]], dtype=complex)


@dataclass(frozen=True)
class Beamsplitter:
    i: int
    j: int
    block: np.ndarray = field(default_factory=lambda: HADAMARD.copy(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "block", check_unitary(self.block))
        if self.block.shape != (2, 2):
            raise ValueError("beamsplitter block must be 2x2")
        if self.i == self.j:
            raise ValueError("beamsplitter needs two distinct modes")

    def __eq__(self, other):
        return (
            isinstance(other, Beamsplitter)
            and (self.i, self.j) == (other.i, other.j)
            and np.allclose(self.block, other.block, atol=1e-15)
        )

    def __hash__(self):
        return hash((self.i, self.j))


@dataclass(frozen=True)
class Phase:
    mode: int
    angle: float


@dataclass(frozen=True)
class Snap:
    mode: int
    k: int
    theta: float


@dataclass(frozen=True)
class Loss:
    mode: int
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmission eta must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class PnrMeasure:
    modes: tuple[int, ...]
    pattern: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.pattern is not None:
            object.__setattr__(self, "pattern", tuple(self.pattern))
            if len(self.pattern) != len(self.modes):
                raise ValueError("post-selection pattern length must match the measured modes")
        if not self.modes:
            raise ValueError("empty measurement mode set")


Element = Union[Beamsplitter, Phase, Snap, Loss, PnrMeasure]


def _element_modes(e: Element) -> tuple[int, ...]:
    if isinstance(e, Beamsplitter):
        return (e.i, e.j)
    if isinstance(e, PnrMeasure):
        return e.modes
    return (e.mode,)


@dataclass(frozen=True)
class Circuit:
    """A linear-optical circuit on ``modes`` physical modes.

    ``input`` lists photon counts per physical mode; ``labels`` optionally
    gives an internal-state index per photon in reading order.
    """

    modes: int
    input: tuple[int, ...]
    elements: tuple[Element, ...] = ()
    internal_modes: int = 1
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "input", tuple(int(v) for v in self.input))
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.input) != self.modes:
            raise ValueError(f"input has {len(self.input)} entries for {self.modes} modes")
        if min(self.input, default=0) < 0:
            raise ValueError("negative photon count in input")
        live = self.modes
        for e in self.elements:
            for q in _element_modes(e):
                if not 0 <= q < live:
                    raise ValueError(f"element {e} addresses mode {q} outside 0..{live - 1}")
            if isinstance(e, PnrMeasure):
                live -= len(e.modes)
        if self.labels is not None:
            if len(self.labels) != self.photons:
                raise ValueError("one internal label per photon required")
            if max(self.labels, default=0) >= self.internal_modes:
                raise ValueError("internal label exceeds internal_modes")

    @property
    def photons(self) -> int:
        return sum(self.input)

    def replace(self, **kw) -> "Circuit":
        return replace(self, **kw)

    def then(self, other: "Circuit") -> "Circuit":
        """Sequential composition on the same modes."""
        if other.modes != self.modes:
            raise ValueError("sequential composition needs equal mode counts")
        return self.replace(elements=self.elements + other.elements)

    def input_state(self) -> PureState:
        from .noise import sector_input_state

        labels = self.labels if self.labels is not None else (0,) * self.photons
        return sector_input_state(labels, self.input, self.internal_modes)

    # JSON ------------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "photons": self.photons,
            "modes": self.modes,
            "internal_modes": self.internal_modes,
            "input": list(self.input),
            "elements": [element_to_dict(e) for e in self.elements],
        }
        if self.labels is not None:
            d["labels"] = list(self.labels)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Circuit":
        try:
            modes = int(d["modes"])
            inp = d["input"]
            elements = [element_from_dict(e) for e in d.get("elements", [])]
        except KeyError as exc:
            raise ValueError(f"circuit is missing field {exc.args[0]!r}") from None
        circ = cls(
            modes=modes,
            input=inp,
            elements=elements,
            internal_modes=int(d.get("internal_modes", 1)),
            labels=d.get("labels"),
        )
        if "photons" in d and int(d["photons"]) != circ.photons:
            raise ValueError(f"declared photons={d['photons']} but input holds {circ.photons}")
        return circ

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def element_to_dict(e: Element) -> dict[str, Any]:
    if isinstance(e, Beamsplitter):
        block = [[[z.real, z.imag] for z in row] for row in e.block]
        return {"type": "bs", "modes": [e.i, e.j], "block": block}
    if isinstance(e, Phase):
        return {"type": "phase", "mode": e.mode, "angle": e.angle}
    if isinstance(e, Snap):
        return {"type": "snap", "mode": e.mode, "k": e.k, "theta": e.theta}
    if isinstance(e, Loss):
        return {"type": "loss", "mode": e.mode, "eta": e.eta}
    d: dict[str, Any] = {"type": "measure", "modes": list(e.modes)}
    if e.pattern is not None:
        d["pattern"] = list(e.pattern)
    return d


def element_from_dict(d: dict[str, Any]) -> Element:
    kind = d.get("type")
    try:
        if kind == "bs":
            i, j = d["modes"]
            if "block" in d:
                block = np.array([[_cplx(z) for z in row] for row in d["block"]], dtype=complex)
            elif "theta" in d:
                block = bs_block(float(d["theta"]), float(d.get("phi", 0.0)))
            else:
                block = HADAMARD
            return Beamsplitter(int(i), int(j), block)
        if kind == "phase":
            return Phase(int(d["mode"]), float(d["angle"]))
        if kind == "snap":
            return Snap(int(d["mode"]), int(d["k"]), float(d["theta"]))
        if kind == "loss":
            return Loss(int(d["mode"]), float(d["eta"]))
        if kind == "measure":
            return PnrMeasure(tuple(d["modes"]), d.get("pattern"))
    except KeyError as exc:
        raise ValueError(f"element {d} is missing field {exc.args[0]!r}") from None
    raise ValueError(f"unknown element type {kind!r}")


def apply_element(mix: MixtureState, e: Element, rng: np.random.Generator | None = None) -> MixtureState:
    """Apply one element to every branch; measurement traces or post-selects."""
    from .noise import apply_loss

    if isinstance(e, Beamsplitter):
        return mix.map(lambda s: apply_beamsplitter(s, e.i, e.j, e.block))
    if isinstance(e, Phase):
        return mix.map(lambda s: apply_phase(s, e.mode, e.angle))
    if isinstance(e, Snap):
        return mix.map(lambda s: apply_snap(s, e.mode, e.k, e.theta))
    if isinstance(e, Loss):
        return MixtureState([(w * w2, s2) for w, s in mix for w2, s2 in apply_loss(s, e.mode, e.eta, rng=rng)])
    out = []
    for w, s in mix:
        for o in measure(s, e.modes):
            if e.pattern is None or o.pattern == e.pattern:
                out.extend((w * w2, s2) for w2, s2 in o.state.branches)
    return MixtureState(out)


def run_circuit(circuit: Circuit, rng: np.random.Generator | None = None) -> MixtureState:
    """Execute ``circuit`` on its input state.

    The returned mixture is unnormalized: its trace is the probability of
    all post-selection patterns.  Loss branches exhaustively unless ``rng``
    is given, in which case one loss branch is sampled per loss element.
    """
    mix = MixtureState.pure(circuit.input_state())
    for e in circuit.elements:
        mix = apply_element(mix, e, rng)
    return mix


def output_distribution(mix: MixtureState) -> dict[tuple[int, ...], float]:
    """Physical photon-count distribution of a (possibly unnormalized) mixture."""
    dist: dict[tuple[int, ...], float] = {}
    for w, s in mix:
        for key, a in s.amplitudes.items():
            pat = s.physical_occupation(key)
            dist[pat] = dist.get(pat, 0.0) + w * abs(a) ** 2
    return dict(sorted(dist.items(), reverse=True))


def layered_circuit(modes: int, layers: Sequence[Sequence[tuple[int, int]]], input_occ: Sequence[int], eta=None) -> Circuit:
    """Beamsplitter layers, optionally each followed by loss ``eta`` on every mode."""
    elements: list[Element] = []
    for layer in layers:
        elements.extend(Beamsplitter(i, j) for i, j in layer)
        if eta is not None:
            elements.extend(Loss(q, eta) for q in range(modes))
    return Circuit(modes, tuple(input_occ), tuple(elements))
