"""Bell-state-generation benchmark under distinguishability error models.

The generator is GHZ generation at ``n = 2``.  Four quality metrics are
computed from exact per-sector simulations:

``F``   fidelity of the heralded output with the ideal Bell state,
``PF``  the same fidelity after dual-rail post-selection,
``FF``  fidelity after fusing each output qubit with an ideal Bell pair,
``NS``  expected number of violated stabilizers after those fusions.

Because the error rate enters only through the sector probabilities, each
sector is simulated once and any ``epsilon`` is evaluated by reweighting.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .fock import MixtureState, apply_phase, tensor
from .noise import ErrorModel, SectorAssignment, enumerate_sectors
from .protocols import bell_state, dual_rail_projection, ghz_generate_outcomes, ghz_state, type_ii_fusion

METRICS = ("F", "PF", "FF", "NS")
N_PAIRS = 2


def bell_fidelities(rho: MixtureState) -> dict[tuple[int, int], float]:
    """Unnormalized expectations of the four ideal Bell projectors on 4 modes."""
    return {
        (s1, s2): rho.expectation_projector(bell_state(s1, s2))
        for s1 in (1, -1)
        for s2 in (1, -1)
    }


def expected_stabilizer_errors(rho: MixtureState) -> float:
    """0 <B++> + 1 (<B+-> + <B-+>) + 2 <B-->, normalized by the trace.

    Raises ``ValueError`` if the state has weight outside the ideal dual-rail
    subspace, which indicates a missing projection upstream.
    """
    total = rho.trace
    if total <= 0:
        raise ValueError("state has zero weight")
    fid = bell_fidelities(rho)
    if abs(sum(fid.values()) - total) > 1e-10 * max(1.0, total):
        raise ValueError("state has support outside the ideal two-qubit dual-rail space")
    return (fid[(1, -1)] + fid[(-1, 1)] + 2 * fid[(-1, -1)]) / total


def _fuse_with_ancilla(rho: MixtureState, herald: str) -> MixtureState:
    """Fuse qubit 0 with qubit 0 of a fresh ideal Bell pair; keep the partner.

    The surviving modes are the other register qubits followed by the kept
    ancilla qubit, which receives a Z correction on odd ``s_odd``.
    """
    anc = ghz_state(2)
    joined = rho.map(lambda s: tensor(s, anc.embed_internal(s.n_internal)))
    n_modes = joined.branches[0][1].n_modes
    out = []
    for h in type_ii_fusion(joined, [0, 1, n_modes - 4, n_modes - 3], herald=herald):
        if not h.record.success or h.probability <= 0:
            continue
        st = h.state
        if h.record.s_odd % 2:
            st = st.map(lambda s: apply_phase(s, s.n_modes - 1, math.pi))
        out.extend(st.branches)
    return MixtureState(out)


def fuse_both(rho: MixtureState, herald: str = "clicks") -> MixtureState:
    """Fuse both qubits of a two-qubit output with ideal Bell pairs (unnormalized).

    ``herald`` is the fusion success rule of :func:`~photonsim.protocols.ghz_analyzer`.
    """
    return _fuse_with_ancilla(_fuse_with_ancilla(rho, herald), herald)


@dataclass(frozen=True)
class SectorData:
    """Herald probabilities and unnormalized metric numerators of one sector."""

    labels: tuple[int, ...]
    herald: float
    fidelity: float
    herald_ps: float
    herald_fusion: float
    fidelity_fusion: float
    ns_fusion: float

    @property
    def n_error_states(self) -> int:
        return len({x for x in self.labels if x})

    def herald_for(self, metric: str) -> float:
        return {"F": self.herald, "PF": self.herald_ps, "FF": self.herald_fusion, "NS": self.herald_fusion}[metric]

    def numerator_for(self, metric: str) -> float:
        return {"F": self.fidelity, "PF": self.fidelity, "FF": self.fidelity_fusion, "NS": self.ns_fusion}[metric]


@lru_cache(maxsize=None)
def sector_data(labels: tuple[int, ...], fusion_herald: str = "clicks") -> SectorData:
    """Exact simulation of one sector of the Bell-state generator.

    The post-processing fusions act on the dual-rail projected output.
    """
    outcomes = ghz_generate_outcomes(N_PAIRS, labels)
    rho = MixtureState([b for h in outcomes for b in h.state.branches])
    target = ghz_state(N_PAIRS)
    herald = rho.trace
    fidelity = rho.expectation_projector(target)
    projected = dual_rail_projection(rho)
    fused = fuse_both(projected, fusion_herald)
    fid = bell_fidelities(fused)
    return SectorData(
        labels=labels,
        herald=herald,
        fidelity=fidelity,
        herald_ps=projected.trace,
        herald_fusion=fused.trace,
        fidelity_fusion=fid[(1, 1)],
        ns_fusion=fid[(1, -1)] + fid[(-1, 1)] + 2 * fid[(-1, -1)],
    )


def label_multiplicity(labels: Sequence[int]) -> int:
    """Number of ways to assign the distinct error states to their labels, k!.

    Sectors are counted once per ordered assignment of distinct orthogonal
    error states, which reproduces the tabulated benchmark expressions.
    """
    return math.factorial(len({x for x in labels if x}))


def bsg_metric_simulated(
    model: ErrorModel | str,
    metric: str,
    epsilon=None,
    *,
    labelled: bool = True,
    fusion_herald: str = "clicks",
) -> float:
    """Conditional expectation of ``metric`` given heralding, from sector simulation.

    Returns ``sum_c w_c P(c) P(H|c) E(X|c,H) / sum_c w_c P(c) P(H|c)`` with
    ``w_c = k_c!`` (``labelled``) or 1, where ``k_c`` is the number of
    distinct error states in sector ``c``.  SBB sectors always have
    ``k_c <= 1``.  The defaults reproduce :data:`CLOSED_FORMS`; pass
    ``labelled=False, fusion_herald="pairs"`` for plain sector weights and
    pair-resolved fusion heralding.
    """
    if isinstance(model, str):
        model = ErrorModel(model, 0 if epsilon is None else epsilon)
    elif epsilon is not None:
        model = ErrorModel(model.kind, epsilon)
    metric = metric.upper()
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    num = den = 0.0
    for sec in enumerate_sectors(model, 2 * N_PAIRS):
        p = float(sec.probability)
        if p == 0.0:
            continue
        data = sector_data(sec.labels, fusion_herald)
        w = p * (label_multiplicity(sec.labels) if labelled else 1)
        num += w * data.numerator_for(metric)
        den += w * data.herald_for(metric)
    return num / den


def sector_table(model: str) -> list[tuple[SectorAssignment, SectorData]]:
    """Sector assignments of ``model`` (probabilities at eps=1/2) with their data."""
    return [(s, sector_data(s.labels)) for s in enumerate_sectors(ErrorModel(model, Fraction(1, 2)), 2 * N_PAIRS)]


# ---------------------------------------------------------------------------
# tabulated closed forms

def _dec(*xs: str) -> tuple[Fraction, ...]:
    return tuple(Fraction(x) for x in xs)


# Coefficients in the Bernstein basis, highest error power first:
# q^4, q^3 p, q^2 p^2, q p^3, p^4 with q = eps, p = 1 - eps (OBB, SBB), and
# q^2, q p, p^2 with q = eps (2 - eps), p = 1 - q (OBP).
CLOSED_FORMS: dict[tuple[str, str], tuple[tuple[Fraction, ...], tuple[Fraction, ...]]] = {
    ("OBB", "F"): (_dec("0", "0", "0.0625", "0.0625", "0.125"), _dec("4.5", "4.5", "2.125", "0.625", "0.125")),
    ("SBB", "F"): (_dec("0", "0", "0.0625", "0.0625", "0.125"), _dec("0.125", "0.625", "1.0", "0.625", "0.125")),
    ("OBP", "F"): (_dec("0", "0", "0.125"), _dec("0.25", "0.25", "0.125")),
    ("OBB", "PF"): (_dec("0", "0", "0.0625", "0.0625", "0.125"), _dec("3.0", "3.0", "1.5", "0.5", "0.125")),
    ("SBB", "PF"): (_dec("0", "0", "0.0625", "0.0625", "0.125"), _dec("0.125", "0.5", "0.75", "0.5", "0.125")),
    ("OBP", "PF"): (_dec("0", "0", "0.125"), _dec("0.25", "0.25", "0.125")),
    ("OBB", "FF"): (
        _dec("0.421875", "0.3515625", "0.14453125", "0.0390625", "0.03125"),
        _dec("1.6875", "1.40625", "0.578125", "0.15625", "0.03125"),
    ),
    ("SBB", "FF"): (
        _dec("0.01953125", "0.05859375", "0.087890625", "0.0390625", "0.03125"),
        _dec("0.0703125", "0.234375", "0.2890625", "0.15625", "0.03125"),
    ),
    ("OBP", "FF"): (_dec("0.0390625", "0.03125", "0.03125"), _dec("0.140625", "0.09375", "0.03125")),
    ("OBB", "NS"): (
        _dec("1.6875", "1.40625", "0.578125", "0.15625", "0"),
        _dec("1.6875", "1.40625", "0.578125", "0.15625", "0.03125"),
    ),
    ("SBB", "NS"): (
        _dec("0.06640625", "0.234375", "0.2578125", "0.15625", "0"),
        _dec("0.0703125", "0.234375", "0.2890625", "0.15625", "0.03125"),
    ),
    ("OBP", "NS"): (_dec("0.1328125", "0.078125", "0"), _dec("0.140625", "0.09375", "0.03125")),
}


def _bernstein(coeffs: Sequence, q, p):
    deg = len(coeffs) - 1
    return sum(c * q ** (deg - i) * p**i for i, c in enumerate(coeffs))


def closed_form_terms(model: str, metric: str, epsilon):
    """Numerator and denominator of the tabulated expression at ``epsilon``."""
    key = (model.upper(), metric.upper())
    if key not in CLOSED_FORMS:
        raise KeyError(f"no tabulated expression for {key}")
    num, den = CLOSED_FORMS[key]
    if isinstance(epsilon, float):
        num = [float(c) for c in num]
        den = [float(c) for c in den]
    q = epsilon * (2 - epsilon) if key[0] == "OBP" else epsilon
    p = 1 - q
    return _bernstein(num, q, p), _bernstein(den, q, p)


def closed_form_eval(model: str, metric: str, epsilon):
    """Tabulated conditional expectation; exact when ``epsilon`` is rational."""
    num, den = closed_form_terms(model, metric, epsilon)
    return num / den


# ---------------------------------------------------------------------------
# sweeps and crossings


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {spec!r} must be start:stop:step")
        start, stop, step = (Fraction(x) for x in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int((stop - start) / step + Fraction(1, 10**9)) + 1
        grid = [float(start + i * step) for i in range(count)]
    else:
        grid = [float(x) for x in spec.split(",") if x]
    if not grid:
        raise ValueError("empty grid")
    for x in grid:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"grid value {x} outside [0, 1]")
    return grid


def sweep(models: Iterable[str], metrics: Iterable[str], grid: Iterable[float]) -> list[dict]:
    rows = []
    for model in sorted(m.upper() for m in models):
        for metric in metrics:
            metric = metric.upper()
            for eps in grid:
                sim = bsg_metric_simulated(model, metric, eps)
                cf = float(closed_form_eval(model, metric, float(eps)))
                rows.append(
                    {"model": model, "metric": metric, "epsilon": eps, "simulated": sim, "closed_form": cf, "abs_diff": abs(sim - cf)}
                )
    return rows


def sweep_and_emit(models, metrics, grid, out=None) -> str:
    """CSV table with one row per (model, metric, epsilon)."""
    rows = sweep(models, metrics, grid)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = ["model", "metric", "epsilon", "simulated", "closed_form", "abs_diff"]
    writer.writerow(cols)
    for r in rows:
        writer.writerow([r["model"], r["metric"]] + [format(r[c], ".17g") for c in cols[2:]])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def crossing(f, lo: float, hi: float) -> float:
    """Root of ``f`` in ``[lo, hi]`` by Brent's method."""
    from scipy.optimize import brentq

    return float(brentq(f, lo, hi, xtol=1e-14))


def metric_crossing(metric: str, model_a: str, model_b: str, lo: float = 1e-3, hi: float = 0.5, *, simulated: bool = True) -> float:
    """Error rate at which ``metric`` of ``model_a`` and ``model_b`` coincide."""
    fn = bsg_metric_simulated if simulated else (lambda m, x, e: float(closed_form_eval(m, x, float(e))))
    return crossing(lambda e: fn(model_a, metric, e) - fn(model_b, metric, e), lo, hi)
