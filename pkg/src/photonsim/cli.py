"""Command-line front end.

Every subcommand writes machine-readable output (CSV or JSON lines) with
floats at 17 significant digits.  Configuration errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

WORKERS_ENV = "PHOTONSIM_WORKERS"


class ConfigError(Exception):
    """Invalid user configuration; reported on stderr with exit status 2."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _num(x):
    """JSON-ready float (17 significant digits survive json's repr)."""
    return float(fmt(x))


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write output file {out!r}: {exc.strerror}") from None


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path!r}: {exc.msg} at line {exc.lineno}") from None


def _load_circuit(path: str):
    from .circuit import Circuit

    try:
        return Circuit.from_dict(_load_json(path))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid circuit in {path!r}: {exc}") from None


def _workers(args) -> int:
    if getattr(args, "workers", None) is not None:
        w = args.workers
    else:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            w = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if w < 1:
        raise ConfigError("worker count must be at least 1")
    return w


def _int_range(spec: str) -> list[int]:
    """``a..b`` (inclusive) or a comma-separated list of integers."""
    try:
        if ".." in spec:
            a, b = spec.split("..")
            vals = list(range(int(a), int(b) + 1))
        else:
            vals = [int(x) for x in spec.split(",") if x]
    except ValueError:
        raise ConfigError(f"cannot parse integer range {spec!r}") from None
    if not vals:
        raise ConfigError(f"empty integer range {spec!r}")
    return vals


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    from .circuit import output_distribution, run_circuit

    circ = _load_circuit(args.circuit)
    rng = np.random.default_rng(args.seed) if args.sample_loss else None
    mix = run_circuit(circ, rng)
    dist = output_distribution(mix)
    lines = [json.dumps({"herald_probability": _num(mix.trace)})]
    lines += [json.dumps({"pattern": list(p), "probability": _num(v)}) for p, v in dist.items()]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_bsg_sweep(args) -> int:
    from .bsg import METRICS, parse_grid, sweep_and_emit
    from .noise import MODELS

    models = [m.strip().upper() for m in args.models.split(",") if m.strip()]
    metrics = [m.strip().upper() for m in args.metrics.split(",") if m.strip()]
    for m in models:
        if m not in MODELS:
            raise ConfigError(f"unknown error model {m!r}; choose from {', '.join(MODELS)}")
    for m in metrics:
        if m not in METRICS:
            raise ConfigError(f"unknown metric {m!r}; choose from {', '.join(METRICS)}")
    try:
        grid = parse_grid(args.eps)
    except ValueError as exc:
        raise ConfigError(f"bad epsilon grid: {exc}") from None
    _emit(sweep_and_emit(models, metrics, grid), args.out)
    return 0


def _ghz_record(n: int, model: str | None, epsilon: float | None) -> dict:
    from .noise import ErrorModel, enumerate_sectors
    from .protocols import ghz_generate, ghz_state

    target = ghz_state(n)
    if model is None:
        p, mix = ghz_generate(n)
        return {"n": n, "model": "ideal", "herald_probability": _num(p), "fidelity": _num(mix.expectation_projector(target))}
    em = ErrorModel(model, epsilon)
    num = den = 0.0
    for sec in enumerate_sectors(em, 2 * n):
        if sec.probability == 0:
            continue
        p, mix = ghz_generate(n, sec)
        w = float(sec.probability) * p
        den += w
        if p > 0:
            num += w * mix.expectation_projector(target)
    return {
        "n": n,
        "model": em.kind,
        "epsilon": _num(float(epsilon)),
        "herald_probability": _num(den),
        "fidelity": _num(num / den),
    }


def cmd_ghz(args) -> int:
    if args.n < 2:
        raise ConfigError("GHZ generation needs --n >= 2")
    if args.ideal and args.model:
        raise ConfigError("--ideal and --model are mutually exclusive")
    if args.model and args.epsilon is None:
        raise ConfigError("--model needs --epsilon")
    if args.epsilon is not None and not 0.0 <= args.epsilon <= 1.0:
        raise ConfigError("--epsilon must lie in [0, 1]")
    if args.model and args.model.upper() not in ("OBB", "SBB", "OBP"):
        raise ConfigError(f"unknown error model {args.model!r}")
    rec = _ghz_record(args.n, args.model.upper() if args.model else None, args.epsilon)
    _emit(json.dumps(rec) + "\n", args.out)
    return 0


def cmd_distill(args) -> int:
    from .protocols import DEFAULT_DISTILL_ANGLES, distill_3, distill_mixed

    if args.angles:
        try:
            angles = [float(x) for x in args.angles.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse angles {args.angles!r}") from None
        if len(angles) != 6:
            raise ConfigError(f"--angles needs 6 values, got {len(angles)}")
    else:
        angles = list(DEFAULT_DISTILL_ANGLES)
    if not 0.0 < args.epsilon <= 1.0:
        raise ConfigError("--epsilon must lie in (0, 1]")
    ideal = distill_3(angles, [0, 0, 0]).probability
    single = [distill_3(angles, [int(j == i) for j in range(3)]).probability for i in range(3)]
    mixed = distill_mixed(angles, args.epsilon, args.model.upper())
    rec = {
        "angles": [_num(a) for a in angles],
        "ideal_rate": _num(ideal),
        "single_error_rates": [_num(x) for x in single],
        "epsilon": _num(args.epsilon),
        "model": args.model.upper(),
        "herald_probability": _num(mixed.probability),
        "output_epsilon": _num(mixed.error),
        "ratio": _num(mixed.error / args.epsilon),
    }
    _emit(json.dumps(rec) + "\n", args.out)
    return 0


def _parse_matrix(data) -> np.ndarray:
    def entry(z):
        if isinstance(z, (list, tuple)):
            if len(z) != 2:
                raise ConfigError("complex entries must be [re, im] pairs")
            return complex(float(z[0]), float(z[1]))
        if isinstance(z, (int, float)):
            return complex(z)
        if isinstance(z, str):
            return complex(z.replace(" ", ""))
        raise ConfigError(f"unsupported matrix entry {z!r}")

    if isinstance(data, dict):
        data = data.get("matrix")
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ConfigError("matrix must be a non-empty list of rows")
    try:
        a = np.array([[entry(z) for z in row] for row in data], dtype=complex)
    except ValueError as exc:
        raise ConfigError(f"bad matrix entry: {exc}") from None
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"matrix must be square, got {len(data)} rows of unequal or different length")
    return a


def cmd_perm(args) -> int:
    from .coherent import glynn_permanent

    a = _parse_matrix(_load_json(args.matrix))
    p = glynn_permanent(a)
    if np.isrealobj(a) or abs(p.imag) <= 1e-12 * max(1.0, abs(p)):
        # integer-valued results print without a trailing fraction
        val = p.real
        text = str(int(round(val))) if abs(val - round(val)) <= 1e-9 * max(1.0, abs(val)) else fmt(val)
    else:
        text = json.dumps([_num(p.real), _num(p.imag)])
    _emit(text + "\n", args.out)
    return 0


def cmd_welch(args) -> int:
    from .designs import welch_sweep

    if args.n < 1 or args.m < 1:
        raise ConfigError("--n and --m must be positive")
    if args.samples < 2:
        raise ConfigError("--samples must be at least 2")
    ns = _int_range(args.ns)
    if min(ns) < 0:
        raise ConfigError("NS-gate counts must be non-negative")
    rows = welch_sweep(args.n, args.m, ns, args.samples, args.seed, _workers(args))
    lines = ["n,m,N_NS,ratio,stderr"]
    lines += [f"{r['n']},{r['m']},{r['N_NS']},{fmt(r['ratio'])},{fmt(r['stderr'])}" for r in rows]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_frame_potential(args) -> int:
    from .designs import frame_potential, haar_sampler, lo_sampler
    from .fock import fock_dimension

    if args.t < 1 or args.samples < 2:
        raise ConfigError("--t must be >= 1 and --samples >= 2")
    if args.ensemble == "haar":
        if not args.d or args.d < 1:
            raise ConfigError("haar ensemble needs --d >= 1")
        sampler, d = haar_sampler(args.d), args.d
    else:
        if not args.n or not args.m or args.n < 1 or args.m < 1:
            raise ConfigError("lo ensemble needs --n >= 1 and --m >= 1")
        d = fock_dimension(args.n, args.m)
        if args.d is not None and args.d != d:
            raise ConfigError(f"--d {args.d} disagrees with C(n+m-1, n) = {d}")
        sampler = lo_sampler(args.n, args.m)
    est = frame_potential(sampler, args.t, args.samples, np.random.default_rng(args.seed))
    rec = {"ensemble": args.ensemble, "d": d, "t": args.t, "mean": _num(est.mean), "stderr": _num(est.stderr), "samples": est.samples}
    _emit(json.dumps(rec) + "\n", args.out)
    return 0


def cmd_coherent_sim(args) -> int:
    from .circuit import Beamsplitter, Phase, Snap
    from .coherent import PrecisionError, apply_lo_coherent, apply_snap_coherent, fock_product, sample_fock_measurement

    circ = _load_circuit(args.circuit)
    if circ.internal_modes != 1:
        raise ConfigError("coherent-sim supports ideal photons only (internal_modes = 1)")
    if args.shots < 1:
        raise ConfigError("--shots must be positive")
    try:
        state = fock_product(circ.input, args.eps)
        for e in circ.elements:
            if isinstance(e, Beamsplitter):
                u = np.eye(circ.modes, dtype=complex)
                u[np.ix_([e.i, e.j], [e.i, e.j])] = e.block
                state = apply_lo_coherent(u, state)
            elif isinstance(e, Phase):
                u = np.eye(circ.modes, dtype=complex)
                u[e.mode, e.mode] = np.exp(1j * e.angle)
                state = apply_lo_coherent(u, state)
            elif isinstance(e, Snap):
                state = apply_snap_coherent(state, e.mode, e.k, e.theta, circ.photons)
            else:
                raise ConfigError(f"coherent-sim does not support {type(e).__name__} elements")
        state = state.dedup().normalize()
        shots = sample_fock_measurement(state, np.random.default_rng(args.seed), shots=args.shots, cutoff=circ.photons)
    except PrecisionError as exc:
        raise ConfigError(f"coherent approximation too coarse: {exc}") from None
    _emit("".join(json.dumps({"pattern": list(s)}) + "\n" for s in shots), args.out)
    return 0


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="photonsim", description="Exact linear-optics simulation and diagnostics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a JSON circuit and print the output distribution")
    s.add_argument("--circuit", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sample-loss", action="store_true", help="sample loss branches instead of enumerating")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bsg-sweep", help="Bell-state-generation metrics versus tabulated forms")
    s.add_argument("--models", default="obb,sbb,obp")
    s.add_argument("--metrics", default="f,pf,ff,ns")
    s.add_argument("--eps", default="0:0.3:0.01", help="start:stop:step or comma list")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bsg_sweep)

    s = sub.add_parser("ghz", help="n-GHZ generation fidelity and herald probability")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--ideal", action="store_true")
    s.add_argument("--model")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ghz)

    s = sub.add_parser("distill", help="three-photon distinguishability distillation")
    s.add_argument("--angles", help="six comma-separated values theta1,phi1,theta2,phi2,theta3,phi3")
    s.add_argument("--epsilon", type=float, default=0.05)
    s.add_argument("--model", default="SBB", choices=["SBB", "OBB", "sbb", "obb"])
    s.add_argument("--out")
    s.set_defaults(func=cmd_distill)

    s = sub.add_parser("perm", help="matrix permanent by Glynn's formula")
    s.add_argument("--matrix", required=True, help="JSON file: list of rows; complex entries as [re, im]")
    s.add_argument("--out")
    s.set_defaults(func=cmd_perm)

    s = sub.add_parser("welch", help="Welch ratio of linear optics interleaved with NS gates")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--ns", default="0..8", help="a..b or comma list")
    s.add_argument("--samples", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, help=f"thread count (default ${WORKERS_ENV} or 1)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_welch)

    s = sub.add_parser("frame-potential", help="Monte Carlo frame potential")
    s.add_argument("--ensemble", choices=["haar", "lo"], required=True)
    s.add_argument("--d", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--t", type=int, choices=[1, 2], required=True)
    s.add_argument("--samples", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_frame_potential)

    s = sub.add_parser("coherent-sim", help="sample a JSON circuit with the coherent-rank backend")
    s.add_argument("--circuit", required=True)
    s.add_argument("--shots", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eps", type=float, default=0.02)
    s.add_argument("--out")
    s.set_defaults(func=cmd_coherent_sim)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"photonsim {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OverflowError) as exc:
        print(f"photonsim {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
