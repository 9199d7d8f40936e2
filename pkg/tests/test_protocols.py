import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonsim.fock import MixtureState, PureState, superpose, tensor, trace_distance
from photonsim.noise import create_photons
from photonsim.protocols import (
    DEFAULT_DISTILL_ANGLES,
    SuperOp,
    analyzer_pairs,
    apply_superop,
    bell_state,
    distill_3,
    distill_mixed,
    distillation_objective,
    distillation_unitary,
    dual_rail_projection,
    generalized_x_measurement,
    ghz_analyzer,
    ghz_circuit_state,
    ghz_generate,
    ghz_generate_outcomes,
    ghz_state,
    pair_error_target,
    first_order_error_target,
    pauli_x,
    pauli_z,
    search_distillation_angles,
    type_i_fusion,
    type_ii_fusion,
)

QUBIT_0 = PureState.basis((1, 0))
QUBIT_1 = PureState.basis((0, 1))


def _x_input(c10, c01, xi=(1.0,), xi_prime=(1.0,)):
    """c10 |10>|1,0> + c01 |01>|0,1> with the measured photons in internal states xi' / xi."""
    k = max(len(xi), len(xi_prime))
    t10 = create_photons([(0, [1.0]), (2, list(xi_prime))], 4, k)
    t01 = create_photons([(1, [1.0]), (3, list(xi))], 4, k)
    return superpose([(c10, t10), (c01, t01)])


def _qubit_rho(mix):
    """2x2 density matrix of a single dual-rail qubit held by ideal photons."""
    out = np.zeros((2, 2), dtype=complex)
    for w, s in mix.normalized():
        v = np.array([s.inner(QUBIT_0.embed_internal(s.n_internal)).conjugate(), s.inner(QUBIT_1.embed_internal(s.n_internal)).conjugate()])
        out += w * np.outer(v, v.conj())
    return out


@pytest.mark.parametrize("c10,c01", [(0.6, 0.8), (1 / math.sqrt(2), 1j / math.sqrt(2)), (0.28, -0.96)])
def test_x_measurement_indistinguishable(c10, c01):
    outs = {h.record.pattern: h for h in generalized_x_measurement(_x_input(c10, c01), (2, 3))}
    for pattern, sign in (((1, 0), 1), ((0, 1), -1)):
        h = outs[pattern]
        assert h.record.success and h.record.x_value == sign
        assert h.probability == pytest.approx(0.5)
        target = superpose([(c10, QUBIT_0), (sign * c01, QUBIT_1)])
        assert h.state.normalized().expectation_projector(target) == pytest.approx(1.0)


def test_x_measurement_distinguishable_gives_even_mixture():
    c10, c01 = 0.6, 0.8
    outs = generalized_x_measurement(_x_input(c10, c01, xi=(0.0, 1.0)), (2, 3))
    for h in outs:
        if not h.record.success:
            continue
        rho = _qubit_rho(h.state)
        assert rho == pytest.approx(np.diag([c10**2, c01**2]), abs=1e-12)


def test_x_measurement_success_probability():
    # a vacuum term in the measured modes never heralds
    vac = create_photons([(0, [1.0]), (1, [1.0])], 4, 1)
    psi = superpose([(0.6, tensor(QUBIT_0, PureState.basis((1, 0)))), (0.0, vac), (0.8, tensor(QUBIT_1, PureState.basis((0, 1))))])
    total = sum(h.probability for h in generalized_x_measurement(psi, (2, 3)) if h.record.success)
    assert total == pytest.approx(1.0)
    psi = superpose([(0.6, tensor(QUBIT_0, PureState.basis((1, 0)))), (0.8, vac)])
    total = sum(h.probability for h in generalized_x_measurement(psi, (2, 3)) if h.record.success)
    assert total == pytest.approx(0.36)


def test_x_measurement_rejects_collision():
    with pytest.raises(ValueError):
        generalized_x_measurement(QUBIT_0, (1, 1))


@settings(max_examples=40, deadline=None)
@given(a=st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False), b=st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False))
def test_x_measurement_outcomes_differ_by_z(a, b):
    if abs(a) < 1e-3 or abs(b) < 1e-3:
        return
    outs = {h.record.pattern: h.state.normalized() for h in generalized_x_measurement(_x_input(a, b), (2, 3))}
    plus = outs[(1, 0)].branches[0][1]
    minus = outs[(0, 1)].branches[0][1]
    assert abs(abs(pauli_z(plus, 0).inner(minus)) - 1.0) < 1e-10


def _two_bell_pairs():
    b = bell_state(1, 1)
    return tensor(b, b)


def test_type_i_fusion_builds_three_ghz():
    outs = [h for h in type_i_fusion(_two_bell_pairs(), (3, 4)) if h.record.success]
    assert sum(h.probability for h in outs) == pytest.approx(0.5)
    for h in outs:
        rho = h.state.normalized()
        best = max(rho.expectation_projector(ghz_state(3, sign=s)) for s in (1, -1))
        assert best == pytest.approx(1.0)


def test_type_i_fusion_distinguishable_photons():
    first = bell_state(1, 1, n_internal=2)
    second = bell_state(1, 1)
    # second pair entirely in internal state 1
    second = second.map_keys(lambda key: tuple(v for x in key for v in (0, x)), n_internal=2)
    outs = [h for h in type_i_fusion(tensor(first, second), (3, 4)) if h.record.success]
    ghz_terms = {(1, 0) * 3: 0.5, (0, 1) * 3: 0.5}
    for h in outs:
        fid = 0.0
        for w, s in h.state.normalized():
            occs = {s.physical_occupation(k) for k in s.amplitudes}
            assert len(occs) == 1  # each branch is a product basis state
            fid += w * ghz_terms.get(occs.pop(), 0.0)
        assert fid == pytest.approx(0.5)


def test_analyzer_pairs():
    assert analyzer_pairs(3) == [(1, 2), (3, 4), (5, 0)]


def test_analyzer_rejects_bad_modes():
    with pytest.raises(ValueError):
        ghz_analyzer(ghz_state(2), 2, modes=[0, 0, 1, 2])
    with pytest.raises(ValueError):
        ghz_analyzer(ghz_state(2), 3)
    with pytest.raises(ValueError):
        ghz_analyzer(ghz_state(2), 2, herald="maybe")


def _analyzer_input(n, c10, c01, xi0=(1.0,)):
    """Ancilla qubit on modes 0, 1 entangled with (1,0)^n / (0,1)^n on 2n analyzer modes."""
    m = 2 + 2 * n
    k = len(xi0)
    t01 = [(1, [1.0])] + [(2 + 2 * i + 1, list(xi0) if i == 0 else [1.0]) for i in range(n)]
    t10 = [(0, [1.0])] + [(2 + (2 * i + 2) % (2 * n), [1.0]) for i in range(n)]
    return superpose([(c10, create_photons(t10, m, k)), (c01, create_photons(t01, m, k))])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_analyzer_sign_rule(n):
    # photons landing on the second mode of a pair pick up the minus sign, and
    # those are the even modes: n - s_odd of them
    c10, c01 = 0.6, 0.8j
    outs = [h for h in ghz_analyzer(_analyzer_input(n, c10, c01), n) if h.record.success]
    assert outs
    for h in outs:
        target = superpose([(c10, QUBIT_0), ((-1) ** (n - h.record.s_odd) * c01, QUBIT_1)])
        assert h.state.normalized().expectation_projector(target) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("t", [0.0, 0.5, math.pi / 2])
def test_analyzer_partial_overlap_coherence(n, t):
    c10, c01 = 0.6, 0.8j
    overlap = math.cos(t)
    for h in ghz_analyzer(_analyzer_input(n, c10, c01, (math.cos(t), math.sin(t))), n):
        if not h.record.success:
            continue
        rho = _qubit_rho(h.state)
        assert rho[0, 0] == pytest.approx(c10**2, abs=1e-12)
        assert rho[0, 1] == pytest.approx((-1) ** (n - h.record.s_odd) * c10 * np.conj(c01) * overlap, abs=1e-12)


def test_analyzer_filters_multi_photon_pair_terms():
    c10, c01 = 0.6, 0.8
    clean = _analyzer_input(2, c10, c01)
    junk = PureState.basis((0, 0, 1, 1, 0, 1))  # analyzer pair (3, 0) holds two photons
    noisy = superpose([(1.0, clean), (0.5, junk)])
    outs = [h for h in ghz_analyzer(noisy, 2) if h.record.success]
    for h in outs:
        target = superpose([(c10, QUBIT_0), ((-1) ** h.record.s_odd * c01, QUBIT_1)])
        assert h.state.normalized().expectation_projector(target) == pytest.approx(1.0, abs=1e-12)


def test_type_ii_fusion_measures_xx_and_zz():
    for s1 in (1, -1):
        for s2 in (1, -1):
            outs = [h for h in type_ii_fusion(bell_state(s1, s2), [0, 1, 2, 3]) if h.record.success]
            if s2 == -1:
                # ZZ = -1 never heralds, the analyzer projects onto ZZ = +1
                assert sum(h.probability for h in outs) == pytest.approx(0.0, abs=1e-12)
                continue
            assert sum(h.probability for h in outs) == pytest.approx(1.0)
            assert all(h.record.x_value == s1 for h in outs if h.probability > 1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_ghz_generation_ideal(n):
    p, mix = ghz_generate(n)
    assert p > 0
    assert mix.expectation_projector(ghz_state(n)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_ghz_generation_raw_sign_follows_s_odd(n):
    outs = ghz_generate_outcomes(n, (0,) * (2 * n), raw=True)
    assert outs
    for h in outs:
        sign = h.record.x_value
        assert h.state.normalized().expectation_projector(ghz_state(n, sign=sign)) == pytest.approx(1.0, abs=1e-12)


def test_ghz_generation_raw_keeps_sign():
    _, mix = ghz_generate(2, raw=True)
    total = mix.expectation_projector(ghz_state(2)) + mix.expectation_projector(ghz_state(2, sign=-1))
    assert total == pytest.approx(1.0)


def test_ghz_generation_bad_sector():
    with pytest.raises(ValueError):
        ghz_circuit_state(2, (0, 0, 0))
    with pytest.raises(ValueError):
        ghz_circuit_state(1, (0, 0))


def test_first_order_error_n2():
    n = 2
    for i in range(n):
        branches = []
        for photon in (2 * i, 2 * i + 1):
            labels = [0] * (2 * n)
            labels[photon] = 1
            branches += ghz_generate(n, labels)[1].scaled(0.5).branches
        got = dual_rail_projection(MixtureState(branches)).normalized()
        want = dual_rail_projection(first_order_error_target(n, i)).normalized()
        assert trace_distance(got, want) < 1e-9


def test_pair_error_n2_needs_no_projection():
    labels = [1, 1, 0, 0]
    _, mix = ghz_generate(2, labels)
    assert dual_rail_projection(mix).trace == pytest.approx(1.0)
    assert trace_distance(mix, pair_error_target(2, 0)) < 1e-9


def test_pauli_z_mixture_kills_coherence():
    b = MixtureState.pure(ghz_state(3))
    mixed = apply_superop(SuperOp("Z", 1), b)
    want = MixtureState([(0.5, PureState.basis((1, 0) * 3)), (0.5, PureState.basis((0, 1) * 3))])
    assert trace_distance(mixed, want) < 1e-12


@pytest.mark.parametrize("kind", ["X", "Z"])
def test_pauli_mixture_idempotent(kind):
    b = MixtureState.pure(superpose([(0.3, PureState.basis((1, 0, 1, 0))), (0.7j, PureState.basis((0, 1, 1, 0))), (0.2, PureState.basis((0, 1, 0, 1)))]))
    once = apply_superop(SuperOp(kind, 0), b)
    twice = apply_superop(SuperOp.compose(SuperOp(kind, 0), SuperOp(kind, 0)), b)
    assert trace_distance(once, twice) < 1e-12


def test_pauli_operators():
    assert pauli_x(QUBIT_0, 0).inner(QUBIT_1) == pytest.approx(1.0)
    assert pauli_z(QUBIT_1, 0).inner(QUBIT_1) == pytest.approx(-1.0)
    with pytest.raises(IndexError):
        pauli_x(QUBIT_0, 1)


def test_superop_unknown_kind():
    with pytest.raises(ValueError):
        apply_superop(SuperOp("Y", 0), QUBIT_0)


def test_distinguish_moves_photon_to_fresh_copy():
    from photonsim.protocols import distinguish

    out = distinguish(ghz_state(2), 0)
    assert out.n_internal == 2
    assert abs(out.inner(ghz_state(2))) < 1e-15


def test_distillation_unitary_balanced():
    u = distillation_unitary(DEFAULT_DISTILL_ANGLES)
    assert np.allclose(np.abs(u) ** 2, 1 / 3, atol=1e-9)


def test_distill_ideal_and_single_error_rates():
    assert distill_3(None, [0, 0, 0]).probability == pytest.approx(1 / 3, abs=0.01)
    for i in range(3):
        labels = [int(j == i) for j in range(3)]
        assert distill_3(None, labels).probability == pytest.approx(1 / 9, abs=0.01)


def test_distill_accepts_internal_vectors():
    r = distill_3(None, [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    assert r.probability == pytest.approx(1 / 9, abs=1e-9)


def test_distill_suppresses_error():
    eps = 0.05
    r = distill_mixed(None, eps)
    assert 0.28 <= r.error / eps <= 0.40


def test_distill_small_eps_ratio_near_third():
    eps = 1e-4
    assert distill_mixed(None, eps).error / eps == pytest.approx(1 / 3, abs=0.01)


def test_distill_wrong_photon_count():
    with pytest.raises(ValueError):
        distill_3(None, [0, 0])


def test_objective_at_default_angles():
    obj = distillation_objective(DEFAULT_DISTILL_ANGLES)
    assert obj["ideal_rate"] == pytest.approx(1 / 3, abs=1e-9)
    assert obj["error_rate"] == pytest.approx(1 / 9, abs=1e-9)
    assert obj["error_spread"] < 1e-9


def test_angle_search_recovers_rates():
    angles = search_distillation_angles(np.random.default_rng(3), starts=2)
    obj = distillation_objective(angles)
    assert obj["ideal_rate"] == pytest.approx(1 / 3, abs=0.01)
    assert obj["error_rate"] == pytest.approx(1 / 9, abs=0.01)
