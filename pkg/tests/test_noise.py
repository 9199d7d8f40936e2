import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonsim.circuit import Beamsplitter, Circuit, Loss, PnrMeasure, Snap, apply_element, layered_circuit, output_distribution
from photonsim.fock import MixtureState, PureState, apply_beamsplitter, apply_transfer, fock_basis, post_select, superpose, trace_distance
from photonsim.noise import (
    ErrorModel,
    MODELS,
    apply_internal,
    apply_loss,
    commute_losses,
    create_photons,
    enumerate_sectors,
    ideal_input,
    loss_block,
    loss_channel,
    sector_input_state,
)

from oracles import apply_kraus, loss_kraus, random_unitary


def test_loss_channel_single_photon():
    eta = Fraction(3, 10)
    assert loss_channel(1, 1, eta) == [(eta, (1, 1)), (1 - eta, (0, 0))]


def test_loss_channel_two_photons():
    eta = Fraction(2, 5)
    terms = loss_channel(2, 2, eta)
    assert terms == [(eta**2, (2, 2)), (2 * eta * (1 - eta), (1, 1)), ((1 - eta) ** 2, (0, 0))]


@pytest.mark.parametrize("n1,n2", [(0, 0), (3, 1), (2, 4)])
def test_loss_channel_identity_at_unit_eta(n1, n2):
    assert loss_channel(n1, n2, 1.0) == [(1.0, (n1, n2))] + [(0.0, (n1 - k, n2 - k)) for k in range(1, min(n1, n2) + 1)]


@pytest.mark.parametrize("eta", [-0.1, 1.5])
def test_loss_channel_rejects_bad_eta(eta):
    with pytest.raises(ValueError):
        loss_channel(1, 1, eta)


@pytest.mark.parametrize("n_max", [2, 4])
@pytest.mark.parametrize("eta", [0.0, 0.3, 0.77])
def test_loss_channel_matches_kraus(n_max, eta):
    ops = loss_kraus(n_max, eta)
    for n1 in range(n_max + 1):
        for n2 in range(n_max + 1):
            e = np.zeros((n_max + 1, n_max + 1))
            e[n1, n2] = 1.0
            dense = apply_kraus(ops, e)
            ours = np.zeros_like(dense)
            for c, (a, b) in loss_channel(n1, n2, eta):
                ours[a, b] += float(c)
            assert np.max(np.abs(dense - ours)) < 1e-12


def test_loss_block_unitary():
    b = loss_block(0.4)
    assert np.allclose(b.conj().T @ b, np.eye(2))


def test_apply_loss_unit_eta_is_identity():
    psi = PureState.basis((2, 1))
    mix = apply_loss(psi, 0, 1.0)
    assert len(mix) == 1 and mix.branches[0][1].inner(psi) == pytest.approx(1.0)


def test_apply_loss_two_photon_weights():
    eta = 0.35
    mix = apply_loss(PureState.basis((2,)), 0, eta)
    weights = {s.photon_number: w for w, s in mix}
    assert weights[2] == pytest.approx(eta**2)
    assert weights[1] == pytest.approx(2 * eta * (1 - eta))
    assert weights[0] == pytest.approx((1 - eta) ** 2)


@pytest.mark.parametrize("n", range(5))
def test_apply_loss_matches_kraus_on_fock_states(n):
    eta = 0.6
    rho = np.zeros((n + 1, n + 1))
    rho[n, n] = 1.0
    dense = apply_kraus(loss_kraus(n, eta), rho)
    ours = np.zeros_like(dense)
    for w, s in apply_loss(PureState.basis((n,)), 0, eta):
        v = np.array([s.amplitude((j,)) for j in range(n + 1)])
        ours += w * np.outer(v, v.conj()).real
    assert np.max(np.abs(dense - ours)) < 1e-12


def test_apply_loss_sampled_branch():
    rng = np.random.default_rng(0)
    counts = [apply_loss(PureState.basis((1, 0)), 0, 0.25, rng=rng).branches[0][1].photon_number for _ in range(4000)]
    assert np.mean(counts) == pytest.approx(0.25, abs=0.03)


def test_apply_loss_mode_out_of_range():
    with pytest.raises(IndexError):
        apply_loss(PureState.basis((1, 0)), 3, 0.5)


def _random_two_mode_state(rng, n):
    terms = [(complex(*rng.normal(size=2)), PureState.basis(b)) for b in fock_basis(n, 2)]
    return superpose(terms)


@pytest.mark.parametrize("seed", range(5))
def test_loss_composition(seed):
    rng = np.random.default_rng(seed)
    psi = _random_two_mode_state(rng, 2)
    e1, e2 = rng.uniform(size=2)
    twice = MixtureState([(w * w2, s2) for w, s in apply_loss(psi, 0, e1) for w2, s2 in apply_loss(s, 0, e2)])
    once = apply_loss(psi, 0, e1 * e2)
    assert trace_distance(twice, once) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4), eta=st.floats(0.0, 1.0))
def test_loss_trace_preserving(seed, n, eta):
    psi = _random_two_mode_state(np.random.default_rng(seed), n)
    assert apply_loss(psi, 1, eta).trace == pytest.approx(1.0, abs=1e-12)


def _run_on(state, circuit):
    mix = MixtureState.pure(state)
    for e in circuit.elements:
        mix = apply_element(mix, e)
    return mix


def test_commute_losses_fig1_topology():
    eta = 0.9
    layers = [[(0, 1), (2, 3)], [(1, 2)], [(0, 1), (2, 3)]]
    circ = layered_circuit(4, layers, (1, 1, 1, 1), eta=eta)
    out = commute_losses(circ)
    losses = [e for e in out.elements if isinstance(e, Loss)]
    assert len(losses) == 4
    assert all(e.eta == pytest.approx(eta**3) for e in losses)
    assert all(isinstance(e, Loss) for e in out.elements[:4])


def test_commute_losses_single_asymmetric_loss_unchanged():
    circ = Circuit(2, (1, 1), (Beamsplitter(0, 1), Loss(0, 0.5)))
    out = commute_losses(circ)
    assert out.elements == circ.elements


def test_commute_losses_merges_consecutive():
    circ = Circuit(1, (1,), (Loss(0, 0.5), Loss(0, 0.4)))
    out = commute_losses(circ)
    assert len(out.elements) == 1 and out.elements[0].eta == pytest.approx(0.2)


def test_commute_losses_leaves_other_elements_alone():
    circ = Circuit(2, (1, 1), (Snap(0, 1, 0.3), Loss(0, 0.5), Loss(1, 0.5)))
    assert commute_losses(circ) is circ


def _loss_circuit(pairs, etas):
    elements = []
    for (i, j), (a, b) in zip(pairs, etas):
        elements += [Beamsplitter(i, j, random_unitary(2, np.random.default_rng(7 * i + j))), Loss(i, a), Loss(j, b)]
    return Circuit(3, (1, 1, 1), tuple(elements))


loss_circuits = st.builds(
    _loss_circuit,
    st.lists(st.sampled_from([(0, 1), (1, 2), (0, 2)]), min_size=1, max_size=4),
    st.lists(st.tuples(st.sampled_from([0.5, 0.8, 1.0]), st.sampled_from([0.5, 0.8, 1.0])), min_size=4, max_size=4),
)


@settings(max_examples=100, deadline=None)
@given(circ=loss_circuits, seed=st.integers(0, 2**32 - 1))
def test_commute_losses_channel_equivalence(circ, seed):
    rng = np.random.default_rng(seed)
    terms = [(complex(*rng.normal(size=2)), PureState.basis(b)) for b in fock_basis(2, 3)]
    psi = superpose(terms)
    a = _run_on(psi, circ)
    b = _run_on(psi, commute_losses(circ))
    assert trace_distance(a, b) < 1e-9


@pytest.mark.parametrize("model", MODELS)
def test_sector_probabilities_sum_to_one_exactly(model):
    sectors = enumerate_sectors(model, 4, Fraction(1, 7))
    assert sum(s.probability for s in sectors) == 1


def test_obb_two_photons():
    eps = Fraction(1, 5)
    got = {s.labels: s.probability for s in enumerate_sectors("OBB", 2, eps)}
    assert got == {(0, 0): (1 - eps) ** 2, (0, 1): (1 - eps) * eps, (1, 0): eps * (1 - eps), (1, 2): eps**2}


def test_sbb_two_photons_share_label():
    eps = Fraction(1, 5)
    got = {s.labels: s.probability for s in enumerate_sectors("SBB", 2, eps)}
    assert got == {(0, 0): (1 - eps) ** 2, (0, 1): (1 - eps) * eps, (1, 0): eps * (1 - eps), (1, 1): eps**2}


def test_obp_ideal_pair_probability():
    eps = Fraction(1, 10)
    sectors = enumerate_sectors("OBP", 4, eps)
    assert {s.labels for s in sectors} == {(0, 0, 0, 0), (1, 1, 0, 0), (0, 0, 1, 1), (1, 1, 2, 2)}
    ideal = [s for s in sectors if s.labels == (0, 0, 0, 0)][0]
    assert ideal.probability == ((1 - eps) ** 2) ** 2


def test_obp_odd_photons():
    with pytest.raises(ValueError):
        enumerate_sectors("OBP", 3, 0.1)


@pytest.mark.parametrize("bad", [{"model": "XYZ", "epsilon": 0.1}, {"model": "OBB", "epsilon": 1.2}])
def test_error_model_validation(bad):
    with pytest.raises(ValueError):
        ErrorModel.from_dict(bad)


def test_error_model_from_dict():
    m = ErrorModel.from_dict({"model": "obp", "epsilon": 0.1})
    assert m.kind == "OBP" and m.pair_error == pytest.approx(0.19)


def test_sector_input_ideal_on_copy_zero():
    psi = sector_input_state((0, 0), (1, 1), n_internal=3)
    assert psi.amplitudes == ideal_input((1, 1), 3).amplitudes


def test_sector_input_rejects_big_label():
    from photonsim.fock import DimensionError

    with pytest.raises(DimensionError):
        sector_input_state((0, 2), (1, 1), n_internal=2)


def test_sector_input_length_mismatch():
    with pytest.raises(ValueError):
        sector_input_state((0,), (1, 1))


def test_hom_with_distinguishable_sector():
    out = apply_beamsplitter(sector_input_state((0, 1), (1, 1)), 0, 1)
    prob, _ = post_select(out, [0, 1], [1, 1])
    assert prob == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("eps", [0.0, 0.2, 0.9])
def test_sector_mixture_matches_partial_overlap(eps):
    # one photon with internal state sqrt(1-eps)|0> + sqrt(eps)|1> against an ideal photon
    psi = create_photons([(0, [1.0]), (1, [math.sqrt(1 - eps), math.sqrt(eps)])], 2, 2)
    direct, _ = post_select(apply_beamsplitter(psi, 0, 1), [0, 1], [1, 1])
    mixed = 0.0
    for labels, w in (((0, 0), 1 - eps), ((0, 1), eps)):
        p, _ = post_select(apply_beamsplitter(sector_input_state(labels, (1, 1)), 0, 1), [0, 1], [1, 1])
        mixed += w * p
    assert direct == pytest.approx(mixed, abs=1e-10)


def _convolve(d1, d2):
    out = {}
    for a, p in d1.items():
        for b, q in d2.items():
            key = tuple(x + y for x, y in zip(a, b))
            out[key] = out.get(key, 0.0) + p * q
    return out


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), labels=st.lists(st.integers(0, 1), min_size=3, max_size=3))
def test_orthogonal_copies_never_interfere(seed, labels):
    u = random_unitary(3, np.random.default_rng(seed))
    joint = output_distribution(MixtureState.pure(apply_transfer(u, sector_input_state(labels, (1, 1, 1)))))
    parts = []
    for lab in set(labels):
        occ = tuple(int(labels[p] == lab) for p in range(3))
        parts.append(output_distribution(MixtureState.pure(apply_transfer(u, PureState.basis(occ)))))
    sep = parts[0] if len(parts) == 1 else _convolve(parts[0], parts[1])
    for key in set(joint) | set(sep):
        assert joint.get(key, 0.0) == pytest.approx(sep.get(key, 0.0), abs=1e-12)


def test_internal_hook_preserves_physical_statistics():
    psi = sector_input_state((0, 1), (1, 1))
    w = random_unitary(2, np.random.default_rng(2))
    out = apply_internal(psi, 0, w)
    assert out.norm_squared() == pytest.approx(1.0)
    assert output_distribution(MixtureState.pure(out)) == pytest.approx({(1, 1): 1.0})


def test_measurement_element_post_selects():
    circ = Circuit(2, (1, 1), (Beamsplitter(0, 1), PnrMeasure((0,), (1,))))
    mix = _run_on(circ.input_state(), circ)
    assert mix.trace < 1e-24
