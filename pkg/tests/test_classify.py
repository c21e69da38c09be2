import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qirt import classify as C, linalg, qobjects as Q
from qirt.classify import Relaxation, Status

seeds = st.integers(0, 2**32 - 1)
EX1 = Q.example1_instrument()
IDENT = Q.one_outcome(Q.identity_channel(2))
Z, X = Q.pauli_pvm("z"), Q.pauli_pvm("x")


def dep(t, d=2):
    return Q.one_outcome(Q.depolarizing(d, t))


def noisy(povms, t):
    ch = Q.depolarizing(2, t)
    return [Q.Povm([Q.dual_apply(ch, e) for e in p.elements]) for p in povms]


def mub_family():
    return C.WitnessFamily([(Z, X)], "MUB pair")


# trash-and-prepare ---------------------------------------------------------


def test_trash_and_prepare():
    assert C.is_trash_and_prepare(Q.one_outcome(Q.trace_and_prepare(linalg.proj(linalg.ket(0, 2)), 2))).member
    assert C.is_trash_and_prepare(IDENT).status is Status.NONMEMBER
    assert C.is_trash_and_prepare(EX1).status is Status.NONMEMBER


def test_trash_and_prepare_multi_outcome(rng):
    assert C.is_trash_and_prepare(Q.random_trash_prepare_instrument(2, 3, 3, rng)).member


# entanglement breaking -----------------------------------------------------


def test_eb_depolarizing_threshold():
    assert C.is_entanglement_breaking(dep(0.3)).member
    assert C.is_entanglement_breaking(dep(0.34)).status is Status.NONMEMBER


def test_eb_example1():
    v = C.is_entanglement_breaking(EX1)
    assert v.status is Status.NONMEMBER and v.relaxation is Relaxation.EXACT
    assert v.margin >= 1e-6


def test_ppt_relaxation_beyond_exact_regime():
    v = C.is_entanglement_breaking(dep(0.2, d=3))
    assert v.status is Status.INCONCLUSIVE and v.relaxation is Relaxation.PPT
    assert C.is_entanglement_breaking(dep(0.5, d=3)).status is Status.NONMEMBER
    assert C.is_entanglement_breaking(Q.one_outcome(Q.random_channel(2, 3, np.random.default_rng(1)))).relaxation is Relaxation.EXACT


def test_web():
    assert C.is_weak_entanglement_breaking(EX1).member
    assert C.is_weak_entanglement_breaking(IDENT).status is Status.NONMEMBER


@given(seeds)
@settings(max_examples=10)
def test_eb_implies_web(seed):
    inst = Q.random_eb_instrument(2, 2, 3, np.random.default_rng(seed))
    assert C.is_entanglement_breaking(inst).member
    assert C.is_weak_entanglement_breaking(inst).member


# joint measurability -------------------------------------------------------


def test_commuting_pvms_compatible():
    v = C.joint_measurement([Z, Z])
    assert v.member and v.margin >= 1e-8
    g = v.certificate["joint"]
    for a in range(2):
        assert np.allclose(sum(g.get((a, b), 0 * Z[a]) for b in range(2)), Z[a], atol=1e-8)


def _check_witness(povms, cert):
    """Independent verification of a dual witness for POVMs."""
    fs, y = cert["witness_F"], cert["witness_Y"].T
    for f in itertools.chain(*fs):
        assert linalg.min_eig(f) >= -1e-10
    for x in itertools.product(*[range(len(p)) for p in povms]):
        assert linalg.min_eig(y - sum(fs[i][a] for i, a in enumerate(x))) >= -1e-9
    tr = np.trace(y).real
    return (sum(np.trace(fs[i][a] @ p[a]).real for i, p in enumerate(povms) for a in range(len(p))) - tr) / tr


def test_mub_pair_incompatible_with_certificate():
    v = C.joint_measurement([Z, X])
    assert v.status is Status.NONMEMBER and v.margin >= 1e-6
    assert _check_witness([Z, X], v.certificate) >= v.margin - 1e-9


def test_unsharp_x_with_sharp_z_incompatible():
    unsharp_x = noisy([X], 1 / 3)[0]
    v = C.joint_measurement([unsharp_x, Z])
    assert v.status is Status.NONMEMBER
    assert _check_witness([unsharp_x, Z], v.certificate) > 0


@pytest.mark.parametrize("t, member", [(2 / 3, True), (0.70, True), (0.72, False)])
def test_noisy_mub_boundary(t, member):
    assert C.joint_measurement(noisy([Z, X], t)).member is member


def test_coarse_graining_keeps_compatibility():
    pair = noisy([Z, X], 0.5)
    h = [Q.heisenberg_measurement(Q.one_outcome(Q.identity_channel(2)), p) for p in pair]
    assert C.joint_measurement(h).member
    table = np.zeros((2, 2))
    table[:, 0] = 1.0
    assert C.joint_measurement([Q.coarse_grain(p, table) for p in h]).member
    big = Q.heisenberg_measurement(Q.example1_instrument(), pair[0]), Q.heisenberg_measurement(Q.example1_instrument(), pair[1])
    assert C.joint_measurement(list(big)).member
    assert C.joint_measurement([Q.coarse_grain(p, Q.example2_table()) for p in big]).member


# incompatibility breaking --------------------------------------------------


def test_example1_not_ib():
    a, b = Q.example2_pair()
    v = C.breaks_incompatibility(EX1, C.WitnessFamily([(a, b)]))
    assert v.status is Status.NONMEMBER and v.relaxation is Relaxation.EXACT


def test_depolarizing_five_twelfths_ib():
    v = C.breaks_incompatibility(dep(5 / 12), mub_family())
    assert v.member and v.relaxation is Relaxation.WITNESS


@given(seeds)
@settings(max_examples=4)
def test_eb_instruments_break_witnesses(seed):
    inst = Q.random_eb_instrument(2, 2, 2, np.random.default_rng(seed))
    assert C.breaks_incompatibility(inst).status is not Status.NONMEMBER


def test_weak_ib():
    assert C.is_weak_incompatibility_breaking(EX1).status is Status.MEMBER
    assert C.is_weak_incompatibility_breaking(EX1).relaxation is Relaxation.WITNESS
    assert C.is_weak_incompatibility_breaking(IDENT, mub_family()).status is Status.NONMEMBER
    assert C.is_weak_incompatibility_breaking(dep(0.72), mub_family()).status is Status.NONMEMBER


def test_default_family_is_incompatible():
    fam = C.default_witness_family(validate=True)
    assert len(fam.sets) == 8 and fam.dim == 2
    with pytest.raises(ValueError):
        C.WitnessFamily([(Z, Z)]).validate()


def test_family_dimension_mismatch():
    with pytest.raises(ValueError):
        C.breaks_incompatibility(Q.one_outcome(Q.identity_channel(3)))


# compatibility of instruments ----------------------------------------------


def test_tc_same_instrument(rng):
    inst = Q.random_instrument(2, 2, 2, rng)
    v = C.is_traditionally_compatible([inst, inst])
    assert v.member


def test_tc_rejects_weakly_incompatible(rng):
    a, b = Q.random_instrument(2, 2, 2, rng), Q.random_instrument(2, 2, 2, rng)
    assert C.is_weakly_compatible([a, b]).status is Status.NONMEMBER
    v = C.is_traditionally_compatible([a, b])
    assert v.status is Status.NONMEMBER and "reason" in v.certificate


def test_tc_luders_pair():
    assert C.is_traditionally_compatible([Q.luders_instrument(Z), Q.luders_instrument(X)]).status is Status.NONMEMBER


def test_tc_luders_with_common_channel_is_refuted_by_sdp():
    # Lüders σz and a relabelled copy share the induced channel; σz and σz-flipped are compatible
    flipped = Q.Instrument([Q.luders_instrument(Z)[1], Q.luders_instrument(Z)[0]])
    assert C.is_traditionally_compatible([Q.luders_instrument(Z), flipped]).member


def test_weak_compatibility_of_relabelled_post_processings(rng):
    inst = Q.random_instrument(2, 2, 3, rng)
    ident = Q.identity_channel(2)
    zero = ident.scaled(0.0)

    def relabel(f):
        return [Q.Instrument([ident if f[a] == b else zero for b in range(2)], validate=False) for a in range(3)]

    p1, p2 = Q.post_process(inst, relabel([0, 0, 1])), Q.post_process(inst, relabel([1, 0, 1]))
    assert C.is_weakly_compatible([p1, p2]).member
    assert C.is_weakly_compatible([inst, inst]).member


def test_pc_examples(rng):
    tp = Q.random_trash_prepare_instrument(2, 2, 2, rng)
    assert C.is_parallel_compatible([tp, tp]).member
    v = C.is_parallel_compatible([IDENT, IDENT])
    assert v.status is Status.NONMEMBER and "witness_F" in v.certificate
    mp = Q.measure_prepare_instrument(Z, [linalg.proj(linalg.ket(a, 2)) for a in range(2)])
    assert C.is_parallel_compatible([mp, mp]).member


def test_pc_different_output_dims(rng):
    a = Q.random_trash_prepare_instrument(2, 2, 2, rng)
    b = Q.random_trash_prepare_instrument(2, 3, 2, rng)
    assert C.is_parallel_compatible([a, b]).member


@given(seeds)
@settings(max_examples=3)
def test_pc_preserved_by_post_processing(seed):
    rng = np.random.default_rng(seed)
    from qirt.transforms import random_pc_set

    pair, _ = random_pc_set(2, 2, [2, 2], rng)
    procs = [[Q.random_channel(2, 2, rng) for _ in range(2)] for _ in range(2)]
    out = [Q.Instrument([Q.compose(procs[i][a], pair[i][a]) for a in range(2)], validate=False) for i in range(2)]
    assert C.is_parallel_compatible(out).status is not Status.NONMEMBER


# thresholds ----------------------------------------------------------------


def test_thresholds():
    t = C.depolarizing_thresholds(2, 2)
    assert abs(t["eb"] - 1 / 3) < 1e-15 and abs(t["ibc2"] - 2 / 3) < 1e-15 and abs(t["ibc"] - 5 / 12) < 1e-15
    assert abs(C.depolarizing_thresholds(3, 2)["eb"] - 1 / 4) < 1e-15
    assert abs(C.depolarizing_thresholds(2, 3)["ibc3"] - 5 / 9) < 1e-15


# hierarchy of classes ------------------------------------------------------


def _pool(rng):
    out = []
    for _ in range(3):
        out.append(Q.random_trash_prepare_instrument(2, 2, 2, rng))
        out.append(Q.random_eb_instrument(2, 2, 2, rng))
        out.append(Q.random_instrument(2, 2, 2, rng))
        out.append(Q.Instrument([Q.compose(Q.depolarizing(2, 0.5), b) for b in Q.random_instrument(2, 2, 2, rng).branches], validate=False))
    return out


def test_venn_hierarchy(rng):
    fam = C.default_witness_family()
    for inst in _pool(rng):
        tp = C.is_trash_and_prepare(inst).member
        eb = C.is_entanglement_breaking(inst).member
        web = C.is_weak_entanglement_breaking(inst).member
        assert not tp or eb
        assert not eb or web
        if eb:
            ib = C.breaks_incompatibility(inst, fam)
            assert ib.status is not Status.NONMEMBER
            assert C.is_weak_incompatibility_breaking(inst, fam).status is not Status.NONMEMBER


def test_verdict_margins(rng):
    for inst in _pool(rng):
        v = C.is_entanglement_breaking(inst)
        if v.status is Status.NONMEMBER:
            assert v.margin >= 1e-8
    assert C.joint_measurement([Z, Z]).margin >= 1e-8
    assert set(C.joint_measurement([Z, X]).summary()) == {"status", "margin", "relaxation"}
