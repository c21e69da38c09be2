import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qirt import classify as C, linalg, qobjects as Q, transforms as T
from qirt.distances import instrument_set_distance, set_distance
from qirt.measures import FreeSetSpec, distance_measure
from qirt.qobjects import Instrument, InstrumentSet


def max_gap(a: InstrumentSet, b: InstrumentSet) -> float:
    return max(np.max(np.abs(x.chois - y.chois)) for x, y in zip(a, b))


def _target(theory, rng):
    if theory == "ip":
        return T.random_free_set("ip", rng, count=2), None
    if theory == "ti":
        return T.random_tc_set(2, 2, [2, 2], rng)
    if theory == "pi":
        return T.random_pc_set(2, 2, [2, 2], rng)
    return T.random_free_set(theory, rng), None


@pytest.mark.parametrize("theory", T.THEORIES)
def test_canonical_reachability(theory, rng):
    source = T.random_input_set(theory, rng)
    target, joint = _target(theory, rng)
    spec = T.canonical_spec(theory, source, target, joint)
    out = T.apply_transform(theory, spec, source)
    assert max_gap(out, target) <= 1e-9


@pytest.mark.parametrize("theory", ["ip", "ep", "sep", "ti", "pi"])
def test_free_inputs_stay_free(theory, rng):
    free = T.random_free_set(theory, rng)
    spec = T.random_spec(theory, rng, free)
    out = T.apply_transform(theory, spec, free, validate=False)
    assert distance_measure(out, FreeSetSpec(T.FREE_TAGS[theory])).value <= 1e-7


def test_identity_spec_is_exact(rng):
    s = T.random_weakly_compatible_set(2, 2, 3, 2, rng)
    out = T.pid_supermap(T.identity_spec(s), s)
    assert max_gap(out, s) == 0.0


def test_eb_slot_violation(rng):
    src = T.random_input_set("ep", rng)
    spec = T.random_spec("ep", rng, src)
    ident = Q.identity_channel(2)
    d_h_q = spec.pre[0].dim_out
    spec.pre[0] = Instrument([Q.compose(Q.append_state(np.eye(d_h_q // 2) / (d_h_q // 2), 2, first=False), ident).scaled(0.5)] * 2)
    with pytest.raises(T.SlotViolation):
        T.eb_free_transform(spec, src)


def test_tp_slot_violation(rng):
    src = T.random_input_set("ip", rng)
    spec = T.random_spec("ip", rng, src)
    d = spec.pre[0].dim_out
    spec.pre[0] = Q.one_outcome(Q.unitary_channel(np.eye(d))) if spec.pre[0].dim_in == d else Q.one_outcome(Q.random_channel(spec.pre[0].dim_in, d, rng, kraus_rank=1))
    with pytest.raises(T.SlotViolation):
        T.tp_free_transform(spec, src)


def test_pc_bad_certificate(rng):
    src = T.random_input_set("pi", rng)
    spec = T.random_spec("pi", rng, src)
    joint = dict(spec.channels["pre_joint"])
    key = next(iter(joint))
    joint[key] = joint[key] * 0.5
    spec.channels["pre_joint"] = joint
    with pytest.raises(T.SlotViolation):
        T.pc_free_transform(spec, src)


def test_pid_rejects_incompatible_inputs(rng):
    s = InstrumentSet([Q.random_instrument(2, 2, 2, rng), Q.random_instrument(2, 2, 2, rng)])
    with pytest.raises(T.SlotViolation):
        T.pid_supermap(T.identity_spec(s), s)


def test_spec_validation():
    with pytest.raises(ValueError):
        T.SupermapSpec("ip", q=1.5)
    with pytest.raises(ValueError):
        T.SupermapSpec("ip", tables={"p": np.array([[0.5, 0.6]])})
    assert T.SupermapSpec("ip", tables={"p": [[0.25, 0.75]]}).tables["p"].dtype == float
    with pytest.raises(ValueError):
        T.apply_transform("xx", T.SupermapSpec("xx"), [])


def test_controlled_supermap_identity(rng):
    inst = Q.random_instrument(2, 2, 3, rng)
    spec = T.SupermapSpec("ctrl", pre=[Q.identity_channel(2)], post=[Q.identity_channel(6)], outcomes=3)
    out = T.controlled_supermap(spec, [inst])
    assert max_gap(out, InstrumentSet([inst])) <= 1e-12


def test_post_processing():
    ex1 = Q.example1_instrument()
    ident = [[T.selector(Q.identity_channel(2), 4, index=a) for a in range(4)]]
    assert max_gap(T.instrument_post_process([ex1], ident), InstrumentSet([ex1])) <= 1e-15
    with pytest.raises(ValueError):
        T.instrument_post_process([ex1], ident * 2)


def test_example2_relabelling():
    ex1 = Q.example1_instrument()
    table = Q.example2_table()
    plus, minus = np.full((2, 2), 0.5), np.array([[0.5, -0.5], [-0.5, 0.5]])
    m = Q.coarse_grain(Q.heisenberg_measurement(ex1, Q.pauli_pvm("z")), table)
    n = Q.coarse_grain(Q.heisenberg_measurement(ex1, Q.pauli_pvm("x")), table)
    assert np.allclose(m.elements, [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], atol=1e-12)
    assert np.allclose(n.elements, [2 / 3 * plus + 1 / 3 * minus, 1 / 3 * plus + 2 / 3 * minus], atol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_post_processing_contracts(seed):
    rng = np.random.default_rng(seed)
    a = InstrumentSet([Q.random_instrument(2, 2, 2, rng)])
    b = InstrumentSet([Q.random_instrument(2, 2, 2, rng)])
    procs = [[Q.random_instrument(2, 2, 3, rng) for _ in range(2)]]
    before = instrument_set_distance(a, b)
    after = instrument_set_distance(T.instrument_post_process(a, procs), T.instrument_post_process(b, procs))
    assert after <= before + 1e-7


def test_permutation_convention(rng):
    mats = [rng.normal(size=(d, d)) for d in (2, 3, 4)]
    big = linalg.kron_all(*mats)
    moved = linalg.permute_systems(big, [2, 3, 4], [2, 0, 1])
    assert np.allclose(moved, linalg.kron_all(mats[2], mats[0], mats[1]))
    u = Q.permutation_matrix([2, 3, 4], [2, 0, 1])
    assert np.allclose(u @ big @ u.conj().T, moved)


def test_flag_round_trip(rng):
    inst = Q.random_instrument(2, 3, 4, rng)
    back = Q.from_flag_channel(Q.flag_channel(inst), 4)
    assert np.max(np.abs(back.chois - inst.chois)) <= 1e-12


def test_flag_reader_and_selector():
    reader = T.flag_reader(2, 2, 3)
    assert len(reader) == 3 and reader.channel().is_trace_preserving()
    sel = T.selector(Q.identity_channel(2), 3, index=1)
    assert np.allclose(sel.chois[0], 0) and np.allclose(sel.chois[1], Q.identity_channel(2).choi)


@pytest.mark.parametrize("theory", T.THEORIES)
def test_harness_small(theory):
    rep = T.monotonicity_harness(theory, trials=2, seed=7)
    assert rep["passed"], rep
    assert rep["violations"] == 0 and len(rep["records"]) == 2
    assert rep["free_set"] == T.FREE_TAGS[theory]


def test_harness_q_sweep():
    rep = T.monotonicity_harness("ip", trials=3, q_values=[0.0, 0.5, 1.0])
    assert [r["q"] for r in rep["records"]] == [0.0, 0.5, 1.0]
    assert rep["passed"]


def test_harness_is_reproducible():
    a = T.monotonicity_harness("ep", trials=2, seed=3, measure=False)
    b = T.monotonicity_harness("ep", trials=2, seed=3, measure=False)
    assert a["records"] == b["records"] and a["max_measure_increase"] is None
    with pytest.raises(ValueError):
        T.monotonicity_harness("nope")
