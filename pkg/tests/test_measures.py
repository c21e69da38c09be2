import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qirt import classify as C, linalg, measures as M, qobjects as Q
from qirt.classify import Status
from qirt.measures import FreeSetSpec, FreeTag

Z, X = Q.pauli_pvm("z"), Q.pauli_pvm("x")
IDENT = Q.one_outcome(Q.identity_channel(2))
LUDERS = [Q.luders_instrument(Z), Q.luders_instrument(X)]


def omega(d=2):
    v = linalg.max_entangled(d, normalized=False)
    return np.outer(v, v.conj())


def dep_choi(t):
    return t * omega() + (1 - t) * np.eye(4) / 2


def ppt_robustness_oracle(choi, noise, hi, lo=0.0, steps=60):
    """Smallest r with (choi + r·noise)/(1+r) PPT, by bisection below a feasible hi."""
    def ok(r):
        return linalg.min_eig(linalg.partial_transpose((choi + r * noise) / (1 + r), [2, 2], 1)) >= -1e-12

    assert ok(hi)
    for _ in range(steps):
        mid = (lo + hi) / 2
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def test_free_inputs_have_zero_measures(rng):
    tp = Q.random_trash_prepare_instrument(2, 2, 2, rng)
    eb = Q.random_eb_instrument(2, 2, 2, rng)
    for tag, item in [(FreeTag.TP, tp), (FreeTag.EB_PPT, eb), (FreeTag.WEB_PPT, eb), (FreeTag.TC, [tp, tp]), (FreeTag.PC, [tp, tp])]:
        spec = FreeSetSpec(tag)
        assert M.distance_measure(item, spec).value <= 1e-7
        assert M.robustness(item, spec).value <= 1e-7
        assert M.weight(item, spec).value <= 1e-6


def test_identity_robustness():
    assert abs(M.robustness(IDENT, FreeSetSpec("TP")).value - 3.0) <= 1e-6
    # Werner-Holevo noise attains r = 1; the overlap bound <Ω|E|Ω> ≤ d rules out anything smaller
    werner_holevo = np.eye(4) - linalg.partial_transpose(omega(), [2, 2], 1)
    assert abs(ppt_robustness_oracle(omega(), werner_holevo, hi=1.0) - 1.0) <= 1e-9
    assert abs(M.robustness(IDENT, FreeSetSpec("EB_PPT")).value - 1.0) <= 1e-6


@pytest.mark.parametrize("t", [0.4, 0.5, 0.8, 0.95])
def test_depolarizing_eb_robustness_matches_oracle(t):
    werner_holevo = np.eye(4) - linalg.partial_transpose(omega(), [2, 2], 1)
    oracle = ppt_robustness_oracle(dep_choi(t), werner_holevo, hi=(1 + t) / 2)
    assert abs(oracle - (3 * t - 1) / 2) <= 1e-9
    assert abs(M.robustness(Q.one_outcome(Q.depolarizing(2, t)), FreeSetSpec("EB_PPT")).value - oracle) <= 1e-6


@given(st.floats(0.05, 0.95))
@settings(max_examples=8)
def test_depolarizing_tp_weight(t):
    # by twirl symmetry the best free part is the maximally mixed preparation
    r = M.weight(Q.one_outcome(Q.depolarizing(2, t)), FreeSetSpec("TP"))
    assert abs(r.value - t / (1 - t)) <= 1e-5 * (1 + t / (1 - t))


def _mix(items, noise, r):
    return [Q.Instrument([Q.CpMap((a.choi + r * b.choi) / (1 + r), a.dim_in, a.dim_out, validate=False) for a, b in zip(i.branches, n.branches)], validate=False) for i, n in zip(items, noise)]


def test_luders_tc_robustness_against_bisection():
    res = M.robustness(LUDERS, FreeSetSpec("TC"))
    r_star = res.value
    assert abs(r_star - 0.5) <= 1e-6
    noise = [Q.Instrument([Q.CpMap(((1 + r_star) * f - b.choi) / r_star, 2, 2, validate=False) for f, b in zip(row, i.branches)], validate=False) for row, i in zip(res.optimizer, LUDERS)]
    for inst in noise:
        inst.check(tol=1e-6)

    def free(r):
        return C.is_traditionally_compatible(_mix(LUDERS, noise, r)).status is not Status.NONMEMBER

    lo, hi = 0.0, 2 * r_star
    while hi - lo > 1e-6:
        mid = (lo + hi) / 2
        lo, hi = (lo, mid) if free(mid) else (mid, hi)
    assert abs(hi - r_star) <= 1e-5


def test_luders_tc_weight_is_infinite():
    r = M.weight(LUDERS, FreeSetSpec("TC"))
    assert np.isinf(r.value) and r.optimizer is None


def test_tc_distance_within_bounds():
    bc = M.bound_chain(LUDERS, FreeSetSpec("TC"), max_dim_b=1)
    assert bc["extended"] <= bc["distance"] + 1e-7
    assert bc["distance"] <= bc["robustness_cap"] + 1e-7
    assert bc["slack"] >= -1e-7


def test_extended_measure(rng):
    inst = Q.random_instrument(2, 2, 2, rng)
    spec = FreeSetSpec("EB_PPT")
    dist = M.distance_measure(inst, spec).value
    assert abs(M.extended_measure(inst, spec, max_dim_b=1).value - dist) <= 1e-7
    ext = M.extended_measure(inst, spec, max_dim_b=2)
    assert ext.value <= dist + 1e-7
    assert len(ext.diagnostics["per_dim_b"]) == 2
    with pytest.raises(ValueError):
        M.extended_measure(inst, spec, max_dim_b=0)


def test_hierarchy_examples():
    ex1 = M.hierarchy_report(Q.example1_instrument())
    assert ex1["values"]["EP"] > 1e-3 and ex1["values"]["SEP"] <= 1e-7 and ex1["holds"]
    ident = M.hierarchy_report(IDENT)
    assert all(v > 1e-3 for v in ident["values"].values()) and ident["holds"]
    tp = M.hierarchy_report(Q.one_outcome(Q.trace_and_prepare(np.eye(2) / 2, 2)))
    assert all(abs(v) <= 1e-7 for v in tp["values"].values())


def test_witness_measures_unsupported():
    with pytest.raises(M.UnsupportedFreeSet):
        M.robustness(IDENT, FreeSetSpec.parse("ib"))
    with pytest.raises(M.UnsupportedFreeSet):
        M.weight(IDENT, FreeSetSpec.parse("wib"))
    assert M.distance_measure(IDENT, FreeSetSpec.parse("ib")).bound_direction == "LowerBound"


def test_spec_parsing():
    assert FreeSetSpec.parse("sep").tag is FreeTag.WEB_PPT
    assert FreeSetSpec.parse("IB_Witness").family is not None
    assert FreeSetSpec("EB_PPT").bound_direction(3, 3) == "LowerBound"


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=5)
def test_measures_antitone_in_free_set(seed):
    inst = Q.random_instrument(2, 2, 2, np.random.default_rng(seed))
    tp, eb, web = (M.distance_measure(inst, FreeSetSpec(t)).value for t in ("TP", "EB_PPT", "WEB_PPT"))
    assert tp >= eb - 1e-7 and eb >= web - 1e-7
    rt, re, rw = (M.robustness(inst, FreeSetSpec(t)).value for t in ("TP", "EB_PPT", "WEB_PPT"))
    assert rt >= re - 1e-6 and re >= rw - 1e-6


def _branch_share(choi, steps=26):
    """Largest Tr τ with I⊗τ ⪯ J, by bisection on Tr τ over a Bloch-ball search."""
    from scipy.optimize import minimize

    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]

    def slack(s):
        def neg(r):
            n = np.linalg.norm(r)
            r = r / max(n, 1.0)
            tau = s * (np.eye(2) + sum(x * p for x, p in zip(r, paulis))) / 2
            return -linalg.min_eig(choi - np.kron(np.eye(2), tau)) + max(n - 1, 0)

        return -minimize(neg, np.full(3, 0.05), method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 2000}).fun

    lo, hi = 0.0, 2.0
    for _ in range(steps):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if slack(mid) >= 0 else (lo, mid)
    return lo


def test_random_tp_weight_matches_oracle():
    inst = Q.random_instrument(2, 2, 2, np.random.default_rng(11), kraus_rank=4)
    keep = min(1.0, sum(_branch_share(b.choi) for b in inst.branches))
    res = M.weight(inst, FreeSetSpec("TP"))
    assert abs(res.diagnostics["free_fraction"] - keep) <= 1e-5
    assert abs(res.value - (1 - keep) / keep) <= 1e-5 * (1 + res.value)
