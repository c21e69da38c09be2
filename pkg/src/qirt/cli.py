"""Command-line entry point: ``qirt <command> [options]``.

Every command prints a ``report.v1`` JSON document. Exit codes: 0 success
or Member, 1 NonMember or a failed check, 2 Inconclusive, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, classify, distances, measures, qobjects, sdp, transforms
from .classify import Status, Verdict
from .qobjects import Instrument, InstrumentSet, Povm

DEFAULT_SEED = 0x5EED
EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 64
TAGS = ("reference", "derived", "trivial")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


# ---------------------------------------------------------------------------
# input handling


def _read_json(path: str) -> Any:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e


def _builtin(name: str) -> InstrumentSet | list[Povm]:
    key, _, arg = name.partition(":")
    if key == "example1":
        return InstrumentSet([qobjects.example1_instrument()])
    if key == "example2":
        return list(qobjects.example2_pair())
    if key == "identity":
        return qobjects.as_set(qobjects.identity_channel(int(arg or 2)))
    if key == "depolarizing":
        return qobjects.as_set(qobjects.depolarizing(2, float(arg)))
    if key == "luders-zx":
        return InstrumentSet([qobjects.luders_instrument(qobjects.pauli_pvm(a)) for a in "zx"])
    if key == "pauli-zx":
        return [qobjects.pauli_pvm(a) for a in "zx"]
    raise UsageError(f"unknown builtin input {name!r}")


def load_input(source: str, validate: bool = True) -> InstrumentSet | list[Povm]:
    """A JSON file (instrument, instrument set, POVM or POVM set) or ``builtin:<name>``."""
    if source.startswith("builtin:"):
        return _builtin(source[len("builtin:"):])
    data = _read_json(source)
    try:
        fmt = data.get("format")
        if fmt == "povm.v1":
            return [qobjects.povm_from_json(data, validate)]
        if fmt == "povm_set.v1":
            return [qobjects.povm_from_json(p, validate) for p in data["povms"]]
        return qobjects.load_instruments(data, validate)
    except (KeyError, TypeError, AttributeError) as e:
        raise UsageError(f"{source}: not an instrument or POVM document ({e})") from e


def _instruments(obj: Any, source: str) -> InstrumentSet:
    if not isinstance(obj, InstrumentSet):
        raise UsageError(f"{source}: expected instruments, got POVMs")
    return obj


def _input_record(source: str) -> dict[str, Any]:
    if source.startswith("builtin:") or source == "-":
        return {"source": source}
    return {"source": source, "sha256": hashlib.sha256(Path(source).read_bytes()).hexdigest()}


def load_config(path: str) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` comments and ``[section]`` headers are ignored."""
    out: dict[str, str] = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v.strip("\"'")
    return out


def _apply_config(cfg: dict[str, str]) -> dict[str, Any]:
    applied: dict[str, Any] = {}
    solver = {k: v for k, v in cfg.items() if k in sdp.DEFAULTS}
    try:
        sdp.configure(**solver)
    except ValueError as e:
        raise UsageError(f"bad solver option value: {e}") from e
    applied.update({k: sdp.DEFAULTS[k] for k in solver})
    if "witness_family" in cfg:
        applied["witness_family"] = cfg["witness_family"]
    unknown = set(cfg) - set(solver) - {"witness_family"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return applied


def load_witness_family(path: str) -> classify.WitnessFamily:
    """``{"sets": [[povm.v1, ...], ...]}``."""
    data = _read_json(path)
    sets = [[qobjects.povm_from_json(p) for p in s] for s in data["sets"]]
    return classify.WitnessFamily(sets, note=f"loaded from {Path(path).name}")


# ---------------------------------------------------------------------------
# JSON output


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return _jsonable(np.stack([x.real, x.imag], axis=-1))
        return _jsonable(x.tolist())
    if isinstance(x, (Status, classify.Relaxation, measures.FreeTag)):
        return x.value
    if isinstance(x, Verdict):
        return x.summary()
    return x


def make_report(command: str, inputs: list[dict[str, Any]], seed: int, results: list[dict[str, Any]], provenance: list[dict[str, Any]] | None = None, timings: dict[str, float] | None = None) -> dict[str, Any]:
    return {
        "schema": "report.v1",
        "command": command,
        "version": __version__,
        "inputs": inputs,
        "seed": seed,
        "results": results,
        "provenance": provenance or [],
        "timings": timings or {},
    }


# ---------------------------------------------------------------------------
# verdict helpers


def _combine(verdicts: Sequence[Verdict]) -> Verdict:
    """NonMember if any is, else Inconclusive if any is, else Member."""
    for st in (Status.NONMEMBER, Status.INCONCLUSIVE):
        hits = [v for v in verdicts if v.status is st]
        if hits:
            return max(hits, key=lambda v: abs(v.margin))
    return min(verdicts, key=lambda v: v.margin)


def _exit_for(status: Status) -> int:
    return {Status.MEMBER: EXIT_OK, Status.NONMEMBER: EXIT_FAIL, Status.INCONCLUSIVE: EXIT_INCONCLUSIVE}[status]


CLASSES = ("tp", "eb", "web", "ib", "wib", "tc", "pc", "weak", "jm")


def classify_input(obj: Any, cls: str, family: classify.WitnessFamily | None = None) -> tuple[Verdict, list[Verdict]]:
    if cls == "jm":
        if isinstance(obj, InstrumentSet):
            obj = [qobjects.induced_povm(i) for i in obj]
        v = classify.joint_measurement(obj)
        return v, [v]
    s = _instruments(obj, cls)
    if cls == "tc":
        v = classify.is_traditionally_compatible(list(s))
        return v, [v]
    if cls == "pc":
        v = classify.is_parallel_compatible(list(s))
        return v, [v]
    if cls == "weak":
        v = classify.is_weakly_compatible(list(s))
        return v, [v]
    single: dict[str, Callable[[Instrument], Verdict]] = {
        "tp": classify.is_trash_and_prepare,
        "eb": classify.is_entanglement_breaking,
        "web": classify.is_weak_entanglement_breaking,
        "ib": lambda i: classify.breaks_incompatibility(i, family),
        "wib": lambda i: classify.is_weak_incompatibility_breaking(i, family),
    }
    each = [single[cls](i) for i in s]
    return _combine(each), each


# ---------------------------------------------------------------------------
# reproduction cases


@dataclass
class ReproCase:
    id: str
    description: str
    run: Callable[[int], list[dict[str, Any]]]


def _check(name: str, expected: Any, observed: Any, tag: str, tol: float | None = None, passed: bool | None = None) -> dict[str, Any]:
    assert tag in TAGS
    if passed is None:
        if tol is None:
            passed = expected == observed
        else:
            passed = bool(np.all(np.abs(np.asarray(observed, dtype=complex) - np.asarray(expected, dtype=complex)) <= tol))
    return {"check": name, "expected": expected, "observed": observed, "tolerance": tol, "tag": tag, "passed": bool(passed)}


def _case_example1(seed: int) -> list[dict[str, Any]]:
    inst = qobjects.example1_instrument()
    eb = classify.is_entanglement_breaking(inst)
    web = classify.is_weak_entanglement_breaking(inst)
    return [
        _check("EB", "NonMember", eb.status.value, "reference"),
        _check("WEB", "Member", web.status.value, "reference"),
        _check("EB margin ≥ 1e-6", True, eb.margin >= 1e-6, "derived"),
    ]


def example2_expected() -> list[np.ndarray]:
    """The sixteen Heisenberg-picture elements, ordered A then B, outcome pairs (x, y) with x outer."""
    k0, k1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    kp, km = np.full((2, 2), 0.5), np.array([[0.5, -0.5], [-0.5, 0.5]])
    a = {(1, 1): k0 / 2, (2, 1): k1 / 6, (3, 1): k1 / 6, (4, 1): k0 / 6, (1, 2): k1 / 2, (2, 2): k0 / 6, (3, 2): k0 / 6, (4, 2): k1 / 6}
    b = {(1, 1): kp / 2, (2, 1): kp / 6, (3, 1): km / 6, (4, 1): km / 6, (1, 2): km / 2, (2, 2): km / 6, (3, 2): kp / 6, (4, 2): kp / 6}
    order = [(x, y) for x in range(1, 5) for y in range(1, 3)]
    return [a[k] for k in order] + [b[k] for k in order]


def example2_postprocessed() -> list[np.ndarray]:
    """M = (|0⟩⟨0|, |1⟩⟨1|) and N(1) = (2/3)|+⟩⟨+| + (1/3)|−⟩⟨−|, N(2) = 1 − N(1)."""
    kp, km = np.full((2, 2), 0.5), np.array([[0.5, -0.5], [-0.5, 0.5]])
    return [np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), 2 / 3 * kp + 1 / 3 * km, 1 / 3 * kp + 2 / 3 * km]


def _case_example2(seed: int) -> list[dict[str, Any]]:
    inst = qobjects.example1_instrument()
    ha = qobjects.heisenberg_measurement(inst, qobjects.pauli_pvm("z"))
    hb = qobjects.heisenberg_measurement(inst, qobjects.pauli_pvm("x"))
    got = list(ha.elements) + list(hb.elements)
    err = max(float(np.max(np.abs(g - e))) for g, e in zip(got, example2_expected()))
    table = qobjects.example2_table()
    m, n = qobjects.coarse_grain(ha, table), qobjects.coarse_grain(hb, table)
    pair_err = max(float(np.max(np.abs(x - y))) for x, y in zip(list(m.elements) + list(n.elements), example2_postprocessed()))
    jm = classify.joint_measurement([m, n])
    pvm = all(np.allclose(e @ e, e, atol=1e-12) for e in m.elements)
    ib = classify.breaks_incompatibility(inst)
    return [
        _check("Heisenberg elements", 0.0, err, "reference", tol=1e-10),
        _check("post-processed pair", 0.0, pair_err, "reference", tol=1e-10),
        _check("pair incompatible", True, jm.status is Status.NONMEMBER, "reference"),
        _check("incompatibility margin ≥ 1e-6", True, jm.margin >= 1e-6, "derived"),
        _check("M is PVM", True, pvm, "reference"),
        _check("instrument breaks incompatibility", "NonMember", ib.status.value, "reference"),
    ]


def _case_thresholds(seed: int) -> list[dict[str, Any]]:
    th = classify.depolarizing_thresholds(2, 2)
    pair = [qobjects.pauli_pvm(a) for a in "zx"]

    def noisy(t: float) -> Verdict:
        ch = qobjects.depolarizing(2, t)
        return classify.joint_measurement([qobjects.Povm([qobjects.dual_apply(ch, e) for e in p.elements]) for p in pair])

    v_in, v_out = noisy(2 / 3), noisy(0.72)
    return [
        _check("eb", 1 / 3, th["eb"], "reference", tol=1e-12),
        _check("ibc2", 2 / 3, th["ibc2"], "reference", tol=1e-12),
        _check("ibc", 5 / 12, th["ibc"], "reference", tol=1e-12),
        _check("t=2/3 pair jointly measurable", "Member", v_in.status.value, "reference"),
        _check("t=0.72 pair incompatible", "NonMember", v_out.status.value, "derived"),
    ]


def eb_threshold_bisection(d: int = 2, steps: int = 30) -> tuple[float, float]:
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = (lo + hi) / 2
        if classify.is_entanglement_breaking(qobjects.one_outcome(qobjects.depolarizing(d, mid))).member:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _case_eb_threshold(seed: int) -> list[dict[str, Any]]:
    lo, hi = eb_threshold_bisection()
    return [_check("bracket around 1/3", True, lo <= 1 / 3 + 1e-4 and hi >= 1 / 3 - 1e-4 and hi - lo < 1e-4, "reference")]


def _case_diamond(seed: int) -> list[dict[str, Any]]:
    d = distances.diamond_distance(qobjects.identity_channel(2), qobjects.depolarizing(2, 0.0)).value
    return [_check("D(Id, full depolarizing)", 1.5, d, "derived", tol=1e-6)]


def _case_no_cloning(seed: int) -> list[dict[str, Any]]:
    ident = qobjects.one_outcome(qobjects.identity_channel(2))
    pc = classify.is_parallel_compatible([ident, ident])
    luders = [qobjects.luders_instrument(qobjects.pauli_pvm(a)) for a in "zx"]
    weak = classify.is_weakly_compatible(luders)
    tc = classify.is_traditionally_compatible(luders)
    return [
        _check("(Id, Id) parallel compatible", "NonMember", pc.status.value, "derived"),
        _check("certificate present", True, bool(pc.certificate), "derived"),
        _check("Lüders pair weakly compatible", "NonMember", weak.status.value, "trivial"),
        _check("Lüders pair traditionally compatible", "NonMember", tc.status.value, "reference"),
    ]


def _case_hierarchy(seed: int) -> list[dict[str, Any]]:
    rep = measures.hierarchy_report(qobjects.example1_instrument())
    return [_check(" ≥ ".join(c["chain"]), True, c["holds"], "reference") for c in rep["chains"]]


def _case_identity_robustness(seed: int) -> list[dict[str, Any]]:
    ident = qobjects.one_outcome(qobjects.identity_channel(2))
    r_tp = measures.robustness(ident, measures.FreeSetSpec.parse("tp")).value
    r_eb = measures.robustness(ident, measures.FreeSetSpec.parse("eb")).value
    return [
        _check("TP robustness of Id", 3.0, r_tp, "derived", tol=1e-6),
        _check("EB robustness of Id", 1.0, r_eb, "derived", tol=1e-6),
    ]


def _case_harness(seed: int) -> list[dict[str, Any]]:
    out = []
    for th in transforms.THEORIES:
        rep = transforms.monotonicity_harness(th, trials=3, seed=seed)
        out.append(_check(f"{th} monotonicity (seed {seed})", True, rep["passed"], "derived"))
    return out


REPRO_CASES = [
    ReproCase("example-1", "EB is a strict subset of WEB for qubits", _case_example1),
    ReproCase("example-2", "IB is a strict subset of WIB for qubits", _case_example2),
    ReproCase("thresholds", "depolarizing thresholds for qubits and two measurements", _case_thresholds),
    ReproCase("eb-threshold", "bisection of the EB boundary of qubit depolarizing noise", _case_eb_threshold),
    ReproCase("diamond", "diamond distance closed form", _case_diamond),
    ReproCase("no-cloning", "parallel and traditional compatibility sanity checks", _case_no_cloning),
    ReproCase("hierarchy", "inequality chains of distance measures on the four-outcome instrument", _case_hierarchy),
    ReproCase("identity-robustness", "robustness of the qubit identity channel", _case_identity_robustness),
    ReproCase("harness", "short monotonicity harness per theory", _case_harness),
]


def repro_all(only: Sequence[str] | None = None, seed: int = DEFAULT_SEED) -> tuple[list[dict[str, Any]], list[dict[str, Any]], dict[str, float]]:
    known = {c.id for c in REPRO_CASES}
    for name in only or []:
        if name not in known:
            raise UsageError(f"unknown repro case {name!r}; choose from {sorted(known)}")
    results, provenance, timings = [], [], {}
    for case in REPRO_CASES:
        if only and case.id not in only:
            continue
        t0 = time.perf_counter()
        checks = case.run(seed)
        timings[case.id] = time.perf_counter() - t0
        results.append({"case": case.id, "description": case.description, "checks": checks, "passed": all(c["passed"] for c in checks)})
        provenance.extend({"case": case.id, "check": c["check"], "tag": c["tag"]} for c in checks)
    return results, provenance, timings


# ---------------------------------------------------------------------------
# commands


@dataclass
class Context:
    seed: int
    dump: str | None
    family: classify.WitnessFamily | None
    inputs: list[dict[str, Any]]
    provenance: list[dict[str, Any]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)


def _free(name: str, ctx: Context) -> measures.FreeSetSpec:
    try:
        return measures.FreeSetSpec.parse(name, ctx.family)
    except ValueError as e:
        raise UsageError(f"unknown free set {name!r}") from e


def cmd_validate(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    try:
        obj = load_input(args.input, validate=True)
    except ValueError as e:
        return [{"valid": False, "error": str(e)}], EXIT_FAIL
    if isinstance(obj, InstrumentSet):
        info = {"kind": "instrument_set", "count": len(obj), "dim_in": obj.dim_in, "dim_out": obj.dim_out, "outcomes": list(obj.outcome_counts)}
    else:
        info = {"kind": "povm_set", "count": len(obj), "dim": obj[0].dim, "outcomes": [len(p) for p in obj]}
    return [{"valid": True, **info}], EXIT_OK


def cmd_classify(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    obj = load_input(args.input)
    overall, each = classify_input(obj, args.free_set, ctx.family)
    res = {"class": args.free_set, **overall.summary(), "per_instrument": [v.summary() for v in each]}
    return [res], _exit_for(overall.status)


def _as_channels(obj: Any, source: str) -> list[qobjects.CpMap]:
    return [i.channel() for i in _instruments(obj, source)]


def _as_povms(obj: Any) -> list[Povm]:
    return [qobjects.induced_povm(i) for i in obj] if isinstance(obj, InstrumentSet) else list(obj)


def cmd_distance(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    a, b = load_input(args.a), load_input(args.b)
    ctx.inputs.append(_input_record(args.b))
    kind = args.kind
    try:
        if kind == "measurement":
            r = distances.set_distance(_as_povms(a), _as_povms(b))
        elif kind == "channel":
            ca, cb = _as_channels(a, args.a), _as_channels(b, args.b)
            if len(ca) == 1 and len(cb) == 1:
                r = distances.diamond_distance(ca[0], cb[0], dump=ctx.dump)
            else:
                r = distances.set_distance(ca, cb)
        else:
            sa, sb = _instruments(a, args.a), _instruments(b, args.b)
            if kind == "instrument" and (len(sa) != 1 or len(sb) != 1):
                raise UsageError("--kind instrument expects one instrument per file")
            r = distances.set_distance(sa, sb)
    except ValueError as e:
        raise UsageError(str(e)) from e
    res: dict[str, Any] = {"kind": kind, "distance": r.value, "method": r.method}
    if "pairwise" in r.achiever:
        res["pairwise"] = r.achiever["pairwise"]
    if args.oracle_samples and kind != "measurement":
        if kind == "channel":
            pairs = list(zip(_as_channels(a, args.a), _as_channels(b, args.b)))
        else:
            pairs = [(qobjects.flag_channel(x), qobjects.flag_channel(y)) for x, y in zip(a, b)]
        lbs = [distances.diamond_lower_bound(x, y, samples=args.oracle_samples, seed=ctx.seed).value for x, y in pairs]
        res["oracle_lower_bound"] = max(lbs)
    return [res], EXIT_OK


def _measure_result(r: measures.MeasureResult) -> dict[str, Any]:
    return {"value": r.value, "bound_direction": r.bound_direction, "diagnostics": r.diagnostics}


def cmd_robustness(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    s = _instruments(load_input(args.input), args.input)
    try:
        r = measures.robustness(s, _free(args.free_set, ctx), dump=ctx.dump)
    except measures.UnsupportedFreeSet as e:
        raise UsageError(str(e)) from e
    return [{"measure": "robustness", "free_set": args.free_set, **_measure_result(r)}], EXIT_OK


def cmd_weight(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    s = _instruments(load_input(args.input), args.input)
    try:
        r = measures.weight(s, _free(args.free_set, ctx), dump=ctx.dump)
    except measures.UnsupportedFreeSet as e:
        raise UsageError(str(e)) from e
    return [{"measure": "weight", "free_set": args.free_set, **_measure_result(r)}], EXIT_OK


def cmd_measure(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    s = _instruments(load_input(args.input), args.input)
    free = _free(args.free_set, ctx)
    if args.extended:
        r = measures.extended_measure(s, free, max_dim_b=args.max_dim_b)
        kind = "extended_distance"
    else:
        r = measures.distance_measure(s, free, dump=ctx.dump)
        kind = "distance"
    return [{"measure": kind, "free_set": args.free_set, **_measure_result(r)}], EXIT_OK


def cmd_hierarchy(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    s = _instruments(load_input(args.input), args.input)
    out, ok = [], True
    for inst in s:
        rep = measures.hierarchy_report(inst, ctx.family)
        ok &= rep["holds"]
        out.append(rep)
    return out, EXIT_OK if ok else EXIT_FAIL


def load_spec(data: dict[str, Any], theory: str, template: InstrumentSet, seed: int) -> transforms.SupermapSpec:
    """A spec document, or ``{"random": true}`` for a seeded random valid spec."""
    if data.get("random"):
        rng = np.random.default_rng(int(data.get("seed", seed)))
        return transforms.random_spec(theory, rng, template)

    def inst(d: Any) -> Instrument:
        return qobjects.instrument_from_json(d, validate=False)

    def cpmap(d: Any) -> qobjects.CpMap:
        i = inst(d)
        if len(i) != 1:
            raise UsageError("expected a one-outcome instrument for a channel slot")
        return i[0]

    try:
        if theory == "ti":
            return transforms.SupermapSpec(
                theory,
                tables={k: np.asarray(v, dtype=float) for k, v in data["tables"].items()},
                channels={"F": cpmap(data["channels"]["F"]), "K": inst(data["channels"]["K"])},
            )
        flat = theory == "ip"
        pre = [inst(d) for d in data["pre"]]
        post = [inst(d) for d in data["post"]] if flat else [[inst(d) for d in row] for row in data["post"]]
        pre_alt = [inst(d) for d in data["pre_alt"]] if "pre_alt" in data else None
        post_alt = None
        if "post_alt" in data:
            post_alt = [inst(d) for d in data["post_alt"]] if flat else [[inst(d) for d in row] for row in data["post_alt"]]
        tables = {k: np.asarray(v, dtype=float) for k, v in data.get("tables", {}).items()}
        return transforms.SupermapSpec(theory, pre, post, pre_alt, post_alt, q=float(data.get("q", 1.0)), tables=tables)
    except (KeyError, TypeError) as e:
        raise UsageError(f"spec document is missing or mangles {e}") from e


def cmd_transform(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    s = _instruments(load_input(args.input), args.input)
    spec_data = _read_json(args.spec)
    ctx.inputs.append(_input_record(args.spec))
    spec = load_spec(spec_data, args.theory, s, ctx.seed)
    try:
        out = transforms.apply_transform(args.theory, spec, s, validate=not args.no_validate)
    except transforms.SlotViolation as e:
        return [{"theory": args.theory, "error": str(e)}], EXIT_FAIL
    res: dict[str, Any] = {"theory": args.theory, "note": spec.note, "output": qobjects.set_to_json(out)}
    if args.out:
        Path(args.out).write_text(qobjects.dumps(out))
        res["output"] = {"written_to": args.out}
    return [res], EXIT_OK


def cmd_harness(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    theories = transforms.THEORIES if args.theory == "all" else [args.theory]
    q_values = [float(x) for x in args.q.split(",")] if args.q else None
    out = []
    for th in theories:
        rep = transforms.monotonicity_harness(th, trials=args.trials, seed=ctx.seed, q_values=q_values, family=ctx.family)
        if not args.records:
            rep = {k: v for k, v in rep.items() if k != "records"}
        out.append(rep)
    return out, EXIT_OK if all(r["passed"] for r in out) else EXIT_FAIL


def cmd_repro(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    if args.list:
        return [{"case": c.id, "description": c.description} for c in REPRO_CASES], EXIT_OK
    only = list(args.only or []) + list(args.cases or [])
    results, ctx.provenance, ctx.timings = repro_all(only or None, ctx.seed)
    return results, EXIT_OK if all(r["passed"] for r in results) else EXIT_FAIL


def cmd_thresholds(args: argparse.Namespace, ctx: Context) -> tuple[list[dict[str, Any]], int]:
    if args.d < 2 or args.n < 1:
        raise UsageError("need d ≥ 2 and n ≥ 1")
    return [classify.depolarizing_thresholds(args.d, args.n)], EXIT_OK


def _seed(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="seed for all randomness (default 0x5EED)")
    common.add_argument("--config", help="key = value file with solver options and witness_family")
    common.add_argument("--dump-sdp", dest="dump", help="write the SDP in JSON form to this path")
    common.add_argument("--witness", help="witness family JSON for the ib/wib classes")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--timings", action="store_true", help="record wall-clock timings (breaks byte-stable reports)")

    p = _Parser(prog="qirt", description="Quantum instrument resource toolkit.")
    p.add_argument("--version", action="version", version=f"qirt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, fn: Callable[..., Any], help: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("validate", cmd_validate, "check that an input document is a valid instrument or POVM set")
    sp.add_argument("input")
    sp = add("classify", cmd_classify, "membership verdict for a free class")
    sp.add_argument("--class", dest="free_set", choices=CLASSES, required=True)
    sp.add_argument("input")
    sp = add("distance", cmd_distance, "diamond-norm distance between two inputs")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--kind", choices=("channel", "measurement", "instrument", "set"), default="set")
    sp.add_argument("--oracle-samples", type=int, default=0, help="also report a sampled lower bound")
    for name, fn, text in (("robustness", cmd_robustness, "generalized robustness"), ("weight", cmd_weight, "resource weight"), ("measure", cmd_measure, "distance-based resource measure")):
        sp = add(name, fn, text)
        sp.add_argument("--free", dest="free_set", required=True, help="tp|eb|web|tc|pc|ib|wib or a theory name")
        sp.add_argument("input")
        if name == "measure":
            sp.add_argument("--extended", action="store_true", help="ancilla-extended measure")
            sp.add_argument("--max-dim-b", type=int, default=2)
    sp = add("hierarchy", cmd_hierarchy, "distance measures for the nested free sets")
    sp.add_argument("input")
    sp = add("transform", cmd_transform, "apply a free transformation")
    sp.add_argument("--theory", choices=transforms.THEORIES, required=True)
    sp.add_argument("--spec", required=True, help='spec JSON, or {"random": true}')
    sp.add_argument("--out", help="write the transformed set here")
    sp.add_argument("--no-validate", action="store_true", help="skip slot-class checks")
    sp.add_argument("input")
    sp = add("harness", cmd_harness, "monotonicity harness")
    sp.add_argument("--theory", choices=(*transforms.THEORIES, "all"), required=True)
    sp.add_argument("--trials", type=int, default=25)
    sp.add_argument("--q", help="comma-separated mixing weights to cycle through")
    sp.add_argument("--records", action="store_true", help="include per-trial records")
    sp = add("repro", cmd_repro, "run the reproduction cases")
    sp.add_argument("cases", nargs="*")
    sp.add_argument("--only", action="append")
    sp.add_argument("--list", action="store_true")
    sp = add("thresholds", cmd_thresholds, "depolarizing noise thresholds")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--n", type=int, default=2)
    return p


def _execute(args: argparse.Namespace) -> tuple[int, dict[str, Any] | None]:
    saved = dict(sdp.DEFAULTS)
    try:
        family = None
        if args.config:
            applied = _apply_config(load_config(args.config))
            if "witness_family" in applied:
                family = load_witness_family(applied["witness_family"])
        if args.witness:
            family = load_witness_family(args.witness)
        inputs = [_input_record(src) for src in (getattr(args, "input", None), getattr(args, "a", None)) if src]
        ctx = Context(args.seed, args.dump, family, inputs)
        t0 = time.perf_counter()
        results, code = args.fn(args, ctx)
        elapsed = time.perf_counter() - t0
    except (UsageError, FileNotFoundError) as e:
        print(f"qirt: {e}", file=sys.stderr)
        return EXIT_USAGE, None
    finally:
        sdp.DEFAULTS.update(saved)
    timings = {**ctx.timings, "total": elapsed} if args.timings else {}
    return code, make_report(args.command, ctx.inputs, args.seed, _jsonable(results), ctx.provenance, timings)


def _parse(argv: Sequence[str] | None) -> argparse.Namespace | None:
    try:
        return build_parser().parse_args(argv)
    except UsageError as e:
        print(f"qirt: {e}", file=sys.stderr)
        return None


def run(argv: Sequence[str] | None = None) -> tuple[int, dict[str, Any] | None]:
    """Parse and execute; returns (exit code, report)."""
    args = _parse(argv)
    if args is None:
        return EXIT_USAGE, None
    return _execute(args)


def main(argv: Sequence[str] | None = None) -> int:
    args = _parse(argv)
    if args is None:
        return EXIT_USAGE
    code, report = _execute(args)
    if report is not None:
        text = json.dumps(report, indent=2, ensure_ascii=False)
        if args.output:
            Path(args.output).write_text(text + "\n")
        else:
            print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
