"""One check per acceptance criterion; verdicts are listed at the end of the run."""
import json
import math
import random
import shutil
import subprocess
import sys
import time

import pytest

from conftest import FIXTURES, fsm_fixture_paths, verdict
from dedupe_oracle import survivors
from fsmgen import CORRUPTIONS, random_fsm
from oracles import dfs_has_cycle, expected_graph_codes
from scenarios import load_scenarios, scenario_config, write_script
from scoring_oracle import direct_vrs
from fsmscg.dataset import MainItem, build_subsets, dedupe_corpus, extract_a2c, load_corpus
from fsmscg.fsm import parse_fsm, serialize_fsm
from fsmscg.pipeline import FSM_FAILED, Pipeline
from fsmscg.scoring import aggregate, score_contract
from fsmscg.toolchain import Toolchain, ToolchainConfig, source_key
from fsmscg.validate import validate

TOOLS = FIXTURES / "tools"
CONTRACTS = FIXTURES / "contracts"
GENERATED = sorted((FIXTURES / "fsm" / "generated").glob("*.json"))


def test_validator_matches_oracle_on_random_fsms():
    rng = random.Random(1000)
    start = time.perf_counter()
    disagreements = 0
    for _ in range(1000):
        fsm = random_fsm(rng, max_states=10, max_transitions=20)
        report = validate(fsm)
        want = expected_graph_codes(fsm)
        got_unreachable = [v.subject for v in report.violations if v.code == "UNREACHABLE_STATE"]
        got_loops = [tuple(v.subject) for v in report.violations if v.code == "SELF_LOOP"]
        got_acyclic = any(v.code == "NO_CYCLE" for v in report.violations)
        acyclic_by_dfs = len(fsm.states) > 1 and not dfs_has_cycle(fsm)
        if (
            sorted(got_unreachable) != sorted(want["unreachable"])
            or sorted(set(got_loops)) != sorted(set(want["self_loops"]))
            or got_acyclic != want["no_cycle"]
            or got_acyclic != acyclic_by_dfs
        ):
            disagreements += 1
    elapsed = time.perf_counter() - start
    verdict(
        "1 validator vs oracle",
        disagreements == 0 and elapsed < 5.0,
        f"{disagreements} disagreements over 1000 FSMs in {elapsed:.2f}s (limit 5s)",
    )


def test_corruptions_are_detected():
    assert len(GENERATED) >= 50
    misses = []
    for code, corrupt in CORRUPTIONS.items():
        for path in GENERATED[:50]:
            fsm = parse_fsm(path.read_bytes())
            assert validate(fsm).passed, path.name
            if code not in {v.code for v in validate(corrupt(fsm)).violations}:
                misses.append((code, path.name))
    verdict("2 corruption detection", not misses, f"{6 * 50 - len(misses)}/300 detected, misses={misses[:5]}")


def test_vrs_exactness_and_batch_counts():
    expected = json.loads((CONTRACTS / "expected_scores.json").read_text())
    tools = Toolchain(ToolchainConfig(mode="playback", fixtures_dir=TOOLS))
    scores, bad = [], []
    for name, entry in expected["contracts"].items():
        src = (CONTRACTS / name).read_text()
        compiled = tools.compile(src)
        s = score_contract(compiled, tools.analyze(src) if compiled.success else None)
        scores.append(s)
        terms = entry["terms"]
        hand = 10.0 if terms is None else (sum(terms) / len(terms) if terms else 0.0)
        if not (math.isclose(s.vrs, hand, abs_tol=1e-9) and math.isclose(s.vrs, direct_vrs(TOOLS, source_key(src)), abs_tol=1e-9)):
            bad.append(name)
    analyzed = sum(e["terms"] is not None for e in expected["contracts"].values())
    b = expected["batch"]
    m = aggregate(scores)
    counts_ok = (m.total, m.compiled, m.zero, m.high) == (b["total"], b["compiled"], b["zero"], b["high"])
    rates_ok = (m.cpr, m.zrcp, m.hrcp) == tuple(100.0 * b[k] / b["total"] for k in ("compiled", "zero", "high"))
    verdict(
        "3 VRS exactness",
        not bad and analyzed >= 20 and counts_ok and rates_ok,
        f"{len(scores) - len(bad)}/{len(scores)} within 1e-9 ({analyzed} analyzer recordings); "
        f"CPR {m.cpr:.2f} ZRCP {m.zrcp:.2f} HRCP {m.hrcp:.2f} vs hand counts {b}",
    )


_HOST_RUN = """
import sys
sys.path.insert(0, {tests!r})
import json, pathlib
from scenarios import scenario_config
from fsmscg.pipeline import Pipeline
doc = json.loads(pathlib.Path({doc!r}).read_text())
work = pathlib.Path({work!r})
Pipeline(scenario_config(doc, work)).run(doc["requirement"])
"""


def test_round_trip_and_cross_host_determinism(tmp_path):
    paths = fsm_fixture_paths()
    broken = [p.name for p in paths if serialize_fsm(parse_fsm(p.read_bytes())) != p.read_bytes()]
    doc_path = FIXTURES / "scenarios" / "12_compile_then_security_then_clean.json"
    doc = json.loads(doc_path.read_text())
    a, b = tmp_path / "host_a", tmp_path / "host_b"
    a.mkdir()
    b.mkdir()
    Pipeline(scenario_config(doc, a)).run(doc["requirement"])
    # The second host is a separate interpreter with its own cwd and hostname.
    env = {"PATH": "/usr/bin:/bin", "HOSTNAME": "other-host", "TZ": "Pacific/Auckland", "PYTHONHASHSEED": "7"}
    subprocess.run(
        [sys.executable, "-c", _HOST_RUN.format(tests=str(FIXTURES.parent), doc=str(doc_path), work=str(b))],
        cwd=b, env=env, check=True,
    )
    runs_a = sorted((a / "artifacts" / "runs").iterdir())
    runs_b = sorted((b / "artifacts" / "runs").iterdir())
    same = [r.name for r in runs_a] == [r.name for r in runs_b] and all(
        (ra / f).read_bytes() == (rb / f).read_bytes() for ra, rb in zip(runs_a, runs_b) for f in ("fsm.json", "report.json")
    )
    verdict(
        "4 round trip and determinism",
        not broken and same and len(runs_a) == 1,
        f"{len(paths) - len(broken)}/{len(paths)} fixtures byte-identical; fsm.json/report.json identical across hosts: {same}",
    )


def test_scripted_pipeline_conformance(tmp_path):
    scenarios = load_scenarios()
    failures = []
    for name, doc in scenarios:
        work = tmp_path / name
        work.mkdir()
        cfg = scenario_config(doc, work)
        record = Pipeline(cfg).run(doc["requirement"])
        want = doc["expect"]
        kinds = [t["kind"] for t in record.transcript if t["role"] == "user"]
        ok = (
            record.status == want["status"]
            and kinds == want["prompt_kinds"]
            and len(kinds) <= cfg.max_fsm_attempts + 1 + cfg.compile_rounds + cfg.security_rounds
            and (record.status != FSM_FAILED or "F2C" not in kinds)
            and ("feedback_kinds" not in want or [it.feedback_kind for it in record.iterations] == want["feedback_kinds"])
        )
        if not ok:
            failures.append(name)
    verdict(
        "5 pipeline conformance",
        len(scenarios) >= 20 and not failures,
        f"{len(scenarios) - len(failures)}/{len(scenarios)} scripts reach expected status, kinds and call bound; failed={failures}",
    )


def _ablation_cpr(tmp_path, rounds: int) -> float:
    # Broken contract on the first code prompt, the fixed one only when compiler feedback arrives.
    entries = [
        {"fsm": "nft_mint.json", "match": {"turn": 0}},
        {"contract": "c18_nft_mint.sol", "match": "failed to compile"},
        {"contract": "e03_undeclared.sol"},
    ]
    work = tmp_path / f"rounds{rounds}"
    work.mkdir()
    cfg = scenario_config({"script": entries, "config": {"compile_rounds": rounds}}, work)
    requirements = [f"Ablation requirement {i}: a pausable capped mint." for i in range(20)]
    return Pipeline(cfg).evaluate_batch(requirements, samples=1).summary.cpr


def test_feedback_ablation_direction(tmp_path):
    with_feedback, without = _ablation_cpr(tmp_path, 1), _ablation_cpr(tmp_path, 0)
    verdict(
        "6 feedback ablation",
        with_feedback == 100.0 and without == 0.0,
        f"CPR {with_feedback:.1f}% with compile_rounds=1, {without:.1f}% with 0 over 20 scripts",
    )


def test_dataset_forge():
    items = load_corpus(FIXTURES / "corpus100")
    once = dedupe_corpus(items)
    idempotent = dedupe_corpus(once) == once and len(items) == 100
    agrees = {i.source for i in once} == survivors({i.source: i.code for i in items})

    code = (FIXTURES / "a2c" / "annotated.sol").read_text()
    marked = {(p["annotation"], p["code"]) for p in json.loads((FIXTURES / "a2c" / "annotated_expected.json").read_text())}
    found = {(p.annotation, p.code) for p in extract_a2c(code)}
    hits = len(found & marked)
    precision = hits / len(found) if found else 0.0
    recall = hits / len(marked)

    fsms = [parse_fsm(p.read_bytes()) for p in fsm_fixture_paths()]
    out = build_subsets([MainItem(f"req {i}", f, "contract C {}", "x.sol", True) for i, f in enumerate(fsms)], ["f2c", "c2f"])
    reparsed = [parse_fsm(r["messages"][0]["content"]) for r in out["f2c"]] + [
        parse_fsm(r["messages"][1]["content"]) for r in out["c2f"]
    ]
    payloads_ok = reparsed == fsms + fsms
    verdict(
        "7 dataset forge",
        idempotent and agrees and precision == recall == 1.0 and payloads_ok,
        f"dedupe 100->{len(once)} idempotent={idempotent} oracle={agrees}; "
        f"A2C precision {precision:.0%} recall {recall:.0%}; {len(reparsed)} F2C/C2F payloads re-parse={payloads_ok}",
    )


SOLCJS = shutil.which("solcjs")
SLITHER = shutil.which("slither")


@pytest.mark.live
@pytest.mark.skipif(not (SOLCJS and SLITHER), reason="solcjs/slither not installed")
def test_live_smoke():
    tools = Toolchain(ToolchainConfig(solc_path=SOLCJS))
    good = (CONTRACTS / "c01_clean_counter.sol").read_text()
    locked = (CONTRACTS / "c02_locked_ether.sol").read_text()
    compiled = tools.compile(good, tools.select_version(good)).success
    checks = [f.check for f in tools.analyze(locked, tools.select_version(locked)).findings]
    verdict(
        "8 live smoke",
        compiled and "locked-ether" in checks,
        f"c01 compiled={compiled}; c02 findings={checks}",
    )
