"""Score the fixture contracts from recorded compiler and analyzer output."""
from _paths import FIXTURES

from fsmscg.pipeline import synthetic_failure
from fsmscg.scoring import aggregate, format_table, score_contract
from fsmscg.toolchain import NoSatisfyingVersion, Toolchain, ToolchainConfig

tools = Toolchain(ToolchainConfig(mode="playback", fixtures_dir=FIXTURES / "tools"))
scores = []
for path in sorted((FIXTURES / "contracts").glob("*.sol")):
    src = path.read_text()
    try:
        tools.select_version(src)
    except NoSatisfyingVersion as exc:
        score = score_contract(synthetic_failure(str(exc)), None)
    else:
        compiled = tools.compile(src)
        score = score_contract(compiled, tools.analyze(src) if compiled.success else None)
    scores.append(score)
    print(f"{path.name:28} compiled={score.compiled!s:5} vrs={score.vrs:6.3f} high={score.has_high}")

print()
print(format_table({"fixtures": aggregate(scores)}))
