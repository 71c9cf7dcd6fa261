"""Render each prompt kind once so the wording can be eyeballed."""
from _paths import FIXTURES

from fsmscg.prompts import PromptForge
from fsmscg.toolchain import Toolchain, ToolchainConfig

forge = PromptForge()
tools = Toolchain(ToolchainConfig(mode="playback", fixtures_dir=FIXTURES / "tools"))
broken = (FIXTURES / "contracts" / "e03_undeclared.sol").read_text()
risky = (FIXTURES / "contracts" / "c04_tx_origin.sol").read_text()

prompts = [
    forge.build_r2f("A crowdfunding contract that refunds backers if the goal is missed."),
    forge.build_f2c(),
    forge.build_compile_feedback(tools.compile(broken).issues),
    forge.build_security_feedback(tools.analyze(risky).findings),
]
for p in prompts:
    print(f"===== {p.kind} ({len(p.text)} chars)")
    print(p.text)
