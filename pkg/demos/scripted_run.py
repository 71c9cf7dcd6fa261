"""Drive the generate-check-repair loop with a canned backend and recorded tools.

The script answers the first code prompt with a contract that does not
compile, then supplies the fixed version once compiler feedback comes back.
"""
import json
import tempfile
from pathlib import Path

from _paths import FIXTURES

from fsmscg.config import config_from_dict
from fsmscg.pipeline import Pipeline


def contract_reply(name):
    return "```solidity\n" + (FIXTURES / "contracts" / name).read_text() + "```"


work = Path(tempfile.mkdtemp(prefix="fsmscg-demo-"))
script = [
    {"match": {"turn": 0}, "reply": (FIXTURES / "fsm" / "nft_mint.json").read_text()},
    {"match": "failed to compile", "reply": contract_reply("c18_nft_mint.sol")},
    {"reply": contract_reply("e03_undeclared.sol")},
]
(work / "script.json").write_text(json.dumps(script))

cfg = config_from_dict(
    {
        "backend": {"kind": "scripted-mock", "script": str(work / "script.json")},
        "toolchain": {"mode": "playback", "fixtures_dir": str(FIXTURES / "tools")},
        "artifact_root": str(work / "artifacts"),
    }
)
record = Pipeline(cfg).run("An NFT mint the owner can pause, sold out at the cap.")
print("status:", record.status, " vrs:", record.score.vrs)
for it in record.iterations:
    print(f"  iteration {it.index}: compiled={it.compile.success} feedback={it.feedback_kind}")
print("artifacts in", work / "artifacts" / "runs" / record.run_id)
