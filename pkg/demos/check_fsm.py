"""Parse a handful of SmartFSM documents and print what the validator finds."""
from _paths import FIXTURES

from fsmscg import ValidatorConfig, parse_fsm, validate
from fsmscg.fsm import FsmError

for path in [FIXTURES / "fsm" / "nft_mint.json", *sorted((FIXTURES / "fsm_invalid").glob("*.json"))]:
    print(f"== {path.name}")
    try:
        fsm = parse_fsm(path.read_bytes())
    except FsmError as exc:
        print(f"   does not parse: {exc}")
        continue
    print("  ", validate(fsm).summary().replace("\n", "\n   "))

# Acyclic machines can be let through with a warning instead.
acyclic = parse_fsm((FIXTURES / "fsm_invalid" / "acyclic.json").read_bytes())
print("acyclic with cycle_rule=warn passes:", validate(acyclic, ValidatorConfig(cycle_rule="warn")).passed)
