"""Regenerate tests/fixtures/fsm/generated/*.json (seeded; output is committed)."""
import random
import sys
from pathlib import Path

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))

from fsmgen import valid_fsm  # noqa: E402
from fsmscg import serialize_fsm  # noqa: E402

out = HERE / "fsm" / "generated"
out.mkdir(parents=True, exist_ok=True)
rng = random.Random(20240917)
for i in range(50):
    (out / f"gen_{i:02d}.json").write_bytes(serialize_fsm(valid_fsm(rng, i)))
