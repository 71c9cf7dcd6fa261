"""Deduplicate the 100-file corpus, then pull annotation/code pairs out of one file."""
from _paths import FIXTURES

from fsmscg.dataset import a2c_records, dedupe_corpus, extract_a2c, load_corpus

items = load_corpus(FIXTURES / "corpus100")
kept = dedupe_corpus(items)
print(f"{len(items)} files, {len(kept)} after near-duplicate removal")
dropped = sorted({i.source for i in items} - {i.source for i in kept})
print("dropped e.g.:", ", ".join(dropped[:4]), "...")

for rec in a2c_records(extract_a2c((FIXTURES / "a2c" / "annotated.sol").read_text())):
    user, assistant = rec["messages"]
    print(f"- {user['content']!r} -> {assistant['content'].splitlines()[0]}")
