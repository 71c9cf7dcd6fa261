"""Regenerate tests/fixtures/corpus100 (seeded; output is committed).

70 distinct contracts plus 30 near-duplicates of them: 10 byte copies, 10
comment/whitespace rewrites and 10 single-literal edits.
"""
import random
from pathlib import Path

OUT = Path(__file__).parent / "corpus100"
WORDS = "alpha bravo cedar delta ember frost grove harbor iris jade koala lumen maple nova onyx pine quill raven sage tide umber vale willow xenon yarrow zephyr".split()
TYPES = ["uint256", "address", "bool", "bytes32", "int128"]


def ident(rng, prefix=""):
    return prefix + rng.choice(WORDS) + rng.choice(WORDS).capitalize() + str(rng.randint(0, 99))


def function(rng):
    name = ident(rng)
    arg = ident(rng, "_")
    k = rng.randint(1, 999)
    body = rng.choice(
        [
            f"        total += {arg} * {k};\n        emit Updated(msg.sender, total);",
            f"        require({arg} > {k}, \"{name} too small\");\n        balances[msg.sender] += {arg};",
            f"        for (uint256 i = 0; i < {arg}; i++) {{\n            total += i % {k};\n        }}",
            f"        if ({arg} % 2 == 0) {{\n            owner = msg.sender;\n        }} else {{\n            total -= {k};\n        }}",
            f"        balances[owner] = {arg} + {k};\n        lastCaller = msg.sender;",
        ]
    )
    return f"    function {name}(uint256 {arg}) external {{\n{body}\n    }}\n"


def contract(rng, i):
    name = ident(rng).capitalize()
    fields = "".join(f"    {rng.choice(TYPES)} public {ident(rng)};\n" for _ in range(rng.randint(1, 3)))
    funcs = "\n".join(function(rng) for _ in range(rng.randint(3, 6)))
    return (
        "// SPDX-License-Identifier: MIT\n"
        "pragma solidity ^0.8.0;\n\n"
        f"/// @title {name} number {i}\n"
        f"contract {name} {{\n"
        "    address public owner;\n"
        "    address public lastCaller;\n"
        "    uint256 public total;\n"
        "    mapping(address => uint256) public balances;\n"
        f"{fields}\n"
        "    event Updated(address indexed who, uint256 value);\n\n"
        f"{funcs}"
        "}\n"
    )


def recomment(code):
    lines = code.splitlines()
    out = []
    for ln in lines:
        out.append(ln.replace("    ", "\t"))
        if ln.strip().startswith("function"):
            out.insert(len(out) - 1, "    // reviewed")
    return "\n\n".join(out) + "\n/* end of file */\n"


def tweak_literal(code):
    # Change the first numeric literal after the SPDX/pragma header.
    head, sep, rest = code.partition("contract ")
    digits = next(i for i, c in enumerate(rest) if c.isdigit())
    return head + sep + rest[:digits] + "7" + rest[digits:]


def main():
    rng = random.Random(4242)
    OUT.mkdir(exist_ok=True)
    for old in OUT.glob("**/*.sol"):
        old.unlink()
    bases = [contract(rng, i) for i in range(70)]
    for i, code in enumerate(bases):
        (OUT / f"base_{i:02d}.sol").write_text(code)
    picks = rng.sample(range(70), 30)
    (OUT / "copies").mkdir(exist_ok=True)
    for n, i in enumerate(picks[:10]):
        (OUT / "copies" / f"copy_of_{i:02d}.sol").write_text(bases[i])
    for n, i in enumerate(picks[10:20]):
        (OUT / f"styled_{i:02d}.sol").write_text(recomment(bases[i]))
    for n, i in enumerate(picks[20:]):
        (OUT / f"tweaked_{i:02d}.sol").write_text(tweak_literal(bases[i]))


if __name__ == "__main__":
    main()
