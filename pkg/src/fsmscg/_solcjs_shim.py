"""Make solcjs answer like a native solc for the analyzer's compile step."""
from __future__ import annotations

import subprocess
import sys
import tempfile


def run_to_file(cmd: list[str], stdin: bytes, timeout: float | None = None) -> tuple[int, bytes, bytes]:
    # Node may exit before draining a piped stdout, truncating large outputs;
    # writes to a regular file are synchronous.
    with tempfile.TemporaryFile() as out, tempfile.TemporaryFile() as err:
        proc = subprocess.run(cmd, input=stdin, stdout=out, stderr=err, timeout=timeout)
        out.seek(0)
        err.seek(0)
        return proc.returncode, out.read(), err.read()


def main(solcjs: str, argv: list[str]) -> int:
    args: list[str] = []
    skip = False
    for arg in argv:
        if skip:
            skip = False
            continue
        if arg == "--allow-paths":
            skip = True
            continue
        if arg.startswith("--allow-paths="):
            continue
        args.append(arg)
    stdin = sys.stdin.buffer.read() if "--standard-json" in args else b""
    code, stdout, stderr = run_to_file([solcjs, *args], stdin)
    out = b"\n".join(line for line in stdout.splitlines() if not line.startswith(b">>>"))
    sys.stdout.buffer.write(out)
    sys.stderr.buffer.write(stderr)
    return code
