#!/usr/bin/env python3
# Copyright 2026 The PodSeal Authors.
# SPDX-License-Identifier: Apache-2.0
"""Pins the oracle to hand-derived values."""

import os
import subprocess
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))

TRUE_LINE = ("10 e5e8056cd929ff7535e42473bbab5738c8ee0d011572a0083e18dfdfa4bcb7d5 ima-ng "
             "sha256:" + "0" * 64 + " /bin/true")
CURL_LINE = ("10 1c256c012678ac3bf9a2cb6a407bd6c6447d8e4b41ce2ab6adbbcc5a58d9c862 ima-cgn "
             "sha256:b4432a883cfd3cc6b5023be5b99f5728a812ef2678f1155176f51424a96cfb50 /usr/bin/curl "
             "/kubepods/besteffort/pod3b4c9f2a-1d2e-4f5a-8b6c-7d8e9f0a1b2c/cri-xyz")
BROKEN_LINE = CURL_LINE.replace("/usr/bin/curl", "/usr/bin/cur1")


def main():
    text = "\n".join(["=== true", TRUE_LINE, "=== empty", "=== broken", TRUE_LINE, BROKEN_LINE, "=== curl",
                      CURL_LINE]) + "\n"
    with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as f:
        f.write(text)
    out = subprocess.check_output([sys.executable, os.path.join(HERE, "replay_oracle.py"), f.name], text=True)
    os.unlink(f.name)
    expected = [
        "true 6c5d51ce7cc400f5f91e129548b8c05e6f8344675aa43d0073be2c00f813bb4c",
        "empty " + "0" * 64,
        "broken integrity-error 1",
    ]
    lines = out.splitlines()
    if lines[:3] != expected or len(lines) != 4 or not lines[3].startswith("curl "):
        print("unexpected oracle output:\n" + out)
        return 1
    print("oracle self-check ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
