#!/usr/bin/env python3
"""Build the bundled raw corpus: one sentence per line.

Source: the public-domain U.S. State of the Union addresses shipped in the
`@stdlib/datasets-sotu` npm package (`npm pack @stdlib/datasets-sotu`).

usage: prepare_corpus.py <sotu data dir> <out.txt.gz> [max_lines]
"""
import gzip
import pathlib
import re
import sys

SPLIT = re.compile(r"(?<=[.!?])\s+(?=[A-Z\"'])")


def sentences(text):
    text = re.sub(r"\s+", " ", text).strip()
    for s in SPLIT.split(text):
        s = s.strip()
        if s:
            yield s


def main():
    src = pathlib.Path(sys.argv[1])
    out = sys.argv[2]
    limit = int(sys.argv[3]) if len(sys.argv) > 3 else None
    lines = []
    for path in sorted(src.glob("*.txt")):
        lines.extend(sentences(path.read_text(encoding="utf-8", errors="replace")))
    if limit is not None:
        lines = lines[-limit:]
    with gzip.open(out, "wt", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")
    print(f"wrote {len(lines)} lines to {out}")


if __name__ == "__main__":
    main()
