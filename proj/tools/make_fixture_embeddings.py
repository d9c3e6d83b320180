#!/usr/bin/env python3
"""Writes fixtures/embeddings.json: hashed bag-of-words vectors for every
question in the fixture datasets. Used in place of a hosted embedding model
so retrieval is reproducible offline."""
import json
import re
import sys
import zlib
from pathlib import Path

DIM = 32

def embed(text):
    v = [0.0] * DIM
    v[0] = 1.0  # keeps every vector non-zero
    for tok in re.findall(r"[a-z0-9]+", text.lower()):
        h = zlib.crc32(tok.encode())
        v[1 + h % (DIM - 1)] += 1.0 if (h >> 16) & 1 else -1.0
    return v

def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures"
    texts = set()
    for name in ("dev.json", "seed.json", "naq.json"):
        texts.update(item["question"] for item in json.loads((root / name).read_text()))
    out = {t: embed(t) for t in sorted(texts)}
    lines = [f"  {json.dumps(t)}: {json.dumps(v)}" for t, v in out.items()]
    (root / "embeddings.json").write_text("{\n" + ",\n".join(lines) + "\n}\n")

if __name__ == "__main__":
    main()
