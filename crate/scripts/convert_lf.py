#!/usr/bin/env python3
"""Convert an LF-* benchmark release to the line-delimited files genrank reads.

The native release ships `lbl.json`, `trn.json` and `tst.json` (optionally
gzipped), one JSON object per line. Instances carry `target_ind`, positions
into the label file. Output:

    labels.jsonl  {"uid", "title"}
    test.jsonl    {"uid", "title", "content"}
    train.jsonl   {"uid", "title", "content"}
    truth.jsonl   {"uid", "labels": [label uid, ...]}

Labels and instances with a blank title are dropped (and reported), since the
loader rejects them; truth entries pointing at dropped labels go with them.

Usage: convert_lf.py SRC_DIR DST_DIR [--no-train]
"""

import argparse
import gzip
import json
import sys
from pathlib import Path


def open_any(directory: Path, stem: str):
    for name in (f"{stem}.json", f"{stem}.json.gz"):
        path = directory / name
        if path.exists():
            if name.endswith(".gz"):
                return gzip.open(path, "rt", encoding="utf-8")
            return open(path, encoding="utf-8")
    raise FileNotFoundError(f"{directory}/{stem}.json[.gz] not found")


def records(directory: Path, stem: str):
    with open_any(directory, stem) as f:
        for n, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                sys.exit(f"{stem}: line {n}: {e}")


def write_jsonl(path: Path, rows):
    count = 0
    with open(path, "w", encoding="utf-8") as out:
        for row in rows:
            out.write(json.dumps(row, ensure_ascii=False))
            out.write("\n")
            count += 1
    return count


def instance_text(rec):
    content = rec.get("content") or ""
    return {"uid": str(rec["uid"]), "title": rec.get("title") or "", "content": content}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", type=Path)
    ap.add_argument("dst", type=Path)
    ap.add_argument("--no-train", action="store_true", help="skip the train corpus")
    args = ap.parse_args()
    args.dst.mkdir(parents=True, exist_ok=True)

    label_uids = []
    seen = set()
    labels = []
    for rec in records(args.src, "lbl"):
        uid = str(rec["uid"])
        if uid in seen:
            sys.exit(f"duplicate label uid {uid}")
        seen.add(uid)
        title = (rec.get("title") or "").strip()
        label_uids.append(uid if title else None)
        if title:
            labels.append({"uid": uid, "title": title})
    dropped = label_uids.count(None)
    print(f"labels: {write_jsonl(args.dst / 'labels.jsonl', labels)} (dropped {dropped} blank)")

    tests, truth = [], []
    blank = 0
    for rec in records(args.src, "tst"):
        row = instance_text(rec)
        if not row["title"].strip():
            blank += 1
            continue
        tests.append(row)
        lids = [label_uids[i] for i in rec.get("target_ind", []) if label_uids[i] is not None]
        if lids:
            truth.append({"uid": str(rec["uid"]), "labels": lids})
    print(f"test: {write_jsonl(args.dst / 'test.jsonl', tests)} (dropped {blank} blank)")
    print(f"truth: {write_jsonl(args.dst / 'truth.jsonl', truth)}")

    if not args.no_train:
        rows = (instance_text(rec) for rec in records(args.src, "trn"))
        train = (row for row in rows if row["title"].strip())
        print(f"train: {write_jsonl(args.dst / 'train.jsonl', train)}")


if __name__ == "__main__":
    main()
