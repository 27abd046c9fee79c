#!/usr/bin/env python3
"""Generate the bundled toy corpus in data/toy.

Each system output gets a hidden quality q in {1, 2, 3}. The mock provider
grades a translation by the trigram overlap between it and a per-segment
pseudo-reference, so the references are assembled from prefixes of every
system's output, sized so that the overlap lands in the wanted class:

  gemba_classify  -> q
  kpe_perplexity  -> q + e     (e = +-1, per output)
  kpe_token_sim   -> q - e
  kpe_sent_sim    -> q + e3    (e3 = +-1, independent)

Averaging combiners therefore recover q exactly while each single step is
off by one. Judgments compare outputs of distinct quality, the better one
having the higher q. Every grade is re-checked with an independent overlap
implementation before anything is written.
"""

import argparse
import json
import random
from pathlib import Path

LPS = ["cs-en", "de-en", "fi-en"]
SYSTEMS = ["online-A", "online-B", "rbmt-1", "uedin-nmt"]
SEGMENTS = 20
JUDGMENTS = 50
K = 5
LETTERS = "abcdefghijklmnopqrstuvwxyz"
FILLER = "0123456789"


def random_sentence(rng, words):
    return " ".join("".join(rng.choice(LETTERS) for _ in range(rng.randint(3, 8)))
                    for _ in range(words))


def trigrams(s):
    s = s.lower()
    return {s[i:i + 3] for i in range(len(s) - 2)}


def overlap(a, b):
    ta, tb = trigrams(a), trigrams(b)
    if not ta or not tb:
        return 1.0 if a.lower() == b.lower() else 0.0
    return len(ta & tb) / min(len(ta), len(tb))


def grade(o):
    return min(K - 1, int(o * K))


def prefix_with(mt, shared):
    """Shortest prefix of mt carrying `shared` distinct trigrams."""
    if shared == 0:
        return ""
    for end in range(3, len(mt) + 1):
        if len(trigrams(mt[:end])) == shared:
            return mt[:end]
    raise ValueError("not enough trigrams")


def build_reference(rng, mts, targets):
    parts = []
    for mt, cls in zip(mts, targets):
        n = len(trigrams(mt))
        shared = round((cls + 0.5) / K * n)
        parts.append(prefix_with(mt, shared))
    filler = "".join(rng.choice(FILLER) for _ in range(400))
    return "|".join(parts) + "|" + filler


def make_segment(rng):
    while True:
        mts = [random_sentence(rng, 10) for _ in SYSTEMS]
        if len(set(mts)) != len(mts):
            continue
        q = [rng.choice([1, 2, 3]) for _ in SYSTEMS]
        e = [rng.choice([-1, 1]) for _ in SYSTEMS]
        e3 = [rng.choice([-1, 1]) for _ in SYSTEMS]
        wanted = {
            "gemba_classify": q,
            "kpe_perplexity": [a + b for a, b in zip(q, e)],
            "kpe_token_sim": [a - b for a, b in zip(q, e)],
            "kpe_sent_sim": [a + b for a, b in zip(q, e3)],
        }
        refs = {tid: build_reference(rng, mts, cls) for tid, cls in wanted.items()}
        ok = all(grade(overlap(mt, refs[tid])) == cls[i]
                 for tid, cls in wanted.items() for i, mt in enumerate(mts))
        if ok:
            return mts, q, refs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "toy"))
    ap.add_argument("--seed", type=int, default=20181)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    segments, outputs, judgments, fixtures, human = [], [], [], [], []
    manifest = {"lps": {}, "total_judgments": 0, "seed": args.seed}
    seen_mt = set()
    for lp in LPS:
        quality = {s: [] for s in SYSTEMS}
        candidates = []
        for n in range(1, SEGMENTS + 1):
            seg_id = str(n)
            while True:
                mts, q, refs = make_segment(rng)
                if not seen_mt.intersection(mts):
                    break
            seen_mt.update(mts)
            segments.append((lp, seg_id, random_sentence(rng, 9)))
            for sys, mt, qi in zip(SYSTEMS, mts, q):
                outputs.append((lp, sys, seg_id, mt))
                quality[sys].append(qi)
            for i in range(len(SYSTEMS)):
                for j in range(len(SYSTEMS)):
                    if q[i] > q[j]:
                        candidates.append((lp, seg_id, SYSTEMS[i], SYSTEMS[j]))
            fixtures.append({
                "lp": lp,
                "seg_id": seg_id,
                "reference": refs["gemba_classify"],
                "by_template": {t: refs[t] for t in ("kpe_perplexity", "kpe_token_sim",
                                                     "kpe_sent_sim")},
            })
        if len(candidates) < JUDGMENTS:
            raise SystemExit(f"{lp}: only {len(candidates)} judgeable pairs")
        picked = rng.sample(candidates, JUDGMENTS)
        judgments.extend(picked)
        means = {s: sum(v) / len(v) for s, v in quality.items()}
        for s in SYSTEMS:
            human.append((lp, s, means[s]))
        manifest["lps"][lp] = {"segments": SEGMENTS, "systems": len(SYSTEMS),
                               "judgments": JUDGMENTS}
        manifest["total_judgments"] += JUDGMENTS

    def tsv(name, rows):
        with open(out / name, "w", encoding="utf-8", newline="\n") as f:
            for r in rows:
                f.write("\t".join(str(x) for x in r) + "\n")

    tsv("segments.tsv", segments)
    tsv("outputs.tsv", outputs)
    tsv("judgments.tsv", judgments)
    tsv("human_system_scores.tsv", [(lp, s, f"{m:.4f}") for lp, s, m in human])
    with open(out / "mock_fixtures.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for fx in fixtures:
            f.write(json.dumps(fx, sort_keys=True) + "\n")
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    config = {
        "provider": "mock",
        "model_id": "mock-model",
        "segments": "segments.tsv",
        "outputs": "outputs.tsv",
        "judgments": "judgments.tsv",
        "human_scores": "human_system_scores.tsv",
        "mock_fixtures": "mock_fixtures.jsonl",
    }
    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
