#!/usr/bin/env python3
"""Regenerates the synthetic fixture corpus under tests/fixtures/.

The toxic side of every pair is the neutral sentence with one insult from
the mock toxicity lexicon inserted, so the mock scorers see clear labels.
Output is deterministic.
"""
import json
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"

SUBJECTS = ["the movie", "this phone", "the report", "your plan", "that song", "the game",
            "this code", "the meeting", "her answer", "the train", "his car", "the food"]
VERBS = ["was", "is", "seems", "looks", "felt"]
ADJS = ["boring", "slow", "late", "wrong", "cold", "long", "loud", "broken", "odd", "weak"]
INSULTS = ["stupid", "damn", "dumb", "crap"]
TAILS = ["you idiot", "you moron", "you liar"]

# Word-for-word renderings used for the non-English pairs. They only need to
# be stable, not good.
LEXICON = {
    "ru": {"the": "", "movie": "fil'm", "phone": "telefon", "report": "otchet", "was": "byl", "is": "",
           "boring": "skuchnyy", "slow": "medlennyy", "late": "pozdniy", "this": "etot"},
    "de": {"the": "der", "movie": "Film", "phone": "Handy", "was": "war", "is": "ist", "boring": "langweilig",
           "slow": "langsam", "this": "dieses", "late": "spaet"},
    "es": {"the": "la", "movie": "pelicula", "phone": "telefono", "was": "era", "is": "es", "boring": "aburrida",
           "slow": "lenta", "this": "este", "late": "tarde"},
    "uk": {"the": "", "movie": "fil'm", "phone": "telefon", "was": "buv", "is": "", "boring": "nudnyy",
           "slow": "povil'nyy", "this": "tsey", "late": "pizniy"},
}


def make_pair(rng, idx, lang="en"):
    neutral = f"{rng.choice(SUBJECTS)} {rng.choice(VERBS)} {rng.choice(ADJS)}"
    words = neutral.split()
    if rng.random() < 0.5:
        pos = rng.randrange(1, len(words))
        toxic = " ".join(words[:pos] + [rng.choice(INSULTS)] + words[pos:])
    else:
        toxic = neutral + " " + rng.choice(TAILS)
    if lang in LEXICON:
        table = LEXICON[lang]

        def render(s):
            return " ".join(w for w in (table.get(x, x) for x in s.split()) if w)

        neutral, toxic = render(neutral), render(toxic)
    return {"id": f"{lang}-{idx:03d}", "lang": lang, "toxic": toxic, "neutral": neutral}


def write(name, rows, source=None):
    with open(OUT / name, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            if source is not None:
                r = dict(r, source=source)
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    rng = random.Random(20240521)
    OUT.mkdir(parents=True, exist_ok=True)
    write("en_pairs.jsonl", [make_pair(rng, i) for i in range(50)], "en_paradetox")
    write("ru_pairs.jsonl", [make_pair(rng, i, "ru") for i in range(10)], "ru_paradetox")
    multi = [make_pair(rng, i, lang) for i, lang in enumerate(["de", "es", "uk", "de", "es", "uk", "en", "de", "es", "uk"])]
    for i, r in enumerate(multi):
        r["id"] = f"ml-{i:03d}"
    write("multilingual_pairs.jsonl", multi, "multilingual_paradetox")
    write("orpo_prompts.jsonl", [{k: v for k, v in make_pair(rng, i).items() if k != "neutral"} | {"id": f"orpo-{i:03d}"}
                                 for i in range(12)])
    evals = []
    for i, lang in enumerate(["en"] * 6 + ["de", "es", "uk", "ru", "de", "es"]):
        r = make_pair(rng, i, lang)
        r["id"] = f"eval-{i:03d}"
        evals.append(r)
    write("eval_pairs.jsonl", evals)


if __name__ == "__main__":
    main()
