#!/usr/bin/env python3
"""Writes the eval mock scripts in fixtures/ from the corpus in corpora/.

Each script walks every corpus source through the same plan: title,
background, one code explanation per labeled range (in paragraph order),
summary, finish. The scripts differ only in what the CODE field holds:

  verbatim.json   the target lines, copied from the write prompt
  omit_code.json  nothing
  fabricate.json  lines that occur in no source

Plan rules are keyed on the first line of each source, which must be unique
across the corpus.
"""
import argparse
import glob
import json
import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

CODE_VARIANTS = {
    "verbatim": "```{lang}\n{{{{target_code}}}}\n```",
    "omit_code": "",
    "fabricate": "```{lang}\nquux_frobnicate(widget_count, 0x5f3759df)\nreturn zorblax_table[widget_count]\n```",
}


def load_entries(corpus_dir):
    entries = []
    for path in sorted(glob.glob(os.path.join(corpus_dir, "*.json"))):
        with open(path) as f:
            entries.append(json.load(f))
    firsts = [e["source"].split("\n")[0] for e in entries]
    for i, first in enumerate(firsts):
        clashes = [j for j, e in enumerate(entries) if j != i and first in e["source"]]
        if clashes:
            sys.exit(f"first line of entry {i} also occurs in entries {clashes}")
    return entries


def plan(observation, thoughts):
    lines = ["OBSERVATION: " + observation]
    lines += [f"THOUGHT {i + 1}: {t}" for i, t in enumerate(thoughts)]
    return "\n".join(lines)


def script_for(entries, variant):
    # Only one language per write prompt is unknown to the mock, so the fence
    # tag stays generic; the resolver ignores it.
    code = CODE_VARIANTS[variant].format(lang="text")
    rules = [
        {"match": ["Ballot"], "response": "VOTE: 1\nREASON: Follows the order of the source."},
        {"match": ["Action: write title"], "response": "TITLE: Reading the code"},
        {"match": ["Action: write background"],
         "response": "STEP: 2\nCODE:\nEXPLANATION: What the program is for.\nSUMMARY: Background"},
        {"match": ["Action: write code explanation"],
         "response": f"STEP: 3\nCODE:\n{code}\nEXPLANATION: What these lines do.\nSUMMARY: Walkthrough"},
        {"match": ["Action: write notification"],
         "response": "STEP: 3\nCODE:\nEXPLANATION: A caveat worth knowing.\nSUMMARY: Caveat"},
        {"match": ["Action: write summary"],
         "response": "STEP: 4\nCODE:\nEXPLANATION: What we built.\nSUMMARY: Wrap-up"},
    ]
    for entry in entries:
        key = entry["source"].split("\n")[0]
        ranges = [p["truth"] for p in entry["paragraphs"] if p.get("truth")]
        steps = [plan("Nothing written yet.", ["write title | Start with a title.",
                                               "write background | Set the scene."]),
                 plan("A title exists.", ["write background | Explain the purpose first."])]
        for r in ranges:
            steps.append(plan("Walking through the source in order.", [
                f"write code explanation for lines {r['start']}-{r['end']} | Next block in reading order.",
                "write notification | Point out a caveat."]))
        steps.append(plan("Every labeled block is covered.", ["write summary | Close the tutorial."]))
        steps.append(plan("The tutorial is complete.", ["finish | Nothing left to say."]))
        for written, response in enumerate(steps):
            rules.append({"match": [key, "Propose the next", f"so far: {written}."], "response": response})
    return {"seed": 0, "default_response": "", "rules": rules}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", default=os.path.join(ROOT, "corpora"))
    parser.add_argument("--out", default=os.path.join(ROOT, "fixtures"))
    args = parser.parse_args()
    entries = load_entries(args.corpus)
    os.makedirs(args.out, exist_ok=True)
    for variant in CODE_VARIANTS:
        path = os.path.join(args.out, variant + ".json")
        with open(path, "w") as f:
            json.dump(script_for(entries, variant), f, indent=1)
            f.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
