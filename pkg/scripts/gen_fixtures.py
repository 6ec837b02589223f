#!/usr/bin/env python3
"""Generate the committed test fixtures.

Produces, under tests/fixtures/:
  vocab.txt           subword vocabulary, one token per line
  corpus.jsonl        six small annotated units (byte-offset annotations)
  memorization.jsonl  synthetic corpus: 30 FQNs x 3 distinctive contexts
  fig1.java           detection snippet with one point of every kind

Annotation offsets are computed here with plain string and regex
operations, independent of the package under test, and the files are
committed so tests never regenerate them. Rerunning this script must be
byte-stable.
"""

from __future__ import annotations

import json
import re
import string
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

# ---------------------------------------------------------------- vocabulary

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

PUNCT = list(".,;(){}[]<>=+-*/:@\"'!?&|%#$^~\\`")

KEYWORDS = """
import package public private protected static final void class interface
enum record new return if else for while do try catch finally throw throws
extends implements int long short byte char boolean float double var null
true false this super
""".split()

PIECES = """
java util io net lang time text org com google gson jo ##da
String List ArrayList Map HashMap Calendar LocalTime URL File Gson
Buffered ##Reader Reader Writer ##Writer ##Connection ##Instance
##Line ##Hours ##Json ##Lower ##Case ##er ##Stream
read open get to plus add put line reader url items content name path
spec conn cal lt obj main args dir save split resolve print use emit
wrap make log DATE fetch
""".split()

MEM_TOPS = ["alphaco", "bravoco", "gammaco", "deltaco", "kappaco", "sigmaco"]
MEM_SUBS = ["corekit", "datakit", "netkit", "textkit", "mathkit", "filekit"]
MEM_PREFIXES = ["Alpha", "Bravo", "Gamma", "Delta", "Kappa", "Sigma"]
MEM_SUFFIXES = ["Box", "Cap", "Fig", "Hub", "Jet"]

VOCAB_SIZE = 1024


def mem_type(p: int, j: int) -> str:
    return MEM_PREFIXES[p] + MEM_SUFFIXES[j]


def mem_fqn(p: int, j: int) -> str:
    return f"{MEM_TOPS[p]}.{MEM_SUBS[p]}.{mem_type(p, j)}"


def build_vocab() -> list[str]:
    chars = list(string.ascii_lowercase) + list(string.ascii_uppercase)
    chars += list(string.digits) + ["_"]
    tokens = list(SPECIALS) + PUNCT + chars + ["##" + c for c in chars]
    tokens += KEYWORDS + PIECES
    tokens += MEM_TOPS + MEM_SUBS
    tokens += [mem_type(p, j) for p in range(6) for j in range(5)]
    tokens += [f"mark{p}{j}{u}" for p in range(6) for j in range(5) for u in range(3)]
    tokens += [f"hook{p}" for p in range(6)]
    tokens += [f"w{p}{j}" for p in range(6) for j in range(5)]
    tokens += [f"mk{p}{j}" for p in range(6) for j in range(5)]
    tokens += ["seal"]
    tokens += [f"tail{p}{j}{u}" for p in range(6) for j in range(5) for u in range(3)]
    tokens += [f"pmk{p}{k}" for p in range(6) for k in range(3)]
    tokens += [f"ptl{p}{k}" for p in range(6) for k in range(3)]
    seen = set()
    for tok in tokens:
        if tok in seen:
            raise SystemExit(f"duplicate vocab token: {tok}")
        seen.add(tok)
    if len(tokens) > VOCAB_SIZE:
        raise SystemExit(f"base vocab too large: {len(tokens)}")
    tokens += [f"fill{i:04d}" for i in range(VOCAB_SIZE - len(tokens))]
    return tokens


# ------------------------------------------------------------ realistic corpus


def byte_span(text: str, surface: str, occurrence: int) -> tuple[int, int]:
    """Byte offsets of the n-th standalone occurrence of ``surface``."""
    pattern = re.compile(rf"(?<!\w){re.escape(surface)}(?!\w)")
    matches = list(pattern.finditer(text))
    m = matches[occurrence]
    start = len(text[: m.start()].encode("utf-8"))
    return start, start + len(surface.encode("utf-8"))


REAL_UNITS = [
    {
        "id": "io-buffered-read",
        "library": "java-io",
        "text": (
            "import java.io.BufferedReader;\n"
            "import java.io.FileReader;\n"
            "BufferedReader reader = new BufferedReader(new FileReader(path));\n"
            "String line = reader.readLine();\n"
        ),
        "marks": [
            ("BufferedReader", 1, "java.io.BufferedReader", "type"),
            ("BufferedReader", 2, "java.io.BufferedReader", "type"),
            ("FileReader", 1, "java.io.FileReader", "type"),
            ("String", 0, "java.lang.String", "type"),
            ("reader", 1, "java.io.BufferedReader", "receiver"),
        ],
    },
    {
        "id": "joda-local-time",
        "library": "joda-time",
        "text": (
            "import org.joda.time.LocalTime;\n"
            "LocalTime lt = new LocalTime();\n"
            "print(lt.plusHours(2).toString());\n"
        ),
        "marks": [
            ("LocalTime", 1, "org.joda.time.LocalTime", "type"),
            ("LocalTime", 2, "org.joda.time.LocalTime", "type"),
            ("lt", 1, "org.joda.time.LocalTime", "receiver"),
        ],
    },
    {
        "id": "net-url-fetch",
        "library": "java-net",
        "text": (
            "// café fetch helper\n"
            "import java.net.URL;\n"
            "URL url = new URL(spec);\n"
            "conn = url.openConnection();\n"
        ),
        "marks": [
            ("URL", 1, "java.net.URL", "type"),
            ("URL", 2, "java.net.URL", "type"),
            ("url", 1, "java.net.URL", "receiver"),
        ],
    },
    {
        "id": "util-list-add",
        "library": "java-util",
        "text": (
            "import java.util.List;\n"
            "import java.util.ArrayList;\n"
            "List<String> items = new ArrayList<String>();\n"
            "items.add(name);\n"
        ),
        "marks": [
            ("List", 1, "java.util.List", "type"),
            ("String", 0, "java.lang.String", "type"),
            ("ArrayList", 1, "java.util.ArrayList", "type"),
            ("String", 1, "java.lang.String", "type"),
            ("items", 1, "java.util.List", "receiver"),
        ],
    },
    {
        "id": "util-calendar-static",
        "library": "java-util",
        "text": (
            "import java.util.Calendar;\n"
            "Calendar cal = Calendar.getInstance();\n"
            "cal.add(Calendar.DATE, 1);\n"
        ),
        "marks": [
            ("Calendar", 1, "java.util.Calendar", "type"),
            ("Calendar", 2, "java.util.Calendar", "type"),
            ("Calendar", 3, "java.util.Calendar", "type"),
            ("cal", 1, "java.util.Calendar", "receiver"),
        ],
    },
    {
        "id": "gson-to-json",
        "library": "gson",
        "text": (
            "import com.google.gson.Gson;\n"
            "import java.io.StringWriter;\n"
            "Gson gson = new Gson();\n"
            "StringWriter writer = new StringWriter();\n"
            "gson.toJson(obj, writer);\n"
        ),
        "marks": [
            ("Gson", 1, "com.google.gson.Gson", "type"),
            ("Gson", 2, "com.google.gson.Gson", "type"),
            ("StringWriter", 1, "java.io.StringWriter", "type"),
            ("StringWriter", 2, "java.io.StringWriter", "type"),
            ("gson", 1, "com.google.gson.Gson", "receiver"),
        ],
    },
]


def real_corpus_records() -> list[dict]:
    records = []
    for unit in REAL_UNITS:
        text = unit["text"]
        annotations = []
        for surface, occurrence, fqn, kind in unit["marks"]:
            start, end = byte_span(text, surface, occurrence)
            annotations.append({"start": start, "end": end, "fqn": fqn, "kind": kind})
        annotations.sort(key=lambda a: a["start"])
        records.append(
            {
                "id": unit["id"],
                "library": unit["library"],
                "text": text,
                "annotations": annotations,
            }
        )
    return records


# --------------------------------------------------------- memorization corpus


def memorization_records() -> list[dict]:
    """30 FQNs, each declared in 3 units with unit-distinctive surroundings.

    Canonical units (``mem-*``) are three statements: a context call carrying
    a unit-unique mark token plus a package-shared hook token, a declaration
    of the target type with per-type variable and factory names, and a
    trailing call with another unit-unique token. The hook keeps the tokens
    just before the declaration informative about the package while the
    unique tokens keep every context distinct. The third unit of each FQN
    also names a sibling type in its context line, so prompts with and
    without expanded context annotations genuinely differ.

    Mixer units (``mix-*``) pair one package's hook with a declaration from
    the next packages, so a hook is followed by more than one type overall.
    """
    records = []
    for p in range(6):
        for j in range(5):
            for u in range(3):
                mark = f"mark{p}{j}{u}"
                type_name = mem_type(p, j)
                if u == 0:
                    ctx = f"use({mark}, hook{p});\n"
                elif u == 1:
                    ctx = f"emit({mark}, hook{p});\n"
                else:
                    other = mem_type(p, (j + 1) % 5)
                    ctx = f"wrap({mark}, {other}, hook{p});\n"
                decl = f"{type_name} w{p}{j} = mk{p}{j}();\n"
                text = ctx + decl + f"seal(tail{p}{j}{u});\n"
                annotations = []
                if u == 2:
                    other = mem_type(p, (j + 1) % 5)
                    start, end = byte_span(text, other, 0)
                    annotations.append(
                        {
                            "start": start,
                            "end": end,
                            "fqn": mem_fqn(p, (j + 1) % 5),
                            "kind": "type",
                        }
                    )
                start, end = byte_span(text, type_name, 0)
                annotations.append(
                    {"start": start, "end": end, "fqn": mem_fqn(p, j), "kind": "type"}
                )
                annotations.sort(key=lambda a: a["start"])
                records.append(
                    {
                        "id": f"mem-{p}{j}{u}",
                        "library": f"memlib{p}",
                        "text": text,
                        "annotations": annotations,
                    }
                )
    for p in range(6):
        for k in range(3):
            q = (p + 1 + k) % 6
            type_name = mem_type(q, k)
            text = (
                f"use(pmk{p}{k}, hook{p});\n"
                f"{type_name} w{q}{k} = mk{q}{k}();\n"
                f"seal(ptl{p}{k});\n"
            )
            start, end = byte_span(text, type_name, 0)
            records.append(
                {
                    "id": f"mix-{p}{k}",
                    "library": f"memlib{p}",
                    "text": text,
                    "annotations": [
                        {"start": start, "end": end, "fqn": mem_fqn(q, k), "kind": "type"}
                    ],
                }
            )
    return records


FIG1 = """URL url = resolve(args);
reader = open(url);
content = reader.readLine();
List<String> items = split(content);
save(new File(dir), items);
print(items.toString().toLowerCase());
"""


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    vocab = build_vocab()
    (FIXTURES / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    for name, records in [
        ("corpus.jsonl", real_corpus_records()),
        ("memorization.jsonl", memorization_records()),
    ]:
        lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
        (FIXTURES / name).write_text(lines, encoding="utf-8")
    (FIXTURES / "fig1.java").write_text(FIG1, encoding="utf-8")
    print(f"vocab: {len(vocab)} tokens")
    print(f"corpus: {len(real_corpus_records())} units")
    print(f"memorization: {len(memorization_records())} units")


if __name__ == "__main__":
    main()
