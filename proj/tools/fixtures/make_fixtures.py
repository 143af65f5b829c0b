#!/usr/bin/env python3
"""Generate the replay fixtures under tests/fixtures/.

Writes synthetic but deterministic model transcripts for the corpus cohort and
the code-generation round trip, plus golden metric files computed here with
independent tooling (Python zlib, rapidfuzz, numpy). Re-running the script
reproduces the committed files byte for byte.

    pip install rapidfuzz numpy
    python3 tools/fixtures/make_fixtures.py
"""

import hashlib
import itertools
import json
import math
import pathlib
import random
import zlib

import numpy as np
from rapidfuzz.distance import Levenshtein

ROOT = pathlib.Path(__file__).resolve().parents[2]
PROMPTS = ROOT / "prompts"
FIXTURES = ROOT / "tests" / "fixtures"
PLACEHOLDER = "{{PAYLOAD}}"
EMBED_DIM = 64
EPSILON = 1e-3
DELTA = 1e-6


def canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(obj):
    return hashlib.sha256(canonical(obj).encode("utf-8")).hexdigest()


def seeded(*parts):
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(h[:8], "big"))


# ---------------------------------------------------------------- prompts

def load_templates():
    manifest = json.loads((PROMPTS / "manifest.json").read_text(encoding="utf-8"))
    out = {}
    for t in manifest["templates"]:
        entry = dict(t)
        entry["action_text"] = (PROMPTS / t["action"]["path"]).read_text(encoding="utf-8")
        entry["system_text"] = (PROMPTS / t["system"]["path"]).read_text(encoding="utf-8") if "system" in t else None
        out[t["id"]] = entry
    return out


TEMPLATES = load_templates()


def resolve(strategy, direction, style):
    for t in TEMPLATES.values():
        if t["strategy"] == strategy and t["direction"] == direction and t["style"] == style:
            return t
    for t in TEMPLATES.values():
        if t["strategy"] == strategy and t["direction"] == direction and t["style"] == "chat":
            return t
    raise KeyError((strategy, direction, style))


def render(template, payload):
    msgs = []
    if template["system_text"] is not None:
        msgs.append({"role": "system", "content": template["system_text"]})
    msgs.append({"role": "user", "content": template["action_text"].replace(PLACEHOLDER, payload, 1)})
    return msgs


# --------------------------------------------------------------- transcripts

class TranscriptBuilder:
    def __init__(self):
        self.records = []
        self.seen = set()

    def chat(self, profile, messages, text, seed):
        body = dict(profile.get("decoding", {}))
        body["model"] = profile["model"]
        body["messages"] = messages
        d = digest(body)
        if d in self.seen:
            raise RuntimeError("duplicate chat request in fixture")
        self.seen.add(d)
        rng = seeded("latency", d, seed)
        prompt_tokens = sum(len(m["content"]) for m in messages) // 4
        self.records.append({
            "digest": d,
            "kind": "chat",
            "request": body,
            "response": {
                "text": text,
                "model": profile["model"],
                "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": max(1, len(text) // 4)},
            },
            "latency_ms": float(rng.randint(600, 9000)),
        })
        return d

    def embed(self, profile, text, vector):
        body = {"model": profile["embedding_model"] or profile["model"], "input": text}
        d = digest(body)
        if d in self.seen:
            return d
        self.seen.add(d)
        self.records.append({
            "digest": d,
            "kind": "embed",
            "request": body,
            "response": {"embedding": [float(x) for x in vector], "model": body["model"]},
            "latency_ms": float(seeded("latency", d).randint(80, 400)),
        })
        return d

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for rec in self.records:
                f.write(canonical(rec) + "\n")


# ------------------------------------------------------------------ oracles

def entropy(data: bytes):
    counts = {}
    for b in data:
        counts[b] = counts.get(b, 0) + 1
    n = len(data)
    h = 0.0
    for c in counts.values():
        p = c / n
        h += -p * math.log2(p)
    k = len(counts)
    return h, (h / math.log2(k) if k > 1 else 0.0), k


def cosine(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    v = float(np.dot(a, b) / math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b))))
    return max(-1.0, min(1.0, v))


def score(original: str, compressed: bytes, decompressed: str, cs: float):
    ob = original.encode("utf-8")
    h, hn, k = entropy(compressed)
    cr = 1.0 - len(compressed) / len(ob)
    ed_raw = Levenshtein.distance(original, decompressed)
    denom = max(len(original), len(decompressed))
    ed = ed_raw / denom if denom else 0.0
    cr_c = min(max(cr, DELTA), 1.0 - DELTA)
    ed_f = max(ed, EPSILON)
    ere = -1.0 / (math.log(cr_c) * ed_f)
    return {
        "entropy_raw_bits": h,
        "entropy_normalized": hn,
        "distinct_symbols": k,
        "cr": cr,
        "original_bytes": len(ob),
        "compressed_bytes": len(compressed),
        "ed_raw": ed_raw,
        "ed_normalized": ed,
        "cs": cs,
        "ere_raw": ere,
        "sre_raw": cr * cs,
        "cr_clamped": cr_c != cr,
        "ed_floored": ed_f != ed,
    }


# --------------------------------------------------------------- embeddings

def unit(rng, dim=EMBED_DIM):
    v = np.array([rng.gauss(0.0, 1.0) for _ in range(dim)])
    return v / np.linalg.norm(v)


def at_cosine(u, cs, rng):
    """A unit vector whose cosine with unit vector u is cs."""
    w = unit(rng, len(u))
    w = w - np.dot(w, u) * u
    w = w / np.linalg.norm(w)
    return cs * u + math.sqrt(max(0.0, 1.0 - cs * cs)) * w


def rounded(v):
    return [float(f"{x:.12g}") for x in v]


# ------------------------------------------------------------ text shaping

VOWELS = set("aeiouAEIOU")


def squeeze(text: str, rng) -> str:
    """Vowel-dropped, space-free shorthand of the text."""
    out = []
    for word in text.split():
        core = "".join(ch for i, ch in enumerate(word) if i == 0 or ch not in VOWELS)
        out.append(core[:1].upper() + core[1:])
    s = "".join(out)
    if rng.random() < 0.5:
        s = s.replace("Th", "þ")
    return s


def shape(text: str, length: int, rng) -> str:
    """A string of exactly `length` UTF-8 bytes derived from the text."""
    base = squeeze(text, rng)
    while len(base.encode("utf-8")) < length:
        base += "|" + squeeze(text[::-1], rng)
    b = base.encode("utf-8")[:length]
    while True:
        try:
            s = b.decode("utf-8")
            break
        except UnicodeDecodeError:
            b = b[:-1]
    while len(s.encode("utf-8")) < length:
        s += "~"
    s = s.strip("\n")
    assert len(s.encode("utf-8")) == length
    return s


def mutate(text: str, rate: float, rng) -> str:
    """Replace roughly `rate` of the words and drop the trailing newline."""
    words = text.rstrip("\n").split(" ")
    out = []
    for w in words:
        r = rng.random()
        if r < rate * 0.6:
            out.append(w[::-1] if len(w) > 2 else w + "e")
        elif r < rate:
            out.append("".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(max(1, len(w)))))
        elif r < rate * 1.15:
            continue
        else:
            out.append(w)
    return " ".join(out)


# ------------------------------------------------------------ corpus cohort

ENDPOINTS = {
    "gpt4": {
        "base_url": "https://api.openai.com/v1",
        "model": "gpt-4",
        "embedding_model": "",
        "api_key_env": "OPENAI_API_KEY",
        "prompt_style": "chat",
        "rate_limit": 4,
        "max_retries": 3,
    },
    "gpt35": {
        "base_url": "https://api.openai.com/v1",
        "model": "gpt-3.5-turbo",
        "embedding_model": "",
        "api_key_env": "OPENAI_API_KEY",
        "prompt_style": "system_action",
        "rate_limit": 4,
        "max_retries": 3,
        "decoding": {"temperature": 0},
    },
    "embed": {
        "base_url": "https://api.openai.com/v1",
        "model": "text-embedding-ada-002",
        "embedding_model": "text-embedding-ada-002",
        "api_key_env": "OPENAI_API_KEY",
        "prompt_style": "chat",
    },
}

# (method id, endpoint, strategy, mean CR, CS, ED target)
LLM_METHODS = [
    ("base_gpt4", "gpt4", "base", 0.825, 0.923, 0.510),
    ("lossless_gpt4", "gpt4", "lossless", 0.423, 0.976, 0.194),
    ("lossless_gpt35", "gpt35", "lossless", 0.383, 0.743, 0.573),
    ("semantic_gpt4", "gpt4", "semantic", 0.772, 0.936, 0.556),
    ("semantic_gpt35", "gpt35", "semantic", 0.768, 0.930, 0.556),
]
CODEC_METHODS = [("zlib_least", 0), ("zlib_most", 9)]

# Text c under lossless_gpt35 expands by 71%.
EXPANSION = ("c", "lossless_gpt35", -0.71)


def load_corpus():
    manifest_path = ROOT / "corpus" / "fictional" / "manifest.json"
    m = json.loads(manifest_path.read_text(encoding="utf-8"))
    texts = []
    for e in m["entries"]:
        texts.append((e["id"], (manifest_path.parent / e["path"]).read_bytes().decode("utf-8")))
    return texts


def cr_plan(texts, method_id, mean_cr):
    ids = [t for t, _ in texts]
    rng = seeded("cr-jitter", method_id)
    fixed = {}
    if method_id == EXPANSION[1]:
        fixed[EXPANSION[0]] = EXPANSION[2]
    free = [i for i in ids if i not in fixed]
    target_free = (mean_cr * len(ids) - sum(fixed.values())) / len(free)
    jitter = [rng.uniform(-0.05, 0.05) for _ in free]
    shift = sum(jitter) / len(jitter)
    plan = dict(fixed)
    for i, j in zip(free, jitter):
        plan[i] = target_free + j - shift
    return plan


def tune_lengths(texts, plan, mean_cr):
    """Integer compressed lengths whose mean CR lands as close as possible to mean_cr."""
    sizes = {t: len(s.encode("utf-8")) for t, s in texts}
    lengths = {t: max(1, round((1.0 - plan[t]) * sizes[t])) for t in sizes}
    ids = sorted(sizes)

    def mean(ls):
        return sum(1.0 - ls[t] / sizes[t] for t in ids) / len(ids)

    best = dict(lengths)
    for _ in range(200):
        err = mean(best) - mean_cr
        if abs(err) < 1e-6:
            break
        # Nudge the text whose one-byte step best reduces the error.
        step = 1 if err > 0 else -1
        cand = min(ids, key=lambda t: abs(err - step / sizes[t] / len(ids)))
        best[cand] += step
    return best


def build_cohort():
    texts = load_corpus()
    tb = TranscriptBuilder()
    embed_profile = ENDPOINTS["embed"]
    golden = []

    originals = {}
    for tid, content in texts:
        u = unit(seeded("embed-original", tid))
        originals[tid] = u
        tb.embed(embed_profile, content, rounded(u))

    for method_id, ep, strategy, mean_cr, cs, ed_target in LLM_METHODS:
        profile = ENDPOINTS[ep]
        plan = cr_plan(texts, method_id, mean_cr)
        lengths = tune_lengths(texts, plan, mean_cr)
        for tid, content in texts:
            rng = seeded("cohort", method_id, tid)
            compressed = shape(content, lengths[tid], rng)
            decompressed = mutate(content, ed_target * 1.22, rng)
            assert content not in compressed

            c_tmpl = resolve(strategy, "compress", profile["prompt_style"])
            d_tmpl = resolve(strategy, "decompress", profile["prompt_style"])
            tb.chat(profile, render(c_tmpl, content), compressed, method_id)
            tb.chat(profile, render(d_tmpl, compressed), decompressed, method_id)

            u = originals[tid]
            v = rounded(at_cosine(u, cs, seeded("embed-decompressed", method_id, tid)))
            tb.embed(embed_profile, decompressed, v)
            cs_exact = cosine(rounded(u), v)
            row = score(content, compressed.encode("utf-8"), decompressed, cs_exact)
            row.update({"text_id": tid, "method_id": method_id})
            golden.append(row)

    for method_id, level in CODEC_METHODS:
        for tid, content in texts:
            data = content.encode("utf-8")
            z = zlib.compress(data, level)
            assert zlib.decompress(z) == data
            row = score(content, z, content, cosine(rounded(originals[tid]), rounded(originals[tid])))
            row.update({"text_id": tid, "method_id": method_id})
            golden.append(row)

    out = FIXTURES / "replay"
    out.mkdir(parents=True, exist_ok=True)
    tb.write(out / "transcript.ndjson")

    methods = [{"id": m, "kind": "llm", "endpoint": ep, "strategy": s} for m, ep, s, *_ in LLM_METHODS]
    methods += [{"id": m, "kind": "codec", "level": lvl} for m, lvl in CODEC_METHODS]
    config = {
        "corpus": "../../../corpus/fictional/manifest.json",
        "endpoints": ENDPOINTS,
        "embedding_endpoint": "embed",
        "methods": methods,
        "epsilon": EPSILON,
        "norm": "max-divide",
        "transport": "replay:transcript.ndjson",
        "workers": 4,
    }
    (out / "run.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    golden.sort(key=lambda r: (r["text_id"], r["method_id"]))
    (out / "golden_metrics.json").write_text(json.dumps(golden, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return golden


# ------------------------------------------------------------------ codegen

CASES = [
    ("count_string_instances", "partial", "partial"),
    ("duplicate_strings", "partial", "partial"),
    ("increment_value_at_string", "yes", "yes"),
    ("return_one", "yes", "yes"),
    ("append_mutated", "yes", "yes"),
    ("datetime_to_prob", "yes", "yes"),
]

DESCRIPTIONS = {
    "count_string_instances": (
        "The function receives a list of strings named input and builds a dictionary. Every distinct string "
        "that appears in the list becomes a key, and the value stored for that key is the number of times the "
        "exact same string occurs in the list. Counting is done per whole string, so two different strings "
        "that share characters are still counted separately. The dictionary is returned; the input list is "
        "left unchanged. An empty list produces an empty dictionary."
    ),
    "duplicate_strings": (
        "The function takes a list of strings called input and returns a dictionary. For each string in the "
        "list there is one entry whose key is the string itself and whose value is that string written twice "
        "in a row, that is the string concatenated with itself. Repeated strings in the list collapse into a "
        "single key. The list is not modified and nothing is printed."
    ),
    "increment_value_at_string": (
        "The function accepts a dictionary that maps string keys to integer values. It returns a brand new "
        "dictionary with exactly the same keys, where every value is the original integer plus one. The "
        "original dictionary is not mutated, key order follows the input, and an empty dictionary yields an "
        "empty dictionary."
    ),
    "return_one": (
        "The function can be called with any number of positional arguments and any keyword arguments, "
        "including none at all. It ignores every argument it receives and always returns the integer 1. It "
        "has no side effects and never raises for any combination of arguments."
    ),
    "append_mutated": (
        "The function takes a list of strings and modifies it in place. It walks over the list by index and "
        "replaces each element with the same string followed by the suffix mutated, written in lowercase with "
        "no separator. The list keeps its length and order. The function does not build a new list and "
        "returns None."
    ),
    "datetime_to_prob": (
        "The function takes a pandas Series of datetime values named created_at_dt and a strftime format "
        "string freq. Each timestamp is formatted with freq and parsed back into a timestamp, which buckets "
        "the values by that granularity. The values are grouped by bucket and the size of every group is "
        "stored in a dictionary keyed by bucket. Each count is divided by the total number of values to give "
        "a relative frequency. The frequencies are then replaced by a running cumulative sum in bucket order, "
        "so each bucket holds the share of all values at or before it. Finally every cumulative value is "
        "divided by the value of the latest bucket, so the last bucket is exactly one. The dictionary mapping "
        "bucket timestamps to these rolling probabilities is returned."
    ),
}

# Reconstructions returned for stage 3 (base description) and stage 4
# (compressed description).
RECONSTRUCTIONS = {
    "count_string_instances": (
        "def chatgpt_base_gen_function_one(strings_list):\n"
        "    char_count = {}\n"
        "    for string in strings_list:\n"
        "        for char in string:\n"
        "            if char in char_count:\n"
        "                char_count[char] += 1\n"
        "            else:\n"
        "                char_count[char] = 1\n"
        "    return char_count",
        "def chatgpt_base_gen_function_one(l: list[str]) -> dict:\n"
        "    unique_chars = set(''.join(l))\n"
        "    occurrences = {k: sum(s.count(k) for s in l) for k in unique_chars}\n"
        "    return occurrences",
    ),
    "duplicate_strings": (
        "def chatgpt_base_gen_function_two(strings_list):\n"
        "    unique_chars = set(''.join(strings_list))\n"
        "    doubled_chars = {char: char * 2 for char in unique_chars}\n"
        "    return doubled_chars",
        "def chatgpt_base_gen_function_two(l: list[str]) -> dict:\n"
        "    unique_chars = set(''.join(l))\n"
        "    doubled_chars = {k: k * 2 for k in unique_chars}\n"
        "    return doubled_chars",
    ),
    "increment_value_at_string": (
        "def chatgpt_base_gen_function_three(input_dict):\n"
        "    incremented_values = {key: value + 1 for key, value in input_dict.items()}\n"
        "    return incremented_values",
        "def chatgpt_base_gen_function_three(d: dict[str, int]) -> dict:\n"
        "    incremented_values = {k: v + 1 for k, v in d.items()}\n"
        "    return incremented_values",
    ),
    "return_one": (
        "def chatgpt_base_gen_function_four(*args, **kwargs):\n"
        "    return 1",
        "def chatgpt_base_gen_function_four(*args, **kwargs) -> int:\n"
        "    return 1",
    ),
    "append_mutated": (
        "def chatgpt_base_gen_function_five(strings_list):\n"
        "    for i in range(len(strings_list)):\n"
        "        strings_list[i] += 'mutated'",
        "def chatgpt_base_gen_function_five(l):\n"
        "    for i in range(len(l)):\n"
        "        l[i] += 'mutated'\n"
        "    return None",
    ),
    "datetime_to_prob": (
        "def chatgpt_base_gen_function_six(created_at_dt, freq):\n"
        "    # Step 1: Convert to freq format\n"
        "    created_at_freq = created_at_dt.dt.strftime(freq).map(pd.Timestamp)\n"
        "\n"
        "    # Step 2: Group by unique Timestamp values\n"
        "    created_at_freq_grouped = list(created_at_freq.groupby(created_at_freq).groups.items())\n"
        "\n"
        "    # Step 3: Initialize the empty dictionary\n"
        "    day_to_creation_freq = {}\n"
        "\n"
        "    # Step 4: Iterate through the grouped list and populate the dictionary\n"
        "    for group_num, group in created_at_freq_grouped:\n"
        "        day_to_creation_freq[group_num] = len(group)\n"
        "\n"
        "    # Step 5: Normalize the frequencies\n"
        "    total_length = len(created_at_freq)\n"
        "    day_to_creation_freq = {key: value / total_length for key, value in day_to_creation_freq.items()}\n"
        "\n"
        "    # Step 6: Update the dictionary with a rolling cumulative sum\n"
        "    rolling_sum = 0\n"
        "    for key in day_to_creation_freq:\n"
        "        rolling_sum += day_to_creation_freq[key]\n"
        "        day_to_creation_freq[key] = rolling_sum\n"
        "\n"
        "    # Step 7: Create a rolling probability\n"
        "    max_value = max(day_to_creation_freq.values())\n"
        "    day_to_creation_freq = {key: value / max_value for key, value in day_to_creation_freq.items()}\n"
        "\n"
        "    # Step 8: Return the dictionary\n"
        "    return day_to_creation_freq",
        "def chatgpt_base_gen_function_six(created_at_dt, freq):\n"
        "    # Step 1: Convert created_at_dt to created_at_freq using the given frequency\n"
        "    created_at_freq = created_at_dt.resample(freq).count()\n"
        "\n"
        "    # Step 2: Group created_at_freq into created_at_freq_grouped\n"
        "    created_at_freq_grouped = list(created_at_freq.items())\n"
        "\n"
        "    # Step 3: Initialize day_to_creation_freq dictionary\n"
        "    day_to_creation_freq = {}\n"
        "\n"
        "    # Step 4: Iterate through created_at_freq_grouped and update day_to_creation_freq\n"
        "    for grp_num, grp in created_at_freq_grouped:\n"
        "        day_to_creation_freq[grp_num] = len(grp)\n"
        "\n"
        "    # Step 5: Normalize day_to_creation_freq\n"
        "    total = sum(day_to_creation_freq.values())\n"
        "    day_to_creation_freq = {k: v / total for k, v in day_to_creation_freq.items()}\n"
        "\n"
        "    # Step 6: Update day_to_creation_freq with rolling cumulative sum\n"
        "    rolling_cumsum = pd.Series(day_to_creation_freq).cumsum().to_dict()\n"
        "    day_to_creation_freq.update(rolling_cumsum)\n"
        "\n"
        "    # Step 7: Create rolling_prob by dividing each value by the maximum value\n"
        "    max_val = max(day_to_creation_freq.values())\n"
        "    day_to_creation_freq = {k: v / max_val for k, v in day_to_creation_freq.items()}\n"
        "\n"
        "    # Step 8: Return day_to_creation_freq\n"
        "    return day_to_creation_freq",
    ),
}

RATIONALE = {
    "yes": "Both functions compute the same result for every input and have the same side effects.",
    "partial": "The reconstruction has the same overall shape but works on individual characters instead of "
               "whole strings, so the keys and values differ for most inputs.",
}

VERDICT_TOKEN = {"yes": "EQUIVALENT", "partial": "PARTIAL"}


def judge_payload(original, reconstruction):
    return "ORIGINAL:\n" + original + "\n\nRECONSTRUCTION:\n" + reconstruction


def pick_compressed_lengths(desc_lengths, target=0.80):
    """Integer compressed lengths near 20% of each description whose mean CR
    is at least `target` and below target + 1.25e-6, so that
    floor(32000 / (1 - mean)) is exactly 160000."""
    ids = list(desc_lengths)
    tilt = [-0.02, 0.02, -0.01, 0.01, 0.0, 0.0]
    centre = {i: round(desc_lengths[i] * (1 - target - t)) for i, t in zip(ids, tilt)}
    best = None
    for deltas in itertools.product(range(-4, 5), repeat=len(ids)):
        ls = {i: centre[i] + d for i, d in zip(ids, deltas)}
        crs = sorted(1.0 - ls[i] / desc_lengths[i] for i in ids)
        mean = sum(crs) / len(crs)
        if target <= mean < target + 1.25e-6:
            spread = sum(abs(d) for d in deltas)
            if best is None or spread < best[0]:
                best = (spread, ls)
    if best is None:
        raise RuntimeError("no length combination reaches the target mean")
    return best[1]


def build_codegen():
    out = FIXTURES / "codegen"
    (out / "cases").mkdir(parents=True, exist_ok=True)
    sources = {}
    for case_id, *_ in CASES:
        sources[case_id] = (out / "cases" / f"{case_id}.py").read_text(encoding="utf-8")

    gpt4 = dict(ENDPOINTS["gpt4"])
    embed_profile = ENDPOINTS["embed"]
    tb = TranscriptBuilder()

    desc_lengths = {c: len(DESCRIPTIONS[c].encode("utf-8")) for c, *_ in CASES}
    comp_lengths = pick_compressed_lengths(desc_lengths)

    expected = []
    for case_id, exp_base, exp_comp in CASES:
        src = sources[case_id]
        desc = DESCRIPTIONS[case_id]
        comp = shape(desc, comp_lengths[case_id], seeded("codegen-compress", case_id))
        rec_base, rec_comp = RECONSTRUCTIONS[case_id]

        tb.chat(gpt4, render(TEMPLATES["codegen.describe"], src), desc, case_id)
        tb.chat(gpt4, render(TEMPLATES["codegen.compress_desc"], desc), comp, case_id)
        tb.chat(gpt4, render(TEMPLATES["codegen.reconstruct_base"], desc), rec_base, case_id)
        tb.chat(gpt4, render(TEMPLATES["codegen.reconstruct_compressed"], comp), rec_comp, case_id)
        for rec, exp in ((rec_base, exp_base), (rec_comp, exp_comp)):
            verdict = "VERDICT: " + VERDICT_TOKEN[exp] + "\n" + RATIONALE[exp]
            tb.chat(gpt4, render(TEMPLATES["codegen.judge"], judge_payload(src, rec)), verdict, case_id)
        # Judge calibration: the original compared with itself.
        tb.chat(gpt4, render(TEMPLATES["codegen.judge"], judge_payload(src, src)),
                "VERDICT: EQUIVALENT\nThe two functions are textually identical.", case_id)

        u = unit(seeded("codegen-embed", case_id))
        tb.embed(embed_profile, src, rounded(u))
        cs_values = {}
        for label, rec, exp in (("base", rec_base, exp_base), ("compressed", rec_comp, exp_comp)):
            target = 0.95 if exp == "yes" else 0.82
            v = rounded(at_cosine(u, target, seeded("codegen-embed", case_id, label)))
            tb.embed(embed_profile, rec, v)
            cs_values[label] = cosine(rounded(u), v)

        d_bytes, c_bytes = len(desc.encode("utf-8")), len(comp.encode("utf-8"))
        expected.append({
            "case_id": case_id,
            "description_cr": 1.0 - c_bytes / d_bytes,
            "description_bytes": d_bytes,
            "compressed_bytes": c_bytes,
            "verdict_base": VERDICT_TOKEN[exp_base],
            "verdict_compressed": VERDICT_TOKEN[exp_comp],
            "ed_base_raw": Levenshtein.distance(src, rec_base),
            "ed_compressed_raw": Levenshtein.distance(src, rec_comp),
            "cs_base": cs_values["base"],
            "cs_compressed": cs_values["compressed"],
        })

    tb.write(out / "transcript.ndjson")
    manifest = {"cases": [
        {"case_id": c, "path": f"cases/{c}.py", "language_tag": "python",
         "expected_equivalence": {"baseline": b, "compressed": k}}
        for c, b, k in CASES
    ]}
    (out / "cases.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    config = {
        "cases": "cases.json",
        "endpoint": "gpt4",
        "endpoints": {"gpt4": ENDPOINTS["gpt4"], "embed": ENDPOINTS["embed"]},
        "embedding_endpoint": "embed",
        "base_token_limit": 32000,
        "transport": "replay:transcript.ndjson",
        "workers": 3,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    crs = sorted(e["description_cr"] for e in expected)
    summary = {"cases": expected, "mean_description_cr": sum(crs) / len(crs)}
    (out / "expected.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def main():
    golden = build_cohort()
    summary = build_codegen()
    by_method = {}
    for row in golden:
        by_method.setdefault(row["method_id"], []).append(row)
    for m, rows in by_method.items():
        cr = sum(r["cr"] for r in rows) / len(rows)
        cs = sum(r["cs"] for r in rows) / len(rows)
        ed = sum(r["ed_normalized"] for r in rows) / len(rows)
        print(f"{m:16s} cr={cr:.4f} cs={cs:.4f} ed={ed:.3f}")
    print(f"codegen mean description cr = {summary['mean_description_cr']!r}")


if __name__ == "__main__":
    main()
