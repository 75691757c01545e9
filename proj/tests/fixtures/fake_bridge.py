#!/usr/bin/env python3
#
# Copyright 2026 The slam Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""Stand-in external backend speaking the bridge protocol.

A tiny deterministic model written with the standard library only, so the
core can be tested against trace and logit files produced by an independent
writer. Subcommands: info, encode, decode, forward, extract.
"""

import argparse
import json
import math
import struct
import sys

WORDS = [".", "<unk>"] + ["w%d" % i for i in range(2, 16)]
D_MODEL = 4
LAYERS = [0, 1, 2]
MODEL_ID = "fake-bridge-model"


def base_row(token, pos, layer):
    return [math.sin(0.37 * token + 0.11 * pos + i + 0.5 * layer) for i in range(D_MODEL)]


def activations(tokens, plan):
    """Per-layer rows; plan vectors accumulate through later layers."""
    out = {}
    for layer in LAYERS:
        rows = []
        for t, tok in enumerate(tokens):
            h = base_row(tok, t, layer)
            if plan is not None and t >= plan["apply_from_token"]:
                for entry in plan["layers"]:
                    if entry["layer"] <= layer:
                        for i in range(D_MODEL):
                            h[i] += plan["alpha"] * entry["vector"][i]
            rows.append(h)
        out[layer] = rows
    return out


def logits_for(tokens, acts, logits_from):
    top = acts[LAYERS[-1]]
    rows = []
    for t in range(logits_from, len(tokens)):
        h = top[t]
        rows.append([math.cos(v) * h[v % D_MODEL] + 0.1 * v for v in range(len(WORDS))])
    return rows


def f32(values):
    return struct.pack("<%df" % len(values), *values)


def write_trace(path, tokens, prompt_len, layers, acts):
    mid = MODEL_ID.encode()
    buf = bytearray(b"SLAMTRC\0")
    buf += struct.pack("<II", 1, len(mid)) + mid
    buf += struct.pack("<I", len(layers)) + b"".join(struct.pack("<I", l) for l in layers)
    buf += struct.pack("<IQQ", D_MODEL, len(tokens), prompt_len)
    buf += b"".join(struct.pack("<I", t) for t in tokens)
    for l in layers:
        buf += f32([x for row in acts[l] for x in row])
    with open(path, "wb") as f:
        f.write(buf)


def write_sidecar(path, tokens, layers, acts):
    entries = []
    for l in layers:
        # Moments of the float32 values actually written.
        vals = [struct.unpack("<f", struct.pack("<f", x))[0] for row in acts[l] for x in row]
        mean = sum(vals) / len(vals)
        std = math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals))
        entries.append({"layer": l, "mean": mean, "std": std})
    doc = {"format": "slamtrace-sidecar", "schema_version": 1,
           "num_tokens": len(tokens), "layers": entries}
    with open(path, "w") as f:
        json.dump(doc, f)


def write_logits(path, rows):
    cols = len(rows[0]) if rows else len(WORDS)
    buf = bytearray(b"SLAMLGT\0") + struct.pack("<IQQ", 1, len(rows), cols)
    buf += f32([x for row in rows for x in row])
    with open(path, "wb") as f:
        f.write(buf)


def parse_layers(text):
    layers = [int(x) for x in text.split(",") if x != ""]
    for l in layers:
        if l not in LAYERS:
            sys.exit("layer %d out of range" % l)
    return sorted(set(layers))


def encode(text):
    ids = []
    for word in text.split():
        sep = word.endswith(".") and word != "."
        core = word[:-1] if sep else word
        ids.append(WORDS.index(core) if core in WORDS else 1)
        if sep:
            ids.append(0)
    return ids


def decode(ids):
    out = ""
    for i in ids:
        w = WORDS[i]
        out += w if (w == "." or not out) else " " + w
    return out


def main():
    ap = argparse.ArgumentParser()
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("info")
    p = sub.add_parser("encode")
    p.add_argument("--text-file", required=True)
    p = sub.add_parser("decode")
    p.add_argument("--tokens-file", required=True)
    for name in ("forward", "extract"):
        p = sub.add_parser(name)
        p.add_argument("--tokens-file", required=True)
        p.add_argument("--layers", default="")
        p.add_argument("--logits-from", type=int, default=0)
        p.add_argument("--prompt-len", type=int, default=0)
        p.add_argument("--plan")
        p.add_argument("--no-logits", action="store_true")
        p.add_argument("--out-trace", required=True)
        p.add_argument("--out-logits")
        p.add_argument("--sidecar")
    a = ap.parse_args()

    if a.cmd == "info":
        print(json.dumps({"model_id": MODEL_ID, "d_model": D_MODEL, "layers": LAYERS,
                          "vocab_size": len(WORDS), "separator": 0, "special": [1, 0]}))
    elif a.cmd == "encode":
        with open(a.text_file) as f:
            print(json.dumps(encode(f.read())))
    elif a.cmd == "decode":
        with open(a.tokens_file) as f:
            sys.stdout.write(decode(json.load(f)))
    else:
        layers = parse_layers(a.layers)
        with open(a.tokens_file) as f:
            tokens = json.load(f)
        plan = None
        if a.plan:
            with open(a.plan) as f:
                plan = json.load(f)
            for entry in plan["layers"]:
                if len(entry["vector"]) != D_MODEL:
                    sys.exit("plan d_model mismatch")
        acts = activations(tokens, plan)
        write_trace(a.out_trace, tokens, a.prompt_len, layers, acts)
        if a.sidecar:
            write_sidecar(a.sidecar, tokens, layers, acts)
        if not a.no_logits and a.out_logits:
            write_logits(a.out_logits, logits_for(tokens, acts, a.logits_from))


if __name__ == "__main__":
    main()
