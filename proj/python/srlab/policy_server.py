"""Reference next-token server speaking the newline-delimited JSON protocol.

Reads one request object per stdin line and answers on stdout:

    {"op": "register", "dataset_id": ..., "inputs": ..., "targets": ...}
        -> {"ok": true}
    {"op": "next", "dataset_id": ..., "prefix": [...], "prompt": [...]}
        -> {"probs": {token: probability, ...}}

It answers every "next" with the uniform distribution over the tokens legal
at the prefix's arity deficit, which makes it the simplest conforming
backend and the echo target for adapter tests.
"""

import argparse
import json
import sys

BINARY = {"add", "sub", "mul", "div"}
UNARY = {"sin", "cos", "tan", "exp", "log", "sqrt", "asin",
         "pow2", "pow3", "pow4", "pow5"}

VOCABS = {
    "full": {
        "binary": ["add", "sub", "mul", "div"],
        "unary": ["sin", "cos", "exp", "log", "sqrt", "asin",
                  "pow2", "pow3", "pow4", "pow5"],
    },
    "simplified": {
        "binary": ["add", "sub"],
        "unary": ["sin", "cos", "tan", "exp"],
    },
}


def arity(token):
    if token in BINARY:
        return 2
    if token in UNARY:
        return 1
    if token == "C" or (token.startswith("x_") and token[2:].isdigit()):
        return 0
    return None


def deficit_of(prefix):
    """Arity deficit, or None when the prefix is not a valid partial form."""
    deficit = 1
    for token in prefix:
        if deficit == 0:
            return None
        a = arity(token)
        if a is None:
            return None
        deficit += a - 1
    return deficit


def legal_tokens(vocab, dim, deficit):
    if deficit == 0:
        return ["<end>"]
    leaves = ["x_%d" % i for i in range(1, dim + 1)] + ["C"]
    return leaves + vocab["unary"] + vocab["binary"]


def handle(request, vocab, dim):
    op = request.get("op")
    if op == "register":
        return {"ok": True}
    if op == "next":
        deficit = deficit_of(request.get("prefix", []))
        if deficit is None:
            return {"error": "illegal prefix"}
        tokens = legal_tokens(vocab, dim, deficit)
        p = 1.0 / len(tokens)
        return {"probs": {t: p for t in tokens}}
    return {"error": "unknown op: %r" % (op,)}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--vocab", choices=sorted(VOCABS), default="full")
    parser.add_argument("--dim", type=int, default=5)
    args = parser.parse_args()
    vocab = VOCABS[args.vocab]

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            reply = handle(request, vocab, args.dim)
        except Exception as exc:  # malformed input must not kill the stream
            reply = {"error": str(exc)}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
