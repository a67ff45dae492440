#!/usr/bin/env python3
"""Builds a natural-language English corpus from docstrings of installed Python code.

Walks the standard library and site-packages in sorted order, takes the first
paragraph of every module, class, and function docstring, splits it into
sentences, and writes unique plain-prose sentences one per line. The output
is deterministic for a fixed Python installation.

Usage: harvest_docstring_corpus.py OUT [--max-sentences N] [--min-words N]
"""

import argparse
import ast
import os
import re
import site
import sys

SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
PROSE = re.compile(r"[A-Za-z ,.;:'()-]+")


def roots():
    paths = list(site.getsitepackages()) + [os.path.dirname(os.__file__)]
    return sorted({os.path.realpath(p) for p in paths if os.path.isdir(p)})


def python_files(root):
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            if name.endswith(".py"):
                yield os.path.join(dirpath, name)


def docstrings(path):
    try:
        with open(path, encoding="utf-8") as f:
            tree = ast.parse(f.read())
    except (OSError, SyntaxError, UnicodeDecodeError, ValueError):
        return
    for node in ast.walk(tree):
        if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
            doc = ast.get_docstring(node)
            if doc:
                yield doc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--max-sentences", type=int, default=60000)
    ap.add_argument("--min-words", type=int, default=5)
    ap.add_argument("--max-words", type=int, default=60)
    args = ap.parse_args()

    seen = set()
    lines = []
    done = False
    for root in roots():
        for path in python_files(root):
            for doc in docstrings(path):
                para = " ".join(doc.split("\n\n")[0].split())
                for sent in SENTENCE_END.split(para):
                    n = len(sent.split())
                    if args.min_words <= n <= args.max_words and PROSE.fullmatch(sent) and sent not in seen:
                        seen.add(sent)
                        lines.append(sent)
                        if len(lines) >= args.max_sentences:
                            done = True
                            break
                if done:
                    break
            if done:
                break
        if done:
            break

    tmp = args.out + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, args.out)
    print(f"{len(lines)} sentences -> {args.out}", file=sys.stderr)
    return 0 if lines else 1


if __name__ == "__main__":
    sys.exit(main())
