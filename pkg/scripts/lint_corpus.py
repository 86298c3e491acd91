"""Lint every .mmd file under a directory and tally findings per rule."""

import argparse
from collections import Counter
from pathlib import Path

from braid.mermaid import LintConfig, MermaidError, lint_graph, parse_flowchart


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root", type=Path)
    ap.add_argument("--max-tokens", type=int, default=15)
    args = ap.parse_args()

    config = LintConfig(max_label_tokens=args.max_tokens)
    totals, unparsable = Counter(), []
    files = sorted(args.root.rglob("*.mmd"))
    for path in files:
        try:
            report = lint_graph(parse_flowchart(path.read_text()), config)
        except MermaidError as exc:
            unparsable.append((path, exc))
            continue
        per_file = Counter(f.rule for f in report.findings)
        totals.update(per_file)
        print(f"{path}: " + (", ".join(f"{r}={n}" for r, n in sorted(per_file.items())) or "clean"))
    print(f"\n{len(files)} file(s), {len(unparsable)} unparsable")
    for rule, n in totals.most_common():
        print(f"  {rule:12s} {n}")
    for path, exc in unparsable:
        print(f"  ! {path}: {exc}")


if __name__ == "__main__":
    main()
