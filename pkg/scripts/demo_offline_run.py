"""Run the bundled demo configuration against the scripted stub gateway.

No network access or API keys are needed. Running it twice shows resumption:
the second pass makes zero gateway calls and rewrites identical reports.
"""

import argparse
from pathlib import Path

from braid.config import load_config
from braid.gateway import StubGateway
from braid.report import aggregate, emit_reports
from braid.runner import RunLog, run_classic, run_matrix

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=ROOT / "configs/demo/config.yaml")
    ap.add_argument("--stub", default=ROOT / "configs/demo/stub.json")
    ap.add_argument("--out", help="override the configured output directory")
    args = ap.parse_args()

    config = load_config(args.config, {"out": args.out} if args.out else None)
    gateway = StubGateway.from_file(args.stub, concurrency=config.concurrency)
    for name, runner in [("matrix", run_matrix), ("classic", run_classic)]:
        s = runner(config, gateway)
        print(f"{name:8s} new={s.new_records} skipped={s.skipped} failures={s.failures} "
              f"calls={s.gateway_calls}")

    report = aggregate(RunLog(config.log_path).results(), config.baseline.label, config.amortize_n)
    paths = emit_reports(report, Path(config.out) / "reports")
    print((Path(config.out) / "reports" / "matrix.md").read_text())
    print("\n".join(f"wrote {p}" for p in paths))


if __name__ == "__main__":
    main()
