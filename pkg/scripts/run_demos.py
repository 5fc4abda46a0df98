#!/usr/bin/env python3
"""Drive the CLI over every example config in scripts/configs/.

Each scenario writes into out/<name>/; afterwards the analysis verdicts
are summarized on stdout.  Exits nonzero if any run or verdict fails.
"""

import json
import pathlib
import subprocess
import sys

CONFIG_DIR = pathlib.Path(__file__).resolve().parent / "configs"


def run_config(path: pathlib.Path) -> int:
    out_dir = pathlib.Path("out") / path.stem
    cmd = [sys.executable, "-m", "pairfield.cli", "run", str(path),
           "--output-dir", str(out_dir)]
    print(f"$ {' '.join(cmd)}", flush=True)
    rc = subprocess.run(cmd).returncode
    if rc != 0:
        return rc

    manifest = json.loads((out_dir / "manifest.json").read_text())
    verdicts = {}
    for name in ("compare.json", "ehrenfest.json", "beta_scan.json"):
        task_file = out_dir / name
        if task_file.exists():
            verdicts[name.removesuffix(".json")] = json.loads(task_file.read_text()).get("pass")
    dispersion = manifest.get("tasks", {}).get("dispersion_scan")
    if dispersion is not None:
        verdicts["dispersion_scan"] = dispersion.get("pass")

    failed = 0
    print(f"  wrote: {', '.join(sorted(manifest['files']))}")
    for task, verdict in sorted(verdicts.items()):
        label = "done (no tolerance set)" if verdict is None else ("pass" if verdict else "FAIL")
        print(f"  {task}: {label}")
        failed += verdict is False
    return 1 if failed else 0


def main() -> int:
    configs = sorted(CONFIG_DIR.glob("*.json"))
    if not configs:
        print(f"no configs found in {CONFIG_DIR}", file=sys.stderr)
        return 1
    worst = 0
    for path in configs:
        worst = max(worst, run_config(path))
    return worst


if __name__ == "__main__":
    sys.exit(main())
