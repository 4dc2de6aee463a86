"""Run every shipped config through the CLI and collect the outputs.

Usage: python3 scripts/run_configs.py [--out results]
"""
import argparse
from pathlib import Path

from spinbell.cli import main

ROOT = Path(__file__).resolve().parents[1]

RUNS = [
    ("tfim_ground", "chsh-scan"),
    ("tfim_thermal", "chsh-scan"),
    ("product", "chsh-scan"),
    ("clustering", "clustering-fit"),
    ("synthetic_quench", "quench"),
    ("tfim_quench", "quench"),
    ("certify_chsh", "bell-certify"),
    ("certify_twobody", "bell-certify"),
    ("certify_gamma", "bell-certify"),
]


def run(out: Path) -> int:
    worst = 0
    for name, command in RUNS:
        code = main([command, str(ROOT / "configs" / f"{name}.yaml"), "--out", str(out / name)])
        print(f"{name:18s} {command:14s} exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=ROOT / "results")
    raise SystemExit(run(parser.parse_args().out))
