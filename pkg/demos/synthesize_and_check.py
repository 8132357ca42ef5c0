"""Render a toy hazy sequence through the CLI and print its QA report.

    python demos/synthesize_and_check.py [out_dir]

A translating smooth scene with proxy-resolution disparity and flow is
written to ``out_dir/input``; ``libra synthesize`` then normalizes and
lifts the depth, renders five hazy frames and runs the five checks.
"""
import sys
import tempfile
from pathlib import Path

from libra.cli import main
from libra.scenes import write_toy_sequence


def run(out):
    out = Path(out)
    manifest = write_toy_sequence(out / "input", H=96, W=128, n_frames=5, beta=1.2, a_inf=0.85)
    code = main(["synthesize", "--manifest", str(manifest), "--out", str(out / "bundle")])
    print(f"exit code {code}; bundle in {out / 'bundle'}")
    return code


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="libra-synth-")
    sys.exit(run(target))
