"""End-to-end pipeline on a small synthetic cohort, via the CLI layer.

synth -> preprocess -> select -> tune -> train -> evaluate -> explain,
all in a temporary directory, printing the key numbers from each stage.
This is the same chain as the shell commands in the README, driven
programmatically.

Run:  python3 demos/04_full_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from click.testing import CliRunner

from exsurv.cli import main

root = Path(tempfile.mkdtemp(prefix="exsurv_demo_"))
d = {k: root / k for k in ("raw", "prep", "sel", "tune", "train", "eval", "exp")}
runner = CliRunner()


def run(*args):
    result = runner.invoke(main, list(args), catch_exceptions=False)
    if result.exit_code != 0:
        raise SystemExit(result.output)
    print(f"$ exsurv {args[0]}\n  {result.output.strip()}")


run("synth", "--n", "400", "--p", "8", "--informative", "3",
    "--censoring", "0.45", "--seed", "0", "--out", str(d["raw"]))
run("preprocess", "--input", str(d["raw"] / "cohort.csv"),
    "--schema", str(d["raw"] / "schema.json"), "--out", str(d["prep"]))
run("select", "--train", str(d["prep"] / "train.csv"),
    "--schema", str(d["prep"] / "schema.json"), "--model", "EST",
    "--out", str(d["sel"]))
run("tune", "--train", str(d["prep"] / "train.csv"),
    "--schema", str(d["prep"] / "schema.json"), "--model", "EST",
    "--selection", str(d["sel"] / "selection.json"),
    "--trials", "20", "--out", str(d["tune"]))
run("train", "--train", str(d["prep"] / "train.csv"),
    "--schema", str(d["prep"] / "schema.json"),
    "--normalization", str(d["prep"] / "normalization.json"),
    "--model", "EST", "--config", str(d["tune"] / "best_config.json"),
    "--out", str(d["train"]))
run("evaluate", "--artifact", str(d["train"] / "artifact.json"),
    "--train", str(d["prep"] / "train.csv"),
    "--test", str(d["prep"] / "test.csv"),
    "--schema", str(d["prep"] / "schema.json"),
    "--oracle", str(d["raw"] / "truth.json"),
    "--split", str(d["prep"] / "split.json"), "--out", str(d["eval"]))
run("explain", "--artifact", str(d["train"] / "artifact.json"),
    "--data", str(d["prep"] / "test.csv"),
    "--schema", str(d["prep"] / "schema.json"),
    "--row", "0,1,2", "--out", str(d["exp"]))

report = json.loads((d["eval"] / "report.json").read_text())
print("\nfinal report (sorted by CV C-index):")
for row in report:
    cv = f"{row['c_cv']:.4f}" if row["c_cv"] is not None else "   -  "
    print(f"  {row['model']:>8}  c_cv={cv}  c_train={row['c_train']:.4f}  "
          f"c_test={row['c_test']:.4f}")
print(f"\nartifacts in {root}")
