#!/usr/bin/env python3
"""End-to-end exercise of the lsr_py extension module.

Builds the cdylib with cargo if needed, stages it under an importable
name, then drives every exposed operation against the bundled corpus
sample: parse/write round trip, validation, self-evaluation, format
conversion, and a quick train/tag/save/load cycle.
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURE = ROOT / "crates" / "core" / "tests" / "data" / "mini.conllulex"


def stage_module() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "lsr-python"],
        cwd=ROOT,
        check=True,
        stdout=subprocess.DEVNULL,
    )
    built = ROOT / "target" / "debug" / "liblsr_py.so"
    if not built.exists():  # e.g. macOS
        built = built.with_suffix(".dylib")
    stage = Path(tempfile.mkdtemp(prefix="lsr-py-"))
    shutil.copy(built, stage / "lsr_py.so")
    return stage


sys.path.insert(0, str(stage_module()))
import lsr_py  # noqa: E402


def check(label: str, ok: bool) -> None:
    print(f"{'ok' if ok else 'FAIL':4} {label}")
    if not ok:
        sys.exit(1)


text = FIXTURE.read_text()

# Corpus I/O and the codec.
sentences = lsr_py.parse(text)
check("parse: 8 sentences", len(sentences) == 8)
first = sentences[0]
check("sentence metadata", first.sent_id is not None and len(first) > 0)
tags = first.tags()
check("tags: one per token", len(tags) == len(first.tokens()))
check("units carry lexcats", all(len(u) == 3 for u in first.units()))
written = lsr_py.write(sentences)
check("write∘parse is a fixed point", lsr_py.write(lsr_py.parse(written)) == written)

# Validation: clean input is silent, a broken column is named.
check("validate: fixture is clean", lsr_py.validate(text) == [])
broken = text.replace(
    "\tN\tplace\tn.GROUP\t_\t_\t_\t_\tO-N-n.GROUP",
    "\tN\tplace\t_\t_\t_\t_\t_\tO-N",
)
violations = lsr_py.validate(broken)
check("validate: corruption is reported", len(violations) > 0)
check("violations name a rule", all(rule for _, rule, _ in violations))

# Self-evaluation is perfect on every metric of all three tasks.
report = lsr_py.evaluate("streusle", text, text)
check("streusle self-eval rows", len(report) == 11)
check("streusle self-eval perfect", all(r["f"] == 1.0 for r in report.values()))
cupt = lsr_py.convert(text, "cupt")
check("parseme self-eval perfect",
      all(r["f"] == 1.0 for r in lsr_py.evaluate("parseme", cupt, cupt).values()))
dimsum = lsr_py.convert(text, "dimsum")
check("dimsum self-eval perfect",
      all(r["f"] == 1.0 for r in lsr_py.evaluate("dimsum", dimsum, dimsum).values()))

# Train a small model, tag with it, and round-trip it through a file.
model, summary = lsr_py.train(
    text, text, learning_rate=0.05, batch_size=8, max_epochs=3, seed=7
)
check("train ran all epochs", summary["epochs"] == 3)
check("model exposes its tagset", len(model.tagset) > 0)
tagged = model.tag(sentences)
check("tag returns one sentence per input", len(tagged) == len(sentences))
check("tagged output reserializes", lsr_py.parse(lsr_py.write(tagged)) is not None)

with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "model.bin"
    model.save(path)
    reloaded = lsr_py.Model.load(path)
    same = [a.tags() == b.tags() for a, b in zip(tagged, reloaded.tag(sentences))]
    check("saved and reloaded models agree", all(same))

print("smoke test OK")
