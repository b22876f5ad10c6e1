"""
Scoring two backends on the bundled interviews
==============================================

Run both extraction paths over the three synthetic interviews, score them
against the gold file in the total and core modes and print the comparison
table with bootstrap intervals.
"""

import tempfile
from pathlib import Path

from interview_ie.config import RunConfig
from interview_ie.evaluation import AveragedMetrics, harmonic
from interview_ie.runner import run

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
out = Path(tempfile.mkdtemp())

cfg = RunConfig.with_defaults(manifest=FIXTURES / "manifest.csv", gold=FIXTURES / "gold.csv",
                              replay=FIXTURES / "replay.json", backend="both", out=out)
summary = run(cfg)
print((out / "comparison.md").read_text())

###############################################################################
# Where the time goes.  Parsing and preprocessing are shared; the rest is
# per backend.

print((out / "timings.tsv").read_text())

###############################################################################
# Domain rows average per-interview scores, so a row's F1 is a mean of F1
# values and can differ from the harmonic mean of the row's P and R.  Two
# interviews with (P, R) of (100, 20) and (20, 100) show the effect.

a = AveragedMetrics(100, 20, harmonic(100, 20), "total", 1)
b = AveragedMetrics(20, 100, harmonic(20, 100), "total", 1)
avg = AveragedMetrics.of([a, b], "total")
print(f"mean F1 {avg.f1:.1f}, harmonic of mean P and R {avg.recombined_f1():.1f}")
