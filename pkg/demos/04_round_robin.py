"""
A scripted round robin
======================

Every ordered pair of agents plays K tournaments. The row agent plays side A,
the column agent side B. W holds net wins of the column agent, B the column
agent's mean log Bayes factor. Files land in ``runs/demo``.
"""

import shutil
from pathlib import Path

from tianji.agents import AgentSpec
from tianji.harness import RunConfig, recompute_report, run_round_robin

roster = [
    AgentSpec("uniform", "uniform"),
    AgentSpec("independent", "independent-uniform"),
    AgentSpec("fastest-first", "fastest-first"),
    AgentSpec("br-fastest", "best-response", {"target": "fastest-first"}),
    AgentSpec("exploiter", "exploiter"),
]
out = Path("runs/demo")
shutil.rmtree(out, ignore_errors=True)  # runs refuse to overwrite earlier output
result = run_round_robin(RunConfig(agents=roster, tournaments_k=10, master_seed=7, output_dir=out))

print("W: column wins minus row wins")
print(result.w.to_csv())
print("B: mean log Bayes factor of the column agent")
print(result.b.to_csv())

# The transcripts alone are enough to rebuild both matrices.
w, b = recompute_report(out)
assert (w.values == result.w.values).all()
print("heatmaps:", sorted(p.name for p in (out / "heatmaps").iterdir()))
