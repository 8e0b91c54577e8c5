"""
Which prompt carries the gain?
==============================

The same episodes are scored with no tuning, with only one of the two
prompts, and with both.
"""

from hetprompt import RunConfig, gen_synthetic, pretrain, run_benchmark
from hetprompt.tasks import build_episodes

graph, labels = gen_synthetic(seed=0, homophily=0.5)
config = RunConfig(seed=0)
params = pretrain(graph, "plain", config).params
episodes = build_episodes(graph, labels, params, "nc", config)

for mode in ("identity", "feat", "het", "dual"):
    report = run_benchmark(graph, labels, params, "nc", config, prompt_mode=mode, episodes=episodes)
    print(f"{mode:8s}  micro-F1 {report.mean('micro_f1'):.4f}  "
          f"macro-F1 {report.mean('macro_f1'):.4f}  epochs {report.selected_epochs}")
