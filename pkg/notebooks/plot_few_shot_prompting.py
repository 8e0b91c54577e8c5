"""
One-shot node, graph and link tasks with dual prompts
=====================================================

The encoder stays frozen. Each episode tunes only a feature prompt (one
weight per hidden unit) and a heterogeneity prompt (one weight per view).
"""

from hetprompt import RunConfig, gen_synthetic, pretrain, run_benchmark
from hetprompt.tasks import split_lp_edges

graph, labels = gen_synthetic(seed=0, homophily=0.5)
config = RunConfig(seed=0, num_tasks=40, lp_holdout_fraction=0.2)

# hide the link-prediction edges from pre-training
holdout = split_lp_edges(graph, config.lp_holdout_fraction, config.seed)
params = pretrain(graph, "plain", config, holdout=holdout).params

for kind in ("nc", "gc", "lp"):
    report = run_benchmark(graph, labels, params, kind, config)
    print(report.summary())
