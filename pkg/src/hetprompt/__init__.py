"""Few-shot prompting of a frozen GCN on heterogeneous graphs.

A graph template turns a heterogeneous graph into one homogeneous view per
node type plus the full topology; a link-prediction pre-trained encoder is
read out per view, and a feature prompt and heterogeneity prompt are tuned
per downstream task.
"""

from .config import ConfigError, RunConfig, load_config
from .embedding import (
    ClassPrototypes,
    PromptPair,
    aggregate_views,
    class_prototypes,
    classify,
    cosine_sim,
    embed_instance,
    readout,
)
from .encoder import (
    EncoderParams,
    encode_all,
    encode_view,
    encoder_gradients,
    init_params,
    load_checkpoint,
    normalize_adjacency,
    save_checkpoint,
)
from .graph import (
    GraphFormatError,
    HeteroGraph,
    LabelSet,
    gen_synthetic,
    load_graph,
    make_graph,
    save_graph,
    validate,
)
from .objectives import (
    NumericalError,
    OptimState,
    adam_step,
    pretrain,
    pretrain_loss,
    prompt_tune,
    sample_triplets,
    tune_loss,
)
from .tasks import (
    FewShotTask,
    MetricReport,
    auc_one_vs_negatives,
    micro_macro_f1,
    ndcg_single_relevant,
    run_benchmark,
    sample_gc_tasks,
    sample_lp_tasks,
    sample_nc_tasks,
)
from .template import HomoView, Subgraph, context_subgraph, ego_networks, graph_template, template_of_subgraph

__version__ = "0.1.0"
