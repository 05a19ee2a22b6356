"""Few-shot relation classification: prototype networks with relation fusion."""

from .encoder import PrecomputedEncoder, ToyEncoder, ToyEncoderParams, init_toy_params
from .experiments import ModelState, RunResult, TrainConfig, evaluate, init_state, train
from .ingest import (
    Dataset,
    EmbeddingStore,
    SplitSpec,
    load_dataset,
    load_relation_info,
    read_embedding_store,
    split_dataset,
    write_embedding_store,
)
from .protonet import (
    ce_loss,
    compute_prototypes,
    episode_loss,
    episode_loss_and_grads,
    fuse,
    predict,
    score,
    softmax,
)
from .sampler import EpisodeSpec, make_rng, materialize_episode, sample_episode_spec
from .types import (
    ConcatProject,
    DirectAdd,
    Episode,
    FusionStrategy,
    InstanceEmbedding,
    NoFusion,
    RelationEmbedding,
    RelationInfo,
    TokenizedInstance,
    ViewLinear,
    combined,
    fused,
    init_fusion,
)

__all__ = [name for name in dir() if not name.startswith("_")]
