from .network import (
    InferenceConfig,
    LossConfig,
    LossResult,
    Prediction,
    SpanReprBatch,
    between_context,
    classify_attributes,
    classify_entities,
    classify_relations,
    enumerate_spans,
    joint_loss,
    predict,
    sentence_context,
    span_attention_weights,
    span_repr_attention,
    span_repr_maxpool,
)
from .params import (
    ModelParams,
    checkpoint_hash,
    init_params,
    load_checkpoint,
    load_checkpoint_file,
    save_checkpoint,
    save_checkpoint_file,
)
from .providers import (
    EmbeddingProvider,
    PrecomputedEmbeddingProvider,
    ProviderError,
    TokenLookupProvider,
    read_embedding_file,
    write_embedding_file,
)

__all__ = [
    "InferenceConfig", "LossConfig", "LossResult", "Prediction", "SpanReprBatch",
    "between_context", "classify_attributes", "classify_entities",
    "classify_relations", "enumerate_spans", "joint_loss", "predict",
    "sentence_context", "span_attention_weights", "span_repr_attention",
    "span_repr_maxpool", "ModelParams", "checkpoint_hash", "init_params",
    "load_checkpoint", "load_checkpoint_file", "save_checkpoint",
    "save_checkpoint_file", "EmbeddingProvider", "PrecomputedEmbeddingProvider",
    "ProviderError", "TokenLookupProvider", "read_embedding_file",
    "write_embedding_file",
]
