from .scores import (
    FPR_TARGETS,
    pearson,
    pool_template,
    mean_correlation,
    all_vs_all_scores,
    verification_roc,
    verify,
    VerificationResult,
)
from .embeddings import (
    Embedding,
    EmbeddingCache,
    extract_embedding,
    extract_embeddings,
    embed_files,
    embed_directory,
    embed_templates,
)
