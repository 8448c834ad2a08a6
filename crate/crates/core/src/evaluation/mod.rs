//! Retrieval metrics, zero-shot classification and the ablation harness.

mod ablation;
mod retrieval;
mod zeroshot;

pub use ablation::{
    ablation_row, ablation_run, chance_recall_at_1, chance_standard_error, configuration_label, permutation_test,
    standard_configurations, AblationRow, AblationTable, PermutationTest, PERMUTATION_SHUFFLES,
};
pub use retrieval::{
    embed_split, evaluate_retrieval, recall_at_k, report_from_embeddings, similarity_matrix, Direction,
    RetrievalMode, RetrievalReport, SimilarityMatrix, SplitEmbeddings, EVAL_BATCH_SIZE, EVAL_SHUFFLE_SEED,
    REPORTED_KS,
};
pub use zeroshot::{class_prompt, classify_embedding, embed_class_names, zero_shot_accuracy, zero_shot_classify};
