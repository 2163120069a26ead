//! Zero-shot classification, evaluation splits, retrieval and reports.

pub mod report;
pub mod retrieval;
pub mod sets;
pub mod zeroshot;

pub use report::{to_jsonl, to_table, MetricRecord, ReportHeader};
pub use retrieval::{image_query, retrieval_top1, retrieve_by_image};
pub use sets::{modelnet_eval_sets, EvalSet, ModelNetSets};
pub use zeroshot::{
    accuracy_topk, build_label_features, evaluate_zero_shot, zero_shot_topk, PromptTemplate, ZeroShotResult,
};
