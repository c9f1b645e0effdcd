mod ablate;
mod eval;
mod inspect;
mod sr;
mod train;

pub use ablate::{ablation_variants, cmd_ablate, AblationRow, Variant};
pub use eval::{cmd_eval, evaluate_pair, evaluate_pairs, super_resolve, to_csv, EvalRow, EvalSummary, Metrics};
pub use inspect::cmd_inspect;
pub use sr::cmd_sr;
pub use train::{cmd_train, TrainReport, FLUSH_EVERY};
