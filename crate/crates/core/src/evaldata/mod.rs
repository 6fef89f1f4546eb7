//! Evaluation metric, synthetic union-of-subspaces data, and matrix/image
//! file I/O.

mod io;
mod metric;
mod synth;

pub use io::{
    load_labels, load_matrix, load_pgm_dir, save_labels, save_matrix, IoError,
};
pub use metric::{clustering_error, EvalError};
pub use synth::{SynthError, SyntheticSpec};
