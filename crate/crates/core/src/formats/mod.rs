//! Everything that touches disk.
//!
//! | file | layout |
//! |------|--------|
//! | sequence (`.pfs`) | `PFS1\nrows cols K\n` then `K*rows*cols` decimals, frame-major, one grid row per line |
//! | image (`.pimg`) | `PIMG1\n52 32 p_min p_max side label aggregation\n` then 1664 decimals, one row per line |
//! | manifest (`.tsv`) | `path<TAB>side<TAB>label<TAB>case_id<TAB>aggregation`, `#` comments |
//! | model (`.model`) | text header, then little-endian `f32` parameter values |
//! | grid CSV | 52 lines of 32 comma-separated values |
//! | PGM | plain `P2`, maxval 65535 |

mod config;
mod files;
mod manifest;
mod model_file;

pub use config::Config;
pub use files::{
    read_grid_csv, read_image, read_pgm, read_sequence, write_grid_csv, write_image, write_pgm, write_sequence,
    write_text, PGM_MAXVAL,
};
pub use manifest::{Manifest, ManifestKind, ManifestRecord};
pub use model_file::{decode_model, encode_model, load_model, save_model, NetName, MODEL_MAGIC};
