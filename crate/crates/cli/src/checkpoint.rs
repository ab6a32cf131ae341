//! Checkpoint files: named tensor sections in the binary container.

use std::path::Path;

use rfa_core::container::{decode_sections, decode_tensor, encode_sections, encode_tensor};
use rfa_core::layers::ParamStore;
use rfa_core::Tensor;

use crate::error::{read_file, write_file, Result};

pub fn save(store: &ParamStore, path: &Path) -> Result<()> {
    write_file(path, &encode_sections(store.sections()))
}

/// Loads every entry of `store` by name; names and shapes must match exactly.
pub fn load(store: &mut ParamStore, path: &Path) -> Result<()> {
    let sections = decode_sections(&read_file(path)?)?;
    store.load_sections(&sections)?;
    Ok(())
}

pub fn save_tensor(t: &Tensor, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    encode_tensor(t, &mut buf);
    write_file(path, &buf)
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    Ok(decode_tensor(&read_file(path)?)?.0)
}
