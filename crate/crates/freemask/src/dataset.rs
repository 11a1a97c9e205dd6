//! Dataset layout scanning and per-sample file pairing.
//!
//! Layout: `<root>/masks/<id>.png` paired with `<root>/losses/<id>.npy`
//! or `<root>/probs/<id>.npy` by shared file stem.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::config::CurationConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub sample_id: String,
    pub label_path: PathBuf,
    pub loss_path: Option<PathBuf>,
    pub prob_path: Option<PathBuf>,
}

/// Ordered list of samples, sorted lexicographically by sample id.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    records: Vec<SampleRecord>,
}

impl DatasetIndex {
    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn stems_with_ext(dir: &Path, ext: &str) -> Result<BTreeSet<String>> {
    let mut stems = BTreeSet::new();
    if !dir.is_dir() {
        return Ok(stems);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.insert(stem.to_string());
            }
        }
    }
    Ok(stems)
}

/// Scans the dataset tree; output ordering depends only on the file set,
/// never on filesystem enumeration order.
pub fn scan_dataset(root: &Path, _config: &CurationConfig) -> Result<DatasetIndex> {
    let masks_dir = root.join("masks");
    let losses_dir = root.join("losses");
    let probs_dir = root.join("probs");

    let mask_stems = stems_with_ext(&masks_dir, "png")?;
    if mask_stems.is_empty() {
        return Err(Error::EmptyDataset { root: root.into() });
    }
    let loss_stems = stems_with_ext(&losses_dir, "npy")?;
    let prob_stems = stems_with_ext(&probs_dir, "npy")?;

    let mut records = Vec::with_capacity(mask_stems.len());
    for stem in mask_stems {
        let loss_path = loss_stems
            .contains(&stem)
            .then(|| losses_dir.join(format!("{stem}.npy")));
        let prob_path = prob_stems
            .contains(&stem)
            .then(|| probs_dir.join(format!("{stem}.npy")));
        if loss_path.is_none() && prob_path.is_none() {
            return Err(Error::MissingPair { stem });
        }
        records.push(SampleRecord {
            label_path: masks_dir.join(format!("{stem}.png")),
            sample_id: stem,
            loss_path,
            prob_path,
        });
    }
    // BTreeSet iteration already yields lexicographic order.
    Ok(DatasetIndex { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn cfg() -> CurationConfig {
        CurationConfig::new(8)
    }

    fn touch(path: &Path) {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, b"").unwrap();
    }

    #[test]
    fn pairs_and_sorts_by_stem() {
        let dir = TempDir::new().unwrap();
        let root = dir.path();
        touch(&root.join("masks/b.png"));
        touch(&root.join("masks/a.png"));
        touch(&root.join("losses/a.npy"));
        touch(&root.join("losses/b.npy"));
        let index = scan_dataset(root, &cfg()).unwrap();
        let ids: Vec<_> = index.records().iter().map(|r| r.sample_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(index.records()[0].loss_path.is_some());
    }

    #[test]
    fn missing_pair_names_the_stem() {
        let dir = TempDir::new().unwrap();
        let root = dir.path();
        touch(&root.join("masks/a.png"));
        let err = scan_dataset(root, &cfg()).unwrap_err();
        match err {
            Error::MissingPair { stem } => assert_eq!(stem, "a"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_masks_dir_is_an_error() {
        let dir = TempDir::new().unwrap();
        std::fs::create_dir_all(dir.path().join("masks")).unwrap();
        let err = scan_dataset(dir.path(), &cfg()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset { .. }));
    }

    #[test]
    fn prob_only_datasets_are_accepted() {
        let dir = TempDir::new().unwrap();
        let root = dir.path();
        touch(&root.join("masks/a.png"));
        touch(&root.join("probs/a.npy"));
        let index = scan_dataset(root, &cfg()).unwrap();
        assert!(index.records()[0].prob_path.is_some());
        assert!(index.records()[0].loss_path.is_none());
    }
}
