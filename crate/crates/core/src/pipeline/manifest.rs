//! JSON-lines dataset manifests.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{decode_mask, MaskConvention, Raster, SkyMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            _ => Err(Error::InvalidInput(format!("split must be `train` or `validation`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub mask_convention: MaskConvention,
    pub split: Split,
    pub source_tag: String,
}

impl ManifestEntry {
    /// `source_tag/file-stem`, the key used in results files.
    pub fn image_id(&self) -> String {
        let stem = self
            .image_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        format!("{}/{}", self.source_tag, stem)
    }

    pub fn load_image(&self) -> Result<Raster> {
        Raster::load(&self.image_path)
    }

    pub fn load_truth(&self, convention: Option<MaskConvention>) -> Result<SkyMask> {
        let mask = Raster::load(&self.mask_path)?;
        Ok(decode_mask(&mask, convention.unwrap_or(self.mask_convention)))
    }

    /// Image and truth, checking that their sizes agree.
    pub fn load_pair(&self, convention: Option<MaskConvention>) -> Result<(Raster, SkyMask)> {
        let img = self.load_image()?;
        let truth = self.load_truth(convention)?;
        truth.same_shape(img.width(), img.height())?;
        Ok((img, truth))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.image_path.as_os_str().is_empty() || e.mask_path.as_os_str().is_empty() {
                return Err(Error::InvalidInput(format!("manifest entry {} has an empty path", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads one JSON object per non-blank line. Relative paths resolve against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let file = std::fs::File::open(path).map_err(Error::file(path))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut e: ManifestEntry = serde_json::from_str(&line)
                .map_err(|err| Error::InvalidInput(format!("{}:{}: {err}", path.display(), n + 1)))?;
            if e.image_path.is_relative() && !e.image_path.as_os_str().is_empty() {
                e.image_path = base.join(&e.image_path);
            }
            if e.mask_path.is_relative() && !e.mask_path.as_os_str().is_empty() {
                e.mask_path = base.join(&e.mask_path);
            }
            entries.push(e);
        }
        Self::new(entries)
    }

    /// Writes entries as given; callers pass paths relative to `path`'s directory for a relocatable corpus.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in &self.entries {
            writeln!(out, "{}", serde_json::to_string(e)?)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn filter_split(&self, split: Option<Split>) -> Manifest {
        Manifest {
            entries: self
                .entries
                .iter()
                .filter(|e| split.is_none_or(|s| e.split == s))
                .cloned()
                .collect(),
        }
    }
}
