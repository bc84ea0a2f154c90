use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::SessionRun;
use super::session::{frame_name, AlignmentMode, EditSession};
use crate::align::Alignment;
use crate::error::{Error, Result};
use crate::geometry::io;
use crate::geometry::{DepthMap, Image, Mask};

pub const MANIFEST_JSON: &str = "manifest.json";
pub const PACK_FORMAT: &str = "vedit-condition-pack";
pub const PACK_VERSION: u32 = 1;
/// Left-to-right order of the per-frame condition stack.
pub const CHANNEL_ORDER: [&str; 3] = ["pcr", "masked", "edited_ref"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn mask_name(i: usize) -> String {
    format!("masks/mask_{i:04}.png")
}
fn pcr_name(i: usize) -> String {
    format!("pcr/pcr_{i:04}.png")
}
fn pcr_depth_name(i: usize) -> String {
    format!("pcr/depth_{i:04}.pfm")
}
fn coverage_name(i: usize) -> String {
    format!("pcr/coverage_{i:04}.png")
}
fn masked_name(i: usize) -> String {
    format!("masked/masked_{i:04}.png")
}
fn original_name(i: usize) -> String {
    format!("frames/{}", frame_name(i))
}
const EDITED_REF: &str = "edited_ref.png";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentSource {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub alignment: Alignment,
    pub alignment_source: AlignmentSource,
    pub epsilon: f64,
    pub splat_radius: u32,
    pub erode_radius: usize,
    pub prompt: String,
    pub channel_order: Vec<String>,
    /// SHA-256 of every other file in the pack, keyed by relative path.
    pub files: BTreeMap<String, String>,
}

/// Conditioning signals for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PackFrame {
    pub original: Image,
    pub mask: Mask,
    /// Splat render of the edited cloud.
    pub pcr: Image,
    pub pcr_depth: DepthMap,
    pub coverage: Mask,
    /// The original frame with the mask zeroed out.
    pub masked: Image,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionPack {
    pub frames: Vec<PackFrame>,
    pub edited_ref: Image,
    pub manifest: Manifest,
}

impl ConditionPack {
    pub fn assemble(session: &EditSession, run: &SessionRun) -> Result<Self> {
        let n = session.frames.len();
        if run.masks.len() != n || run.renders.len() != n {
            return Err(Error::Internal(format!(
                "{} frames, {} masks, {} renders",
                n,
                run.masks.len(),
                run.renders.len()
            )));
        }
        let frames = session
            .frames
            .iter()
            .zip(&run.masks)
            .zip(&run.renders)
            .map(|((frame, mask), render)| PackFrame {
                original: frame.clone(),
                mask: mask.clone(),
                pcr: render.color.clone(),
                pcr_depth: render.depth.clone(),
                coverage: render.coverage.clone(),
                masked: frame.zero_masked(mask),
            })
            .collect();
        let cfg = &session.config;
        let mut pack = ConditionPack {
            frames,
            edited_ref: session.edited_image.clone(),
            manifest: Manifest {
                format: PACK_FORMAT.into(),
                version: PACK_VERSION,
                frame_count: n,
                width: session.width(),
                height: session.height(),
                alignment: run.scene.alignment,
                alignment_source: match cfg.alignment {
                    AlignmentMode::Auto => AlignmentSource::Auto,
                    AlignmentMode::Manual { .. } => AlignmentSource::Manual,
                },
                epsilon: cfg.epsilon,
                splat_radius: cfg.splat_radius,
                erode_radius: cfg.erode_radius,
                prompt: cfg.prompt.clone(),
                channel_order: CHANNEL_ORDER.iter().map(|s| s.to_string()).collect(),
                files: BTreeMap::new(),
            },
        };
        pack.manifest.files = pack
            .raster_files()
            .iter()
            .map(|(k, v)| (k.clone(), sha256_hex(v)))
            .collect();
        Ok(pack)
    }

    fn raster_files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut files = BTreeMap::new();
        for (i, f) in self.frames.iter().enumerate() {
            files.insert(original_name(i), io::encode_png_rgb(&f.original));
            files.insert(mask_name(i), io::encode_png_mask(&f.mask));
            files.insert(pcr_name(i), io::encode_png_rgb(&f.pcr));
            files.insert(pcr_depth_name(i), io::encode_pfm(&f.pcr_depth));
            files.insert(coverage_name(i), io::encode_png_mask(&f.coverage));
            files.insert(masked_name(i), io::encode_png_rgb(&f.masked));
        }
        files.insert(EDITED_REF.into(), io::encode_png_rgb(&self.edited_ref));
        files
    }

    pub fn manifest_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    /// Every file of the pack, manifest included, keyed by relative path.
    pub fn to_files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut files = self.raster_files();
        files.insert(MANIFEST_JSON.into(), self.manifest_bytes());
        files
    }

    /// A single digest for the whole pack: SHA-256 of the manifest, which
    /// itself lists the digest of every file.
    pub fn digest(&self) -> String {
        sha256_hex(&self.manifest_bytes())
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        for (name, bytes) in self.to_files() {
            io::write_bytes(&dir.join(name), &bytes)?;
        }
        Ok(())
    }

    /// Uncompressed tar with fixed metadata, entries in path order.
    pub fn to_tar(&self) -> Vec<u8> {
        let mut builder = tar::Builder::new(Vec::new());
        for (name, bytes) in self.to_files() {
            let mut header = tar::Header::new_ustar();
            header.set_size(bytes.len() as u64);
            header.set_mode(0o644);
            header.set_mtime(0);
            header.set_uid(0);
            header.set_gid(0);
            header.set_entry_type(tar::EntryType::Regular);
            builder
                .append_data(&mut header, &name, bytes.as_slice())
                .expect("writing to memory");
        }
        builder.into_inner().expect("writing to memory")
    }

    /// Decodes and verifies a pack from its files.
    pub fn from_files(files: &BTreeMap<String, Vec<u8>>, origin: &Path) -> Result<Self> {
        let at = |name: &str| origin.join(name);
        let get = |name: &str| -> Result<&[u8]> {
            files
                .get(name)
                .map(Vec::as_slice)
                .ok_or_else(|| Error::format(at(name), "missing from pack"))
        };
        let manifest: Manifest = serde_json::from_slice(get(MANIFEST_JSON)?)
            .map_err(|e| Error::format(at(MANIFEST_JSON), e.to_string()))?;
        if manifest.format != PACK_FORMAT || manifest.version != PACK_VERSION {
            return Err(Error::format(
                at(MANIFEST_JSON),
                format!("unsupported pack {} v{}", manifest.format, manifest.version),
            ));
        }
        for (name, want) in &manifest.files {
            let got = sha256_hex(get(name)?);
            if &got != want {
                return Err(Error::format(
                    at(name),
                    format!("checksum mismatch: {got} != {want}"),
                ));
            }
        }
        let mut frames = Vec::with_capacity(manifest.frame_count);
        for i in 0..manifest.frame_count {
            let rgb = |n: String| io::decode_png_rgb(get(&n)?, &at(&n));
            let mask = |n: String| io::decode_png_mask(get(&n)?, &at(&n));
            let pfm = |n: String| io::decode_pfm(get(&n)?, &at(&n));
            frames.push(PackFrame {
                original: rgb(original_name(i))?,
                mask: mask(mask_name(i))?,
                pcr: rgb(pcr_name(i))?,
                pcr_depth: pfm(pcr_depth_name(i))?,
                coverage: mask(coverage_name(i))?,
                masked: rgb(masked_name(i))?,
            });
        }
        let pack = ConditionPack {
            frames,
            edited_ref: io::decode_png_rgb(get(EDITED_REF)?, &at(EDITED_REF))?,
            manifest,
        };
        pack.validate()?;
        Ok(pack)
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_JSON);
        let bytes = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        let mut files = BTreeMap::new();
        for name in manifest.files.keys() {
            let p = dir.join(name);
            files.insert(name.clone(), fs::read(&p).map_err(|e| Error::io(&p, e))?);
        }
        files.insert(MANIFEST_JSON.into(), bytes);
        Self::from_files(&files, dir)
    }

    pub fn from_tar(bytes: &[u8]) -> Result<Self> {
        let origin = PathBuf::from("<archive>");
        let bad = |e: std::io::Error| Error::format(&origin, e.to_string());
        let mut archive = tar::Archive::new(bytes);
        let mut files = BTreeMap::new();
        for entry in archive.entries().map_err(bad)? {
            let mut entry = entry.map_err(bad)?;
            let name = entry.path().map_err(bad)?.to_string_lossy().into_owned();
            let mut data = Vec::new();
            entry.read_to_end(&mut data).map_err(bad)?;
            files.insert(name, data);
        }
        Self::from_files(&files, &origin)
    }

    /// Per-frame invariants: consistent sizes, masked original exactly
    /// zero inside the mask and equal to the original outside.
    pub fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if self.frames.len() != m.frame_count || m.frame_count == 0 {
            return Err(Error::Validation(format!(
                "pack has {} frames, manifest says {}",
                self.frames.len(),
                m.frame_count
            )));
        }
        let (w, h) = (m.width, m.height);
        self.edited_ref.check_size("edited reference", w, h)?;
        for (i, f) in self.frames.iter().enumerate() {
            f.original.check_size("frame", w, h)?;
            f.mask.check_size("mask", w, h)?;
            f.pcr.check_size("point render", w, h)?;
            f.pcr_depth.check_size("point render depth", w, h)?;
            f.coverage.check_size("coverage", w, h)?;
            f.masked.check_size("masked frame", w, h)?;
            if f.masked != f.original.zero_masked(&f.mask) {
                return Err(Error::Validation(format!(
                    "frame {i}: masked original disagrees with mask"
                )));
            }
        }
        Ok(())
    }

    pub fn masks(&self) -> Vec<Mask> {
        self.frames.iter().map(|f| f.mask.clone()).collect()
    }

    pub fn point_renders(&self) -> Vec<Image> {
        self.frames.iter().map(|f| f.pcr.clone()).collect()
    }
}
