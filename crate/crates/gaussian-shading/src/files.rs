//! On-disk formats: latent files (binary canonical, JSON by extension) and
//! JSON key files. Both formats are versioned and round-trip byte-identically
//! through read -> write.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cipher::KeyMaterial;
use crate::error::{Error, Result};
use crate::sampler::{LatentVector, WindowConfig};

pub const LATENT_FORMAT_VERSION: u32 = 1;
pub const KEY_FORMAT_VERSION: u32 = 1;

/// Magic prefix of the binary latent format.
pub const LATENT_MAGIC: [u8; 4] = *b"GSL1";

/// Optional provenance recorded alongside a latent: enough to replay the
/// embedding exactly, never needed for extraction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
}

/// A latent vector plus the header fields of its file representation.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentFile {
    pub format_version: u32,
    pub window: WindowConfig,
    pub manifest: Option<LatentManifest>,
    pub latent: LatentVector,
}

#[derive(Serialize, Deserialize)]
struct LatentJson {
    format_version: u32,
    n_dims: u32,
    window_l: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<LatentManifest>,
    values: Vec<f64>,
}

impl LatentFile {
    pub fn new(latent: LatentVector, window: WindowConfig, manifest: Option<LatentManifest>) -> Self {
        Self {
            format_version: LATENT_FORMAT_VERSION,
            window,
            manifest,
            latent,
        }
    }

    /// Total watermark capacity carried by this latent.
    pub fn n_bits(&self) -> usize {
        self.latent.len() * self.window.bits_per_dim()
    }

    fn is_json_path(path: &Path) -> bool {
        path.extension().is_some_and(|e| e == "json")
    }

    /// Write to `path`. The body is little-endian f64 in the binary format;
    /// a `.json` extension selects the JSON representation instead.
    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = if Self::is_json_path(path) {
            self.to_json_bytes()?
        } else {
            self.to_binary_bytes()?
        };
        fs::write(path, bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let parsed = if Self::is_json_path(path) {
            Self::from_json_bytes(&bytes)
        } else {
            Self::from_binary_bytes(&bytes)
        };
        parsed.map_err(|e| match e {
            Error::Io(_) | Error::Json(_) | Error::MalformedFile { .. } => Error::MalformedFile {
                path: path.display().to_string(),
                reason: e.to_string(),
            },
            other => Error::MalformedFile {
                path: path.display().to_string(),
                reason: other.to_string(),
            },
        })
    }

    pub fn to_binary_bytes(&self) -> Result<Vec<u8>> {
        let manifest_bytes = match &self.manifest {
            Some(m) => serde_json::to_vec(m)?,
            None => Vec::new(),
        };
        let mut out = Vec::with_capacity(20 + manifest_bytes.len() + self.latent.len() * 8);
        out.extend_from_slice(&LATENT_MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(self.latent.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.window.bits_per_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(manifest_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&manifest_bytes);
        for v in self.latent.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_binary_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = std::io::Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic)?;
        if magic != LATENT_MAGIC {
            return Err(malformed("bad magic"));
        }
        let format_version = read_u32(&mut cur)?;
        if format_version != LATENT_FORMAT_VERSION {
            return Err(malformed(&format!(
                "unsupported format version {format_version}"
            )));
        }
        let n_dims = read_u32(&mut cur)? as usize;
        let window_l = read_u32(&mut cur)?;
        let window = WindowConfig::new(
            u8::try_from(window_l).map_err(|_| malformed("window out of range"))?,
        )?;
        let manifest_len = read_u32(&mut cur)? as usize;
        let manifest = if manifest_len > 0 {
            let mut buf = vec![0u8; manifest_len];
            cur.read_exact(&mut buf)?;
            Some(serde_json::from_slice(&buf)?)
        } else {
            None
        };
        let mut values = Vec::with_capacity(n_dims);
        let mut fbuf = [0u8; 8];
        for _ in 0..n_dims {
            cur.read_exact(&mut fbuf)?;
            values.push(f64::from_le_bytes(fbuf));
        }
        let mut rest = Vec::new();
        cur.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(malformed("trailing bytes after latent body"));
        }
        Ok(Self {
            format_version,
            window,
            manifest,
            latent: LatentVector::new(values)?,
        })
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let doc = LatentJson {
            format_version: self.format_version,
            n_dims: self.latent.len() as u32,
            window_l: self.window.bits_per_dim() as u8,
            manifest: self.manifest.clone(),
            values: self.latent.values().to_vec(),
        };
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let doc: LatentJson = serde_json::from_slice(bytes)?;
        if doc.format_version != LATENT_FORMAT_VERSION {
            return Err(malformed(&format!(
                "unsupported format version {}",
                doc.format_version
            )));
        }
        if doc.values.len() != doc.n_dims as usize {
            return Err(malformed(&format!(
                "header says {} dims, body has {}",
                doc.n_dims,
                doc.values.len()
            )));
        }
        Ok(Self {
            format_version: doc.format_version,
            window: WindowConfig::new(doc.window_l)?,
            manifest: doc.manifest,
            latent: LatentVector::new(doc.values)?,
        })
    }
}

fn malformed(reason: &str) -> Error {
    Error::MalformedFile {
        path: String::new(),
        reason: reason.to_string(),
    }
}

fn read_u32(cur: &mut std::io::Cursor<&[u8]>) -> Result<u32> {
    let mut buf = [0u8; 4];
    cur.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[derive(Serialize, Deserialize)]
struct KeyJson {
    format_version: u32,
    key: String,
    nonce: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// Serialized key material: lowercase hex, 64 chars of key and 24 of nonce.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyFile {
    pub material: KeyMaterial,
    pub label: Option<String>,
}

impl KeyFile {
    pub fn new(material: KeyMaterial, label: Option<String>) -> Self {
        Self { material, label }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let doc = KeyJson {
            format_version: KEY_FORMAT_VERSION,
            key: self.material.key_hex(),
            nonce: self.material.nonce_hex(),
            label: self.label.clone(),
        };
        let mut file = fs::File::create(path)?;
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        file.write_all(&bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let doc: KeyJson = serde_json::from_slice(&bytes).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if doc.format_version != KEY_FORMAT_VERSION {
            return Err(Error::MalformedFile {
                path: path.display().to_string(),
                reason: format!("unsupported format version {}", doc.format_version),
            });
        }
        Ok(Self {
            material: KeyMaterial::from_hex(&doc.key, &doc.nonce)?,
            label: doc.label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::keygen;
    use tempfile::tempdir;

    fn sample_file() -> LatentFile {
        LatentFile::new(
            LatentVector::new(vec![0.25, -1.5, 3.125]).unwrap(),
            WindowConfig::new(2).unwrap(),
            Some(LatentManifest {
                uniform_seed: Some(42),
                schedule: Some("linear/1000".into()),
            }),
        )
    }

    #[test]
    fn binary_roundtrip_is_byte_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("latent.bin");
        let file = sample_file();
        file.write(&path).unwrap();
        let first = fs::read(&path).unwrap();
        let reread = LatentFile::read(&path).unwrap();
        assert_eq!(reread, file);
        reread.write(&path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn json_roundtrip_is_byte_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("latent.json");
        let file = sample_file();
        file.write(&path).unwrap();
        let first = fs::read(&path).unwrap();
        let reread = LatentFile::read(&path).unwrap();
        assert_eq!(reread, file);
        reread.write(&path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn corrupt_header_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("latent.bin");
        let file = sample_file();
        file.write(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            LatentFile::read(&path),
            Err(Error::MalformedFile { .. })
        ));
    }

    #[test]
    fn truncated_body_is_rejected() {
        let file = sample_file();
        let mut bytes = file.to_binary_bytes().unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(LatentFile::from_binary_bytes(&bytes).is_err());
    }

    #[test]
    fn non_finite_values_rejected_on_read() {
        let file = sample_file();
        let mut bytes = file.to_binary_bytes().unwrap();
        let tail = bytes.len() - 8;
        bytes[tail..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(LatentFile::from_binary_bytes(&bytes).is_err());
    }

    #[test]
    fn key_file_roundtrip_lowercase_hex() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("key.json");
        let kf = KeyFile::new(keygen(Some(0)).unwrap(), Some("demo".into()));
        kf.write(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.chars().any(|c| c.is_ascii_uppercase()));
        let reread = KeyFile::read(&path).unwrap();
        assert_eq!(reread, kf);
    }

    #[test]
    fn key_file_rejects_bad_hex_lengths() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("key.json");
        fs::write(
            &path,
            r#"{"format_version":1,"key":"abcd","nonce":"001122334455667788990011"}"#,
        )
        .unwrap();
        assert!(KeyFile::read(&path).is_err());
    }
}
