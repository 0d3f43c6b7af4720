//! Download of PDS image/label pairs into a local cache.
//!
//! Cache layout: `<cache_dir>/<mission>/<product_id>/<product_id>.<ext>`.
//! URLs come from a per-mission directory template in which `{product_id}`
//! and `{sol}` are substituted; the file name is appended.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::Mission;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("product not found at {url}")]
    ProductNotFound { url: String },
    #[error("HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error("request to {url} failed: {message}")]
    Network { url: String, message: String },
    #[error("empty response from {url}")]
    EmptyBody { url: String },
    #[error("cannot write cache file {path}: {source}")]
    CacheWrite {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid product id '{0}'")]
    InvalidProductId(String),
}

/// Minimal GET interface so the cache logic can be exercised without a network.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<Vec<u8>, FetchError>;
}

/// Blocking HTTP(S) via `ureq`.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        let response = match self.agent.get(url).call() {
            Ok(r) => r,
            Err(ureq::Error::Status(404, _)) => return Err(FetchError::ProductNotFound { url: url.into() }),
            Err(ureq::Error::Status(status, _)) => return Err(FetchError::Http { status, url: url.into() }),
            Err(e) => {
                return Err(FetchError::Network {
                    url: url.into(),
                    message: e.to_string(),
                })
            }
        };
        let mut body = Vec::new();
        response
            .into_reader()
            .read_to_end(&mut body)
            .map_err(|e| FetchError::Network {
                url: url.into(),
                message: e.to_string(),
            })?;
        Ok(body)
    }
}

/// Per-mission URL templates for the directory holding a product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchConfig {
    pub curiosity_base_url: String,
    pub perseverance_base_url: String,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            curiosity_base_url: "https://planetarydata.jpl.nasa.gov/img/data/msl/MSLMST_0001/DATA/RDR/SURFACE/{sol}".into(),
            perseverance_base_url:
                "https://planetarydata.jpl.nasa.gov/img/data/mars2020/mars2020_mastcamz_ops_calibrated/data/sol/{sol}/ids/rdr/zcam"
                    .into(),
        }
    }
}

impl FetchConfig {
    pub fn base_url(&self, mission: Mission) -> &str {
        match mission {
            Mission::Curiosity => &self.curiosity_base_url,
            Mission::Perseverance => &self.perseverance_base_url,
        }
    }
}

/// Paths of a cached image/label pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedProduct {
    pub image_path: PathBuf,
    pub label_path: PathBuf,
    /// False when both files were served from the cache.
    pub downloaded: bool,
}

fn extensions(mission: Mission) -> (&'static str, &'static str) {
    match mission {
        Mission::Curiosity => ("IMG", "LBL"),
        Mission::Perseverance => ("IMG", "xml"),
    }
}

/// Sol encoded in a product id: leading digits for MSL
/// (`1429MR…` → 01429), the second field for Mars 2020 (`ZLF_0089_…` → 00089).
pub fn product_sol(product_id: &str, mission: Mission) -> Option<u32> {
    let digits = match mission {
        Mission::Curiosity => {
            let end = product_id.find(|c: char| !c.is_ascii_digit()).unwrap_or(product_id.len());
            &product_id[..end]
        }
        Mission::Perseverance => product_id.split('_').nth(1)?,
    };
    if digits.is_empty() {
        return None;
    }
    digits.parse().ok()
}

fn validate_id(product_id: &str) -> Result<(), FetchError> {
    let ok = !product_id.is_empty()
        && product_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && !product_id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(FetchError::InvalidProductId(product_id.into()))
    }
}

/// Image and label URLs for a product.
pub fn product_urls(product_id: &str, mission: Mission, base_url: &str) -> (String, String) {
    let sol = product_sol(product_id, mission).map(|s| format!("{s:05}")).unwrap_or_default();
    let dir = base_url
        .replace("{product_id}", product_id)
        .replace("{sol}", &sol);
    let dir = dir.trim_end_matches('/');
    let (img, lbl) = extensions(mission);
    (format!("{dir}/{product_id}.{img}"), format!("{dir}/{product_id}.{lbl}"))
}

fn cached(path: &Path) -> bool {
    std::fs::metadata(path).map(|m| m.is_file() && m.len() > 0).unwrap_or(false)
}

fn store(path: &Path, bytes: &[u8]) -> Result<(), FetchError> {
    let err = |source| FetchError::CacheWrite {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("part");
    std::fs::write(&tmp, bytes).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

/// Fetches over HTTP, reusing cached files.
pub fn fetch_product(product_id: &str, mission: Mission, cache_dir: &Path, base_url: &str) -> Result<FetchedProduct, FetchError> {
    fetch_product_with(&HttpTransport::default(), product_id, mission, cache_dir, base_url, false)
}

/// Downloads image and label unless both are already cached and non-empty;
/// `force` always re-downloads. Files land via rename so a failed transfer
/// never leaves a truncated cache entry.
pub fn fetch_product_with(
    transport: &dyn Transport,
    product_id: &str,
    mission: Mission,
    cache_dir: &Path,
    base_url: &str,
    force: bool,
) -> Result<FetchedProduct, FetchError> {
    validate_id(product_id)?;
    let dir = cache_dir.join(mission.to_string()).join(product_id);
    let (img_ext, lbl_ext) = extensions(mission);
    let image_path = dir.join(format!("{product_id}.{img_ext}"));
    let label_path = dir.join(format!("{product_id}.{lbl_ext}"));
    if !force && cached(&image_path) && cached(&label_path) {
        return Ok(FetchedProduct {
            image_path,
            label_path,
            downloaded: false,
        });
    }
    std::fs::create_dir_all(&dir).map_err(|source| FetchError::CacheWrite {
        path: dir.display().to_string(),
        source,
    })?;
    let (image_url, label_url) = product_urls(product_id, mission, base_url);
    // Label first: it is small and a 404 there avoids a large useless download.
    for (url, path) in [(&label_url, &label_path), (&image_url, &image_path)] {
        let body = transport.get(url)?;
        if body.is_empty() {
            return Err(FetchError::EmptyBody { url: url.clone() });
        }
        store(path, &body)?;
    }
    Ok(FetchedProduct {
        image_path,
        label_path,
        downloaded: true,
    })
}
