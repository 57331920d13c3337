//! Suite configuration: defaults, the JSON config file, and map sources.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bvdeg_core::gallery::{make_map, GallerySpec};
use bvdeg_core::io::load_map;
use bvdeg_core::SampledMap;
use serde::{Deserialize, Serialize};

pub const SUITES: [&str; 10] = [
    "degree-identity",
    "coarea",
    "bvl",
    "lemma61",
    "adjugate",
    "regularity",
    "stability",
    "areas",
    "axioms",
    "boundary-convergence",
];

/// Where a map comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    Gallery(GallerySpec),
    File(PathBuf),
}

impl MapSource {
    pub fn label(&self) -> String {
        match self {
            MapSource::Gallery(spec) => serde_json::to_string(spec).unwrap_or_else(|_| spec.label().into()),
            MapSource::File(p) => p.display().to_string(),
        }
    }

    pub fn gallery(&self) -> Option<&GallerySpec> {
        match self {
            MapSource::Gallery(s) => Some(s),
            MapSource::File(_) => None,
        }
    }

    pub fn dim_in(&self) -> Option<usize> {
        self.gallery().map(|s| s.dim_in())
    }

    /// Samples the map; `shape` applies to gallery maps only.
    pub fn load(&self, shape: &[usize]) -> Result<SampledMap<f64>> {
        match self {
            MapSource::Gallery(spec) => {
                make_map(spec, shape).with_context(|| format!("sampling {} on {shape:?}", spec.label()))
            }
            MapSource::File(p) => load_map(p).with_context(|| format!("loading {}", p.display())),
        }
    }
}

/// Gallery parameters given as separate flags.
#[derive(Debug, Clone, Default)]
pub struct GalleryParams {
    pub level: Option<u32>,
    pub k: Option<i32>,
    pub power: Option<f64>,
    pub amount: Option<f64>,
    pub matrix: Option<Vec<f64>>,
}

/// Parses `gallery:<name>` (with parameters from flags) or a field path.
pub fn parse_map(text: &str, p: &GalleryParams) -> Result<MapSource> {
    let Some(name) = text.strip_prefix("gallery:") else {
        return Ok(MapSource::File(PathBuf::from(text)));
    };
    let spec = match name {
        "cantor1d" => GallerySpec::Cantor1d { level: p.level.unwrap_or(6) },
        "cantor_shear3d" => GallerySpec::CantorShear3d { level: p.level.unwrap_or(6) },
        "identity3d" => GallerySpec::Identity3d,
        "linear" => GallerySpec::Linear {
            matrix: p
                .matrix
                .clone()
                .unwrap_or_else(|| vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]),
        },
        "zpow" => GallerySpec::Zpow { k: p.k.unwrap_or(2) },
        "radial_stretch" => GallerySpec::RadialStretch { power: p.power.unwrap_or(2.0) },
        "shear2d" => GallerySpec::Shear2d { amount: p.amount.unwrap_or(0.2) },
        other => bail!("unknown gallery map '{other}'"),
    };
    spec.validate()?;
    Ok(MapSource::Gallery(spec))
}

/// Parses `n` or `n0,n1[,n2]`.
pub fn parse_shape(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad grid size '{t}'")))
        .collect()
}

/// Parses `a..b` (inclusive) or a comma list.
pub fn parse_levels(text: &str) -> Result<Vec<u32>> {
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().trim_start_matches('=').parse()?);
        if a > b {
            bail!("empty level range {text}");
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|t| t.trim().parse::<u32>().with_context(|| format!("bad level '{t}'")))
        .collect()
}

/// Everything that determines a suite's results. Thread count and output
/// paths are deliberately absent, so reports are replayable and identical
/// across worker counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: String,
    /// Maps to run; empty selects the suite's default set.
    pub maps: Vec<MapSource>,
    /// Sample grid; one entry is repeated over every axis.
    pub grid: Option<Vec<usize>>,
    pub radius: f64,
    /// Raster points per axis for degree integrals.
    pub raster: usize,
    /// Widest smoothed-indicator width.
    pub delta: f64,
    pub slices: usize,
    pub depth: u32,
    /// Raster points per axis for dyadic surveys.
    pub survey_raster: usize,
    pub tol: Option<f64>,
    /// Random cases per map (random fields for coarea / bvl).
    pub cases: Option<usize>,
    pub search_resolution: usize,
    pub levels: Vec<u32>,
    /// `cantor` or `linear` for the stability suite.
    pub sequence: String,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            suite: "degree-identity".into(),
            maps: Vec::new(),
            grid: None,
            radius: 0.8,
            raster: 512,
            delta: 0.2,
            slices: 33,
            depth: 3,
            survey_raster: 256,
            tol: None,
            cases: None,
            search_resolution: 256,
            levels: (2..=8).collect(),
            sequence: "cantor".into(),
            seed: 0,
        }
    }
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<SuiteConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // A full report is accepted too; its config block is replayed.
        let block = value.get("config").cloned().unwrap_or(value);
        serde_json::from_value(block).with_context(|| format!("config in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if !SUITES.contains(&self.suite.as_str()) {
            bail!("unknown suite '{}'; expected one of {}", self.suite, SUITES.join(", "));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                bail!("tolerance must be positive, got {t}");
            }
        }
        if !(self.radius > 0.0) || !(self.delta > 0.0) {
            bail!("radius and delta must be positive");
        }
        if self.raster < 2 || self.survey_raster < 2 || self.search_resolution == 0 {
            bail!("raster sizes must be at least 2");
        }
        if self.slices < 8 {
            bail!("at least 8 slices are needed, got {}", self.slices);
        }
        if self.depth == 0 || self.depth > 8 {
            bail!("dyadic depth must be in 1..=8, got {}", self.depth);
        }
        if let Some(g) = &self.grid {
            if g.is_empty() || g.len() > 3 || g.iter().any(|&n| n < 2) {
                bail!("grid needs 1 to 3 sizes, each at least 2");
            }
        }
        if !matches!(self.sequence.as_str(), "cantor" | "linear") {
            bail!("sequence must be 'cantor' or 'linear'");
        }
        Ok(())
    }

    /// Grid for a map of input dimension `dim`, falling back to `default`.
    pub fn shape_for(&self, dim: usize, default: &[usize]) -> Vec<usize> {
        match &self.grid {
            Some(g) if g.len() == 1 => vec![g[0]; dim],
            Some(g) if g.len() == dim => g.clone(),
            _ => default.to_vec(),
        }
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_maps_and_shapes() {
        let p = GalleryParams {
            k: Some(3),
            ..Default::default()
        };
        assert_eq!(parse_map("gallery:zpow", &p).unwrap(), MapSource::Gallery(GallerySpec::Zpow { k: 3 }));
        assert!(parse_map("gallery:nope", &p).is_err());
        assert_eq!(parse_map("f.json", &p).unwrap(), MapSource::File("f.json".into()));
        assert_eq!(parse_shape("193,97,97").unwrap(), vec![193, 97, 97]);
        assert_eq!(parse_levels("2..8").unwrap().len(), 7);
        assert_eq!(parse_levels("3,5").unwrap(), vec![3, 5]);
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let c = SuiteConfig {
            maps: vec![MapSource::Gallery(GallerySpec::Identity3d)],
            ..Default::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<SuiteConfig>(&text).unwrap(), c);
        assert!(serde_json::from_str::<SuiteConfig>(r#"{"threads": 4}"#).is_err());
        let partial: SuiteConfig = serde_json::from_str(r#"{"suite": "coarea", "seed": 7}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.raster, 512);
    }

    #[test]
    fn validation() {
        let mut c = SuiteConfig::default();
        assert!(c.validate().is_ok());
        c.suite = "bogus".into();
        assert!(c.validate().is_err());
        c.suite = "coarea".into();
        c.tol = Some(0.0);
        assert!(c.validate().is_err());
    }
}
