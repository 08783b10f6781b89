use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sobolev_trace::extension::JetField;
use sobolev_trace::functions::{corpus, AnalyticFunction};
use sobolev_trace::poly::{parse_index, Polynomial};
use sobolev_trace::{Cube, Grid, PointSet};

use crate::CliError;

fn default_m() -> usize {
    1
}

fn default_hop_radius() -> usize {
    3
}

fn default_seed() -> u64 {
    42
}

fn default_whitney_levels() -> u32 {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub center: Vec<f64>,
    pub half_side: f64,
}

/// Where the finite set `E` comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSource {
    Inline(Vec<Vec<f64>>),
    /// A `{"points": [...]}` file, relative to the config file.
    File(PathBuf),
    /// Uniform points in the middle half of the box, drawn from the run seed.
    Random {
        count: usize,
    },
}

/// A polynomial in the absolute coordinates, keyed by multi-index strings like `"(2,0)"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSpec {
    pub coefficients: BTreeMap<String, f64>,
}

/// What is prescribed on `E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// One value per point of `E` (m = 1 only).
    Values(Vec<f64>),
    /// A member of the built-in smooth corpus, by name.
    Function(String),
    Polynomial(PolynomialSpec),
    /// A jet JSON file, relative to the config file.
    JetFile(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    pub p: f64,
    /// Grid nodes per axis over the box.
    pub grid: usize,
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    pub points: PointSource,
    pub data: DataSource,
    #[serde(default = "default_hop_radius")]
    pub hop_radius: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Depth limit of the Whitney decomposition.
    #[serde(default = "default_whitney_levels")]
    pub whitney_levels: u32,
}

/// Command-line values that replace config fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub hop_radius: Option<usize>,
    pub grid: Option<usize>,
    /// Doubles the grid this many times.
    pub refine: Option<u32>,
}

/// The data of a run after every source has been read.
#[derive(Clone, Debug)]
pub enum Data {
    Values(Vec<f64>),
    Function(AnalyticFunction),
    Polynomial(Polynomial),
    Jet(JetField),
}

/// A validated configuration with its inputs materialized.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub e: PointSet,
    pub bx: Cube,
    pub grid: Grid,
    pub data: Data,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| config_error(format!("invalid config: {e}")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(r) = o.hop_radius {
            self.hop_radius = r;
        }
        if let Some(g) = o.grid {
            self.grid = g;
        }
        if let Some(k) = o.refine {
            self.grid <<= k;
        }
    }

    /// The hash covers every field except the output directory.
    pub fn provenance(&self) -> Provenance {
        let mut hashed = self.clone();
        hashed.out = None;
        let canonical = serde_json::to_string(&hashed).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        Provenance {
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Validates the fields and reads every referenced file. Relative paths
    /// are taken from `base`.
    pub fn resolve(&self, base: &Path) -> Result<Experiment, CliError> {
        let n = self.n;
        if n == 0 {
            return Err(config_error("n must be at least 1"));
        }
        if self.m == 0 {
            return Err(config_error("m must be at least 1"));
        }
        if !(self.p > n as f64 && self.p.is_finite()) {
            return Err(config_error(format!("p = {} must exceed n = {n}", self.p)));
        }
        if self.grid < 4 {
            return Err(config_error("grid needs at least 4 nodes per axis"));
        }
        if self.hop_radius == 0 {
            return Err(config_error("hop_radius must be at least 1"));
        }
        if self.bx.center.len() != n {
            return Err(config_error(format!(
                "box center has {} coordinates, n = {n}",
                self.bx.center.len()
            )));
        }
        let bx = Cube::new(self.bx.center.clone(), self.bx.half_side)
            .map_err(|e| config_error(e.to_string()))?;
        let grid = Grid::cell_centered(&bx, self.grid).map_err(|e| config_error(e.to_string()))?;
        let e = self.load_points(base, &bx)?;
        if e.dim() != n {
            return Err(config_error(format!(
                "points have dimension {}, n = {n}",
                e.dim()
            )));
        }
        if let Some(p) = e.points().iter().find(|p| !bx.contains_point(p)) {
            return Err(config_error(format!("point {p:?} lies outside the box")));
        }
        let data = self.load_data(base, &e)?;
        Ok(Experiment {
            config: self.clone(),
            e,
            bx,
            grid,
            data,
        })
    }

    fn load_points(&self, base: &Path, bx: &Cube) -> Result<PointSet, CliError> {
        match &self.points {
            PointSource::Inline(pts) => {
                PointSet::new(pts.clone()).map_err(|e| config_error(e.to_string()))
            }
            PointSource::File(path) => {
                let path = base.join(path);
                let s = fs::read_to_string(&path)
                    .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
                PointSet::from_json(&s)
                    .map_err(|e| config_error(format!("{}: {e}", path.display())))
            }
            PointSource::Random { count } => {
                if *count == 0 {
                    return Err(config_error("random point count must be positive"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let r = 0.5 * bx.half_side;
                let pts = (0..*count)
                    .map(|_| bx.center.iter().map(|c| c + rng.gen_range(-r..r)).collect())
                    .collect();
                PointSet::new(pts).map_err(|e| config_error(e.to_string()))
            }
        }
    }

    fn load_data(&self, base: &Path, e: &PointSet) -> Result<Data, CliError> {
        match &self.data {
            DataSource::Values(v) => {
                if self.m != 1 {
                    return Err(config_error("plain values describe m = 1 data only"));
                }
                if v.len() != e.len() {
                    return Err(config_error(format!(
                        "{} values for {} points",
                        v.len(),
                        e.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(config_error("values must be finite"));
                }
                Ok(Data::Values(v.clone()))
            }
            DataSource::Function(name) => corpus(self.n)
                .into_iter()
                .find(|f| &f.name == name)
                .map(Data::Function)
                .ok_or_else(|| config_error(format!("no corpus function named `{name}`"))),
            DataSource::Polynomial(spec) => {
                let mut map = BTreeMap::new();
                for (k, &c) in &spec.coefficients {
                    let alpha = parse_index(k).map_err(|e| config_error(e.to_string()))?;
                    if alpha.len() != self.n {
                        return Err(config_error(format!(
                            "multi-index {k} has the wrong length"
                        )));
                    }
                    map.insert(alpha, c);
                }
                let degree = map
                    .keys()
                    .map(|a| a.iter().sum::<usize>())
                    .max()
                    .unwrap_or(0);
                Polynomial::from_map(vec![0.0; self.n], degree, &map)
                    .map(Data::Polynomial)
                    .map_err(|e| config_error(e.to_string()))
            }
            DataSource::JetFile(path) => {
                let path = base.join(path);
                let jet = JetField::read_json(&path)
                    .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
                if jet.m() != self.m || jet.points().dim() != self.n {
                    return Err(config_error(format!(
                        "jet has m = {} and n = {}, config has m = {} and n = {}",
                        jet.m(),
                        jet.points().dim(),
                        self.m,
                        self.n
                    )));
                }
                if jet.points() != e {
                    return Err(config_error("jet points differ from the configured points"));
                }
                Ok(Data::Jet(jet))
            }
        }
    }
}

/// Reads a config file, applies overrides and resolves it against the file's directory.
pub fn load_experiment(path: &Path, overrides: &Overrides) -> Result<Experiment, CliError> {
    let s = fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&s)?;
    cfg.apply(overrides);
    cfg.resolve(path.parent().unwrap_or(Path::new(".")))
}

impl Experiment {
    /// The prescribed values on `E`, for the scalar pipeline.
    pub fn values(&self) -> Vec<f64> {
        match &self.data {
            Data::Values(v) => v.clone(),
            Data::Function(f) => self.e.points().iter().map(|x| f.eval(x)).collect(),
            Data::Polynomial(p) => self.e.points().iter().map(|x| p.eval(x)).collect(),
            Data::Jet(j) => j
                .polys()
                .iter()
                .zip(self.e.points())
                .map(|(p, x)| p.eval(x))
                .collect(),
        }
    }

    /// The jet of order `m` on `E`.
    pub fn jet(&self) -> Result<JetField, CliError> {
        let m = self.config.m;
        let jet = match &self.data {
            Data::Values(v) => {
                let polys = v
                    .iter()
                    .zip(self.e.points())
                    .map(|(&c, x)| Polynomial::from_coeffs(x.clone(), 0, vec![c]))
                    .collect::<sobolev_trace::Result<Vec<_>>>()?;
                JetField::new(1, self.e.clone(), polys)?
            }
            Data::Function(f) => JetField::from_function(f, &self.e, m)?,
            Data::Polynomial(p) => JetField::from_polynomial(p, &self.e, m)?,
            Data::Jet(j) => j.clone(),
        };
        Ok(jet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"n": 1, "p": 2, "grid": 64, "box": {"center": [0.5], "half_side": 5},
                "points": {"inline": [[0], [1]]}, "data": {"values": [0, 1]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_are_filled() {
        let c = two_point();
        assert_eq!(
            (c.m, c.hop_radius, c.seed, c.whitney_levels),
            (1, 3, 42, 16)
        );
        let exp = c.resolve(Path::new(".")).unwrap();
        assert_eq!(exp.values(), vec![0.0, 1.0]);
        assert_eq!(exp.grid.len(), 64);
    }

    #[test]
    fn overrides_replace_fields() {
        let mut c = two_point();
        c.apply(&Overrides {
            seed: Some(7),
            grid: Some(32),
            refine: Some(2),
            hop_radius: Some(5),
            ..Default::default()
        });
        assert_eq!((c.seed, c.grid, c.hop_radius), (7, 128, 5));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = two_point();
        c.p = 1.0;
        assert!(matches!(
            c.resolve(Path::new(".")),
            Err(CliError::Config(_))
        ));
        let mut c = two_point();
        c.data = DataSource::Values(vec![1.0]);
        assert!(c.resolve(Path::new(".")).is_err());
        let mut c = two_point();
        c.points = PointSource::Inline(vec![vec![0.0], vec![9.0]]);
        assert!(c.resolve(Path::new(".")).is_err());
        let mut c = two_point();
        c.points = PointSource::File("missing.json".into());
        assert!(c.resolve(Path::new(".")).is_err());
        let mut c = two_point();
        c.data = DataSource::Function("no-such".into());
        assert!(c.resolve(Path::new(".")).is_err());
        assert!(ExperimentConfig::from_json(r#"{"n": 1}"#).is_err());
    }

    #[test]
    fn provenance_tracks_the_config() {
        let a = two_point();
        let mut b = two_point();
        assert_eq!(a.provenance(), b.provenance());
        assert_eq!(a.provenance().config_sha256.len(), 64);
        b.seed = 1;
        assert_ne!(a.provenance().config_sha256, b.provenance().config_sha256);
    }

    #[test]
    fn random_points_follow_the_seed() {
        let mut c = two_point();
        c.points = PointSource::Random { count: 5 };
        c.data = DataSource::Function("linear".into());
        let a = c.resolve(Path::new(".")).unwrap();
        let b = c.resolve(Path::new(".")).unwrap();
        assert_eq!(a.e, b.e);
        c.seed = 43;
        let d = c.resolve(Path::new(".")).unwrap();
        assert_ne!(a.e, d.e);
    }

    #[test]
    fn polynomial_source_parses_indices() {
        let mut c = two_point();
        c.m = 3;
        c.data = DataSource::Polynomial(PolynomialSpec {
            coefficients: [("(2)".to_string(), 1.0), ("(0)".to_string(), -1.0)].into(),
        });
        let exp = c.resolve(Path::new(".")).unwrap();
        assert_eq!(exp.values(), vec![-1.0, 0.0]);
        assert_eq!(exp.jet().unwrap().m(), 3);
    }
}
