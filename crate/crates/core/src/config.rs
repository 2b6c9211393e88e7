//! Experiment configuration files.
//!
//! A config is a list of `key = value` lines (valid TOML). Every key is
//! optional; missing keys take the reference values below. Powers are given
//! in mW, noise in dBm, distances in meters and the rate requirement in
//! bit/s/Hz unless `r_th_unit = "nat"`. Everything is converted to watts and
//! nats when the file is loaded.
//!
//! | key                 | default                               |
//! |---------------------|---------------------------------------|
//! | `n_cu`              | 15                                    |
//! | `n_d2d`             | `[10, 15, 20, 25, 30]` (sweep)        |
//! | `schemes`           | `["auction", "optimal", "no-transfer", "random"]` |
//! | `cell_radius_m`     | 500                                   |
//! | `dt_min_m`, `dt_max_m` | 200, 400                           |
//! | `d2d_min_m`, `d2d_max_m` | 10, 30                           |
//! | `pathloss_exponent` | 4                                     |
//! | `p_cu_mw`, `p_dt_mw`| 20, 20                                |
//! | `noise_dbm`         | -100                                  |
//! | `r_th`              | 1.8                                   |
//! | `r_th_unit`         | `"bit"` (or `"nat"`)                  |
//! | `epsilon`           | 1                                     |
//! | `subframes`         | 1000                                  |
//! | `samples_per_pair`  | 10000                                 |
//! | `scenarios`         | 200                                   |
//! | `seed`              | 1                                     |
//! | `output_dir`        | `"results"`                           |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::LinkBudget;
use crate::error::{Error, Result};
use crate::sim::{bits_to_nats, Scheme, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub n_cu: usize,
    pub n_d2d: Vec<usize>,
    pub schemes: Vec<String>,
    pub cell_radius_m: f64,
    pub dt_min_m: f64,
    pub dt_max_m: f64,
    pub d2d_min_m: f64,
    pub d2d_max_m: f64,
    pub pathloss_exponent: f64,
    pub p_cu_mw: f64,
    pub p_dt_mw: f64,
    pub noise_dbm: f64,
    pub r_th: f64,
    pub r_th_unit: String,
    pub epsilon: f64,
    pub subframes: usize,
    pub samples_per_pair: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            n_cu: 15,
            n_d2d: vec![10, 15, 20, 25, 30],
            schemes: Scheme::ALL.iter().map(|s| s.as_str().to_string()).collect(),
            cell_radius_m: 500.0,
            dt_min_m: 200.0,
            dt_max_m: 400.0,
            d2d_min_m: 10.0,
            d2d_max_m: 30.0,
            pathloss_exponent: 4.0,
            p_cu_mw: 20.0,
            p_dt_mw: 20.0,
            noise_dbm: -100.0,
            r_th: 1.8,
            r_th_unit: "bit".into(),
            epsilon: 1.0,
            subframes: 1000,
            samples_per_pair: 10_000,
            scenarios: 200,
            seed: 1,
            output_dir: PathBuf::from("results"),
        }
    }
}

/// A validated experiment: the base simulation config plus the sweep over
/// the number of D2D pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub sweep_n_d2d: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub output_dir: PathBuf,
    /// The file as resolved, for provenance.
    pub source: ConfigFile,
}

impl ExperimentSpec {
    pub fn seed(&self) -> u64 {
        self.base.master_seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base.master_seed = seed;
        self.source.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = dir.into();
        self.source.output_dir = self.output_dir.clone();
        self
    }

    /// Base config with the number of D2D pairs set to `n_d2d`.
    pub fn config_for(&self, n_d2d: usize) -> SimConfig {
        SimConfig {
            n_d2d,
            ..self.base.clone()
        }
    }

    /// Resolved config as TOML text.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(&self.source).expect("config serializes")
    }
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ConfigFile::default().resolve().expect("defaults are valid")
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(key, format!("must be positive, got {v}")))
    }
}

fn ordered(lo_key: &str, hi_key: &str, lo: f64, hi: f64) -> Result<(f64, f64)> {
    positive(lo_key, lo)?;
    positive(hi_key, hi)?;
    if lo > hi {
        return Err(Error::invalid(hi_key, format!("{hi} is below {lo_key} = {lo}")));
    }
    Ok((lo, hi))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn resolve(self) -> Result<ExperimentSpec> {
        if self.n_d2d.is_empty() {
            return Err(Error::invalid("n_d2d", "sweep list must not be empty"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "at least one scheme required"));
        }
        let schemes = self
            .schemes
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Scheme>>>()?;
        if !(self.r_th >= 0.0 && self.r_th.is_finite()) {
            return Err(Error::invalid("r_th", format!("must be nonnegative, got {}", self.r_th)));
        }
        let r_th = match self.r_th_unit.as_str() {
            "bit" => bits_to_nats(self.r_th),
            "nat" => self.r_th,
            other => return Err(Error::invalid("r_th_unit", format!("expected \"bit\" or \"nat\", got {other:?}"))),
        };
        if !self.noise_dbm.is_finite() {
            return Err(Error::invalid("noise_dbm", "must be finite"));
        }
        let budget = LinkBudget::from_mw_dbm(
            positive("p_cu_mw", self.p_cu_mw)?,
            positive("p_dt_mw", self.p_dt_mw)?,
            self.noise_dbm,
        )
        .map_err(|e| Error::invalid("noise_dbm", e.to_string()))?;
        if self.subframes == 0 {
            return Err(Error::invalid("subframes", "must be at least 1"));
        }
        if self.samples_per_pair == 0 {
            return Err(Error::invalid("samples_per_pair", "must be at least 1"));
        }
        let base = SimConfig {
            n_cu: self.n_cu,
            n_d2d: self.n_d2d[0],
            cell_radius: positive("cell_radius_m", self.cell_radius_m)?,
            dt_annulus: ordered("dt_min_m", "dt_max_m", self.dt_min_m, self.dt_max_m)?,
            d2d_distance: ordered("d2d_min_m", "d2d_max_m", self.d2d_min_m, self.d2d_max_m)?,
            pathloss_exponent: positive("pathloss_exponent", self.pathloss_exponent)?,
            budget,
            r_th,
            epsilon: positive("epsilon", self.epsilon)?,
            subframes: self.subframes,
            samples_per_pair: self.samples_per_pair,
            n_scenarios: self.scenarios,
            master_seed: self.seed,
        };
        base.validate()?;
        Ok(ExperimentSpec {
            base,
            sweep_n_d2d: self.n_d2d.clone(),
            schemes,
            output_dir: self.output_dir.clone(),
            source: self,
        })
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    ConfigFile::parse(text)?.resolve()
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingConfig {
            path: path.to_path_buf(),
        },
        _ => Error::Io(e),
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_values() {
        let spec = parse_config("").unwrap();
        assert_eq!(spec.base.n_cu, 15);
        assert_eq!(spec.sweep_n_d2d, vec![10, 15, 20, 25, 30]);
        assert_eq!(spec.schemes, Scheme::ALL.to_vec());
        assert!((spec.base.budget.noise - 1e-13).abs() < 1e-25);
        assert!((spec.base.budget.p_cu - 0.02).abs() < 1e-15);
        assert!((spec.base.budget.p_dt - 0.02).abs() < 1e-15);
        assert_eq!(spec.base.d2d_distance, (10.0, 30.0));
        assert!((spec.base.r_th - 1.8 * std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(spec.base.epsilon, 1.0);
    }

    #[test]
    fn negative_requirement_names_the_key() {
        let err = parse_config("r_th = -1").unwrap_err();
        assert!(matches!(&err, Error::InvalidConfig { key, .. } if key == "r_th"), "{err}");
    }

    #[test]
    fn overrides_are_applied() {
        let spec = parse_config("epsilon = 0.1\nn_d2d = [10, 20]\nschemes = [\"auction\", \"random\"]").unwrap();
        assert_eq!(spec.base.epsilon, 0.1);
        assert_eq!(spec.sweep_n_d2d, vec![10, 20]);
        assert_eq!(spec.schemes, vec![Scheme::Auction, Scheme::Random]);
        let spec = parse_config("r_th = 1.5\nr_th_unit = \"nat\"").unwrap();
        assert_eq!(spec.base.r_th, 1.5);
    }

    #[test]
    fn errors_are_distinct() {
        assert!(matches!(parse_config("n_cu = "), Err(Error::ConfigParse(_))));
        assert!(matches!(parse_config("bogus_key = 3"), Err(Error::ConfigParse(_))));
        assert!(matches!(
            parse_config("n_d2d = []"),
            Err(Error::InvalidConfig { key, .. }) if key == "n_d2d"
        ));
        assert!(matches!(
            parse_config("schemes = [\"greedy\"]"),
            Err(Error::InvalidConfig { key, .. }) if key == "schemes"
        ));
        assert!(matches!(
            parse_config("dt_min_m = 500"),
            Err(Error::InvalidConfig { key, .. }) if key == "dt_max_m"
        ));
        assert!(matches!(
            load_config(Path::new("/nonexistent/coopd2d.toml")),
            Err(Error::MissingConfig { .. })
        ));
    }

    #[test]
    fn resolved_config_reparses_to_the_same_spec() {
        let spec = parse_config("epsilon = 0.5\nseed = 9").unwrap();
        assert_eq!(parse_config(&spec.resolved_toml()).unwrap(), spec);
    }
}
