//! Resolution of run parameters: command-line flag, then config file, then default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tfx::gpe::SolverOptions;
use tfx::grid::{auto_node_count, make_grid, Grid};
use tfx::io::{parse_config, parse_list};

use crate::failure::Failure;

/// Values from a key-value config file; every lookup is recorded so unknown
/// keys can be reported.
#[derive(Debug, Default)]
pub struct FileLayer {
    entries: BTreeMap<String, String>,
}

impl FileLayer {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io { message: format!("{}: {e}", path.display()) })?;
        Self::parse(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, tfx::error::IoError> {
        Ok(Self { entries: parse_config(text)? })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// `cli`, else the file entry under `key`, else `default`.
    pub fn pick<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Result<T, Failure> {
        Ok(self.pick_opt(cli, key)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.raw(key) {
            Some(v) => v.parse().map(Some).map_err(|_| Failure::usage(format!("config key {key}: cannot parse {v:?}"))),
            None => Ok(None),
        }
    }

    /// Comma-separated float list resolved with the same precedence.
    pub fn pick_list(&self, cli: Option<&str>, key: &str, default: &str) -> Result<Vec<f64>, Failure> {
        let text = cli.or(self.raw(key)).unwrap_or(default);
        parse_list(text).map_err(|e| Failure::usage(format!("{key}: {e}")))
    }

    pub fn pick_list_opt(&self, cli: Option<&str>, key: &str) -> Result<Option<Vec<f64>>, Failure> {
        match cli.or(self.raw(key)) {
            Some(t) => parse_list(t).map(Some).map_err(|e| Failure::usage(format!("{key}: {e}"))),
            None => Ok(None),
        }
    }
}

/// Settings shared by every command.
#[derive(Clone, Debug)]
pub struct Common {
    pub out: PathBuf,
    pub jobs: usize,
    pub cache: bool,
    pub solver: SolverOptions,
}

pub fn validate_eps_list(eps: &[f64], upper: f64) -> Result<(), Failure> {
    if eps.is_empty() {
        return Err(Failure::usage("empty eps list"));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < upper)) {
        return Err(Failure::usage(format!("eps = {e} must lie in (0, {upper})")));
    }
    let mut sorted = eps.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::usage("duplicate eps values"));
    }
    Ok(())
}

/// How node counts are chosen for physical-space grids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridChoice {
    pub x_max: f64,
    /// Fixed node count; `None` resolves `h ≤ ε / nodes_per_eps`.
    pub n: Option<usize>,
    pub nodes_per_eps: f64,
}

impl GridChoice {
    pub fn validate(&self) -> Result<(), Failure> {
        if !(self.x_max > 1.0 && self.x_max.is_finite()) {
            return Err(Failure::usage(format!("x_max = {} must exceed 1", self.x_max)));
        }
        if let Some(n) = self.n {
            if n < 3 || n % 2 == 0 {
                return Err(Failure::usage(format!("n = {n} must be odd and at least 3")));
            }
        }
        if !(self.nodes_per_eps >= 1.0) {
            return Err(Failure::usage(format!("nodes_per_eps = {} must be at least 1", self.nodes_per_eps)));
        }
        Ok(())
    }

    pub fn grid(&self, eps: f64) -> Result<Grid, Failure> {
        let auto = auto_node_count(self.x_max, eps / 8.0);
        let n = match self.n {
            Some(n) => {
                if n < auto {
                    log::warn!("n = {n} is below the resolution rule n >= {auto} for eps = {eps}");
                }
                n
            }
            None => auto_node_count(self.x_max, eps / self.nodes_per_eps),
        };
        make_grid(self.x_max, n).map_err(|e| Failure::usage(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let f = FileLayer::parse("m = 2\neps = 0.01,0.02\n").unwrap();
        assert_eq!(f.pick(Some(3usize), "m", 1).unwrap(), 3);
        assert_eq!(f.pick(None, "m", 1usize).unwrap(), 2);
        assert_eq!(f.pick(None, "k", 4usize).unwrap(), 4);
        assert_eq!(f.pick_list(None, "eps", "0.05").unwrap(), [0.01, 0.02]);
        assert_eq!(f.pick_list(Some("0.1"), "eps", "0.05").unwrap(), [0.1]);
        assert_eq!(FileLayer::default().pick_list(None, "eps", "0.05").unwrap(), [0.05]);
        assert_eq!(f.pick_list_opt(None, "positions").unwrap(), None);
    }

    #[test]
    fn bad_file_values_are_usage_errors() {
        let f = FileLayer::parse("m = two").unwrap();
        assert_eq!(f.pick(None, "m", 1usize).unwrap_err().code(), 2);
        assert!(FileLayer::parse("garbage").is_err());
    }

    #[test]
    fn eps_validation() {
        assert!(validate_eps_list(&[0.05, 0.02], 1.0).is_ok());
        assert!(validate_eps_list(&[-1.0], 1.0).is_err());
        assert!(validate_eps_list(&[0.05, 0.05], 1.0).is_err());
        assert!(validate_eps_list(&[], 1.0).is_err());
    }

    #[test]
    fn grid_choice() {
        let g = GridChoice { x_max: 2.0, n: None, nodes_per_eps: 8.0 };
        assert_eq!(g.grid(0.05).unwrap().n(), 641);
        assert!(GridChoice { n: Some(100), ..g }.validate().is_err());
        assert!(GridChoice { x_max: 0.5, ..g }.validate().is_err());
        assert_eq!(GridChoice { n: Some(101), ..g }.grid(0.05).unwrap().n(), 101);
    }
}
