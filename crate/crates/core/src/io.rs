//! Persistence and plot data: versioned JSON state records, CSV tables with
//! gnuplot stubs, the on-disk state cache, and the small text parsers used
//! by the command line (key-value config files and comma-separated lists).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::PainleveSolution;
use crate::analysis::{find_zeros, fmt_num};
use crate::equilibrium::{PositionSource, SolitonConfig};
use crate::error::IoError;
use crate::gpe::{residual, StationaryState};
use crate::grid::{make_grid, Parity, ScalarField};
use crate::spectrum::SpectrumResult;

pub const STATE_SCHEMA: &str = "tfx-state-v1";

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "TFX_CACHE_DIR";

/// Short digest identifying the code that produced a record.
pub fn code_version_hash() -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_NAME"));
    h.update([0]);
    h.update(env!("CARGO_PKG_VERSION"));
    h.update([0]);
    h.update(STATE_SCHEMA);
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// On-disk form of a [`StationaryState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub schema: String,
    pub code_version: String,
    pub eps: f64,
    pub m: usize,
    pub x_max: f64,
    pub n: usize,
    pub parity: Parity,
    pub residual_sup: f64,
    pub newton_iters: usize,
    pub zeros: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub values: Vec<f64>,
}

impl StateRecord {
    pub fn from_state(s: &StationaryState) -> Self {
        Self {
            schema: STATE_SCHEMA.to_string(),
            code_version: code_version_hash(),
            eps: s.eps,
            m: s.m,
            x_max: s.grid().x_max(),
            n: s.grid().n(),
            parity: s.field.parity(),
            residual_sup: s.residual_sup,
            newton_iters: s.newton_iters,
            zeros: s.zeros.clone(),
            residual_history: s.residual_history.clone(),
            values: s.values().to_vec(),
        }
    }

    /// Pretty JSON with a trailing newline. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }

    /// Decodes and checks the schema and shape; does not re-verify the residual.
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let r: StateRecord = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
        if r.schema != STATE_SCHEMA {
            return Err(IoError::Schema { found: r.schema, expected: STATE_SCHEMA.into() });
        }
        if r.values.len() != r.n {
            return Err(IoError::Inconsistent(format!("{} values for n = {}", r.values.len(), r.n)));
        }
        if !(r.eps > 0.0 && r.eps.is_finite()) {
            return Err(IoError::Inconsistent(format!("eps = {}", r.eps)));
        }
        if r.values.iter().any(|v| !v.is_finite()) {
            return Err(IoError::Inconsistent("non-finite value".into()));
        }
        Ok(r)
    }

    /// Rebuilds the state after recomputing its residual against `tol`.
    pub fn into_state(self, tol: f64) -> Result<StationaryState, IoError> {
        let grid = make_grid(self.x_max, self.n)?;
        let field = ScalarField::new(&grid, self.values, self.parity)?;
        let recomputed = residual(&field, self.eps).sup_norm();
        if !(recomputed <= tol) {
            return Err(IoError::Verification { residual: recomputed, tol });
        }
        let zeros = find_zeros(&field);
        if zeros.len() != self.m {
            return Err(IoError::Inconsistent(format!("{} zeros for m = {}", zeros.len(), self.m)));
        }
        Ok(StationaryState {
            eps: self.eps,
            m: self.m,
            field,
            residual_sup: self.residual_sup,
            zeros,
            newton_iters: self.newton_iters,
            residual_history: self.residual_history,
        })
    }
}

/// Decodes a soliton configuration and re-derives its bound flags.
pub fn parse_soliton_config(text: &str) -> Result<SolitonConfig, IoError> {
    #[derive(Deserialize)]
    struct Raw {
        eps: f64,
        positions: Vec<f64>,
        source: PositionSource,
        #[serde(default)]
        residual: f64,
    }
    let raw: Raw = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    if !(raw.eps > 0.0 && raw.eps < 1.0) || raw.positions.iter().any(|a| !a.is_finite()) {
        return Err(IoError::Inconsistent("eps must lie in (0, 1) and positions must be finite".into()));
    }
    SolitonConfig::new(raw.eps, raw.positions, raw.source, raw.residual).map_err(|e| IoError::Inconsistent(e.to_string()))
}

/// Comma-separated table with a header row and LF line endings.
pub fn csv_string(headers: &[&str], columns: &[&[f64]]) -> Result<String, IoError> {
    if headers.len() != columns.len() || headers.is_empty() {
        return Err(IoError::Inconsistent(format!("{} headers for {} columns", headers.len(), columns.len())));
    }
    let rows = columns[0].len();
    if columns.iter().any(|c| c.len() != rows) {
        return Err(IoError::Inconsistent("columns differ in length".into()));
    }
    let mut out = headers.join(",");
    out.push('\n');
    for i in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| fmt_num(c[i])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Reads a numeric table written by [`csv_string`].
pub fn parse_csv(text: &str) -> Result<CsvTable, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or(IoError::Parse { line: 1, message: "missing header".into() })?;
    let headers: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
    if headers.iter().any(|h| h.is_empty()) {
        return Err(IoError::Parse { line: 1, message: "empty column name".into() });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|e| IoError::Parse { line: i + 1, message: format!("{c:?}: {e}") }))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != headers.len() {
            return Err(IoError::Parse { line: i + 1, message: format!("{} fields, expected {}", row.len(), headers.len()) });
        }
        rows.push(row);
    }
    Ok(CsvTable { headers, rows })
}

/// Gnuplot script plotting every column of `csv_file` against the first.
pub fn plot_stub(csv_file: &str, headers: &[&str]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    if let Some(x) = headers.first() {
        s.push_str(&format!("set xlabel '{x}'\n"));
    }
    let curves: Vec<String> = (2..=headers.len()).map(|j| format!("'{csv_file}' using 1:{j} with lines")).collect();
    if curves.is_empty() {
        s.push_str(&format!("plot '{csv_file}' using 0:1 with lines\n"));
    } else {
        s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    }
    s
}

/// `x,u` and, when given, the comparison profile.
pub fn state_csv(state: &StationaryState, reference: Option<(&str, &ScalarField)>) -> Result<String, IoError> {
    let x = state.grid().nodes();
    match reference {
        Some((name, r)) => {
            state.field.check_grid(r.grid())?;
            csv_string(&["x", "u", name], &[x, state.values(), r.values()])
        }
        None => csv_string(&["x", "u"], &[x, state.values()]),
    }
}

pub fn painleve_csv(p: &PainleveSolution) -> Result<String, IoError> {
    csv_string(&["y", "nu"], &[&p.y_nodes, &p.nu_values])
}

/// Nodes followed by one column per eigenfunction.
pub fn spectrum_csv(s: &SpectrumResult) -> Result<(Vec<String>, String), IoError> {
    let Some(first) = s.eigenfunctions.first() else {
        return Err(IoError::Inconsistent("empty spectrum".into()));
    };
    let mut headers = vec!["x".to_string()];
    headers.extend((0..s.eigenfunctions.len()).map(|j| format!("phi{j}")));
    let mut cols: Vec<&[f64]> = vec![first.grid().nodes()];
    cols.extend(s.eigenfunctions.iter().map(|f| f.values()));
    let h: Vec<&str> = headers.iter().map(String::as_str).collect();
    Ok((headers.clone(), csv_string(&h, &cols)?))
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| IoError::file(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| IoError::file(path, e))
}

/// Writes `<stem>.csv` and its `<stem>.gp` stub; returns both paths.
pub fn write_csv_with_plot(dir: &Path, stem: &str, headers: &[&str], csv: &str) -> Result<[PathBuf; 2], IoError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let gp_path = dir.join(format!("{stem}.gp"));
    write_text(&csv_path, csv)?;
    write_text(&gp_path, &plot_stub(&format!("{stem}.csv"), headers))?;
    Ok([csv_path, gp_path])
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, IoError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(IoError::Parse { line: i + 1, message: format!("expected key = value, got {line:?}") });
        };
        let key = k.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(IoError::Parse { line: i + 1, message: format!("bad key {key:?}") });
        }
        let key = key.replace('-', "_");
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(IoError::Parse { line: i + 1, message: format!("duplicate key {key:?}") });
        }
    }
    Ok(out)
}

/// Finite floats separated by commas.
pub fn parse_list(text: &str) -> Result<Vec<f64>, IoError> {
    text.split(',')
        .map(|item| {
            let t = item.trim();
            match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(IoError::ListEntry(t.to_string())),
            }
        })
        .collect()
}

/// Exact identity of a cached state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub m: usize,
    eps_bits: u64,
    x_max_bits: u64,
    pub n: usize,
    pub version: String,
}

impl CacheKey {
    pub fn new(m: usize, eps: f64, x_max: f64, n: usize) -> Self {
        Self { m, eps_bits: eps.to_bits(), x_max_bits: x_max.to_bits(), n, version: code_version_hash() }
    }

    pub fn for_state(s: &StationaryState) -> Self {
        Self::new(s.m, s.eps, s.grid().x_max(), s.grid().n())
    }

    pub fn eps(&self) -> f64 {
        f64::from_bits(self.eps_bits)
    }

    pub fn x_max(&self) -> f64 {
        f64::from_bits(self.x_max_bits)
    }

    pub fn file_name(&self) -> String {
        format!("state_m{}_e{:016x}_x{:016x}_n{}_{}.json", self.m, self.eps_bits, self.x_max_bits, self.n, self.version)
    }

    fn matches(&self, r: &StateRecord) -> bool {
        r.m == self.m
            && r.eps.to_bits() == self.eps_bits
            && r.x_max.to_bits() == self.x_max_bits
            && r.n == self.n
            && r.code_version == self.version
    }
}

/// Directory of state records guarded by an advisory lock file.
#[derive(Clone, Debug)]
pub struct StateCache {
    dir: PathBuf,
}

impl StateCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, IoError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| IoError::file(&dir, e))?;
        Ok(Self { dir })
    }

    /// `$TFX_CACHE_DIR` if set and non-empty, else `default`.
    pub fn from_env(default: &Path) -> Result<Self, IoError> {
        Self::new(Self::resolve_dir(std::env::var_os(CACHE_DIR_ENV), default))
    }

    pub fn resolve_dir(env: Option<OsString>, default: &Path) -> PathBuf {
        match env {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => default.to_path_buf(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    fn lock(&self, exclusive: bool) -> Result<File, IoError> {
        let path = self.dir.join(".lock");
        let f = OpenOptions::new().create(true).truncate(false).write(true).open(&path).map_err(|e| IoError::file(&path, e))?;
        let locked = if exclusive { f.lock() } else { f.lock_shared() };
        locked.map_err(|e| IoError::file(&path, e))?;
        Ok(f)
    }

    /// A hit needs an exact key match and a residual at or below `tol`.
    pub fn load(&self, key: &CacheKey, tol: f64) -> Result<Option<StationaryState>, IoError> {
        let path = self.path_for(key);
        let _guard = self.lock(false)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(IoError::file(&path, e)),
        };
        let record = StateRecord::from_json(&text)?;
        if !key.matches(&record) {
            log::warn!("cache file {} does not match its key; ignoring", path.display());
            return Ok(None);
        }
        record.into_state(tol).map(Some)
    }

    pub fn store(&self, state: &StationaryState) -> Result<PathBuf, IoError> {
        let key = CacheKey::for_state(state);
        let path = self.path_for(&key);
        let tmp = path.with_extension("json.tmp");
        let _guard = self.lock(true)?;
        let mut f = File::create(&tmp).map_err(|e| IoError::file(&tmp, e))?;
        f.write_all(StateRecord::from_state(state).to_json().as_bytes()).map_err(|e| IoError::file(&tmp, e))?;
        f.sync_all().map_err(|e| IoError::file(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| IoError::file(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpe::{solve_excited, solve_ground, SolverOptions};
    use proptest::prelude::*;

    fn ground() -> StationaryState {
        let g = make_grid(2.0, 321).unwrap();
        solve_ground(0.1, &g, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn record_round_trip_is_exact() {
        let s = ground();
        let json = StateRecord::from_state(&s).to_json();
        let back = StateRecord::from_json(&json).unwrap().into_state(1e-10).unwrap();
        assert_eq!(back, s);
        assert!(back.values().iter().zip(s.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(StateRecord::from_state(&back).to_json(), json);
        assert!(json.contains("\"schema\": \"tfx-state-v1\""));
    }

    #[test]
    fn odd_state_round_trip() {
        let g = make_grid(2.0, 321).unwrap();
        let s = solve_excited(0.1, 1, &g, &[0.0], &SolverOptions::default()).unwrap();
        let back = StateRecord::from_json(&StateRecord::from_state(&s).to_json()).unwrap().into_state(1e-10).unwrap();
        assert_eq!(back.zeros, s.zeros);
        assert_eq!(back.field.parity(), Parity::Odd);
    }

    #[test]
    fn record_validation() {
        let s = ground();
        let mut r = StateRecord::from_state(&s);
        r.schema = "tfx-state-v0".into();
        assert!(matches!(StateRecord::from_json(&r.to_json()), Err(IoError::Schema { .. })));
        let mut r = StateRecord::from_state(&s);
        r.values.pop();
        assert!(matches!(StateRecord::from_json(&r.to_json()), Err(IoError::Inconsistent(_))));
        let mut r = StateRecord::from_state(&s);
        r.values[100] += 1e-3;
        assert!(matches!(r.into_state(1e-10), Err(IoError::Verification { .. })));
        assert!(matches!(StateRecord::from_json("{"), Err(IoError::Json(_))));
    }

    #[test]
    fn soliton_config_parsing() {
        let c = parse_soliton_config(r#"{"eps":0.01,"positions":[-0.0343,0.0343],"source":"manual"}"#).unwrap();
        assert_eq!(c.m(), 2);
        assert!(c.bounds.ok());
        assert!(parse_soliton_config(r#"{"eps":0.01,"positions":[0.1,-0.1],"source":"manual"}"#).is_err());
        assert!(parse_soliton_config(r#"{"eps":2,"positions":[],"source":"manual"}"#).is_err());
    }

    #[test]
    fn csv_format_and_parse() {
        let csv = csv_string(&["x", "y"], &[&[0.01, -2.0], &[1.0 / 3.0, 0.0]]).unwrap();
        assert_eq!(csv, "x,y\n1.0000000000000000e-2,3.3333333333333331e-1\n-2.0000000000000000e0,0.0000000000000000e0\n");
        assert!(!csv.contains('\r'));
        let t = parse_csv(&csv).unwrap();
        assert_eq!(t.headers, ["x", "y"]);
        assert_eq!(t.column("y").unwrap(), [1.0 / 3.0, 0.0]);
        assert!(csv_string(&["x"], &[&[1.0], &[2.0]]).is_err());
        assert!(parse_csv("a,b\n1,2,3\n").is_err());
        assert!(parse_csv("").is_err());
    }

    #[test]
    fn state_csv_is_deterministic() {
        let a = state_csv(&ground(), None).unwrap();
        let b = state_csv(&ground(), None).unwrap();
        assert_eq!(a, b);
        let t = parse_csv(&a).unwrap();
        assert_eq!(t.rows.len(), 321);
    }

    #[test]
    fn plot_stub_names_columns() {
        let s = plot_stub("ground.csv", &["x", "u", "tf"]);
        assert!(s.contains("'ground.csv' using 1:2") && s.contains("using 1:3"));
        assert!(s.contains("set xlabel 'x'"));
    }

    #[test]
    fn config_parser() {
        let c = parse_config("# sweep\neps = 0.05,0.02\nx-max=2 # trailing\n\nm=1\n").unwrap();
        assert_eq!(c["eps"], "0.05,0.02");
        assert_eq!(c["x_max"], "2");
        assert_eq!(c.len(), 3);
        assert!(matches!(parse_config("eps"), Err(IoError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("a=1\na=2"), Err(IoError::Parse { line: 2, .. })));
        assert!(parse_config(" = 3").is_err());
        assert!(parse_config("a b = 3").is_err());
    }

    #[test]
    fn list_parser() {
        assert_eq!(parse_list("0.05, 0.02,1e-2").unwrap(), [0.05, 0.02, 0.01]);
        assert!(parse_list("").is_err());
        assert!(parse_list("0.1,,0.2").is_err());
        assert!(parse_list("nan").is_err());
        assert!(parse_list("inf").is_err());
    }

    #[test]
    fn cache_round_trip_and_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = StateCache::new(dir.path().join("c")).unwrap();
        let s = ground();
        let key = CacheKey::for_state(&s);
        assert_eq!(cache.load(&key, 1e-10).unwrap(), None);
        let path = cache.store(&s).unwrap();
        assert!(path.exists());
        assert_eq!(cache.load(&key, 1e-10).unwrap(), Some(s.clone()));
        assert_eq!(cache.load(&CacheKey::new(0, 0.1, 2.0, 323), 1e-10).unwrap(), None);
        assert_eq!(cache.load(&CacheKey::new(0, 0.1 + 1e-17, 2.0, 321), 1e-10).unwrap(), None);
        assert_eq!(cache.load(&CacheKey::new(0, 0.1000000000000001, 2.0, 321), 1e-10).unwrap(), None);
        // Tampered files fail verification instead of being reused.
        let mut r = StateRecord::from_state(&s);
        r.values[50] *= 1.01;
        fs::write(&path, r.to_json()).unwrap();
        assert!(matches!(cache.load(&key, 1e-10), Err(IoError::Verification { .. })));
    }

    #[test]
    fn cache_dir_resolution() {
        let d = Path::new("/tmp/default");
        assert_eq!(StateCache::resolve_dir(None, d), d);
        assert_eq!(StateCache::resolve_dir(Some("".into()), d), d);
        assert_eq!(StateCache::resolve_dir(Some("/x/y".into()), d), Path::new("/x/y"));
    }

    #[test]
    fn version_hash_is_stable() {
        let h = code_version_hash();
        assert_eq!(h.len(), 16);
        assert_eq!(h, code_version_hash());
        assert!(CacheKey::new(1, 0.02, 2.0, 1601).file_name().ends_with(&format!("_{h}.json")));
    }

    proptest! {
        #[test]
        fn list_round_trip(v in proptest::collection::vec(-1e6f64..1e6, 1..8)) {
            let text = v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
            prop_assert_eq!(parse_list(&text).unwrap(), v);
        }

        #[test]
        fn csv_round_trip(v in proptest::collection::vec(-1e300f64..1e300, 1..20)) {
            let csv = csv_string(&["a"], &[&v]).unwrap();
            prop_assert_eq!(parse_csv(&csv).unwrap().column("a").unwrap(), v);
        }

        #[test]
        fn config_parser_total(s in "\\PC*") {
            let _ = parse_config(&s);
        }
    }
}
