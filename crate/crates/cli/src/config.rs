//! Scenario configuration: a single JSON file, leaves overridable with
//! `--set dotted.path=value`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use wgspec_core::mesh::{make_disk, make_polygon, make_rectangle, refine_uniform, Mesh, MeshError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub cross_section: CrossSection,
    pub profile: ProfileConfig,
    pub epsilon: f64,
    pub tube: TubeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub bands: BandsConfig,
    pub effective: EffectiveConfig,
    pub certify: CertifyConfig,
    pub asympt: AsymptConfig,
    pub verify: VerifyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            cross_section: CrossSection::default(),
            profile: ProfileConfig::default(),
            epsilon: 1.0,
            tube: TubeConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            bands: BandsConfig::default(),
            effective: EffectiveConfig::default(),
            certify: CertifyConfig::default(),
            asympt: AsymptConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionKind {
    Rectangle,
    Disk,
    Polygon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossSection {
    pub kind: SectionKind,
    /// Kind-specific: `{a, b}`, `{r}` or `{points}`; filled with defaults on resolution.
    pub params: Value,
    pub h: f64,
    pub refinements: u32,
}

impl Default for CrossSection {
    fn default() -> Self {
        CrossSection { kind: SectionKind::Rectangle, params: Value::Null, h: 1.0 / 32.0, refinements: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RectangleParams {
    #[serde(default = "one")]
    a: f64,
    #[serde(default = "one")]
    b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskParams {
    #[serde(default = "one")]
    r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolygonParams {
    points: Vec<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

impl CrossSection {
    /// Mesh spacing after the requested refinements.
    pub fn effective_h(&self) -> f64 {
        self.h / 2f64.powi(self.refinements as i32)
    }

    fn resolve(&mut self) -> Result<(), String> {
        let p = if self.params.is_null() { Value::Object(Map::new()) } else { self.params.clone() };
        let bad = |e: serde_json::Error| format!("cross_section.params: {e}");
        self.params = match self.kind {
            SectionKind::Rectangle => serde_json::to_value(serde_json::from_value::<RectangleParams>(p).map_err(bad)?),
            SectionKind::Disk => serde_json::to_value(serde_json::from_value::<DiskParams>(p).map_err(bad)?),
            SectionKind::Polygon => serde_json::to_value(serde_json::from_value::<PolygonParams>(p).map_err(bad)?),
        }
        .map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh, MeshError> {
        let mut m = match self.kind {
            SectionKind::Rectangle => {
                let p: RectangleParams = serde_json::from_value(self.params.clone()).expect("resolved params");
                make_rectangle(p.a, p.b, self.h)?
            }
            SectionKind::Disk => {
                let p: DiskParams = serde_json::from_value(self.params.clone()).expect("resolved params");
                make_disk(p.r, self.h)?
            }
            SectionKind::Polygon => {
                let p: PolygonParams = serde_json::from_value(self.params.clone()).expect("resolved params");
                make_polygon(&p.points, self.h)?
            }
        };
        for _ in 0..self.refinements {
            m = refine_uniform(&m);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub fprime: String,
    pub gprime: String,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(rename = "tail_X")]
    pub tail_x: f64,
    pub tail_tol: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            fprime: "1 - 0.8*exp(-x^2)".into(),
            gprime: "0".into(),
            beta1: 1.0,
            beta2: 0.0,
            tail_x: 10.0,
            tail_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TubeConfig {
    #[serde(rename = "L_list")]
    pub l_list: Vec<f64>,
    /// Longitudinal intervals on the smallest `L`; the spacing is kept for
    /// the larger ones. `null` uses the section spacing.
    pub nx: Option<usize>,
}

impl Default for TubeConfig {
    fn default() -> Self {
        TubeConfig { l_list: vec![10.0, 15.0, 20.0], nx: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftPolicy {
    /// Shift-invert at 0.99·threshold for small tubes, separable-preconditioned
    /// block iteration for large ones.
    Auto,
    /// Always shift-invert.
    Sparse,
    /// Always block iteration.
    Block,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub shift_policy: ShiftPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { k: 2, tol: 1e-8, max_iter: 2000, shift_policy: ShiftPolicy::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// `null` writes nothing to disk; the JSON report still goes to stdout.
    pub directory: Option<String>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: Some("wgspec-out".into()), formats: vec![Format::Json, Format::Csv] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    /// `null` uses `{−3, −2.8, …, 3}`.
    pub p_grid: Option<Vec<f64>>,
    pub nbands: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        BandsConfig { p_grid: None, nbands: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffectiveConfig {
    /// Half-width of the potential sampling grid.
    pub x_max: f64,
    pub points: usize,
    /// Half-width of the Dirichlet box for 1D spectra.
    pub box_x: f64,
    pub hx: f64,
    pub epsilons: Vec<f64>,
}

impl Default for EffectiveConfig {
    fn default() -> Self {
        EffectiveConfig { x_max: 20.0, points: 8001, box_x: 10.0, hx: 0.01, epsilons: vec![1.0, 0.5, 0.25, 0.125] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub n_max: usize,
    /// Number of bumps for the disjoint-bump certificate.
    pub n: usize,
    /// Constant of the explicit solution family.
    pub c: f64,
    /// `null` takes `Ã` from the cross-section.
    pub a_tilde: Option<f64>,
    pub x_range: [f64; 2],
    pub x_points: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig { n_max: 64, n: 4, c: -1.0, a_tilde: None, x_range: [-2.0, 2.0], x_points: 401 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptConfig {
    pub w: String,
    pub mu_list: Vec<f64>,
    pub j: usize,
    pub x_max: f64,
}

impl Default for AsymptConfig {
    fn default() -> Self {
        AsymptConfig { w: "-exp(-x^2)".into(), mu_list: vec![1e2, 1e3, 1e4], j: 1, x_max: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyLevel {
    Quick,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub level: VerifyLevel,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { level: VerifyLevel::Quick }
    }
}

/// Sets `path` (dot separated) in `root` to `raw`, read as JSON when it
/// parses and as a string otherwise.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<(), String> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(format!("invalid override path `{path}`"));
    }
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        let Value::Object(map) = node else {
            return Err(format!("override `{path}`: `{}` is not an object", keys[..i].join(".")));
        };
        if i + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("non-empty path")
}

/// Parses, applies overrides, rejects unknown keys and fills defaults.
pub fn load(text: &str, overrides: &[String]) -> Result<Config, String> {
    let mut root: Value = serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    if !root.is_object() {
        return Err("config must be a JSON object".into());
    }
    for o in overrides {
        let (path, raw) = o.split_once('=').ok_or_else(|| format!("override `{o}` is not key=value"))?;
        apply_override(&mut root, path.trim(), raw)?;
    }
    let mut cfg: Config = serde_json::from_value(root).map_err(|e| format!("config: {e}"))?;
    cfg.cross_section.resolve()?;
    cfg.validate()?;
    Ok(cfg)
}

impl Config {
    fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(format!("{name} must be positive (got {v})")) };
        positive("cross_section.h", self.cross_section.h)?;
        positive("epsilon", self.epsilon)?;
        positive("profile.tail_X", self.profile.tail_x)?;
        positive("profile.tail_tol", self.profile.tail_tol)?;
        positive("solver.tol", self.solver.tol)?;
        positive("effective.x_max", self.effective.x_max)?;
        positive("effective.box_x", self.effective.box_x)?;
        positive("effective.hx", self.effective.hx)?;
        positive("asympt.x_max", self.asympt.x_max)?;
        if self.solver.k == 0 || self.solver.max_iter == 0 {
            return Err("solver.k and solver.max_iter must be at least 1".into());
        }
        if self.effective.points < 3 {
            return Err("effective.points must be at least 3".into());
        }
        if self.tube.l_list.iter().any(|&l| !(l > 0.0)) {
            return Err("tube.L_list entries must be positive".into());
        }
        if self.tube.nx.is_some_and(|n| n < 2) {
            return Err("tube.nx must be at least 2".into());
        }
        if self.bands.nbands == 0 {
            return Err("bands.nbands must be at least 1".into());
        }
        if self.certify.n_max == 0 || self.certify.n == 0 || self.certify.x_points < 2 {
            return Err("certify.n_max, certify.n must be positive and certify.x_points at least 2".into());
        }
        if !(self.certify.x_range[0] < self.certify.x_range[1]) {
            return Err("certify.x_range must be increasing".into());
        }
        if self.asympt.j == 0 {
            return Err("asympt.j must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_rectangle_params() {
        let c = load("{}", &[]).unwrap();
        assert_eq!(c.cross_section.params, serde_json::json!({"a": 1.0, "b": 1.0}));
        assert_eq!(c.tube.l_list, vec![10.0, 15.0, 20.0]);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c = load("{}", &["profile.fprime=1 - 0.5*exp(-x^2)".into(), "tube.L_list=[4,6,8]".into()]).unwrap();
        assert_eq!(c.profile.fprime, "1 - 0.5*exp(-x^2)");
        assert_eq!(c.tube.l_list, vec![4.0, 6.0, 8.0]);
        assert!(load(r#"{"tube": {"L": 3}}"#, &[]).unwrap_err().contains("unknown field"));
        assert!(load("{}", &["solver.bogus=1".into()]).is_err());
        assert!(load(r#"{"cross_section": {"kind": "disk", "params": {"a": 1}}}"#, &[]).is_err());
        assert!(load("{}", &["epsilon=0".into()]).is_err());
        assert!(load("{}", &["epsilon.x=1".into()]).is_err());
    }
}
