//! Samplers, reproducible random streams and coverage studies.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bartlett::estimate_bartlett_bootstrap;
use crate::data::{RowMatrix, TwoSampleData};
use crate::eel::{delta_default, inverse_map, MappingSpec};
use crate::error::{ElError, Result};
use crate::oel::SolverOptions;
use crate::regions::{contains, Method};

const COVERAGE_TAG: u64 = 0xC0FE;
const MAPPING_TAG: u64 = 0x3A9;

/// Independent random stream keyed by a seed and a tuple of indices.
///
/// The key is folded into a 256-bit ChaCha seed with SplitMix64, so streams
/// for distinct keys are unrelated and the result never depends on the order
/// in which streams are created.
pub fn substream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed ^ 0x5EED_5EED_5EED_5EED);
    for &k in key {
        state = splitmix64(state ^ splitmix64(k.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One coordinate of a product distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Marginal {
    ChiSquare { df: u32 },
    Exponential { rate: f64 },
    StdNormal,
}

impl Marginal {
    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::ChiSquare { df } => df as f64,
            Marginal::Exponential { rate } => 1.0 / rate,
            Marginal::StdNormal => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::ChiSquare { df } => 2.0 * df as f64,
            Marginal::Exponential { rate } => 1.0 / (rate * rate),
            Marginal::StdNormal => 1.0,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::ChiSquare { df } => Gamma::new(0.5 * df as f64, 2.0)
                .expect("positive shape")
                .sample(rng),
            Marginal::Exponential { rate } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
            Marginal::StdNormal => rng.sample(StandardNormal),
        }
    }
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Marginal::ChiSquare { df } => write!(f, "chisq({df})"),
            Marginal::Exponential { rate } => write!(f, "exp({rate})"),
            Marginal::StdNormal => write!(f, "normal"),
        }
    }
}

impl FromStr for Marginal {
    type Err = ElError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || ElError::Config(format!("unknown marginal distribution '{s}'"));
        if s == "normal" || s == "n(0,1)" {
            return Ok(Marginal::StdNormal);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let arg = rest.strip_suffix(')').ok_or_else(bad)?.trim();
        match name.trim() {
            "chisq" | "chi2" => {
                let df: u32 = arg.parse().map_err(|_| bad())?;
                if df == 0 {
                    return Err(bad());
                }
                Ok(Marginal::ChiSquare { df })
            }
            "exp" => {
                let rate: f64 = arg.parse().map_err(|_| bad())?;
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(bad());
                }
                Ok(Marginal::Exponential { rate })
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Marginal {
    type Error = ElError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Marginal> for String {
    fn from(m: Marginal) -> String {
        m.to_string()
    }
}

/// Distribution with independent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductDist(pub Vec<Marginal>);

impl ProductDist {
    pub fn iid(marginal: Marginal, d: usize) -> Self {
        Self(vec![marginal; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn true_mean(&self) -> Vec<f64> {
        self.0.iter().map(Marginal::mean).collect()
    }
}

/// X ~ (χ²₁, χ²₁), Y ~ N(0, I₂).
pub fn example1() -> (ProductDist, ProductDist) {
    (ProductDist::iid(Marginal::ChiSquare { df: 1 }, 2), ProductDist::iid(Marginal::StdNormal, 2))
}

/// X ~ (χ²₃, χ²₃), Y ~ (Exp(1), Exp(1)).
pub fn example2() -> (ProductDist, ProductDist) {
    (
        ProductDist::iid(Marginal::ChiSquare { df: 3 }, 2),
        ProductDist::iid(Marginal::Exponential { rate: 1.0 }, 2),
    )
}

/// `count × d` independent draws, row by row.
pub fn sample<R: Rng + ?Sized>(dist: &ProductDist, count: usize, rng: &mut R) -> RowMatrix {
    let d = dist.dim();
    let mut values = Vec::with_capacity(count * d);
    for _ in 0..count {
        for marginal in &dist.0 {
            values.push(marginal.draw(rng));
        }
    }
    RowMatrix::new(values, count, d).expect("shape matches")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Oel,
    Eel1,
    Bel,
    Eel2,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [MethodKind::Oel, MethodKind::Eel1, MethodKind::Bel, MethodKind::Eel2];

    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Oel => "oel",
            MethodKind::Eel1 => "eel1",
            MethodKind::Bel => "bel",
            MethodKind::Eel2 => "eel2",
        }
    }

    pub fn needs_eta(&self) -> bool {
        matches!(self, MethodKind::Bel | MethodKind::Eel2)
    }

    /// Concrete method; `eta` and `delta` are ignored where unused.
    pub fn with_params(&self, eta: f64, delta: f64) -> Method {
        match self {
            MethodKind::Oel => Method::Oel,
            MethodKind::Eel1 => Method::Eel1,
            MethodKind::Bel => Method::Bel { eta },
            MethodKind::Eel2 => Method::Eel2 { eta, delta },
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = ElError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oel" => Ok(MethodKind::Oel),
            "eel1" | "eel" => Ok(MethodKind::Eel1),
            "bel" => Ok(MethodKind::Bel),
            "eel2" => Ok(MethodKind::Eel2),
            other => Err(ElError::Config(format!("unknown method '{other}'"))),
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_bootstrap_b() -> usize {
    200
}

fn default_methods() -> Vec<MethodKind> {
    MethodKind::ALL.to_vec()
}

/// Coverage study description; deserialisable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub x_dist: ProductDist,
    pub y_dist: ProductDist,
    pub m_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodKind>,
    #[serde(default = "default_bootstrap_b")]
    pub bootstrap_b: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fixed Bartlett constant; estimated by bootstrap per replicate when absent.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Fixed second-order exponent; `min(m, n)^(-1/2)` per cell when absent.
    #[serde(default)]
    pub delta: Option<f64>,
}

impl StudyConfig {
    pub fn new(x_dist: ProductDist, y_dist: ProductDist, m_grid: Vec<usize>, n_grid: Vec<usize>, reps: usize) -> Self {
        Self {
            x_dist,
            y_dist,
            m_grid,
            n_grid,
            reps,
            alpha: default_alpha(),
            methods: default_methods(),
            bootstrap_b: default_bootstrap_b(),
            seed: 0,
            eta: None,
            delta: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| ElError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `θ₀ = E[Y] − E[X]`.
    pub fn true_theta(&self) -> Vec<f64> {
        self.y_dist.true_mean().iter().zip(self.x_dist.true_mean()).map(|(y, x)| y - x).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.x_dist.dim();
        if d == 0 || self.y_dist.dim() != d {
            return Err(ElError::Config("x_dist and y_dist must have the same positive dimension".into()));
        }
        if self.reps == 0 {
            return Err(ElError::Config("reps must be at least 1".into()));
        }
        if self.m_grid.is_empty() || self.n_grid.is_empty() {
            return Err(ElError::Config("sample-size grids must be nonempty".into()));
        }
        if self.m_grid.iter().chain(&self.n_grid).any(|&k| k <= d) {
            return Err(ElError::Config(format!("every sample size must exceed d = {d}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ElError::Config("alpha must lie in (0, 1)".into()));
        }
        if self.methods.is_empty() {
            return Err(ElError::Config("at least one method is required".into()));
        }
        let needs_eta = self.methods.iter().any(MethodKind::needs_eta);
        if needs_eta && self.eta.is_none() && self.bootstrap_b < crate::bartlett::MIN_REPLICATES {
            return Err(ElError::Config(format!(
                "bootstrap_b must be at least {}",
                crate::bartlett::MIN_REPLICATES
            )));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(ElError::Config("eta must be positive".into()));
            }
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(ElError::Config("delta must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCell {
    pub m: usize,
    pub n: usize,
    pub method: MethodKind,
    pub coverage: f64,
    pub mc_se: f64,
    pub failures: usize,
    pub covered: usize,
    pub valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageTable {
    pub reps: usize,
    pub alpha: f64,
    pub cells: Vec<CoverageCell>,
}

impl CoverageTable {
    pub fn get(&self, m: usize, n: usize, method: MethodKind) -> Option<&CoverageCell> {
        self.cells.iter().find(|c| c.m == m && c.n == n && c.method == method)
    }

    /// Columns `m,n,method,coverage,mc_se,failures`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,method,coverage,mc_se,failures\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{},{},{}\n", c.m, c.n, c.method, c.coverage, c.mc_se, c.failures));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Covered,
    Missed,
    Failed,
}

/// Simulated coverage of every configured method over the `(m, n)` grid.
///
/// Replicate `r` of cell `(m, n)` draws its samples from the stream keyed by
/// `(seed, m, n, r)`, so the table does not depend on thread scheduling. A
/// replicate whose likelihood ratio at `θ₀` is infinite counts as a miss; a
/// replicate whose Bartlett estimate fails counts as a failure for the
/// methods needing it and is excluded from their denominators.
pub fn coverage_study(config: &StudyConfig, opts: &SolverOptions) -> Result<CoverageTable> {
    config.validate()?;
    opts.validate()?;
    let theta0 = config.true_theta();
    let needs_eta = config.methods.iter().any(MethodKind::needs_eta);
    let mut cells = Vec::new();

    for &m in &config.m_grid {
        for &n in &config.n_grid {
            let delta = config.delta.unwrap_or_else(|| delta_default(m, n));
            let outcomes: Vec<Vec<Outcome>> = (0..config.reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = substream(config.seed, &[COVERAGE_TAG, m as u64, n as u64, r as u64]);
                    let x = sample(&config.x_dist, m, &mut rng);
                    let y = sample(&config.y_dist, n, &mut rng);
                    let boot_seed = rng.next_u64();
                    let Ok(data) = TwoSampleData::new(x, y) else {
                        return vec![Outcome::Failed; config.methods.len()];
                    };
                    let eta = match (needs_eta, config.eta) {
                        (false, _) => Ok(0.0),
                        (true, Some(eta)) => Ok(eta),
                        (true, None) => estimate_bartlett_bootstrap(&data, config.bootstrap_b, boot_seed, opts)
                            .map(|est| est.eta),
                    };
                    config
                        .methods
                        .iter()
                        .map(|kind| {
                            let eta = match (&eta, kind.needs_eta()) {
                                (Err(_), true) => return Outcome::Failed,
                                (Ok(eta), _) => *eta,
                                (Err(_), false) => 0.0,
                            };
                            match contains(&data, &theta0, config.alpha, &kind.with_params(eta, delta), opts) {
                                Ok(true) => Outcome::Covered,
                                Ok(false) => Outcome::Missed,
                                Err(_) => Outcome::Failed,
                            }
                        })
                        .collect()
                })
                .collect();

            for (k, &method) in config.methods.iter().enumerate() {
                let covered = outcomes.iter().filter(|o| o[k] == Outcome::Covered).count();
                let failures = outcomes.iter().filter(|o| o[k] == Outcome::Failed).count();
                let valid = config.reps - failures;
                let coverage = if valid > 0 { covered as f64 / valid as f64 } else { f64::NAN };
                let mc_se = (coverage * (1.0 - coverage) / config.reps as f64).sqrt();
                cells.push(CoverageCell { m, n, method, coverage, mc_se, failures, covered, valid });
            }
        }
    }
    Ok(CoverageTable { reps: config.reps, alpha: config.alpha, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingDistanceStudy {
    pub sizes: Vec<usize>,
    pub medians: Vec<f64>,
    /// Least-squares slope of `log median` on `log n`.
    pub slope: f64,
    pub failures: Vec<usize>,
}

/// Median distance between `θ₀` and its first-order inverse image for
/// balanced designs `m = n`.
pub fn mapping_distance_study(
    x_dist: &ProductDist,
    y_dist: &ProductDist,
    sizes: &[usize],
    reps: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<MappingDistanceStudy> {
    let mut config = StudyConfig::new(x_dist.clone(), y_dist.clone(), sizes.to_vec(), sizes.to_vec(), reps);
    config.methods = vec![MethodKind::Eel1];
    config.validate()?;
    if sizes.len() < 3 {
        return Err(ElError::Config("at least three sample sizes are required".into()));
    }
    let theta0 = config.true_theta();
    let spec = MappingSpec::first_order();
    let mut medians = Vec::with_capacity(sizes.len());
    let mut failures = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let distances: Vec<Option<f64>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, &[MAPPING_TAG, n as u64, r as u64]);
                let x = sample(x_dist, n, &mut rng);
                let y = sample(y_dist, n, &mut rng);
                let data = TwoSampleData::new(x, y).ok()?;
                let inv = inverse_map(&data, &theta0, &spec, opts).ok()?;
                Some(inv.theta_prime.iter().zip(&theta0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            })
            .collect();
        let mut ok: Vec<f64> = distances.iter().flatten().copied().collect();
        failures.push(reps - ok.len());
        if ok.is_empty() {
            return Err(ElError::Config(format!("no replicate succeeded at n = {n}")));
        }
        medians.push(median(&mut ok));
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|v| v.ln()).collect();
    Ok(MappingDistanceStudy { sizes: sizes.to_vec(), medians, slope: ols_slope(&xs, &ys), failures })
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
