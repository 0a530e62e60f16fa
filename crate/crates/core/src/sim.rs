//! Synthetic selection data and the Monte Carlo replication harness.
//!
//! Covariates are `w = (1, w₁, w₂)` with `w₁, w₂ ~ N(0, 1)` and `x = (1, w₁)`,
//! so `w₂` is the excluded instrument.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{summarize, FitReport};
use crate::model::{FamilyParams, ModelFamily, PriorSpec, SelParams, SelectionData};
use crate::nuts::{chain_seed, run_chains, SamplerConfig};
use crate::smn::{sample_bivariate_error, ErrorFamily, SelectionScale};

pub const DEFAULT_SLASH_NU: f64 = 1.43;
pub const MIN_SIM_N: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub error_family: ErrorFamily,
    /// Regression and scale parameters; `extra` is ignored in favour of
    /// `error_family`.
    pub true_params: SelParams,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 400,
            error_family: ErrorFamily::Normal,
            true_params: SelParams {
                beta: vec![1.0, 0.5],
                gamma: vec![1.0, 0.3, -0.5],
                sigma2: 3.0,
                rho: 0.7,
                extra: FamilyParams::Normal,
            },
            replicates: 10,
            seed: 2024,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_SIM_N {
            return Err(Error::Data(format!("n = {} is below {MIN_SIM_N}", self.n)));
        }
        if self.true_params.beta.len() != 2 || self.true_params.gamma.len() != 3 {
            return Err(Error::Dimension("simulation design needs 2 outcome and 3 selection coefficients".into()));
        }
        self.error_family.validate()?;
        SelectionScale::new(self.true_params.sigma2, self.true_params.rho)?;
        Ok(())
    }

    /// Generating value of a named parameter, when the fitted family has it.
    pub fn truth(&self, name: &str) -> Option<f64> {
        let t = &self.true_params;
        let index = |prefix: &str| name.strip_prefix(prefix).and_then(|k| k.parse::<usize>().ok());
        match (name, self.error_family) {
            ("sigma2", _) => Some(t.sigma2),
            ("rho", _) => Some(t.rho),
            ("nu", ErrorFamily::StudentT { nu }) => Some(nu),
            ("nu1", ErrorFamily::ContaminatedNormal { nu1, .. }) => Some(nu1),
            ("nu2", ErrorFamily::ContaminatedNormal { nu2, .. }) => Some(nu2),
            _ => {
                if let Some(j) = index("beta") {
                    t.beta.get(j.wrapping_sub(1)).copied()
                } else if let Some(k) = index("gamma") {
                    t.gamma.get(k.wrapping_sub(1)).copied()
                } else {
                    None
                }
            }
        }
    }
}

/// A generated sample with its latent quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub v1: Vec<Option<f64>>,
    pub c: Vec<bool>,
    /// Row-major `n × 2`.
    pub x: Vec<f64>,
    /// Row-major `n × 3`.
    pub w: Vec<f64>,
    /// Latent mixing value `U` of each unit's error.
    pub mixing: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

impl SimDataset {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn missing_fraction(&self) -> f64 {
        self.c.iter().filter(|&&s| !s).count() as f64 / self.n() as f64
    }

    /// Fails when the sample has no censored (or no observed) unit.
    pub fn to_selection_data(&self) -> Result<SelectionData> {
        SelectionData::new(self.v1.clone(), self.c.clone(), self.x.clone(), 2, self.w.clone(), 3)
    }
}

/// Draws one dataset from the configured design.
pub fn generate_dataset<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<SimDataset> {
    cfg.validate()?;
    let t = &cfg.true_params;
    let scale = SelectionScale::new(t.sigma2, t.rho)?;
    let n = cfg.n;
    let mut out = SimDataset {
        v1: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        x: Vec::with_capacity(2 * n),
        w: Vec::with_capacity(3 * n),
        mixing: Vec::with_capacity(n),
        e1: Vec::with_capacity(n),
        e2: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let w1: f64 = rng.sample(StandardNormal);
        let w2: f64 = rng.sample(StandardNormal);
        let err = sample_bivariate_error(&cfg.error_family, scale, rng);
        let y2 = t.gamma[0] + t.gamma[1] * w1 + t.gamma[2] * w2 + err.e2;
        let selected = y2 > 0.0;
        out.v1.push(selected.then(|| t.beta[0] + t.beta[1] * w1 + err.e1));
        out.c.push(selected);
        out.x.extend([1.0, w1]);
        out.w.extend([1.0, w1, w2]);
        out.mixing.push(err.mixing);
        out.e1.push(err.e1);
        out.e2.push(err.e2);
    }
    Ok(out)
}

/// Seed of replicate `r` in a study seeded with `seed`.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    chain_seed(seed ^ 0x5EED_0F_5EED, r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub missing_fraction: f64,
    /// One entry per requested model, `None` when that fit failed.
    pub fits: Vec<Option<FitReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamAggregate {
    pub name: String,
    pub truth: Option<f64>,
    /// Mean over replicates of the posterior mean.
    pub me: f64,
    /// Mean over replicates of the posterior SD.
    pub sd: f64,
    pub hpd_lower: f64,
    pub hpd_upper: f64,
    /// Fraction of replicates whose HPD interval covers the truth.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAggregate {
    pub model: String,
    pub family: ModelFamily,
    pub fits: usize,
    pub params: Vec<ParamAggregate>,
    pub mean_looic: Option<f64>,
    pub mean_waic: Option<f64>,
    pub mean_lpml: Option<f64>,
    pub mean_accept_stat: f64,
}

/// Percentage of replicates in which each model wins one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub criterion: String,
    pub models: Vec<String>,
    pub percentages: Vec<f64>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub config: SimConfig,
    pub sampler: SamplerConfig,
    pub models: Vec<ModelAggregate>,
    pub selection: Vec<SelectionRow>,
    pub failures: usize,
    pub replicates: Vec<ReplicateRecord>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, k) = values.fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    (k > 0).then(|| s / k as f64)
}

fn aggregate(cfg: &SimConfig, family: ModelFamily, reports: &[&FitReport]) -> ModelAggregate {
    let names = reports.first().map(|r| r.params.clone()).unwrap_or_default();
    let params = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = || reports.iter().map(move |r| &r.summaries[j]);
            let truth = cfg.truth(name);
            ParamAggregate {
                name: name.clone(),
                truth,
                me: mean_of(col().map(|s| s.mean)).unwrap_or(f64::NAN),
                sd: mean_of(col().map(|s| s.sd)).unwrap_or(f64::NAN),
                hpd_lower: mean_of(col().map(|s| s.hpd_lower)).unwrap_or(f64::NAN),
                hpd_upper: mean_of(col().map(|s| s.hpd_upper)).unwrap_or(f64::NAN),
                coverage: truth.and_then(|t| {
                    mean_of(col().map(|s| f64::from(u8::from(s.hpd_lower <= t && t <= s.hpd_upper))))
                }),
            }
        })
        .collect();
    let crit = |f: fn(&crate::inference::Criteria) -> f64| {
        mean_of(reports.iter().filter_map(|r| r.criteria.as_ref().map(f)))
    };
    ModelAggregate {
        model: family.model_name().to_string(),
        family,
        fits: reports.len(),
        params,
        mean_looic: crit(|c| c.looic),
        mean_waic: crit(|c| c.waic),
        mean_lpml: crit(|c| c.lpml),
        mean_accept_stat: mean_of(reports.iter().map(|r| r.diagnostics.mean_accept_stat)).unwrap_or(f64::NAN),
    }
}

/// Index of the winning model per criterion: lowest LOOIC, lowest WAIC,
/// highest LPML. `None` unless every model produced criteria.
pub fn winners(fits: &[Option<FitReport>]) -> Option<[usize; 3]> {
    let crits: Vec<_> = fits.iter().map(|f| f.as_ref().and_then(|r| r.criteria.clone())).collect::<Option<_>>()?;
    let argmin = |key: fn(&crate::inference::Criteria) -> f64, sign: f64| {
        (0..crits.len()).min_by(|&a, &b| (sign * key(&crits[a])).total_cmp(&(sign * key(&crits[b])))).unwrap()
    };
    Some([argmin(|c| c.looic, 1.0), argmin(|c| c.waic, 1.0), argmin(|c| c.lpml, -1.0)])
}

fn fit_replicate(
    cfg: &SimConfig,
    models: &[ModelFamily],
    sampler: &SamplerConfig,
    prior: &PriorSpec,
    r: usize,
) -> ReplicateRecord {
    let seed = replicate_seed(cfg.seed, r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generated = generate_dataset(cfg, &mut rng);
    let missing_fraction = generated.as_ref().map_or(f64::NAN, SimDataset::missing_fraction);
    let data = generated.and_then(|d| d.to_selection_data());
    let fits = models
        .iter()
        .map(|&family| {
            let data = data.as_ref().map_err(|e| Error::Data(e.to_string()))?;
            let sc = SamplerConfig { seed, ..*sampler };
            let draws = run_chains(data, prior, family, &sc, None)?;
            summarize(&draws, data)
        })
        .map(|res: Result<FitReport>| {
            res.map_err(|e| log::warn!("replicate {r}: fit failed: {e}")).ok()
        })
        .collect();
    ReplicateRecord { replicate: r, seed, missing_fraction, fits }
}

/// Generates `cfg.replicates` datasets, fits every model to each and
/// aggregates estimates, criteria and winner percentages. Failed fits are
/// logged, counted and left out of the aggregates.
pub fn run_replication(
    cfg: &SimConfig,
    models: &[ModelFamily],
    sampler: &SamplerConfig,
    prior: &PriorSpec,
) -> Result<ReplicationReport> {
    cfg.validate()?;
    sampler.validate()?;
    if cfg.replicates == 0 {
        return Err(Error::Data("need at least one replicate".into()));
    }
    if models.is_empty() {
        return Err(Error::Data("no models requested".into()));
    }
    let records: Vec<ReplicateRecord> =
        (0..cfg.replicates).into_par_iter().map(|r| fit_replicate(cfg, models, sampler, prior, r)).collect();
    let failures = records.iter().flat_map(|r| &r.fits).filter(|f| f.is_none()).count();

    let aggregates = models
        .iter()
        .enumerate()
        .map(|(m, &family)| {
            let reports: Vec<&FitReport> = records.iter().filter_map(|r| r.fits[m].as_ref()).collect();
            aggregate(cfg, family, &reports)
        })
        .collect();

    let mut tallies = [vec![0usize; models.len()], vec![0; models.len()], vec![0; models.len()]];
    let mut complete = 0;
    for rec in &records {
        if let Some(w) = winners(&rec.fits) {
            complete += 1;
            for (row, &idx) in tallies.iter_mut().zip(&w) {
                row[idx] += 1;
            }
        }
    }
    let names: Vec<String> = models.iter().map(|f| f.model_name().to_string()).collect();
    let selection = ["LOOIC", "WAIC", "CPO (LPML)"]
        .iter()
        .zip(&tallies)
        .map(|(crit, counts)| SelectionRow {
            criterion: crit.to_string(),
            models: names.clone(),
            percentages: counts
                .iter()
                .map(|&c| if complete == 0 { 0.0 } else { 100.0 * c as f64 / complete as f64 })
                .collect(),
            replicates: complete,
        })
        .collect();

    Ok(ReplicationReport {
        config: cfg.clone(),
        sampler: *sampler,
        models: aggregates,
        selection,
        failures,
        replicates: records,
    })
}

impl ReplicationReport {
    /// One row per model × parameter.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "parameter", "truth", "me", "sd", "hpd_lower", "hpd_upper", "coverage", "fits"])?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x}"));
        for m in &self.models {
            for p in &m.params {
                w.write_record([
                    m.model.clone(),
                    p.name.clone(),
                    opt(p.truth),
                    format!("{}", p.me),
                    format!("{}", p.sd),
                    format!("{}", p.hpd_lower),
                    format!("{}", p.hpd_upper),
                    opt(p.coverage),
                    m.fits.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn defaults_match_the_design() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.true_params.beta, vec![1.0, 0.5]);
        assert_eq!(cfg.true_params.gamma, vec![1.0, 0.3, -0.5]);
        assert_eq!((cfg.true_params.sigma2, cfg.true_params.rho), (3.0, 0.7));
        assert_eq!(cfg.truth("gamma3"), Some(-0.5));
        assert_eq!(cfg.truth("nu"), None);
    }

    #[test]
    fn small_n_is_rejected() {
        let cfg = SimConfig { n: 10, ..SimConfig::default() };
        assert!(generate_dataset(&cfg, &mut rng(1)).is_err());
    }

    #[test]
    fn design_has_exclusion_restriction() {
        let d = generate_dataset(&SimConfig { n: 100, ..SimConfig::default() }, &mut rng(2)).unwrap();
        for i in 0..d.n() {
            assert_eq!(d.x[2 * i], 1.0);
            assert_eq!(d.w[3 * i], 1.0);
            assert_eq!(d.x[2 * i + 1], d.w[3 * i + 1]);
            assert_eq!(d.v1[i].is_some(), d.c[i]);
        }
    }

    #[test]
    fn strong_selection_censors_nothing() {
        let mut cfg = SimConfig { n: 200, ..SimConfig::default() };
        cfg.true_params.gamma[0] = 20.0;
        let d = generate_dataset(&cfg, &mut rng(3)).unwrap();
        assert_eq!(d.missing_fraction(), 0.0);
        assert!(d.to_selection_data().is_err());
    }

    #[test]
    fn same_seed_same_data() {
        let cfg = SimConfig { n: 80, ..SimConfig::default() };
        assert_eq!(generate_dataset(&cfg, &mut rng(4)).unwrap(), generate_dataset(&cfg, &mut rng(4)).unwrap());
    }

    #[test]
    fn missing_rates() {
        // normal: P(Y₂ ≤ 0) with Var(wᵀγ + ε₂) = 1 + 0.09 + 0.25
        let cfg = SimConfig { n: 100_000, ..SimConfig::default() };
        let d = generate_dataset(&cfg, &mut rng(5)).unwrap();
        assert!((d.missing_fraction() - 0.20).abs() < 0.02, "{}", d.missing_fraction());
        let var = d.e2.iter().map(|e| e * e).sum::<f64>() / d.n() as f64;
        assert!((var - 1.0).abs() < 0.05);
        let cfg = SimConfig { error_family: ErrorFamily::StudentT { nu: 3.0 }, ..cfg };
        let d = generate_dataset(&cfg, &mut rng(6)).unwrap();
        assert!((d.missing_fraction() - 0.23).abs() < 0.02, "{}", d.missing_fraction());
    }

    #[test]
    fn winners_pick_extremes() {
        assert!(winners(&[None]).is_none());
    }
}
