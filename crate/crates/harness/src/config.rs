use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spce::design::Strategy;
use spce::pce::PceConfig;

/// Design strategies compared by a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyStrategy {
    MaximinLhs,
    MincorrLhs,
    Sobol,
    SeqMaximin,
    SeqDOpt,
    SeqSOpt,
}

impl StudyStrategy {
    pub const ALL: [StudyStrategy; 6] = [
        StudyStrategy::MaximinLhs,
        StudyStrategy::MincorrLhs,
        StudyStrategy::Sobol,
        StudyStrategy::SeqMaximin,
        StudyStrategy::SeqDOpt,
        StudyStrategy::SeqSOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyStrategy::MaximinLhs => "maximin_lhs",
            StudyStrategy::MincorrLhs => "mincorr_lhs",
            StudyStrategy::Sobol => "sobol",
            StudyStrategy::SeqMaximin => "seq_maximin",
            StudyStrategy::SeqDOpt => "seq_d_opt",
            StudyStrategy::SeqSOpt => "seq_s_opt",
        }
    }

    pub fn sequential(self) -> Option<Strategy> {
        match self {
            StudyStrategy::SeqMaximin => Some(Strategy::SeqMaximin),
            StudyStrategy::SeqDOpt => Some(Strategy::SeqDOpt),
            StudyStrategy::SeqSOpt => Some(Strategy::SeqSOpt),
            _ => None,
        }
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for StudyStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub init: usize,
    pub add: usize,
    pub max: usize,
}

impl Schedule {
    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![self.init];
        let mut n = self.init;
        while n < self.max && self.add > 0 {
            n = (n + self.add).min(self.max);
            out.push(n);
        }
        out
    }
}

fn default_pool_size() -> usize {
    100_000
}

fn default_lhs_candidates() -> usize {
    5
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub benchmark: String,
    pub strategies: Vec<StudyStrategy>,
    pub schedule: Schedule,
    /// Sizes of the one-shot designs; the schedule sizes when absent.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    pub pce: PceConfig,
    pub replications: usize,
    pub n_val: usize,
    pub seed: u64,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_lhs_candidates")]
    pub lhs_candidates: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Seed of the validation sample; the study seed when absent.
    #[serde(default)]
    pub validation_seed: Option<u64>,
    /// Records elapsed seconds; off keeps `results.csv` reproducible.
    #[serde(default)]
    pub record_timing: bool,
    /// Caches the validation set under the output directory.
    #[serde(default = "default_true")]
    pub cache_validation: bool,
    #[serde(default = "default_true")]
    pub sparse_d_basis: bool,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.replications >= 1, "replications must be at least 1");
        anyhow::ensure!(!self.strategies.is_empty(), "no strategies given");
        anyhow::ensure!(self.n_val >= 2, "validation set needs at least 2 points");
        let s = self.schedule;
        anyhow::ensure!(s.init >= 2, "initial design needs at least 2 points");
        anyhow::ensure!(s.max >= s.init, "schedule max {} is below init {}", s.max, s.init);
        anyhow::ensure!(s.add > 0 || s.max == s.init, "schedule add must be positive");
        anyhow::ensure!(
            self.pce.degree_min <= self.pce.degree_max,
            "empty degree range {}..{}",
            self.pce.degree_min,
            self.pce.degree_max
        );
        if let Some(sizes) = &self.sizes {
            anyhow::ensure!(sizes.iter().all(|&n| n >= 2), "design sizes must be at least 2");
        }
        spce::benchmarks::benchmark(&self.benchmark).map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(())
    }

    pub fn static_sizes(&self) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(|| self.schedule.sizes())
    }

    pub fn validation_seed(&self) -> u64 {
        self.validation_seed.unwrap_or(self.seed)
    }

    /// Desk-scale settings for each registered benchmark.
    pub fn preset(benchmark: &str) -> anyhow::Result<Self> {
        let (schedule, pce) = match benchmark {
            "ishigami" => (
                Schedule {
                    init: 40,
                    add: 20,
                    max: 160,
                },
                PceConfig::new(3, 20, 1.0),
            ),
            "sobol_g" => (
                Schedule {
                    init: 100,
                    add: 50,
                    max: 400,
                },
                PceConfig::new(1, 30, 0.5),
            ),
            "truss" => (
                Schedule {
                    init: 100,
                    add: 50,
                    max: 400,
                },
                PceConfig::new(3, 20, 1.0),
            ),
            "diffusion_1d" => (
                Schedule {
                    init: 100,
                    add: 20,
                    max: 300,
                },
                PceConfig::new(1, 4, 0.5),
            ),
            other => anyhow::bail!("no preset for benchmark '{other}'"),
        };
        Ok(Self {
            benchmark: benchmark.to_string(),
            strategies: StudyStrategy::ALL.to_vec(),
            schedule,
            sizes: None,
            pce,
            replications: 20,
            n_val: 100_000,
            seed: 1,
            pool_size: default_pool_size(),
            lhs_candidates: default_lhs_candidates(),
            output_dir: default_output(),
            validation_seed: None,
            record_timing: false,
            cache_validation: true,
            sparse_d_basis: true,
        })
    }
}

/// Seed of one design: mixes the study seed, replication, size and strategy.
pub fn design_seed(seed: u64, replication: usize, size: usize, strategy: StudyStrategy) -> u64 {
    let mut z = seed
        ^ (replication as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (size as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ strategy.tag().wrapping_mul(0x94D0_49BB_1331_11EB);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
