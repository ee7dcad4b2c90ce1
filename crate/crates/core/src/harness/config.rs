use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayesnet::{Criterion, ScoreSpec, DEFAULT_BINS, DEFAULT_MAX_PARENTS, DEFAULT_PRIOR_COUNT, DEFAULT_TABU_ITERS, DEFAULT_TENURE};
use crate::clustering::{KSelection, DEFAULT_K_MAX};
use crate::ensemble::DEFAULT_THRESHOLD;
use crate::experts::TrainSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchAlgo {
    Hill,
    Tabu,
}

/// Score family named by a search method; `Bic` is resolved to a concrete
/// penalty through [`BicVariant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodScore {
    LogLik,
    Aic,
    Bic,
}

/// One of the six `{hill, tabu} × {loglik, aic, bic}` structure-search
/// variants, written `hill-bic`, `tabu-aic`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SearchMethod {
    pub algo: SearchAlgo,
    pub score: MethodScore,
}

impl SearchMethod {
    pub const ALL: [SearchMethod; 6] = [
        SearchMethod { algo: SearchAlgo::Hill, score: MethodScore::LogLik },
        SearchMethod { algo: SearchAlgo::Hill, score: MethodScore::Aic },
        SearchMethod { algo: SearchAlgo::Hill, score: MethodScore::Bic },
        SearchMethod { algo: SearchAlgo::Tabu, score: MethodScore::LogLik },
        SearchMethod { algo: SearchAlgo::Tabu, score: MethodScore::Aic },
        SearchMethod { algo: SearchAlgo::Tabu, score: MethodScore::Bic },
    ];

    pub fn criterion(self, bic: BicVariant) -> Criterion {
        match (self.score, bic) {
            (MethodScore::LogLik, _) => Criterion::LogLik,
            (MethodScore::Aic, _) => Criterion::Aic,
            (MethodScore::Bic, BicVariant::Nodes) => Criterion::BicNodes,
            (MethodScore::Bic, BicVariant::N) => Criterion::BicN,
        }
    }
}

impl Default for SearchMethod {
    fn default() -> Self {
        SearchMethod { algo: SearchAlgo::Hill, score: MethodScore::Bic }
    }
}

impl fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let algo = match self.algo {
            SearchAlgo::Hill => "hill",
            SearchAlgo::Tabu => "tabu",
        };
        let score = match self.score {
            MethodScore::LogLik => "loglik",
            MethodScore::Aic => "aic",
            MethodScore::Bic => "bic",
        };
        write!(f, "{algo}-{score}")
    }
}

impl FromStr for SearchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown search method {s:?}; expected {{hill,tabu}}-{{loglik,aic,bic}}"));
        let (algo, score) = s.trim().split_once('-').ok_or_else(bad)?;
        let algo = match algo {
            "hill" => SearchAlgo::Hill,
            "tabu" => SearchAlgo::Tabu,
            _ => return Err(bad()),
        };
        let score = match score {
            "loglik" => MethodScore::LogLik,
            "aic" => MethodScore::Aic,
            "bic" => MethodScore::Bic,
            _ => return Err(bad()),
        };
        Ok(SearchMethod { algo, score })
    }
}

impl TryFrom<String> for SearchMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SearchMethod> for String {
    fn from(m: SearchMethod) -> String {
        m.to_string()
    }
}

/// Which penalty constant a `bic` method uses: `ln(node count)` or `ln(rows)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BicVariant {
    #[default]
    Nodes,
    N,
}

/// Parse `6`, `dynamic`, or `dynamic:2..10`.
pub fn parse_k(s: &str) -> Result<KSelection> {
    let s = s.trim();
    let k = if s == "dynamic" {
        KSelection::dynamic()
    } else if let Some(range) = s.strip_prefix("dynamic:") {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| Error::Config(format!("bad dynamic K range {range:?}; expected MIN..MAX")))?;
        let num = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad K bound {v:?}")));
        KSelection::Dynamic { k_min: num(lo)?, k_max: num(hi)? }
    } else {
        let k = s
            .parse()
            .map_err(|_| Error::Config(format!("K must be an integer or \"dynamic\", got {s:?}")))?;
        KSelection::Fixed { k }
    };
    k.validate()?;
    Ok(k)
}

pub fn format_k(k: &KSelection) -> String {
    match *k {
        KSelection::Fixed { k } => k.to_string(),
        KSelection::Dynamic { k_min: 2, k_max: DEFAULT_K_MAX } => "dynamic".into(),
        KSelection::Dynamic { k_min, k_max } => format!("dynamic:{k_min}..{k_max}"),
    }
}

mod k_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::clustering::KSelection;

    pub fn serialize<S: Serializer>(k: &KSelection, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_k(k))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<KSelection, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(usize),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) => super::parse_k(&k.to_string()),
            Raw::Str(s) => super::parse_k(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Everything that determines one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "k_string")]
    pub k: KSelection,
    pub method: SearchMethod,
    pub bic_variant: BicVariant,
    pub max_parents: usize,
    pub tabu_tenure: usize,
    pub tabu_iters: usize,
    pub bins: usize,
    pub threshold: f64,
    pub prior_count: f64,
    /// Expert training settings; the seed is replaced per trial and expert.
    pub expert: TrainSpec,
    pub trials: usize,
    /// Trial `t` runs with seed `seed + t`.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: KSelection::Fixed { k: 6 },
            method: SearchMethod::default(),
            bic_variant: BicVariant::default(),
            max_parents: DEFAULT_MAX_PARENTS,
            tabu_tenure: DEFAULT_TENURE,
            tabu_iters: DEFAULT_TABU_ITERS,
            bins: DEFAULT_BINS,
            threshold: DEFAULT_THRESHOLD,
            prior_count: DEFAULT_PRIOR_COUNT,
            expert: TrainSpec::default(),
            trials: 100,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.k.validate()?;
        self.expert.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.bins < 2 {
            return Err(Error::Config(format!("bins must be at least 2, got {}", self.bins)));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must be in [0, 1), got {}", self.threshold)));
        }
        if !(self.prior_count > 0.0) {
            return Err(Error::Config(format!("prior count must be positive, got {}", self.prior_count)));
        }
        if self.max_parents == 0 {
            return Err(Error::Config("max parents must be at least 1".into()));
        }
        if self.method.algo == SearchAlgo::Tabu && self.tabu_tenure == 0 {
            return Err(Error::Config("tabu tenure must be at least 1".into()));
        }
        Ok(())
    }

    pub fn score_spec(&self) -> ScoreSpec {
        ScoreSpec { criterion: self.method.criterion(self.bic_variant), max_parents: self.max_parents }
    }

    /// Short label used in reports, e.g. `hill-bic K=6`.
    pub fn label(&self) -> String {
        format!("{} {}", self.method, self.k.label())
    }
}
