//! Factorial simulation studies over data-generating conditions and
//! matching methods.

mod metrics;
pub mod study1;
pub mod study2;
pub mod svg;
pub mod tables;

pub use metrics::{metric_bias, metric_coverage, metric_r2, metric_rmse};
pub use study1::{run_study1, CellFailure, Study1Config, Study1Output, Study1Row};
pub use study2::{run_study2, Study2Config, Study2Output, Study2Record, Study2Row};

use crate::datagen::Mechanism;
use crate::distance::{BlendFamily, BlendSpec};
use crate::error::Result;

/// Default donor count.
pub const DEFAULT_K: usize = 5;

/// One data-generating mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub mechanism: Mechanism,
    pub proportion: f64,
    pub skewed: bool,
    pub rho: f64,
}

impl Condition {
    pub fn dist_label(&self) -> &'static str {
        if self.skewed {
            "skewed"
        } else {
            "normal"
        }
    }

    pub fn mis_label(&self) -> String {
        format!("{}%", (self.proportion * 100.0).round())
    }

    /// `MCAR/25%/normal/0` style identifier.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            self.mechanism,
            self.mis_label(),
            self.dist_label(),
            self.rho
        )
    }
}

/// A named matching method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method {
    pub spec: BlendSpec,
}

impl Method {
    pub fn pmm(k: usize) -> Result<Self> {
        Ok(Method {
            spec: BlendSpec::pmm(k)?,
        })
    }

    pub fn ranked(p: f64, k: usize) -> Result<Self> {
        Ok(Method {
            spec: BlendSpec::ranked(p, k)?,
        })
    }

    pub fn scaled(p: f64, k: usize) -> Result<Self> {
        Ok(Method {
            spec: BlendSpec::scaled(p, k)?,
        })
    }

    pub fn label(&self) -> String {
        self.spec.label()
    }

    /// Human-readable name as used in table rows.
    pub fn display_name(&self) -> String {
        match self.spec.family() {
            BlendFamily::Pmm => "PMM".to_string(),
            BlendFamily::Ranked => format!("ranked, blend = {}", self.spec.p()),
            BlendFamily::Scaled => format!("scaled, blend = {}", self.spec.p()),
        }
    }
}

/// Full factorial grid of conditions crossed with methods.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionGrid {
    pub mechanisms: Vec<Mechanism>,
    pub proportions: Vec<f64>,
    pub distributions: Vec<bool>,
    pub correlations: Vec<f64>,
    pub methods: Vec<Method>,
}

impl ConditionGrid {
    /// 2 mechanisms × 2 proportions × 2 distributions × 3 correlations,
    /// crossed with PMM and the ranked and scaled blends at p ∈ {1, 0.5, 0}.
    pub fn standard(k: usize) -> Result<Self> {
        let mut methods = vec![Method::pmm(k)?];
        for p in [1.0, 0.5, 0.0] {
            methods.push(Method::ranked(p, k)?);
        }
        for p in [1.0, 0.5, 0.0] {
            methods.push(Method::scaled(p, k)?);
        }
        Ok(ConditionGrid {
            mechanisms: vec![Mechanism::Mcar, Mechanism::MarRight],
            proportions: vec![0.25, 0.5],
            distributions: vec![false, true],
            correlations: vec![0.0, 0.1, 0.7],
            methods,
        })
    }

    /// Conditions in table order: mechanism, proportion, distribution,
    /// correlation, the last varying fastest.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        for &mechanism in &self.mechanisms {
            for &proportion in &self.proportions {
                for &skewed in &self.distributions {
                    for &rho in &self.correlations {
                        out.push(Condition {
                            mechanism,
                            proportion,
                            skewed,
                            rho,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn n_cells(&self) -> usize {
        self.conditions().len() * self.methods.len()
    }
}
