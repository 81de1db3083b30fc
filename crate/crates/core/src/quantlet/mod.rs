//! Quantlet basis learning and projection.
//!
//! Learning runs in four stages: per-sample Lasso selection over the
//! overcomplete dictionary ([`select_union_basis`]), greedy ordering of the
//! selected union by leave-one-out concordance ([`rank_and_reduce`]),
//! Gram-Schmidt orthonormalization with wavelet denoising
//! ([`finalize_basis`]), and projection of quantile functions onto the
//! result ([`project_coefficients`]).

mod basis;
mod concordance;
mod reduce;
mod selection;
pub mod wavelet;

pub use basis::{
    finalize_basis, finalize_rows, project_coefficients, DenoiseConfig, DenoiseInfo, QuantletBasis,
    QuantletCoefficients,
};
pub use concordance::{concordance, loo_concordance, reconstruct, ConcordanceReport};
pub use reduce::{rank_and_reduce, RankedElements};
pub use selection::{select_union_basis, LambdaRule, SampleSelection, SelectionResult};

use serde::{Deserialize, Serialize};

use crate::dictionary::OvercompleteDictionary;
use crate::error::Result;
use crate::l1solver::LassoOptions;
use crate::quantile::QuantileFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantletConfig {
    pub rho_threshold: f64,
    pub lambda_rule: LambdaRule,
    pub lasso: LassoOptions,
    pub denoise: DenoiseConfig,
}

impl Default for QuantletConfig {
    fn default() -> Self {
        QuantletConfig {
            rho_threshold: 0.999,
            lambda_rule: LambdaRule::default(),
            lasso: LassoOptions::default(),
            denoise: DenoiseConfig::default(),
        }
    }
}

/// Everything produced while learning a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedBasis {
    pub selection: SelectionResult,
    pub ranking: RankedElements,
    pub basis: QuantletBasis,
}

/// Selection, ranking and finalization in one call.
pub fn learn_basis(
    qs: &[QuantileFunction],
    dict: &OvercompleteDictionary,
    config: &QuantletConfig,
) -> Result<LearnedBasis> {
    let selection = select_union_basis(qs, dict, &config.lambda_rule, &config.lasso)?;
    let ranking = rank_and_reduce(qs, dict, &selection, config.rho_threshold)?;
    let basis = finalize_basis(&ranking.order, dict, &config.denoise)?;
    Ok(LearnedBasis { selection, ranking, basis })
}
