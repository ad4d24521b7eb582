//! Checkerboard joint pattern for (Z, X): piecewise-constant density over a
//! grid on [0, t_max] x [-1, 1] with alternating high/low cell mass ρ:1,
//! normalized per covariate column so the X marginal stays Unif[-1, 1].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::simulate::scalar_fn::ScalarFn;
use crate::simulate::study::{sample_scenario, ConditionalLaw, CovariateLaw, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerboardParams {
    /// Number of time cells g_t.
    pub grid_t: usize,
    /// Number of covariate cells g_x.
    pub grid_x: usize,
    /// Intensity ratio between heavy and light cells; ρ = 1 makes Z ⊥ X.
    pub rho: f64,
    /// Time range [0, t_max].
    pub t_max: f64,
    /// Mean of the exponential censoring time; None disables censoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censoring_mean: Option<f64>,
}

impl Default for CheckerboardParams {
    fn default() -> Self {
        CheckerboardParams {
            grid_t: 4,
            grid_x: 4,
            rho: 4.0,
            t_max: 4.0,
            censoring_mean: None,
        }
    }
}

impl CheckerboardParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_t == 0 || self.grid_x == 0 {
            return Err(Error::Validation(
                "checkerboard grid must be nonempty".into(),
            ));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Validation(format!(
                "checkerboard intensity ratio must be positive, got {}",
                self.rho
            )));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::Validation(format!(
                "checkerboard t_max must be positive, got {}",
                self.t_max
            )));
        }
        if let Some(m) = self.censoring_mean {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Validation(format!(
                    "checkerboard censoring mean must be positive, got {m}"
                )));
            }
        }
        Ok(())
    }

    /// Column index of a covariate value in [-1, 1].
    fn column(&self, x: f64) -> usize {
        let u = (x + 1.0) / 2.0;
        ((u * self.grid_x as f64) as usize).min(self.grid_x - 1)
    }

    /// Unnormalized weight of time cell `i` in column `j`.
    fn weight(&self, i: usize, j: usize) -> f64 {
        if (i + j).is_multiple_of(2) {
            self.rho
        } else {
            1.0
        }
    }

    /// P(Z in cell i, X in column j): column masses are equal by
    /// construction, cells within a column are weighted ρ:1.
    pub fn cell_probability(&self, i: usize, j: usize) -> f64 {
        let col_sum: f64 = (0..self.grid_t).map(|k| self.weight(k, j)).sum();
        self.weight(i, j) / col_sum / self.grid_x as f64
    }

    /// Draw Z given the covariate value: pick a time cell by its column's
    /// weights, then uniformly within the cell.
    pub(crate) fn sample_time(&self, x: f64, rng: &mut impl Rng) -> Result<f64> {
        self.validate()?;
        let j = self.column(x);
        let col_sum: f64 = (0..self.grid_t).map(|k| self.weight(k, j)).sum();
        let mut u = rng.gen_range(0.0..col_sum);
        let mut cell = self.grid_t - 1;
        for i in 0..self.grid_t {
            let w = self.weight(i, j);
            if u < w {
                cell = i;
                break;
            }
            u -= w;
        }
        let cell_width = self.t_max / self.grid_t as f64;
        let t = cell as f64 * cell_width + rng.gen_range(0.0..cell_width);
        Ok(t.max(f64::MIN_POSITIVE))
    }

    /// The scenario this pattern defines: Unif[-1,1] covariates, checkerboard
    /// failure times, exponential censoring at `censoring_mean` (θ).
    pub fn to_scenario(&self, id: &str) -> Scenario {
        Scenario {
            id: id.to_string(),
            description: format!(
                "checkerboard {}x{} rho={} over [0,{}]x[-1,1]",
                self.grid_t, self.grid_x, self.rho, self.t_max
            ),
            covariate_law: CovariateLaw::Uniform1,
            z_given_x: ConditionalLaw::Checkerboard(CheckerboardParams {
                censoring_mean: None,
                ..self.clone()
            }),
            c_given_x: ConditionalLaw::Exponential {
                mean: ScalarFn::theta(),
            },
            theta: self.censoring_mean.unwrap_or(1.0),
            notes: None,
        }
    }
}

/// Sample an n-row dataset from the checkerboard pattern. Without a
/// censoring mean every observation is an event.
pub fn checkerboard_sampler(
    params: &CheckerboardParams,
    n: usize,
    seed: u64,
) -> Result<SurvivalDataset> {
    params.validate()?;
    let scenario = params.to_scenario("checkerboard");
    let resolved = scenario.resolve(seed);
    let resolved = if params.censoring_mean.is_none() {
        resolved.without_censoring()
    } else {
        resolved
    };
    sample_scenario(&resolved, n, seed)
}
