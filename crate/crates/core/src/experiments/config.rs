use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{identity, validate_density, CMat, HermitianEigen};
use crate::model::{
    build_correlated_state, build_friedrichs, build_random_model, build_spin_bath,
    friedrichs_entangled_recipe, random_recipe, spin_bath_recipe, CorrelatedStateRecipe,
    FriedrichsModel, FriedrichsParams, ModelSpec, SpinBathParams,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Friedrichs(FriedrichsParams),
    SpinBath(SpinBathParams),
    /// Random Hermitian blocks drawn from the config seed.
    Random { dim_s: usize, dim_b: usize },
    Explicit { spec: ModelSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecipeConfig {
    /// Excited atom entangled with the coupled field mode (Friedrichs models only).
    FriedrichsEntangled { theta: f64 },
    /// `exp(-i theta sigma_x (x) sigma_x^(1))` applied to the spin-bath sector state.
    SpinBath { theta: f64 },
    /// Two random operators drawn from the config seed.
    Random,
    /// `rho_S (x) Omega_B`.
    Factorized {
        #[serde(with = "crate::codec::matrix")]
        system_state: CMat,
    },
    Explicit(CorrelatedStateRecipe),
}

/// One study: a model, a correlated initial state, couplings and a scaled-time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub model: ModelConfig,
    pub recipe: RecipeConfig,
    pub lambdas: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub eta: f64,
    /// Step in unscaled time for the correlation term.
    pub dt: f64,
    /// Stationary `Omega_B'` for the secular demonstration.
    #[serde(default, with = "crate::codec::option_matrix", skip_serializing_if = "Option::is_none")]
    pub wrong_reference: Option<CMat>,
    /// Unscaled times for the secular fit; defaults to 21 points over `[0, 0.4 t_rec]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secular_times: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// A constructed model with its correlated initial state.
#[derive(Clone, Debug)]
pub struct Setup {
    /// Model at `lambda = 0`; studies rescale and center it per coupling.
    pub spec: ModelSpec,
    pub friedrichs: Option<FriedrichsModel>,
    pub rho0: CMat,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid study config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> Result<String> {
        let text = serde_json::to_string(self)?;
        Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Friedrichs demo: entangled initial state, three couplings, `tau` in `[0, 2]`.
    pub fn friedrichs_demo() -> Self {
        Self {
            model: ModelConfig::Friedrichs(FriedrichsParams::default_demo()),
            recipe: RecipeConfig::FriedrichsEntangled { theta: 0.5 },
            lambdas: vec![0.4, 0.2, 0.1],
            tau_grid: (0..=40).map(|k| 0.05 * k as f64).collect(),
            eta: 0.5 / 39.0,
            dt: 0.05,
            wrong_reference: None,
            secular_times: None,
            seed: 0,
            output: None,
        }
    }

    /// Spin-bath demo with a wrong, infinite-temperature reference for the secular check.
    pub fn spin_bath_demo() -> Self {
        let params = SpinBathParams::default_demo();
        let dim_b = 1 << params.n_spins;
        let wrong = identity(dim_b).map(|z| z / dim_b as f64);
        Self {
            model: ModelConfig::SpinBath(params),
            recipe: RecipeConfig::SpinBath { theta: 0.4 },
            lambdas: vec![0.4],
            tau_grid: (0..=10).map(|k| 0.1 * k as f64).collect(),
            eta: 0.1,
            dt: 0.02,
            wrong_reference: Some(wrong),
            secular_times: None,
            seed: 0,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::Config("lambdas must not be empty".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("lambda = {l} is not a positive coupling")));
        }
        if self.tau_grid.is_empty() {
            return Err(Error::Config("tau_grid must not be empty".into()));
        }
        crate::nz::check_time_grid(&self.tau_grid)?;
        if self.tau_grid[0] < 0.0 {
            return Err(Error::Config("tau_grid must start at tau >= 0".into()));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta = {} must be positive", self.eta)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        Ok(())
    }

    /// Builds the model and state, checking every coupling against the bath window.
    pub fn setup(&self) -> Result<Setup> {
        self.validate()?;
        let (mut spec, friedrichs) = match &self.model {
            ModelConfig::Friedrichs(p) => {
                let m = build_friedrichs(p)?;
                (m.spec.clone(), Some(m))
            }
            ModelConfig::SpinBath(p) => (build_spin_bath(p)?, None),
            ModelConfig::Random { dim_s, dim_b } => {
                (build_random_model(*dim_s, *dim_b, 0.0, self.seed)?, None)
            }
            ModelConfig::Explicit { spec } => {
                spec.validate()?;
                (spec.clone(), None)
            }
        };
        spec.lambda = 0.0;
        let recipe = match &self.recipe {
            RecipeConfig::FriedrichsEntangled { theta } => match &friedrichs {
                Some(m) => friedrichs_entangled_recipe(m, *theta),
                None => {
                    return Err(Error::Config(
                        "recipe friedrichs_entangled needs a friedrichs model".into(),
                    ))
                }
            },
            RecipeConfig::SpinBath { theta } => spin_bath_recipe(&spec, *theta),
            RecipeConfig::Random => random_recipe(&spec, self.seed.wrapping_add(1)),
            RecipeConfig::Factorized { system_state } => {
                if system_state.nrows() != spec.dim_s || system_state.ncols() != spec.dim_s {
                    return Err(Error::Dimension(format!(
                        "system state must be {0}x{0}",
                        spec.dim_s
                    )));
                }
                validate_density(system_state, spec.tolerances.herm_tol, "system state")?;
                let root = HermitianEigen::new(system_state).apply_fn(|x| x.max(0.0).sqrt());
                CorrelatedStateRecipe {
                    ops: vec![root.kronecker(&identity(spec.dim_b))],
                    normalize: true,
                }
            }
            RecipeConfig::Explicit(r) => r.clone(),
        };
        let rho0 = build_correlated_state(&spec, &recipe)?.rho;
        let tau_max = self.tau_grid.last().copied().unwrap_or(0.0);
        for &l in &self.lambdas {
            let t = tau_max / (l * l);
            spec.check_window(t, String::new).map_err(|e| match e {
                Error::Window { window, t_rec, .. } => Error::Config(format!(
                    "lambda = {l}: tau/lambda^2 = {t} exceeds the usable window {window} \
                     (recurrence time {t_rec})"
                )),
                other => other,
            })?;
        }
        Ok(Setup { spec, friedrichs, rho0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_configs_roundtrip_and_build() {
        for cfg in [StudyConfig::friedrichs_demo(), StudyConfig::spin_bath_demo()] {
            let back = StudyConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
            let setup = cfg.setup().unwrap();
            assert_eq!(setup.rho0.nrows(), setup.spec.dim());
        }
    }

    #[test]
    fn window_violation_names_the_coupling() {
        let mut cfg = StudyConfig::friedrichs_demo();
        cfg.lambdas.push(0.05);
        let msg = cfg.setup().unwrap_err().to_string();
        assert!(msg.contains("lambda = 0.05"), "{msg}");
    }

    #[test]
    fn bad_fields_rejected() {
        let mut cfg = StudyConfig::friedrichs_demo();
        cfg.lambdas = vec![0.2, -0.1];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = StudyConfig::friedrichs_demo();
        cfg.recipe = RecipeConfig::FriedrichsEntangled { theta: 0.5 };
        cfg.model = ModelConfig::Random { dim_s: 2, dim_b: 3 };
        assert!(cfg.setup().is_err());
        assert!(StudyConfig::from_json("{\"model\": 3}").is_err());
    }

    #[test]
    fn factorized_recipe_gives_product_state() {
        let mut cfg = StudyConfig::spin_bath_demo();
        let rho_s = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            crate::linalg::c(0.25, 0.0),
            crate::linalg::c(0.75, 0.0),
        ]));
        cfg.recipe = RecipeConfig::Factorized { system_state: rho_s.clone() };
        let setup = cfg.setup().unwrap();
        let want = setup.spec.with_reference(&rho_s);
        assert!(crate::linalg::hs_norm(&(&setup.rho0 - want)) < 1e-12);
    }
}
