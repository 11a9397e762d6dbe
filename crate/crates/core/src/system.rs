//! A fully built system: base map, expansion profile, skew product and the
//! decomposition constants.

use serde::Serialize;

use crate::base::{BaseMap, BaseMapConfig, ExpansionProfile};
use crate::decomposition::DecompositionParams;
use crate::error::Result;
use crate::solenoid::{measure_holonomy_constant, SkewProduct};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemConfig {
    pub base: BaseMapConfig,
    pub fiber_contraction_override: Option<f64>,
    pub fiber_scale: Option<f64>,
    pub alpha: f64,
}

impl SystemConfig {
    /// Doubling map with the default quarter fiber contraction.
    pub fn linear_preset() -> Self {
        SystemConfig {
            base: BaseMapConfig::linear(&[2]),
            fiber_contraction_override: None,
            fiber_scale: None,
            alpha: 0.8,
        }
    }

    /// Saddle-type deformation of `diag(2, 3)` weakening the first coordinate.
    pub fn pitchfork_preset() -> Self {
        SystemConfig {
            base: BaseMapConfig::pitchfork(&[2, 3], 1.05, 0.25)
                .with_lambda_u(0.7)
                .with_rho(0.05),
            fiber_contraction_override: None,
            fiber_scale: None,
            alpha: 0.8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct System {
    pub config: SystemConfig,
    pub profile: ExpansionProfile,
    pub f: SkewProduct,
    pub params: DecompositionParams,
}

impl System {
    pub fn build(config: SystemConfig) -> Result<Self> {
        let g = BaseMap::new(config.base.clone())?;
        let profile = ExpansionProfile::build(&g, config.base.lambda_u, config.base.rho)?;
        let f = SkewProduct::new(g, config.fiber_contraction_override, config.fiber_scale)?;
        let params = DecompositionParams::new(&profile, f.lambda_s(), config.alpha)?;
        Ok(System {
            config,
            profile,
            f,
            params,
        })
    }

    pub fn base(&self) -> &BaseMap {
        self.f.base()
    }

    /// Measured holonomy constant `C` on a fresh attractor sample.
    pub fn measure_c(&self, seed: u64) -> Result<f64> {
        let sample = self.f.attractor_sample(60, 2_000, seed);
        measure_holonomy_constant(&self.f, &sample, 10_000, self.profile.rho, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        let lin = System::build(SystemConfig::linear_preset()).unwrap();
        assert_eq!(lin.profile.q, 0);
        assert_eq!(lin.params.theta, 0.7);
        let pf = System::build(SystemConfig::pitchfork_preset()).unwrap();
        assert_eq!(pf.profile.q, 1);
        assert_eq!(pf.base().deg(), 6);
        assert_eq!(pf.f.lambda_s(), 2f64.powi(-6));
        assert!(pf.params.theta < 1.0);
    }
}
