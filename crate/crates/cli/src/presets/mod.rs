//! Named experiments. Each preset parses its own `[params]` table (unknown keys
//! rejected), validates ranges, and returns checks plus plot-ready points.

mod blender;
mod ifs;
mod integrable;
mod skew;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::report::Outcome;

/// Run-wide settings that override preset parameters.
#[derive(Debug, Clone, Default)]
pub struct Ctx {
    pub seed: u64,
    /// Overrides the preset's search budget when set.
    pub budget: Option<usize>,
}

impl Ctx {
    pub fn budget_or(&self, default: usize) -> usize {
        self.budget.unwrap_or(default)
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut base = ChaCha8Rng::seed_from_u64(self.seed);
        let k: u64 = base.random();
        ChaCha8Rng::seed_from_u64(k ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

type RunFn = fn(&Ctx, &toml::Table) -> Result<Outcome, CliError>;
type ValidateFn = fn(&toml::Table) -> Result<serde_json::Value, CliError>;

#[derive(Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    /// The property the preset exercises.
    pub exercises: &'static str,
    pub run: RunFn,
    pub validate: ValidateFn,
}

impl std::fmt::Debug for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Preset({})", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub exercises: &'static str,
}

macro_rules! preset {
    ($name:literal, $module:ident :: $p:ident, $what:literal) => {
        Preset {
            name: $name,
            exercises: $what,
            run: |ctx, t| $module::$p::run(ctx, t),
            validate: |t| $module::$p::validate(t),
        }
    };
}

pub static REGISTRY: &[Preset] = &[
    preset!("ifs-density", ifs::density, "covering plus well-distributed fixed points make every orbit of the IFS dense"),
    preset!("ifs-construct", ifs::construct, "translated copies of one contraction form a robust covering, well-distributed family"),
    preset!("skew-unstable-equivalence", skew::equivalence, "strong unstable sets of a locally constant skew product project onto IFS orbits"),
    preset!("symbolic-blender", skew::blender, "a covering fiber IFS makes the skew product a cs-blender"),
    preset!("geometric-blender", blender::geometric, "horseshoe times covering fiber maps: s-strips meet the unstable set"),
    preset!("double-blender", blender::double, "paired fiber contractions give a symplectic double blender"),
    preset!("f-mu-minimality", blender::f_mu, "the block-perturbed product connects almost every fiber point to the blender"),
    preset!("twist-transitivity", integrable::transitivity, "a twist map with two conjugate integrable maps generates a minimal IFS"),
    preset!("chain-shadow", integrable::chain, "chains of transverse invariant circles are shadowed by IFS orbits"),
    preset!("robustness-sweep", blender::sweep, "blender verdicts persist under small perturbations"),
    preset!("recurrence-fraction", integrable::recurrence, "almost every point of a twist map is recurrent"),
];

/// Registry rows whose name contains `filter`. Errors if the registry is empty
/// or holds a duplicate name.
pub fn list(filter: Option<&str>) -> Result<Vec<PresetInfo>, String> {
    self_check()?;
    Ok(REGISTRY
        .iter()
        .filter(|p| filter.is_none_or(|f| p.name.contains(f)))
        .map(|p| PresetInfo { name: p.name, exercises: p.exercises })
        .collect())
}

pub fn self_check() -> Result<(), String> {
    if REGISTRY.is_empty() {
        return Err("experiment registry is empty".into());
    }
    let mut names: Vec<&str> = REGISTRY.iter().map(|p| p.name).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(format!("duplicate experiment name {}", w[0]));
    }
    Ok(())
}

pub fn find(name: &str) -> Result<&'static Preset, CliError> {
    REGISTRY
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| CliError::config("experiment", format!("unknown experiment '{name}'; see `blendlab list`")))
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

/// Uniform sample of a box, one coordinate at a time.
pub(crate) fn sample_box(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_rows_and_filter() {
        assert_eq!(list(None).unwrap().len(), 11);
        assert_eq!(list(Some("blender")).unwrap().len(), 3);
        assert!(self_check().is_ok());
    }

    #[test]
    fn defaults_validate() {
        for p in REGISTRY {
            (p.validate)(&toml::Table::new()).unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }
}
