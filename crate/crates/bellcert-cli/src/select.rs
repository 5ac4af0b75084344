//! Flag-value selectors: strategies, functionals, hypotheses, grids.

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

use bellcert::conic::{backend_by_name, ConicBackend};
use bellcert::functionals::{make_cglmp3, make_chsh, make_mermin, make_tilted_chsh, BellFunctional};
use bellcert::quantum::{
    born_behavior, cglmp_optimal_zeta, cglmp_strategy, chsh_strategy, ghz_strategy,
    product_00_strategy, QuantumStrategy,
};
use bellcert::scenario::{Behavior, Scenario, SettingsDistribution};

#[derive(Copy, Clone, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Chsh,
    Cglmp3,
    Ghz,
    Product00,
}

#[derive(Copy, Clone, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    Chsh,
    TiltedChsh,
    Cglmp3,
    Mermin,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisKind {
    /// Local hidden variables (the local polytope).
    Lhv,
    /// Negativity at most N0.
    Negativity,
    /// Biseparability (2-producibility) of three parties.
    Biseparable,
    /// Bell value at most S0 within the quantum relaxation.
    ChshValue,
    /// Bell-state extraction fidelity at most F0.
    Fidelity,
}

#[derive(Copy, Clone, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Martingale,
    Pbr,
}

#[derive(Copy, Clone, Debug, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Full,
    Simplified,
    Ideal,
}

pub fn solver_backend() -> Result<Box<dyn ConicBackend>> {
    let name = std::env::var("BELLCERT_BACKEND").unwrap_or_else(|_| "clarabel".into());
    backend_by_name(&name).with_context(|| format!("unknown solver backend {name:?}"))
}

/// Builds the strategy for a selector; `theta` is in degrees, `zeta` is a
/// number or "auto".
pub fn strategy(kind: StrategyKind, theta_deg: f64, zeta: &str) -> Result<QuantumStrategy> {
    Ok(match kind {
        StrategyKind::Chsh => chsh_strategy(theta_deg.to_radians())?,
        StrategyKind::Cglmp3 => {
            let z = if zeta == "auto" {
                cglmp_optimal_zeta()
            } else {
                zeta.parse().context("--zeta must be a number or 'auto'")?
            };
            cglmp_strategy(z, None)?
        }
        StrategyKind::Ghz => ghz_strategy(),
        StrategyKind::Product00 => product_00_strategy(),
    })
}

pub fn strategy_behavior(kind: StrategyKind, theta_deg: f64, zeta: &str) -> Result<Behavior> {
    Ok(born_behavior(&strategy(kind, theta_deg, zeta)?)?)
}

pub fn settings_distribution(kind: StrategyKind) -> SettingsDistribution {
    match kind {
        StrategyKind::Ghz => SettingsDistribution::mermin_support(),
        StrategyKind::Chsh | StrategyKind::Product00 => {
            SettingsDistribution::uniform(Scenario::chsh())
        }
        StrategyKind::Cglmp3 => SettingsDistribution::uniform(Scenario::cglmp3()),
    }
}

pub fn functional(kind: FunctionalKind, alpha: f64) -> Result<BellFunctional> {
    Ok(match kind {
        FunctionalKind::Chsh => make_chsh(),
        FunctionalKind::TiltedChsh => make_tilted_chsh(alpha)?,
        FunctionalKind::Cglmp3 => make_cglmp3(),
        FunctionalKind::Mermin => make_mermin(),
    })
}

/// Default hierarchy level per scenario for negativity-style hypotheses.
pub fn default_level(h: HypothesisKind, sc: &Scenario) -> usize {
    match h {
        HypothesisKind::Biseparable => 1,
        HypothesisKind::Fidelity => 2,
        _ if *sc == Scenario::cglmp3() => 2,
        _ => 3,
    }
}

/// Parses a grid: either `start:step:end` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("grid must be start:step:end or a comma-separated list");
        }
        let (start, step, end): (f64, f64, f64) = (
            parts[0].parse()?,
            parts[1].parse()?,
            parts[2].parse()?,
        );
        if step <= 0.0 || end < start {
            bail!("grid must ascend with a positive step");
        }
        let n = ((end - start) / step + 0.5).floor() as usize + 1;
        (0..n).map(|k| start + k as f64 * step).collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse().map_err(Into::into))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() {
        bail!("empty grid");
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        bail!("grid must be strictly ascending");
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:0.25:1").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_grid("0.2,0.1").is_err());
        assert!(parse_grid("1:0:2").is_err());
    }
}
