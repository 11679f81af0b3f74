//! Seeded random scenario generation.
//!
//! Fault distance is uniform over the measuring path; when it lands past
//! the junction, the continuation branch is drawn uniformly among those
//! long enough to reach it. Fault resistance is log-uniform (its range
//! spans four decades), the limiting inductance uniform, and load steps
//! take a uniform magnitude with a random sign.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{EventKind, FaultScenario, NetworkConfig, LIMITING_INDUCTANCE_RANGE};

/// Closed parameter ranges for scenario draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioRanges {
    /// Fault resistance (ohm), drawn log-uniform.
    pub fault_resistance: (f64, f64),
    /// Terminal limiting inductance (H), drawn uniform.
    pub limiting_inductance: (f64, f64),
    /// Magnitude of the relative load change, drawn uniform with a random
    /// sign.
    pub load_step: (f64, f64),
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        Self {
            fault_resistance: (0.01, 200.0),
            limiting_inductance: LIMITING_INDUCTANCE_RANGE,
            load_step: (0.1, 0.5),
        }
    }
}

impl ScenarioRanges {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, (lo, hi): (f64, f64), bound_lo: f64, bound_hi: f64| {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "empty {name} range [{lo}, {hi}]"
                )));
            }
            if lo < bound_lo || hi > bound_hi {
                return Err(Error::InvalidParameter(format!(
                    "{name} range [{lo}, {hi}] outside [{bound_lo}, {bound_hi}]"
                )));
            }
            Ok(())
        };
        check("fault_resistance", self.fault_resistance, 0.01, 200.0)?;
        check(
            "limiting_inductance",
            self.limiting_inductance,
            LIMITING_INDUCTANCE_RANGE.0,
            LIMITING_INDUCTANCE_RANGE.1,
        )?;
        check("load_step", self.load_step, 0.0, 1.0)?;
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo.ln()..hi.ln()).exp()
    }
}

/// Draw `n_fault` fault scenarios followed by `n_nonfault` load steps,
/// deterministically from `seed`.
pub fn generate_scenarios(
    config: &NetworkConfig,
    seed: u64,
    n_fault: usize,
    n_nonfault: usize,
    ranges: &ScenarioRanges,
    inception_time: f64,
) -> Result<Vec<FaultScenario>> {
    if n_fault == 0 || n_nonfault == 0 {
        return Err(Error::InvalidParameter(
            "scenario counts must both be positive".into(),
        ));
    }
    config.validate()?;
    ranges.validate()?;
    if !(inception_time > 0.0 && inception_time.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "inception_time must be strictly positive, got {inception_time}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measuring = config.measuring_terminal;
    let own_len = config.branches[measuring].length_km;
    let reach = config.reachable_path_km();

    let mut scenarios = Vec::with_capacity(n_fault + n_nonfault);
    for _ in 0..n_fault {
        let mut distance = rng.gen_range(0.0..reach);
        while distance == 0.0 {
            distance = rng.gen_range(0.0..reach);
        }
        let branch_index = if distance <= own_len {
            measuring
        } else {
            let extent = distance - own_len;
            let eligible: Vec<usize> = config
                .load_terminals()
                .iter()
                .copied()
                .filter(|&t| config.branches[t].length_km >= extent)
                .collect();
            eligible[rng.gen_range(0..eligible.len())]
        };
        scenarios.push(FaultScenario {
            kind: EventKind::PoleToPoleFault,
            branch_index,
            distance_km: distance,
            fault_resistance: log_uniform(&mut rng, ranges.fault_resistance),
            inception_time,
            limiting_inductance: uniform(&mut rng, ranges.limiting_inductance),
            load_step_fraction: 0.0,
        });
    }
    for _ in 0..n_nonfault {
        let magnitude = uniform(&mut rng, ranges.load_step);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        scenarios.push(FaultScenario {
            kind: EventKind::LoadStep,
            branch_index: measuring,
            distance_km: 0.0,
            fault_resistance: 0.0,
            inception_time,
            limiting_inductance: uniform(&mut rng, ranges.limiting_inductance),
            load_step_fraction: sign * magnitude,
        });
    }
    Ok(scenarios)
}
