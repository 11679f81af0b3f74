//! Transient simulation of a radial three-terminal monopole DC network.
//!
//! Each branch line is a cascade of lumped pi-sections (series R-L, shunt C
//! at the section boundaries) and every terminal is an ideal DC source
//! behind a Thevenin resistance and the current-limiting inductor. The two
//! non-measuring terminals carry shunt loads. Faults switch a shunt
//! resistance in at the line node nearest the requested distance; load
//! steps scale the shunt loads. Integration is trapezoidal with companion
//! models on a fixed internal step, decimated to the output rate by plain
//! subsampling.

mod engine;
mod network;
mod noise;
mod scenario;
mod waveform_io;

pub use engine::{simulate, InternalTrace, SimState, Simulator, DT_OUTPUT};
pub use network::{DcSolution, Network};
pub use noise::add_noise;
pub use scenario::{generate_scenarios, ScenarioRanges};
pub use waveform_io::{load_waveforms, write_waveforms, ManifestEntry};

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Per-kilometre constants and discretization of one branch line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineParams {
    /// Resistance (ohm/km).
    pub r_per_km: f64,
    /// Inductance (H/km).
    pub l_per_km: f64,
    /// Capacitance (F/km).
    pub c_per_km: f64,
    /// Branch length (km).
    pub length_km: f64,
    /// Number of lumped pi-sections, at least 10.
    pub n_sections: usize,
}

impl Default for LineParams {
    fn default() -> Self {
        // Only the resistance per km is a published system parameter; the
        // reactive constants are typical overhead-line magnitudes and stay
        // configurable.
        Self {
            r_per_km: 0.032_06,
            l_per_km: 0.86e-3,
            c_per_km: 0.012e-6,
            length_km: 300.0,
            n_sections: 15,
        }
    }
}

impl LineParams {
    pub fn with_length(length_km: f64, n_sections: usize) -> Self {
        Self {
            length_km,
            n_sections,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_per_km", self.r_per_km),
            ("l_per_km", self.l_per_km),
            ("c_per_km", self.c_per_km),
            ("length_km", self.length_km),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "line {name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.n_sections < 10 {
            return Err(Error::InvalidParameter(format!(
                "n_sections must be >= 10, got {}",
                self.n_sections
            )));
        }
        Ok(())
    }

    /// Length of one lumped section (km).
    pub fn section_km(&self) -> f64 {
        self.length_km / self.n_sections as f64
    }

    /// One-way travel time across one section (s).
    pub fn section_travel_time(&self) -> f64 {
        self.section_km() * (self.l_per_km * self.c_per_km).sqrt()
    }
}

/// The radial three-terminal network.
///
/// Terminal `t` is fed by an ideal source `nominal_voltage` behind
/// `source_resistance[t]` and the limiting inductor; the three branches
/// meet at a single junction node. The two non-measuring terminals carry
/// the shunt `load_conductances`, assigned in ascending terminal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Pole-to-pole DC voltage (V).
    pub nominal_voltage: f64,
    pub branches: [LineParams; 3],
    /// Thevenin resistance per terminal (ohm).
    pub source_resistance: [f64; 3],
    /// Series limiting inductor at each terminal (H).
    pub limiting_inductance: f64,
    /// Index of the single monitored terminal.
    pub measuring_terminal: usize,
    /// Shunt loads at the two non-measuring terminals (S).
    pub load_conductances: [f64; 2],
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            nominal_voltage: 640e3,
            branches: [
                LineParams::with_length(400.0, 20),
                LineParams::with_length(300.0, 15),
                LineParams::with_length(300.0, 15),
            ],
            source_resistance: [1.0; 3],
            limiting_inductance: 0.05,
            measuring_terminal: 0,
            load_conductances: [1e-4; 2],
        }
    }
}

pub const LIMITING_INDUCTANCE_RANGE: (f64, f64) = (1e-3, 200e-3);

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_voltage > 0.0 && self.nominal_voltage.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nominal_voltage must be strictly positive, got {}",
                self.nominal_voltage
            )));
        }
        for b in &self.branches {
            b.validate()?;
        }
        for r in self.source_resistance {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "source_resistance must be strictly positive, got {r}"
                )));
            }
        }
        if !(self.limiting_inductance > 0.0 && self.limiting_inductance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "limiting_inductance must be strictly positive, got {}",
                self.limiting_inductance
            )));
        }
        if self.measuring_terminal > 2 {
            return Err(Error::InvalidParameter(format!(
                "measuring_terminal must be 0, 1, or 2, got {}",
                self.measuring_terminal
            )));
        }
        for g in self.load_conductances {
            if g < 0.0 || !g.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "load_conductances must be finite and >= 0, got {g}"
                )));
            }
        }
        Ok(())
    }

    /// The two terminals that are not measured, in ascending order.
    pub fn load_terminals(&self) -> [usize; 2] {
        match self.measuring_terminal {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    /// Longest distance reachable from the measuring terminal: its own
    /// branch plus the longest other branch.
    pub fn reachable_path_km(&self) -> f64 {
        let own = self.branches[self.measuring_terminal].length_km;
        let other = self
            .load_terminals()
            .iter()
            .map(|&t| self.branches[t].length_km)
            .fold(0.0, f64::max);
        own + other
    }
}

/// What happens at the inception time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PoleToPoleFault,
    /// Non-fault event: both shunt loads scale by `1 + load_step_fraction`.
    LoadStep,
}

/// One labeled simulation event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub kind: EventKind,
    /// Which branch carries the fault.
    pub branch_index: usize,
    /// Fault distance from the measuring terminal along its path (km).
    pub distance_km: f64,
    /// Fault resistance R_F (ohm).
    pub fault_resistance: f64,
    /// Event time (s), strictly inside the simulation window.
    pub inception_time: f64,
    /// Terminal limiting inductance for this scenario (H).
    pub limiting_inductance: f64,
    /// Relative load change for non-fault events.
    pub load_step_fraction: f64,
}

impl FaultScenario {
    /// Regression target: distance for faults, the non-fault sentinel for
    /// load steps.
    pub fn label(&self) -> Label {
        match self.kind {
            EventKind::PoleToPoleFault => Label::Distance(self.distance_km),
            EventKind::LoadStep => Label::NonFault,
        }
    }

    pub fn validate(&self, config: &NetworkConfig) -> Result<()> {
        match self.kind {
            EventKind::PoleToPoleFault => {
                if !(0.01..=200.0).contains(&self.fault_resistance) {
                    return Err(Error::InvalidParameter(format!(
                        "fault_resistance must lie in [0.01, 200] ohm, got {}",
                        self.fault_resistance
                    )));
                }
                if self.branch_index > 2 {
                    return Err(Error::InvalidParameter(format!(
                        "branch_index must be 0, 1, or 2, got {}",
                        self.branch_index
                    )));
                }
                let reach = config.reachable_path_km();
                if !(self.distance_km > 0.0 && self.distance_km < reach) {
                    return Err(Error::InvalidParameter(format!(
                        "distance_km must lie in (0, {reach}), got {}",
                        self.distance_km
                    )));
                }
            }
            EventKind::LoadStep => {
                if !self.load_step_fraction.is_finite() || self.load_step_fraction <= -1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "load_step_fraction must be finite and > -1, got {}",
                        self.load_step_fraction
                    )));
                }
            }
        }
        let (lo, hi) = LIMITING_INDUCTANCE_RANGE;
        if !(lo..=hi).contains(&self.limiting_inductance) {
            return Err(Error::InvalidParameter(format!(
                "limiting_inductance must lie in [{lo}, {hi}] H, got {}",
                self.limiting_inductance
            )));
        }
        if !(self.inception_time > 0.0 && self.inception_time.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inception_time must be strictly positive, got {}",
                self.inception_time
            )));
        }
        Ok(())
    }
}

/// Time series of terminal voltage and current at the output rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    /// Output sample period (s).
    pub dt_output: f64,
    /// Measuring-terminal voltage samples (V).
    pub voltage: Vec<f64>,
    /// Measuring-terminal current samples (A), taken through the limiting
    /// inductor.
    pub current: Vec<f64>,
    /// Current through the fault shunt (A); present for fault scenarios
    /// only. Unobservable single-ended, kept for the locator's oracle mode.
    pub fault_current: Option<Vec<f64>>,
    pub scenario: FaultScenario,
}

impl WaveformRecord {
    /// Index of the first output sample with `t >= time`, tolerant of
    /// rounding in the division.
    pub fn sample_index_at_or_after(&self, time: f64) -> usize {
        (time / self.dt_output - 1e-9).ceil().max(0.0) as usize
    }

    pub fn duration(&self) -> f64 {
        self.voltage.len() as f64 * self.dt_output
    }
}
