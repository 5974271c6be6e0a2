//! Cycle, CPI, energy and power accounting.
//!
//! Energy is a first-order model: a fixed energy per clock cycle, with the
//! average power assuming the clock runs continuously at the model frequency.

use std::fmt::{self, Write as _};

use num_rational::Ratio;
use thiserror::Error;

use crate::cpu::{Core, CoreFault};
use crate::isa::{cycle_cost, InstrClass};

/// Energy per clock cycle from post-layout characterization, in picojoules.
pub const DEFAULT_PJ_PER_CYCLE: f64 = 17.18;
/// Nominal clock, in hertz.
pub const DEFAULT_FREQ_HZ: f64 = 50e6;

/// Retired instruction counts per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ClassCounts([u64; 6]);

impl ClassCounts {
    pub fn add(&mut self, class: InstrClass) {
        self.0[class.slot()] += 1;
    }

    pub fn set(&mut self, class: InstrClass, count: u64) {
        self.0[class.slot()] = count;
    }

    pub fn get(&self, class: InstrClass) -> u64 {
        self.0[class.slot()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Cycles these instructions cost at the fixed per-class rates.
    pub fn nominal_cycles(&self) -> u64 {
        InstrClass::ALL.iter().map(|&c| self.get(c) * cycle_cost(c) as u64).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (InstrClass, u64)> + '_ {
        InstrClass::ALL.iter().map(move |&c| (c, self.get(c)))
    }
}

impl FromIterator<InstrClass> for ClassCounts {
    fn from_iter<I: IntoIterator<Item = InstrClass>>(iter: I) -> Self {
        let mut counts = ClassCounts::default();
        for class in iter {
            counts.add(class);
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    /// A jump or branch retired targeting its own address.
    SelfLoop { pc: u32 },
    BudgetExhausted,
    Fault(CoreFault),
}

impl HaltReason {
    pub fn name(&self) -> &'static str {
        match self {
            HaltReason::SelfLoop { .. } => "self_loop",
            HaltReason::BudgetExhausted => "budget_exhausted",
            HaltReason::Fault(_) => "fault",
        }
    }
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaltReason::SelfLoop { pc } => write!(f, "self-loop at 0x{pc:08X}"),
            HaltReason::BudgetExhausted => f.write_str("cycle budget exhausted"),
            HaltReason::Fault(fault) => write!(f, "fault: {fault}"),
        }
    }
}

/// Outcome of one `run`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    /// Executing cycles consumed by this run.
    pub total_cycles: u64,
    /// Cycles the clock ran while the core was not executing.
    pub held_cycles: u64,
    pub retired: ClassCounts,
    pub halt_reason: HaltReason,
    pub final_state: Core,
}

impl RunReport {
    pub fn cpi(&self) -> Result<Ratio<u64>, MetricsError> {
        compute_cpi(self.total_cycles, &self.retired)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MetricsError {
    #[error("no instructions retired; CPI is undefined")]
    NoInstructionsRetired,
    #[error("energy model parameters must be positive and finite (pj_per_cycle={pj_per_cycle}, freq_hz={freq_hz})")]
    InvalidModel { pj_per_cycle: f64, freq_hz: f64 },
}

/// Executing cycles per retired instruction, exactly.
pub fn compute_cpi(executing_cycles: u64, retired: &ClassCounts) -> Result<Ratio<u64>, MetricsError> {
    match retired.total() {
        0 => Err(MetricsError::NoInstructionsRetired),
        n => Ok(Ratio::new(executing_cycles, n)),
    }
}

/// Decimal rendering of a ratio to at most four places, keeping at least one.
pub fn format_ratio(ratio: &Ratio<u64>) -> String {
    let value = *ratio.numer() as f64 / *ratio.denom() as f64;
    let mut text = format!("{value:.4}");
    while text.ends_with('0') && !text.ends_with(".0") {
        text.pop();
    }
    text
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pj_per_cycle: f64,
    freq_hz: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel { pj_per_cycle: DEFAULT_PJ_PER_CYCLE, freq_hz: DEFAULT_FREQ_HZ }
    }
}

impl EnergyModel {
    pub fn new(pj_per_cycle: f64, freq_hz: f64) -> Result<Self, MetricsError> {
        let valid = |v: f64| v.is_finite() && v > 0.0;
        if !valid(pj_per_cycle) || !valid(freq_hz) {
            return Err(MetricsError::InvalidModel { pj_per_cycle, freq_hz });
        }
        Ok(EnergyModel { pj_per_cycle, freq_hz })
    }

    pub fn pj_per_cycle(&self) -> f64 {
        self.pj_per_cycle
    }

    pub fn freq_hz(&self) -> f64 {
        self.freq_hz
    }

    /// Average power with the clock running continuously, in microwatts.
    pub fn average_power_uw(&self) -> f64 {
        self.pj_per_cycle * self.freq_hz * 1e-6
    }
}

/// Which cycles are charged energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockPolicy {
    #[default]
    ExecutingOnly,
    /// The clock never stops, so held cycles cost energy too.
    AlwaysOn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub charged_cycles: u64,
    pub energy_pj: f64,
    pub avg_power_uw: f64,
}

pub fn estimate_energy(report: &RunReport, model: &EnergyModel, clock: ClockPolicy) -> EnergyEstimate {
    let charged_cycles = match clock {
        ClockPolicy::ExecutingOnly => report.total_cycles,
        ClockPolicy::AlwaysOn => report.total_cycles + report.held_cycles,
    };
    estimate_energy_for_cycles(charged_cycles, model)
}

pub fn estimate_energy_for_cycles(cycles: u64, model: &EnergyModel) -> EnergyEstimate {
    EnergyEstimate {
        charged_cycles: cycles,
        energy_pj: cycles as f64 * model.pj_per_cycle,
        avg_power_uw: model.average_power_uw(),
    }
}

/// A report paired with its energy figures, ready for rendering.
#[derive(Debug, Clone)]
pub struct Summary<'a> {
    pub report: &'a RunReport,
    pub model: EnergyModel,
    pub energy: EnergyEstimate,
}

impl<'a> Summary<'a> {
    pub fn new(report: &'a RunReport, model: EnergyModel, clock: ClockPolicy) -> Self {
        Summary { report, model, energy: estimate_energy(report, &model, clock) }
    }

    /// One `key=value` pair per line.
    pub fn to_key_values(&self) -> String {
        let r = self.report;
        let mut out = String::new();
        let _ = writeln!(out, "halt_reason={}", r.halt_reason.name());
        if let HaltReason::Fault(fault) = &r.halt_reason {
            let _ = writeln!(out, "fault_pc=0x{:08X}", fault.pc);
            let _ = writeln!(out, "fault_state={}", fault.state);
            let _ = writeln!(out, "fault={}", fault.kind);
        }
        let _ = writeln!(out, "final_pc=0x{:08X}", r.final_state.pc);
        let _ = writeln!(out, "cycles={}", r.total_cycles);
        let _ = writeln!(out, "held_cycles={}", r.held_cycles);
        let _ = writeln!(out, "retired={}", r.retired.total());
        for (class, count) in r.retired.iter() {
            let _ = writeln!(out, "retired.{class}={count}");
        }
        match r.cpi() {
            Ok(cpi) => {
                let _ = writeln!(out, "cpi={}/{}", cpi.numer(), cpi.denom());
                let _ = writeln!(out, "cpi_decimal={}", format_ratio(&cpi));
            }
            Err(_) => {
                let _ = writeln!(out, "cpi=undefined");
            }
        }
        let _ = writeln!(out, "pj_per_cycle={}", self.model.pj_per_cycle());
        let _ = writeln!(out, "freq_hz={}", self.model.freq_hz());
        let _ = writeln!(out, "energy_pj={:.3}", self.energy.energy_pj);
        let _ = writeln!(out, "avg_power_uw={:.3}", self.energy.avg_power_uw);
        out
    }
}

impl fmt::Display for Summary<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.report;
        writeln!(f, "halt: {}", r.halt_reason)?;
        writeln!(f, "cycles: {} executing, {} held", r.total_cycles, r.held_cycles)?;
        write!(f, "retired: {}", r.retired.total())?;
        let parts: Vec<String> =
            r.retired.iter().filter(|(_, n)| *n > 0).map(|(c, n)| format!("{c}={n}")).collect();
        if !parts.is_empty() {
            write!(f, " ({})", parts.join(", "))?;
        }
        writeln!(f)?;
        match r.cpi() {
            Ok(cpi) => writeln!(f, "CPI: {} ({}/{})", format_ratio(&cpi), cpi.numer(), cpi.denom())?,
            Err(_) => writeln!(f, "CPI: undefined (nothing retired)")?,
        }
        writeln!(
            f,
            "energy: {:.3} pJ over {} cycles at {} pJ/cycle",
            self.energy.energy_pj,
            self.energy.charged_cycles,
            self.model.pj_per_cycle()
        )?;
        writeln!(f, "average power: {:.3} uW at {} MHz", self.energy.avg_power_uw, self.model.freq_hz() / 1e6)
    }
}
