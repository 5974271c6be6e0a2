//! Energy and power for each bundled program under both clock policies.

use biorv::asm::assemble_str;
use biorv::cpu::HaltPolicy;
use biorv::harness::Simulator;
use biorv::metrics::{estimate_energy, format_ratio, ClockPolicy, EnergyModel, Summary};
use biorv::programs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = EnergyModel::default();
    for (name, source) in programs::ALL {
        let image = assemble_str(source, 0)?;
        let mut sim = Simulator::default();
        sim.program_and_start(&image)?;
        let report = sim.run(100_000, HaltPolicy::SelfLoop)?;
        println!("== {name}: CPI {}", format_ratio(&report.cpi()?));
        for clock in [ClockPolicy::ExecutingOnly, ClockPolicy::AlwaysOn] {
            let e = estimate_energy(&report, &model, clock);
            println!("  {clock:?}: {:.3} pJ, {:.3} uW", e.energy_pj, e.avg_power_uw);
        }
    }

    // A slower, lower-energy operating point.
    let slow = EnergyModel::new(12.5, 1e6)?;
    let image = assemble_str(programs::DEMO, 0)?;
    let mut sim = Simulator::default();
    sim.program_and_start(&image)?;
    let report = sim.run(1_000, HaltPolicy::SelfLoop)?;
    print!("\n{}", Summary::new(&report, slow, ClockPolicy::ExecutingOnly));
    Ok(())
}
