//! Run the demand-pacing firmware against the stub peripherals, injecting one
//! sensed beat, and print each device's access log.

use biorv::asm::assemble_str;
use biorv::cpu::HaltPolicy;
use biorv::harness::{DeviceKind, Simulator, REG_DATA};
use biorv::programs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = assemble_str(programs::PACEMAKER, 0)?;
    let mut sim = Simulator::default();
    sim.program_and_start(&image)?;

    // run a little, then report an intrinsic beat
    sim.run(60, HaltPolicy::SelfLoop)?;
    sim.peripherals_mut().poke(DeviceKind::Sensing, REG_DATA, 1).ok_or("no sensing device")?;
    let report = sim.run(10_000, HaltPolicy::SelfLoop)?;
    println!("{} after {} cycles", report.halt_reason, sim.core.cycle_count);

    for device in sim.peripherals().devices() {
        println!("{} @ 0x{:04X}", device.kind, device.base);
        for rec in device.writes() {
            println!("  cycle {:>4}  +0x{:X} <- {}", rec.cycle, rec.offset, rec.value);
        }
    }
    Ok(())
}
