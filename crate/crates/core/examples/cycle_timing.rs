//! Step the timing program one instruction at a time and show the cycles
//! each instruction class costs.

use biorv::asm::assemble_str;
use biorv::harness::Simulator;
use biorv::programs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = assemble_str(programs::TIMING, 0)?;
    let mut sim = Simulator::default();
    sim.program_and_start(&image)?;
    loop {
        let pc = sim.core.pc;
        let (instr, cycles) = sim.core.step_instruction(&mut sim.bus)?;
        println!("0x{pc:04X}  {:<22} {:<12} {cycles} cycles", instr.to_string(), instr.class().name());
        if sim.core.pc == pc {
            break;
        }
    }
    println!("total: {} cycles, {} retired", sim.core.cycle_count, sim.core.retired_count);
    Ok(())
}
