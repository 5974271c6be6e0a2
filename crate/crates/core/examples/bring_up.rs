//! Drive the control lines by hand: program memory, reset, execute, then
//! observe the result without disturbing it.

use biorv::asm::assemble_str;
use biorv::cpu::HaltPolicy;
use biorv::harness::Simulator;

const SOURCE: &str = "
        addi x1, x0, 0x123
        slli x1, x1, 4
        sw   x1, 0x200(x0)
halt:   jal  x0, halt
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = assemble_str(SOURCE, 0)?;
    let mut sim = Simulator::default();

    // ie=0, reset=0, we=1: programming mode
    println!("mode: {}", sim.apply_control(false, false, true));
    println!("loaded {} words", sim.load(&image)?);
    sim.pulse_reset();
    sim.start();
    println!("mode: {}", sim.mode());

    let report = sim.run(1_000, HaltPolicy::SelfLoop)?;
    println!("{}", report.halt_reason);

    let obs = sim.observe(0x200, 4)?;
    println!("mode: {}, stopped core: {}", sim.mode(), obs.stopped_core);
    print!("{}", obs.image.to_hex());
    Ok(())
}
