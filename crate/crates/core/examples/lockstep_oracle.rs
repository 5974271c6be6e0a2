//! Run a program on the multi-cycle core and on the single-step reference
//! model side by side, comparing state after every instruction.

use biorv::asm::assemble_str;
use biorv::harness::Simulator;
use biorv::oracle::ReferenceMachine;

const SOURCE: &str = "
        addi x1, x0, -7
        srai x2, x1, 1
        srli x3, x1, 28
        sltu x4, x0, x1
        slt  x5, x1, x0
        sw   x1, 0x300(x0)
        lw   x6, 0x300(x0)
        sub  x7, x6, x1
        beq  x7, x0, ok
        addi x8, x0, 1
ok:     jal  x9, end
end:    jal  x0, end
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = assemble_str(SOURCE, 0)?;
    let mut reference = ReferenceMachine::new(4096);
    reference.load(&image)?;
    let mut sim = Simulator::default();
    sim.program_and_start(&image)?;

    loop {
        let pc = reference.pc();
        let expected = reference.step()?;
        let (instr, cycles) = sim.core.step_instruction(&mut sim.bus)?;
        let agree = instr == expected && sim.core.pc == reference.pc() && sim.core.regs.as_array() == reference.regs();
        println!("0x{pc:04X}  {:<20} {cycles} cycles  {}", instr.to_string(), if agree { "ok" } else { "MISMATCH" });
        if !agree {
            return Err("core and reference diverged".into());
        }
        if reference.pc() == pc {
            break;
        }
    }
    println!("memories equal: {}", sim.memory().words() == reference.memory());
    Ok(())
}
