//! Assemble a small program, print its hex image, then disassemble it back.

use biorv::asm::{assemble_str, disassemble};
use biorv::isa::decode;

const SOURCE: &str = "
        addi x1, x0, 10      # counter
        addi x2, x0, 0
loop:   add  x2, x2, x1
        addi x1, x1, -1
        beq  x1, x0, done
        jal  x0, loop
done:   sw   x2, 0x100(x0)
halt:   jal  x0, halt
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = assemble_str(SOURCE, 0)?;
    println!("hex image:\n{}", image.to_hex());
    for (addr, word) in image.iter() {
        println!("0x{addr:04X}  {word:08X}  {}", decode(word)?);
    }
    println!("\ndisassembly:\n{}", disassemble(&image));
    Ok(())
}
