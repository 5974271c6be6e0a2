//! Functional reference model: one whole instruction per step, no FSM and no
//! cycle model. Used to cross-check the multi-cycle engine.

use thiserror::Error;

use crate::image::MemoryImage;
use crate::isa::{decode, DecodedInstruction, Mnemonic, Word};
use crate::memory::DEFAULT_MEMORY_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("pc=0x{pc:08X}: unsupported instruction 0x{word:08X}")]
    Unsupported { pc: u32, word: Word },
    #[error("pc=0x{pc:08X}: bad memory access at 0x{addr:08X}")]
    BadAccess { pc: u32, addr: u32 },
    #[error("pc=0x{pc:08X}: control transfer to misaligned 0x{target:08X}")]
    MisalignedTarget { pc: u32, target: u32 },
    #[error("image does not fit in {size} bytes of memory")]
    ImageTooLarge { size: u32 },
}

/// Final architectural state of a reference run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceState {
    pub regs: [Word; 32],
    pub memory: Vec<Word>,
    pub pc: u32,
    pub retired: u64,
    /// Stopped on a self-targeting jump or branch.
    pub halted: bool,
}

#[derive(Debug, Clone)]
pub struct ReferenceMachine {
    regs: [Word; 32],
    memory: Vec<Word>,
    pc: u32,
    retired: u64,
}

impl ReferenceMachine {
    pub fn new(size_bytes: u32) -> Self {
        ReferenceMachine { regs: [0; 32], memory: vec![0; size_bytes as usize / 4], pc: 0, retired: 0 }
    }

    pub fn load(&mut self, image: &MemoryImage) -> Result<(), OracleError> {
        let size = (self.memory.len() * 4) as u32;
        if !image.base_address.is_multiple_of(4) || image.end_address() > size as u64 {
            return Err(OracleError::ImageTooLarge { size });
        }
        let start = image.base_address as usize / 4;
        self.memory[start..start + image.len()].copy_from_slice(&image.words);
        Ok(())
    }

    pub fn set_pc(&mut self, pc: u32) {
        self.pc = pc;
    }

    pub fn pc(&self) -> u32 {
        self.pc
    }

    pub fn regs(&self) -> &[Word; 32] {
        &self.regs
    }

    pub fn memory(&self) -> &[Word] {
        &self.memory
    }

    fn word_index(&self, pc: u32, addr: u32) -> Result<usize, OracleError> {
        let index = addr as usize / 4;
        if !addr.is_multiple_of(4) || index >= self.memory.len() {
            return Err(OracleError::BadAccess { pc, addr });
        }
        Ok(index)
    }

    /// Executes one instruction and returns it.
    pub fn step(&mut self) -> Result<DecodedInstruction, OracleError> {
        use Mnemonic::*;

        let pc = self.pc;
        let word = self.memory[self.word_index(pc, pc)?];
        let instr = decode(word).map_err(|_| OracleError::Unsupported { pc, word })?;
        let rs1 = self.regs[instr.rs1.index()];
        let rs2 = self.regs[instr.rs2.index()];
        let imm = instr.imm as u32;
        let shift_by = |v: u32| v & 31;
        let mut next_pc = pc.wrapping_add(4);
        let mut result: Option<Word> = None;

        match instr.op {
            Add => result = Some(rs1.wrapping_add(rs2)),
            Sub => result = Some(rs1.wrapping_sub(rs2)),
            Sll => result = Some(rs1.wrapping_shl(shift_by(rs2))),
            Slt => result = Some(if (rs1 as i32) < (rs2 as i32) { 1 } else { 0 }),
            Sltu => result = Some(if rs1 < rs2 { 1 } else { 0 }),
            Xor => result = Some(rs1 ^ rs2),
            Srl => result = Some(rs1.wrapping_shr(shift_by(rs2))),
            Sra => result = Some((rs1 as i32).wrapping_shr(shift_by(rs2)) as u32),
            Or => result = Some(rs1 | rs2),
            And => result = Some(rs1 & rs2),
            Addi => result = Some(rs1.wrapping_add(imm)),
            Slti => result = Some(if (rs1 as i32) < instr.imm { 1 } else { 0 }),
            Sltiu => result = Some(if rs1 < imm { 1 } else { 0 }),
            Xori => result = Some(rs1 ^ imm),
            Ori => result = Some(rs1 | imm),
            Andi => result = Some(rs1 & imm),
            Slli => result = Some(rs1.wrapping_shl(imm)),
            Srli => result = Some(rs1.wrapping_shr(imm)),
            Srai => result = Some((rs1 as i32).wrapping_shr(imm) as u32),
            Lw => {
                let index = self.word_index(pc, rs1.wrapping_add(imm))?;
                result = Some(self.memory[index]);
            }
            Sw => {
                let index = self.word_index(pc, rs1.wrapping_add(imm))?;
                self.memory[index] = rs2;
            }
            Beq => {
                if rs1 == rs2 {
                    next_pc = pc.wrapping_add(imm);
                }
            }
            Jal => {
                result = Some(pc.wrapping_add(4));
                next_pc = pc.wrapping_add(imm);
            }
        }
        if !next_pc.is_multiple_of(4) {
            return Err(OracleError::MisalignedTarget { pc, target: next_pc });
        }
        if let Some(value) = result {
            if instr.rd.index() != 0 {
                self.regs[instr.rd.index()] = value;
            }
        }
        self.pc = next_pc;
        self.retired += 1;
        Ok(instr)
    }

    pub fn into_state(self, halted: bool) -> ReferenceState {
        ReferenceState { regs: self.regs, memory: self.memory, pc: self.pc, retired: self.retired, halted }
    }
}

/// Runs `image` from `entry` in a fresh zeroed memory of `size_bytes` until a
/// self-loop retires or `max_instrs` instructions have executed.
pub fn reference_execute_in(
    image: &MemoryImage,
    entry: u32,
    max_instrs: u64,
    size_bytes: u32,
) -> Result<ReferenceState, OracleError> {
    let mut machine = ReferenceMachine::new(size_bytes);
    machine.load(image)?;
    machine.set_pc(entry);
    for _ in 0..max_instrs {
        let pc = machine.pc;
        machine.step()?;
        if machine.pc == pc {
            return Ok(machine.into_state(true));
        }
    }
    Ok(machine.into_state(false))
}

/// [`reference_execute_in`] with the default 4 KiB memory.
pub fn reference_execute(image: &MemoryImage, entry: u32, max_instrs: u64) -> Result<ReferenceState, OracleError> {
    reference_execute_in(image, entry, max_instrs, DEFAULT_MEMORY_BYTES)
}
