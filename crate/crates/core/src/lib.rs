//! Cycle-accurate model of a small multi-cycle RV32I controller core.
//!
//! The core is non-pipelined and shares a single memory between instructions
//! and data. Firmware is written through an external port while the core is
//! held off, then execution is started explicitly by pulsing reset and
//! raising the instruction-enable line. Alongside the core the crate provides:
//!
//! * [`isa`]: the supported RV32I subset with bit-exact decode and encode,
//! * [`asm`]: a two-pass assembler and a disassembler,
//! * [`image`]: memory images and the `$readmemh`-style hex format,
//! * [`memory`]: the unified memory with synchronous writes,
//! * [`cpu`]: the multi-cycle FSM (lw 5 cycles, beq 3, everything else 4),
//! * [`oracle`]: a functional reference model for cross-checking,
//! * [`harness`]: the bring-up protocol, observation mode and stub peripherals,
//! * [`metrics`]: CPI, energy and power accounting.
//!
//! ```
//! use biorv::{asm::assemble_str, cpu::HaltPolicy, harness::Simulator};
//!
//! let image = assemble_str("addi x1, x0, 5\nhalt: jal x0, halt", 0).unwrap();
//! let mut sim = Simulator::default();
//! sim.program_and_start(&image).unwrap();
//! let report = sim.run(1_000, HaltPolicy::SelfLoop).unwrap();
//! assert_eq!(report.total_cycles, 8);
//! assert_eq!(report.final_state.regs.as_array()[1], 5);
//! ```

pub mod asm;
pub mod cpu;
pub mod harness;
pub mod image;
pub mod isa;
pub mod memory;
pub mod metrics;
pub mod oracle;
pub mod programs;
pub mod selftest;

pub use asm::{assemble, assemble_str, disassemble, SourceProgram};
pub use cpu::{ControlMode, Core, FsmState, HaltPolicy, TraceRecord};
pub use harness::{BringUpScript, PeripheralMap, Simulator};
pub use image::MemoryImage;
pub use isa::{cycle_cost, decode, encode, DecodedInstruction, InstrClass, Mnemonic, Reg, Word};
pub use memory::UnifiedMemory;
pub use metrics::{EnergyModel, RunReport};
pub use oracle::reference_execute;
