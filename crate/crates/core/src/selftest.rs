//! Built-in consistency checks run by `biorv selftest`.

use std::fmt;

use crate::asm::assemble_str;
use crate::cpu::HaltPolicy;
use crate::harness::{HarnessError, SimConfig, Simulator};
use crate::isa::{decode, encode, Word};
use crate::metrics::HaltReason;
use crate::oracle::reference_execute_in;
use crate::programs;

/// Reference encodings produced by an external RV32I assembler.
pub const GOLDEN_ENCODINGS: &[(Word, &str)] = &[
    (0x003100B3, "add x1, x2, x3"),
    (0x41DF0FB3, "sub x31, x30, x29"),
    (0x007312B3, "sll x5, x6, x7"),
    (0x00A4A433, "slt x8, x9, x10"),
    (0x00D635B3, "sltu x11, x12, x13"),
    (0x0107C733, "xor x14, x15, x16"),
    (0x013958B3, "srl x17, x18, x19"),
    (0x416ADA33, "sra x20, x21, x22"),
    (0x019C6BB3, "or x23, x24, x25"),
    (0x01CDFD33, "and x26, x27, x28"),
    (0x00000033, "add x0, x0, x0"),
    (0x00500093, "addi x1, x0, 5"),
    (0xFFF18113, "addi x2, x3, -1"),
    (0x7FF28213, "addi x4, x5, 2047"),
    (0x80038313, "addi x6, x7, -2048"),
    (0xFF94A413, "slti x8, x9, -7"),
    (0x0645B513, "sltiu x10, x11, 100"),
    (0xFFF6C613, "xori x12, x13, -1"),
    (0x5557E713, "ori x14, x15, 1365"),
    (0x0FF8F813, "andi x16, x17, 255"),
    (0x00099913, "slli x18, x19, 0"),
    (0x01FA9A13, "slli x20, x21, 31"),
    (0x005BDB13, "srli x22, x23, 5"),
    (0x41FCDC13, "srai x24, x25, 31"),
    (0x40115093, "srai x1, x2, 1"),
    (0x00002103, "lw x2, 0(x0)"),
    (0xFFC22183, "lw x3, -4(x4)"),
    (0x7FC32283, "lw x5, 2044(x6)"),
    (0x80042383, "lw x7, -2048(x8)"),
    (0x00202023, "sw x2, 0(x0)"),
    (0x00952423, "sw x9, 8(x10)"),
    (0x80B62023, "sw x11, -2048(x12)"),
    (0x7ED72FA3, "sw x13, 2047(x14)"),
    (0x00000063, "beq x0, x0, 0"),
    (0x00208463, "beq x1, x2, 8"),
    (0xFE418CE3, "beq x3, x4, -8"),
    (0x7E628FE3, "beq x5, x6, 4094"),
    (0x80838063, "beq x7, x8, -4096"),
    (0x00A48163, "beq x9, x10, 2"),
    (0x0000006F, "jal x0, 0"),
    (0x010000EF, "jal x1, 16"),
    (0xFFDFF0EF, "jal x1, -4"),
    (0x7FFFFFEF, "jal x31, 1048574"),
    (0x800002EF, "jal x5, -1048576"),
    (0x0010006F, "jal x0, 2048"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn check_encoding(word: Word, text: &str) -> Result<(), String> {
    let instr = decode(word).map_err(|e| e.to_string())?;
    if instr.to_string() != text {
        return Err(format!("decoded as `{instr}`"));
    }
    if encode(&instr) != Ok(word) {
        return Err(format!("re-encoded as {:?}", encode(&instr)));
    }
    let assembled = assemble_str(text, 0).map_err(|e| e.to_string())?;
    if assembled.words != [word] {
        return Err(format!("assembled to {:08X?}", assembled.words));
    }
    Ok(())
}

/// Runs `source` on the multi-cycle core and on the reference model and
/// compares registers, memory and pc.
pub fn check_oracle_equivalence(source: &str, max_cycles: u64) -> Result<String, String> {
    let image = assemble_str(source, 0).map_err(|e| e.to_string())?;
    let config = SimConfig::default();
    let mem_bytes = config.mem_size_bytes;
    let mut sim = Simulator::new(config).map_err(|e: HarnessError| e.to_string())?;
    sim.program_and_start(&image).map_err(|e| e.to_string())?;
    let report = sim.run(max_cycles, HaltPolicy::SelfLoop).map_err(|e| e.to_string())?;
    if !matches!(report.halt_reason, HaltReason::SelfLoop { .. }) {
        return Err(format!("core stopped with {}", report.halt_reason));
    }
    let reference = reference_execute_in(&image, 0, max_cycles, mem_bytes).map_err(|e| e.to_string())?;
    let core = &report.final_state;
    if core.regs.as_array() != &reference.regs {
        return Err("register files differ".into());
    }
    if sim.memory().words() != &reference.memory[..] {
        return Err("memories differ".into());
    }
    if core.pc != reference.pc || report.retired.total() != reference.retired {
        return Err(format!(
            "pc/retired differ: core 0x{:08X}/{} vs reference 0x{:08X}/{}",
            core.pc,
            report.retired.total(),
            reference.pc,
            reference.retired
        ));
    }
    Ok(format!("{} instructions, {} cycles", reference.retired, report.total_cycles))
}

pub fn run() -> SelftestReport {
    let mut report = SelftestReport::default();
    let mismatches: Vec<String> = GOLDEN_ENCODINGS
        .iter()
        .filter_map(|&(word, text)| check_encoding(word, text).err().map(|e| format!("{text}: {e}")))
        .collect();
    report.checks.push(Check {
        name: "golden-encodings".into(),
        passed: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("{} encodings match", GOLDEN_ENCODINGS.len())
        } else {
            mismatches.join("; ")
        },
    });

    // The pacemaker loop talks to peripherals the reference model lacks.
    for (name, source) in [("demo", programs::DEMO), ("timing", programs::TIMING)] {
        let outcome = check_oracle_equivalence(source, 100_000);
        report.checks.push(Check {
            name: format!("oracle-equivalence/{name}"),
            passed: outcome.is_ok(),
            detail: outcome.unwrap_or_else(|e| e),
        });
    }
    report
}
