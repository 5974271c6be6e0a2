//! The multi-cycle, non-pipelined execution engine.
//!
//! Every executing clock cycle performs the work of exactly one FSM state and
//! ends with a memory commit. Per-class state sequences:
//!
//! | class        | states                                          | cycles |
//! |--------------|-------------------------------------------------|--------|
//! | R/I-type ALU | Fetch, Decode, Execute, AluWriteback            | 4      |
//! | lw           | Fetch, Decode, MemAddr, MemRead, LoadWriteback  | 5      |
//! | sw           | Fetch, Decode, MemAddr, MemWrite                | 4      |
//! | beq          | Fetch, Decode, BranchCompletion                 | 3      |
//! | jal          | Fetch, Decode, JumpLink, AluWriteback           | 4      |

use std::fmt;

use thiserror::Error;

use crate::isa::{decode, DecodeError, DecodedInstruction, InstrClass, Mnemonic, Reg, Word};
use crate::memory::{MemError, UnifiedMemory, WritePort};
use crate::metrics::{ClassCounts, HaltReason, RunReport};

/// Operating mode derived from the IE, reset and write-enable lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlMode {
    /// IE low, reset low, external writes enabled.
    Programming,
    /// Reset high; pc held at zero.
    ResetHold,
    /// IE high, reset low.
    Executing,
    /// IE low, writes disabled: memory may only be read.
    Observation,
}

impl ControlMode {
    /// Resolves the three control lines. Reset dominates.
    pub fn from_lines(ie: bool, reset: bool, write_enable: bool) -> ControlMode {
        match (reset, ie, write_enable) {
            (true, _, _) => ControlMode::ResetHold,
            (false, true, _) => ControlMode::Executing,
            (false, false, true) => ControlMode::Programming,
            (false, false, false) => ControlMode::Observation,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ControlMode::Programming => "programming",
            ControlMode::ResetHold => "reset_hold",
            ControlMode::Executing => "executing",
            ControlMode::Observation => "observation",
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FsmState {
    Fetch,
    Decode,
    Execute,
    AluWriteback,
    MemAddr,
    MemRead,
    LoadWriteback,
    MemWrite,
    BranchCompletion,
    JumpLink,
}

impl FsmState {
    pub const fn name(self) -> &'static str {
        match self {
            FsmState::Fetch => "fetch",
            FsmState::Decode => "decode",
            FsmState::Execute => "execute",
            FsmState::AluWriteback => "alu_writeback",
            FsmState::MemAddr => "mem_addr",
            FsmState::MemRead => "mem_read",
            FsmState::LoadWriteback => "load_writeback",
            FsmState::MemWrite => "mem_write",
            FsmState::BranchCompletion => "branch_completion",
            FsmState::JumpLink => "jump_link",
        }
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// 32 integer registers; x0 reads as zero and ignores writes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegisterFile([Word; 32]);

impl RegisterFile {
    pub fn read(&self, reg: Reg) -> Word {
        self.0[reg.index()]
    }

    pub fn write(&mut self, reg: Reg, value: Word) {
        if reg != Reg::ZERO {
            self.0[reg.index()] = value;
        }
    }

    pub fn as_array(&self) -> &[Word; 32] {
        &self.0
    }
}

/// The data side of the core: memory plus whatever else is mapped.
pub trait Bus {
    /// Instruction fetch. Only backing memory is executable.
    fn fetch(&self, addr: u32) -> Result<Word, BusError>;
    fn load(&mut self, addr: u32, cycle: u64) -> Result<Word, BusError>;
    /// Store from the core. Memory stores become visible after `commit_cycle`.
    fn store(&mut self, addr: u32, value: Word, cycle: u64) -> Result<(), BusError>;
    /// Clock edge.
    fn commit_cycle(&mut self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BusError {
    #[error(transparent)]
    Memory(#[from] MemError),
    #[error("unmapped address 0x{0:08X}")]
    Unmapped(u32),
}

impl Bus for UnifiedMemory {
    fn fetch(&self, addr: u32) -> Result<Word, BusError> {
        Ok(self.read_word(addr)?)
    }

    fn load(&mut self, addr: u32, _cycle: u64) -> Result<Word, BusError> {
        Ok(self.read_word(addr)?)
    }

    fn store(&mut self, addr: u32, value: Word, _cycle: u64) -> Result<(), BusError> {
        Ok(self.schedule_write(addr, value, WritePort::Core, ControlMode::Executing)?)
    }

    fn commit_cycle(&mut self) {
        UnifiedMemory::commit_cycle(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FaultKind {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("control transfer to misaligned address 0x{0:08X}")]
    MisalignedTarget(u32),
}

/// A runtime fault, with the instruction address and FSM state it hit in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("pc=0x{pc:08X} state={state} cycle={cycle}: {kind}")]
pub struct CoreFault {
    pub pc: u32,
    pub state: FsmState,
    pub cycle: u64,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("core is not executing (mode {0})")]
    NotExecuting(ControlMode),
    #[error("cycle budget must be positive")]
    ZeroBudget,
    #[error(transparent)]
    Fault(#[from] CoreFault),
}

/// When `run` stops on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HaltPolicy {
    /// Stop once a jal or beq retires with its own address as the next pc.
    #[default]
    SelfLoop,
    /// Run until the budget is spent or a fault occurs.
    BudgetOnly,
}

/// One clock cycle as seen from outside the core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub cycle: u64,
    pub mode: ControlMode,
    /// `None` for a held (non-executing) cycle.
    pub state: Option<FsmState>,
    /// Address of the instruction in flight.
    pub pc: u32,
    pub ir: Word,
    pub retired: Option<DecodedInstruction>,
}

impl TraceRecord {
    /// `cycle,mode,fsm_state,pc_hex,ir_hex,disasm,retired`; the disassembly is
    /// quoted because it contains commas.
    pub fn to_csv(&self) -> String {
        let state = self.state.map_or("held", FsmState::name);
        let disasm = match decode(self.ir) {
            Ok(instr) => instr.to_string(),
            Err(_) => format!(".word 0x{:08X}", self.ir),
        };
        format!(
            "{},{},{},0x{:08X},0x{:08X},\"{}\",{}",
            self.cycle,
            self.mode,
            state,
            self.pc,
            self.ir,
            disasm,
            u8::from(self.retired.is_some())
        )
    }
}

/// Architectural and micro-architectural state of the core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Core {
    pub pc: u32,
    pub regs: RegisterFile,
    pub fsm: FsmState,
    pub mode: ControlMode,
    /// Address the instruction in flight was fetched from.
    pub instr_pc: u32,
    pub ir: Word,
    pub decoded: Option<DecodedInstruction>,
    pub a: Word,
    pub b: Word,
    pub alu_out: Word,
    pub mdr: Word,
    /// Executing cycles since reset.
    pub cycle_count: u64,
    /// Non-executing cycles since reset.
    pub held_cycles: u64,
    pub retired_count: u64,
}

impl Default for Core {
    fn default() -> Self {
        Core::new()
    }
}

impl Core {
    /// Power-on state: everything zero, outputs held in reset.
    pub fn new() -> Core {
        Core {
            pc: 0,
            regs: RegisterFile::default(),
            fsm: FsmState::Fetch,
            mode: ControlMode::ResetHold,
            instr_pc: 0,
            ir: 0,
            decoded: None,
            a: 0,
            b: 0,
            alu_out: 0,
            mdr: 0,
            cycle_count: 0,
            held_cycles: 0,
            retired_count: 0,
        }
    }

    pub fn clock(&self) -> u64 {
        self.cycle_count + self.held_cycles
    }

    /// Drives the control lines. Asserting reset zeroes the pc, returns the
    /// FSM to Fetch and clears the temporaries and counters; the register
    /// file keeps its contents.
    pub fn apply_control(&mut self, ie: bool, reset: bool, write_enable: bool) -> ControlMode {
        let mode = ControlMode::from_lines(ie, reset, write_enable);
        if mode == ControlMode::ResetHold {
            *self = Core { regs: std::mem::take(&mut self.regs), ..Core::new() };
        }
        self.mode = mode;
        mode
    }

    /// Advances one clock cycle.
    pub fn step_cycle<B: Bus + ?Sized>(&mut self, bus: &mut B) -> Result<TraceRecord, CoreError> {
        let cycle = self.clock();
        if self.mode != ControlMode::Executing {
            self.held_cycles += 1;
            return Ok(TraceRecord {
                cycle,
                mode: self.mode,
                state: None,
                pc: self.pc,
                ir: self.ir,
                retired: None,
            });
        }

        let state = self.fsm;
        let fault = |pc: u32, kind: FaultKind| CoreFault { pc, state, cycle, kind };
        let mut retired = None;

        let next = match state {
            FsmState::Fetch => {
                let ir = bus.fetch(self.pc).map_err(|e| fault(self.pc, e.into()))?;
                self.instr_pc = self.pc;
                self.ir = ir;
                self.decoded = None;
                self.pc = self.pc.wrapping_add(4);
                FsmState::Decode
            }
            FsmState::Decode => {
                let instr = decode(self.ir).map_err(|e| fault(self.instr_pc, e.into()))?;
                self.decoded = Some(instr);
                self.a = self.regs.read(instr.rs1);
                self.b = self.regs.read(instr.rs2);
                match instr.class() {
                    InstrClass::RTypeAlu | InstrClass::ITypeAlu => FsmState::Execute,
                    InstrClass::Load | InstrClass::Store => FsmState::MemAddr,
                    InstrClass::Branch => FsmState::BranchCompletion,
                    InstrClass::Jump => FsmState::JumpLink,
                }
            }
            FsmState::Execute => {
                let instr = self.in_flight();
                let rhs = match instr.class() {
                    InstrClass::RTypeAlu => self.b,
                    _ => instr.imm as Word,
                };
                self.alu_out = alu(instr.op, self.a, rhs);
                FsmState::AluWriteback
            }
            FsmState::AluWriteback => {
                let instr = self.in_flight();
                self.regs.write(instr.rd, self.alu_out);
                retired = Some(instr);
                FsmState::Fetch
            }
            FsmState::MemAddr => {
                let instr = self.in_flight();
                self.alu_out = self.a.wrapping_add(instr.imm as Word);
                if instr.class() == InstrClass::Load {
                    FsmState::MemRead
                } else {
                    FsmState::MemWrite
                }
            }
            FsmState::MemRead => {
                self.mdr = bus.load(self.alu_out, cycle).map_err(|e| fault(self.instr_pc, e.into()))?;
                FsmState::LoadWriteback
            }
            FsmState::LoadWriteback => {
                let instr = self.in_flight();
                self.regs.write(instr.rd, self.mdr);
                retired = Some(instr);
                FsmState::Fetch
            }
            FsmState::MemWrite => {
                bus.store(self.alu_out, self.b, cycle).map_err(|e| fault(self.instr_pc, e.into()))?;
                retired = Some(self.in_flight());
                FsmState::Fetch
            }
            FsmState::BranchCompletion => {
                let instr = self.in_flight();
                if self.a == self.b {
                    self.pc = self.transfer_target(instr.imm).map_err(|k| fault(self.instr_pc, k))?;
                }
                retired = Some(instr);
                FsmState::Fetch
            }
            FsmState::JumpLink => {
                let instr = self.in_flight();
                let target = self.transfer_target(instr.imm).map_err(|k| fault(self.instr_pc, k))?;
                self.alu_out = self.instr_pc.wrapping_add(4);
                self.pc = target;
                FsmState::AluWriteback
            }
        };

        bus.commit_cycle();
        self.fsm = next;
        self.cycle_count += 1;
        if retired.is_some() {
            self.retired_count += 1;
        }
        Ok(TraceRecord { cycle, mode: self.mode, state: Some(state), pc: self.instr_pc, ir: self.ir, retired })
    }

    fn in_flight(&self) -> DecodedInstruction {
        self.decoded.expect("states after Decode always carry a decoded instruction")
    }

    fn transfer_target(&self, offset: i32) -> Result<u32, FaultKind> {
        let target = self.instr_pc.wrapping_add(offset as u32);
        if !target.is_multiple_of(4) {
            return Err(FaultKind::MisalignedTarget(target));
        }
        Ok(target)
    }

    /// Steps cycles until the instruction in flight retires.
    pub fn step_instruction<B: Bus + ?Sized>(&mut self, bus: &mut B) -> Result<(DecodedInstruction, u32), CoreError> {
        if self.mode != ControlMode::Executing {
            return Err(CoreError::NotExecuting(self.mode));
        }
        let mut cycles = 0;
        loop {
            let record = self.step_cycle(bus)?;
            cycles += 1;
            if let Some(instr) = record.retired {
                return Ok((instr, cycles));
            }
        }
    }

    pub fn run<B: Bus + ?Sized>(&mut self, bus: &mut B, max_cycles: u64, halt: HaltPolicy) -> Result<RunReport, CoreError> {
        self.run_traced(bus, max_cycles, halt, |_| {})
    }

    /// Runs until halt, fault or budget exhaustion, handing every cycle's
    /// trace record to `sink`. Faults end the run and are reported in the
    /// returned report rather than as an error.
    pub fn run_traced<B, F>(&mut self, bus: &mut B, max_cycles: u64, halt: HaltPolicy, mut sink: F) -> Result<RunReport, CoreError>
    where
        B: Bus + ?Sized,
        F: FnMut(&TraceRecord),
    {
        if max_cycles == 0 {
            return Err(CoreError::ZeroBudget);
        }
        if self.mode != ControlMode::Executing {
            return Err(CoreError::NotExecuting(self.mode));
        }
        let start_cycles = self.cycle_count;
        let start_held = self.held_cycles;
        let mut retired = ClassCounts::default();
        let mut reason = HaltReason::BudgetExhausted;

        while self.cycle_count - start_cycles < max_cycles {
            let record = match self.step_cycle(bus) {
                Ok(record) => record,
                Err(CoreError::Fault(fault)) => {
                    reason = HaltReason::Fault(fault);
                    break;
                }
                Err(other) => return Err(other),
            };
            sink(&record);
            if let Some(instr) = record.retired {
                retired.add(instr.class());
                if halt == HaltPolicy::SelfLoop && self.pc == self.instr_pc {
                    reason = HaltReason::SelfLoop { pc: self.pc };
                    break;
                }
            }
        }

        Ok(RunReport {
            total_cycles: self.cycle_count - start_cycles,
            held_cycles: self.held_cycles - start_held,
            retired,
            halt_reason: reason,
            final_state: self.clone(),
        })
    }
}

/// RV32I integer ALU.
fn alu(op: Mnemonic, lhs: Word, rhs: Word) -> Word {
    use Mnemonic::*;
    let shamt = rhs & 0x1f;
    match op {
        Add | Addi | Lw | Sw | Beq | Jal => lhs.wrapping_add(rhs),
        Sub => lhs.wrapping_sub(rhs),
        Sll | Slli => lhs << shamt,
        Slt | Slti => Word::from((lhs as i32) < (rhs as i32)),
        Sltu | Sltiu => Word::from(lhs < rhs),
        Xor | Xori => lhs ^ rhs,
        Srl | Srli => lhs >> shamt,
        Sra | Srai => ((lhs as i32) >> shamt) as Word,
        Or | Ori => lhs | rhs,
        And | Andi => lhs & rhs,
    }
}
