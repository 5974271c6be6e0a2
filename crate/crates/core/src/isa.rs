//! The RV32I subset executed by the core, with bit-exact decode and encode.
//!
//! Supported: the ten R-type ALU operations, the nine I-type ALU operations
//! (including the three immediate shifts), `lw`, `sw`, `beq` and `jal`.
//! Everything else (jalr, other branches, sub-word memory ops, lui, auipc,
//! fence, system) decodes to [`DecodeError::Unsupported`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A 32-bit machine word: instructions, data and the external write port all
/// share this width.
pub type Word = u32;

/// An integer register index, always in `0..32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Reg(u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);

    pub const fn new(index: u8) -> Option<Reg> {
        if index < 32 {
            Some(Reg(index))
        } else {
            None
        }
    }

    /// Builds a register from the low five bits of `bits`.
    const fn from_field(bits: u32) -> Reg {
        Reg((bits & 0x1f) as u8)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

impl FromStr for Reg {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix('x').ok_or(())?;
        if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
            return Err(());
        }
        let index: u8 = digits.parse().map_err(|_| ())?;
        Reg::new(index).ok_or(())
    }
}

/// Instruction classes, each with a fixed cycle cost on the multi-cycle core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InstrClass {
    RTypeAlu,
    ITypeAlu,
    Load,
    Store,
    Branch,
    Jump,
}

impl InstrClass {
    pub const ALL: [InstrClass; 6] = [
        InstrClass::RTypeAlu,
        InstrClass::ITypeAlu,
        InstrClass::Load,
        InstrClass::Store,
        InstrClass::Branch,
        InstrClass::Jump,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            InstrClass::RTypeAlu => "r_type",
            InstrClass::ITypeAlu => "i_type",
            InstrClass::Load => "load",
            InstrClass::Store => "store",
            InstrClass::Branch => "branch",
            InstrClass::Jump => "jump",
        }
    }

    pub(crate) const fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for InstrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Clock cycles the core spends on one instruction of `class`.
pub const fn cycle_cost(class: InstrClass) -> u32 {
    match class {
        InstrClass::Load => 5,
        InstrClass::Branch => 3,
        InstrClass::RTypeAlu | InstrClass::ITypeAlu | InstrClass::Store | InstrClass::Jump => 4,
    }
}

/// Encoding format of an instruction; decides which fields are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    R,
    I,
    /// I-type shift: the immediate is a 5-bit shift amount.
    Shift,
    S,
    B,
    J,
}

macro_rules! mnemonics {
    ($($variant:ident => $text:literal, $class:ident, $format:ident;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Mnemonic {
            $($variant,)*
        }

        impl Mnemonic {
            pub const ALL: &'static [Mnemonic] = &[$(Mnemonic::$variant,)*];

            pub const fn name(self) -> &'static str {
                match self {
                    $(Mnemonic::$variant => $text,)*
                }
            }

            pub const fn class(self) -> InstrClass {
                match self {
                    $(Mnemonic::$variant => InstrClass::$class,)*
                }
            }

            pub const fn format(self) -> Format {
                match self {
                    $(Mnemonic::$variant => Format::$format,)*
                }
            }
        }

        impl FromStr for Mnemonic {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok(Mnemonic::$variant),)*
                    _ => Err(()),
                }
            }
        }
    };
}

mnemonics! {
    Add => "add", RTypeAlu, R;
    Sub => "sub", RTypeAlu, R;
    Sll => "sll", RTypeAlu, R;
    Slt => "slt", RTypeAlu, R;
    Sltu => "sltu", RTypeAlu, R;
    Xor => "xor", RTypeAlu, R;
    Srl => "srl", RTypeAlu, R;
    Sra => "sra", RTypeAlu, R;
    Or => "or", RTypeAlu, R;
    And => "and", RTypeAlu, R;
    Addi => "addi", ITypeAlu, I;
    Slti => "slti", ITypeAlu, I;
    Sltiu => "sltiu", ITypeAlu, I;
    Xori => "xori", ITypeAlu, I;
    Ori => "ori", ITypeAlu, I;
    Andi => "andi", ITypeAlu, I;
    Slli => "slli", ITypeAlu, Shift;
    Srli => "srli", ITypeAlu, Shift;
    Srai => "srai", ITypeAlu, Shift;
    Lw => "lw", Load, I;
    Sw => "sw", Store, S;
    Beq => "beq", Branch, B;
    Jal => "jal", Jump, J;
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Format {
    /// Inclusive range of immediates the format can carry.
    pub const fn imm_range(self) -> (i32, i32) {
        match self {
            Format::R => (0, 0),
            Format::I | Format::S => (-2048, 2047),
            Format::Shift => (0, 31),
            Format::B => (-4096, 4094),
            Format::J => (-(1 << 20), (1 << 20) - 2),
        }
    }

    const fn uses_rd(self) -> bool {
        matches!(self, Format::R | Format::I | Format::Shift | Format::J)
    }

    const fn uses_rs1(self) -> bool {
        !matches!(self, Format::J)
    }

    const fn uses_rs2(self) -> bool {
        matches!(self, Format::R | Format::S | Format::B)
    }
}

/// One decoded instruction. Fields the format does not use are zero, which
/// keeps decode and encode exact inverses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecodedInstruction {
    pub op: Mnemonic,
    pub rd: Reg,
    pub rs1: Reg,
    pub rs2: Reg,
    pub imm: i32,
}

impl DecodedInstruction {
    pub fn class(&self) -> InstrClass {
        self.op.class()
    }

    pub fn cycle_cost(&self) -> u32 {
        cycle_cost(self.class())
    }

    /// Register-register ALU operation.
    pub fn r(op: Mnemonic, rd: Reg, rs1: Reg, rs2: Reg) -> Self {
        DecodedInstruction { op, rd, rs1, rs2, imm: 0 }
    }

    /// Register-immediate ALU operation, immediate shift, or `lw`.
    pub fn i(op: Mnemonic, rd: Reg, rs1: Reg, imm: i32) -> Self {
        DecodedInstruction { op, rd, rs1, rs2: Reg::ZERO, imm }
    }

    /// `sw rs2, imm(rs1)`.
    pub fn store(rs2: Reg, imm: i32, rs1: Reg) -> Self {
        DecodedInstruction { op: Mnemonic::Sw, rd: Reg::ZERO, rs1, rs2, imm }
    }

    pub fn beq(rs1: Reg, rs2: Reg, offset: i32) -> Self {
        DecodedInstruction { op: Mnemonic::Beq, rd: Reg::ZERO, rs1, rs2, imm: offset }
    }

    pub fn jal(rd: Reg, offset: i32) -> Self {
        DecodedInstruction { op: Mnemonic::Jal, rd, rs1: Reg::ZERO, rs2: Reg::ZERO, imm: offset }
    }
}

impl fmt::Display for DecodedInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let DecodedInstruction { op, rd, rs1, rs2, imm } = *self;
        match op.format() {
            Format::R => write!(f, "{op} {rd}, {rs1}, {rs2}"),
            Format::I if op == Mnemonic::Lw => write!(f, "{op} {rd}, {imm}({rs1})"),
            Format::I | Format::Shift => write!(f, "{op} {rd}, {rs1}, {imm}"),
            Format::S => write!(f, "{op} {rs2}, {imm}({rs1})"),
            Format::B => write!(f, "{op} {rs1}, {rs2}, {imm}"),
            Format::J => write!(f, "{op} {rd}, {imm}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unsupported instruction 0x{0:08X}")]
    Unsupported(Word),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("{op}: immediate {imm} outside [{min}, {max}]")]
    ImmediateOutOfRange { op: Mnemonic, imm: i32, min: i32, max: i32 },
    #[error("{op}: offset {imm} is odd")]
    MisalignedImmediate { op: Mnemonic, imm: i32 },
    #[error("{op}: operand field not used by this format must be zero")]
    UnusedField { op: Mnemonic },
}

const OPC_LOAD: u32 = 0b000_0011;
const OPC_OP_IMM: u32 = 0b001_0011;
const OPC_STORE: u32 = 0b010_0011;
const OPC_OP: u32 = 0b011_0011;
const OPC_BRANCH: u32 = 0b110_0011;
const OPC_JAL: u32 = 0b110_1111;

const FUNCT7_ALT: u32 = 0b010_0000;

fn sign_extend(value: u32, bits: u32) -> i32 {
    let shift = 32 - bits;
    ((value << shift) as i32) >> shift
}

fn imm_i(word: Word) -> i32 {
    (word as i32) >> 20
}

fn imm_s(word: Word) -> i32 {
    sign_extend(((word >> 25) << 5) | ((word >> 7) & 0x1f), 12)
}

fn imm_b(word: Word) -> i32 {
    let bits = ((word >> 31) & 1) << 12
        | ((word >> 7) & 1) << 11
        | ((word >> 25) & 0x3f) << 5
        | ((word >> 8) & 0xf) << 1;
    sign_extend(bits, 13)
}

fn imm_j(word: Word) -> i32 {
    let bits = ((word >> 31) & 1) << 20
        | ((word >> 12) & 0xff) << 12
        | ((word >> 20) & 1) << 11
        | ((word >> 21) & 0x3ff) << 1;
    sign_extend(bits, 21)
}

/// Decodes one instruction word.
pub fn decode(word: Word) -> Result<DecodedInstruction, DecodeError> {
    use Mnemonic::*;

    let unsupported = Err(DecodeError::Unsupported(word));
    let opcode = word & 0x7f;
    let rd = Reg::from_field(word >> 7);
    let funct3 = (word >> 12) & 0x7;
    let rs1 = Reg::from_field(word >> 15);
    let rs2 = Reg::from_field(word >> 20);
    let funct7 = word >> 25;

    let instr = match opcode {
        OPC_OP => {
            let op = match (funct7, funct3) {
                (0, 0) => Add,
                (FUNCT7_ALT, 0) => Sub,
                (0, 1) => Sll,
                (0, 2) => Slt,
                (0, 3) => Sltu,
                (0, 4) => Xor,
                (0, 5) => Srl,
                (FUNCT7_ALT, 5) => Sra,
                (0, 6) => Or,
                (0, 7) => And,
                _ => return unsupported,
            };
            DecodedInstruction::r(op, rd, rs1, rs2)
        }
        OPC_OP_IMM => {
            let op = match (funct3, funct7) {
                (0, _) => Addi,
                (2, _) => Slti,
                (3, _) => Sltiu,
                (4, _) => Xori,
                (6, _) => Ori,
                (7, _) => Andi,
                (1, 0) => Slli,
                (5, 0) => Srli,
                (5, FUNCT7_ALT) => Srai,
                _ => return unsupported,
            };
            let imm = if op.format() == Format::Shift { rs2.index() as i32 } else { imm_i(word) };
            DecodedInstruction::i(op, rd, rs1, imm)
        }
        OPC_LOAD if funct3 == 2 => DecodedInstruction::i(Lw, rd, rs1, imm_i(word)),
        OPC_STORE if funct3 == 2 => DecodedInstruction::store(rs2, imm_s(word), rs1),
        OPC_BRANCH if funct3 == 0 => DecodedInstruction::beq(rs1, rs2, imm_b(word)),
        OPC_JAL => DecodedInstruction::jal(rd, imm_j(word)),
        _ => return unsupported,
    };
    Ok(instr)
}

const fn funct3(op: Mnemonic) -> u32 {
    use Mnemonic::*;
    match op {
        Add | Sub | Addi | Beq => 0,
        Sll | Slli => 1,
        Slt | Slti | Lw | Sw => 2,
        Sltu | Sltiu => 3,
        Xor | Xori => 4,
        Srl | Sra | Srli | Srai => 5,
        Or | Ori => 6,
        And | Andi => 7,
        Jal => 0,
    }
}

/// Encodes an instruction, checking the immediate against its format.
pub fn encode(instr: &DecodedInstruction) -> Result<Word, EncodeError> {
    use Mnemonic::*;

    let DecodedInstruction { op, rd, rs1, rs2, imm } = *instr;
    let format = op.format();
    let (min, max) = format.imm_range();
    if imm < min || imm > max {
        return Err(EncodeError::ImmediateOutOfRange { op, imm, min, max });
    }
    if matches!(format, Format::B | Format::J) && imm & 1 != 0 {
        return Err(EncodeError::MisalignedImmediate { op, imm });
    }
    if (!format.uses_rd() && rd != Reg::ZERO)
        || (!format.uses_rs1() && rs1 != Reg::ZERO)
        || (!format.uses_rs2() && rs2 != Reg::ZERO)
    {
        return Err(EncodeError::UnusedField { op });
    }

    let rd = (rd.index() as u32) << 7;
    let rs1 = (rs1.index() as u32) << 15;
    let rs2 = (rs2.index() as u32) << 20;
    let f3 = funct3(op) << 12;
    let uimm = imm as u32;

    let word = match format {
        Format::R => {
            let f7 = if matches!(op, Sub | Sra) { FUNCT7_ALT } else { 0 };
            f7 << 25 | rs2 | rs1 | f3 | rd | OPC_OP
        }
        Format::Shift => {
            let f7 = if op == Srai { FUNCT7_ALT } else { 0 };
            f7 << 25 | (uimm & 0x1f) << 20 | rs1 | f3 | rd | OPC_OP_IMM
        }
        Format::I => {
            let opcode = if op == Lw { OPC_LOAD } else { OPC_OP_IMM };
            (uimm & 0xfff) << 20 | rs1 | f3 | rd | opcode
        }
        Format::S => {
            (uimm >> 5 & 0x7f) << 25 | rs2 | rs1 | f3 | (uimm & 0x1f) << 7 | OPC_STORE
        }
        Format::B => {
            (uimm >> 12 & 1) << 31
                | (uimm >> 5 & 0x3f) << 25
                | rs2
                | rs1
                | f3
                | (uimm >> 1 & 0xf) << 8
                | (uimm >> 11 & 1) << 7
                | OPC_BRANCH
        }
        Format::J => {
            (uimm >> 20 & 1) << 31
                | (uimm >> 1 & 0x3ff) << 21
                | (uimm >> 11 & 1) << 20
                | (uimm >> 12 & 0xff) << 12
                | rd
                | OPC_JAL
        }
    };
    Ok(word)
}
