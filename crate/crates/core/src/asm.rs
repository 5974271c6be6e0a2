//! Two-pass assembler and disassembler for the supported subset.
//!
//! Syntax: one statement per line, optional `label:` prefix, `#` or `//`
//! comments, registers `x0`..`x31`, decimal or `0x` immediates. Memory
//! operands use `imm(reg)`. Branch and jump targets are labels or signed byte
//! offsets relative to the instruction. Directives: `.org ADDR` moves the
//! placement address forward (the gap is zero-filled) and `.word VALUE` emits
//! a raw data word.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::image::MemoryImage;
use crate::isa::{decode, encode, DecodedInstruction, EncodeError, Format, Mnemonic, Reg, Word};

/// One parsed source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    pub label: Option<String>,
    pub mnemonic: Option<String>,
    pub operands: Vec<String>,
    /// 1-based line number in the original text.
    pub origin_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceProgram {
    pub lines: Vec<SourceLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("`{mnemonic}` expects {expected} operand(s), found {found}")]
    OperandCount { mnemonic: String, expected: usize, found: usize },
    #[error("immediate {value} outside [{min}, {max}]")]
    ImmediateOutOfRange { value: i64, min: i64, max: i64 },
    #[error("branch/jump offset {0} is not a multiple of 2")]
    BranchTargetMisaligned(i64),
    #[error("invalid register `{0}` (expected x0..x31)")]
    BadRegister(String),
    #[error("malformed operand `{0}`")]
    BadOperand(String),
    #[error("invalid label name `{0}`")]
    BadLabel(String),
    #[error("placement address 0x{0:X} is not word-aligned")]
    MisalignedAddress(u64),
    #[error(".org 0x{target:X} would move backwards from 0x{current:X}")]
    OrgBackwards { target: u64, current: u64 },
    #[error("program extends past the 32-bit address space")]
    AddressOverflow,
}

impl SourceProgram {
    pub fn parse(text: &str) -> Result<SourceProgram, AsmError> {
        let mut lines = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let origin_line = index + 1;
            let err = |kind| AsmError { line: origin_line, kind };
            let mut rest = strip_comment(raw).trim();
            let mut label = None;
            if let Some((head, tail)) = rest.split_once(':') {
                let name = head.trim();
                if !is_identifier(name) {
                    return Err(err(AsmErrorKind::BadLabel(name.to_string())));
                }
                label = Some(name.to_string());
                rest = tail.trim();
            }
            let (mnemonic, operands) = match rest.split_once(char::is_whitespace) {
                Some((m, ops)) => (Some(m), split_operands(ops)),
                None if rest.is_empty() => (None, Vec::new()),
                None => (Some(rest), Vec::new()),
            };
            if label.is_none() && mnemonic.is_none() {
                continue;
            }
            lines.push(SourceLine {
                label,
                mnemonic: mnemonic.map(|m| m.to_ascii_lowercase()),
                operands,
                origin_line,
            });
        }
        Ok(SourceProgram { lines })
    }
}

fn strip_comment(line: &str) -> &str {
    let end = [line.find("//"), line.find('#')].into_iter().flatten().min().unwrap_or(line.len());
    &line[..end]
}

fn split_operands(text: &str) -> Vec<String> {
    let text = text.trim();
    if text.is_empty() {
        return Vec::new();
    }
    text.split(',').map(|s| s.trim().to_string()).collect()
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_int(text: &str) -> Option<i64> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let magnitude = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(&hex.replace('_', ""), 16).ok()?
    } else if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
        body.parse().ok()?
    } else {
        return None;
    };
    if magnitude > u32::MAX as i64 {
        return None;
    }
    Some(if negative { -magnitude } else { magnitude })
}

enum Statement<'a> {
    Instr { op: Mnemonic, operands: &'a [String] },
    Word(&'a str),
}

/// Assembles `src` with its first word placed at `base`.
pub fn assemble(src: &SourceProgram, base: u32) -> Result<MemoryImage, AsmError> {
    if !base.is_multiple_of(4) {
        let line = src.lines.first().map_or(0, |l| l.origin_line);
        return Err(AsmError { line, kind: AsmErrorKind::MisalignedAddress(base as u64) });
    }

    // Pass 1: placement and labels.
    let mut labels: HashMap<&str, u32> = HashMap::new();
    let mut placed: Vec<(u32, usize, Statement<'_>)> = Vec::new();
    let mut addr = base as u64;
    for line in &src.lines {
        let err = |kind| AsmError { line: line.origin_line, kind };
        if addr > u32::MAX as u64 {
            return Err(err(AsmErrorKind::AddressOverflow));
        }
        if let Some(label) = &line.label {
            if labels.insert(label, addr as u32).is_some() {
                return Err(err(AsmErrorKind::DuplicateLabel(label.clone())));
            }
        }
        let Some(mnemonic) = line.mnemonic.as_deref() else { continue };
        let expect = |n: usize| {
            if line.operands.len() == n {
                Ok(())
            } else {
                Err(err(AsmErrorKind::OperandCount {
                    mnemonic: mnemonic.to_string(),
                    expected: n,
                    found: line.operands.len(),
                }))
            }
        };
        match mnemonic {
            ".org" => {
                expect(1)?;
                let target = parse_int(&line.operands[0])
                    .filter(|v| (0..=u32::MAX as i64).contains(v))
                    .ok_or_else(|| err(AsmErrorKind::BadOperand(line.operands[0].clone())))? as u64;
                if !target.is_multiple_of(4) {
                    return Err(err(AsmErrorKind::MisalignedAddress(target)));
                }
                if target < addr {
                    return Err(err(AsmErrorKind::OrgBackwards { target, current: addr }));
                }
                addr = target;
                if let Some(label) = &line.label {
                    labels.insert(label, addr as u32);
                }
            }
            ".word" => {
                expect(1)?;
                placed.push((addr as u32, line.origin_line, Statement::Word(&line.operands[0])));
                addr += 4;
            }
            _ => {
                let op: Mnemonic =
                    mnemonic.parse().map_err(|_| err(AsmErrorKind::UnknownMnemonic(mnemonic.to_string())))?;
                let arity = match op.format() {
                    _ if op == Mnemonic::Lw => 2,
                    Format::R | Format::I | Format::Shift | Format::B => 3,
                    Format::S | Format::J => 2,
                };
                expect(arity)?;
                placed.push((addr as u32, line.origin_line, Statement::Instr { op, operands: &line.operands }));
                addr += 4;
            }
        }
    }
    if addr > u32::MAX as u64 + 1 {
        let line = src.lines.last().map_or(0, |l| l.origin_line);
        return Err(AsmError { line, kind: AsmErrorKind::AddressOverflow });
    }

    // Pass 2: encoding.
    let mut words: Vec<Word> = Vec::with_capacity(placed.len());
    for (pc, line, statement) in placed {
        let err = |kind| AsmError { line, kind };
        let index = ((pc - base) / 4) as usize;
        words.resize(index, 0);
        let word = match statement {
            Statement::Word(text) => parse_int(text)
                .filter(|v| (i32::MIN as i64..=u32::MAX as i64).contains(v))
                .ok_or_else(|| err(AsmErrorKind::BadOperand(text.to_string())))? as u32,
            Statement::Instr { op, operands } => {
                let instr = build_instruction(op, operands, pc, &labels).map_err(err)?;
                encode(&instr).map_err(|e| err(encode_error_kind(e)))?
            }
        };
        words.push(word);
    }
    Ok(MemoryImage::new(base, words))
}

/// Parses and assembles in one step.
pub fn assemble_str(text: &str, base: u32) -> Result<MemoryImage, AsmError> {
    assemble(&SourceProgram::parse(text)?, base)
}

fn encode_error_kind(e: EncodeError) -> AsmErrorKind {
    match e {
        EncodeError::ImmediateOutOfRange { imm, min, max, .. } => {
            AsmErrorKind::ImmediateOutOfRange { value: imm as i64, min: min as i64, max: max as i64 }
        }
        EncodeError::MisalignedImmediate { imm, .. } => AsmErrorKind::BranchTargetMisaligned(imm as i64),
        EncodeError::UnusedField { op } => AsmErrorKind::BadOperand(op.to_string()),
    }
}

fn reg(text: &str) -> Result<Reg, AsmErrorKind> {
    text.parse().map_err(|_| AsmErrorKind::BadRegister(text.to_string()))
}

fn immediate(text: &str, format: Format) -> Result<i32, AsmErrorKind> {
    let value = parse_int(text).ok_or_else(|| AsmErrorKind::BadOperand(text.to_string()))?;
    let (min, max) = format.imm_range();
    if value < min as i64 || value > max as i64 {
        return Err(AsmErrorKind::ImmediateOutOfRange { value, min: min as i64, max: max as i64 });
    }
    Ok(value as i32)
}

/// `imm(reg)`.
fn memory_operand(text: &str) -> Result<(i32, Reg), AsmErrorKind> {
    let bad = || AsmErrorKind::BadOperand(text.to_string());
    let (imm, rest) = text.split_once('(').ok_or_else(bad)?;
    let base = rest.strip_suffix(')').ok_or_else(bad)?.trim();
    let imm = imm.trim();
    let imm = if imm.is_empty() { 0 } else { immediate(imm, Format::I)? };
    Ok((imm, reg(base)?))
}

fn target_offset(text: &str, pc: u32, labels: &HashMap<&str, u32>) -> Result<i32, AsmErrorKind> {
    let offset = if let Some(value) = parse_int(text) {
        value
    } else if is_identifier(text) {
        let target = labels.get(text).ok_or_else(|| AsmErrorKind::UndefinedLabel(text.to_string()))?;
        *target as i64 - pc as i64
    } else {
        return Err(AsmErrorKind::BadOperand(text.to_string()));
    };
    if offset % 2 != 0 {
        return Err(AsmErrorKind::BranchTargetMisaligned(offset));
    }
    i32::try_from(offset).map_err(|_| AsmErrorKind::ImmediateOutOfRange {
        value: offset,
        min: i32::MIN as i64,
        max: i32::MAX as i64,
    })
}

fn build_instruction(
    op: Mnemonic,
    ops: &[String],
    pc: u32,
    labels: &HashMap<&str, u32>,
) -> Result<DecodedInstruction, AsmErrorKind> {
    Ok(match op.format() {
        Format::R => DecodedInstruction::r(op, reg(&ops[0])?, reg(&ops[1])?, reg(&ops[2])?),
        Format::I if op == Mnemonic::Lw => {
            let (imm, base) = memory_operand(&ops[1])?;
            DecodedInstruction::i(op, reg(&ops[0])?, base, imm)
        }
        Format::I | Format::Shift => {
            DecodedInstruction::i(op, reg(&ops[0])?, reg(&ops[1])?, immediate(&ops[2], op.format())?)
        }
        Format::S => {
            let (imm, base) = memory_operand(&ops[1])?;
            DecodedInstruction::store(reg(&ops[0])?, imm, base)
        }
        Format::B => DecodedInstruction::beq(reg(&ops[0])?, reg(&ops[1])?, target_offset(&ops[2], pc, labels)?),
        Format::J => DecodedInstruction::jal(reg(&ops[0])?, target_offset(&ops[1], pc, labels)?),
    })
}

/// Renders every word as canonical assembly, or `.word` for data the
/// decoder rejects. Reassembling the output reproduces the image.
pub fn disassemble(image: &MemoryImage) -> String {
    let mut out = String::new();
    if image.base_address != 0 {
        let _ = writeln!(out, ".org 0x{:X}", image.base_address);
    }
    for &word in &image.words {
        let _ = match decode(word) {
            Ok(instr) => writeln!(out, "{instr}"),
            Err(_) => writeln!(out, ".word 0x{word:08X}"),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kind(text: &str) -> AsmErrorKind {
        assemble_str(text, 0).unwrap_err().kind
    }

    #[test]
    fn reference_examples() {
        assert_eq!(assemble_str("addi x1, x0, 5", 0).unwrap().words, [0x0050_0093]);
        assert!(assemble_str("", 0).unwrap().words.is_empty());
        assert_eq!(assemble_str("loop: beq x0, x0, loop", 0).unwrap().words, [0x0000_0063]);
        assert_eq!(disassemble(&MemoryImage::new(0, vec![0x0050_0093])), "addi x1, x0, 5\n");
        assert_eq!(disassemble(&MemoryImage::new(0, vec![0xFFFF_FFFF])), ".word 0xFFFFFFFF\n");
    }

    #[test]
    fn labels_resolve_pc_relative() {
        let src = "
            start:  addi x1, x0, 3      # counter
            loop:   addi x1, x1, -1
                    beq x1, x0, done
                    jal x0, loop
            done:   jal x0, done
        ";
        let img = assemble_str(src, 0).unwrap();
        let text = disassemble(&img);
        assert_eq!(
            text,
            "addi x1, x0, 3\naddi x1, x1, -1\nbeq x1, x0, 8\njal x0, -8\njal x0, 0\n"
        );
    }

    #[test]
    fn directives() {
        let img = assemble_str(".word 0xDEADBEEF\n.org 0x10\ndata: .word -1\n jal x0, data", 0).unwrap();
        assert_eq!(img.words, [0xDEAD_BEEF, 0, 0, 0, 0xFFFF_FFFF, 0xFFDF_F06F]);
        let img = assemble_str("lw x1, 4(x2)\nsw x1, (x2)", 0x100).unwrap();
        assert_eq!(img.base_address, 0x100);
        assert_eq!(assemble(&SourceProgram::parse(&disassemble(&img)).unwrap(), 0).unwrap(), {
            let mut padded = vec![0; 0x40];
            padded.extend(&img.words);
            MemoryImage::new(0, padded)
        });
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let e = assemble_str("addi x1, x0, 1\n\n  frob x1, x2\n", 0).unwrap_err();
        assert_eq!(e.line, 3);
        assert_eq!(e.kind, AsmErrorKind::UnknownMnemonic("frob".into()));
    }

    #[test]
    fn error_kinds() {
        assert_eq!(kind("beq x0, x0, nowhere"), AsmErrorKind::UndefinedLabel("nowhere".into()));
        assert_eq!(kind("a: addi x0, x0, 0\na: addi x0, x0, 0"), AsmErrorKind::DuplicateLabel("a".into()));
        assert!(matches!(kind("add x1, x2"), AsmErrorKind::OperandCount { expected: 3, found: 2, .. }));
        assert!(matches!(kind("addi x1, x0, 2048"), AsmErrorKind::ImmediateOutOfRange { .. }));
        assert!(matches!(kind("slli x1, x0, 32"), AsmErrorKind::ImmediateOutOfRange { .. }));
        assert!(matches!(kind("beq x0, x0, 4096"), AsmErrorKind::ImmediateOutOfRange { .. }));
        assert_eq!(kind("jal x0, 3"), AsmErrorKind::BranchTargetMisaligned(3));
        assert_eq!(kind("add x1, x2, a0"), AsmErrorKind::BadRegister("a0".into()));
        assert_eq!(kind("add x1, x2, x32"), AsmErrorKind::BadRegister("x32".into()));
        assert!(matches!(kind("nop: .org 0x8\n.org 0x4"), AsmErrorKind::OrgBackwards { .. }));
        assert!(matches!(kind(".org 0x6"), AsmErrorKind::MisalignedAddress(6)));
        assert!(matches!(kind("lw x1, x2"), AsmErrorKind::BadOperand(_)));
        assert!(matches!(kind("jalr x1, 0(x2)"), AsmErrorKind::UnknownMnemonic(_)));
        assert!(matches!(assemble_str("", 2).unwrap_err().kind, AsmErrorKind::MisalignedAddress(2)));
    }

    #[test]
    fn comment_styles() {
        let img = assemble_str("addi x1, x0, 1 // trailing\n# whole line\nadd x2, x1, x1 # another", 0).unwrap();
        assert_eq!(img.len(), 2);
    }

    proptest! {
        #[test]
        fn disassembly_round_trips(words in proptest::collection::vec(any::<u32>(), 0..64), base in 0u32..64) {
            let img = MemoryImage::new(base * 4, words);
            let back = assemble(&SourceProgram::parse(&disassemble(&img)).unwrap(), img.base_address).unwrap();
            prop_assert_eq!(back.words, img.words);
        }

        #[test]
        fn assembly_is_deterministic(seed in any::<u64>()) {
            let src = format!("addi x1, x0, {}\nl: beq x1, x0, l\njal x2, l", (seed % 2048) as i64);
            prop_assert_eq!(assemble_str(&src, 0).unwrap(), assemble_str(&src, 0).unwrap());
        }
    }
}
