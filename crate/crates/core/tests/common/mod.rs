//! Random halting programs for differential and statistical tests.
//!
//! Layout: a two-instruction prologue points x29 at the data region
//! (0x800..0x1000), then a body of ALU ops, loads and stores through x29,
//! forward branches and jumps, and small counted loops on x30, ending with
//! the `jal x0, 0` self-loop. x29 and x30 are never otherwise written, so
//! every program halts and never touches its own code.

#![allow(dead_code)]

use biorv::image::MemoryImage;
use biorv::isa::{encode, DecodedInstruction, Mnemonic, Reg};
use rand::seq::SliceRandom;
use rand::Rng;

pub const DATA_BASE_REG: u8 = 29;
pub const LOOP_REG: u8 = 30;

const R_OPS: [Mnemonic; 10] = [
    Mnemonic::Add,
    Mnemonic::Sub,
    Mnemonic::Sll,
    Mnemonic::Slt,
    Mnemonic::Sltu,
    Mnemonic::Xor,
    Mnemonic::Srl,
    Mnemonic::Sra,
    Mnemonic::Or,
    Mnemonic::And,
];
const I_OPS: [Mnemonic; 6] =
    [Mnemonic::Addi, Mnemonic::Slti, Mnemonic::Sltiu, Mnemonic::Xori, Mnemonic::Ori, Mnemonic::Andi];
const SHIFT_OPS: [Mnemonic; 3] = [Mnemonic::Slli, Mnemonic::Srli, Mnemonic::Srai];

pub fn x(i: u8) -> Reg {
    Reg::new(i).unwrap()
}

fn dest<R: Rng>(rng: &mut R) -> Reg {
    // x0 now and then, as a discarded write
    if rng.gen_ratio(1, 20) {
        Reg::ZERO
    } else {
        x(rng.gen_range(1..=28))
    }
}

fn src<R: Rng>(rng: &mut R) -> Reg {
    x(rng.gen_range(0..32))
}

fn alu_instr<R: Rng>(rng: &mut R) -> DecodedInstruction {
    match rng.gen_range(0..3) {
        0 => DecodedInstruction::r(*R_OPS.choose(rng).unwrap(), dest(rng), src(rng), src(rng)),
        1 => DecodedInstruction::i(*I_OPS.choose(rng).unwrap(), dest(rng), src(rng), rng.gen_range(-2048..=2047)),
        _ => DecodedInstruction::i(*SHIFT_OPS.choose(rng).unwrap(), dest(rng), src(rng), rng.gen_range(0..32)),
    }
}

fn data_offset<R: Rng>(rng: &mut R) -> i32 {
    // few distinct slots so loads often see earlier stores
    4 * rng.gen_range(0..32) * if rng.gen_bool(0.2) { 16 } else { 1 }
}

/// Options controlling program shape.
#[derive(Clone, Copy)]
pub struct Shape {
    pub body_len: usize,
    pub allow_control: bool,
    pub allow_memory: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { body_len: 120, allow_control: true, allow_memory: true }
    }
}

pub fn random_program<R: Rng>(rng: &mut R, shape: Shape) -> Vec<DecodedInstruction> {
    let mut prog = vec![
        DecodedInstruction::i(Mnemonic::Addi, x(DATA_BASE_REG), Reg::ZERO, 0x7FF),
        DecodedInstruction::i(Mnemonic::Addi, x(DATA_BASE_REG), x(DATA_BASE_REG), 1),
    ];
    // seed some registers with nonzero values
    for r in 1..=8 {
        prog.push(DecodedInstruction::i(Mnemonic::Addi, x(r), Reg::ZERO, rng.gen_range(-2048..=2047)));
    }
    let body_end = prog.len() + shape.body_len;
    // (init index, back-edge index) of each counted loop
    let mut loops: Vec<(usize, usize)> = Vec::new();
    while prog.len() < body_end {
        let remaining = body_end - prog.len();
        let roll = rng.gen_range(0..100);
        if shape.allow_memory && roll < 15 {
            prog.push(DecodedInstruction::i(Mnemonic::Lw, dest(rng), x(DATA_BASE_REG), data_offset(rng)));
        } else if shape.allow_memory && roll < 30 {
            prog.push(DecodedInstruction::store(src(rng), data_offset(rng), x(DATA_BASE_REG)));
        } else if shape.allow_control && roll < 42 {
            // forward beq, the skip never passes the halt instruction
            let skip = rng.gen_range(1..=4).min(remaining) as i32;
            let (a, b) = match rng.gen_range(0..3) {
                0 => {
                    let r = src(rng);
                    (r, r)
                }
                1 => (src(rng), Reg::ZERO),
                _ => (src(rng), src(rng)),
            };
            prog.push(DecodedInstruction::beq(a, b, 4 * skip));
        } else if shape.allow_control && roll < 48 {
            let skip = rng.gen_range(1..=4).min(remaining) as i32;
            prog.push(DecodedInstruction::jal(dest(rng), 4 * skip));
        } else if shape.allow_control && roll < 52 && remaining >= 9 {
            // counted loop: init, body, decrement, exit test, back edge
            let iterations = rng.gen_range(1..=5);
            let body = rng.gen_range(1..=remaining.min(9) - 4);
            let init = prog.len();
            prog.push(DecodedInstruction::i(Mnemonic::Addi, x(LOOP_REG), Reg::ZERO, iterations));
            for _ in 0..body {
                prog.push(alu_instr(rng));
            }
            prog.push(DecodedInstruction::i(Mnemonic::Addi, x(LOOP_REG), x(LOOP_REG), -1));
            prog.push(DecodedInstruction::beq(x(LOOP_REG), Reg::ZERO, 8));
            prog.push(DecodedInstruction::jal(Reg::ZERO, -4 * (body as i32 + 2)));
            loops.push((init, prog.len() - 1));
        } else {
            prog.push(alu_instr(rng));
        }
    }
    // A forward skip landing past a loop's init would run the loop on a stale
    // counter; send it to the init instead.
    for i in 0..prog.len() {
        let instr = &mut prog[i];
        if !matches!(instr.op, Mnemonic::Beq | Mnemonic::Jal) || instr.imm <= 0 {
            continue;
        }
        let target = i + instr.imm as usize / 4;
        if let Some(&(init, _)) = loops.iter().find(|&&(init, end)| i < init && target > init && target <= end) {
            instr.imm = 4 * (init - i) as i32;
        }
    }
    prog.push(DecodedInstruction::jal(Reg::ZERO, 0));
    prog
}

pub fn to_image(program: &[DecodedInstruction]) -> MemoryImage {
    MemoryImage::new(0, program.iter().map(|i| encode(i).expect("generator emits encodable instructions")).collect())
}

/// Programs made only of loads, then the halting jump.
pub fn all_loads(count: usize) -> Vec<DecodedInstruction> {
    let mut prog: Vec<_> = (0..count)
        .map(|i| DecodedInstruction::i(Mnemonic::Lw, x(1 + (i % 28) as u8), Reg::ZERO, 0x400 + 4 * (i % 64) as i32))
        .collect();
    prog.push(DecodedInstruction::jal(Reg::ZERO, 0));
    prog
}
