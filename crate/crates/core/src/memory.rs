//! Unified instruction/data memory.
//!
//! Reads are asynchronous: they see committed contents in the same cycle.
//! Writes are synchronous: a scheduled write lands at the next
//! [`UnifiedMemory::commit_cycle`], and only one may be pending per cycle.

use thiserror::Error;

use crate::cpu::ControlMode;
use crate::image::MemoryImage;
use crate::isa::Word;

pub const DEFAULT_MEMORY_BYTES: u32 = 4096;

/// Who is driving the write port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WritePort {
    /// The 32-bit external WriteData interface.
    External,
    /// The core's own store datapath.
    Core,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("misaligned access at 0x{addr:08X}")]
    Misaligned { addr: u32 },
    #[error("address 0x{addr:08X} outside memory")]
    OutOfRange { addr: u32 },
    #[error("{port:?} write forbidden in {mode} mode")]
    WriteForbidden { mode: ControlMode, port: WritePort },
    #[error("second write in one cycle (0x{addr:08X}); the memory has a single write port")]
    DoubleWrite { addr: u32 },
    #[error("memory size {0} is not a positive multiple of 4")]
    InvalidSize(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingWrite {
    addr: u32,
    value: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnifiedMemory {
    words: Vec<Word>,
    pending: Option<PendingWrite>,
}

impl Default for UnifiedMemory {
    fn default() -> Self {
        UnifiedMemory::new(DEFAULT_MEMORY_BYTES).expect("default size is valid")
    }
}

impl UnifiedMemory {
    /// Zero-initialized memory of `size_bytes` bytes.
    pub fn new(size_bytes: u32) -> Result<Self, MemError> {
        if size_bytes == 0 || !size_bytes.is_multiple_of(4) {
            return Err(MemError::InvalidSize(size_bytes));
        }
        Ok(UnifiedMemory { words: vec![0; size_bytes as usize / 4], pending: None })
    }

    pub fn size_bytes(&self) -> u32 {
        (self.words.len() * 4) as u32
    }

    /// Committed contents, indexed by word address.
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn contains(&self, addr: u32) -> bool {
        (addr as u64) < self.size_bytes() as u64
    }

    fn index(&self, addr: u32) -> Result<usize, MemError> {
        if !addr.is_multiple_of(4) {
            return Err(MemError::Misaligned { addr });
        }
        if addr as u64 + 4 > self.size_bytes() as u64 {
            return Err(MemError::OutOfRange { addr });
        }
        Ok(addr as usize / 4)
    }

    pub fn read_word(&self, addr: u32) -> Result<Word, MemError> {
        self.index(addr).map(|i| self.words[i])
    }

    pub fn schedule_write(&mut self, addr: u32, value: Word, port: WritePort, mode: ControlMode) -> Result<(), MemError> {
        let allowed = match port {
            WritePort::External => mode == ControlMode::Programming,
            WritePort::Core => mode == ControlMode::Executing,
        };
        if !allowed {
            return Err(MemError::WriteForbidden { mode, port });
        }
        self.index(addr)?;
        if self.pending.is_some() {
            return Err(MemError::DoubleWrite { addr });
        }
        self.pending = Some(PendingWrite { addr, value });
        Ok(())
    }

    /// Clock edge: applies the pending write, if any.
    pub fn commit_cycle(&mut self) {
        if let Some(PendingWrite { addr, value }) = self.pending.take() {
            self.words[addr as usize / 4] = value;
        }
    }

    pub fn has_pending_write(&self) -> bool {
        self.pending.is_some()
    }

    /// Writes an image through the external port, one word per clock.
    pub fn load_image(&mut self, image: &MemoryImage, mode: ControlMode) -> Result<usize, MemError> {
        if mode != ControlMode::Programming {
            return Err(MemError::WriteForbidden { mode, port: WritePort::External });
        }
        if !image.base_address.is_multiple_of(4) {
            return Err(MemError::Misaligned { addr: image.base_address });
        }
        if image.end_address() > self.size_bytes() as u64 {
            let first_bad = image.base_address.max(self.size_bytes());
            return Err(MemError::OutOfRange { addr: first_bad });
        }
        for (addr, word) in image.iter() {
            self.schedule_write(addr, word, WritePort::External, mode)?;
            self.commit_cycle();
        }
        Ok(image.len())
    }

    /// Copies `[addr, addr + len)` out as an image; `len` is in bytes.
    pub fn dump(&self, addr: u32, len: u32) -> Result<MemoryImage, MemError> {
        if !addr.is_multiple_of(4) || !len.is_multiple_of(4) {
            return Err(MemError::Misaligned { addr: if !addr.is_multiple_of(4) { addr } else { addr.wrapping_add(len) } });
        }
        if addr as u64 + len as u64 > self.size_bytes() as u64 {
            return Err(MemError::OutOfRange { addr: addr.max(self.size_bytes()) });
        }
        let start = addr as usize / 4;
        Ok(MemoryImage::new(addr, self.words[start..start + len as usize / 4].to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PROG: ControlMode = ControlMode::Programming;

    #[test]
    fn fresh_memory_reads_zero() {
        let mem = UnifiedMemory::default();
        assert_eq!(mem.size_bytes(), 4096);
        assert_eq!(mem.read_word(0), Ok(0));
    }

    #[test]
    fn read_after_commit() {
        let mut mem = UnifiedMemory::default();
        mem.schedule_write(0x10, 0xDEAD_BEEF, WritePort::External, PROG).unwrap();
        assert_eq!(mem.read_word(0x10), Ok(0), "uncommitted write must not be visible");
        mem.commit_cycle();
        assert_eq!(mem.read_word(0x10), Ok(0xDEAD_BEEF));
    }

    #[test]
    fn commit_applies_to_word_index() {
        let mut mem = UnifiedMemory::default();
        mem.schedule_write(0x20, 7, WritePort::External, PROG).unwrap();
        mem.commit_cycle();
        assert_eq!(mem.words()[8], 7);
        let before = mem.clone();
        mem.commit_cycle();
        assert_eq!(mem, before);
    }

    #[test]
    fn access_errors() {
        let mut mem = UnifiedMemory::default();
        assert_eq!(mem.read_word(0x1002), Err(MemError::Misaligned { addr: 0x1002 }));
        assert_eq!(mem.read_word(0x1000), Err(MemError::OutOfRange { addr: 0x1000 }));
        assert_eq!(mem.read_word(0xFFFF_FFFC), Err(MemError::OutOfRange { addr: 0xFFFF_FFFC }));
        assert_eq!(
            mem.schedule_write(2, 1, WritePort::External, PROG),
            Err(MemError::Misaligned { addr: 2 })
        );
        assert_eq!(UnifiedMemory::new(6).unwrap_err(), MemError::InvalidSize(6));
        assert_eq!(UnifiedMemory::new(0).unwrap_err(), MemError::InvalidSize(0));
    }

    #[test]
    fn single_write_port() {
        let mut mem = UnifiedMemory::default();
        mem.schedule_write(0, 1, WritePort::External, PROG).unwrap();
        assert_eq!(mem.schedule_write(4, 2, WritePort::External, PROG), Err(MemError::DoubleWrite { addr: 4 }));
        mem.commit_cycle();
        assert_eq!(mem.words()[..2], [1, 0]);
    }

    #[test]
    fn write_permissions_follow_mode() {
        let mut mem = UnifiedMemory::default();
        for mode in [ControlMode::Observation, ControlMode::ResetHold, ControlMode::Executing] {
            assert!(matches!(
                mem.schedule_write(0, 1, WritePort::External, mode),
                Err(MemError::WriteForbidden { .. })
            ));
        }
        for mode in [ControlMode::Observation, ControlMode::ResetHold, ControlMode::Programming] {
            assert!(matches!(mem.schedule_write(0, 1, WritePort::Core, mode), Err(MemError::WriteForbidden { .. })));
        }
        mem.schedule_write(0, 1, WritePort::Core, ControlMode::Executing).unwrap();
    }

    #[test]
    fn load_image_cases() {
        let mut mem = UnifiedMemory::default();
        let img = MemoryImage::new(0, vec![1, 2, 3]);
        assert_eq!(mem.load_image(&img, PROG), Ok(3));
        assert_eq!((0..3).map(|i| mem.read_word(4 * i).unwrap()).collect::<Vec<_>>(), [1, 2, 3]);

        assert!(matches!(mem.load_image(&img, ControlMode::Executing), Err(MemError::WriteForbidden { .. })));

        let big = MemoryImage::new(0, vec![0xAA; 1025]);
        let before = mem.clone();
        assert!(matches!(mem.load_image(&big, PROG), Err(MemError::OutOfRange { .. })));
        assert_eq!(mem, before, "a rejected image must not be partially written");

        let exact = MemoryImage::new(0, vec![0xAA; 1024]);
        assert_eq!(mem.load_image(&exact, PROG), Ok(1024));
    }

    #[test]
    fn dump_reads_ranges() {
        let mut mem = UnifiedMemory::default();
        mem.load_image(&MemoryImage::new(8, vec![5, 6]), PROG).unwrap();
        assert_eq!(mem.dump(8, 8), Ok(MemoryImage::new(8, vec![5, 6])));
        assert!(matches!(mem.dump(4092, 8), Err(MemError::OutOfRange { .. })));
        assert!(matches!(mem.dump(2, 4), Err(MemError::Misaligned { .. })));
    }

    proptest! {
        // Memory is a function of its committed write history.
        #[test]
        fn last_committed_value_wins(writes in proptest::collection::vec((0u32..1024, any::<u32>()), 1..200)) {
            let mut mem = UnifiedMemory::default();
            let mut model = vec![0u32; 1024];
            for (index, value) in writes {
                mem.schedule_write(index * 4, value, WritePort::External, PROG).unwrap();
                prop_assert_eq!(mem.read_word(index * 4).unwrap(), model[index as usize]);
                mem.commit_cycle();
                model[index as usize] = value;
            }
            prop_assert_eq!(mem.words(), &model[..]);
        }

        #[test]
        fn observation_never_mutates(ops in proptest::collection::vec((0u32..1100, any::<u32>(), any::<bool>()), 0..100)) {
            let mut mem = UnifiedMemory::default();
            mem.load_image(&MemoryImage::new(0, (0..1024).collect()), PROG).unwrap();
            let before = mem.clone();
            for (index, value, external) in ops {
                let port = if external { WritePort::External } else { WritePort::Core };
                let _ = mem.read_word(index * 4);
                prop_assert!(mem.schedule_write(index * 4, value, port, ControlMode::Observation).is_err());
                mem.commit_cycle();
            }
            prop_assert_eq!(mem, before);
        }
    }
}
