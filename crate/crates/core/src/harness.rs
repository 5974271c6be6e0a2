//! Host-side bring-up controller.
//!
//! Drives the IE / reset / write-enable lines around the core, loads firmware
//! through the external write port, inspects memory in observation mode and
//! routes loads and stores above memory to stub peripheral devices.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cpu::{Bus, BusError, ControlMode, Core, CoreError, HaltPolicy, TraceRecord};
use crate::image::MemoryImage;
use crate::isa::Word;
use crate::memory::{MemError, UnifiedMemory, WritePort, DEFAULT_MEMORY_BYTES};
use crate::metrics::RunReport;

/// Bytes of register space given to each default device.
pub const DEFAULT_DEVICE_SPAN: u32 = 16;

/// Register offsets within a device.
pub const REG_CONTROL: u32 = 0x0;
pub const REG_STATUS: u32 = 0x4;
pub const REG_DATA: u32 = 0x8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceKind {
    Pacing,
    Sensing,
    Egm,
    Telemetry,
    Battery,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 5] =
        [DeviceKind::Pacing, DeviceKind::Sensing, DeviceKind::Egm, DeviceKind::Telemetry, DeviceKind::Battery];

    pub const fn name(self) -> &'static str {
        match self {
            DeviceKind::Pacing => "pacing",
            DeviceKind::Sensing => "sensing",
            DeviceKind::Egm => "egm",
            DeviceKind::Telemetry => "telemetry",
            DeviceKind::Battery => "battery",
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeviceKind {
    type Err = PeripheralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeviceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PeripheralError::UnknownDevice(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmioAccess {
    Read,
    Write(Word),
}

/// One access made by the core to a device register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRecord {
    pub cycle: u64,
    pub offset: u32,
    pub access: MmioAccess,
    /// Value read, or value written.
    pub value: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Device {
    pub kind: DeviceKind,
    pub base: u32,
    pub span: u32,
    pub registers: Vec<Word>,
    pub event_log: Vec<AccessRecord>,
}

impl Device {
    pub fn new(kind: DeviceKind, base: u32, span: u32) -> Self {
        Device { kind, base, span, registers: vec![0; span as usize / 4], event_log: Vec::new() }
    }

    fn end(&self) -> u64 {
        self.base as u64 + self.span as u64
    }

    fn contains(&self, addr: u32) -> bool {
        addr >= self.base && (addr as u64) < self.end()
    }

    pub fn writes(&self) -> impl Iterator<Item = &AccessRecord> {
        self.event_log.iter().filter(|r| matches!(r.access, MmioAccess::Write(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeripheralError {
    #[error("unmapped address 0x{0:08X}")]
    UnmappedAddress(u32),
    #[error("misaligned device access at 0x{0:08X}")]
    Misaligned(u32),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device {0} listed twice")]
    DuplicateDevice(DeviceKind),
    #[error("device {kind} at 0x{base:08X}: span must be a positive multiple of 4 and base word-aligned")]
    BadGeometry { kind: DeviceKind, base: u32 },
    #[error("devices {0} and {1} overlap")]
    Overlap(DeviceKind, DeviceKind),
    #[error("device {kind} at 0x{base:08X} overlaps memory (0..0x{mem_bytes:X})")]
    OverlapsMemory { kind: DeviceKind, base: u32, mem_bytes: u32 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Stub peripherals placed outside the memory range.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PeripheralMap {
    devices: Vec<Device>,
}

impl PeripheralMap {
    pub fn new(mut devices: Vec<Device>) -> Result<Self, PeripheralError> {
        devices.sort_by_key(|d| d.base);
        for d in &devices {
            if d.span == 0 || d.span % 4 != 0 || d.base % 4 != 0 || d.end() > 1 << 32 {
                return Err(PeripheralError::BadGeometry { kind: d.kind, base: d.base });
            }
        }
        for (i, d) in devices.iter().enumerate() {
            if devices[..i].iter().any(|o| o.kind == d.kind) {
                return Err(PeripheralError::DuplicateDevice(d.kind));
            }
        }
        for pair in devices.windows(2) {
            if pair[0].end() > pair[1].base as u64 {
                return Err(PeripheralError::Overlap(pair[0].kind, pair[1].kind));
            }
        }
        Ok(PeripheralMap { devices })
    }

    /// All five devices, packed directly above a memory of `mem_bytes`.
    pub fn default_for(mem_bytes: u32) -> Self {
        let devices = DeviceKind::ALL
            .iter()
            .enumerate()
            .map(|(i, &kind)| Device::new(kind, mem_bytes + i as u32 * DEFAULT_DEVICE_SPAN, DEFAULT_DEVICE_SPAN))
            .collect();
        PeripheralMap::new(devices).expect("default layout is disjoint")
    }

    /// Parses `name base span` lines (`#` comments allowed).
    pub fn parse(text: &str) -> Result<Self, PeripheralError> {
        let mut devices = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| PeripheralError::Parse { line: index + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [name, base, span] = fields[..] else {
                return Err(parse_err(format!("expected `name base span`, got `{line}`")));
            };
            let kind: DeviceKind = name.parse().map_err(|e: PeripheralError| parse_err(e.to_string()))?;
            let base = parse_u32(base).ok_or_else(|| parse_err(format!("bad base `{base}`")))?;
            let span = parse_u32(span).ok_or_else(|| parse_err(format!("bad span `{span}`")))?;
            devices.push(Device::new(kind, base, span));
        }
        PeripheralMap::new(devices)
    }

    pub fn check_against_memory(&self, mem_bytes: u32) -> Result<(), PeripheralError> {
        match self.devices.iter().find(|d| d.base < mem_bytes) {
            Some(d) => Err(PeripheralError::OverlapsMemory { kind: d.kind, base: d.base, mem_bytes }),
            None => Ok(()),
        }
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn device(&self, kind: DeviceKind) -> Option<&Device> {
        self.devices.iter().find(|d| d.kind == kind)
    }

    pub fn device_mut(&mut self, kind: DeviceKind) -> Option<&mut Device> {
        self.devices.iter_mut().find(|d| d.kind == kind)
    }

    /// Host-side register write (sensor stimulus, battery level, ...). Not logged.
    pub fn poke(&mut self, kind: DeviceKind, offset: u32, value: Word) -> Option<()> {
        let dev = self.device_mut(kind)?;
        *dev.registers.get_mut(offset as usize / 4)? = value;
        Some(())
    }

    pub fn maps(&self, addr: u32) -> bool {
        self.devices.iter().any(|d| d.contains(addr))
    }

    /// A core access to a device register. Returns the value read or written.
    pub fn dispatch(&mut self, addr: u32, access: MmioAccess, cycle: u64) -> Result<Word, PeripheralError> {
        if !addr.is_multiple_of(4) {
            return Err(PeripheralError::Misaligned(addr));
        }
        let dev = self
            .devices
            .iter_mut()
            .find(|d| d.contains(addr))
            .ok_or(PeripheralError::UnmappedAddress(addr))?;
        let offset = addr - dev.base;
        let slot = &mut dev.registers[offset as usize / 4];
        let value = match access {
            MmioAccess::Read => *slot,
            MmioAccess::Write(v) => {
                *slot = v;
                v
            }
        };
        dev.event_log.push(AccessRecord { cycle, offset, access, value });
        Ok(value)
    }
}

fn parse_u32(text: &str) -> Option<u32> {
    match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u32::from_str_radix(&hex.replace('_', ""), 16).ok(),
        None => text.parse().ok(),
    }
}

/// Memory plus peripherals, as seen by the core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemBus {
    pub memory: UnifiedMemory,
    pub peripherals: PeripheralMap,
}

impl SystemBus {
    fn mmio(&mut self, addr: u32, access: MmioAccess, cycle: u64) -> Result<Word, BusError> {
        self.peripherals.dispatch(addr, access, cycle).map_err(|e| match e {
            PeripheralError::Misaligned(a) => BusError::Memory(MemError::Misaligned { addr: a }),
            _ => BusError::Unmapped(addr),
        })
    }
}

impl Bus for SystemBus {
    fn fetch(&self, addr: u32) -> Result<Word, BusError> {
        Ok(self.memory.read_word(addr)?)
    }

    fn load(&mut self, addr: u32, cycle: u64) -> Result<Word, BusError> {
        if self.memory.contains(addr) {
            Ok(self.memory.read_word(addr)?)
        } else {
            self.mmio(addr, MmioAccess::Read, cycle)
        }
    }

    fn store(&mut self, addr: u32, value: Word, cycle: u64) -> Result<(), BusError> {
        if self.memory.contains(addr) {
            Ok(self.memory.schedule_write(addr, value, WritePort::Core, ControlMode::Executing)?)
        } else {
            self.mmio(addr, MmioAccess::Write(value), cycle).map(drop)
        }
    }

    fn commit_cycle(&mut self) {
        self.memory.commit_cycle();
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Memory(#[from] MemError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Peripheral(#[from] PeripheralError),
    #[error(transparent)]
    Script(#[from] ScriptError),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mem_size_bytes: u32,
    /// `None` places the default devices directly above memory.
    pub peripherals: Option<PeripheralMap>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { mem_size_bytes: DEFAULT_MEMORY_BYTES, peripherals: None }
    }
}

/// Result of [`Simulator::observe`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub image: MemoryImage,
    /// The core was executing and has been left stopped in observation mode.
    pub stopped_core: bool,
}

/// A core with its memory and peripherals.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub core: Core,
    pub bus: SystemBus,
}

impl Default for Simulator {
    fn default() -> Self {
        Simulator::new(SimConfig::default()).expect("default configuration is valid")
    }
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self, HarnessError> {
        let memory = UnifiedMemory::new(config.mem_size_bytes)?;
        let peripherals = config.peripherals.unwrap_or_else(|| PeripheralMap::default_for(config.mem_size_bytes));
        peripherals.check_against_memory(config.mem_size_bytes)?;
        Ok(Simulator { core: Core::new(), bus: SystemBus { memory, peripherals } })
    }

    pub fn mode(&self) -> ControlMode {
        self.core.mode
    }

    pub fn memory(&self) -> &UnifiedMemory {
        &self.bus.memory
    }

    pub fn peripherals(&self) -> &PeripheralMap {
        &self.bus.peripherals
    }

    pub fn peripherals_mut(&mut self) -> &mut PeripheralMap {
        &mut self.bus.peripherals
    }

    pub fn apply_control(&mut self, ie: bool, reset: bool, write_enable: bool) -> ControlMode {
        self.core.apply_control(ie, reset, write_enable)
    }

    /// Programming mode, then the image through the external write port.
    /// On failure the simulator is left in observation mode.
    pub fn load(&mut self, image: &MemoryImage) -> Result<usize, HarnessError> {
        let mode = self.core.apply_control(false, false, true);
        self.bus.memory.load_image(image, mode).map_err(|e| {
            self.core.apply_control(false, false, false);
            e.into()
        })
    }

    /// Holds reset for one clock, then releases it with IE still low.
    pub fn pulse_reset(&mut self) {
        self.core.apply_control(false, true, false);
        self.core.step_cycle(&mut self.bus).expect("a held cycle cannot fault");
        self.core.apply_control(false, false, false);
    }

    /// Raises IE; execution starts with the next clock.
    pub fn start(&mut self) {
        self.core.apply_control(true, false, false);
    }

    /// Drops IE with writes disabled. The current FSM state has already
    /// completed, so an instruction may be left in flight.
    pub fn stop(&mut self) {
        self.core.apply_control(false, false, false);
    }

    /// The canonical bring-up sequence: IE low with writes enabled, load,
    /// reset high for a clock, then reset low and IE high.
    pub fn program_and_start(&mut self, image: &MemoryImage) -> Result<(), HarnessError> {
        self.load(image)?;
        self.core.apply_control(false, true, false);
        self.core.step_cycle(&mut self.bus).expect("a held cycle cannot fault");
        self.core.apply_control(true, false, false);
        Ok(())
    }

    /// Reads `[addr, addr + len)` (bytes) with IE low and writes disabled.
    /// A previously executing core is left stopped.
    pub fn observe(&mut self, addr: u32, len: u32) -> Result<Observation, HarnessError> {
        let prior = self.core.mode;
        self.core.apply_control(false, false, false);
        let result = self.bus.memory.dump(addr, len);
        let stopped_core = prior == ControlMode::Executing;
        if !stopped_core {
            self.core.mode = prior;
        }
        Ok(Observation { image: result?, stopped_core })
    }

    pub fn run(&mut self, max_cycles: u64, halt: HaltPolicy) -> Result<RunReport, CoreError> {
        self.core.run(&mut self.bus, max_cycles, halt)
    }

    pub fn run_traced<F: FnMut(&TraceRecord)>(
        &mut self,
        max_cycles: u64,
        halt: HaltPolicy,
        sink: F,
    ) -> Result<RunReport, CoreError> {
        self.core.run_traced(&mut self.bus, max_cycles, halt, sink)
    }

    /// Executes a validated script, feeding every clock cycle to `sink`.
    pub fn execute_script<F: FnMut(&TraceRecord)>(
        &mut self,
        script: &BringUpScript,
        mut sink: F,
    ) -> Result<Vec<ScriptEvent>, HarnessError> {
        script.validate()?;
        let mut events = Vec::new();
        for (_, step) in &script.steps {
            match step {
                ScriptStep::LoadImage(image) => {
                    let words = self.load(image)?;
                    events.push(ScriptEvent::Loaded { words });
                }
                ScriptStep::PulseReset => self.pulse_reset(),
                ScriptStep::StartExecution => self.start(),
                ScriptStep::StopExecution => self.stop(),
                ScriptStep::Observe { addr, len } => {
                    events.push(ScriptEvent::Observed(self.observe(*addr, *len)?));
                }
                ScriptStep::RunCycles(n) => {
                    if self.core.mode == ControlMode::Executing {
                        let report = self.run_traced(*n, HaltPolicy::SelfLoop, &mut sink)?;
                        events.push(ScriptEvent::Ran(Box::new(report)));
                    } else {
                        for _ in 0..*n {
                            let record = self.core.step_cycle(&mut self.bus)?;
                            sink(&record);
                        }
                        events.push(ScriptEvent::Held { cycles: *n, mode: self.core.mode });
                    }
                }
            }
        }
        Ok(events)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    LoadImage(MemoryImage),
    PulseReset,
    StartExecution,
    StopExecution,
    Observe { addr: u32, len: u32 },
    RunCycles(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptEvent {
    Loaded { words: usize },
    Observed(Observation),
    Ran(Box<RunReport>),
    Held { cycles: u64, mode: ControlMode },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

/// Line-oriented bring-up commands: `load <hexfile>`, `reset`, `start`,
/// `stop`, `observe <addr> <len>`, `run <cycles>`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BringUpScript {
    /// Steps with their 1-based source line.
    pub steps: Vec<(usize, ScriptStep)>,
}

impl BringUpScript {
    /// Parses script text; `load` arguments are resolved through `loader`.
    pub fn parse<L>(text: &str, mut loader: L) -> Result<Self, ScriptError>
    where
        L: FnMut(&str) -> Result<MemoryImage, String>,
    {
        let mut steps = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let err = |message: String| ScriptError { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            let number = |text: &str| parse_u32(text).ok_or_else(|| err(format!("bad number `{text}`")));
            let step = match words[..] {
                ["load", path] => ScriptStep::LoadImage(loader(path).map_err(err)?),
                ["reset"] => ScriptStep::PulseReset,
                ["start"] => ScriptStep::StartExecution,
                ["stop"] => ScriptStep::StopExecution,
                ["observe", addr, len] => ScriptStep::Observe { addr: number(addr)?, len: number(len)? },
                ["run", cycles] => {
                    let n = number(cycles)?;
                    if n == 0 {
                        return Err(err("run needs a positive cycle count".into()));
                    }
                    ScriptStep::RunCycles(n as u64)
                }
                _ => return Err(err(format!("unrecognized command `{content}`"))),
            };
            steps.push((line, step));
        }
        let script = BringUpScript { steps };
        script.validate()?;
        Ok(script)
    }

    /// Every `start` must come after at least one `reset`.
    pub fn validate(&self) -> Result<(), ScriptError> {
        let mut seen_reset = false;
        for (line, step) in &self.steps {
            match step {
                ScriptStep::PulseReset => seen_reset = true,
                ScriptStep::StartExecution if !seen_reset => {
                    return Err(ScriptError { line: *line, message: "start before any reset".into() });
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble_str;
    use crate::cpu::FaultKind;
    use crate::isa::DecodeError;
    use crate::metrics::HaltReason;

    fn demo() -> MemoryImage {
        assemble_str("addi x1, x0, 5\nhalt: jal x0, halt", 0).unwrap()
    }

    #[test]
    fn program_and_start_then_run() {
        let mut sim = Simulator::default();
        sim.program_and_start(&demo()).unwrap();
        assert_eq!((sim.mode(), sim.core.pc), (ControlMode::Executing, 0));
        let report = sim.run(100, HaltPolicy::SelfLoop).unwrap();
        assert_eq!(report.final_state.regs.as_array()[1], 5);
        assert_eq!((report.total_cycles, report.retired.total()), (8, 2));
    }

    #[test]
    fn restart_replaces_written_range() {
        let mut sim = Simulator::default();
        sim.program_and_start(&demo()).unwrap();
        let first = sim.run(100, HaltPolicy::SelfLoop).unwrap();
        let other = assemble_str("addi x1, x0, 9\nh: jal x0, h", 0).unwrap();
        sim.program_and_start(&other).unwrap();
        assert_eq!(sim.core.pc, 0);
        assert_eq!(sim.memory().read_word(0).unwrap(), other.words[0]);
        let second = sim.run(100, HaltPolicy::SelfLoop).unwrap();
        assert_eq!(second.final_state.regs.as_array()[1], 9);
        assert_eq!(first.total_cycles, second.total_cycles);
    }

    #[test]
    fn empty_image_faults_on_zero_word() {
        let mut sim = Simulator::default();
        sim.program_and_start(&MemoryImage::default()).unwrap();
        let report = sim.run(100, HaltPolicy::SelfLoop).unwrap();
        match report.halt_reason {
            HaltReason::Fault(f) => assert_eq!((f.pc, f.kind), (0, FaultKind::Decode(DecodeError::Unsupported(0)))),
            other => panic!("expected fault, got {other:?}"),
        }
    }

    #[test]
    fn failed_load_leaves_observation_mode() {
        let mut sim = Simulator::default();
        let err = sim.program_and_start(&MemoryImage::new(0, vec![0; 1025])).unwrap_err();
        assert!(matches!(err, HarnessError::Memory(MemError::OutOfRange { .. })));
        assert_eq!(sim.mode(), ControlMode::Observation);
    }

    #[test]
    fn observe_cases() {
        let mut sim = Simulator::default();
        sim.load(&demo()).unwrap();
        let before = sim.memory().clone();
        let obs = sim.observe(0, 8).unwrap();
        assert_eq!(obs.image, demo());
        assert!(!obs.stopped_core);
        assert_eq!(sim.mode(), ControlMode::Programming);
        assert_eq!(sim.memory(), &before);
        assert!(matches!(sim.observe(4092, 8), Err(HarnessError::Memory(MemError::OutOfRange { .. }))));
        assert!(matches!(sim.observe(2, 4), Err(HarnessError::Memory(MemError::Misaligned { .. }))));

        sim.program_and_start(&demo()).unwrap();
        let obs = sim.observe(0, 4).unwrap();
        assert!(obs.stopped_core);
        assert_eq!(sim.mode(), ControlMode::Observation);
        assert!(matches!(sim.run(10, HaltPolicy::SelfLoop), Err(CoreError::NotExecuting(_))));
    }

    #[test]
    fn mmio_register_semantics() {
        let mut map = PeripheralMap::new(vec![
            Device::new(DeviceKind::Pacing, 0x2000, 16),
            Device::new(DeviceKind::Sensing, 0x2040, 16),
        ])
        .unwrap();
        map.dispatch(0x2008, MmioAccess::Write(42), 3).unwrap();
        assert_eq!(map.dispatch(0x2008, MmioAccess::Read, 4), Ok(42));
        assert_eq!(map.dispatch(0x2020, MmioAccess::Read, 5), Err(PeripheralError::UnmappedAddress(0x2020)));
        assert_eq!(map.dispatch(0x2002, MmioAccess::Read, 5), Err(PeripheralError::Misaligned(0x2002)));
        let log = &map.device(DeviceKind::Pacing).unwrap().event_log;
        assert_eq!(log.len(), 2);
        assert_eq!(log[0], AccessRecord { cycle: 3, offset: 8, access: MmioAccess::Write(42), value: 42 });
    }

    #[test]
    fn peripheral_map_validation() {
        let overlap = PeripheralMap::new(vec![
            Device::new(DeviceKind::Pacing, 0x2000, 16),
            Device::new(DeviceKind::Sensing, 0x2008, 16),
        ]);
        assert!(matches!(overlap, Err(PeripheralError::Overlap(..))));
        let dup = PeripheralMap::new(vec![
            Device::new(DeviceKind::Egm, 0x2000, 16),
            Device::new(DeviceKind::Egm, 0x3000, 16),
        ]);
        assert!(matches!(dup, Err(PeripheralError::DuplicateDevice(DeviceKind::Egm))));
        let bad = PeripheralMap::new(vec![Device::new(DeviceKind::Egm, 0x2000, 6)]);
        assert!(matches!(bad, Err(PeripheralError::BadGeometry { .. })));
        let in_mem = PeripheralMap::new(vec![Device::new(DeviceKind::Egm, 0x800, 16)]).unwrap();
        assert!(in_mem.check_against_memory(4096).is_err());

        let parsed = PeripheralMap::parse("# name base span\npacing 0x1000 16\nbattery 4352 32\n").unwrap();
        assert_eq!(parsed.devices().len(), 2);
        assert_eq!(parsed.device(DeviceKind::Battery).unwrap().base, 0x1100);
        assert!(PeripheralMap::parse("radio 0x1000 16").is_err());
        assert!(PeripheralMap::parse("pacing 0x1000").is_err());

        let defaults = PeripheralMap::default_for(4096);
        assert_eq!(defaults.device(DeviceKind::Pacing).unwrap().base, 0x1000);
        assert_eq!(defaults.device(DeviceKind::Battery).unwrap().base, 0x1040);
    }

    #[test]
    fn firmware_reaches_devices_without_touching_memory() {
        let mut sim = Simulator::default();
        sim.peripherals_mut().poke(DeviceKind::Sensing, REG_DATA, 77).unwrap();
        let src = "
            addi x5, x0, 0x7FF
            addi x5, x5, 0x7FF
            addi x5, x5, 2          # x5 = 0x1000, pacing base
            lw x1, 0x18(x5)         # sensing data
            sw x1, 8(x5)            # pacing data
            h: jal x0, h
        ";
        let image = assemble_str(src, 0).unwrap();
        sim.program_and_start(&image).unwrap();
        let before = sim.memory().clone();
        let report = sim.run(1000, HaltPolicy::SelfLoop).unwrap();
        assert!(matches!(report.halt_reason, HaltReason::SelfLoop { .. }));
        assert_eq!(sim.memory(), &before);
        assert_eq!(sim.peripherals().device(DeviceKind::Pacing).unwrap().registers[2], 77);
    }

    #[test]
    fn unmapped_store_faults() {
        let mut sim = Simulator::default();
        let image = assemble_str("addi x5, x0, -16\nsw x0, 0(x5)\nh: jal x0, h", 0).unwrap();
        sim.program_and_start(&image).unwrap();
        let report = sim.run(100, HaltPolicy::SelfLoop).unwrap();
        assert!(matches!(
            report.halt_reason,
            HaltReason::Fault(f) if f.kind == FaultKind::Bus(BusError::Unmapped(0xFFFF_FFF0))
        ));
    }

    #[test]
    fn script_parse_and_validate() {
        let loader = |_: &str| Ok(demo());
        let script = BringUpScript::parse("load demo.hex\nreset\nstart\nrun 100\nobserve 0 8 # dump\nstop", loader).unwrap();
        assert_eq!(script.steps.len(), 6);
        let e = BringUpScript::parse("load a.hex\nstart", |_: &str| Ok(demo())).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(BringUpScript::parse("jump", |_: &str| Ok(demo())).is_err());
        assert!(BringUpScript::parse("run 0", |_: &str| Ok(demo())).is_err());
        let missing = BringUpScript::parse("load nope.hex", |p: &str| Err(format!("cannot read {p}"))).unwrap_err();
        assert!(missing.message.contains("nope.hex"));
    }

    #[test]
    fn script_execution() {
        let script = BringUpScript::parse(
            "load demo.hex\nobserve 0 8\nrun 3\nreset\nstart\nrun 100\nobserve 0 4",
            |_: &str| Ok(demo()),
        )
        .unwrap();
        let mut sim = Simulator::default();
        let mut trace = Vec::new();
        let events = sim.execute_script(&script, |r| trace.push(r.clone())).unwrap();
        assert_eq!(events[0], ScriptEvent::Loaded { words: 2 });
        assert!(matches!(&events[1], ScriptEvent::Observed(o) if o.image == demo() && !o.stopped_core));
        assert_eq!(events[2], ScriptEvent::Held { cycles: 3, mode: ControlMode::Programming });
        match &events[3] {
            ScriptEvent::Ran(report) => assert_eq!(report.total_cycles, 8),
            other => panic!("{other:?}"),
        }
        assert!(matches!(&events[4], ScriptEvent::Observed(o) if o.stopped_core));
        assert_eq!(trace.len(), 3 + 8);
    }
}
