//! Parse and execute a bring-up script, with images supplied in memory.

use biorv::asm::assemble_str;
use biorv::harness::{BringUpScript, ScriptEvent, Simulator};
use biorv::metrics::{ClockPolicy, EnergyModel, Summary};
use biorv::programs;

const SCRIPT: &str = "
load demo       # programming mode
reset
start
run 20
stop            # observation mode
run 5           # held cycles
observe 0 8
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let script = BringUpScript::parse(SCRIPT, |name| match name {
        "demo" => assemble_str(programs::DEMO, 0).map_err(|e| e.to_string()),
        other => Err(format!("no image named {other}")),
    })?;
    let mut sim = Simulator::default();
    let events = sim.execute_script(&script, |record| println!("{}", record.to_csv()))?;
    for event in events {
        match event {
            ScriptEvent::Loaded { words } => println!("loaded {words} words"),
            ScriptEvent::Held { cycles, mode } => println!("held {cycles} cycles ({mode})"),
            ScriptEvent::Observed(obs) => print!("observed:\n{}", obs.image.to_hex()),
            ScriptEvent::Ran(report) => {
                print!("{}", Summary::new(&report, EnergyModel::default(), ClockPolicy::AlwaysOn))
            }
        }
    }
    Ok(())
}
