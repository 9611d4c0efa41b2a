//! JSON-lines traces.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use super::engine::{Engine, StepRecord};
use super::operator::LiveInput;
use super::scenario::Scenario;
use crate::error::Result;

pub struct TraceWriter<W: Write> {
    out: BufWriter<W>,
    lines: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(w: W) -> Self {
        TraceWriter { out: BufWriter::new(w), lines: 0 }
    }

    pub fn write(&mut self, rec: &StepRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

impl TraceWriter<std::fs::File> {
    pub fn create<P: AsRef<Path>>(path: P) -> Result<Self> {
        Ok(TraceWriter::new(std::fs::File::create(path)?))
    }
}

pub fn read_trace<P: AsRef<Path>>(path: P) -> Result<Vec<StepRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Run a scenario to completion with its scripted operator.
pub fn run_scenario(scenario: Scenario) -> Result<Vec<StepRecord>> {
    let mut engine = Engine::new(scenario)?;
    let mut out = Vec::with_capacity(engine.scenario.n_steps());
    let live = LiveInput::default();
    while !engine.finished() {
        out.push(engine.step(&live)?);
    }
    Ok(out)
}

/// Run a scenario and stream records to `w`.
pub fn run_to_writer<W: Write>(scenario: Scenario, w: W) -> Result<usize> {
    let mut engine = Engine::new(scenario)?;
    let mut tw = TraceWriter::new(w);
    let live = LiveInput::default();
    while !engine.finished() {
        let rec = engine.step(&live)?;
        tw.write(&rec)?;
    }
    tw.flush()?;
    Ok(tw.lines())
}
