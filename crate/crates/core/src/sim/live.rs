//! Interactive session: a simulator fed by queued operator commands, with
//! an optional scripted scenario replayed underneath.
//!
//! Commands submitted while the simulator sits at step `k` are applied
//! before the step `k → k+1`, after any scripted events for `k`. Issuing a
//! scenario's events live at their steps therefore gives the same trace as
//! running the scenario.

use serde::{Deserialize, Serialize};

use crate::config::PlantConfig;

use super::engine::Simulator;
use super::scenario::{Action, Initial, Scenario};
use super::trace::TraceRow;
use super::SimError;

/// Version of the snapshot and message layout served to clients.
pub const PROTOCOL_VERSION: u32 = 1;

/// Client to server messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        #[serde(flatten)]
        action: Action,
    },
    Pause {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    Resume {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    Reset {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
}

impl ClientMessage {
    pub fn id(&self) -> Option<u64> {
        match self {
            Self::Command { id, .. } | Self::Pause { id } | Self::Resume { id } | Self::Reset { id } => *id,
        }
    }
}

/// Server to client messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot {
        version: u32,
        /// Incremented on every reset; `(run, step)` orders snapshots.
        run: u64,
        #[serde(flatten)]
        row: TraceRow,
    },
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        effective_step: u64,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        message: String,
    },
    /// The run stopped: a halt, or the end of a scripted scenario.
    Stopped {
        step: u64,
        reason: String,
    },
}

impl ServerMessage {
    pub fn snapshot(run: u64, row: TraceRow) -> Self {
        Self::Snapshot { version: PROTOCOL_VERSION, run, row }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub effective_step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tick {
    /// A step was taken; the new snapshot row.
    Stepped(TraceRow),
    Paused,
    /// Scripted scenario reached its end.
    Finished,
    Halted(SimError),
}

#[derive(Debug, Clone)]
pub struct LiveSession {
    cfg: PlantConfig,
    initial: Initial,
    script: Option<Scenario>,
    sim: Simulator,
    pending: Vec<Action>,
    next_event: usize,
    paused: bool,
    halted: Option<SimError>,
    run: u64,
}

impl LiveSession {
    pub fn new(cfg: PlantConfig, initial: Initial) -> Result<Self, SimError> {
        let sim = Simulator::new(cfg.clone(), &initial)?;
        Ok(Self {
            cfg,
            initial,
            script: None,
            sim,
            pending: Vec::new(),
            next_event: 0,
            paused: false,
            halted: None,
            run: 0,
        })
    }

    /// Session replaying `scenario`, stopping at its duration.
    pub fn scripted(cfg: PlantConfig, scenario: Scenario) -> Result<Self, SimError> {
        let problems = scenario.validate(cfg.n_conduits);
        if !problems.is_empty() {
            return Err(SimError::InvalidScenario(problems.join("; ")));
        }
        let mut s = Self::new(cfg, scenario.initial.clone())?;
        s.script = Some(scenario);
        Ok(s)
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    pub fn snapshot(&self) -> TraceRow {
        self.sim.row()
    }

    pub fn run_id(&self) -> u64 {
        self.run
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn halted(&self) -> Option<&SimError> {
        self.halted.as_ref()
    }

    pub fn finished(&self) -> bool {
        self.script
            .as_ref()
            .is_some_and(|s| self.sim.step_index() >= s.steps() as u64)
    }

    /// Queues an action for the next step boundary.
    pub fn submit(&mut self, action: Action) -> Result<Ack, SimError> {
        if let Some(h) = &self.halted {
            return Err(SimError::InvalidAction(format!("session halted: {h}")));
        }
        self.sim.check(&action)?;
        self.pending.push(action);
        Ok(Ack { effective_step: self.sim.step_index() })
    }

    pub fn pause(&mut self) -> Ack {
        self.paused = true;
        Ack { effective_step: self.sim.step_index() }
    }

    pub fn resume(&mut self) -> Ack {
        self.paused = false;
        Ack { effective_step: self.sim.step_index() }
    }

    /// Back to the initial state; queued commands are dropped.
    pub fn reset(&mut self) -> Result<Ack, SimError> {
        self.sim = Simulator::new(self.cfg.clone(), &self.initial)?;
        self.pending.clear();
        self.next_event = 0;
        self.halted = None;
        self.paused = false;
        self.run += 1;
        Ok(Ack { effective_step: 0 })
    }

    /// Handles one client message, returning the reply frame.
    pub fn handle(&mut self, msg: ClientMessage) -> ServerMessage {
        let id = msg.id();
        let result = match msg {
            ClientMessage::Command { action, .. } => self.submit(action),
            ClientMessage::Pause { .. } => Ok(self.pause()),
            ClientMessage::Resume { .. } => Ok(self.resume()),
            ClientMessage::Reset { .. } => self.reset(),
        };
        match result {
            Ok(ack) => ServerMessage::Ack { id, effective_step: ack.effective_step },
            Err(e) => ServerMessage::Error { id, message: e.to_string() },
        }
    }

    /// Advances one step unless paused, finished or halted.
    pub fn tick(&mut self) -> Tick {
        if let Some(h) = &self.halted {
            return Tick::Halted(h.clone());
        }
        if self.finished() {
            return Tick::Finished;
        }
        if self.paused {
            return Tick::Paused;
        }
        let k = self.sim.step_index() as usize;
        if let Some(script) = &self.script {
            while let Some(e) = script.events.get(self.next_event) {
                if script.event_step(e.t) > k {
                    break;
                }
                if let Err(err) = self.sim.apply(&e.action) {
                    self.halted = Some(err.clone());
                    return Tick::Halted(err);
                }
                self.next_event += 1;
            }
        }
        for action in std::mem::take(&mut self.pending) {
            if let Err(err) = self.sim.apply(&action) {
                log::warn!("dropping command rejected at apply time: {err}");
            }
        }
        match self.sim.step() {
            Ok(()) => Tick::Stepped(self.sim.row()),
            Err(err) => {
                self.halted = Some(err.clone());
                Tick::Halted(err)
            }
        }
    }
}
