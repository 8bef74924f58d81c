use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::codec::{OscArg, OscMessage};
use super::OscError;
use crate::mapping::SectionId;

/// What an address is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handler {
    /// 1-based pillow number.
    PillowPressure(u8),
    BodyFatigue,
    SectionNext,
    SectionGoto,
    TransportStart,
    TransportStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cue {
    Next,
    Goto(SectionId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportCmd {
    Start,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlEvent {
    PressureReading { pillow: u8, hpa: f32 },
    Fatigue(f32),
    SectionCue(Cue),
    Transport(TransportCmd),
}

/// Exact-match address table.
#[derive(Debug, Clone)]
pub struct RouteTable {
    routes: HashMap<String, Handler>,
}

impl RouteTable {
    pub fn new(entries: impl IntoIterator<Item = (String, Handler)>) -> Result<Self, OscError> {
        let routes: HashMap<_, _> = entries.into_iter().collect();
        if routes.is_empty() {
            return Err(OscError::Route("route table is empty".into()));
        }
        Ok(Self { routes })
    }

    /// `/pillow/{1..4}/pressure`, `/body/fatigue`, `/section/{next,goto}`,
    /// `/transport/{start,stop}`.
    pub fn default_schema() -> Self {
        let mut entries: Vec<(String, Handler)> =
            (1..=4u8).map(|n| (format!("/pillow/{n}/pressure"), Handler::PillowPressure(n))).collect();
        entries.extend([
            ("/body/fatigue".to_owned(), Handler::BodyFatigue),
            ("/section/next".to_owned(), Handler::SectionNext),
            ("/section/goto".to_owned(), Handler::SectionGoto),
            ("/transport/start".to_owned(), Handler::TransportStart),
            ("/transport/stop".to_owned(), Handler::TransportStop),
        ]);
        Self::new(entries).expect("non-empty")
    }

    pub fn get(&self, address: &str) -> Option<Handler> {
        self.routes.get(address).copied()
    }
}

fn single_number(msg: &OscMessage) -> Option<f32> {
    match msg.args.as_slice() {
        [OscArg::Float(v)] => Some(*v),
        [OscArg::Int(v)] => Some(*v as f32),
        _ => None,
    }
}

/// Resolves a message against the table into a typed event.
pub fn route(msg: &OscMessage, table: &RouteTable) -> Result<ControlEvent, OscError> {
    let handler = table.get(&msg.address).ok_or_else(|| OscError::Unrouted(msg.address.clone()))?;
    let bad = |expected: &'static str| OscError::BadArguments { address: msg.address.clone(), expected };
    match handler {
        Handler::PillowPressure(pillow) => {
            let hpa = single_number(msg).filter(|v| v.is_finite()).ok_or_else(|| bad("one number (hPa)"))?;
            Ok(ControlEvent::PressureReading { pillow, hpa })
        }
        Handler::BodyFatigue => {
            let f = single_number(msg).filter(|v| v.is_finite()).ok_or_else(|| bad("one number"))?;
            Ok(ControlEvent::Fatigue(f.clamp(0.0, 1.0)))
        }
        Handler::SectionNext => Ok(ControlEvent::SectionCue(Cue::Next)),
        Handler::SectionGoto => {
            let target = match msg.args.as_slice() {
                [OscArg::Int(n)] => SectionId::from_number(*n),
                [OscArg::Str(s)] => s.parse().ok(),
                _ => None,
            };
            target
                .map(|s| ControlEvent::SectionCue(Cue::Goto(s)))
                .ok_or_else(|| bad("section number 1..3 or name"))
        }
        Handler::TransportStart => Ok(ControlEvent::Transport(TransportCmd::Start)),
        Handler::TransportStop => Ok(ControlEvent::Transport(TransportCmd::Stop)),
    }
}

/// A route table plus a count of messages it had to drop.
#[derive(Debug, Clone)]
pub struct Router {
    table: RouteTable,
    dropped: u64,
}

impl Router {
    pub fn new(table: RouteTable) -> Self {
        Self { table, dropped: 0 }
    }

    pub fn route(&mut self, msg: &OscMessage) -> Result<ControlEvent, OscError> {
        let result = route(msg, &self.table);
        if let Err(e) = &result {
            self.dropped += 1;
            log::debug!("dropping OSC message: {e}");
        }
        result
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
