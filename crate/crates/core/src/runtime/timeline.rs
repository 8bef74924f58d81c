use serde::{Deserialize, Serialize};

use crate::mapping::{AdvancePolicy, SectionId, SectionSpec};
use crate::osc::Cue;

/// Boundary times within this tolerance of a tick count as reached.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvanceCause {
    Timed,
    Cue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimelineEvent {
    Boundary { t: f64, from: SectionId, to: SectionId, cause: AdvanceCause },
    /// The last section finished; not a boundary.
    End { t: f64, from: SectionId },
    CueIgnored { t: f64, reason: String },
}

impl TimelineEvent {
    pub fn t(&self) -> f64 {
        match self {
            Self::Boundary { t, .. } | Self::End { t, .. } | Self::CueIgnored { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    In(SectionId),
    Ended,
}

/// Section sequencer. Sections only move forward.
#[derive(Debug, Clone)]
pub struct Timeline {
    sections: Vec<(SectionId, f64, AdvancePolicy)>,
    current: Option<usize>,
    section_start: f64,
    now: f64,
}

impl Timeline {
    /// With `all_timed`, manual-only sections still end after their
    /// duration, as offline renders need.
    pub fn new(specs: &[SectionSpec], all_timed: bool) -> Self {
        let sections = specs
            .iter()
            .map(|s| {
                let policy = if all_timed && s.advance == AdvancePolicy::Manual { AdvancePolicy::Timed } else { s.advance };
                (s.id(), s.duration_s, policy)
            })
            .collect::<Vec<_>>();
        Self { current: if sections.is_empty() { None } else { Some(0) }, sections, section_start: 0.0, now: 0.0 }
    }

    pub fn position(&self) -> Position {
        match self.current {
            Some(i) => Position::In(self.sections[i].0),
            None => Position::Ended,
        }
    }

    pub fn section(&self) -> Option<SectionId> {
        self.current.map(|i| self.sections[i].0)
    }

    pub fn section_start(&self) -> f64 {
        self.section_start
    }

    pub fn t_in_section(&self) -> f64 {
        self.now - self.section_start
    }

    fn enter(&mut self, next: Option<usize>, t: f64, cause: AdvanceCause, events: &mut Vec<TimelineEvent>) {
        let from = self.sections[self.current.expect("running")].0;
        match next {
            Some(i) => events.push(TimelineEvent::Boundary { t, from, to: self.sections[i].0, cause }),
            None => events.push(TimelineEvent::End { t, from }),
        }
        self.current = next;
        self.section_start = t;
    }

    /// Moves the clock to `t`, fires timed boundaries that fell due (at
    /// their scheduled times), then applies `cues` at `t`. At most one cue
    /// takes effect per call, and none if a timed boundary just fired.
    pub fn advance_to(&mut self, t: f64, cues: &[Cue]) -> Vec<TimelineEvent> {
        let mut events = Vec::new();
        self.now = t;
        while let Some(i) = self.current {
            let (_, duration, policy) = self.sections[i];
            let due = self.section_start + duration;
            if policy == AdvancePolicy::Manual || t + TIME_EPS < due {
                break;
            }
            let next = (i + 1 < self.sections.len()).then_some(i + 1);
            self.enter(next, due, AdvanceCause::Timed, &mut events);
        }
        for cue in cues {
            if events.iter().any(|e| matches!(e, TimelineEvent::Boundary { .. } | TimelineEvent::End { .. })) {
                events.push(TimelineEvent::CueIgnored { t, reason: "section just changed".into() });
                continue;
            }
            let Some(i) = self.current else {
                events.push(TimelineEvent::CueIgnored { t, reason: "performance has ended".into() });
                continue;
            };
            let target = match cue {
                Cue::Next => i + 1,
                Cue::Goto(id) => match self.sections.iter().position(|s| s.0 == *id) {
                    Some(j) => j,
                    None => {
                        events.push(TimelineEvent::CueIgnored { t, reason: format!("no section {id}") });
                        continue;
                    }
                },
            };
            if target >= self.sections.len() {
                log::warn!("cue past the final section ignored at t={t:.2}");
                events.push(TimelineEvent::CueIgnored { t, reason: "already in the final section".into() });
            } else if target <= i {
                log::warn!("backward cue to {} ignored at t={t:.2}", self.sections[target].0);
                events.push(TimelineEvent::CueIgnored { t, reason: format!("cannot return to {}", self.sections[target].0) });
            } else {
                self.enter(Some(target), t, AdvanceCause::Cue, &mut events);
            }
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::SectionSpec;
    use proptest::prelude::*;

    fn specs(durations: [f64; 3], policy: AdvancePolicy) -> Vec<SectionSpec> {
        let mut s = SectionSpec::default_sections();
        for (spec, d) in s.iter_mut().zip(durations) {
            spec.duration_s = d;
            spec.advance = policy;
        }
        s
    }

    fn run(tl: &mut Timeline, until: f64, cue_at: &[(f64, Cue)]) -> Vec<TimelineEvent> {
        let mut all = Vec::new();
        let mut k = 0u64;
        loop {
            let t = k as f64 * 0.01;
            if t > until + 1e-9 {
                break;
            }
            let cues: Vec<Cue> = cue_at.iter().filter(|(ct, _)| (ct - t).abs() < 1e-9).map(|(_, c)| *c).collect();
            all.extend(tl.advance_to(t, &cues));
            k += 1;
        }
        all
    }

    fn boundaries(events: &[TimelineEvent]) -> Vec<(f64, SectionId, SectionId)> {
        events
            .iter()
            .filter_map(|e| match e {
                TimelineEvent::Boundary { t, from, to, .. } => Some((*t, *from, *to)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn timed_sections_split_at_their_durations() {
        let mut tl = Timeline::new(&specs([10.0; 3], AdvancePolicy::Timed), false);
        let ev = run(&mut tl, 31.0, &[]);
        assert_eq!(
            boundaries(&ev),
            vec![(10.0, SectionId::Connection, SectionId::Disconnection), (20.0, SectionId::Disconnection, SectionId::Questioning)]
        );
        assert!(matches!(ev.last(), Some(TimelineEvent::End { t, .. }) if *t == 30.0));
        assert_eq!(tl.position(), Position::Ended);
    }

    #[test]
    fn manual_cue_fires_at_cue_time() {
        let mut tl = Timeline::new(&specs([60.0; 3], AdvancePolicy::CueOrTimed), false);
        let ev = run(&mut tl, 6.0, &[(5.0, Cue::Next)]);
        assert_eq!(boundaries(&ev), vec![(5.0, SectionId::Connection, SectionId::Disconnection)]);
        assert!(tl.t_in_section() < 1.0 + 1e-9);
    }

    #[test]
    fn next_in_last_section_is_ignored() {
        let mut tl = Timeline::new(&specs([60.0; 3], AdvancePolicy::Manual), false);
        let ev = tl.advance_to(0.0, &[Cue::Goto(SectionId::Questioning)]);
        assert_eq!(boundaries(&ev).len(), 1);
        let ev = tl.advance_to(0.01, &[Cue::Next, Cue::Goto(SectionId::Connection)]);
        assert_eq!(ev.iter().filter(|e| matches!(e, TimelineEvent::CueIgnored { .. })).count(), 2);
        assert_eq!(tl.section(), Some(SectionId::Questioning));
        // Manual sections never time out unless forced.
        tl.advance_to(500.0, &[]);
        assert_eq!(tl.section(), Some(SectionId::Questioning));
        let mut forced = Timeline::new(&specs([1.0; 3], AdvancePolicy::Manual), true);
        forced.advance_to(3.0, &[]);
        assert_eq!(forced.position(), Position::Ended);
    }

    proptest! {
        #[test]
        fn cue_spam_keeps_order(cues in prop::collection::vec((0u32..3000, 0u8..4), 0..200)) {
            let mut tl = Timeline::new(&specs([10.0; 3], AdvancePolicy::CueOrTimed), false);
            let cue_at: Vec<(f64, Cue)> = cues.iter().map(|&(k, c)| {
                let cue = match c { 0 => Cue::Next, n => Cue::Goto(SectionId::ALL[n as usize - 1]) };
                (k as f64 * 0.01, cue)
            }).collect();
            let ev = run(&mut tl, 31.0, &cue_at);
            let b = boundaries(&ev);
            prop_assert!(b.len() <= 2);
            prop_assert!(b.windows(2).all(|w| w[0].0 < w[1].0 && w[0].2 <= w[1].1));
            let mut idx = 0;
            for (_, from, to) in &b {
                prop_assert_eq!(from.index(), idx);
                prop_assert!(to.index() > from.index());
                idx = to.index();
            }
            prop_assert_eq!(tl.position(), Position::Ended);
        }
    }
}
