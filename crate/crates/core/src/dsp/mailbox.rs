//! Channels between the control side and the render context.

use std::sync::Arc;

use crossbeam_queue::ArrayQueue;
use triple_buffer::triple_buffer;

use super::Meters;
use crate::mapping::{ParamFrame, SectionId};

/// Control-side end of the single-slot parameter mailbox.
pub struct ParamSender(triple_buffer::Input<ParamFrame>);

/// Render-side end. Reading never blocks and always yields the newest frame.
pub struct ParamReceiver(triple_buffer::Output<ParamFrame>);

pub fn param_mailbox() -> (ParamSender, ParamReceiver) {
    let (input, output) = triple_buffer(&ParamFrame::neutral(SectionId::Connection));
    (ParamSender(input), ParamReceiver(output))
}

impl ParamSender {
    pub fn send(&mut self, frame: ParamFrame) {
        self.0.write(frame);
    }
}

impl ParamReceiver {
    pub fn latest(&mut self) -> &ParamFrame {
        self.0.read()
    }

    pub fn has_update(&self) -> bool {
        self.0.updated()
    }
}

/// Bounded meter queue; a full queue drops its oldest entry.
#[derive(Clone)]
pub struct MeterQueue(Arc<ArrayQueue<Meters>>);

impl MeterQueue {
    pub fn new(capacity: usize) -> Self {
        Self(Arc::new(ArrayQueue::new(capacity.max(1))))
    }

    pub fn push(&self, m: Meters) {
        self.0.force_push(m);
    }

    pub fn pop(&self) -> Option<Meters> {
        self.0.pop()
    }

    /// Drains the queue and returns the newest entry.
    pub fn latest(&self) -> Option<Meters> {
        let mut last = None;
        while let Some(m) = self.0.pop() {
            last = Some(m);
        }
        last
    }
}
