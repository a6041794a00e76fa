use std::sync::Mutex;

/// Single-slot handoff between a frame-ingestion context and an inference
/// context: at most one pending item, and a newer item replaces an unclaimed
/// older one (newest-wins when inference falls behind).
#[derive(Debug, Default)]
pub struct LatestSlot<T> {
    slot: Mutex<Option<T>>,
}

impl<T> LatestSlot<T> {
    pub fn new() -> Self {
        LatestSlot {
            slot: Mutex::new(None),
        }
    }

    /// Publish a new item, returning whatever unclaimed item it displaced.
    pub fn publish(&self, item: T) -> Option<T> {
        self.slot.lock().unwrap().replace(item)
    }

    /// Claim the pending item, leaving the slot empty.
    pub fn claim(&self) -> Option<T> {
        self.slot.lock().unwrap().take()
    }
}
