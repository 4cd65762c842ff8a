use crate::error::{Error, Result};

/// One event: pixel column `x`, row `y`, polarity `p` (±1), timestamp `t` in µs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub x: u16,
    pub y: u16,
    pub p: i8,
    pub t: u64,
}

impl EventRecord {
    pub fn new(x: u16, y: u16, p: i8, t: u64) -> Self {
        EventRecord { x, y, p, t }
    }
}

/// Time-ordered events on a `width` x `height` sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: usize,
    height: usize,
    events: Vec<EventRecord>,
}

impl EventStream {
    /// Validates geometry, polarity and time order.
    pub fn new(width: usize, height: usize, events: Vec<EventRecord>) -> Result<Self> {
        if width > u16::MAX as usize + 1 || height > u16::MAX as usize + 1 {
            return Err(Error::Parameter(format!(
                "sensor {width}x{height} exceeds 16-bit coordinates"
            )));
        }
        for (i, e) in events.iter().enumerate() {
            if e.x as usize >= width || e.y as usize >= height {
                return Err(Error::Parameter(format!(
                    "event {i} at ({}, {}) outside {width}x{height}",
                    e.x, e.y
                )));
            }
            if e.p != 1 && e.p != -1 {
                return Err(Error::Parameter(format!("event {i} has polarity {}", e.p)));
            }
        }
        if let Some(i) = events.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(Error::Parameter(format!(
                "events not time-ordered at index {}",
                i + 1
            )));
        }
        Ok(EventStream {
            width,
            height,
            events,
        })
    }

    /// Stable-sorts by timestamp before validating; ties keep insertion order.
    pub fn from_unsorted(width: usize, height: usize, mut events: Vec<EventRecord>) -> Result<Self> {
        events.sort_by_key(|e| e.t);
        Self::new(width, height, events)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        EventStream {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn polarity_sum(&self) -> i64 {
        self.events.iter().map(|e| e.p as i64).sum()
    }

    fn sub(&self, range: std::ops::Range<usize>) -> Self {
        EventStream {
            width: self.width,
            height: self.height,
            events: self.events[range].to_vec(),
        }
    }
}

/// Window selection rule for [`sample_window`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Events with `anchor <= t < anchor + duration` (µs).
    Duration(u64),
    /// The `n` most recent events with `t <= anchor`.
    Count(usize),
}

/// Cuts a sub-stream out of `stream`. An empty selection is not an error.
pub fn sample_window(stream: &EventStream, window: Window, anchor_t: u64) -> Result<EventStream> {
    let ev = stream.events();
    match window {
        Window::Duration(0) => Err(Error::Parameter("window duration must be positive".into())),
        Window::Count(0) => Err(Error::Parameter("window count must be positive".into())),
        Window::Duration(dt) => {
            let lo = ev.partition_point(|e| e.t < anchor_t);
            let hi = match anchor_t.checked_add(dt) {
                Some(end_t) => ev.partition_point(|e| e.t < end_t),
                None => ev.len(),
            };
            Ok(stream.sub(lo..hi))
        }
        Window::Count(n) => {
            let hi = ev.partition_point(|e| e.t <= anchor_t);
            Ok(stream.sub(hi.saturating_sub(n)..hi))
        }
    }
}
