use super::scene::Frame;
use crate::error::{Error, Result};
use crate::events::{EventRecord, EventStream};

pub const DEFAULT_CONTRAST: f64 = 0.2;
pub const DEFAULT_LOG_EPS: f64 = 1e-3;

/// Events a log-intensity threshold sensor emits between two frames.
///
/// Per pixel, `L = ln(luma + eps)` with `luma` the channel mean. A change
/// `ΔL` produces `floor(|ΔL| / C)` events of polarity `sign(ΔL)`, placed at
/// the linear threshold crossings `t0 + (m C / |ΔL|)(t1 - t0)`, `m = 1..k`,
/// rounded to the nearest microsecond inside `(t0, t1]`. The merged stream is
/// ordered by time, ties in raster order.
pub fn esim_events(frame0: &Frame, frame1: &Frame, contrast: f64, eps: f64) -> Result<EventStream> {
    if frame0.width != frame1.width || frame0.height != frame1.height {
        return Err(Error::Dimension(format!(
            "frames are {}x{} and {}x{}",
            frame0.width, frame0.height, frame1.width, frame1.height
        )));
    }
    if frame0.t_us >= frame1.t_us {
        return Err(Error::Parameter(format!(
            "frame times must increase, got {} then {}",
            frame0.t_us, frame1.t_us
        )));
    }
    if !(contrast > 0.0) || !(eps > 0.0) {
        return Err(Error::Parameter("contrast and eps must be positive".into()));
    }
    let (t0, t1) = (frame0.t_us, frame1.t_us);
    let span = (t1 - t0) as f64;
    let mut events = Vec::new();
    for y in 0..frame0.height {
        for x in 0..frame0.width {
            let dl = (frame1.luma(y, x) + eps).ln() - (frame0.luma(y, x) + eps).ln();
            let mag = dl.abs();
            let k = (mag / contrast).floor() as u64;
            let p = if dl > 0.0 { 1 } else { -1 };
            for m in 1..=k {
                let offset = (m as f64 * contrast / mag * span).round() as u64;
                let t = (t0 + offset).clamp(t0 + 1, t1);
                events.push(EventRecord::new(x as u16, y as u16, p, t));
            }
        }
    }
    EventStream::from_unsorted(frame0.width, frame0.height, events)
}
