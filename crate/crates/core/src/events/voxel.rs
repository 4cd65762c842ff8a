use super::stream::EventStream;
use crate::error::{Error, Result};
use crate::format::Tensor;
use crate::par::{self, Execution};

pub const DEFAULT_BINS: usize = 3;

/// Rows per accumulation band. Each band owns a contiguous slice of the
/// volume, so bands can be filled concurrently without sharing cells.
const BAND_ROWS: usize = 8;

/// Signed `height x width x bins` event accumulation, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EventVolume {
    width: usize,
    height: usize,
    bins: usize,
    data: Vec<f64>,
}

impl EventVolume {
    pub fn zeros(width: usize, height: usize, bins: usize) -> Self {
        EventVolume {
            width,
            height,
            bins,
            data: vec![0.0; width * height * bins],
        }
    }

    pub fn from_data(width: usize, height: usize, bins: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * bins {
            return Err(Error::Dimension(format!(
                "volume {height}x{width}x{bins} needs {} values, got {}",
                width * height * bins,
                data.len()
            )));
        }
        Ok(EventVolume {
            width,
            height,
            bins,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, b: usize) -> usize {
        (y * self.width + x) * self.bins + b
    }

    pub fn get(&self, y: usize, x: usize, b: usize) -> f64 {
        self.data[self.index(y, x, b)]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EventVolume {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// As an `FTN1` tensor with dims `[H, W, B]`.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::f64(vec![self.height, self.width, self.bins], self.data.clone())
            .expect("volume shape is consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.dims[..] {
            [h, w, b] => Self::from_data(w, h, b, t.to_f64()),
            _ => Err(Error::Dimension(format!(
                "event volume must be 3-d [H, W, B], got {:?}",
                t.dims
            ))),
        }
    }
}

/// Accumulates `stream` into `bins` temporal bins with linear interpolation
/// in time.
///
/// Timestamps are normalised to `t* = (B-1)(t - t_first)/(t_last - t_first)`
/// and each event deposits `p * max(0, 1 - |b - t*|)` into the two bins
/// around `t*`. A window with a single distinct timestamp, or `B = 1`, puts
/// all mass in bin 0.
pub fn voxelize(stream: &EventStream, bins: usize) -> Result<EventVolume> {
    voxelize_with(stream, bins, Execution::default())
}

/// [`voxelize`] with explicit execution mode. Output is bitwise identical
/// across modes: each cell receives its contributions in stream order.
pub fn voxelize_with(stream: &EventStream, bins: usize, exec: Execution) -> Result<EventVolume> {
    if bins == 0 {
        return Err(Error::Parameter("bins must be at least 1".into()));
    }
    let (w, h) = (stream.width(), stream.height());
    let mut vol = EventVolume::zeros(w, h, bins);
    let events = stream.events();
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Ok(vol);
    };
    let t0 = first.t;
    let span = last.t - first.t;
    let scale = if span == 0 || bins == 1 {
        0.0
    } else {
        (bins - 1) as f64 / span as f64
    };

    // Counting sort of event indices by row band, stable in time.
    let n_bands = h.div_ceil(BAND_ROWS).max(1);
    let mut starts = vec![0usize; n_bands + 1];
    for e in events {
        starts[e.y as usize / BAND_ROWS + 1] += 1;
    }
    for i in 0..n_bands {
        starts[i + 1] += starts[i];
    }
    let mut fill = starts.clone();
    let mut order = vec![0u32; events.len()];
    for (i, e) in events.iter().enumerate() {
        let band = e.y as usize / BAND_ROWS;
        order[fill[band]] = i as u32;
        fill[band] += 1;
    }

    let band_len = BAND_ROWS * w * bins;
    par::for_each_chunk_mut(exec, vol.data_mut(), band_len, |band, cells| {
        let base_row = band * BAND_ROWS;
        for &i in &order[starts[band]..starts[band + 1]] {
            let e = &events[i as usize];
            let t_star = (e.t - t0) as f64 * scale;
            let lo = t_star.floor();
            let frac = t_star - lo;
            let lo = (lo as usize).min(bins - 1);
            let p = e.p as f64;
            let cell = ((e.y as usize - base_row) * w + e.x as usize) * bins;
            cells[cell + lo] += p * (1.0 - frac);
            if frac > 0.0 && lo + 1 < bins {
                cells[cell + lo + 1] += p * frac;
            }
        }
    });
    Ok(vol)
}
