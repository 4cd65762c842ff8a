use crate::error::{Error, Result};
use crate::netpbm::{quantize_unit, Image8};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Axis-aligned rectangle given by half extents.
    Rect { half_w: f64, half_h: f64 },
    Circle { radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    pub color: [f64; 3],
    /// Centre at t = 0, pixels.
    pub position: [f64; 2],
    /// Pixels per second.
    pub velocity: [f64; 2],
    pub object_id: u8,
}

impl SceneObject {
    fn center_at(&self, t_us: u64) -> [f64; 2] {
        let s = t_us as f64 * 1e-6;
        [
            self.position[0] + self.velocity[0] * s,
            self.position[1] + self.velocity[1] * s,
        ]
    }

    fn covers(&self, center: [f64; 2], px: f64, py: f64) -> bool {
        let dx = px - center[0];
        let dy = py - center[1];
        match self.shape {
            Shape::Rect { half_w, half_h } => {
                dx >= -half_w && dx < half_w && dy >= -half_h && dy < half_h
            }
            Shape::Circle { radius } => dx * dx + dy * dy <= radius * radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<SceneObject>,
    pub background: [f64; 3],
    pub duration_us: u64,
    pub seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<u8> = self.objects.iter().map(|o| o.object_id).collect();
        ids.sort_unstable();
        if ids.first() == Some(&0) {
            return Err(Error::Parameter("object ids start at 1".into()));
        }
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("object ids must be unique".into()));
        }
        let unit = |c: &[f64; 3]| c.iter().all(|v| (0.0..=1.0).contains(v));
        if !unit(&self.background) || !self.objects.iter().all(|o| unit(&o.color)) {
            return Err(Error::Parameter("colors must lie in [0, 1]".into()));
        }
        let finite = self.objects.iter().all(|o| {
            o.position.iter().chain(&o.velocity).all(|v| v.is_finite())
        });
        if !finite {
            return Err(Error::Parameter("object motion must be finite".into()));
        }
        Ok(())
    }

    /// Objects in painter's order (ascending id, later ones on top).
    fn painter_order(&self) -> Vec<&SceneObject> {
        let mut objs: Vec<&SceneObject> = self.objects.iter().collect();
        objs.sort_by_key(|o| o.object_id);
        objs
    }

    /// Topmost object covering each pixel centre, or `None` for background.
    fn coverage(&self, t_us: u64) -> Result<Vec<Option<&SceneObject>>> {
        if t_us > self.duration_us {
            return Err(Error::Parameter(format!(
                "t = {t_us} µs outside scene duration {} µs",
                self.duration_us
            )));
        }
        self.validate()?;
        let objs = self.painter_order();
        let centers: Vec<[f64; 2]> = objs.iter().map(|o| o.center_at(t_us)).collect();
        let mut out = vec![None; self.width * self.height];
        for y in 0..self.height {
            let py = y as f64 + 0.5;
            for x in 0..self.width {
                let px = x as f64 + 0.5;
                for (o, &c) in objs.iter().zip(&centers) {
                    if o.covers(c, px, py) {
                        out[y * self.width + x] = Some(*o);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// RGB image with channels in [0, 1], stored `H x W x 3` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub t_us: u64,
    pub pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, t_us: u64, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "{width}x{height} frame needs {} values, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("frame channels must lie in [0, 1]".into()));
        }
        Ok(Frame {
            width,
            height,
            t_us,
            pixels,
        })
    }

    pub fn rgb(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn luma(&self, y: usize, x: usize) -> f64 {
        let [r, g, b] = self.rgb(y, x);
        (r + g + b) / 3.0
    }

    pub fn to_image(&self) -> Image8 {
        let data = self.pixels.iter().map(|&v| quantize_unit(v)).collect();
        Image8::new(self.width, self.height, 3, data).expect("frame shape is consistent")
    }

    /// Decodes an 8-bit RGB image; the timestamp is not stored in the file.
    pub fn from_image(img: &Image8, t_us: u64) -> Result<Self> {
        if img.channels != 3 {
            return Err(Error::Dimension("frames need an RGB (P6) image".into()));
        }
        let pixels = img.data.iter().map(|&v| v as f64 / 255.0).collect();
        Frame::new(img.width, img.height, t_us, pixels)
    }

    /// Horizontally mirrored copy.
    pub fn mirrored(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                pixels.extend_from_slice(&self.rgb(y, x));
            }
        }
        Frame {
            pixels,
            ..self.clone()
        }
    }
}

/// Per-pixel object id, 0 for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub ids: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, ids: Vec<u8>) -> Result<Self> {
        if ids.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} label map needs {} ids, got {}",
                width * height,
                ids.len()
            )));
        }
        Ok(LabelMap { width, height, ids })
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.ids[y * self.width + x]
    }

    pub fn to_image(&self) -> Image8 {
        Image8::new(self.width, self.height, 1, self.ids.clone()).expect("label shape is consistent")
    }

    pub fn from_image(img: &Image8) -> Result<Self> {
        if img.channels != 1 {
            return Err(Error::Dimension("label maps need a gray (P5) image".into()));
        }
        LabelMap::new(img.width, img.height, img.data.clone())
    }
}

/// Renders the scene at `t_us`: flat-shaded objects over the background,
/// sampled at pixel centres.
pub fn render_frame(scene: &Scene, t_us: u64) -> Result<Frame> {
    let cover = scene.coverage(t_us)?;
    let mut pixels = Vec::with_capacity(cover.len() * 3);
    for c in cover {
        pixels.extend_from_slice(&c.map_or(scene.background, |o| o.color));
    }
    Frame::new(scene.width, scene.height, t_us, pixels)
}

/// Id of the topmost object at each pixel, 0 where none covers it.
pub fn render_labels(scene: &Scene, t_us: u64) -> Result<LabelMap> {
    let ids = scene
        .coverage(t_us)?
        .into_iter()
        .map(|c| c.map_or(0, |o| o.object_id))
        .collect();
    LabelMap::new(scene.width, scene.height, ids)
}
