use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::esim::{esim_events, DEFAULT_CONTRAST, DEFAULT_LOG_EPS};
use super::scene::{render_frame, render_labels, Frame, LabelMap, Scene, SceneObject, Shape};
use crate::error::{Error, Result};
use crate::events::EventStream;
use crate::format::{read_file, write_file};
use crate::netpbm::Image8;
use crate::par::{self, Execution};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Label classes in generated scenes: background plus one per object id.
pub const CLASS_COUNT: usize = 4;

/// Base colours per object id; each scene jitters them slightly. Luma
/// against the background is dark, mid and bright per class, and the four
/// colours together with the background span RGB space (no three collinear).
const PALETTE: [[f64; 3]; 3] = [[0.01, 0.01, 0.13], [0.5, 0.02, 0.98], [0.3, 0.98, 0.97]];
const BACKGROUND: [f64; 3] = [0.25, 0.25, 0.25];
const COLOR_JITTER: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub contrast: f64,
    pub log_eps: f64,
    /// Time between the two frames of a triplet, µs.
    pub duration_us: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 128,
            height: 128,
            contrast: DEFAULT_CONTRAST,
            log_eps: DEFAULT_LOG_EPS,
            duration_us: 10_000,
        }
    }
}

/// One rendered triplet held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub frame0: Frame,
    pub frame1: Frame,
    pub events: EventStream,
    /// Labels at the time of `frame0`.
    pub labels: LabelMap,
}

fn scene_rng(seed: u64, index: u64) -> ChaCha8Rng {
    // splitmix64 finaliser over (seed, index)
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Random three-object scene. Object `i` (id `i + 1`) starts in its own
/// quadrant of the frame so every class stays visible, and travels further
/// than its own diameter so its whole starting footprint emits events.
pub fn random_scene(seed: u64, index: u64, cfg: &SynthConfig) -> Scene {
    let mut rng = scene_rng(seed, index);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let side = w.min(h);
    let jitter = |rng: &mut ChaCha8Rng, c: [f64; 3]| {
        c.map(|v| (v + rng.random_range(-COLOR_JITTER..=COLOR_JITTER)).clamp(0.0, 1.0))
    };
    let background = jitter(&mut rng, BACKGROUND);

    // three of the four quadrants hold one object each
    let mut quadrants = [0usize, 1, 2, 3];
    for i in (1..4).rev() {
        let j = rng.random_range(0..=i);
        quadrants.swap(i, j);
    }
    let duration_s = cfg.duration_us as f64 * 1e-6;
    let objects = (0..3)
        .map(|i| {
            let size = rng.random_range(0.19..0.23) * side;
            let shape = if rng.random_bool(0.5) {
                Shape::Circle { radius: size }
            } else {
                let aspect = rng.random_range(0.8..1.25);
                Shape::Rect {
                    half_w: size * aspect,
                    half_h: size / aspect,
                }
            };
            let (qx, qy) = ((quadrants[i] % 2) as f64, (quadrants[i] / 2) as f64);
            let cx = (qx + 0.5 + rng.random_range(-0.1..0.1)) * w / 2.0;
            let cy = (qy + 0.5 + rng.random_range(-0.1..0.1)) * h / 2.0;
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let travel = rng.random_range(0.50..0.60) * side;
            let speed = if duration_s > 0.0 { travel / duration_s } else { 0.0 };
            SceneObject {
                shape,
                color: jitter(&mut rng, PALETTE[i]),
                position: [cx, cy],
                velocity: [speed * angle.cos(), speed * angle.sin()],
                object_id: i as u8 + 1,
            }
        })
        .collect();
    Scene {
        width: cfg.width,
        height: cfg.height,
        objects,
        background,
        duration_us: cfg.duration_us,
        seed,
    }
}

/// Renders scene `index` of the seeded family: frames at 0 and at the scene
/// duration, the events between them, and labels at time 0.
pub fn synthesize_scene(seed: u64, index: u64, cfg: &SynthConfig) -> Result<SceneSample> {
    let scene = random_scene(seed, index, cfg);
    let frame0 = render_frame(&scene, 0)?;
    let frame1 = render_frame(&scene, scene.duration_us)?;
    let events = esim_events(&frame0, &frame1, cfg.contrast, cfg.log_eps)?;
    let labels = render_labels(&scene, 0)?;
    Ok(SceneSample {
        frame0,
        frame1,
        events,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub frame0: PathBuf,
    pub frame1: PathBuf,
    pub events: PathBuf,
    pub labels: PathBuf,
}

/// Triplet list; paths are relative to `root`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub root: PathBuf,
    pub triplets: Vec<Triplet>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.triplets {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}",
                t.frame0.display(),
                t.frame1.display(),
                t.events.display(),
                t.labels.display()
            );
        }
        s
    }

    pub fn parse(root: impl Into<PathBuf>, text: &str) -> Result<Self> {
        let triplets = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let cols: Vec<&str> = line.split('\t').collect();
                match cols[..] {
                    [f0, f1, ev, lb] => Ok(Triplet {
                        frame0: f0.into(),
                        frame1: f1.into(),
                        events: ev.into(),
                        labels: lb.into(),
                    }),
                    _ => Err(Error::format(
                        "manifest",
                        format!("line {} has {} columns, expected 4", i + 1, cols.len()),
                    )),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Manifest {
            root: root.into(),
            triplets,
        })
    }

    /// Loads triplet `i` from disk. Frame timestamps are 0 and 1 µs since
    /// the image files do not carry them.
    pub fn load_sample(&self, i: usize) -> Result<SceneSample> {
        let t = &self.triplets[i];
        let frame0 = Frame::from_image(&Image8::load(self.root.join(&t.frame0))?, 0)?;
        let frame1 = Frame::from_image(&Image8::load(self.root.join(&t.frame1))?, 1)?;
        let events = EventStream::load_evt1(self.root.join(&t.events))?;
        let labels = LabelMap::from_image(&Image8::load(self.root.join(&t.labels))?)?;
        Ok(SceneSample {
            frame0,
            frame1,
            events,
            labels,
        })
    }

    pub fn subset(&self, indices: impl IntoIterator<Item = usize>) -> Self {
        Manifest {
            root: self.root.clone(),
            triplets: indices.into_iter().map(|i| self.triplets[i].clone()).collect(),
        }
    }
}

pub fn load_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let bytes = read_file(dir.join(MANIFEST_NAME))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::format("manifest", "not utf-8"))?;
    Manifest::parse(dir, &text)
}

/// Writes `n_scenes` triplets plus `manifest.txt` into `out_dir`.
pub fn generate_dataset(
    n_scenes: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
    cfg: &SynthConfig,
) -> Result<Manifest> {
    generate_dataset_with(n_scenes, seed, out_dir, cfg, Execution::default())
}

pub fn generate_dataset_with(
    n_scenes: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
    cfg: &SynthConfig,
    exec: Execution,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let encoded = par::map_range(exec, n_scenes, |i| -> Result<[Vec<u8>; 4]> {
        let s = synthesize_scene(seed, i as u64, cfg)?;
        Ok([
            s.frame0.to_image().to_bytes(),
            s.frame1.to_image().to_bytes(),
            s.events.to_evt1_bytes(),
            s.labels.to_image().to_bytes(),
        ])
    });
    let mut triplets = Vec::with_capacity(n_scenes);
    for (i, files) in encoded.into_iter().enumerate() {
        let t = Triplet {
            frame0: format!("frame0_{i}.ppm").into(),
            frame1: format!("frame1_{i}.ppm").into(),
            events: format!("events_{i}.evt1").into(),
            labels: format!("labels_{i}.pgm").into(),
        };
        let [f0, f1, ev, lb] = files?;
        write_file(out_dir.join(&t.frame0), &f0)?;
        write_file(out_dir.join(&t.frame1), &f1)?;
        write_file(out_dir.join(&t.events), &ev)?;
        write_file(out_dir.join(&t.labels), &lb)?;
        triplets.push(t);
    }
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        triplets,
    };
    write_file(out_dir.join(MANIFEST_NAME), manifest.to_text().as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            width: 48,
            height: 32,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_scenes_gives_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(0, 3, dir.path(), &small()).unwrap();
        assert!(m.is_empty());
        assert_eq!(fs::read(dir.path().join(MANIFEST_NAME)).unwrap(), b"");
        assert!(load_manifest(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn scenes_are_seeded() {
        let cfg = small();
        assert_eq!(random_scene(5, 2, &cfg), random_scene(5, 2, &cfg));
        assert_ne!(random_scene(5, 2, &cfg), random_scene(5, 3, &cfg));
        assert_ne!(random_scene(5, 2, &cfg), random_scene(6, 2, &cfg));
        random_scene(5, 2, &cfg).validate().unwrap();
    }

    #[test]
    fn every_class_is_visible() {
        let cfg = SynthConfig::default();
        for i in 0..20 {
            let s = synthesize_scene(9, i, &cfg).unwrap();
            for id in 0..CLASS_COUNT as u8 {
                assert!(s.labels.ids.contains(&id), "scene {i} lacks id {id}");
            }
            assert!(!s.events.is_empty());
        }
    }

    #[test]
    fn written_files_reload() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let m = generate_dataset(2, 11, dir.path(), &cfg).unwrap();
        let reread = load_manifest(dir.path()).unwrap();
        assert_eq!(reread, m);
        let mem = synthesize_scene(11, 1, &cfg).unwrap();
        let disk = reread.load_sample(1).unwrap();
        assert_eq!(disk.events, mem.events);
        assert_eq!(disk.labels, mem.labels);
        assert_eq!(disk.frame0.to_image(), mem.frame0.to_image());
    }

    #[test]
    fn manifest_rejects_bad_lines() {
        assert!(Manifest::parse("/x", "a\tb\tc\n").is_err());
        let m = Manifest::parse("/x", "a\tb\tc\td\n\n").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.to_text(), "a\tb\tc\td\n");
    }
}
