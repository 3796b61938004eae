//! Synthetic soft-tissue oracle: a damped mass-spring membrane with a pumping
//! baseline, random smooth "natural" motion and a four-phase poke.
//!
//! Nodes sit on a unit-spaced `n×n` grid (one node per pixel). Each interior
//! node is tied to its four neighbours by zero-rest-length springs and to its
//! rest position by an anchor spring; boundary nodes are fixed.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::contact::ContactForceSignal;
use crate::error::{Error, Result};
use crate::flow::{FrameSequence, MotionTexture};
use crate::plane::{Plane, VectorField};

/// Displacement (in grid spacings) beyond which a run counts as unstable.
pub const BLOWUP_LIMIT: f64 = 1e3;
const NATURAL_MODES: usize = 4;
const PUMP_SHARPNESS: f64 = 4.0;
const INVERSE_WARP_ITERATIONS: usize = 12;

/// Durations (s) of the four contact phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PokePhases {
    pub rest: f64,
    pub push: f64,
    pub lock: f64,
    pub release: f64,
}

impl Default for PokePhases {
    fn default() -> Self {
        Self {
            rest: 2.0,
            push: 1.0,
            lock: 1.0,
            release: 1.0,
        }
    }
}

impl PokePhases {
    pub fn lock_window(&self) -> (f64, f64) {
        let start = self.rest + self.push;
        (start, start + self.lock)
    }

    pub fn end(&self) -> f64 {
        self.rest + self.push + self.lock + self.release
    }
}

/// Trapezoid in `[0, 1]`: 0 at rest, linear rise, 1 while locked, linear fall,
/// 0 afterwards.
pub fn poke_profile(t: f64, phases: &PokePhases) -> f64 {
    let mut s = t - phases.rest;
    if s < 0.0 {
        return 0.0;
    }
    if s < phases.push {
        return s / phases.push;
    }
    s -= phases.push;
    if s < phases.lock {
        return 1.0;
    }
    s -= phases.lock;
    if s < phases.release {
        return 1.0 - s / phases.release;
    }
    0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Nodes per side.
    pub grid: usize,
    /// Neighbour spring constant.
    pub stiffness: f64,
    /// Spring tying each node to its rest position.
    pub anchor_stiffness: f64,
    pub damping: f64,
    pub mass: f64,
    pub pump_frequency: f64,
    /// Peak radial pump force at the grid edge.
    pub pump_amplitude: f64,
    /// Stationary standard deviation of each natural-motion amplitude.
    pub natural_amplitude: f64,
    /// Correlation time (s) of the natural-motion amplitudes.
    pub natural_tau: f64,
    /// Peak total poke force density at the centre node.
    pub poke_force: f64,
    /// Defaults to the grid centre.
    pub poke_center: Option<[f64; 2]>,
    pub poke_radius: f64,
    /// Image axes, rows down; normalized on use.
    pub poke_direction: [f64; 2],
    pub phases: PokePhases,
    pub dt: f64,
    pub fps: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::interaction()
    }
}

impl SynthConfig {
    /// Pumping plus natural motion, no contact.
    pub fn baseline() -> Self {
        Self {
            grid: 32,
            stiffness: 200.0,
            anchor_stiffness: 1000.0,
            damping: 40.0,
            mass: 1.0,
            pump_frequency: 2.0,
            pump_amplitude: 300.0,
            natural_amplitude: 100.0,
            natural_tau: 0.3,
            poke_force: 0.0,
            poke_center: None,
            poke_radius: 3.0,
            poke_direction: [1.0, 0.4],
            phases: PokePhases::default(),
            dt: 1e-3,
            fps: 30.0,
            duration: 10.0,
            seed: 1,
        }
    }

    /// Pumping, weak natural motion and a poke.
    pub fn interaction() -> Self {
        Self {
            natural_amplitude: 5.0,
            poke_force: 2300.0,
            duration: 8.0,
            seed: 2,
            ..Self::baseline()
        }
    }

    pub fn frames(&self) -> usize {
        (self.duration * self.fps).round() as usize
    }

    pub fn center(&self) -> [f64; 2] {
        self.poke_center.unwrap_or_else(|| {
            let c = (self.grid as f64 - 1.0) / 2.0;
            [c, c]
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stiffness", self.stiffness),
            ("anchor_stiffness", self.anchor_stiffness),
            ("damping", self.damping),
            ("mass", self.mass),
            ("pump_frequency", self.pump_frequency),
            ("natural_tau", self.natural_tau),
            ("poke_radius", self.poke_radius),
            ("dt", self.dt),
            ("fps", self.fps),
            ("duration", self.duration),
            ("phases.rest", self.phases.rest),
            ("phases.push", self.phases.push),
            ("phases.lock", self.phases.lock),
            ("phases.release", self.phases.release),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
        }
        let nonnegative = [
            ("pump_amplitude", self.pump_amplitude),
            ("natural_amplitude", self.natural_amplitude),
            ("poke_force", self.poke_force),
        ];
        if let Some((name, v)) = nonnegative.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!("{name} must be nonnegative, got {v}")));
        }
        if self.grid < 3 {
            return Err(Error::InvalidInput(format!("grid must be at least 3, got {}", self.grid)));
        }
        if self.dt > 1.0 / (10.0 * self.fps) {
            return Err(Error::InvalidInput(format!(
                "integrator dt {} exceeds 1/(10·fps) = {}",
                self.dt,
                1.0 / (10.0 * self.fps)
            )));
        }
        if self.frames() < 2 {
            return Err(Error::InvalidInput("duration covers fewer than 2 frames".into()));
        }
        let [dx, dy] = self.poke_direction;
        if !(dx.hypot(dy) > 0.0) {
            return Err(Error::InvalidInput("poke direction must be nonzero".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::format("synth config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("synth config serializes")
    }
}

/// Integrator state. `step` advances by one `dt` using forcing evaluated at
/// the current time.
#[derive(Debug, Clone)]
pub struct Membrane {
    config: SynthConfig,
    n: usize,
    position: Vec<[f64; 2]>,
    velocity: Vec<[f64; 2]>,
    steps: u64,
    rng: ChaCha8Rng,
    // [mode][component] with mode = a*NATURAL_MODES + b
    natural: Vec<[f64; 2]>,
    sin_table: Vec<Vec<f64>>,
    poke_shape: Vec<f64>,
    poke_dir: [f64; 2],
}

impl Membrane {
    pub fn new(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let n = config.grid;
        let span = (n - 1) as f64;
        let sin_table = (1..=NATURAL_MODES)
            .map(|a| (0..n).map(|i| (PI * a as f64 * i as f64 / span).sin()).collect())
            .collect();
        let [cx, cy] = config.center();
        let r2 = 2.0 * config.poke_radius * config.poke_radius;
        let poke_shape = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64, (i / n) as f64);
                (-((x - cx).powi(2) + (y - cy).powi(2)) / r2).exp()
            })
            .collect();
        let [dx, dy] = config.poke_direction;
        let len = dx.hypot(dy);
        Ok(Self {
            config: config.clone(),
            n,
            position: vec![[0.0; 2]; n * n],
            velocity: vec![[0.0; 2]; n * n],
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            natural: vec![[0.0; 2]; NATURAL_MODES * NATURAL_MODES],
            sin_table,
            poke_shape,
            poke_dir: [dx / len, dy / len],
        })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.position
    }

    pub fn velocities(&self) -> &[[f64; 2]] {
        &self.velocity
    }

    fn is_boundary(&self, i: usize) -> bool {
        let (x, y) = (i % self.n, i / self.n);
        x == 0 || y == 0 || x == self.n - 1 || y == self.n - 1
    }

    /// Spring forces on every node (boundary entries are meaningless).
    fn elastic_forces(&self, out: &mut [[f64; 2]]) {
        let n = self.n;
        let k = self.config.stiffness;
        let k0 = self.config.anchor_stiffness;
        for y in 1..n - 1 {
            for x in 1..n - 1 {
                let i = y * n + x;
                let p = self.position[i];
                let nb = [i - 1, i + 1, i - n, i + n];
                for c in 0..2 {
                    let lap: f64 = nb.iter().map(|&j| self.position[j][c]).sum::<f64>() - 4.0 * p[c];
                    out[i][c] = k * lap - k0 * p[c];
                }
            }
        }
    }

    /// Applied force on node `i`, excluding springs and damping.
    fn external_force(&self, i: usize, pump: f64, poke: f64) -> [f64; 2] {
        let n = self.n;
        let (x, y) = (i % n, i / n);
        let half = (n as f64 - 1.0) / 2.0;
        let mut f = [
            pump * (x as f64 - half) / half,
            pump * (y as f64 - half) / half,
        ];
        if self.config.natural_amplitude > 0.0 {
            for a in 0..NATURAL_MODES {
                for b in 0..NATURAL_MODES {
                    let s = self.sin_table[a][x] * self.sin_table[b][y];
                    let amp = self.natural[a * NATURAL_MODES + b];
                    f[0] += amp[0] * s;
                    f[1] += amp[1] * s;
                }
            }
        }
        let g = poke * self.poke_shape[i];
        f[0] += g * self.poke_dir[0];
        f[1] += g * self.poke_dir[1];
        f
    }

    pub fn step(&mut self) {
        let cfg = &self.config;
        let dt = cfg.dt;
        let t = self.time();
        if cfg.natural_amplitude > 0.0 {
            let decay = dt / cfg.natural_tau;
            let kick = cfg.natural_amplitude * (2.0 * decay).sqrt();
            for amp in self.natural.iter_mut() {
                for c in amp.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    *c += -*c * decay + kick * z;
                }
            }
        }
        let pump = cfg.pump_amplitude * (PUMP_SHARPNESS * (2.0 * PI * cfg.pump_frequency * t).sin()).tanh()
            / PUMP_SHARPNESS.tanh();
        let poke = cfg.poke_force * poke_profile(t, &cfg.phases);

        let mut force = vec![[0.0; 2]; self.n * self.n];
        self.elastic_forces(&mut force);
        let (c, m) = (self.config.damping, self.config.mass);
        for i in 0..self.n * self.n {
            if self.is_boundary(i) {
                continue;
            }
            let ext = self.external_force(i, pump, poke);
            for k in 0..2 {
                let total = force[i][k] + ext[k] - c * self.velocity[i][k];
                self.velocity[i][k] += dt * total / m;
                self.position[i][k] += dt * self.velocity[i][k];
            }
        }
        self.steps += 1;
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.config.mass
            * self
                .velocity
                .iter()
                .map(|v| v[0] * v[0] + v[1] * v[1])
                .sum::<f64>()
    }

    /// Neighbour springs over every grid edge plus anchor springs.
    pub fn elastic_energy(&self) -> f64 {
        let n = self.n;
        let sq = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        let mut springs = 0.0;
        for y in 0..n {
            for x in 0..n {
                let i = y * n + x;
                if x + 1 < n {
                    springs += sq(self.position[i], self.position[i + 1]);
                }
                if y + 1 < n {
                    springs += sq(self.position[i], self.position[i + n]);
                }
            }
        }
        let anchor: f64 = self.position.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum();
        0.5 * self.config.stiffness * springs + 0.5 * self.config.anchor_stiffness * anchor
    }

    pub fn energy(&self) -> f64 {
        self.kinetic_energy() + self.elastic_energy()
    }

    /// `E − (dt/2)·vᵀK x`, the quantity the damped semi-implicit Euler step
    /// never increases when unforced.
    pub fn shadow_energy(&self) -> f64 {
        let mut force = vec![[0.0; 2]; self.n * self.n];
        self.elastic_forces(&mut force);
        // K x = −(elastic force) on interior nodes; boundary velocity is zero.
        let vkx: f64 = (0..self.n * self.n)
            .filter(|&i| !self.is_boundary(i))
            .map(|i| -(self.velocity[i][0] * force[i][0] + self.velocity[i][1] * force[i][1]))
            .sum();
        self.energy() - 0.5 * self.config.dt * vkx
    }

    fn snapshot(&self) -> VectorField {
        VectorField::from_vec(self.n, self.n, self.position.clone()).expect("grid sized")
    }

    fn max_displacement(&self) -> f64 {
        self.position
            .iter()
            .map(|p| {
                let m = p[0].hypot(p[1]);
                if m.is_finite() {
                    m
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Simulated displacement fields and the applied poke force.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub displacements: MotionTexture,
    /// Total applied poke force, `v` up.
    pub force: ContactForceSignal,
    pub contact_center: [f64; 2],
    pub fps: f64,
    pub config: SynthConfig,
}

/// Integrate the membrane and sample it at the output rate. Frame `f` is the
/// state at `t = f/fps`; frame 0 is the rest state.
pub fn simulate(config: &SynthConfig) -> Result<SynthDataset> {
    let mut membrane = Membrane::new(config)?;
    let frames = config.frames();
    let steps_per_second = 1.0 / config.dt;
    let mut fields = Vec::with_capacity(frames);
    let (mut fu, mut fv) = (Vec::with_capacity(frames), Vec::with_capacity(frames));
    let [dx, dy] = membrane.poke_dir;
    // Total force of the Gaussian footprint per unit profile.
    let footprint: f64 = membrane.poke_shape.iter().sum::<f64>() * config.poke_force;
    for f in 0..frames {
        let t = f as f64 / config.fps;
        let target_step = (t * steps_per_second).round() as u64;
        while membrane.steps < target_step {
            membrane.step();
        }
        let peak = membrane.max_displacement();
        if peak > BLOWUP_LIMIT {
            return Err(Error::Unstable {
                magnitude: peak,
                limit: BLOWUP_LIMIT,
                time: membrane.time(),
            });
        }
        fields.push(membrane.snapshot());
        let p = footprint * poke_profile(t, &config.phases);
        fu.push(p * dx);
        fv.push(-p * dy);
    }
    Ok(SynthDataset {
        displacements: MotionTexture::new(fields, config.fps, 0)?,
        force: ContactForceSignal::new(fu, fv, config.fps)?,
        contact_center: config.center(),
        fps: config.fps,
        config: config.clone(),
    })
}

/// Smooth random intensity pattern defined on the whole plane, so shifted
/// copies are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ProceduralTexture {
    // (kx, ky, phase)
    waves: Vec<[f64; 3]>,
    amplitude: f64,
}

impl ProceduralTexture {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wavelength = Uniform::new(6.0, 18.0).expect("valid range");
        let angle = Uniform::new(0.0, PI).expect("valid range");
        let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
        let count = 12;
        let waves = (0..count)
            .map(|_| {
                let k = 2.0 * PI / wavelength.sample(&mut rng);
                let a: f64 = angle.sample(&mut rng);
                [k * a.cos(), k * a.sin(), phase.sample(&mut rng)]
            })
            .collect();
        Self {
            waves,
            amplitude: 0.45 / count as f64,
        }
    }

    /// Intensity in `[0.05, 0.95]`.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        0.5 + self.amplitude
            * self
                .waves
                .iter()
                .map(|w| (w[0] * x + w[1] * y + w[2]).sin())
                .sum::<f64>()
    }

    pub fn render(&self, width: usize, height: usize) -> Plane {
        self.render_shifted(width, height, 0.0, 0.0)
    }

    /// Image whose content is moved by `(dx, dy)`.
    pub fn render_shifted(&self, width: usize, height: usize, dx: f64, dy: f64) -> Plane {
        Plane::from_fn(width, height, |x, y| self.value(x as f64 - dx, y as f64 - dy))
    }
}

/// Advect `texture` by every displacement field: frame `t` shows the texture
/// point `p` at `p + M_t(p)`. Larger textures are centre-cropped; the margin
/// supplies content that moves into view.
pub fn render_textured(ds: &SynthDataset, texture: &Plane) -> Result<FrameSequence> {
    let (w, h) = ds.displacements.dims();
    if texture.width() < w || texture.height() < h {
        return Err(Error::DimensionMismatch(format!(
            "texture {}x{} smaller than the {w}x{h} grid",
            texture.width(),
            texture.height()
        )));
    }
    let ox = ((texture.width() - w) / 2) as f64;
    let oy = ((texture.height() - h) / 2) as f64;
    let frames = ds
        .displacements
        .fields()
        .iter()
        .map(|field| {
            Plane::from_fn(w, h, |x, y| {
                let (qx, qy) = (x as f64, y as f64);
                let (mut px, mut py) = (qx, qy);
                for _ in 0..INVERSE_WARP_ITERATIONS {
                    let [u, v] = field.sample(px, py);
                    px = qx - u;
                    py = qy - v;
                }
                texture.sample(px + ox, py + oy)
            })
        })
        .collect();
    FrameSequence::new(frames, ds.fps, ds.displacements.reference_index())
}

/// Paths written by [`write_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetFiles {
    pub flow_dir: PathBuf,
    pub force_csv: PathBuf,
    pub config: PathBuf,
    pub frames_dir: Option<PathBuf>,
}

/// Persist fields (`flow/frame_NNNN.flo`), `force.csv`, `config.toml` and,
/// when given, rendered frames (`frames/frame_NNNN.png`).
pub fn write_dataset(ds: &SynthDataset, dir: impl AsRef<Path>, frames: Option<&FrameSequence>) -> Result<DatasetFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let flow_dir = dir.join("flow");
    ds.displacements.save_dir(&flow_dir)?;
    let force_csv = dir.join("force.csv");
    ds.force.write_csv(&force_csv)?;
    let config = dir.join("config.toml");
    std::fs::write(&config, ds.config.to_toml_string()).map_err(|e| Error::io(&config, e))?;
    let frames_dir = match frames {
        Some(seq) => {
            let fd = dir.join("frames");
            std::fs::create_dir_all(&fd).map_err(|e| Error::io(&fd, e))?;
            for (t, frame) in seq.frames().iter().enumerate() {
                frame.save_png(fd.join(format!("frame_{t:04}.png")))?;
            }
            Some(fd)
        }
        None => None,
    };
    Ok(DatasetFiles {
        flow_dir,
        force_csv,
        config,
        frames_dir,
    })
}
