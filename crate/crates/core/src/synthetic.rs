//! Seeded synthetic batch-dryer data in the CSV input formats.
//!
//! Each batch runs three phases (deagglomeration, heating, cooling) and
//! records ten tags. A batch is driven by three latent variables: the
//! initial moisture `m`, a heating-intensity factor `a` and a shape factor
//! `c`, all standard normal. Moisture lengthens heating, slows the level
//! drop and raises the residual solvent (the quality target `solvent`),
//! which therefore depends on `m` and `a`. The level falls monotonically from
//! 100 to 55 in every batch, so it can serve as an indicator variable.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ingest::{load_from_readers, BatchDataset, IngestError, LoadOptions};
use crate::scalar::Real;

pub const PHASES: [&str; 3] = ["deagglomeration", "heating", "cooling"];

pub const TAGS: [&str; 10] = [
    "agitator_speed",
    "condensate_flow",
    "jacket_temperature",
    "level",
    "outlet_humidity",
    "pressure",
    "pump_power",
    "solvent_vapor",
    "temperature",
    "torque",
];

/// Gaussian bump added to the product temperature of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureBump {
    pub batch: usize,
    /// Position in phase units: phase index plus fraction within the phase.
    pub center: f64,
    /// Standard deviation of the bump in phase units.
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DryerConfig {
    pub n_batches: usize,
    pub seed: u64,
    /// Seconds between samples.
    pub sample_interval: f64,
    /// Multiplier on every tag's measurement noise.
    pub noise: f64,
    /// `(batch, factor)`: every phase of that batch lasts `factor` times longer.
    pub stretch: Vec<(usize, f64)>,
    pub bump: Option<TemperatureBump>,
    /// `(batch, latents)`: overrides the drawn `(m, a, c)` of a batch.
    pub latents: Vec<(usize, [f64; 3])>,
}

impl Default for DryerConfig {
    fn default() -> Self {
        Self {
            n_batches: 30,
            seed: 0,
            sample_interval: 30.0,
            noise: 1.0,
            stretch: Vec::new(),
            bump: None,
            latents: Vec::new(),
        }
    }
}

/// The four input CSVs as text.
#[derive(Debug, Clone, PartialEq)]
pub struct DryerFixture {
    pub trajectories: String,
    pub events: String,
    pub initial: String,
    pub quality: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixturePaths {
    pub trajectories: PathBuf,
    pub events: PathBuf,
    pub initial: PathBuf,
    pub quality: PathBuf,
}

struct Batch {
    m: f64,
    a: f64,
    c: f64,
    durations: [f64; 3],
}

impl Batch {
    /// Noise-free tag values at phase `p`, fraction `f` in `[0, 1]`.
    fn tags(&self, p: usize, f: f64) -> [f64; 10] {
        let (m, a, c) = (self.m, self.a, self.c);
        let heat_top = 35.0 + 2.0 * a;
        let heat_end = 25.0 + heat_top * (1.0 - (-4.0f64).exp());
        let temperature = match p {
            0 => 20.0 + 5.0 * f,
            1 => 25.0 + heat_top * (1.0 - (-4.0 * f).exp()) + 1.5 * c * (std::f64::consts::PI * f).sin(),
            _ => heat_end - (heat_end - 22.0) * (1.0 - (-5.0 * f).exp()),
        };
        let jacket = match p {
            0 => 25.0,
            1 => 25.0 + (50.0 + 1.5 * a) * (1.0 - (-8.0 * f).exp()),
            _ => {
                let top = 25.0 + (50.0 + 1.5 * a) * (1.0 - (-8.0f64).exp());
                top - (top - 15.0) * (1.0 - (-8.0 * f).exp())
            }
        };
        // Every batch dries down to the same level; moisture changes how fast.
        let l1 = 90.0 - m;
        let level = match p {
            0 => 100.0 - (10.0 + m) * f,
            1 => l1 - (l1 - 55.0) * f.powf(0.8 * (0.15 * m).exp()),
            _ => 55.0,
        };
        let pressure = match p {
            0 => 1000.0 - 800.0 * f,
            1 => 200.0 - (150.0 + 5.0 * c) * (1.0 - (-3.0 * f).exp()) / (1.0 - (-3.0f64).exp()),
            _ => (50.0 - 5.0 * c) + (950.0 + 5.0 * c) * f,
        };
        let speed = [60.0, 20.0, 10.0][p.min(2)];
        let torque = speed * level / 100.0 * (1.0 + 0.05 * m);
        let condensate = if p == 1 { (3.0 + 0.5 * m) * (std::f64::consts::PI * f).sin().powi(2) } else { 0.0 };
        let vapor = 0.8 * condensate + if p == 1 { 0.2 * (1.0 - f) } else { 0.0 };
        let power = 5.0 + 1000.0 / pressure.max(20.0);
        let humidity = 10.0 + 8.0 * condensate / (3.0 + 0.5 * m).max(0.5) + 0.5 * m;
        [speed, condensate, jacket, level, humidity, pressure, power, vapor, temperature, torque]
    }
}

const NOISE_SD: [f64; 10] = [0.2, 0.02, 0.1, 0.1, 0.05, 1.0, 0.05, 0.02, 0.02, 0.05];

impl DryerFixture {
    pub fn generate(config: &DryerConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut z = || -> f64 { rng.sample(StandardNormal) };
        let batches: Vec<Batch> = (0..config.n_batches)
            .map(|b| {
                let (m, a, c) = (z(), z(), z());
                let (n1, n2, n3) = (z(), z(), z());
                let [m, a, c] = config.latents.iter().find(|(k, _)| *k == b).map_or([m, a, c], |(_, l)| *l);
                let factor = config.stretch.iter().find(|(k, _)| *k == b).map_or(1.0, |(_, f)| *f);
                Batch {
                    m,
                    a,
                    c,
                    durations: [
                        1200.0 * (1.0 + 0.08 * n1) * factor,
                        5400.0 * (1.0 + 0.08 * n2 + 0.05 * m) * factor,
                        2400.0 * (1.0 + 0.08 * n3) * factor,
                    ],
                }
            })
            .collect();
        let mut trajectories = String::from("batch_id,timestamp,tag,value\n");
        let mut events = String::from("batch_id,phase,order,start,end\n");
        let mut initial = String::from("batch_id,name,value\n");
        let mut quality = String::from("batch_id,name,value\n");
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        noise_rng.set_stream(1);
        for (b, batch) in batches.iter().enumerate() {
            let id = format!("B{:03}", b + 1);
            let t0 = 1_700_000_000.0 + 100_000.0 * b as f64;
            let bounds = [0.0, batch.durations[0], batch.durations[0] + batch.durations[1], batch.durations.iter().sum()];
            for p in 0..3 {
                let _ = writeln!(events, "{id},{},{p},{},{}", PHASES[p], t0 + bounds[p], t0 + bounds[p + 1]);
            }
            let total = bounds[3];
            let mut times: Vec<f64> = (0..).map(|k| k as f64 * config.sample_interval).take_while(|&t| t < total).collect();
            times.push(total);
            for &t in &times {
                let p = (0..3).rev().find(|&p| t >= bounds[p]).unwrap_or(0).min(2);
                let f = ((t - bounds[p]) / batch.durations[p]).clamp(0.0, 1.0);
                let mut values = batch.tags(p, f);
                if let Some(bump) = config.bump.filter(|bump| bump.batch == b) {
                    let u = p as f64 + f;
                    values[8] += bump.height * (-0.5 * ((u - bump.center) / bump.width).powi(2)).exp();
                }
                for (k, tag) in TAGS.iter().enumerate() {
                    let e: f64 = noise_rng.sample(StandardNormal);
                    let _ = writeln!(trajectories, "{id},{},{tag},{}", t0 + t, values[k] + config.noise * NOISE_SD[k] * e);
                }
            }
            let _ = writeln!(initial, "{id},initial_moisture,{}", 10.0 + 2.0 * batch.m);
            let _ = writeln!(initial, "{id},charge_mass,{}", 500.0 + 20.0 * batch.c);
            let e: f64 = noise_rng.sample(StandardNormal);
            let _ = writeln!(quality, "{id},solvent,{}", 0.5 + 0.3 * batch.m - 0.2 * batch.a + 0.05 * e);
        }
        Self { trajectories, events, initial, quality }
    }

    pub fn load<T: Real>(&self) -> Result<BatchDataset<T>, IngestError> {
        load_from_readers(
            self.trajectories.as_bytes(),
            self.events.as_bytes(),
            Some(self.initial.as_bytes()),
            Some(self.quality.as_bytes()),
            &LoadOptions::default(),
        )
    }

    /// Writes `trajectories.csv`, `events.csv`, `initial.csv` and `quality.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<FixturePaths> {
        std::fs::create_dir_all(dir)?;
        let paths = FixturePaths {
            trajectories: dir.join("trajectories.csv"),
            events: dir.join("events.csv"),
            initial: dir.join("initial.csv"),
            quality: dir.join("quality.csv"),
        };
        std::fs::write(&paths.trajectories, &self.trajectories)?;
        std::fs::write(&paths.events, &self.events)?;
        std::fs::write(&paths.initial, &self.initial)?;
        std::fs::write(&paths.quality, &self.quality)?;
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_with_ten_tags_and_three_phases() {
        let f = DryerFixture::generate(&DryerConfig { n_batches: 4, ..Default::default() });
        let ds = f.load::<f64>().unwrap();
        assert_eq!(ds.n_batches(), 4);
        assert_eq!(ds.tags.len(), 10);
        for b in &ds.batches {
            assert_eq!(b.phase_names(), PHASES);
            assert!(b.series.values().all(|s| s.times[0] == 0.0));
        }
        assert_eq!(ds.y_column("solvent").iter().flatten().count(), 4);
        assert_eq!(f, DryerFixture::generate(&DryerConfig { n_batches: 4, ..Default::default() }));
    }

    #[test]
    fn stretch_scales_durations() {
        let base = DryerFixture::generate(&DryerConfig { n_batches: 3, ..Default::default() }).load::<f64>().unwrap();
        let cfg = DryerConfig { n_batches: 3, stretch: vec![(1, 1.5)], ..Default::default() };
        let s = DryerFixture::generate(&cfg).load::<f64>().unwrap();
        let d = |ds: &BatchDataset<f64>, b: usize| ds.batches[b].duration();
        assert!((d(&s, 1) / d(&base, 1) - 1.5).abs() < 1e-9);
        assert_eq!(d(&s, 0), d(&base, 0));
    }
}
