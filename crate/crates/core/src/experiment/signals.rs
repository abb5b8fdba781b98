//! Load, input and switching-function generation.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{NoiseConfig, ScenarioConfig};
use crate::runtime::Signals;

/// Name recorded in trace headers for the noise generator.
pub const PRNG_NAME: &str = "chacha8";

fn sinusoid(len: usize, cycles: f64) -> impl Iterator<Item = f64> {
    (0..len).map(move |n| (2.0 * PI * cycles * n as f64 / len as f64).sin())
}

/// `s[n] = ½(1 + sin(2π·periods·n/length))`, plus Gaussian noise.
pub fn gen_load(cfg: &ScenarioConfig, noise: Option<&NoiseConfig>) -> Vec<f64> {
    let mut load: Vec<f64> = sinusoid(cfg.length, cfg.load.periods).map(|x| 0.5 * (1.0 + x)).collect();
    if let Some(noise) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let dist = Normal::new(noise.mean, noise.stddev).expect("stddev validated non-negative");
        load.iter_mut().for_each(|s| *s += dist.sample(&mut rng));
    }
    load
}

pub fn gen_input(cfg: &ScenarioConfig) -> Vec<f64> {
    sinusoid(cfg.length, cfg.input.cycles).map(|x| cfg.input.amplitude * x).collect()
}

/// `g = threshold − s`: positive selects the high-order filter.
pub fn switching_function(threshold: f64, load: &[f64]) -> Vec<f64> {
    load.iter().map(|s| threshold - s).collect()
}

pub fn build_signals(cfg: &ScenarioConfig, noise: Option<&NoiseConfig>) -> Signals {
    let load = gen_load(cfg, noise);
    Signals { u: gen_input(cfg), g: switching_function(cfg.threshold, &load), load }
}
