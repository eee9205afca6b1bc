//! Shared fixtures for the integration and acceptance tests.
#![allow(dead_code)]

use cpwc::datapath::RfDataset;
use cpwc::display::Region;
use cpwc::geometry::{GridSpec, PlaneWaveSequence, ProbeGeometry, DEFAULT_SPEED_OF_SOUND};
use cpwc::simulator::{make_speckle_phantom, min_speckle_density, simulate_rf, Phantom, Pulse, SimulationConfig};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const C: f64 = DEFAULT_SPEED_OF_SOUND;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// I.i.d. complex Gaussian entries.
pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((m, n), |_| Complex64::new(normal(rng), normal(rng)))
}

/// Rank-one coherent part plus complex noise of random relative strength,
/// so that coherence values spread over the whole `[0, 1]` range.
pub fn mixed_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<Complex64> {
    let u: Vec<Complex64> = (0..m).map(|_| Complex64::new(normal(rng), normal(rng))).collect();
    let v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(1.0 + 0.1 * normal(rng), 0.1 * normal(rng)))
        .collect();
    let noise: f64 = rng.random::<f64>().powi(3) * 3.0;
    Array2::from_shape_fn((m, n), |(i, j)| {
        u[i] * v[j] + Complex64::new(normal(rng), normal(rng)) * noise
    })
}

pub struct Scenario {
    pub data: RfDataset,
    pub grid: GridSpec,
    pub pulse: Pulse,
}

/// Simulates `phantom` with a record that just covers it.
pub fn simulate(phantom: &Phantom, probe: ProbeGeometry, seq: PlaneWaveSequence, pulse: Pulse) -> RfDataset {
    let fs = 4.0 * pulse.center_frequency;
    let cfg = SimulationConfig::covering(phantom, &probe, &seq, &pulse, fs, C, 2e-6).unwrap();
    simulate_rf(phantom, &probe, &seq, &pulse, &cfg).unwrap()
}

/// `n` pixels spaced `step` apart with `centre` exactly on pixel `n / 2`.
pub fn centred_axis(centre: f64, step: f64, n: usize) -> (f64, f64) {
    let half = (n / 2) as f64;
    (centre - half * step, centre + (n as f64 - 1.0 - half) * step)
}

pub fn centred_grid(x: f64, z: f64, step: f64, n: usize) -> GridSpec {
    let (x0, x1) = centred_axis(x, step, n);
    let (z0, z1) = centred_axis(z, step, n);
    GridSpec {
        x0,
        x1,
        nx: n,
        z0,
        z1,
        nz: n,
    }
}

/// Point scatterer at 30 mm under a 192-element, 0.23 mm pitch, 5.2 MHz
/// array insonified by 75 plane waves over ±24°.
pub fn point_target_scenario(grid_n: usize) -> Scenario {
    let pulse = Pulse::new(5.2e6, 0.6).unwrap();
    let probe = ProbeGeometry::linear(192, 0.23e-3, pulse.center_frequency).unwrap();
    let seq = PlaneWaveSequence::uniform_degrees(75, -24.0, 24.0).unwrap();
    let phantom = Phantom::point(0.0, 0.03, 1.0).unwrap();
    Scenario {
        data: simulate(&phantom, probe, seq, pulse),
        grid: centred_grid(0.0, 0.03, 2e-3 / grid_n as f64, grid_n),
        pulse,
    }
}

pub struct SpeckleScenario {
    pub scenario: Scenario,
    pub speckle_region: Region,
    /// Speckle-only part of the image, away from the point target.
    pub background: Region,
    pub peak_window: Region,
}

/// Point at (0, 25 mm) embedded in fully developed speckle filling an
/// 8 x 8 mm block, 128 elements, 15 plane waves over ±12°.
pub fn speckle_scenario(seed: u64, grid_n: usize) -> SpeckleScenario {
    let pulse = Pulse::new(5e6, 0.6).unwrap();
    let probe = ProbeGeometry::linear(128, 0.3e-3, pulse.center_frequency).unwrap();
    let seq = PlaneWaveSequence::uniform_degrees(15, -12.0, 12.0).unwrap();
    let region = Region::new(-4e-3, 4e-3, 21e-3, 29e-3);
    let density = 1.5 * min_speckle_density(&pulse, C);
    let speckle = make_speckle_phantom(&region, density, seed).unwrap();
    let point = Phantom::point(0.0, 0.025, 20.0).unwrap();
    let phantom = speckle.union(&point);
    SpeckleScenario {
        scenario: Scenario {
            data: simulate(&phantom, probe, seq, pulse),
            grid: GridSpec {
                x0: -3e-3,
                x1: 3e-3,
                nx: grid_n,
                z0: 22e-3,
                z1: 28e-3,
                nz: grid_n,
            },
            pulse,
        },
        speckle_region: region,
        background: Region::new(-3e-3, -1e-3, 22e-3, 28e-3),
        peak_window: Region::new(-1e-3, 1e-3, 24e-3, 26e-3),
    }
}

/// Small speckle-plus-point scene for fast end-to-end runs: 32 elements,
/// 7 plane waves, 4 x 4 mm of speckle.
pub fn small_speckle_scenario(seed: u64, grid_n: usize) -> SpeckleScenario {
    let pulse = Pulse::default();
    let probe = ProbeGeometry::linear(32, 0.3e-3, pulse.center_frequency).unwrap();
    let seq = PlaneWaveSequence::uniform_degrees(7, -8.0, 8.0).unwrap();
    let region = Region::new(-2e-3, 2e-3, 23e-3, 27e-3);
    let density = 1.5 * min_speckle_density(&pulse, C);
    let phantom = make_speckle_phantom(&region, density, seed)
        .unwrap()
        .union(&Phantom::point(0.0, 0.025, 20.0).unwrap());
    SpeckleScenario {
        scenario: Scenario {
            data: simulate(&phantom, probe, seq, pulse),
            grid: GridSpec {
                x0: -1.5e-3,
                x1: 1.5e-3,
                nx: grid_n,
                z0: 23.5e-3,
                z1: 26.5e-3,
                nz: grid_n,
            },
            pulse,
        },
        speckle_region: region,
        background: Region::new(-1.5e-3, -0.7e-3, 23.5e-3, 26.5e-3),
        peak_window: Region::new(-0.5e-3, 0.5e-3, 24.5e-3, 25.5e-3),
    }
}
