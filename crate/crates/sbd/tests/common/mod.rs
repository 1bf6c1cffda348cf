#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbd_core::linalg::Matrix;
use sbd_core::model::{CorrelationSpec, HyperParams, ImageMask, LatticeSpec, ModelState, SbdModel};

/// Blur correlation that stays positive definite on very short lattices.
pub fn short_lattice_hyper() -> HyperParams {
    HyperParams { blur: CorrelationSpec { phi: 1.5, p: 1.0 }, ..HyperParams::default() }
}

/// Exact-pixel masks with `m ∈ {0, 2, 4}` pixels inside an observed window.
pub fn mask_for(m: usize, n_vo: usize, n_ho: usize) -> ImageMask {
    let mid = n_vo / 2;
    match m {
        0 => ImageMask::None,
        2 => ImageMask::Pixels(vec![(mid - 1, n_ho / 2), (mid, n_ho / 2)]),
        4 => ImageMask::Product { rows: vec![1, n_vo - 2], cols: vec![0, n_ho - 1] },
        _ => panic!("unsupported mask size {m}"),
    }
}

/// Desk problem with random observations and a random, moderate state.
pub fn desk(lattice: LatticeSpec, hp: HyperParams, seed: u64) -> (SbdModel, ModelState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = lattice.image_selector().len();
    let d: Vec<f64> = (0..lattice.n_obs()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let c_obs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let model = SbdModel::new(lattice, hp, d, c_obs).unwrap();
    let mut s = ModelState::from_prior(&model, &mut rng).unwrap();
    s.sigma_c2 = 0.3 + rng.random::<f64>();
    s.sigma_w2 = 0.5 + rng.random::<f64>();
    s.zeta = 0.1 + 0.5 * rng.random::<f64>();
    let omega: Vec<f64> = (0..model.k()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    s.set_omega(&model, omega);
    s.c = model.image().sample(model.plan2(), s.sigma_c2, &mut rng).unwrap();
    s.d = sbd_core::gibbs::sample_aux_data_fc(&s, &model, &mut rng).unwrap();
    (model, s)
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

/// `max |a − b| / max(max |b|, floor)`.
pub fn rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(floor, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

pub fn rel_diff_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    rel_diff(a.as_slice(), b.as_slice(), 1e-300)
}

pub fn rel_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Two-sided KS statistic against a CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov survival function `P(√n D > t)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * t * t).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// `E|X − Y|` between two sorted one-dimensional samples, `O(n + m)`.
fn mean_abs_between(a: &[f64], b: &[f64]) -> f64 {
    // Σ_i Σ_j |a_i − b_j| via merged prefix sums
    let total_b: f64 = b.iter().sum();
    let mut j = 0;
    let mut prefix = 0.0;
    let mut s = 0.0;
    for &x in a {
        while j < b.len() && b[j] <= x {
            prefix += b[j];
            j += 1;
        }
        let below = j as f64;
        let above = (b.len() - j) as f64;
        s += x * below - prefix + (total_b - prefix) - x * above;
    }
    s / (a.len() as f64 * b.len() as f64)
}

fn mean_abs_within(a: &[f64]) -> f64 {
    let n = a.len() as f64;
    let s: f64 = a.iter().enumerate().map(|(i, &x)| x * (2.0 * i as f64 - n + 1.0)).sum();
    2.0 * s / (n * n)
}

/// One-dimensional energy distance `2E|X−Y| − E|X−X'| − E|Y−Y'|`.
pub fn energy_distance_1d(x: &[f64], y: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    2.0 * mean_abs_between(&a, &b) - mean_abs_within(&a) - mean_abs_within(&b)
}

/// Permutation p-value of the two-sample energy statistic.
pub fn energy_test_1d(x: &[f64], y: &[f64], permutations: usize, seed: u64) -> (f64, f64) {
    let observed = energy_distance_1d(x, y);
    let mut pool: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0;
    for _ in 0..permutations {
        for i in (1..pool.len()).rev() {
            let j = rng.random_range(0..=i);
            pool.swap(i, j);
        }
        if energy_distance_1d(&pool[..x.len()], &pool[x.len()..]) >= observed {
            exceed += 1;
        }
    }
    (observed, (exceed + 1) as f64 / (permutations + 1) as f64)
}

/// Block-permutation p-value of the energy statistic for autocorrelated
/// samples: `x` and `y` are cut into contiguous blocks of `block` draws and
/// whole blocks are exchanged between the groups.
pub fn energy_block_test_1d(x: &[f64], y: &[f64], block: usize, permutations: usize, seed: u64) -> (f64, f64) {
    let observed = energy_distance_1d(x, y);
    let blocks: Vec<&[f64]> = x.chunks(block).chain(y.chunks(block)).collect();
    let nx = x.len().div_ceil(block);
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0;
    let (mut a, mut b) = (Vec::with_capacity(x.len()), Vec::with_capacity(y.len()));
    for _ in 0..permutations {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        a.clear();
        b.clear();
        for (pos, &bi) in order.iter().enumerate() {
            if pos < nx { a.extend_from_slice(blocks[bi]) } else { b.extend_from_slice(blocks[bi]) }
        }
        if energy_distance_1d(&a, &b) >= observed {
            exceed += 1;
        }
    }
    (observed, (exceed + 1) as f64 / (permutations + 1) as f64)
}
