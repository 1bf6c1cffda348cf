//! Unitary discrete Fourier transforms.
//!
//! `dft(x)[f] = n^{-1/2} Σ_j x[j] e^{-2πi fj/n}` and `idft` is its inverse, so
//! both preserve the Euclidean norm. Lengths with only small prime factors use
//! a recursive mixed-radix decimation-in-time kernel; lengths with a prime
//! factor above [`MAX_DIRECT_RADIX`] go through Bluestein's chirp-z algorithm.
//!
//! 2-D transforms act on column-major `n_v x n_h` grids: first every column,
//! then every row.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64 as C64;

/// Largest prime radix handled by the direct butterfly.
pub const MAX_DIRECT_RADIX: usize = 64;

#[derive(Debug, Clone)]
enum Kernel {
    Trivial,
    MixedRadix { factors: Vec<usize>, twiddles: Vec<C64> },
    Bluestein(Bluestein),
}

/// A planned 1-D transform of fixed length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    scale: f64,
    kernel: Kernel,
}

#[derive(Debug, Clone)]
struct Bluestein {
    chirp: Vec<C64>,
    kernel_hat: Vec<C64>,
    inner: alloc::boxed::Box<Fft>,
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while n % 4 == 0 {
        out.push(4);
        n /= 4;
    }
    while n % 2 == 0 {
        out.push(2);
        n /= 2;
    }
    let mut p = 3;
    while p * p <= n {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 2;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn unit_root(num: usize, den: usize) -> C64 {
    let theta = -2.0 * PI * (num as f64) / (den as f64);
    C64::new(libm::cos(theta), libm::sin(theta))
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "transform length must be positive");
        let scale = 1.0 / libm::sqrt(n as f64);
        if n == 1 {
            return Self { n, scale, kernel: Kernel::Trivial };
        }
        let factors = factorize(n);
        let kernel = if factors.iter().any(|&p| p > MAX_DIRECT_RADIX) {
            Kernel::Bluestein(Bluestein::new(n))
        } else {
            let twiddles = (0..n).map(|j| unit_root(j, n)).collect();
            Kernel::MixedRadix { factors, twiddles }
        };
        Self { n, scale, kernel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalised forward (`e^{-2πi..}`) or backward transform, in place.
    pub fn process_raw(&self, data: &mut [C64], inverse: bool) {
        assert_eq!(data.len(), self.n);
        match &self.kernel {
            Kernel::Trivial => {}
            Kernel::MixedRadix { factors, twiddles } => {
                let input = data.to_vec();
                let mut scratch = vec![C64::new(0.0, 0.0); factors.iter().copied().max().unwrap_or(1)];
                mixed_radix(&input, 1, data, factors, twiddles, self.n, inverse, &mut scratch);
            }
            Kernel::Bluestein(b) => {
                if inverse {
                    for z in data.iter_mut() {
                        *z = z.conj();
                    }
                    b.forward(data);
                    for z in data.iter_mut() {
                        *z = z.conj();
                    }
                } else {
                    b.forward(data);
                }
            }
        }
    }

    pub fn forward_in_place(&self, data: &mut [C64]) {
        self.process_raw(data, false);
        scale_all(data, self.scale);
    }

    pub fn inverse_in_place(&self, data: &mut [C64]) {
        self.process_raw(data, true);
        scale_all(data, self.scale);
    }

    pub fn forward(&self, x: &[C64]) -> Vec<C64> {
        let mut v = x.to_vec();
        self.forward_in_place(&mut v);
        v
    }

    pub fn inverse(&self, x: &[C64]) -> Vec<C64> {
        let mut v = x.to_vec();
        self.inverse_in_place(&mut v);
        v
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<C64> {
        let mut v: Vec<C64> = x.iter().map(|&r| C64::new(r, 0.0)).collect();
        self.forward_in_place(&mut v);
        v
    }
}

fn scale_all(data: &mut [C64], s: f64) {
    for z in data.iter_mut() {
        *z *= s;
    }
}

#[allow(clippy::too_many_arguments)]
fn mixed_radix(
    input: &[C64],
    stride: usize,
    out: &mut [C64],
    factors: &[usize],
    twiddles: &[C64],
    big_n: usize,
    inverse: bool,
    scratch: &mut [C64],
) {
    let n = out.len();
    if n == 1 {
        out[0] = input[0];
        return;
    }
    let p = factors[0];
    let m = n / p;
    for r in 0..p {
        mixed_radix(
            &input[r * stride..],
            stride * p,
            &mut out[r * m..(r + 1) * m],
            &factors[1..],
            twiddles,
            big_n,
            inverse,
            scratch,
        );
    }
    let tw = |j: usize| {
        let w = twiddles[j % big_n];
        if inverse {
            w.conj()
        } else {
            w
        }
    };
    let step = big_n / n;
    let pstep = big_n / p;
    match p {
        2 => {
            for k in 0..m {
                let a = out[k];
                let b = out[k + m] * tw(k * step);
                out[k] = a + b;
                out[k + m] = a - b;
            }
        }
        4 => {
            for k in 0..m {
                let a0 = out[k];
                let a1 = out[k + m] * tw(k * step);
                let a2 = out[k + 2 * m] * tw(2 * k * step);
                let a3 = out[k + 3 * m] * tw(3 * k * step);
                let s02 = a0 + a2;
                let d02 = a0 - a2;
                let s13 = a1 + a3;
                let d13 = a1 - a3;
                // multiply by -i (forward) or +i (inverse)
                let rot = if inverse {
                    C64::new(-d13.im, d13.re)
                } else {
                    C64::new(d13.im, -d13.re)
                };
                out[k] = s02 + s13;
                out[k + m] = d02 + rot;
                out[k + 2 * m] = s02 - s13;
                out[k + 3 * m] = d02 - rot;
            }
        }
        _ => {
            let buf = &mut scratch[..p];
            for k in 0..m {
                for (r, slot) in buf.iter_mut().enumerate() {
                    *slot = out[k + r * m] * tw(r * k * step);
                }
                for q in 0..p {
                    let mut acc = C64::new(0.0, 0.0);
                    for (r, &y) in buf.iter().enumerate() {
                        acc += y * tw(((r * q) % p) * pstep);
                    }
                    out[k + q * m] = acc;
                }
            }
        }
    }
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let two_n = 2 * n;
        let chirp: Vec<C64> = (0..n)
            .map(|k| {
                let k2 = (k * k) % two_n;
                let theta = -PI * (k2 as f64) / (n as f64);
                C64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        let mut b = vec![C64::new(0.0, 0.0); m];
        b[0] = chirp[0].conj();
        for k in 1..n {
            b[k] = chirp[k].conj();
            b[m - k] = chirp[k].conj();
        }
        let inner = Fft::new(m);
        inner.process_raw(&mut b, false);
        Self { chirp, kernel_hat: b, inner: alloc::boxed::Box::new(inner) }
    }

    fn forward(&self, data: &mut [C64]) {
        let n = data.len();
        let m = self.kernel_hat.len();
        let mut a = vec![C64::new(0.0, 0.0); m];
        for k in 0..n {
            a[k] = data[k] * self.chirp[k];
        }
        self.inner.process_raw(&mut a, false);
        for (x, &b) in a.iter_mut().zip(&self.kernel_hat) {
            *x *= b;
        }
        self.inner.process_raw(&mut a, true);
        let inv_m = 1.0 / m as f64;
        for k in 0..n {
            data[k] = a[k] * self.chirp[k] * inv_m;
        }
    }
}

/// Planned unitary 2-D transform on a column-major `n_v x n_h` grid.
#[derive(Debug, Clone)]
pub struct Fft2 {
    n_v: usize,
    n_h: usize,
    col: Fft,
    row: Fft,
}

impl Fft2 {
    pub fn new(n_v: usize, n_h: usize) -> Self {
        Self { n_v, n_h, col: Fft::new(n_v), row: Fft::new(n_h) }
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn len(&self) -> usize {
        self.n_v * self.n_h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Plan for a single column (length `n_v`).
    pub fn col_plan(&self) -> &Fft {
        &self.col
    }

    /// Plan for a single row (length `n_h`).
    pub fn row_plan(&self) -> &Fft {
        &self.row
    }

    pub fn cols_in_place(&self, grid: &mut [C64], inverse: bool) {
        assert_eq!(grid.len(), self.len());
        for col in grid.chunks_mut(self.n_v) {
            if inverse {
                self.col.inverse_in_place(col);
            } else {
                self.col.forward_in_place(col);
            }
        }
    }

    pub fn rows_in_place(&self, grid: &mut [C64], inverse: bool) {
        assert_eq!(grid.len(), self.len());
        if self.n_h == 1 {
            return;
        }
        let mut buf = vec![C64::new(0.0, 0.0); self.n_h];
        for i in 0..self.n_v {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = grid[i + self.n_v * j];
            }
            if inverse {
                self.row.inverse_in_place(&mut buf);
            } else {
                self.row.forward_in_place(&mut buf);
            }
            for (j, b) in buf.iter().enumerate() {
                grid[i + self.n_v * j] = *b;
            }
        }
    }

    pub fn forward_in_place(&self, grid: &mut [C64]) {
        self.cols_in_place(grid, false);
        self.rows_in_place(grid, false);
    }

    pub fn inverse_in_place(&self, grid: &mut [C64]) {
        self.cols_in_place(grid, true);
        self.rows_in_place(grid, true);
    }

    pub fn forward(&self, grid: &[C64]) -> Vec<C64> {
        let mut v = grid.to_vec();
        self.forward_in_place(&mut v);
        v
    }

    pub fn inverse(&self, grid: &[C64]) -> Vec<C64> {
        let mut v = grid.to_vec();
        self.inverse_in_place(&mut v);
        v
    }

    pub fn forward_real(&self, grid: &[f64]) -> Vec<C64> {
        let mut v = to_complex(grid);
        self.forward_in_place(&mut v);
        v
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, grid: &[C64]) -> Vec<f64> {
        let v = self.inverse(grid);
        v.into_iter().map(|z| z.re).collect()
    }
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&r| C64::new(r, 0.0)).collect()
}

pub fn real_part(x: &[C64]) -> Vec<f64> {
    x.iter().map(|z| z.re).collect()
}

pub fn dft(x: &[C64]) -> Vec<C64> {
    Fft::new(x.len()).forward(x)
}

pub fn idft(x: &[C64]) -> Vec<C64> {
    Fft::new(x.len()).inverse(x)
}

pub fn dft2(grid: &[C64], n_v: usize, n_h: usize) -> Vec<C64> {
    Fft2::new(n_v, n_h).forward(grid)
}

pub fn idft2(grid: &[C64], n_v: usize, n_h: usize) -> Vec<C64> {
    Fft2::new(n_v, n_h).inverse(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(x: &[C64], sign: f64) -> Vec<C64> {
        let n = x.len();
        let s = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|f| {
                let mut acc = C64::new(0.0, 0.0);
                for (j, &v) in x.iter().enumerate() {
                    let th = sign * 2.0 * PI * ((f * j) % n) as f64 / n as f64;
                    acc += v * C64::new(th.cos(), th.sin());
                }
                acc * s
            })
            .collect()
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    fn max_err(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zeros_map_to_zeros() {
        let x = vec![C64::new(0.0, 0.0); 8];
        assert!(dft(&x).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = vec![C64::new(0.0, 0.0); 4];
        x[0] = C64::new(1.0, 0.0);
        for z in dft(&x) {
            assert!((z - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_naive_for_many_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in (1..=40).chain([48, 60, 64, 67, 97, 100, 128, 134, 210, 240, 480]) {
            let x = random_vec(n, &mut rng);
            assert!(max_err(&dft(&x), &naive(&x, -1.0)) < 1e-12, "forward n={n}");
            assert!(max_err(&idft(&x), &naive(&x, 1.0)) < 1e-12, "inverse n={n}");
        }
    }

    #[test]
    fn round_trip_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [5, 12, 89, 256, 331] {
            let x = random_vec(n, &mut rng);
            let y = dft(&x);
            assert!(max_err(&idft(&y), &x) < 1e-12);
            let nx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let ny: f64 = y.iter().map(|z| z.norm_sqr()).sum();
            assert!((nx - ny).abs() < 1e-12 * nx.max(1.0));
        }
    }

    #[test]
    fn dft2_is_kronecker_of_1d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (nv, nh) = (6, 5);
        let x = random_vec(nv * nh, &mut rng);
        let y = dft2(&x, nv, nh);
        // (F_h ⊗ F_v) vec(X)
        let fv: Vec<Vec<C64>> = (0..nv)
            .map(|i| {
                let mut e = vec![C64::new(0.0, 0.0); nv];
                e[i] = C64::new(1.0, 0.0);
                naive(&e, -1.0)
            })
            .collect();
        let fh: Vec<Vec<C64>> = (0..nh)
            .map(|i| {
                let mut e = vec![C64::new(0.0, 0.0); nh];
                e[i] = C64::new(1.0, 0.0);
                naive(&e, -1.0)
            })
            .collect();
        for f in 0..nv {
            for g in 0..nh {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..nv {
                    for j in 0..nh {
                        acc += fv[i][f] * fh[j][g] * x[i + nv * j];
                    }
                }
                assert!((acc - y[f + nv * g]).norm() < 1e-12);
            }
        }
        assert!(max_err(&idft2(&y, nv, nh), &x) < 1e-12);
    }

    #[test]
    fn parseval_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 36;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let plan = Fft2::new(9, 4);
        let xh = plan.forward_real(&x);
        let yh = plan.forward_real(&y);
        let lhs: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = xh.iter().zip(&yh).map(|(a, b)| (a.conj() * b).re).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
