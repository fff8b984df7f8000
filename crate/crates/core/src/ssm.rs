//! Inference-only linear state space layers.
//!
//! A core runs `c_k = A c_{k−1} + B u_k`, `y_k = C c_k + D u_k` on one input
//! feature with `m` output channels. A layer stacks `h` cores, applies GELU
//! and mixes the `h·m` channels back to `h` features position-wise.

use crate::error::{Error, Result};
use crate::kalman::TransitionPair;
use crate::matfun::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SsmCore {
    pub a: Matrix,
    pub b: Vec<f64>,
    /// `m×n` output map.
    pub c: Matrix,
    /// Per-channel feedthrough.
    pub d: Vec<f64>,
}

impl SsmCore {
    pub fn new(a: Matrix, b: Vec<f64>, c: Matrix, d: Vec<f64>) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || b.len() != n || c.cols() != n || c.rows() != d.len() {
            return Err(Error::dim(format!(
                "inconsistent core: A {:?}, B {}, C {:?}, D {}",
                a.shape(),
                b.len(),
                c.shape(),
                d.len()
            )));
        }
        if n == 0 || d.is_empty() {
            return Err(Error::dim("core needs n >= 1 and m >= 1"));
        }
        if !a.is_finite() || !c.is_finite() || b.iter().chain(&d).any(|v| !v.is_finite()) {
            return Err(Error::input("core parameters must be finite"));
        }
        Ok(Self { a, b, c, d })
    }

    /// Core with frozen `(Ā, B̄)` from an initialization bank.
    pub fn from_pair(pair: &TransitionPair, c: Matrix, d: Vec<f64>) -> Result<Self> {
        Self::new(pair.a.clone(), pair.b.clone(), c, d)
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.d.len()
    }
}

/// Runs the recurrence from `c0` and returns the `L×m` outputs and the final
/// state.
pub fn ssm_recurrence(core: &SsmCore, u: &[f64], c0: &[f64]) -> Result<(Matrix, Vec<f64>)> {
    if u.is_empty() {
        return Err(Error::input("input sequence is empty"));
    }
    if c0.len() != core.n() {
        return Err(Error::dim(format!(
            "initial state has length {}, expected {}",
            c0.len(),
            core.n()
        )));
    }
    let m = core.m();
    let mut y = Matrix::zeros(u.len(), m);
    let mut c = c0.to_vec();
    for (k, &uk) in u.iter().enumerate() {
        c = core.a.matvec_unchecked(&c);
        for (ci, bi) in c.iter_mut().zip(&core.b) {
            *ci += bi * uk;
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::at_step(k + 1, Error::numeric("state became non-finite")));
        }
        let out = core.c.matvec_unchecked(&c);
        let row = &mut y.as_mut_slice()[k * m..(k + 1) * m];
        for ((r, o), d) in row.iter_mut().zip(out).zip(&core.d) {
            *r = o + d * uk;
        }
    }
    Ok((y, c))
}

/// Krylov kernel `K_j = C Aʲ B` for `j = 0..len`, as an `len×m` matrix.
/// Built by repeated multiplication in double precision.
pub fn krylov_kernel(core: &SsmCore, len: usize) -> Result<Matrix> {
    if len == 0 {
        return Err(Error::input("kernel length must be at least 1"));
    }
    let m = core.m();
    let mut kernel = Matrix::zeros(len, m);
    let mut v = core.b.clone();
    for j in 0..len {
        if j > 0 {
            v = core.a.matvec_unchecked(&v);
        }
        let row = core.c.matvec_unchecked(&v);
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric(format!("kernel power {j} is non-finite")));
        }
        kernel.as_mut_slice()[j * m..(j + 1) * m].copy_from_slice(&row);
    }
    Ok(kernel)
}

/// Rounds every kernel entry to single precision.
pub fn narrow_kernel(kernel: &Matrix) -> Matrix {
    kernel.map(|x| x as f32 as f64)
}

/// Causal convolution `y_k = Σ_{j<k} K_j u_{k−j} + d u_k` (1-based `k`),
/// matching [`ssm_recurrence`] from a zero state.
pub fn krylov_conv(kernel: &Matrix, u: &[f64], d: &[f64]) -> Result<Matrix> {
    let (len, m) = kernel.shape();
    if u.len() != len {
        return Err(Error::input(format!(
            "kernel length {len} does not match input length {}",
            u.len()
        )));
    }
    if d.len() != m {
        return Err(Error::input(format!(
            "feedthrough has {} channels, kernel has {m}",
            d.len()
        )));
    }
    let ks = kernel.as_slice();
    let mut y = Matrix::zeros(len, m);
    let out = y.as_mut_slice();
    for k in 0..len {
        let row = &mut out[k * m..(k + 1) * m];
        for (r, dv) in row.iter_mut().zip(d) {
            *r = dv * u[k];
        }
        for j in 0..=k {
            let uj = u[k - j];
            for (r, kv) in row.iter_mut().zip(&ks[j * m..(j + 1) * m]) {
                *r += kv * uj;
            }
        }
    }
    Ok(y)
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsslLayer {
    pub cores: Vec<SsmCore>,
    /// `(h·m)×h`; row `i·m + j` belongs to channel `j` of feature `i`.
    pub mix_weights: Matrix,
    pub mix_bias: Vec<f64>,
}

impl LsslLayer {
    pub fn new(cores: Vec<SsmCore>, mix_weights: Matrix, mix_bias: Vec<f64>) -> Result<Self> {
        let h = cores.len();
        if h == 0 {
            return Err(Error::dim("layer needs at least one core"));
        }
        let (n, m) = (cores[0].n(), cores[0].m());
        if cores.iter().any(|c| c.n() != n || c.m() != m) {
            return Err(Error::dim("all cores must share n and m"));
        }
        if mix_weights.shape() != (h * m, h) || mix_bias.len() != h {
            return Err(Error::dim(format!(
                "mixing expects weights ({}, {h}) and bias {h}, got {:?} and {}",
                h * m,
                mix_weights.shape(),
                mix_bias.len()
            )));
        }
        Ok(Self {
            cores,
            mix_weights,
            mix_bias,
        })
    }

    pub fn h(&self) -> usize {
        self.cores.len()
    }

    pub fn n(&self) -> usize {
        self.cores[0].n()
    }

    pub fn m(&self) -> usize {
        self.cores[0].m()
    }
}

/// How a layer evaluates its cores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoreEval {
    #[default]
    Recurrence,
    /// Krylov convolution, optionally with the kernel narrowed to `f32`.
    Convolution { narrow: bool },
}

/// Forward pass on an `L×h` input, returning `L×h`.
pub fn layer_forward(layer: &LsslLayer, u: &Matrix) -> Result<Matrix> {
    layer_forward_with(layer, u, CoreEval::Recurrence)
}

pub fn layer_forward_with(layer: &LsslLayer, u: &Matrix, eval: CoreEval) -> Result<Matrix> {
    let (len, h) = u.shape();
    if h != layer.h() {
        return Err(Error::input(format!(
            "input has {h} features, layer expects {}",
            layer.h()
        )));
    }
    let m = layer.m();
    let mut act = Matrix::zeros(len, h * m);
    for (i, core) in layer.cores.iter().enumerate() {
        let feature = u.col_vec(i);
        let y = match eval {
            CoreEval::Recurrence => ssm_recurrence(core, &feature, &vec![0.0; core.n()])?.0,
            CoreEval::Convolution { narrow } => {
                let mut kernel = krylov_kernel(core, len)?;
                if narrow {
                    kernel = narrow_kernel(&kernel);
                }
                krylov_conv(&kernel, &feature, &core.d)?
            }
        };
        let a = act.as_mut_slice();
        for k in 0..len {
            for j in 0..m {
                a[k * h * m + i * m + j] = gelu(y[(k, j)]);
            }
        }
    }
    let mut out = act.matmul(&layer.mix_weights)?;
    let o = out.as_mut_slice();
    for k in 0..len {
        for (v, b) in o[k * h..(k + 1) * h].iter_mut().zip(&layer.mix_bias) {
            *v += b;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_core(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SsmCore {
        // Spectral radius kept below one so kernels stay bounded.
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).scale(0.9 / n as f64);
        let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = Matrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let d = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        SsmCore::new(a, b, c, d).unwrap()
    }

    fn random_seq(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn feedthrough_and_integrator() {
        let u = [1.0, -2.0, 0.5, 4.0];
        let pass = SsmCore::new(Matrix::zeros(2, 2), vec![0.0; 2], Matrix::zeros(1, 2), vec![1.0]).unwrap();
        let (y, _) = ssm_recurrence(&pass, &u, &[0.0, 0.0]).unwrap();
        assert_eq!(y.as_slice(), &u);

        let integ = SsmCore::new(
            Matrix::identity(3),
            vec![1.0, 0.0, 0.0],
            Matrix::from_rows(&[&[1.0, 0.0, 0.0]]),
            vec![0.0],
        )
        .unwrap();
        let (y, c) = ssm_recurrence(&integ, &u, &[0.0; 3]).unwrap();
        assert_eq!(y.as_slice(), &[1.0, -1.0, -0.5, 3.5]);
        assert_eq!(c, vec![3.5, 0.0, 0.0]);
    }

    #[test]
    fn recurrence_errors() {
        let core = SsmCore::new(Matrix::identity(1).scale(1e200), vec![1e200], Matrix::identity(1), vec![0.0]).unwrap();
        let err = ssm_recurrence(&core, &[1.0, 1.0, 1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::AtStep { step: 2, .. }));
        assert!(ssm_recurrence(&core, &[], &[0.0]).is_err());
        assert!(ssm_recurrence(&core, &[1.0], &[0.0, 0.0]).is_err());
        assert!(SsmCore::new(Matrix::identity(2), vec![1.0], Matrix::zeros(1, 2), vec![0.0]).is_err());
        assert!(SsmCore::new(Matrix::identity(1), vec![f64::NAN], Matrix::zeros(1, 1), vec![0.0]).is_err());
    }

    #[test]
    fn kernel_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let core = random_core(&mut rng, 5, 2);
        let k = krylov_kernel(&core, 4).unwrap();
        let cb = core.c.matvec(&core.b).unwrap();
        assert_eq!(k.row_slice(0), cb.as_slice());

        let nil = SsmCore { a: Matrix::zeros(5, 5), ..core };
        let k = krylov_kernel(&nil, 4).unwrap();
        assert_eq!(k.row_slice(0), cb.as_slice());
        assert!(k.as_slice()[2..].iter().all(|&v| v == 0.0));
        assert!(krylov_kernel(&nil, 0).is_err());

        let blow = SsmCore::new(Matrix::identity(1).scale(1e300), vec![1.0], Matrix::identity(1), vec![0.0]).unwrap();
        assert!(krylov_kernel(&blow, 5).unwrap_err().to_string().contains("power 2"));
    }

    #[test]
    fn conv_examples() {
        let kernel = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let y = krylov_conv(&kernel, &[1.0, 0.0, 0.0], &[10.0, 20.0]).unwrap();
        assert_eq!(y.as_slice(), &[11.0, 22.0, 3.0, 4.0, 5.0, 6.0]);
        let u = [0.3, -1.0, 2.0];
        let y = krylov_conv(&Matrix::zeros(3, 1), &u, &[1.0]).unwrap();
        assert_eq!(y.as_slice(), &u);
        assert!(krylov_conv(&kernel, &[1.0, 2.0], &[0.0, 0.0]).is_err());
        assert!(krylov_conv(&kernel, &u, &[0.0]).is_err());
    }

    #[test]
    fn conv_matches_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for len in [64, 128] {
            let core = random_core(&mut rng, 8, 3);
            let u = random_seq(&mut rng, len);
            let (rec, _) = ssm_recurrence(&core, &u, &[0.0; 8]).unwrap();
            let conv = krylov_conv(&krylov_kernel(&core, len).unwrap(), &u, &core.d).unwrap();
            assert!(rec.max_abs_diff(&conv) < 1e-8);
        }
    }

    #[test]
    fn narrowed_kernel_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let core = random_core(&mut rng, 6, 2);
        let u = random_seq(&mut rng, 50);
        let k = krylov_kernel(&core, 50).unwrap();
        let full = krylov_conv(&k, &u, &core.d).unwrap();
        let narrow = krylov_conv(&narrow_kernel(&k), &u, &core.d).unwrap();
        assert!(full.max_abs_diff(&narrow) < 1e-5);
        assert!(narrow_kernel(&k).as_slice().iter().all(|&v| v == v as f32 as f64));
    }

    #[test]
    fn recurrence_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let core = random_core(&mut rng, 6, 2);
        let (u, v) = (random_seq(&mut rng, 100), random_seq(&mut rng, 100));
        let (alpha, beta) = (1.7, -0.4);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
        let z = [0.0; 6];
        let (yu, _) = ssm_recurrence(&core, &u, &z).unwrap();
        let (yv, _) = ssm_recurrence(&core, &v, &z).unwrap();
        let (ym, _) = ssm_recurrence(&core, &mix, &z).unwrap();
        let want = yu.scale(alpha).add(&yv.scale(beta)).unwrap();
        assert!(ym.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gelu(-1.0) + 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((gelu(10.0) - 10.0).abs() < 1e-12);
    }

    fn random_layer(rng: &mut ChaCha8Rng, h: usize, n: usize, m: usize) -> LsslLayer {
        let cores = (0..h).map(|_| random_core(rng, n, m)).collect();
        let w = Matrix::from_fn(h * m, h, |_, _| rng.random_range(-1.0..1.0));
        let bias = random_seq(rng, h);
        LsslLayer::new(cores, w, bias).unwrap()
    }

    #[test]
    fn layer_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut layer = random_layer(&mut rng, 3, 4, 2);
        let u = Matrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
        layer.mix_weights = Matrix::zeros(6, 3);
        layer.mix_bias = vec![0.0; 3];
        assert!(layer_forward(&layer, &u).unwrap().as_slice().iter().all(|&v| v == 0.0));

        let core = random_core(&mut rng, 4, 1);
        let single = LsslLayer::new(vec![core.clone()], Matrix::identity(1), vec![0.0]).unwrap();
        let u1 = Matrix::from_fn(30, 1, |_, _| rng.random_range(-1.0..1.0));
        let out = layer_forward(&single, &u1).unwrap();
        let (y, _) = ssm_recurrence(&core, &u1.col_vec(0), &[0.0; 4]).unwrap();
        assert_eq!(out, y.map(gelu));

        assert!(layer_forward(&single, &u).is_err());
        assert!(LsslLayer::new(vec![core.clone()], Matrix::identity(2), vec![0.0]).is_err());
        assert!(LsslLayer::new(vec![core, random_core(&mut rng, 3, 1)], Matrix::zeros(2, 2), vec![0.0; 2]).is_err());
    }

    #[test]
    fn layer_convolution_matches_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let layer = random_layer(&mut rng, 4, 6, 2);
        let u = Matrix::from_fn(80, 4, |_, _| rng.random_range(-1.0..1.0));
        let rec = layer_forward(&layer, &u).unwrap();
        let conv = layer_forward_with(&layer, &u, CoreEval::Convolution { narrow: false }).unwrap();
        assert!(rec.max_abs_diff(&conv) < 1e-8);
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (h, m) = (4, 2);
        let layer = random_layer(&mut rng, h, 5, m);
        let u = Matrix::from_fn(40, h, |_, _| rng.random_range(-1.0..1.0));
        let perm = [2, 0, 3, 1];

        let cores = perm.iter().map(|&p| layer.cores[p].clone()).collect();
        let w = Matrix::from_fn(h * m, h, |r, c| layer.mix_weights[(perm[r / m] * m + r % m, perm[c])]);
        let bias = perm.iter().map(|&p| layer.mix_bias[p]).collect();
        let permuted = LsslLayer::new(cores, w, bias).unwrap();
        let up = Matrix::from_fn(40, h, |k, i| u[(k, perm[i])]);

        let out = layer_forward(&layer, &u).unwrap();
        let outp = layer_forward(&permuted, &up).unwrap();
        for k in 0..40 {
            for i in 0..h {
                assert!((outp[(k, i)] - out[(k, perm[i])]).abs() < 1e-12);
            }
        }
    }
}
