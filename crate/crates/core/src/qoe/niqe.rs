//! No-reference naturalness score: distance between the multivariate
//! Gaussian of an image's natural-scene-statistics features and a pristine
//! model.
//!
//! Per 96x96 patch and at two scales (the second from a 2x2 mean
//! downsample, 48x48 patches), MSCN coefficients computed with a 7x7
//! Gaussian window (sigma 7/6) give 18 features: a generalized-Gaussian
//! `(shape, variance)` and, for the horizontal, vertical and two diagonal
//! neighbour products, asymmetric generalized-Gaussian
//! `(shape, mean, left variance, right variance)`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::Image;

pub const PATCH: usize = 96;
pub const SCALES: usize = 2;
pub const FEATURES_PER_SCALE: usize = 18;
pub const FEATURES: usize = FEATURES_PER_SCALE * SCALES;
pub const SHARPNESS_THRESHOLD: f64 = 0.75;
pub const MAX_SCORE: f64 = 100.0;
pub const MIN_CORPUS: usize = 5;
const MAGIC: &str = "NIQE1";

/// Multivariate Gaussian of pristine patch features.
#[derive(Debug, Clone, PartialEq)]
pub struct PristineModel {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub patch: usize,
    pub scales: usize,
    pub corpus_id: String,
}

impl PristineModel {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, corpus_id: impl Into<String>) -> Result<Self> {
        let m = Self {
            mean,
            cov,
            patch: PATCH,
            scales: SCALES,
            corpus_id: corpus_id.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mean.len();
        if self.cov.nrows() != n || self.cov.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "mean has {n} entries, covariance is {}x{}",
                self.cov.nrows(),
                self.cov.ncols()
            )));
        }
        let scale = self.cov.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (self.cov[(i, j)] - self.cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = self.cov.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(Error::InvalidParameter(format!("covariance eigenvalue {min_eig} < 0")));
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let n = self.mean.len();
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "dim {n}")?;
        writeln!(w, "patch {}", self.patch)?;
        writeln!(w, "scales {}", self.scales)?;
        writeln!(w, "corpus {}", self.corpus_id)?;
        writeln!(w, "mean")?;
        writeln!(w, "{}", join(self.mean.iter()))?;
        writeln!(w, "cov")?;
        for i in 0..n {
            writeln!(w, "{}", join(self.cov.row(i).iter()))?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead, source: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(source, m);
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::format(source, "unexpected end of file"))?
                .map_err(Error::from)
        };
        if next()?.trim() != MAGIC {
            return Err(bad("missing NIQE1 header".into()));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = next()?;
            line.strip_prefix(name)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::format(source, format!("expected {name:?}, got {line:?}")))
        };
        let n: usize = field("dim")?.parse().map_err(|e| bad(format!("dim: {e}")))?;
        let patch: usize = field("patch")?.parse().map_err(|e| bad(format!("patch: {e}")))?;
        let scales: usize = field("scales")?.parse().map_err(|e| bad(format!("scales: {e}")))?;
        let corpus_id = field("corpus")?;
        field("mean")?;
        let parse_row = |line: String| -> Result<Vec<f64>> {
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n {
                return Err(bad(format!("row has {} values, expected {n}", row.len())));
            }
            Ok(row)
        };
        let mean = DVector::from_vec(parse_row(field("")?)?);
        field("cov")?;
        let mut cov = Vec::with_capacity(n * n);
        for _ in 0..n {
            cov.extend(parse_row(field("")?)?);
        }
        let model = Self {
            mean,
            cov: DMatrix::from_row_slice(n, n, &cov),
            patch,
            scales,
            corpus_id,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        Self::read_from(BufReader::new(std::fs::File::open(p)?), p)
    }
}

fn join<'a>(v: impl Iterator<Item = &'a f64>) -> String {
    v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiqeScore {
    /// Clamped to `[0, 100]`.
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

/// Features of every patch plus its sharpness (mean local deviation).
#[derive(Debug, Clone)]
pub struct PatchFeatures {
    pub features: Vec<[f64; FEATURES]>,
    pub sharpness: Vec<f64>,
}

struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

fn gaussian_window() -> [f64; 7] {
    let sigma = 7.0 / 6.0;
    let mut g = [0.0; 7];
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - 3.0;
        *v = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

fn blur(p: &Plane, g: &[f64; 7]) -> Vec<f64> {
    let (w, h) = (p.w, p.h);
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (0..7)
                .map(|k| g[k] * p.v[y * w + clamp(x as isize + k as isize - 3, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (0..7)
                .map(|k| g[k] * tmp[clamp(y as isize + k as isize - 3, h) * w + x])
                .sum();
        }
    }
    out
}

/// MSCN coefficients and local deviation.
fn mscn(p: &Plane) -> (Vec<f64>, Vec<f64>) {
    let g = gaussian_window();
    let mu = blur(p, &g);
    let sq = Plane {
        w: p.w,
        h: p.h,
        v: p.v.iter().map(|v| v * v).collect(),
    };
    let mu2 = blur(&sq, &g);
    let sigma: Vec<f64> = mu.iter().zip(&mu2).map(|(m, m2)| (m2 - m * m).abs().sqrt()).collect();
    let coeffs =
        p.v.iter()
            .zip(&mu)
            .zip(&sigma)
            .map(|((v, m), s)| (v - m) / (s + 1.0))
            .collect();
    (coeffs, sigma)
}

fn downsample(p: &Plane) -> Plane {
    let (w, h) = (p.w / 2, p.h / 2);
    let mut v = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = 2 * y * p.w + 2 * x;
            v.push(0.25 * (p.v[i] + p.v[i + 1] + p.v[i + p.w] + p.v[i + p.w + 1]));
        }
    }
    Plane { w, h, v }
}

/// Tabulated `(shape, r(shape))`, `r(a) = Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))`.
fn shape_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=9800)
            .map(|i| {
                let a = 0.2 + i as f64 * 0.001;
                let r = libm::tgamma(2.0 / a).powi(2) / (libm::tgamma(1.0 / a) * libm::tgamma(3.0 / a));
                (a, r)
            })
            .collect()
    })
}

fn match_shape(r_hat: f64) -> f64 {
    let mut best = (f64::INFINITY, 2.0);
    for &(a, r) in shape_table() {
        let d = (r - r_hat) * (r - r_hat);
        if d < best.0 {
            best = (d, a);
        }
    }
    best.1
}

/// Generalized Gaussian `(shape, variance)` by moment matching.
pub fn fit_ggd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let var = x.iter().map(|v| v * v).sum::<f64>() / n;
    let e_abs = x.iter().map(|v| v.abs()).sum::<f64>() / n;
    if !(var > 0.0) {
        return (2.0, 0.0);
    }
    (match_shape(e_abs * e_abs / var), var)
}

/// Asymmetric generalized Gaussian `(shape, mean, left var, right var)`.
pub fn fit_aggd(x: &[f64]) -> (f64, f64, f64, f64) {
    let (mut ls, mut ln, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    for &v in x {
        if v < 0.0 {
            ls += v * v;
            ln += 1;
        } else if v > 0.0 {
            rs += v * v;
            rn += 1;
        }
        abs_sum += v.abs();
        sq_sum += v * v;
    }
    if !(sq_sum > 0.0) {
        return (2.0, 0.0, 0.0, 0.0);
    }
    let mut left = if ln > 0 { (ls / ln as f64).sqrt() } else { 0.0 };
    let mut right = if rn > 0 { (rs / rn as f64).sqrt() } else { 0.0 };
    // one-sided data: treat as symmetric
    if left == 0.0 {
        left = right;
    }
    if right == 0.0 {
        right = left;
    }
    let n = x.len() as f64;
    let g = left / right;
    let r_hat = (abs_sum / n).powi(2) / (sq_sum / n);
    let r_norm = r_hat * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2);
    let a = match_shape(r_norm);
    let c = (libm::tgamma(1.0 / a) / libm::tgamma(3.0 / a)).sqrt();
    let eta = (right - left) * libm::tgamma(2.0 / a) / libm::tgamma(1.0 / a) * c;
    (a, eta, left * left, right * right)
}

const SHIFTS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];

fn patch_features(coeffs: &[f64], w: usize, x0: usize, y0: usize, size: usize, out: &mut [f64]) {
    let mut px = Vec::with_capacity(size * size);
    for y in y0..y0 + size {
        px.extend_from_slice(&coeffs[y * w + x0..y * w + x0 + size]);
    }
    let (a, v) = fit_ggd(&px);
    out[0] = a;
    out[1] = v;
    let mut prod = Vec::with_capacity(size * size);
    for (s, &(dx, dy)) in SHIFTS.iter().enumerate() {
        prod.clear();
        for y in 0..size as isize {
            for x in 0..size as isize {
                let (xs, ys) = (x + dx, y + dy);
                if xs < 0 || ys < 0 || xs >= size as isize || ys >= size as isize {
                    continue;
                }
                prod.push(px[(y as usize) * size + x as usize] * px[ys as usize * size + xs as usize]);
            }
        }
        let (a, eta, l, r) = fit_aggd(&prod);
        out[2 + 4 * s..6 + 4 * s].copy_from_slice(&[a, eta, l, r]);
    }
}

/// Per-patch features of every non-overlapping 96x96 patch.
pub fn extract_features(img: &Image) -> Result<PatchFeatures> {
    let (w, h) = (img.width(), img.height());
    let (nx, ny) = (w / PATCH, h / PATCH);
    if nx == 0 || ny == 0 {
        return Err(Error::ImageTooSmall(format!(
            "{w}x{h} is below one {PATCH}x{PATCH} patch"
        )));
    }
    let full = Plane {
        w,
        h,
        v: img.luminance(),
    };
    let half = downsample(&full);
    let (c1, sigma1) = mscn(&full);
    let (c2, _) = mscn(&half);
    let mut features = Vec::with_capacity(nx * ny);
    let mut sharpness = Vec::with_capacity(nx * ny);
    for py in 0..ny {
        for px in 0..nx {
            let mut f = [0.0; FEATURES];
            let (x0, y0) = (px * PATCH, py * PATCH);
            patch_features(&c1, w, x0, y0, PATCH, &mut f[..FEATURES_PER_SCALE]);
            patch_features(&c2, half.w, x0 / 2, y0 / 2, PATCH / 2, &mut f[FEATURES_PER_SCALE..]);
            let mut s = 0.0;
            for y in y0..y0 + PATCH {
                s += sigma1[y * w + x0..y * w + x0 + PATCH].iter().sum::<f64>();
            }
            features.push(f);
            sharpness.push(s / (PATCH * PATCH) as f64);
        }
    }
    Ok(PatchFeatures { features, sharpness })
}

fn mean_cov(rows: &[[f64; FEATURES]]) -> (DVector<f64>, DMatrix<f64>) {
    let n = rows.len();
    let mut mean = DVector::zeros(FEATURES);
    for r in rows {
        mean += DVector::from_column_slice(r);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(FEATURES, FEATURES);
    if n > 1 {
        for r in rows {
            let d = DVector::from_column_slice(r) - &mean;
            cov += &d * d.transpose();
        }
        cov /= (n - 1) as f64;
    }
    // exact symmetry
    let cov = (&cov + cov.transpose()) * 0.5;
    (mean, cov)
}

/// Fits the pristine model to the sharp patches of a corpus (per image,
/// patches above 0.75 of the sharpest).
pub fn fit_pristine_model(corpus: &[Image], corpus_id: &str) -> Result<PristineModel> {
    if corpus.len() < MIN_CORPUS {
        return Err(Error::InsufficientData(corpus.len()));
    }
    let mut pooled = Vec::new();
    for img in corpus {
        let pf = extract_features(img)?;
        let peak = pf.sharpness.iter().copied().fold(0.0, f64::max);
        pooled.extend(
            pf.features
                .iter()
                .zip(&pf.sharpness)
                .filter(|(_, &s)| peak > 0.0 && s > SHARPNESS_THRESHOLD * peak)
                .map(|(f, _)| *f),
        );
    }
    if pooled.len() < 2 {
        return Err(Error::TooFewPatches(pooled.len()));
    }
    let (mean, cov) = mean_cov(&pooled);
    PristineModel::new(mean, cov, corpus_id)
}

/// Model fitted once per process on ten seeded 288x288 dead-leaves images.
pub fn default_pristine_model() -> &'static PristineModel {
    static MODEL: OnceLock<PristineModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let corpus = crate::synth::dead_leaves_corpus(10, 288, 288, DEFAULT_CORPUS_SEED)
            .expect("synthetic corpus dimensions are valid");
        fit_pristine_model(&corpus, "dead-leaves-10x288").expect("synthetic corpus has sharp patches")
    })
}

pub const DEFAULT_CORPUS_SEED: u64 = 2024;

/// `sqrt(d^T ((S + S_o)/2 + eps I)^-1 d)` with `eps = 1e-6 tr/n`.
pub fn mahalanobis(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    model_mean: &DVector<f64>,
    model_cov: &DMatrix<f64>,
) -> Result<f64> {
    let n = mean.len();
    let mut pooled = (cov + model_cov) * 0.5;
    let trace = pooled.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::SingularPooledCovariance);
    }
    for i in 0..n {
        pooled[(i, i)] += 1e-6 * trace / n as f64;
    }
    let d = mean - model_mean;
    let chol = pooled.cholesky().ok_or(Error::SingularPooledCovariance)?;
    let q = d.dot(&chol.solve(&d));
    Ok(q.max(0.0).sqrt())
}

/// Scores all patches of `img` against the model.
pub fn niqe_score(img: &Image, model: &PristineModel) -> Result<NiqeScore> {
    if model.mean.len() != FEATURES {
        return Err(Error::ShapeMismatch(format!(
            "model has {} features, expected {FEATURES}",
            model.mean.len()
        )));
    }
    let pf = extract_features(img)?;
    let (mean, cov) = mean_cov(&pf.features);
    let raw = mahalanobis(&mean, &cov, &model.mean, &model.cov)?;
    let value = raw.clamp(0.0, MAX_SCORE);
    Ok(NiqeScore {
        value,
        raw,
        clamped: value != raw,
    })
}
