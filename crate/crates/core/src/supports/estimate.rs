//! Floating-point estimators for decay exponents and pointwise dimension.
//! These are diagnostics, not certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SupportError, SupportKind, SupportModel};
use crate::geometry::Ball;
use crate::numeric::to_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct DecayEstimate {
    pub c_hat: f64,
    pub gamma_hat: f64,
    pub d_hat: f64,
    pub samples: usize,
}

/// f64 copy of an IFS for fast measure evaluation.
struct FloatIfs {
    ratios: Vec<f64>,
    trans: Vec<Vec<f64>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    base: Vec<f64>,
}

impl FloatIfs {
    fn from_model(k: &SupportModel) -> Option<Self> {
        let ifs = k.as_ifs()?;
        let v = |x: &[crate::numeric::Scalar]| x.iter().map(to_f64).collect::<Vec<f64>>();
        let (lo, hi) = ifs.bbox();
        Some(FloatIfs {
            ratios: ifs.maps().iter().map(|m| to_f64(&m.ratio)).collect(),
            trans: ifs.maps().iter().map(|m| v(&m.translation)).collect(),
            lo: v(lo),
            hi: v(hi),
            base: v(ifs.base_point()),
        })
    }

    fn diam(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut scale = 1.0;
        let mut offset = vec![0.0; self.lo.len()];
        while scale * self.diam() > 1e-15 {
            let i = rng.gen_range(0..self.ratios.len());
            for (o, t) in offset.iter_mut().zip(&self.trans[i]) {
                *o += scale * t;
            }
            scale *= self.ratios[i];
        }
        self.base.iter().zip(&offset).map(|(b, o)| scale * b + o).collect()
    }

    /// Natural (uniform-weight) measure of a convex region given by a box
    /// classifier and a point test, resolved to cells of diameter < min_diam.
    fn mass(&self, region: &Region, min_diam: f64) -> f64 {
        let n = self.lo.len();
        let w = 1.0 / self.ratios.len() as f64;
        let diam = self.diam();
        let mut total = 0.0;
        let mut stack = vec![(1.0f64, vec![0.0; n], 1.0f64, 0u32)];
        while let Some((scale, offset, weight, depth)) = stack.pop() {
            let lo: Vec<f64> = self.lo.iter().zip(&offset).map(|(l, o)| scale * l + o).collect();
            let hi: Vec<f64> = self.hi.iter().zip(&offset).map(|(h, o)| scale * h + o).collect();
            match region.classify(&lo, &hi) {
                Class::Out => {}
                Class::In => total += weight,
                Class::Partial => {
                    if scale * diam < min_diam || depth > 90 {
                        let p: Vec<f64> = self.base.iter().zip(&offset).map(|(b, o)| scale * b + o).collect();
                        if region.contains(&p) {
                            total += weight;
                        }
                    } else {
                        for (r, t) in self.ratios.iter().zip(&self.trans) {
                            let off: Vec<f64> = offset.iter().zip(t).map(|(o, t)| o + scale * t).collect();
                            stack.push((scale * r, off, weight * w, depth + 1));
                        }
                    }
                }
            }
        }
        total
    }
}

enum Class {
    In,
    Out,
    Partial,
}

/// A ball, optionally intersected with the slab |u·z − s| ≤ eps (u unit).
struct Region {
    x: Vec<f64>,
    rho: f64,
    slab: Option<(Vec<f64>, f64, f64)>,
}

impl Region {
    fn contains(&self, p: &[f64]) -> bool {
        let d2: f64 = p.iter().zip(&self.x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 > self.rho * self.rho {
            return false;
        }
        match &self.slab {
            None => true,
            Some((u, s, e)) => (dotf(u, p) - s).abs() <= *e,
        }
    }

    fn classify(&self, lo: &[f64], hi: &[f64]) -> Class {
        let (mut near, mut far) = (0.0, 0.0);
        for ((l, h), x) in lo.iter().zip(hi).zip(&self.x) {
            let dn = if x < l { l - x } else if x > h { x - h } else { 0.0 };
            let df = (x - l).abs().max((h - x).abs());
            near += dn * dn;
            far += df * df;
        }
        let r2 = self.rho * self.rho;
        let ball = if near > r2 {
            return Class::Out;
        } else if far <= r2 {
            Class::In
        } else {
            Class::Partial
        };
        let Some((u, s, e)) = &self.slab else {
            return ball;
        };
        let mid: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (l + h) / 2.0).collect();
        let half: f64 = lo.iter().zip(hi).zip(u).map(|((l, h), u)| (h - l) / 2.0 * u.abs()).sum();
        let c = dotf(u, &mid);
        if c + half < s - e || c - half > s + e {
            Class::Out
        } else if c - half >= s - e && c + half <= s + e {
            ball
        } else {
            Class::Partial
        }
    }
}

fn dotf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nn = dotf(&v, &v);
        if nn > 1e-6 && nn <= 1.0 {
            let s = nn.sqrt();
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// ∫ (1 − τ²)^{(n−1)/2} dτ from −1 to t.
fn section_integral(n: usize, t: f64) -> f64 {
    let t = t.clamp(-1.0, 1.0);
    match n {
        1 => t + 1.0,
        2 => (t * (1.0 - t * t).sqrt() + t.asin()) / 2.0 + std::f64::consts::FRAC_PI_4,
        3 => t - t * t * t / 3.0 + 2.0 / 3.0,
        _ => {
            let steps = 2000;
            let h = (t + 1.0) / steps as f64;
            let f = |s: f64| (1.0 - s * s).max(0.0).powf((n as f64 - 1.0) / 2.0);
            let mut acc = f(-1.0) + f(t);
            for i in 1..steps {
                acc += f(-1.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        }
    }
}

/// Lebesgue fraction of a ball lying in a slab at signed distance s
/// (both in units of the radius) with halfwidth e.
fn lebesgue_slab_fraction(n: usize, s: f64, e: f64) -> f64 {
    let total = section_integral(n, 1.0);
    let a = (s - e).max(-1.0);
    let b = (s + e).min(1.0);
    if b <= a {
        0.0
    } else {
        (section_integral(n, b) - section_integral(n, a)) / total
    }
}

/// Least-squares line fit, returning (slope, intercept, max residual).
fn fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let maxres = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .fold(f64::NEG_INFINITY, f64::max);
    (slope, intercept, maxres)
}

const CHUNK: usize = 256;

/// Runs `trials` seeded samples in parallel chunks; chunk i draws from
/// stream i of the seed, so the result does not depend on thread timing.
fn sample_parallel<T: Send>(trials: usize, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> Option<T> + Sync) -> Vec<T> {
    let chunks = trials.div_ceil(CHUNK);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(chunks.max(1));
    let mut results: Vec<Vec<T>> = (0..chunks).map(|_| Vec::new()).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let mut slots: Vec<&mut Vec<T>> = results.iter_mut().collect();
        let per = chunks.div_ceil(threads.max(1)).max(1);
        let mut handles = Vec::new();
        let mut idx = 0;
        while !slots.is_empty() {
            let take = per.min(slots.len());
            let mine: Vec<&mut Vec<T>> = slots.drain(..take).collect();
            let start = idx;
            idx += take;
            handles.push(scope.spawn(move || {
                for (off, slot) in mine.into_iter().enumerate() {
                    let chunk = start + off;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(chunk as u64);
                    let count = CHUNK.min(trials - chunk * CHUNK);
                    for _ in 0..count {
                        if let Some(v) = f(&mut rng) {
                            slot.push(v);
                        }
                    }
                }
            }));
        }
        for h in handles {
            h.join().expect("sampling thread panicked");
        }
    });
    results.into_iter().flatten().collect()
}

/// Fits γ̂ (slope of log mass ratio against log ε/ρ), Ĉ (upper envelope of
/// the fit, times a safety factor 2) and D̂ (largest doubling ratio seen).
pub fn estimate_decay(k: &SupportModel, trials: usize, seed: u64) -> Result<DecayEstimate, SupportError> {
    if trials < 16 {
        return Err(SupportError::InsufficientSamples(format!("{trials} trials, need at least 16")));
    }
    let n = k.dim();
    let float_ifs = FloatIfs::from_model(k);
    let samples: Vec<(f64, f64, f64)> = sample_parallel(trials, seed, |rng| {
        let log_ratio = rng.gen_range((1e-4f64).ln()..(1e-1f64).ln());
        let eps_rel = log_ratio.exp();
        match (&k.kind, &float_ifs) {
            (SupportKind::Euclidean(_), _) => {
                let s = rng.gen_range(0.0..0.5);
                let frac = lebesgue_slab_fraction(n, s, eps_rel);
                Some((log_ratio, frac.ln(), 2f64.powi(n as i32)))
            }
            (SupportKind::Ifs(_), Some(fi)) => {
                let x = fi.random_point(rng);
                let rho = fi.diam() * rng.gen_range((1e-2f64).ln()..(0.3f64).ln()).exp();
                let u = random_unit(n, rng);
                let s = dotf(&u, &x);
                let eps = eps_rel * rho;
                let md = eps * 1e-4;
                let ball = fi.mass(&Region { x: x.clone(), rho, slab: None }, md);
                let cap = fi.mass(&Region { x: x.clone(), rho, slab: Some((u, s, eps)) }, md);
                let big = fi.mass(&Region { x, rho: 2.0 * rho, slab: None }, md);
                (ball > 0.0 && cap > 0.0).then(|| (log_ratio, (cap / ball).ln(), big / ball))
            }
            _ => None,
        }
    });
    if samples.len() < 16 {
        return Err(SupportError::InsufficientSamples(format!("only {} usable samples", samples.len())));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (slope, intercept, maxres) = fit(&xs, &ys);
    let d_hat = samples.iter().map(|s| s.2).fold(0.0, f64::max);
    Ok(DecayEstimate {
        c_hat: 2.0 * (intercept + maxres).exp(),
        gamma_hat: slope,
        d_hat,
        samples: samples.len(),
    })
}

/// Infimum over sampled x ∈ K ∩ region of the regression slope of
/// log μ(B(x, ρ)) against log ρ along a geometric ladder of radii.
pub fn pointwise_dim_lower(k: &SupportModel, region: &Ball, trials: usize, seed: u64) -> Result<f64, SupportError> {
    let n = k.dim();
    let center: Vec<f64> = region.center.iter().map(to_f64).collect();
    let radius = to_f64(&region.radius);
    let float_ifs = FloatIfs::from_model(k);
    let slopes: Vec<f64> = sample_parallel(trials.max(1), seed, |rng| match (&k.kind, &float_ifs) {
        (SupportKind::Euclidean(_), _) => {
            // μ(B(x, ρ)) = V_n ρⁿ independent of x
            let ladder: Vec<f64> = (0..20).map(|j| radius * 0.5f64.powi(j)).collect();
            let log_v = (std::f64::consts::PI.powf(n as f64 / 2.0) / super::gamma_fn(n as f64 / 2.0 + 1.0)).ln();
            let xs: Vec<f64> = ladder.iter().map(|r| r.ln()).collect();
            let ys: Vec<f64> = ladder.iter().map(|r| log_v + n as f64 * r.ln()).collect();
            Some(fit(&xs, &ys).0)
        }
        (SupportKind::Ifs(_), Some(fi)) => {
            let x = (0..1000).map(|_| fi.random_point(rng)).find(|p| {
                p.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= radius * radius
            })?;
            let q = fi.ratios.iter().cloned().fold(0.0, f64::max);
            let top = radius.min(fi.diam()) * q;
            let floor = fi.diam() * 1e-10;
            let ladder: Vec<f64> = (0..).map(|j| top * q.powi(j)).take_while(|r| *r > floor).collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = ladder
                .iter()
                .map(|&r| (r.ln(), fi.mass(&Region { x: x.clone(), rho: r, slab: None }, r * 1e-4).ln()))
                .unzip();
            (xs.len() >= 3).then(|| fit(&xs, &ys).0)
        }
        _ => None,
    });
    slopes
        .into_iter()
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.min(s))))
        .ok_or_else(|| SupportError::InsufficientSamples("no sample points in the region".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slab_fraction_one_dimensional() {
        assert!((lebesgue_slab_fraction(1, 0.2, 0.01) - 0.01).abs() < 1e-15);
        assert!((lebesgue_slab_fraction(2, 0.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((lebesgue_slab_fraction(3, 0.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((lebesgue_slab_fraction(4, 0.0, 1.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (s, i, r) = fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12 && (i - 1.0).abs() < 1e-12 && r.abs() < 1e-12);
    }
}
