//! Numerical plurisubharmonicity tests: the Levi form by finite differences
//! and the sub-mean-value inequality on complex discs.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::witness::{chunk_rng, sample_interior, PshWitness, PIECE_BREAKS, SAMPLE_CHUNK};
use super::PshError;
use crate::hartogs_domain::{DomainPoint, HartogsDomain};

/// A set of points in complex 2-space that test discs and stencils must stay in.
pub trait Region: Sync {
    fn contains(&self, p: &DomainPoint) -> bool;
}

impl Region for HartogsDomain {
    fn contains(&self, p: &DomainPoint) -> bool {
        HartogsDomain::contains(self, p)
    }
}

/// All of complex 2-space.
#[derive(Debug, Clone, Copy, Default)]
pub struct Everywhere;

impl Region for Everywhere {
    fn contains(&self, _p: &DomainPoint) -> bool {
        true
    }
}

/// A unit vector `(a, b)` of complex 2-space spanning a complex line.
pub type Direction = (Complex64, Complex64);

/// Plastic-number steps of the two-dimensional R2 low-discrepancy sequence.
const R2_STEP: [f64; 2] = [0.754_877_666_246_692_7, 0.569_840_290_998_053_2];

/// The coordinate directions `(1, 0)`, `(0, 1)` followed by six mixed
/// directions `(cos a, sin a * e^{ib})` from the R2 sequence, with
/// `a` in `[pi/12, 5pi/12]` and `b` in `[0, 2pi)`.
pub fn disc_directions() -> Vec<Direction> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut dirs = vec![(one, zero), (zero, one)];
    for k in 1..=6 {
        let x = (0.5 + k as f64 * R2_STEP[0]).fract();
        let y = (0.5 + k as f64 * R2_STEP[1]).fract();
        let alpha = PI / 12.0 + x * PI / 3.0;
        let beta = y * TAU;
        dirs.push((
            Complex64::new(alpha.cos(), 0.0),
            Complex64::from_polar(alpha.sin(), beta),
        ));
    }
    dirs
}

fn circle_point(p: &DomainPoint, dir: Direction, radius: f64, angle: f64) -> DomainPoint {
    let s = Complex64::from_polar(radius, angle);
    p.offset(s * dir.0, s * dir.1)
}

/// Whether the closed disc `p + s * dir`, `|s| <= radius`, lies in `region`,
/// judged on the centre and four concentric circles of `n` points each.
pub fn disc_fits<R: Region + ?Sized>(
    region: &R,
    p: &DomainPoint,
    dir: Direction,
    radius: f64,
    n: usize,
) -> bool {
    region.contains(p)
        && (1..=4).all(|ring| {
            let rr = radius * ring as f64 / 4.0;
            (0..n).all(|k| region.contains(&circle_point(p, dir, rr, TAU * k as f64 / n as f64)))
        })
}

/// `fun(p)` minus the average of `fun` over `n_samples` equally spaced points
/// of the circle `p + radius * e^{i theta} * dir`. Positive values violate the
/// sub-mean-value inequality.
pub fn submean_defect<F, R>(
    fun: &F,
    p: &DomainPoint,
    dir: Direction,
    radius: f64,
    n_samples: usize,
    region: &R,
) -> Result<f64, PshError>
where
    F: Fn(&DomainPoint) -> Result<f64, PshError> + ?Sized,
    R: Region + ?Sized,
{
    assert!(n_samples >= 16, "submean_defect needs at least 16 circle samples");
    if dir.0.norm_sqr() + dir.1.norm_sqr() == 0.0 {
        return Err(PshError::ZeroDirection);
    }
    if !disc_fits(region, p, dir, radius, n_samples) {
        return Err(PshError::DiscOutsideDomain { t: p.t, radius });
    }
    let mut sum = 0.0;
    for k in 0..n_samples {
        sum += fun(&circle_point(p, dir, radius, TAU * k as f64 / n_samples as f64))?;
    }
    Ok(fun(p)? - sum / n_samples as f64)
}

fn real_offset(p: &DomainPoint, d: [f64; 4]) -> DomainPoint {
    let x = p.to_real();
    DomainPoint::from_real([x[0] + d[0], x[1] + d[1], x[2] + d[2], x[3] + d[3]])
}

fn real_hessian<F, R>(fun: &F, p: &DomainPoint, s: f64, region: &R) -> Result<[[f64; 4]; 4], PshError>
where
    F: Fn(&DomainPoint) -> Result<f64, PshError> + ?Sized,
    R: Region + ?Sized,
{
    let eval = |d: [f64; 4]| -> Result<f64, PshError> {
        let q = real_offset(p, d);
        if !region.contains(&q) {
            return Err(PshError::StencilOutsideDomain { t: p.t, step: s });
        }
        fun(&q)
    };
    let unit = |i: usize, v: f64| {
        let mut d = [0.0; 4];
        d[i] = v;
        d
    };
    let u0 = eval([0.0; 4])?;
    let mut h = [[0.0; 4]; 4];
    for i in 0..4 {
        h[i][i] = (eval(unit(i, s))? - 2.0 * u0 + eval(unit(i, -s))?) / (s * s);
        for j in 0..i {
            let mut pp = [0.0; 4];
            let mut pm = [0.0; 4];
            let mut mp = [0.0; 4];
            let mut mm = [0.0; 4];
            pp[i] = s;
            pp[j] = s;
            pm[i] = s;
            pm[j] = -s;
            mp[i] = -s;
            mp[j] = s;
            mm[i] = -s;
            mm[j] = -s;
            let v = (eval(pp)? - eval(pm)? - eval(mp)? + eval(mm)?) / (4.0 * s * s);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    Ok(h)
}

/// Smallest eigenvalue of the complex Hessian `[d^2 u / dz_j dzbar_k]` of
/// `fun` at `p`, from central differences at spacings `step` and `2 step`
/// combined by Richardson extrapolation.
pub fn levi_min_eig<F, R>(fun: &F, p: &DomainPoint, step: f64, region: &R) -> Result<f64, PshError>
where
    F: Fn(&DomainPoint) -> Result<f64, PshError> + ?Sized,
    R: Region + ?Sized,
{
    assert!(step > 0.0, "levi_min_eig needs a positive step");
    let fine = real_hessian(fun, p, step, region)?;
    let coarse = real_hessian(fun, p, 2.0 * step, region)?;
    let mut h = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            h[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
        }
    }
    // real coordinates (x1, y1, x2, y2)
    let a = (h[0][0] + h[1][1]) / 4.0;
    let d = (h[2][2] + h[3][3]) / 4.0;
    let b = Complex64::new((h[0][2] + h[1][3]) / 4.0, (h[0][3] - h[1][2]) / 4.0);
    let mid = (a + d) / 2.0;
    Ok(mid - (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt())
}

/// Parameters of a random plurisubharmonicity battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PshBatteryConfig {
    pub n_points: usize,
    pub radii: Vec<f64>,
    pub n_circle: usize,
    /// Discs are only tested if the disc of radius `clearance * radius` also fits.
    pub clearance: f64,
    pub levi_step: f64,
    pub submean_tol: f64,
    pub levi_tol: f64,
}

impl PshBatteryConfig {
    pub fn with_grid_spacing(h: f64) -> Self {
        Self {
            n_points: 10_000,
            radii: vec![h, 2.0 * h, 4.0 * h],
            n_circle: 64,
            clearance: 1.25,
            levi_step: 1e-3,
            submean_tol: 1e-9,
            levi_tol: 1e-6,
        }
    }
}

impl Default for PshBatteryConfig {
    fn default() -> Self {
        Self::with_grid_spacing(0.025)
    }
}

/// Plurisubharmonicity test results at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PshTestReport {
    pub point: DomainPoint,
    /// `None` where the Levi test was skipped (kink, piece boundary or stencil outside).
    pub levi_min_eig: Option<f64>,
    pub worst_submean_defect: f64,
    pub test_radius: f64,
    pub n_directions: usize,
}

/// Aggregate of a battery over many points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PshBatteryReport {
    pub function: String,
    pub points_tested: usize,
    pub discs_tested: usize,
    pub worst_submean_defect: f64,
    pub worst_submean_point: DomainPoint,
    pub worst_submean_radius: f64,
    pub levi_points: usize,
    pub levi_min_eig: f64,
    pub levi_worst_point: Option<DomainPoint>,
    pub submean_pass: bool,
    pub levi_pass: bool,
    pub pass: bool,
}

/// Which of the two witness functions a battery runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessFunction {
    F,
    G,
}

impl<'a> PshWitness<'a> {
    pub fn eval(&self, which: WitnessFunction, p: &DomainPoint) -> Result<f64, PshError> {
        match which {
            WitnessFunction::F => self.eval_f(p),
            WitnessFunction::G => self.eval_g(p),
        }
    }

    /// Whether `f` is smooth on the ball of radius `margin` about `p`: away
    /// from the piece breaks in `|z|` and from the kink loci `h in {0, 100}`.
    /// Where the branch is used, `|w|` must also exceed `10 * margin`, since
    /// finite differences of `arg w` degrade like `(step / |w|)^4 / |w|^2`.
    pub fn is_smooth_near(&self, p: &DomainPoint, margin: f64) -> bool {
        if PIECE_BREAKS.iter().any(|&b| (p.t - b).abs() <= margin) {
            return false;
        }
        match self.branch(p) {
            Ok(_) if p.w.norm() <= 10.0 * margin => false,
            Ok(h) => [0.0, 100.0].iter().all(|&k| {
                let gap = (h.theta - k).abs().min(PI / 2.0);
                p.w.norm() * gap.sin() > margin
            }),
            Err(_) => true,
        }
    }

    /// Sub-mean and Levi tests at one point over the fixed disc directions.
    /// Returns `None` when no test disc fits.
    pub fn test_point(
        &self,
        which: WitnessFunction,
        p: &DomainPoint,
        cfg: &PshBatteryConfig,
    ) -> Result<Option<(PshTestReport, usize)>, PshError> {
        let domain = self.domain();
        let fun = |q: &DomainPoint| self.eval(which, q);
        let mut worst = (f64::NEG_INFINITY, 0.0);
        let mut discs = 0;
        let dirs = disc_directions();
        for &dir in &dirs {
            for &radius in &cfg.radii {
                if !disc_fits(domain, p, dir, radius * cfg.clearance, cfg.n_circle) {
                    continue;
                }
                let d = submean_defect(&fun, p, dir, radius, cfg.n_circle, domain)?;
                discs += 1;
                if d > worst.0 {
                    worst = (d, radius);
                }
            }
        }
        if discs == 0 {
            return Ok(None);
        }
        let levi = if self.is_smooth_near(p, 10.0 * cfg.levi_step) {
            match levi_min_eig(&fun, p, cfg.levi_step, domain) {
                Ok(v) => Some(v),
                Err(PshError::StencilOutsideDomain { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Ok(Some((
            PshTestReport {
                point: *p,
                levi_min_eig: levi,
                worst_submean_defect: worst.0,
                test_radius: worst.1,
                n_directions: dirs.len(),
            },
            discs,
        )))
    }

    /// Runs the sub-mean and Levi tests at `cfg.n_points` uniformly sampled
    /// interior points with at least one fitting test disc.
    pub fn psh_battery(
        &self,
        which: WitnessFunction,
        cfg: &PshBatteryConfig,
        seed: u64,
    ) -> Result<PshBatteryReport, PshError> {
        let n_chunks = cfg.n_points.div_ceil(SAMPLE_CHUNK);
        let chunks: Vec<Vec<(PshTestReport, usize)>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = chunk_rng(seed, c as u64);
                let count = SAMPLE_CHUNK.min(cfg.n_points - c * SAMPLE_CHUNK);
                let mut out = Vec::with_capacity(count);
                while out.len() < count {
                    let p = sample_interior(self.domain(), (0.0, 18.0), &mut rng);
                    if let Some(r) = self.test_point(which, &p, cfg)? {
                        out.push(r);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_, PshError>>()?;
        let reports: Vec<_> = chunks.into_iter().flatten().collect();
        let mut worst = &reports[0].0;
        let mut levi_worst: Option<&PshTestReport> = None;
        let mut discs = 0;
        let mut levi_points = 0;
        for (r, n) in &reports {
            discs += n;
            if r.worst_submean_defect > worst.worst_submean_defect {
                worst = r;
            }
            if let Some(v) = r.levi_min_eig {
                levi_points += 1;
                if levi_worst.is_none_or(|w| v < w.levi_min_eig.unwrap()) {
                    levi_worst = Some(r);
                }
            }
        }
        let levi_min = levi_worst.and_then(|r| r.levi_min_eig).unwrap_or(f64::INFINITY);
        let submean_pass = worst.worst_submean_defect <= cfg.submean_tol;
        let levi_pass = levi_min >= -cfg.levi_tol;
        Ok(PshBatteryReport {
            function: match which {
                WitnessFunction::F => "f".into(),
                WitnessFunction::G => "g".into(),
            },
            points_tested: reports.len(),
            discs_tested: discs,
            worst_submean_defect: worst.worst_submean_defect,
            worst_submean_point: worst.point,
            worst_submean_radius: worst.test_radius,
            levi_points,
            levi_min_eig: levi_min,
            levi_worst_point: levi_worst.map(|r| r.point),
            submean_pass,
            levi_pass,
            pass: submean_pass && levi_pass,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn p0() -> DomainPoint {
        DomainPoint::new(c(0.3, -1.2), c(0.7, 0.4))
    }

    #[test]
    fn levi_of_model_functions() {
        let sq = |p: &DomainPoint| Ok(p.z.norm_sqr() + p.w.norm_sqr());
        assert_abs_diff_eq!(levi_min_eig(&sq, &p0(), 1e-3, &Everywhere).unwrap(), 1.0, epsilon = 1e-6);
        let ph = |p: &DomainPoint| Ok((p.z * p.w).re);
        assert_abs_diff_eq!(levi_min_eig(&ph, &p0(), 1e-3, &Everywhere).unwrap(), 0.0, epsilon = 1e-6);
        let neg = |p: &DomainPoint| Ok(-p.z.norm_sqr());
        assert_abs_diff_eq!(levi_min_eig(&neg, &p0(), 1e-3, &Everywhere).unwrap(), -1.0, epsilon = 1e-6);
        // |z + w|^2 has Levi matrix [[1,1],[1,1]], eigenvalues 0 and 2
        let rank_one = |p: &DomainPoint| Ok((p.z + p.w).norm_sqr());
        assert_abs_diff_eq!(levi_min_eig(&rank_one, &p0(), 1e-3, &Everywhere).unwrap(), 0.0, epsilon = 1e-6);
        // |z|^2 - |w|^2 + Re(z conj w) is indefinite
        let mixed = |p: &DomainPoint| Ok(p.z.norm_sqr() - p.w.norm_sqr() + (p.z * p.w.conj()).re);
        let lam = -(1.0f64 + 0.25).sqrt();
        assert_abs_diff_eq!(levi_min_eig(&mixed, &p0(), 1e-3, &Everywhere).unwrap(), lam, epsilon = 1e-6);
    }

    #[test]
    fn levi_stencil_outside() {
        let d = HartogsDomain::default();
        let p = DomainPoint::reduced(5.0, d.fiber_center(5.0) * 1e-3);
        let f = |_: &DomainPoint| Ok(0.0);
        assert!(matches!(
            levi_min_eig(&f, &p, 1e-2, &d),
            Err(PshError::StencilOutsideDomain { .. })
        ));
    }

    #[test]
    fn submean_of_model_functions() {
        let dirs = disc_directions();
        assert_eq!(dirs.len(), 8);
        for &dir in &dirs {
            assert_abs_diff_eq!(dir.0.norm_sqr() + dir.1.norm_sqr(), 1.0, epsilon = 1e-15);
            let k = |_: &DomainPoint| Ok(3.5);
            assert_eq!(submean_defect(&k, &p0(), dir, 0.3, 16, &Everywhere).unwrap(), 0.0);
            let re = |p: &DomainPoint| Ok(p.z.re);
            assert!(submean_defect(&re, &p0(), dir, 0.3, 16, &Everywhere).unwrap().abs() < 1e-12);
            // |z|^2 + |w|^2 has circle mean f(p) + radius^2
            let sq = |p: &DomainPoint| Ok(p.z.norm_sqr() + p.w.norm_sqr());
            assert_abs_diff_eq!(
                submean_defect(&sq, &p0(), dir, 0.3, 16, &Everywhere).unwrap(),
                -0.09,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn submean_rejects_bad_discs() {
        let d = HartogsDomain::default();
        let f = |_: &DomainPoint| Ok(0.0);
        let p = DomainPoint::reduced(9.0, c(0.0, 0.0));
        let dir = (c(0.0, 0.0), c(1.0, 0.0));
        assert!(matches!(
            submean_defect(&f, &p, dir, 2.0, 16, &d),
            Err(PshError::DiscOutsideDomain { .. })
        ));
        assert_eq!(
            submean_defect(&f, &p, (c(0.0, 0.0), c(0.0, 0.0)), 0.1, 16, &d),
            Err(PshError::ZeroDirection)
        );
    }

    #[test]
    fn f_on_kink_locus_is_submean() {
        let d = HartogsDomain::default();
        let wit = PshWitness::new(&d);
        // pick t in the twist zone where phi passes through 100 and sit on h = 100
        let t = (0..=10_000)
            .map(|k| 4.0 + k as f64 * 1e-4)
            .find(|&t| d.profile().phi(t) >= 100.0)
            .unwrap();
        let p = DomainPoint::reduced(t + 0.02, Complex64::from_polar(0.6, 100.0));
        assert!(d.contains(&p));
        assert_abs_diff_eq!(wit.branch(&p).unwrap().theta, 100.0, epsilon = 1e-9);
        let fun = |q: &DomainPoint| wit.eval_f(q);
        let defect = submean_defect(&fun, &p, (c(0.0, 0.0), c(1.0, 0.0)), 0.05, 64, &d).unwrap();
        assert!(defect <= 1e-9, "{defect}");
    }

    #[test]
    fn g_is_psh_on_a_small_battery() {
        let d = HartogsDomain::default();
        let wit = PshWitness::new(&d);
        let cfg = PshBatteryConfig {
            n_points: 300,
            ..PshBatteryConfig::default()
        };
        for which in [WitnessFunction::F, WitnessFunction::G] {
            let report = wit.psh_battery(which, &cfg, 11).unwrap();
            assert_eq!(report.points_tested, 300);
            assert!(report.pass, "{report:?}");
            assert!(report.levi_points > 50);
        }
    }

    #[test]
    fn battery_detects_non_psh() {
        // a concave bump in |w| violates the sub-mean inequality
        let d = HartogsDomain::default();
        let fun = |p: &DomainPoint| Ok(-p.w.norm_sqr());
        let p = DomainPoint::reduced(9.0, c(0.0, 0.0));
        let defect = submean_defect(&fun, &p, (c(0.0, 0.0), c(1.0, 0.0)), 0.1, 64, &d).unwrap();
        assert_abs_diff_eq!(defect, 0.01, epsilon = 1e-12);
    }
}
