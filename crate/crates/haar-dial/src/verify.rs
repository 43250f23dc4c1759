//! Statistical battery comparing dialled ensembles against a QR-based
//! reference sampler.
//!
//! All tests are scale-free summaries (Kolmogorov-Smirnov distances and
//! moment deviations in standard errors) with fixed thresholds at the one
//! percent level. Pooling |u_ij|^2 across a matrix introduces negative
//! within-matrix correlation, which only makes the KS tests conservative.

use num_complex::Complex64;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_unitary, Convention, Scheme};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::quad::adaptive_simpson;
use crate::sampler::{sample_circuit_indexed, MarginalPdf, RngStream, StreamKind};

/// One-percent Kolmogorov-Smirnov coefficient.
pub const KS_COEFF: f64 = 1.63;
/// Moment deviations beyond this many standard errors fail.
pub const MOMENT_SE_LIMIT: f64 = 5.0;
/// Normalization slack for the one-dimensional marginals.
pub const PDF_MASS_TOL: f64 = 1e-9;
/// Normalization slack for the joint reflectivity density.
pub const JOINT_MASS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestRecord {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn record(name: String, statistic: f64, threshold: f64) -> TestRecord {
    TestRecord {
        name,
        statistic,
        threshold,
        // NaN statistics fail by construction.
        pass: statistic <= threshold,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub name: String,
    pub records: Vec<TestRecord>,
    /// Mean |u_ij|^2 per entry; Haar input makes every cell 1/m.
    pub entry_moment_table: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryReport {
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub ensembles: Vec<EnsembleReport>,
    pub cross: Vec<TestRecord>,
    pub pass: bool,
}

impl BatteryReport {
    pub fn to_json(&self) -> String {
        crate::jsonfmt::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<BatteryReport> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("battery json: {e}")))
    }
}

fn check_samples(xs: &[f64]) -> Result<()> {
    if xs.len() < 10 {
        return Err(Error::Domain(format!(
            "need at least 10 samples, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    Ok(())
}

/// Sup distance between the empirical cdf of `samples` and `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    check_samples(samples)?;
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - k as f64 / n).max((k + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Sup distance between two empirical cdfs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a)?;
    check_samples(b)?;
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_unstable_by(f64::total_cmp);
    xb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xa.len() || j < xb.len() {
        let v = match (xa.get(i), xb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] == v {
            i += 1;
        }
        while j < xb.len() && xb[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-percent critical value for the one-sample statistic.
pub fn ks_critical_one_sample(n: usize) -> f64 {
    KS_COEFF / (n as f64).sqrt()
}

/// One-percent critical value for the two-sample statistic.
pub fn ks_critical_two_sample(n1: usize, n2: usize) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    KS_COEFF * ((a + b) / (a * b)).sqrt()
}

/// Haar-distributed unitary from a Ginibre draw and phase-corrected QR.
pub fn haar_oracle_sample(m: usize, stream: &RngStream) -> Result<ComplexMatrix> {
    if m < 1 {
        return Err(Error::Domain("oracle needs at least one mode".into()));
    }
    let mut rng = stream.rng();
    let mut entries = Vec::with_capacity(m * m);
    for _ in 0..m * m {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        entries.push(Complex64::new(
            re * std::f64::consts::FRAC_1_SQRT_2,
            im * std::f64::consts::FRAC_1_SQRT_2,
        ));
    }
    let g = ComplexMatrix::from_entries(m, m, entries)?;
    let (mut q, r) = g.householder_qr()?;
    // Rescaling column j by the phase of r_jj makes the factorization the
    // unique one with positive diagonal, which inherits the Ginibre
    // invariance exactly.
    for j in 0..m {
        let d = r.get(j, j);
        let lambda = d / d.norm();
        for i in 0..m {
            let v = q.get(i, j);
            q.set(i, j, v * lambda);
        }
    }
    Ok(q)
}

/// Independent oracle draws on lanes 0..count.
pub fn oracle_ensemble(m: usize, seed: u64, count: usize) -> Result<Vec<ComplexMatrix>> {
    (0..count)
        .map(|k| haar_oracle_sample(m, &RngStream::new(seed, k as u32, 0, 0, StreamKind::Oracle)))
        .collect()
}

/// Dialled unitaries on lanes lane0..lane0+count. `zero_phases` suppresses
/// every external phase, which wrecks Haar-ness and serves as the battery's
/// negative control.
pub fn dialled_ensemble(
    m: usize,
    scheme: Scheme,
    convention: Convention,
    seed: u64,
    lane0: u32,
    count: usize,
    zero_phases: bool,
) -> Result<Vec<ComplexMatrix>> {
    (0..count)
        .map(|k| {
            let mut spec = sample_circuit_indexed(m, scheme, convention, seed, lane0 + k as u32)?;
            if zero_phases {
                for c in &mut spec.components {
                    c.phase_phi = 0.0;
                }
                for t in &mut spec.terminal_phases {
                    *t = 0.0;
                }
            }
            build_unitary(&spec)
        })
        .collect()
}

/// Cdf of |u_ij|^2 for an m x m Haar unitary: 1 - (1 - x)^(m-1).
pub fn entry_density_cdf(m: usize) -> Result<impl Fn(f64) -> f64> {
    if m < 2 {
        return Err(Error::Domain(
            "entry density needs at least two modes".into(),
        ));
    }
    let e = (m - 1) as i32;
    Ok(move |x: f64| 1.0 - (1.0 - x.clamp(0.0, 1.0)).powi(e))
}

pub fn pooled_entry_sq(ensemble: &[ComplexMatrix]) -> Vec<f64> {
    ensemble
        .iter()
        .flat_map(|u| u.entries().iter().map(|z| z.norm_sqr()))
        .collect()
}

pub fn entry_re(ensemble: &[ComplexMatrix], r: usize, c: usize) -> Vec<f64> {
    ensemble.iter().map(|u| u.get(r, c).re).collect()
}

pub fn entry_im(ensemble: &[ComplexMatrix], r: usize, c: usize) -> Vec<f64> {
    ensemble.iter().map(|u| u.get(r, c).im).collect()
}

fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn deviation_in_se(mean: f64, target: f64, se: f64) -> f64 {
    let dev = (mean - target).abs();
    if dev == 0.0 {
        return 0.0;
    }
    // A zero-variance miss is infinitely many standard errors out, but the
    // report must survive JSON, which holds no infinities. The cap is far
    // beyond any threshold, so pass/fail is unaffected.
    (dev / se).min(1e300)
}

fn check_ensemble(ensemble: &[ComplexMatrix], m: usize) -> Result<()> {
    if ensemble.len() < 1000 {
        return Err(Error::Domain(format!(
            "ensemble statistics need at least 1000 matrices, got {}",
            ensemble.len()
        )));
    }
    for u in ensemble {
        if u.rows() != m || u.cols() != m {
            return Err(Error::Shape(format!(
                "expected {m}x{m} matrices, found {}x{}",
                u.rows(),
                u.cols()
            )));
        }
    }
    Ok(())
}

/// Per-ensemble records: pooled |u_ij|^2 against the analytic cdf, the worst
/// per-entry second moment in standard errors, and |tr u|^2 against 1.
pub fn ensemble_records(
    name: &str,
    ensemble: &[ComplexMatrix],
    m: usize,
) -> Result<(Vec<TestRecord>, Vec<Vec<f64>>)> {
    check_ensemble(ensemble, m)?;
    let n = ensemble.len();
    let mut records = Vec::new();

    let pooled = pooled_entry_sq(ensemble);
    let cdf = entry_density_cdf(m)?;
    records.push(record(
        format!("{name}: pooled |u|^2 ks"),
        ks_one_sample(&pooled, cdf)?,
        ks_critical_one_sample(n * m * m),
    ));

    let mut table = vec![vec![0.0f64; m]; m];
    let mut worst = 0.0f64;
    let target = 1.0 / m as f64;
    let mut vals = vec![0.0f64; n];
    for i in 0..m {
        for j in 0..m {
            for (k, u) in ensemble.iter().enumerate() {
                vals[k] = u.get(i, j).norm_sqr();
            }
            let (mean, se) = mean_and_se(&vals);
            table[i][j] = mean;
            worst = worst.max(deviation_in_se(mean, target, se));
        }
    }
    records.push(record(
        format!("{name}: entry moment max dev"),
        worst,
        MOMENT_SE_LIMIT,
    ));

    let traces: Vec<f64> = ensemble
        .iter()
        .map(|u| {
            let mut t = Complex64::new(0.0, 0.0);
            for i in 0..m {
                t += u.get(i, i);
            }
            t.norm_sqr()
        })
        .collect();
    let (mean, se) = mean_and_se(&traces);
    records.push(record(
        format!("{name}: trace moment dev"),
        deviation_in_se(mean, 1.0, se),
        MOMENT_SE_LIMIT,
    ));

    Ok((records, table))
}

/// Two-sample comparisons between a pair of ensembles: pooled |u_ij|^2,
/// re u_00 and im u_01.
pub fn cross_records(
    name_a: &str,
    a: &[ComplexMatrix],
    name_b: &str,
    b: &[ComplexMatrix],
    m: usize,
) -> Result<Vec<TestRecord>> {
    check_ensemble(a, m)?;
    check_ensemble(b, m)?;
    let mut records = Vec::new();
    let pa = pooled_entry_sq(a);
    let pb = pooled_entry_sq(b);
    records.push(record(
        format!("{name_a} vs {name_b}: pooled |u|^2 ks"),
        ks_two_sample(&pa, &pb)?,
        ks_critical_two_sample(pa.len(), pb.len()),
    ));
    records.push(record(
        format!("{name_a} vs {name_b}: re u00 ks"),
        ks_two_sample(&entry_re(a, 0, 0), &entry_re(b, 0, 0))?,
        ks_critical_two_sample(a.len(), b.len()),
    ));
    records.push(record(
        format!("{name_a} vs {name_b}: im u01 ks"),
        ks_two_sample(&entry_im(a, 0, 1), &entry_im(b, 0, 1))?,
        ks_critical_two_sample(a.len(), b.len()),
    ));
    Ok(records)
}

#[derive(Debug, Clone, Copy)]
pub struct BatteryOptions {
    pub left_invariance: bool,
    /// Zero all external phases of the dialled ensembles (negative control).
    pub zero_phase_bias: bool,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        BatteryOptions {
            left_invariance: true,
            zero_phase_bias: false,
        }
    }
}

/// Left-invariance check: a fixed unitary times a dialled ensemble must be
/// indistinguishable from an independent dialled ensemble.
pub fn left_invariance_records(
    m: usize,
    scheme: Scheme,
    seed: u64,
    samples: usize,
) -> Result<Vec<TestRecord>> {
    let v = haar_oracle_sample(m, &RngStream::new(seed, 0, 0, 0, StreamKind::Invariance))?;
    let rotated: Vec<ComplexMatrix> = dialled_ensemble(
        m,
        scheme,
        Convention::Reflectivity,
        seed,
        samples as u32,
        samples,
        false,
    )?
    .into_iter()
    .map(|u| v.matmul(&u))
    .collect::<Result<_>>()?;
    let fresh = dialled_ensemble(
        m,
        scheme,
        Convention::Reflectivity,
        seed,
        2 * samples as u32,
        samples,
        false,
    )?;
    let crit = ks_critical_two_sample(samples, samples);
    Ok(vec![
        record(
            format!("left invariance ({scheme}): re (vu)00 ks"),
            ks_two_sample(&entry_re(&rotated, 0, 0), &entry_re(&fresh, 0, 0))?,
            crit,
        ),
        record(
            format!("left invariance ({scheme}): |(vu)00|^2 ks"),
            ks_two_sample(
                &pooled_sq_entry(&rotated, 0, 0),
                &pooled_sq_entry(&fresh, 0, 0),
            )?,
            crit,
        ),
    ])
}

fn pooled_sq_entry(ens: &[ComplexMatrix], r: usize, c: usize) -> Vec<f64> {
    ens.iter().map(|u| u.get(r, c).norm_sqr()).collect()
}

/// Run the full battery: per-ensemble records for each dialled scheme and
/// the oracle, pairwise cross comparisons, and the left-invariance check on
/// the first scheme.
pub fn run_battery(
    m: usize,
    samples: usize,
    schemes: &[Scheme],
    seed: u64,
    opts: BatteryOptions,
) -> Result<BatteryReport> {
    if m < 2 {
        return Err(Error::Domain("battery needs at least two modes".into()));
    }
    if samples < 1000 {
        return Err(Error::Domain(format!(
            "battery needs at least 1000 samples, got {samples}"
        )));
    }
    if schemes.is_empty() {
        return Err(Error::Domain("battery needs at least one scheme".into()));
    }

    let mut named: Vec<(String, Vec<ComplexMatrix>)> = Vec::new();
    for &scheme in schemes {
        named.push((
            scheme.to_string(),
            dialled_ensemble(
                m,
                scheme,
                Convention::Reflectivity,
                seed,
                0,
                samples,
                opts.zero_phase_bias,
            )?,
        ));
    }
    named.push(("oracle".into(), oracle_ensemble(m, seed, samples)?));

    let mut ensembles = Vec::new();
    for (name, ens) in &named {
        let (records, table) = ensemble_records(name, ens, m)?;
        ensembles.push(EnsembleReport {
            name: name.clone(),
            records,
            entry_moment_table: table,
        });
    }

    let mut cross = Vec::new();
    for i in 0..named.len() {
        for j in i + 1..named.len() {
            cross.extend(cross_records(
                &named[i].0,
                &named[i].1,
                &named[j].0,
                &named[j].1,
                m,
            )?);
        }
    }
    if opts.left_invariance {
        cross.extend(left_invariance_records(m, schemes[0], seed, samples)?);
    }

    let pass = ensembles
        .iter()
        .flat_map(|e| &e.records)
        .chain(&cross)
        .all(|r| r.pass);
    Ok(BatteryReport {
        m,
        samples,
        seed,
        ensembles,
        cross,
        pass,
    })
}

/// Quadrature check that every component marginal and the joint reflectivity
/// density integrate to one.
pub fn pdf_normalization_check(n_max: usize) -> Result<Vec<TestRecord>> {
    if n_max < 2 {
        return Err(Error::Domain(format!(
            "normalization check needs n_max >= 2, got {n_max}"
        )));
    }
    let mut records = Vec::new();
    for convention in Convention::ALL {
        for e in 1..n_max {
            let law = MarginalPdf {
                exponent_e: (e - 1) as u32,
                convention,
            };
            let (lo, hi) = law.support();
            let mass = adaptive_simpson(&|x| law.pdf(x), lo, hi, 1e-12);
            records.push(record(
                format!("{convention} marginal mass e={e}"),
                (mass - 1.0).abs(),
                PDF_MASS_TOL,
            ));
        }
    }
    // Joint density of a dialled unit vector factorizes, so its mass is a
    // product of one-dimensional integrals times (n-1)!.
    for n in 2..=n_max.min(8) {
        let mut mass = 1.0f64;
        for k in 1..n {
            let expo = (n - k - 1) as i32;
            mass *= adaptive_simpson(&move |r: f64| (1.0 - r).powi(expo), 0.0, 1.0, 1e-13);
        }
        let factorial: f64 = (1..n).map(|k| k as f64).product();
        mass *= factorial;
        records.push(record(
            format!("joint reflectivity mass n={n}"),
            (mass - 1.0).abs(),
            JOINT_MASS_TOL,
        ));
    }
    Ok(records)
}
