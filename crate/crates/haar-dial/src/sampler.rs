//! Direct dialling of mesh parameters.
//!
//! Each component value is an independent inverse-transform draw from its own
//! closed-form marginal, so a circuit is sampled in one pass with no matrix
//! decomposition. Every draw owns a dedicated counter-keyed ChaCha8 stream;
//! the value of component (n, i) depends only on (seed, lane, n, i), never on
//! evaluation order or thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use crate::circuit::{block_order, CircuitSpec, ComponentParam, Convention, Scheme};
use crate::error::{Error, Result};

const TWO_POW_NEG53: f64 = 1.0 / 9007199254740992.0;

/// Domain-separation tag baked into every stream key.
const STREAM_TAG: &[u8; 8] = b"HAARDIAL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Component value (reflectivity or internal phase).
    Value,
    /// External phase shifter; index 0 addresses a block's terminal phase.
    Phase,
    /// Ginibre draws for the QR reference sampler.
    Oracle,
    /// Perturbation noise for coverage estimates.
    Coverage,
    /// Evaluation points for Jacobian checks.
    Jacobian,
    /// Fixed unitary for the left-invariance test.
    Invariance,
}

impl StreamKind {
    fn code(self) -> u8 {
        match self {
            StreamKind::Value => 0,
            StreamKind::Phase => 1,
            StreamKind::Oracle => 2,
            StreamKind::Coverage => 3,
            StreamKind::Jacobian => 4,
            StreamKind::Invariance => 5,
        }
    }
}

/// Address of one random stream. The full address is packed into the ChaCha8
/// key, so distinct addresses give statistically independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub lane: u32,
    pub block_n: u16,
    pub index_i: u16,
    pub kind: StreamKind,
}

impl RngStream {
    pub fn new(seed: u64, lane: u32, block_n: usize, index_i: usize, kind: StreamKind) -> Self {
        RngStream {
            seed,
            lane,
            block_n: block_n.try_into().expect("block index fits in u16"),
            index_i: index_i.try_into().expect("component index fits in u16"),
            kind,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..12].copy_from_slice(&self.lane.to_le_bytes());
        key[12..14].copy_from_slice(&self.block_n.to_le_bytes());
        key[14..16].copy_from_slice(&self.index_i.to_le_bytes());
        key[16] = self.kind.code();
        key[17..25].copy_from_slice(STREAM_TAG);
        ChaCha8Rng::from_seed(key)
    }
}

/// Uniform draw strictly inside (0, 1). The open interval keeps inverse-cdf
/// outputs off the boundary of their support.
pub fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * TWO_POW_NEG53
}

/// Uniform draw in [0, 1).
pub fn unit_half_open(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * TWO_POW_NEG53
}

/// Marginal law of one component value. `exponent_e` is the polynomial degree
/// of the reflectivity density, one less than the cdf exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarginalPdf {
    pub exponent_e: u32,
    pub convention: Convention,
}

impl MarginalPdf {
    pub fn support(&self) -> (f64, f64) {
        match self.convention {
            Convention::Reflectivity => (0.0, 1.0),
            _ => (0.0, std::f64::consts::PI),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let q = (self.exponent_e + 1) as f64;
        match self.convention {
            Convention::Reflectivity => q * (1.0 - x).powi(self.exponent_e as i32),
            Convention::MziBeamsplitter => {
                let h = 0.5 * x;
                q * h.sin().powi(2 * self.exponent_e as i32 + 1) * h.cos()
            }
            Convention::MziDirectionalCoupler => {
                let h = 0.5 * x;
                q * h.cos().powi(2 * self.exponent_e as i32 + 1) * h.sin()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let q = self.exponent_e as i32 + 1;
        match self.convention {
            Convention::Reflectivity => 1.0 - (1.0 - x).powi(q),
            Convention::MziBeamsplitter => (0.5 * x).sin().powi(2 * q),
            Convention::MziDirectionalCoupler => 1.0 - (0.5 * x).cos().powi(2 * q),
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let q = (self.exponent_e + 1) as f64;
        match self.convention {
            Convention::Reflectivity => 1.0 - (1.0 - u).powf(1.0 / q),
            Convention::MziBeamsplitter => 2.0 * u.powf(0.5 / q).asin(),
            Convention::MziDirectionalCoupler => 2.0 * (1.0 - u).powf(0.5 / q).acos(),
        }
    }
}

fn check_block_component(n: usize, i: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("block size must be at least 2, got {n}")));
    }
    if i < 1 || i >= n {
        return Err(Error::Domain(format!(
            "component index {i} outside 1..{} for block {n}",
            n - 1
        )));
    }
    Ok(())
}

/// Density of the reflectivity marginal for component i of block n,
/// (n - i) (1 - r)^(n - i - 1).
pub fn reflectivity_pdf(n: usize, i: usize, r: f64) -> Result<f64> {
    check_block_component(n, i)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("reflectivity {r} outside [0, 1]")));
    }
    let e = (n - i) as f64;
    Ok(e * (1.0 - r).powi((n - i - 1) as i32))
}

/// Draw the reflectivity of component i of block n from its marginal.
pub fn sample_reflectivity(n: usize, i: usize, stream: &RngStream) -> Result<f64> {
    check_block_component(n, i)?;
    let u = unit_open(&mut stream.rng());
    let e = (n - i) as f64;
    Ok(1.0 - u.powf(1.0 / e))
}

/// Draw the internal phase of component i of block n for an MZI convention.
pub fn sample_theta(n: usize, i: usize, convention: Convention, stream: &RngStream) -> Result<f64> {
    check_block_component(n, i)?;
    let u = unit_open(&mut stream.rng());
    let e = (n - i) as f64;
    match convention {
        Convention::MziBeamsplitter => Ok(2.0 * u.powf(0.5 / e).asin()),
        Convention::MziDirectionalCoupler => Ok(2.0 * u.powf(0.5 / e).acos()),
        Convention::Reflectivity => Err(Error::Domain(
            "internal-phase sampling needs an mzi convention".into(),
        )),
    }
}

/// Draw an external phase uniformly from [0, 2 pi).
pub fn sample_phase(stream: &RngStream) -> f64 {
    TAU * unit_half_open(&mut stream.rng())
}

/// Positions 1..n-1 of block n listed in rectangular-mesh path order: for
/// even m odd labels descend then even labels ascend, for odd m the parities
/// swap roles. The result maps path position k to the label s[k-1].
pub fn clements_sequence(n: usize, m: usize) -> Result<Vec<usize>> {
    if n < 2 || n > m {
        return Err(Error::Domain(format!(
            "sequence needs 2 <= n <= m, got n={n}, m={m}"
        )));
    }
    let descending_odd = m % 2 == 0;
    let desc = (1..n).rev().filter(|k| (k % 2 == 1) == descending_odd);
    let asc = (1..n).filter(|k| (k % 2 == 1) != descending_odd);
    Ok(desc.chain(asc).collect())
}

/// Cdf exponent of the value marginal for component i of block n. For the
/// triangular schemes this is n - i; the rectangular re-tiling permutes the
/// exponents within each block along the mesh path.
pub fn marginal_exponent(m: usize, scheme: Scheme, n: usize, i: usize) -> Result<usize> {
    check_block_component(n, i)?;
    if n > m {
        return Err(Error::Domain(format!("block {n} too large for {m} modes")));
    }
    match scheme {
        Scheme::TriangularAdjacent | Scheme::TriangularOriginal => Ok(n - i),
        Scheme::Rectangular => {
            let seq = clements_sequence(n, m)?;
            Ok(n - seq[i - 1])
        }
    }
}

/// Map a uniform draw to a component value. The triangular-original cascade
/// consumes amplitude in the opposite mode order, so its values follow the
/// mirrored law (r -> 1 - r, theta -> pi - theta).
pub(crate) fn dial_value(u: f64, exponent: usize, scheme: Scheme, convention: Convention) -> f64 {
    let e = exponent as f64;
    let mirrored = scheme == Scheme::TriangularOriginal;
    match convention {
        Convention::Reflectivity => {
            if mirrored {
                u.powf(1.0 / e)
            } else {
                1.0 - u.powf(1.0 / e)
            }
        }
        Convention::MziBeamsplitter => {
            if mirrored {
                2.0 * u.powf(0.5 / e).acos()
            } else {
                2.0 * u.powf(0.5 / e).asin()
            }
        }
        Convention::MziDirectionalCoupler => {
            if mirrored {
                2.0 * u.powf(0.5 / e).asin()
            } else {
                2.0 * u.powf(0.5 / e).acos()
            }
        }
    }
}

/// Dial a full circuit. Equivalent to `sample_circuit_indexed` with lane 0.
pub fn sample_circuit(
    m: usize,
    scheme: Scheme,
    convention: Convention,
    seed: u64,
) -> Result<CircuitSpec> {
    sample_circuit_indexed(m, scheme, convention, seed, 0)
}

/// Dial circuit `lane` of a seed's ensemble. Lanes are independent, so an
/// ensemble can be generated in any order or split across processes.
pub fn sample_circuit_indexed(
    m: usize,
    scheme: Scheme,
    convention: Convention,
    seed: u64,
    lane: u32,
) -> Result<CircuitSpec> {
    if m < 1 {
        return Err(Error::Domain("mode count must be at least 1".into()));
    }
    let mut components = Vec::with_capacity(m * (m - 1) / 2);
    for n in block_order(m, scheme) {
        for i in 1..n {
            let exponent = marginal_exponent(m, scheme, n, i)?;
            let u = unit_open(&mut RngStream::new(seed, lane, n, i, StreamKind::Value).rng());
            let value = dial_value(u, exponent, scheme, convention);
            let phase_phi = sample_phase(&RngStream::new(seed, lane, n, i, StreamKind::Phase));
            components.push(ComponentParam {
                block_n: n,
                index_i: i,
                value,
                phase_phi,
            });
        }
    }
    let terminal_phases = (0..m)
        .map(|j| sample_phase(&RngStream::new(seed, lane, m - j, 0, StreamKind::Phase)))
        .collect();
    Ok(CircuitSpec {
        modes: m,
        scheme,
        convention,
        seed: Some(seed),
        components,
        terminal_phases,
    })
}
