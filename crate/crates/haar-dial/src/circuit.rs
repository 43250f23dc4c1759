//! Mesh circuit model: schemes, component conventions, block synthesis.
//!
//! A circuit on m modes is a product of m blocks. Block n carries n-1 two-mode
//! couplers and n phase shifters and, fed from one basis input, can reach any
//! superposition of its n modes. The three schemes differ only in where the
//! couplers sit:
//!
//! * triangular-adjacent: block n couples neighbouring modes m-n .. m-1
//! * triangular-original: block n fans out from mode m-n to each mode below it
//! * rectangular: the same triangular-adjacent blocks re-tiled into a
//!   depth-m mesh, split into a bottom-anchored and a top-anchored family
//!
//! Blocks are applied in temporal order, so `build_unitary` returns
//! R_last ... R_2 R_1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::linalg::ComplexMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    TriangularAdjacent,
    TriangularOriginal,
    Rectangular,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::TriangularAdjacent,
        Scheme::TriangularOriginal,
        Scheme::Rectangular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::TriangularAdjacent => "triangular-adjacent",
            Scheme::TriangularOriginal => "triangular-original",
            Scheme::Rectangular => "rectangular",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scheme> {
        match s {
            "triangular-adjacent" => Ok(Scheme::TriangularAdjacent),
            "triangular-original" => Ok(Scheme::TriangularOriginal),
            "rectangular" => Ok(Scheme::Rectangular),
            other => Err(Error::Validation(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Component value is the reflectivity r in [0, 1].
    Reflectivity,
    /// Component value is the internal phase of a Mach-Zehnder built from
    /// two balanced beamsplitters, r = cos^2(theta/2).
    MziBeamsplitter,
    /// Component value is the internal phase of a Mach-Zehnder built from
    /// two balanced directional couplers, r = sin^2(theta/2).
    MziDirectionalCoupler,
}

impl Convention {
    pub const ALL: [Convention; 3] = [
        Convention::Reflectivity,
        Convention::MziBeamsplitter,
        Convention::MziDirectionalCoupler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Convention::Reflectivity => "reflectivity",
            Convention::MziBeamsplitter => "mzi-beamsplitter",
            Convention::MziDirectionalCoupler => "mzi-directional-coupler",
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Convention> {
        match s {
            "reflectivity" => Ok(Convention::Reflectivity),
            "mzi-beamsplitter" => Ok(Convention::MziBeamsplitter),
            "mzi-directional-coupler" => Ok(Convention::MziDirectionalCoupler),
            other => Err(Error::Validation(format!("unknown convention '{other}'"))),
        }
    }
}

/// One two-mode coupler: the i-th component of block n, its dialled value
/// (reflectivity or internal phase) and the phase shifter paired with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParam {
    #[serde(rename = "n")]
    pub block_n: usize,
    #[serde(rename = "i")]
    pub index_i: usize,
    pub value: f64,
    #[serde(rename = "phi")]
    pub phase_phi: f64,
}

/// A fully dialled circuit. Components are stored in temporal block order
/// with index_i ascending inside each block. `terminal_phases[j]` is the
/// anchor-mode phase of the block with n = modes - j, so blocks of every
/// size contribute exactly one entry and the total phase count is
/// m (m + 1) / 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub modes: usize,
    pub scheme: Scheme,
    pub convention: Convention,
    pub seed: Option<u64>,
    pub components: Vec<ComponentParam>,
    pub terminal_phases: Vec<f64>,
}

/// Number of couplers in an m-mode circuit.
pub fn component_count(m: usize) -> usize {
    m * (m - 1) / 2
}

/// Blocks in the order they are applied to the input.
pub fn block_order(m: usize, scheme: Scheme) -> Vec<usize> {
    match scheme {
        Scheme::TriangularAdjacent | Scheme::TriangularOriginal => (1..=m).collect(),
        Scheme::Rectangular => {
            // Bottom-anchored family first (sizes sharing the parity of m,
            // ascending), then the top-anchored family descending.
            let bottom = (1..=m).filter(|n| n % 2 == m % 2);
            let top = (1..=m).rev().filter(|n| n % 2 != m % 2);
            bottom.chain(top).collect()
        }
    }
}

/// First mode touched by block n.
pub fn block_anchor(m: usize, n: usize, scheme: Scheme) -> usize {
    match scheme {
        Scheme::TriangularAdjacent | Scheme::TriangularOriginal => m - n,
        Scheme::Rectangular => {
            if n % 2 == m % 2 {
                m - n
            } else {
                0
            }
        }
    }
}

/// Mode pair coupled by component i of block n.
pub fn component_modes(m: usize, n: usize, i: usize, scheme: Scheme) -> (usize, usize) {
    let anchor = block_anchor(m, n, scheme);
    match scheme {
        Scheme::TriangularOriginal => (anchor, anchor + i),
        _ => (anchor + i - 1, anchor + i),
    }
}

/// Component labels (n, i) in canonical storage order.
pub fn canonical_component_labels(m: usize, scheme: Scheme) -> Vec<(usize, usize)> {
    let mut labels = Vec::with_capacity(component_count(m));
    for n in block_order(m, scheme) {
        for i in 1..n {
            labels.push((n, i));
        }
    }
    labels
}

/// 2x2 entries [g00, g01, g10, g11] of a component gate.
pub(crate) fn gate_entries(value: f64, convention: Convention) -> Result<[Complex64; 4]> {
    match convention {
        Convention::Reflectivity => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Domain(format!(
                    "reflectivity must lie in [0, 1], got {value}"
                )));
            }
            let sr = value.sqrt();
            let st = (1.0 - value).sqrt();
            Ok([
                Complex64::new(sr, 0.0),
                Complex64::new(st, 0.0),
                Complex64::new(st, 0.0),
                Complex64::new(-sr, 0.0),
            ])
        }
        Convention::MziBeamsplitter => {
            check_theta(value)?;
            let e = Complex64::from_polar(1.0, value);
            let one = Complex64::new(1.0, 0.0);
            Ok([
                0.5 * (e + one),
                0.5 * (e - one),
                0.5 * (e - one),
                0.5 * (e + one),
            ])
        }
        Convention::MziDirectionalCoupler => {
            check_theta(value)?;
            let e = Complex64::from_polar(1.0, value);
            let one = Complex64::new(1.0, 0.0);
            let i = Complex64::new(0.0, 1.0);
            Ok([
                0.5 * (e - one),
                0.5 * i * (e + one),
                0.5 * i * (e + one),
                0.5 * (one - e),
            ])
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!(
            "internal phase must lie in [0, pi], got {theta}"
        )));
    }
    Ok(())
}

/// The 2x2 unitary a single component implements.
pub fn component_gate(param: &ComponentParam, convention: Convention) -> Result<ComplexMatrix> {
    let g = gate_entries(param.value, convention)?;
    ComplexMatrix::from_entries(2, 2, g.to_vec())
}

/// Place a 2x2 gate on modes (a, b) of an m-mode identity.
pub fn embed_two_mode(
    gate: &ComplexMatrix,
    mode_a: usize,
    mode_b: usize,
    m: usize,
) -> Result<ComplexMatrix> {
    if gate.rows() != 2 || gate.cols() != 2 {
        return Err(Error::Shape(format!(
            "embedding needs a 2x2 gate, got {}x{}",
            gate.rows(),
            gate.cols()
        )));
    }
    if mode_a >= m || mode_b >= m || mode_a == mode_b {
        return Err(Error::Domain(format!(
            "mode pair ({mode_a}, {mode_b}) invalid for {m} modes"
        )));
    }
    let mut u = ComplexMatrix::identity(m);
    u.set(mode_a, mode_a, gate.get(0, 0));
    u.set(mode_a, mode_b, gate.get(0, 1));
    u.set(mode_b, mode_a, gate.get(1, 0));
    u.set(mode_b, mode_b, gate.get(1, 1));
    Ok(u)
}

fn apply_gate_rows(u: &mut ComplexMatrix, g: &[Complex64; 4], a: usize, b: usize) {
    for c in 0..u.cols() {
        let xa = u.get(a, c);
        let xb = u.get(b, c);
        u.set(a, c, g[0] * xa + g[1] * xb);
        u.set(b, c, g[2] * xa + g[3] * xb);
    }
}

fn apply_phase_row(u: &mut ComplexMatrix, mode: usize, phi: f64) {
    let f = Complex64::from_polar(1.0, phi);
    for c in 0..u.cols() {
        let v = u.get(mode, c);
        u.set(mode, c, f * v);
    }
}

/// Build block n as an m x m unitary: the coupler cascade followed by the
/// phase layer. `phases[0]` sits on the anchor mode, `phases[i]` on the mode
/// component i feeds.
pub fn build_block(
    n: usize,
    params: &[ComponentParam],
    phases: &[f64],
    m: usize,
    scheme: Scheme,
    convention: Convention,
) -> Result<ComplexMatrix> {
    if n < 1 || n > m {
        return Err(Error::Domain(format!(
            "block size {n} out of range for {m} modes"
        )));
    }
    if params.len() != n - 1 {
        return Err(Error::Shape(format!(
            "block {n} needs {} components, got {}",
            n - 1,
            params.len()
        )));
    }
    if phases.len() != n {
        return Err(Error::Shape(format!(
            "block {n} needs {n} phases, got {}",
            phases.len()
        )));
    }
    let mut u = ComplexMatrix::identity(m);
    apply_block(&mut u, n, params, phases, m, scheme, convention)?;
    Ok(u)
}

fn apply_block(
    u: &mut ComplexMatrix,
    n: usize,
    params: &[ComponentParam],
    phases: &[f64],
    m: usize,
    scheme: Scheme,
    convention: Convention,
) -> Result<()> {
    let anchor = block_anchor(m, n, scheme);
    for (k, p) in params.iter().enumerate() {
        let g = gate_entries(p.value, convention)?;
        let (a, b) = component_modes(m, n, k + 1, scheme);
        apply_gate_rows(u, &g, a, b);
    }
    // The phase layer comes after the cascade; with the cascade fed from a
    // basis state its output amplitudes are nonnegative in the reflectivity
    // convention, and the phase layer alone sets their arguments.
    for (j, &phi) in phases.iter().enumerate() {
        apply_phase_row(u, anchor + j, phi);
    }
    Ok(())
}

impl CircuitSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.modes;
        if m < 1 {
            return Err(Error::Validation("mode count must be at least 1".into()));
        }
        if self.components.len() != component_count(m) {
            return Err(Error::Validation(format!(
                "expected {} components for {} modes, got {}",
                component_count(m),
                m,
                self.components.len()
            )));
        }
        if self.terminal_phases.len() != m {
            return Err(Error::Validation(format!(
                "expected {} terminal phases, got {}",
                m,
                self.terminal_phases.len()
            )));
        }
        let labels = canonical_component_labels(m, self.scheme);
        for (p, &(n, i)) in self.components.iter().zip(&labels) {
            if p.block_n != n || p.index_i != i {
                return Err(Error::Validation(format!(
                    "component labelled (n={}, i={}) where (n={}, i={}) belongs; \
                     components must follow temporal block order",
                    p.block_n, p.index_i, n, i
                )));
            }
            if !p.value.is_finite() || !p.phase_phi.is_finite() {
                return Err(Error::Validation(format!(
                    "component (n={n}, i={i}) has a non-finite parameter"
                )));
            }
            match self.convention {
                Convention::Reflectivity => {
                    if !(0.0..=1.0).contains(&p.value) {
                        return Err(Error::Validation(format!(
                            "component (n={n}, i={i}) reflectivity {} outside [0, 1]",
                            p.value
                        )));
                    }
                }
                _ => {
                    if !(0.0..=std::f64::consts::PI).contains(&p.value) {
                        return Err(Error::Validation(format!(
                            "component (n={n}, i={i}) internal phase {} outside [0, pi]",
                            p.value
                        )));
                    }
                }
            }
        }
        for &phi in &self.terminal_phases {
            if !phi.is_finite() {
                return Err(Error::Validation("non-finite terminal phase".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        jsonfmt::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<CircuitSpec> {
        let spec: CircuitSpec = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("circuit json: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Blocks of a validated circuit in temporal order, paired with their
/// component slices. Relies on canonical component ordering.
pub(crate) fn block_slices(spec: &CircuitSpec) -> Vec<(usize, &[ComponentParam])> {
    let mut out = Vec::new();
    let mut cursor = 0;
    for n in block_order(spec.modes, spec.scheme) {
        let k = n - 1;
        out.push((n, &spec.components[cursor..cursor + k]));
        cursor += k;
    }
    out
}

/// Multiply out the whole circuit.
pub fn build_unitary(spec: &CircuitSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let m = spec.modes;
    let mut u = ComplexMatrix::identity(m);
    for (n, comps) in block_slices(spec) {
        let mut phases = Vec::with_capacity(n);
        phases.push(spec.terminal_phases[m - n]);
        phases.extend(comps.iter().map(|p| p.phase_phi));
        apply_block(&mut u, n, comps, &phases, m, spec.scheme, spec.convention)?;
    }
    Ok(u)
}

/// Physical slot of one coupler in the rectangular mesh. Row rho couples
/// modes (rho - 1, rho); columns are applied left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshPosition {
    pub block_n: usize,
    pub index_i: usize,
    pub row: usize,
    pub col: usize,
}

/// Rectangular-mesh coordinates for every coupler, in temporal order.
/// The two block families interleave into a depth-m mesh where each column
/// holds couplers on disjoint mode pairs.
pub fn clements_layout(m: usize) -> Result<Vec<MeshPosition>> {
    if m < 2 {
        return Err(Error::Domain(format!(
            "rectangular layout needs at least 2 modes, got {m}"
        )));
    }
    let mut out = Vec::with_capacity(component_count(m));
    for n in block_order(m, Scheme::Rectangular) {
        let bottom = n % 2 == m % 2;
        for i in 1..n {
            let (row, col) = if bottom {
                (m - n + i, i)
            } else {
                (i, m - n + 1 + i)
            };
            out.push(MeshPosition {
                block_n: n,
                index_i: i,
                row,
                col,
            });
        }
    }
    Ok(out)
}
