//! Compile 2^p-mode mesh circuits into qubit gate lists.
//!
//! Gate set: uncontrolled Hadamards on the last qubit, multi-controlled
//! phase rotations on the last qubit, and multi-controlled NOTs for routing.
//! Modes map to basis states big-endian, qubit 0 being the most significant
//! bit, so the final qubit splits the modes into adjacent pairs.
//!
//! Every emitted gate has determinant +1 on the full space (NOTs are paired
//! by route and unroute, Hadamards are paired inside each component), so the
//! compiled list cannot reproduce an arbitrary global phase. The compiler
//! instead lands exactly on the special-unitary representative
//! e^{-i delta / m} u with delta = arg det u folded into [0, 2 pi), which is
//! a deterministic function of u alone. Statistics of any single entry are
//! untouched by that choice.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::circuit::{
    block_anchor, block_slices, component_modes, gate_entries, CircuitSpec, Convention,
};
use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::linalg::ComplexMatrix;

/// Largest qubit count the dense simulator will expand.
const SIM_MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    /// Hadamard.
    H,
    /// Multi-controlled NOT.
    X,
    /// diag(e^{i phi}, e^{-i phi}) on the target.
    #[serde(rename = "PHI")]
    Phi,
    /// diag(e^{-i phi}, e^{i phi}) on the target.
    #[serde(rename = "PHIBAR")]
    PhiBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitGate {
    pub kind: GateKind,
    pub target: usize,
    pub controls: Vec<Control>,
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateList {
    pub qubits: usize,
    pub gates: Vec<QubitGate>,
}

impl GateList {
    pub fn validate(&self) -> Result<()> {
        for (idx, g) in self.gates.iter().enumerate() {
            if g.target >= self.qubits {
                return Err(Error::Validation(format!(
                    "gate {idx}: target {} outside {} qubits",
                    g.target, self.qubits
                )));
            }
            let mut seen = vec![false; self.qubits];
            for c in &g.controls {
                if c.qubit >= self.qubits || c.qubit == g.target {
                    return Err(Error::Validation(format!(
                        "gate {idx}: control on invalid qubit {}",
                        c.qubit
                    )));
                }
                if seen[c.qubit] {
                    return Err(Error::Validation(format!(
                        "gate {idx}: duplicate control on qubit {}",
                        c.qubit
                    )));
                }
                seen[c.qubit] = true;
                if c.value > 1 {
                    return Err(Error::Validation(format!(
                        "gate {idx}: control value {} is not a bit",
                        c.value
                    )));
                }
            }
            match g.kind {
                GateKind::Phi | GateKind::PhiBar => match g.phi {
                    Some(v) if v.is_finite() => {}
                    _ => {
                        return Err(Error::Validation(format!(
                            "gate {idx}: phase gate needs a finite angle"
                        )))
                    }
                },
                GateKind::H | GateKind::X => {
                    if g.phi.is_some() {
                        return Err(Error::Validation(format!(
                            "gate {idx}: {:?} takes no angle",
                            g.kind
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        jsonfmt::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<GateList> {
        let list: GateList = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("gate list json: {e}")))?;
        list.validate()?;
        Ok(list)
    }
}

/// Big-endian bit pattern of a mode index.
pub fn mode_to_bits(mode: usize, p: usize) -> Result<Vec<u8>> {
    if mode >= (1usize << p) {
        return Err(Error::Domain(format!(
            "mode {mode} outside the {} states of {p} qubits",
            1usize << p
        )));
    }
    Ok((0..p).map(|q| bit_of(mode, q, p)).collect())
}

#[inline]
fn bit_of(state: usize, qubit: usize, p: usize) -> u8 {
    ((state >> (p - 1 - qubit)) & 1) as u8
}

/// Number of basis-state flips needed to park mode b next to mode a.
pub fn routing_flips(mode_a: usize, mode_b: usize) -> u32 {
    ((mode_b ^ (mode_a ^ 1)) as u64).count_ones()
}

/// Multiply the gates out into a dense 2^p x 2^p matrix, applying them in
/// list order.
pub fn gates_to_unitary(list: &GateList) -> Result<ComplexMatrix> {
    list.validate()?;
    if list.qubits > SIM_MAX_QUBITS {
        return Err(Error::Domain(format!(
            "dense simulation capped at {SIM_MAX_QUBITS} qubits, got {}",
            list.qubits
        )));
    }
    let p = list.qubits;
    let dim = 1usize << p;
    let mut u = ComplexMatrix::identity(dim);
    for g in &list.gates {
        apply_gate(&mut u, g, p);
    }
    Ok(u)
}

fn apply_gate(u: &mut ComplexMatrix, g: &QubitGate, p: usize) {
    let dim = u.rows();
    let tmask = 1usize << (p - 1 - g.target);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (m00, m01, m10, m11) = match g.kind {
        GateKind::H => (
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
        ),
        GateKind::X => (
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ),
        GateKind::Phi => {
            let f = Complex64::from_polar(1.0, g.phi.unwrap());
            (f, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), f.conj())
        }
        GateKind::PhiBar => {
            let f = Complex64::from_polar(1.0, g.phi.unwrap());
            (f.conj(), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), f)
        }
    };
    for s0 in 0..dim {
        if s0 & tmask != 0 {
            continue;
        }
        let satisfied = g
            .controls
            .iter()
            .all(|c| bit_of(s0, c.qubit, p) == c.value);
        if !satisfied {
            continue;
        }
        let s1 = s0 | tmask;
        for col in 0..dim {
            let x0 = u.get(s0, col);
            let x1 = u.get(s1, col);
            u.set(s0, col, m00 * x0 + m01 * x1);
            u.set(s1, col, m10 * x0 + m11 * x1);
        }
    }
}

/// Whether a = c b for some unit scalar c, to entrywise tolerance `tol`.
pub fn equal_up_to_global_phase(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> Result<bool> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "cannot compare {}x{} with {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut anchor = 0usize;
    let mut best = 0.0f64;
    for (k, z) in b.entries().iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            anchor = k;
        }
    }
    if best == 0.0 {
        return Ok(a.entries().iter().all(|z| z.norm() <= tol));
    }
    let ratio = a.entries()[anchor] / b.entries()[anchor];
    if ratio.norm() == 0.0 {
        return Ok(false);
    }
    let c = ratio / ratio.norm();
    let worst = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x - c * y).norm())
        .fold(0.0f64, f64::max);
    Ok(worst <= tol)
}

/// Qubits to flip to walk `from` into `to`: the final qubit first when its
/// bit differs, then the differing prefix bits in ascending order. With
/// `to` = a ^ 1 this path never crosses mode a, because every intermediate
/// state already carries the flipped final bit.
fn route_steps(p: usize, from: usize, to: usize) -> Vec<usize> {
    let mut steps = Vec::new();
    if from == to {
        return steps;
    }
    if bit_of(from, p - 1, p) != bit_of(to, p - 1, p) {
        steps.push(p - 1);
    }
    for q in 0..p - 1 {
        if bit_of(from, q, p) != bit_of(to, q, p) {
            steps.push(q);
        }
    }
    steps
}

struct Compiler {
    p: usize,
    dim: usize,
    /// Pending per-mode phase: everything compiled so far equals
    /// diag(e^{i mu}) times the emitted gates.
    mu: Vec<f64>,
    /// Determinant angle of everything folded so far.
    det_angle: f64,
    gates: Vec<QubitGate>,
}

impl Compiler {
    fn new(p: usize) -> Self {
        let dim = 1usize << p;
        Compiler {
            p,
            dim,
            mu: vec![0.0; dim],
            det_angle: 0.0,
            gates: Vec::new(),
        }
    }

    fn fold_phase(&mut self, mode: usize, phi: f64) {
        self.mu[mode] += phi;
        self.det_angle += phi;
    }

    fn push_h(&mut self) {
        self.gates.push(QubitGate {
            kind: GateKind::H,
            target: self.p - 1,
            controls: Vec::new(),
            phi: None,
        });
    }

    /// Phase gate on the final qubit, controlled on the pair prefix.
    /// Zero angles are identities and are not emitted.
    fn push_phase(&mut self, kind: GateKind, prefix: usize, phi: f64) {
        if phi == 0.0 {
            return;
        }
        let controls = (0..self.p.saturating_sub(1))
            .map(|q| Control {
                qubit: q,
                value: ((prefix >> (self.p - 2 - q)) & 1) as u8,
            })
            .collect();
        self.gates.push(QubitGate {
            kind,
            target: self.p - 1,
            controls,
            phi: Some(phi),
        });
    }

    fn mcx_full(&self, state: usize, qubit: usize) -> QubitGate {
        let controls = (0..self.p)
            .filter(|&q| q != qubit)
            .map(|q| Control {
                qubit: q,
                value: bit_of(state, q, self.p),
            })
            .collect();
        QubitGate {
            kind: GateKind::X,
            target: qubit,
            controls,
            phi: None,
        }
    }

    /// Emit the flip chain moving `from` to `to`; returns the emitted gates
    /// so the caller can replay them in reverse. Fully-controlled NOTs are
    /// involutions, so the reversed chain is the exact inverse.
    fn route(&mut self, from: usize, to: usize) -> Vec<QubitGate> {
        let mut emitted = Vec::new();
        let mut cur = from;
        for q in route_steps(self.p, from, to) {
            let g = self.mcx_full(cur, q);
            emitted.push(g.clone());
            self.gates.push(g);
            cur ^= 1usize << (self.p - 1 - q);
        }
        debug_assert_eq!(cur, to);
        emitted
    }

    fn unroute(&mut self, emitted: Vec<QubitGate>) {
        for g in emitted.into_iter().rev() {
            self.gates.push(g);
        }
    }

    /// Compile one two-mode gate w acting on modes (a, b), with pending
    /// phases folded in. `det_inc` is the determinant angle of w.
    fn apply_component(&mut self, a: usize, b: usize, w: [Complex64; 4], det_inc: f64) {
        self.det_angle += det_inc;
        let atilde = a ^ 1;
        let da = Complex64::from_polar(1.0, self.mu[a]);
        let db = Complex64::from_polar(1.0, self.mu[b]);
        // Columns act on input modes, so each column absorbs its pending.
        let mut m = [w[0] * da, w[1] * db, w[2] * da, w[3] * db];
        if a % 2 == 1 {
            // Slot basis lists the even state first; conjugate by the swap.
            m = [m[3], m[2], m[1], m[0]];
        }
        let det = m[0] * m[3] - m[1] * m[2];
        let eta = 0.5 * det.arg();
        let corr = Complex64::from_polar(1.0, -eta);
        let s = [m[0] * corr, m[1] * corr, m[2] * corr, m[3] * corr];
        // s = e^{i alpha sz} e^{i tau sx} e^{i beta sz}; arg(0) = 0 makes the
        // formulas valid on the axis cases too.
        let tau = s[1].norm().atan2(s[0].norm());
        let alpha = 0.5 * (s[0].arg() + s[1].arg() - FRAC_PI_2);
        let beta = 0.5 * (s[0].arg() - s[1].arg() + FRAC_PI_2);

        let routed = if b == atilde {
            Vec::new()
        } else {
            self.route(b, atilde)
        };
        let prefix = a >> 1;
        self.push_phase(GateKind::Phi, prefix, beta);
        if tau != 0.0 {
            self.push_h();
            self.push_phase(GateKind::Phi, prefix, tau);
            self.push_h();
        }
        self.push_phase(GateKind::Phi, prefix, alpha);
        self.unroute(routed);
        self.mu[a] = eta;
        self.mu[b] = eta;
    }

    /// Realize the pending diagonal exactly, up to the canonical global
    /// phase. Traceless pair phases are plain controlled rotations; the
    /// pair residuals are transferred onto pair 0 with counterweighted
    /// rotations, shifted so the counterweights cancel against pair 0's own
    /// residual and the determinant lands on +1.
    fn flush(&mut self) {
        if self.p == 0 {
            return;
        }
        let pairs = self.dim / 2;
        for y in 0..pairs {
            let gamma = 0.5 * (self.mu[2 * y] - self.mu[2 * y + 1]);
            self.push_phase(GateKind::Phi, y, gamma);
        }
        let rho: Vec<f64> = (0..pairs)
            .map(|y| 0.5 * (self.mu[2 * y] + self.mu[2 * y + 1]))
            .collect();
        let rho_bar = rho.iter().sum::<f64>() / pairs as f64;
        let delta = self.det_angle.rem_euclid(TAU);
        let nu_target = delta / self.dim as f64;
        // The determinant constraint makes rho_bar - nu_target an exact
        // multiple of 2 pi / m, up to accumulated rounding.
        let jf = (rho_bar - nu_target) * self.dim as f64 / TAU;
        let j = jf.round() as i64;
        debug_assert!(
            (jf - j as f64).abs() < 1e-3,
            "determinant bookkeeping drifted: {jf}"
        );
        let c = TAU * j as f64 / self.dim as f64;
        for y in 1..pairs {
            let q = rho[y] - rho_bar + c;
            if q == 0.0 {
                continue;
            }
            // Phase q onto mode 2y, counterweight onto mode 0. The route
            // parks 2y in the odd slot of pair 0 and never disturbs mode 0.
            let r = self.route(2 * y, 1);
            self.push_phase(GateKind::PhiBar, 0, q);
            self.unroute(r);
            // Same trade for mode 2y+1 against mode 1.
            let r = self.route(2 * y + 1, 0);
            self.push_phase(GateKind::Phi, 0, q);
            self.unroute(r);
        }
        if j.rem_euclid(2) == 1 {
            self.push_phase(GateKind::Phi, 0, PI);
        }
    }
}

fn check_power_of_two(m: usize) -> Result<usize> {
    if !m.is_power_of_two() {
        return Err(Error::Domain(format!(
            "qubit compilation needs a power-of-two mode count, got {m}"
        )));
    }
    Ok(m.trailing_zeros() as usize)
}

/// Compile a dialled circuit. The gate list reproduces the circuit unitary
/// up to the canonical global phase: `gates_to_unitary` of the result equals
/// the built matrix once that phase is divided out.
pub fn compile_circuit(spec: &CircuitSpec) -> Result<GateList> {
    spec.validate()?;
    if spec.convention == Convention::Reflectivity {
        return Err(Error::Domain(
            "qubit compilation needs an mzi convention".into(),
        ));
    }
    let p = check_power_of_two(spec.modes)?;
    let m = spec.modes;
    let mut compiler = Compiler::new(p);
    for (n, comps) in block_slices(spec) {
        let anchor = block_anchor(m, n, spec.scheme);
        for (k, comp) in comps.iter().enumerate() {
            let w = gate_entries(comp.value, spec.convention)?;
            let (a, b) = component_modes(m, n, k + 1, spec.scheme);
            compiler.apply_component(a, b, w, comp.value);
        }
        compiler.fold_phase(anchor, spec.terminal_phases[m - n]);
        for (k, comp) in comps.iter().enumerate() {
            compiler.fold_phase(anchor + k + 1, comp.phase_phi);
        }
    }
    compiler.flush();
    Ok(GateList {
        qubits: p,
        gates: compiler.gates,
    })
}

/// Compile a single component: the mzi-beamsplitter gate with internal phase
/// `theta` on modes (a, b), followed by the external phase `phi` on mode b.
pub fn compile_component(
    mode_a: usize,
    mode_b: usize,
    theta: f64,
    phi: f64,
    p: usize,
) -> Result<GateList> {
    if p < 1 {
        return Err(Error::Domain("need at least one qubit".into()));
    }
    let dim = 1usize << p;
    if mode_a >= mode_b || mode_b >= dim {
        return Err(Error::Domain(format!(
            "need mode_a < mode_b < {dim}, got ({mode_a}, {mode_b})"
        )));
    }
    if !phi.is_finite() {
        return Err(Error::Domain("external phase must be finite".into()));
    }
    let w = gate_entries(theta, Convention::MziBeamsplitter)?;
    let mut compiler = Compiler::new(p);
    compiler.apply_component(mode_a, mode_b, w, theta);
    compiler.fold_phase(mode_b, phi);
    compiler.flush();
    Ok(GateList {
        qubits: p,
        gates: compiler.gates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{embed_two_mode, Scheme};
    use crate::sampler::sample_circuit;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mode_bits_are_big_endian() {
        assert_eq!(mode_to_bits(0, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(mode_to_bits(4, 3).unwrap(), vec![1, 0, 0]);
        assert_eq!(mode_to_bits(5, 3).unwrap(), vec![1, 0, 1]);
        assert!(mode_to_bits(8, 3).is_err());
    }

    #[test]
    fn simulator_handles_elementary_gates() {
        // X on the only qubit.
        let x = GateList {
            qubits: 1,
            gates: vec![QubitGate {
                kind: GateKind::X,
                target: 0,
                controls: vec![],
                phi: None,
            }],
        };
        let u = gates_to_unitary(&x).unwrap();
        assert_eq!(u.get(0, 1), c(1.0, 0.0));
        assert_eq!(u.get(1, 0), c(1.0, 0.0));

        // Controlled NOT swaps the two states with control bit set.
        let cnot = GateList {
            qubits: 2,
            gates: vec![QubitGate {
                kind: GateKind::X,
                target: 1,
                controls: vec![Control { qubit: 0, value: 1 }],
                phi: None,
            }],
        };
        let u = gates_to_unitary(&cnot).unwrap();
        assert_eq!(u.get(0, 0), c(1.0, 0.0));
        assert_eq!(u.get(1, 1), c(1.0, 0.0));
        assert_eq!(u.get(2, 3), c(1.0, 0.0));
        assert_eq!(u.get(3, 2), c(1.0, 0.0));
        assert_eq!(u.get(2, 2), c(0.0, 0.0));

        // Phase pair on the target, restricted by a zero-valued control.
        let phase = GateList {
            qubits: 2,
            gates: vec![QubitGate {
                kind: GateKind::PhiBar,
                target: 1,
                controls: vec![Control { qubit: 0, value: 0 }],
                phi: Some(0.4),
            }],
        };
        let u = gates_to_unitary(&phase).unwrap();
        assert!((u.get(0, 0) - Complex64::from_polar(1.0, -0.4)).norm() < 1e-15);
        assert!((u.get(1, 1) - Complex64::from_polar(1.0, 0.4)).norm() < 1e-15);
        assert_eq!(u.get(2, 2), c(1.0, 0.0));
        assert_eq!(u.get(3, 3), c(1.0, 0.0));
    }

    #[test]
    fn gate_list_validation_errors() {
        let bad_target = GateList {
            qubits: 1,
            gates: vec![QubitGate {
                kind: GateKind::X,
                target: 1,
                controls: vec![],
                phi: None,
            }],
        };
        assert!(bad_target.validate().is_err());
        let missing_angle = GateList {
            qubits: 1,
            gates: vec![QubitGate {
                kind: GateKind::Phi,
                target: 0,
                controls: vec![],
                phi: None,
            }],
        };
        assert!(missing_angle.validate().is_err());
        let angle_on_x = GateList {
            qubits: 1,
            gates: vec![QubitGate {
                kind: GateKind::X,
                target: 0,
                controls: vec![],
                phi: Some(1.0),
            }],
        };
        assert!(angle_on_x.validate().is_err());
        let dup_control = GateList {
            qubits: 3,
            gates: vec![QubitGate {
                kind: GateKind::X,
                target: 2,
                controls: vec![
                    Control { qubit: 0, value: 1 },
                    Control { qubit: 0, value: 0 },
                ],
                phi: None,
            }],
        };
        assert!(dup_control.validate().is_err());
    }

    #[test]
    fn global_phase_comparison() {
        let u = ComplexMatrix::identity(3);
        let mut v = ComplexMatrix::identity(3);
        let f = Complex64::from_polar(1.0, 1.2);
        for i in 0..3 {
            v.set(i, i, f);
        }
        assert!(equal_up_to_global_phase(&u, &v, 1e-12).unwrap());
        let mut w = ComplexMatrix::identity(3);
        w.set(0, 0, Complex64::from_polar(1.0, 0.5));
        assert!(!equal_up_to_global_phase(&u, &w, 1e-12).unwrap());
    }

    #[test]
    fn route_steps_count_and_avoidance() {
        // Path length is the bit distance to the pair slot.
        for p in 1..=4usize {
            let dim = 1usize << p;
            for a in 0..dim {
                for b in 0..dim {
                    if a == b {
                        continue;
                    }
                    let atilde = a ^ 1;
                    let steps = route_steps(p, b, atilde);
                    assert_eq!(steps.len() as u32, routing_flips(a, b), "a={a} b={b}");
                    // Walk the path; it must never cross a.
                    let mut cur = b;
                    for q in steps {
                        cur ^= 1usize << (p - 1 - q);
                        assert_ne!(cur, a, "path from {b} to {atilde} crossed {a}");
                    }
                    assert_eq!(cur, atilde);
                }
            }
        }
    }

    #[test]
    fn component_round_trips_on_small_registers() {
        for (a, b, p) in [
            (0usize, 1usize, 1usize),
            (0, 1, 2),
            (2, 3, 2),
            (0, 3, 2),
            (1, 2, 2),
            (3, 4, 3),
            (0, 7, 3),
            (2, 5, 3),
        ] {
            for (theta, phi) in [(1.1, 2.3), (0.0, 0.5), (std::f64::consts::PI, 1.0), (0.7, 0.0)]
            {
                let list = compile_component(a, b, theta, phi, p).unwrap();
                list.validate().unwrap();
                let compiled = gates_to_unitary(&list).unwrap();
                let w = gate_entries(theta, Convention::MziBeamsplitter).unwrap();
                let gate = ComplexMatrix::from_entries(2, 2, w.to_vec()).unwrap();
                let mut expect = embed_two_mode(&gate, a, b, 1 << p).unwrap();
                let f = Complex64::from_polar(1.0, phi);
                for col in 0..1 << p {
                    let v = expect.get(b, col);
                    expect.set(b, col, v * f);
                }
                assert!(
                    equal_up_to_global_phase(&compiled, &expect, 1e-10).unwrap(),
                    "a={a} b={b} p={p} theta={theta} phi={phi}"
                );
            }
        }
    }

    #[test]
    fn adjacent_pair_needs_no_routing() {
        let list = compile_component(2, 3, 1.3, 0.0, 2).unwrap();
        let mzi_region = &list.gates[..list
            .gates
            .iter()
            .position(|g| g.kind == GateKind::X)
            .unwrap_or(list.gates.len())];
        // The component itself is hadamards and controlled phases only.
        assert!(mzi_region.iter().any(|g| g.kind == GateKind::H));
        for g in &list.gates {
            if g.kind == GateKind::Phi || g.kind == GateKind::PhiBar {
                assert_eq!(g.target, 1);
            }
            if g.kind == GateKind::H {
                assert!(g.controls.is_empty());
                assert_eq!(g.target, 1);
            }
        }
        // NOTs pair up, so the whole list has determinant +1.
        let x_count = list.gates.iter().filter(|g| g.kind == GateKind::X).count();
        assert_eq!(x_count % 2, 0);
    }

    fn complex_det(u: &ComplexMatrix) -> Complex64 {
        let n = u.rows();
        let mut m: Vec<Complex64> = u.entries().to_vec();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let mut pivot = col;
            for row in col + 1..n {
                if m[row * n + col].norm() > m[pivot * n + col].norm() {
                    pivot = row;
                }
            }
            if pivot != col {
                for k in 0..n {
                    m.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let pv = m[col * n + col];
            det *= pv;
            for row in col + 1..n {
                let f = m[row * n + col] / pv;
                for k in col..n {
                    let sub = f * m[col * n + k];
                    m[row * n + k] -= sub;
                }
            }
        }
        det
    }

    #[test]
    fn compiled_circuits_match_their_unitaries() {
        let mut checked_phase = false;
        for (m, seed) in [(2usize, 5u64), (4, 6), (4, 7), (8, 8)] {
            for scheme in Scheme::ALL {
                for convention in [Convention::MziBeamsplitter, Convention::MziDirectionalCoupler]
                {
                    let spec = sample_circuit(m, scheme, convention, seed).unwrap();
                    let list = compile_circuit(&spec).unwrap();
                    list.validate().unwrap();
                    let compiled = gates_to_unitary(&list).unwrap();
                    let direct = crate::circuit::build_unitary(&spec).unwrap();
                    assert!(
                        equal_up_to_global_phase(&compiled, &direct, 1e-10).unwrap(),
                        "m={m} seed={seed} {scheme} {convention}"
                    );
                    // The compiler pins the canonical special-unitary
                    // representative, not just any phase.
                    let det = complex_det(&direct);
                    let delta = det.arg().rem_euclid(TAU);
                    if delta > 0.1 && delta < TAU - 0.1 {
                        checked_phase = true;
                        let corr = Complex64::from_polar(1.0, -delta / m as f64);
                        let mut canon = direct.clone();
                        for i in 0..m {
                            for jj in 0..m {
                                let v = canon.get(i, jj);
                                canon.set(i, jj, v * corr);
                            }
                        }
                        assert!(
                            compiled.max_abs_diff(&canon).unwrap() < 1e-9,
                            "canonical phase missed at m={m} seed={seed} {scheme} {convention}"
                        );
                    }
                }
            }
        }
        assert!(checked_phase);
    }

    #[test]
    fn single_mode_circuit_compiles_to_nothing() {
        let spec = sample_circuit(1, Scheme::TriangularAdjacent, Convention::MziBeamsplitter, 3)
            .unwrap();
        let list = compile_circuit(&spec).unwrap();
        assert_eq!(list.qubits, 0);
        assert!(list.gates.is_empty());
        let compiled = gates_to_unitary(&list).unwrap();
        let direct = crate::circuit::build_unitary(&spec).unwrap();
        assert!(equal_up_to_global_phase(&compiled, &direct, 1e-12).unwrap());
    }

    #[test]
    fn compile_rejects_unsupported_inputs() {
        let spec = sample_circuit(6, Scheme::TriangularAdjacent, Convention::MziBeamsplitter, 3)
            .unwrap();
        assert!(matches!(compile_circuit(&spec), Err(Error::Domain(_))));
        let spec = sample_circuit(4, Scheme::TriangularAdjacent, Convention::Reflectivity, 3)
            .unwrap();
        assert!(matches!(compile_circuit(&spec), Err(Error::Domain(_))));
        assert!(compile_component(1, 1, 0.5, 0.0, 2).is_err());
        assert!(compile_component(0, 4, 0.5, 0.0, 2).is_err());
        assert!(compile_component(0, 1, -0.5, 0.0, 2).is_err());
    }

    #[test]
    fn gate_list_json_round_trip_is_bitwise() {
        let list = compile_component(0, 3, 1.234, 0.77, 2).unwrap();
        let text = list.to_json();
        let back = GateList::from_json(&text).unwrap();
        assert_eq!(list, back);
        assert_eq!(text, back.to_json());
        assert!(text.contains("\"kind\":\"PHI\""));
    }

    #[test]
    fn emitted_gates_respect_the_gate_set() {
        let spec = sample_circuit(8, Scheme::Rectangular, Convention::MziBeamsplitter, 11)
            .unwrap();
        let list = compile_circuit(&spec).unwrap();
        let mut x_count = 0usize;
        let mut h_count = 0usize;
        for g in &list.gates {
            match g.kind {
                GateKind::H => {
                    h_count += 1;
                    assert_eq!(g.target, 2);
                    assert!(g.controls.is_empty());
                }
                GateKind::Phi | GateKind::PhiBar => {
                    assert_eq!(g.target, 2);
                    assert!(g.phi.unwrap().is_finite());
                }
                GateKind::X => {
                    x_count += 1;
                    // Routing NOTs carry a full control set.
                    assert_eq!(g.controls.len(), 2);
                }
            }
        }
        assert_eq!(x_count % 2, 0);
        assert_eq!(h_count % 2, 0);
    }
}
