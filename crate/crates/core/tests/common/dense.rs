//! Dense-matrix reference simulator built from Kronecker products.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qkernel::qsim::Gate;
use rand::Rng;

type M = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn one_qubit(g: &Gate) -> M {
    let a = match *g {
        Gate::Rx(_, a) | Gate::Ry(_, a) | Gate::Rz(_, a) => a,
        _ => 0.0,
    };
    let (cs, sn) = ((a / 2.0).cos(), (a / 2.0).sin());
    match *g {
        Gate::H(_) => {
            let h = 1.0 / 2f64.sqrt();
            M::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
        }
        Gate::Rx(..) => M::from_row_slice(2, 2, &[c(cs, 0.0), c(0.0, -sn), c(0.0, -sn), c(cs, 0.0)]),
        Gate::Ry(..) => M::from_row_slice(2, 2, &[c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)]),
        Gate::Rz(..) => M::from_row_slice(2, 2, &[c(cs, -sn), c(0.0, 0.0), c(0.0, 0.0), c(cs, sn)]),
        _ => unreachable!(),
    }
}

/// Kronecker product over qubits, qubit 0 leftmost (most significant).
fn embed(n: usize, ops: &[(usize, M)]) -> M {
    let mut out = M::identity(1, 1);
    for q in 0..n {
        let op = ops
            .iter()
            .find(|(k, _)| *k == q)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| M::identity(2, 2));
        out = out.kronecker(&op);
    }
    out
}

fn projector(bit: usize) -> M {
    let mut m = M::zeros(2, 2);
    m[(bit, bit)] = c(1.0, 0.0);
    m
}

fn controlled(n: usize, control: usize, target: usize, u: M) -> M {
    embed(n, &[(control, projector(0))]) + embed(n, &[(control, projector(1)), (target, u)])
}

pub fn dense(n: usize, g: &Gate) -> M {
    let x = M::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let z = M::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    match *g {
        Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => embed(n, &[(q, one_qubit(g))]),
        Gate::Cnot { control, target } => controlled(n, control, target, x),
        Gate::Cz(a, b) => controlled(n, a, b, z),
        Gate::Crz { control, target, angle } => controlled(n, control, target, one_qubit(&Gate::Rz(0, angle))),
        Gate::Swap(a, b) => {
            let cx = |c_, t| controlled(n, c_, t, x.clone());
            cx(a, b) * cx(b, a) * cx(a, b)
        }
    }
}

pub fn random_gate<R: Rng>(rng: &mut R, n: usize) -> Gate {
    let q = rng.gen_range(0..n);
    let a = rng.gen_range(0.0..2.0 * PI);
    let two = n > 1 && rng.gen_bool(0.4);
    if two {
        let mut t = rng.gen_range(0..n - 1);
        if t >= q {
            t += 1;
        }
        match rng.gen_range(0..4) {
            0 => Gate::Cnot { control: q, target: t },
            1 => Gate::Cz(q, t),
            2 => Gate::Swap(q, t),
            _ => Gate::Crz { control: q, target: t, angle: a },
        }
    } else {
        match rng.gen_range(0..4) {
            0 => Gate::H(q),
            1 => Gate::Rx(q, a),
            2 => Gate::Ry(q, a),
            _ => Gate::Rz(q, a),
        }
    }
}

/// `U_g … U_1 |0…0⟩` as a column vector.
pub fn dense_state(n: usize, gates: &[Gate]) -> Vec<Complex64> {
    let mut psi = M::zeros(1 << n, 1);
    psi[(0, 0)] = c(1.0, 0.0);
    for g in gates {
        psi = dense(n, g) * psi;
    }
    psi.iter().copied().collect()
}
