//! Raw 2×2 complex arithmetic shared by the oracle-based tests.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use qbsig_qsim::Pauli;

pub type M = [[C; 2]; 2];

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli(name: char) -> M {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match name {
        'I' => [[o, z], [z, o]],
        'X' => [[z, o], [o, z]],
        'Y' => [[z, -i], [i, z]],
        'Z' => [[o, z], [z, -o]],
        _ => unreachable!(),
    }
}

pub fn mul(a: &M, b: &M) -> M {
    let mut r = [[c(0.0, 0.0); 2]; 2];
    for (i, row) in r.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

pub fn dagger(a: &M) -> M {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn apply(a: &M, v: [C; 2]) -> [C; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub fn overlap(a: [C; 2], b: [C; 2]) -> f64 {
    (a[0].conj() * b[0] + a[1].conj() * b[1]).norm()
}

/// `a = e^{iθ} b` for some θ.
pub fn same_up_to_phase(a: &M, b: &M) -> bool {
    let tr = (0..2)
        .map(|i| (0..2).map(|j| a[i][j].conj() * b[i][j]).sum::<C>())
        .sum::<C>();
    (tr.norm() - 2.0).abs() < 1e-9
}

pub fn t_gate() -> M {
    let s = 1.0 / 3f64.sqrt();
    let (x, y, z) = (pauli('X'), pauli('Y'), pauli('Z'));
    let mut t = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = c(0.0, s) * (x[i][j] - y[i][j] + z[i][j]);
        }
    }
    t
}

pub fn pad(key: u8) -> M {
    let pow = |p: char, on: bool| if on { pauli(p) } else { pauli('I') };
    let [k1, k2, k3, k4] = [key & 8 != 0, key & 4 != 0, key & 2 != 0, key & 1 != 0];
    let mut e = pow('X', k4);
    for f in [pow('Z', k3), t_gate(), pow('X', k2), pow('Z', k1)] {
        e = mul(&e, &f);
    }
    e
}

pub fn to_pauli(p: char) -> Pauli {
    match p {
        'I' => Pauli::I,
        'X' => Pauli::X,
        'Y' => Pauli::Y,
        _ => Pauli::Z,
    }
}

pub fn pauli_name(p: Pauli) -> char {
    match p {
        Pauli::I => 'I',
        Pauli::X => 'X',
        Pauli::Y => 'Y',
        Pauli::Z => 'Z',
    }
}
