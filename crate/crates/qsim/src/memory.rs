//! Ownership-tracked qubit storage shared by every party in one simulated
//! world.
//!
//! A [`Qubit`] is a move-only handle. Holding it is the only way to act on
//! the underlying qubit, and measuring it consumes the handle, so a protocol
//! can hand a qubit to another party but never duplicate it. Internally the
//! memory keeps a set of independent registers; two registers are merged only
//! when an operation (a Bell measurement) couples them.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{QsimError, Result};
use crate::gate::{t_gate, Matrix2, Pauli};
use crate::state::{BellOutcome, MeasurementBasis, StateVector};

/// Handle to one qubit in a [`QuantumMemory`]. Not `Clone`.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct Qubit {
    id: u64,
}

impl Qubit {
    pub fn id(&self) -> u64 {
        self.id
    }
}

#[derive(Debug)]
struct Register {
    qubits: Vec<u64>,
    state: StateVector,
}

#[derive(Debug, Default)]
pub struct QuantumMemory {
    registers: BTreeMap<u64, Register>,
    location: HashMap<u64, u64>,
    next_qubit: u64,
    next_register: u64,
}

impl QuantumMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of qubits currently alive.
    pub fn live_qubits(&self) -> usize {
        self.location.len()
    }

    /// Takes ownership of `state` and returns one handle per qubit, in
    /// tensor-factor order.
    pub fn allocate(&mut self, state: StateVector) -> Vec<Qubit> {
        let reg_id = self.next_register;
        self.next_register += 1;
        let ids: Vec<u64> = (0..state.num_qubits())
            .map(|_| {
                let id = self.next_qubit;
                self.next_qubit += 1;
                self.location.insert(id, reg_id);
                id
            })
            .collect();
        self.registers.insert(
            reg_id,
            Register {
                qubits: ids.clone(),
                state,
            },
        );
        ids.into_iter().map(|id| Qubit { id }).collect()
    }

    /// Allocates a single-qubit state.
    pub fn allocate_one(&mut self, state: StateVector) -> Result<Qubit> {
        if state.num_qubits() != 1 {
            return Err(QsimError::DimensionMismatch {
                left: 1,
                right: state.num_qubits(),
            });
        }
        Ok(self.allocate(state).pop().expect("one qubit"))
    }

    fn locate(&self, q: &Qubit) -> Result<(u64, usize)> {
        let reg_id = *self
            .location
            .get(&q.id)
            .ok_or(QsimError::UnknownQubit(q.id))?;
        let reg = &self.registers[&reg_id];
        let idx = reg
            .qubits
            .iter()
            .position(|&id| id == q.id)
            .expect("location map is consistent");
        Ok((reg_id, idx))
    }

    pub fn apply(&mut self, q: &Qubit, op: &Matrix2) -> Result<()> {
        let (reg_id, idx) = self.locate(q)?;
        self.registers
            .get_mut(&reg_id)
            .expect("located")
            .state
            .apply(idx, op)
    }

    pub fn apply_pauli(&mut self, q: &Qubit, p: Pauli) -> Result<()> {
        if p == Pauli::I {
            return self.locate(q).map(|_| ());
        }
        self.apply(q, &p.matrix())
    }

    pub fn apply_t(&mut self, q: &Qubit) -> Result<()> {
        self.apply(q, &t_gate())
    }

    /// Puts `q1` and `q2` into the same register; returns the register id and
    /// their positions in it.
    fn co_locate(&mut self, q1: &Qubit, q2: &Qubit) -> Result<(u64, usize, usize)> {
        if q1.id == q2.id {
            return Err(QsimError::SameQubit(q1.id as usize));
        }
        let (r1, _) = self.locate(q1)?;
        let (r2, _) = self.locate(q2)?;
        if r1 != r2 {
            let other = self.registers.remove(&r2).expect("located");
            for id in &other.qubits {
                self.location.insert(*id, r1);
            }
            let reg = self.registers.get_mut(&r1).expect("located");
            reg.state = reg.state.tensor(&other.state);
            reg.qubits.extend(other.qubits);
        }
        let (_, i1) = self.locate(q1)?;
        let (_, i2) = self.locate(q2)?;
        Ok((r1, i1, i2))
    }

    fn remove_qubits(&mut self, reg_id: u64, removed: &[u64], post: StateVector) {
        for id in removed {
            self.location.remove(id);
        }
        let reg = self.registers.get_mut(&reg_id).expect("present");
        reg.qubits.retain(|id| !removed.contains(id));
        if reg.qubits.is_empty() {
            self.registers.remove(&reg_id);
        } else {
            reg.state = post;
        }
    }

    pub fn bell_probabilities(&mut self, q1: &Qubit, q2: &Qubit) -> Result<[f64; 4]> {
        let (reg_id, i1, i2) = self.co_locate(q1, q2)?;
        self.registers[&reg_id].state.bell_probabilities(i1, i2)
    }

    /// Bell measurement of `(q1, q2)`; both qubits are consumed.
    pub fn measure_bell<R: Rng + ?Sized>(
        &mut self,
        q1: Qubit,
        q2: Qubit,
        rng: &mut R,
    ) -> Result<BellOutcome> {
        let (reg_id, i1, i2) = self.co_locate(&q1, &q2)?;
        let state = self.registers[&reg_id].state.clone();
        let (outcome, post) = state.bell_measure(i1, i2, rng)?;
        self.remove_qubits(reg_id, &[q1.id, q2.id], post);
        Ok(outcome)
    }

    /// Bell measurement with the branch fixed to `outcome`. Returns the Born
    /// probability of that branch; fails on impossible branches without
    /// consuming anything.
    pub fn measure_bell_forced(
        &mut self,
        q1: Qubit,
        q2: Qubit,
        outcome: BellOutcome,
    ) -> Result<f64> {
        let (reg_id, i1, i2) = self.co_locate(&q1, &q2)?;
        let state = &self.registers[&reg_id].state;
        let p = state.bell_probabilities(i1, i2)?[outcome.index()];
        let post = state.project_bell(i1, i2, outcome)?;
        self.remove_qubits(reg_id, &[q1.id, q2.id], post);
        Ok(p)
    }

    /// `[p(0), p(1)]` for measuring `q` in `basis`.
    pub fn basis_probabilities(&self, q: &Qubit, basis: &MeasurementBasis) -> Result<[f64; 2]> {
        let (reg_id, idx) = self.locate(q)?;
        self.registers[&reg_id]
            .state
            .basis_probabilities(idx, basis)
    }

    /// Measures `q` in `basis`, consuming it.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        q: Qubit,
        basis: &MeasurementBasis,
        rng: &mut R,
    ) -> Result<bool> {
        let (reg_id, idx) = self.locate(&q)?;
        let state = self.registers[&reg_id].state.clone();
        let (bit, post) = state.measure_in_basis(idx, basis, rng)?;
        self.remove_qubits(reg_id, &[q.id], post);
        Ok(bit)
    }

    pub fn measure_computational<R: Rng + ?Sized>(
        &mut self,
        q: Qubit,
        rng: &mut R,
    ) -> Result<bool> {
        self.measure(q, &MeasurementBasis::computational(), rng)
    }

    /// Joint state of exactly the qubits of one register, in the requested
    /// order. Simulator-side inspection for tests and oracles; no protocol
    /// party calls this.
    pub fn state_of(&self, qubits: &[&Qubit]) -> Result<StateVector> {
        let first = qubits.first().ok_or(QsimError::NotARegister)?;
        let (reg_id, _) = self.locate(first)?;
        let reg = &self.registers[&reg_id];
        if reg.qubits.len() != qubits.len() {
            return Err(QsimError::NotARegister);
        }
        let mut order = Vec::with_capacity(qubits.len());
        for q in qubits {
            let (r, idx) = self.locate(q)?;
            if r != reg_id {
                return Err(QsimError::NotARegister);
            }
            order.push(idx);
        }
        reg.state.permute(&order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{
        prepare_computational, prepare_epr, states_equal_up_to_phase, teleport_correction,
    };
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn allocate_and_measure_frees_qubits() {
        let mut mem = QuantumMemory::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = mem.allocate_one(prepare_computational(true)).unwrap();
        assert_eq!(mem.live_qubits(), 1);
        assert!(mem.measure_computational(q, &mut rng).unwrap());
        assert_eq!(mem.live_qubits(), 0);
    }

    #[test]
    fn teleport_across_registers() {
        let mut mem = QuantumMemory::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = StateVector::qubit(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        for _ in 0..50 {
            let m = mem.allocate_one(psi.clone()).unwrap();
            let mut pair = mem.allocate(prepare_epr());
            let c = pair.pop().unwrap();
            let a = pair.pop().unwrap();
            let outcome = mem.measure_bell(m, a, &mut rng).unwrap();
            mem.apply_pauli(&c, teleport_correction(outcome)).unwrap();
            let got = mem.state_of(&[&c]).unwrap();
            assert!(states_equal_up_to_phase(&got, &psi, 1e-9).unwrap());
            mem.measure_computational(c, &mut rng).unwrap();
        }
        assert_eq!(mem.live_qubits(), 0);
    }

    #[test]
    fn forced_branch_reports_probability() {
        let mut mem = QuantumMemory::new();
        let m = mem.allocate_one(prepare_computational(false)).unwrap();
        let mut pair = mem.allocate(prepare_epr());
        let c = pair.pop().unwrap();
        let a = pair.pop().unwrap();
        let p = mem
            .measure_bell_forced(m, a, BellOutcome::new(true, true))
            .unwrap();
        assert!((p - 0.25).abs() < 1e-12);
        assert_eq!(mem.live_qubits(), 1);
        let _ = c;
    }

    #[test]
    fn state_of_requires_whole_register() {
        let mut mem = QuantumMemory::new();
        let pair = mem.allocate(prepare_epr());
        assert!(matches!(
            mem.state_of(&[&pair[0]]),
            Err(QsimError::NotARegister)
        ));
        let swapped = mem.state_of(&[&pair[1], &pair[0]]).unwrap();
        assert_eq!(swapped, prepare_epr());
    }

    #[test]
    fn same_qubit_twice_is_rejected() {
        let mut mem = QuantumMemory::new();
        let q = mem.allocate_one(prepare_computational(false)).unwrap();
        let fake = Qubit { id: q.id };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            mem.measure_bell(q, fake, &mut rng),
            Err(QsimError::SameQubit(_))
        ));
    }
}
