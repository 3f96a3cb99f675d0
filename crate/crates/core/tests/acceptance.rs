//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one `PASS`/`FAIL` line; exits nonzero if any fails.
//!
//! Expected values come from small oracles written here against raw
//! complex arithmetic, not from the library's own reference helpers.

use std::collections::HashSet;

use num_complex::Complex64 as C;
use qbsig_core::attacks::{
    orig_forgery_row_end_to_end, run_attack, substitution_readout, Attack, AttackOutcome,
    AttackParams, Scheme, FORGERY_TABLE,
};
use qbsig_core::crypto::KeyRing;
use qbsig_core::improved::{ImpConfig, ImpWorld};
use qbsig_core::original::{OrigConfig, OrigWorld};
use qbsig_core::scenario::{self, Format, ScenarioConfig, ScenarioKind};
use qbsig_core::{SimRng, Verdict};
use qbsig_qsim::{prepare_epr, teleport_correction, BellOutcome, StateVector};
use rand::{Rng, SeedableRng};

/// Panic payload of a criterion that already printed its `FAIL` line.
struct Reported;

fn report(name: &str, ok: bool, detail: String) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        std::panic::panic_any(Reported);
    }
}

mod common;
use common::*;

// --- 1 ---------------------------------------------------------------------

fn criterion_1_teleportation_identity() {
    // Correction for β_kl as written next to the teleportation expansion.
    let corrections = [('I', 0usize), ('X', 1), ('Z', 2), ('Y', 3)];
    let mut rng = SimRng::seed_from_u64(1);
    let mut worst: f64 = 1.0;
    let mut table_ok = true;
    for _ in 0..1000 {
        let amps: Vec<C> = (0..2)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = StateVector::qubit(amps[0] / norm, amps[1] / norm).unwrap();
        let joint = psi.tensor(&prepare_epr());
        for (name, index) in corrections {
            let outcome = BellOutcome::from_index(index);
            table_ok &= pauli_name(teleport_correction(outcome)) == name;
            let mut out = joint.project_bell(0, 1, outcome).unwrap();
            let before = out.amplitudes().to_vec();
            let after = apply(&pauli(name), [before[0], before[1]]);
            out = StateVector::qubit(after[0], after[1]).unwrap();
            worst = worst.min(out.fidelity(&psi).unwrap());
        }
    }
    report(
        "1 teleportation identity",
        table_ok && worst >= 1.0 - 1e-9,
        format!("4000 forced branches, min fidelity {worst:.12}, correction table ok = {table_ok}"),
    );
}

// --- 2 ---------------------------------------------------------------------

fn criterion_2_honest_runs_accept() {
    let mut orig_ok = 0;
    let mut imp_ok = 0;
    for seed in 0..500u64 {
        let out = OrigWorld::new(OrigConfig::new(8, 3, seed))
            .unwrap()
            .run(&mut qbsig_core::original::Honest)
            .unwrap();
        let recovered = out.signatories.iter().all(|s| s.recovered == out.message);
        if out.combined == Verdict::Accepted && out.all_individual_accepted() && recovered {
            orig_ok += 1;
        }
        let out = ImpWorld::new(ImpConfig::new(8, 3, seed))
            .unwrap()
            .run(&mut qbsig_core::improved::Honest)
            .unwrap();
        if out.combined == Verdict::Accepted
            && out.all_individual_accepted()
            && out.bob_message == out.message
        {
            imp_ok += 1;
        }
    }
    report(
        "2 honest acceptance",
        orig_ok == 500 && imp_ok == 500,
        format!("original {orig_ok}/500, improved {imp_ok}/500 at n=8 t=3"),
    );
}

// --- 3 ---------------------------------------------------------------------

fn criterion_3_forgery_table() {
    // (from, to, V1, V2, V) as tabulated.
    let rows: [(usize, usize, char, char, char); 12] = [
        (0, 1, 'I', 'X', 'X'),
        (0, 2, 'I', 'Z', 'Z'),
        (0, 3, 'I', 'Y', 'Y'),
        (1, 0, 'X', 'I', 'X'),
        (1, 2, 'X', 'Z', 'Y'),
        (1, 3, 'X', 'Y', 'Z'),
        (2, 0, 'Z', 'I', 'Z'),
        (2, 1, 'Z', 'X', 'Y'),
        (2, 3, 'Z', 'Y', 'X'),
        (3, 0, 'Y', 'I', 'Y'),
        (3, 1, 'Y', 'X', 'Z'),
        (3, 2, 'Y', 'Z', 'X'),
    ];
    let mut matrix_ok = 0;
    let mut e2e_ok = 0;
    let mut lib_ok = 0;
    for (from, to, v1, v2, v) in rows {
        if same_up_to_phase(&pauli(v), &mul(&pauli(v1), &pauli(v2))) {
            matrix_ok += 1;
        }
        let lib = FORGERY_TABLE
            .iter()
            .find(|r| r.from.index() == from && r.to.index() == to)
            .expect("row present");
        if (pauli_name(lib.v1), pauli_name(lib.v2), pauli_name(lib.v)) == (v1, v2, v) {
            lib_ok += 1;
        }
        let want = BellOutcome::from_index(to).bits().to_vec();
        let all = [false, true].into_iter().all(|bit| {
            (0..4u64).all(|seed| {
                let (verdict, sig) = orig_forgery_row_end_to_end(lib, bit, seed).unwrap();
                verdict == Verdict::Accepted && sig.bits() == want.as_slice()
            })
        });
        if all {
            e2e_ok += 1;
        }
    }
    report(
        "3 forgery table",
        matrix_ok == 12 && lib_ok == 12 && e2e_ok == 12,
        format!("matrix identity {matrix_ok}/12, library rows {lib_ok}/12, forged and accepted {e2e_ok}/12"),
    );
}

// --- 4 ---------------------------------------------------------------------

fn criterion_4_substitution_law() {
    let mut ok = 0;
    for actual in 0..4 {
        for claimed in 0..4 {
            for bit in [false, true] {
                let (a, b) = (
                    BellOutcome::from_index(actual),
                    BellOutcome::from_index(claimed),
                );
                // k is the first index of β_kl.
                let k_differs = (actual >> 1) != (claimed >> 1);
                let expect = (bit, bit ^ k_differs);
                if substitution_readout(a, b, bit) == Some(expect) {
                    ok += 1;
                }
            }
        }
    }
    report(
        "4 substitution law",
        ok == 32,
        format!("{ok}/32 (pair, bit) cases match"),
    );
}

// --- 5 ---------------------------------------------------------------------

fn params(trials: u64) -> AttackParams {
    AttackParams {
        trials,
        seed: 5,
        ..AttackParams::default()
    }
}

fn single(attack: Attack, scheme: Scheme, p: &AttackParams) -> AttackOutcome {
    let mut v = run_attack(attack, scheme, p).unwrap();
    assert_eq!(v.len(), 1);
    v.remove(0)
}

fn criterion_5_original_attacks_succeed() {
    let p = params(1000);
    let mut lines = Vec::new();
    let mut ok = true;
    for attack in [
        Attack::BlindnessBreak,
        Attack::ModifyMessage,
        Attack::AliceExtractKey,
        Attack::CharlieSubstitute,
        Attack::EveForge,
        Attack::AliceForge,
    ] {
        let o = single(attack, Scheme::Original, &p);
        let good = o.success_rate == 1.0 && o.detections == 0 && o.inconsistent_trials == 0;
        ok &= good;
        lines.push(format!("{} {}/{}", o.id, o.successes, o.trials));
    }
    report("5 original attack suite", ok, lines.join(", "));
}

// --- 6 ---------------------------------------------------------------------

/// Chance that one decoy prepared in a random Z/X eigenstate and
/// intercept-resent in a random Z/X basis reads wrong in the prepared basis.
fn decoy_error_oracle() -> f64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bases = [
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
    ];
    let mut total = 0.0;
    for prep in &bases {
        for state in prep {
            for eve in &bases {
                for resent in eve {
                    let p_resent = overlap(*resent, *state).powi(2);
                    let p_wrong = 1.0 - overlap(*state, *resent).powi(2);
                    total += p_resent * p_wrong;
                }
            }
        }
    }
    // 2 preparation bases × 2 states × 2 attacker bases.
    total / 8.0
}

/// Averaged over both encoded bits, `1 − |⟨ψ|P|ψ⟩|²` for the real encoding
/// `b|0⟩ + c|1⟩`, `c|0⟩ − b|1⟩`.
fn tamper_oracle(b: f64, p: char) -> f64 {
    let cc = (1.0 - b * b).sqrt();
    let states = [[c(b, 0.0), c(cc, 0.0)], [c(cc, 0.0), c(-b, 0.0)]];
    states
        .iter()
        .map(|s| 1.0 - overlap(*s, apply(&pauli(p), *s)).powi(2))
        .sum::<f64>()
        / 2.0
}

fn criterion_6_improved_defenses() {
    let p = params(10_000);
    let b = (std::f64::consts::PI / 8.0).cos();
    assert!((p.basis.b() - b).abs() < 1e-15);
    let cc = (1.0 - b * b).sqrt();
    let tol = 0.03;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, value: f64, target: f64, tol: f64| {
        lines.push(format!("{name} {value:.4} (target {target:.4} ± {tol})"));
        (value - target).abs() <= tol
    };

    let o = single(Attack::BlindnessBreak, Scheme::Improved, &p);
    ok &= check("blindness success", o.success_rate, 0.0, 0.0);

    let o = single(Attack::CharlieSubstitute, Scheme::Improved, &p);
    ok &= check("substitution detection", o.detection_rate, 1.0, 0.0);

    let per_decoy = decoy_error_oracle();
    assert!((per_decoy - 0.25).abs() < 1e-12);
    let target = 1.0 - (1.0 - per_decoy).powi(p.l as i32);
    let o = single(Attack::AliceForge, Scheme::Improved, &p);
    ok &= check("intercept-resend detection", o.detection_rate, target, tol);

    let eve = run_attack(Attack::EveForge, Scheme::Improved, &p).unwrap();
    for (variant, pauli_char, closed_form) in [
        ("x-type", 'X', (b * b - cc * cc).powi(2)),
        ("z-type", 'Z', 4.0 * b * b * cc * cc),
        ("y-type", 'Y', 1.0),
    ] {
        let target = tamper_oracle(b, pauli_char);
        assert!(
            (target - closed_form).abs() < 1e-12,
            "{variant}: {target} vs {closed_form}"
        );
        let o = eve
            .iter()
            .find(|o| o.variant.as_deref() == Some(variant))
            .expect("variant present");
        let t = if target == 1.0 { 0.0 } else { tol };
        ok &= check(
            &format!("eve {variant} detection"),
            o.detection_rate,
            target,
            t,
        );
        ok &= o.success_rate == 0.0;
    }
    report("6 improved defense suite", ok, lines.join("; "));
}

// --- 7 ---------------------------------------------------------------------

fn criterion_7_no_key_independent_forgery() {
    let basis = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    let mut found = Vec::new();
    let mut lib_agrees = true;
    for v in ['X', 'Y', 'Z'] {
        for u in ['I', 'X', 'Y', 'Z'] {
            let hits = (0..16u8)
                .filter(|&k| {
                    let e = pad(k);
                    let effective = mul(&dagger(&e), &mul(&pauli(v), &e));
                    basis
                        .iter()
                        .all(|m| overlap(apply(&effective, *m), apply(&pauli(u), *m)) > 1.0 - 1e-9)
                })
                .count();
            let lib = qbsig_core::attacks::commuting_key_fraction(to_pauli(v), to_pauli(u));
            lib_agrees &= (lib - hits as f64 / 16.0).abs() < 1e-12;
            if hits == 16 {
                found.push(format!("V={v} U={u}"));
            }
        }
    }
    report(
        "7 no key-independent forgery",
        found.is_empty() && lib_agrees,
        format!(
            "12 (V, U) pairs over 16 keys; working pairs: {found:?}; library agrees = {lib_agrees}"
        ),
    );
}

// --- 8 ---------------------------------------------------------------------

fn criterion_8_key_reuse() {
    let base = ImpConfig::new(8, 3, 0);
    let keys = KeyRing::generate(base.key_lengths(), base.t, &mut SimRng::seed_from_u64(8));
    let mut pads = HashSet::new();
    let mut accepted = 0;
    for seed in 0..100u64 {
        let out = ImpWorld::with_keys(ImpConfig::new(8, 3, 1000 + seed), keys.clone())
            .unwrap()
            .run(&mut qbsig_core::improved::Honest)
            .unwrap();
        if out.combined == Verdict::Accepted && out.all_individual_accepted() {
            accepted += 1;
        }
        pads.insert(out.initial_pad.to_string());
    }
    report(
        "8 key reuse",
        accepted == 100 && pads.len() == 100,
        format!(
            "{accepted}/100 accepted with one key ring, {} distinct pads",
            pads.len()
        ),
    );
}

// --- 9 ---------------------------------------------------------------------

fn criterion_9_determinism() {
    let configs = [
        ScenarioConfig {
            seed: 42,
            trials: 20,
            format: Format::Structured,
            ..ScenarioConfig::default()
        },
        ScenarioConfig {
            scheme: Scheme::Improved,
            seed: 7,
            trials: 20,
            format: Format::Structured,
            ..ScenarioConfig::default()
        },
        ScenarioConfig {
            scheme: Scheme::Improved,
            scenario: ScenarioKind::DefenseSuite,
            trials: 50,
            format: Format::Structured,
            ..ScenarioConfig::default()
        },
    ];
    let mut identical = 0;
    for config in &configs {
        let a = scenario::run(config).unwrap().to_json();
        let b = scenario::run(&ScenarioConfig {
            workers: Some(2),
            ..config.clone()
        })
        .unwrap()
        .to_json();
        if a == b {
            identical += 1;
        }
    }
    report(
        "9 determinism",
        identical == configs.len(),
        format!(
            "{identical}/{} structured reports byte-identical across runs",
            configs.len()
        ),
    );
}

fn main() {
    let criteria: [(&str, fn()); 9] = [
        (
            "1 teleportation identity",
            criterion_1_teleportation_identity,
        ),
        ("2 honest acceptance", criterion_2_honest_runs_accept),
        ("3 forgery table", criterion_3_forgery_table),
        ("4 substitution law", criterion_4_substitution_law),
        (
            "5 original attack suite",
            criterion_5_original_attacks_succeed,
        ),
        ("6 improved defense suite", criterion_6_improved_defenses),
        (
            "7 no key-independent forgery",
            criterion_7_no_key_independent_forgery,
        ),
        ("8 key reuse", criterion_8_key_reuse),
        ("9 determinism", criterion_9_determinism),
    ];
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        if !info.payload().is::<Reported>() {
            default_hook(info);
        }
    }));
    let mut failed = 0;
    for (name, f) in criteria {
        if let Err(payload) = std::panic::catch_unwind(f) {
            failed += 1;
            if !payload.is::<Reported>() {
                println!("FAIL {name}: panicked before reaching a verdict");
            }
        }
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
