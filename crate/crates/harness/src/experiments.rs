//! The five experiment suites. Each suite is a list of probes; a probe that
//! errors becomes an `error:` row and the remaining probes still run.

use std::f64::consts::PI;
use std::time::Instant;

use covlab_core::brackets::{
    self, bracket_equivalence_kg, bracket_equivalence_schr, jacobi_bracket, lambda_pairing, poisson_bracket, reeb_apply,
    subalgebra_closure_check, DarbouxPoint, KgTangentPair, Observable, SchrTangentPair, VariationTransport,
};
use covlab_core::darboux::{
    kg_to_darboux, relative_mode_distance, schr_to_darboux, theta_pullback_residual, Chart, KgModeState, ModePoint,
    SchrModeState, Theory, WOracle,
};
use covlab_core::kg::{self, KgConfig, KgSection, KgState, KgVariation};
use covlab_core::lattice::{idft, Lattice, ScalarField, VectorField};
use covlab_core::sampling::band_limited_modes;
use covlab_core::schrodinger::{self, SchrConfig, SchrSection, SchrState, SchrVariation};
use covlab_core::{Error, SignLedger};

use crate::config::{Evolution, ExperimentConfig, ExperimentKind, TheoryKind};
use crate::data::{self, TheoryState};
use crate::report::{Record, Report};

pub const ENERGY_DRIFT_SPECTRAL: f64 = 1e-12;
pub const ENERGY_DRIFT_LEAPFROG: f64 = 1e-6;
pub const CONSTRAINT_RESIDUAL: f64 = 1e-10;
pub const OMEGA_SPREAD: f64 = 1e-10;
pub const DARBOUX_INVARIANCE: f64 = 1e-12;
pub const PULLBACK_RESIDUAL: f64 = 1e-9;
pub const PRINTED_W_AGREEMENT: f64 = 1e-9;
pub const BRACKET_EQUIVALENCE: f64 = 1e-9;
pub const ANTISYMMETRY: f64 = 1e-12;
pub const JACOBI_IDENTITY: f64 = 1e-8;
pub const LEIBNIZ: f64 = 1e-9;
pub const CLOSURE: f64 = 1e-10;
pub const RESTRICTION: f64 = 1e-12;
pub const NORM_DRIFT_SPECTRAL: f64 = 1e-12;
pub const NORM_DRIFT_STEPPED: f64 = 1e-13;
pub const PROPAGATOR_PHASE: f64 = 1e-12;
pub const PROPAGATOR_BRIDGE: f64 = 1e-12;
pub const EL_PAIRING: f64 = 1e-8;
pub const DEDONDER_WEYL: f64 = 1e-5;
/// Allowed `|ratio/4 − 1|` when dt is halved.
pub const ORDER_RATIO: f64 = 0.2;

pub const PULLBACK_POINTS: usize = 100;
pub const PULLBACK_TANGENTS: usize = 100;
pub const EQUIVALENCE_PAIRS: usize = 20;
pub const ALGEBRA_POINTS: usize = 20;

type Probe<'a> = Box<dyn FnOnce(&str) -> covlab_core::Result<Vec<Record>> + 'a>;

pub fn run_experiment(cfg: &ExperimentConfig) -> Report {
    let label = cfg.label();
    let probes: Vec<Probe> = match cfg.experiment {
        ExperimentKind::Evolve => evolve(cfg),
        ExperimentKind::OmegaCheck => omega_check(cfg),
        ExperimentKind::DarbouxCheck => darboux_check(cfg),
        ExperimentKind::BracketCheck => bracket_check(cfg),
        ExperimentKind::ActionResidual => action_residual(cfg),
    };
    let mut records = Vec::new();
    for probe in probes {
        let start = Instant::now();
        let result = probe(&label);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(rows) => records.extend(rows.into_iter().map(|r| r.timed(seconds))),
            Err(e) => records.push(Record::error(&label, &e.to_string()).timed(seconds)),
        }
    }
    Report { configs: vec![cfg.clone()], records }
}

fn seed(cfg: &ExperimentConfig, stream: u64) -> u64 {
    cfg.seed.wrapping_add(stream)
}

fn kg_state(cfg: &ExperimentConfig, stream: u64) -> covlab_core::Result<KgState> {
    let c = ExperimentConfig { theory: TheoryKind::Kg, ..cfg.clone() };
    match data::random_state(&c, seed(cfg, stream))? {
        TheoryState::Kg(s) => Ok(s),
        TheoryState::Schrodinger(_) => unreachable!(),
    }
}

fn schr_state(cfg: &ExperimentConfig, stream: u64) -> covlab_core::Result<SchrState> {
    let c = ExperimentConfig { theory: TheoryKind::Schrodinger, ..cfg.clone() };
    match data::random_state(&c, seed(cfg, stream))? {
        TheoryState::Schrodinger(s) => Ok(s),
        TheoryState::Kg(_) => unreachable!(),
    }
}

fn theory(cfg: &ExperimentConfig) -> Theory {
    match cfg.theory {
        TheoryKind::Kg => Theory::KleinGordon,
        TheoryKind::Schrodinger => Theory::Schrodinger,
    }
}

fn relative(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// `k = 2π/L` along the first axis: `(cos kx, sin kx)`.
fn fundamental(l: &Lattice) -> (ScalarField, ScalarField, f64) {
    let k = 2.0 * PI / l.length();
    (ScalarField::from_fn(l, |x| (k * x[0]).cos()), ScalarField::from_fn(l, |x| (k * x[0]).sin()), k)
}

fn evolve(cfg: &ExperimentConfig) -> Vec<Probe<'_>> {
    match (cfg.theory, cfg.evolution) {
        (TheoryKind::Kg, Evolution::Spectral) => vec![Box::new(move |e| {
            let kcfg = data::kg_config(cfg)?;
            let st = kg_state(cfg, 0)?;
            let e0 = kg::hamiltonian(&st, &kcfg)?;
            let (mut drift, mut constraint) = (0.0f64, 0.0f64);
            for &t in &cfg.times {
                let out = kg::evolve_spectral(&st, t, &kcfg)?;
                drift = drift.max(relative(kg::hamiltonian(&out, &kcfg)?, e0));
                constraint = constraint.max(kg::constraint_residual(&out) / out.phi.sup_norm());
            }
            let mut rows = vec![
                Record::bounded(e, "energy_drift", drift, ENERGY_DRIFT_SPECTRAL),
                Record::bounded(e, "constraint_residual", constraint, CONSTRAINT_RESIDUAL),
            ];
            if cfg.steps == 0 {
                let out = kg::evolve_spectral(&st, 0.0, &kcfg)?;
                rows.push(Record::bounded(e, "output_minus_input", out.sup_distance(&st), 0.0));
            }
            Ok(rows)
        })],
        (TheoryKind::Kg, Evolution::Stepped) => vec![
            Box::new(move |e| {
                let kcfg = data::kg_config(cfg)?;
                let st = kg_state(cfg, 0)?;
                let out = kg::evolve_leapfrog(&st, cfg.dt, cfg.steps, &kcfg)?;
                let spectral = kg::evolve_spectral(&st, cfg.dt * cfg.steps as f64, &kcfg)?;
                let mut rows = vec![
                    Record::bounded(e, "energy_drift", relative(kg::hamiltonian(&out, &kcfg)?, kg::hamiltonian(&st, &kcfg)?), ENERGY_DRIFT_LEAPFROG),
                    Record::bounded(e, "constraint_residual", kg::constraint_residual(&out) / out.phi.sup_norm(), CONSTRAINT_RESIDUAL),
                    Record::info(e, "stepped_vs_spectral", out.sup_distance(&spectral) / spectral.phi.sup_norm()),
                ];
                if cfg.steps == 0 {
                    rows.push(Record::bounded(e, "output_minus_input", out.sup_distance(&st), 0.0));
                }
                Ok(rows)
            }),
            Box::new(move |e| {
                let kcfg = data::kg_config(cfg)?;
                let (c, s, _) = fundamental(&kcfg.lattice);
                let st = kg::enforce_constraints(c, &s * 0.5);
                let out = kg::evolve_leapfrog(&st, cfg.dt, cfg.steps, &kcfg)?;
                let drift = relative(kg::hamiltonian(&out, &kcfg)?, kg::hamiltonian(&st, &kcfg)?);
                Ok(vec![Record::bounded(e, "single_mode_energy_drift", drift, ENERGY_DRIFT_LEAPFROG)])
            }),
        ],
        (TheoryKind::Schrodinger, evolution) => vec![
            Box::new(move |e| {
                let scfg = data::schr_config(cfg)?;
                let st = schr_state(cfg, 0)?;
                let n0 = schrodinger::norm_squared(&st);
                let mut rows = Vec::new();
                match evolution {
                    Evolution::Spectral => {
                        let (mut drift, mut constraint) = (0.0f64, 0.0f64);
                        for &t in &cfg.times {
                            let out = schrodinger::evolve_spectral(&st, t, &scfg)?;
                            drift = drift.max(relative(schrodinger::norm_squared(&out), n0));
                            constraint = constraint.max(schrodinger::constraint_residual(&out) / out.field_sup_norm());
                        }
                        rows.push(Record::bounded(e, "norm_drift", drift, NORM_DRIFT_SPECTRAL));
                        rows.push(Record::bounded(e, "constraint_residual", constraint, CONSTRAINT_RESIDUAL));
                        if cfg.steps == 0 {
                            let out = schrodinger::evolve_spectral(&st, 0.0, &scfg)?;
                            rows.push(Record::bounded(e, "output_minus_input", out.sup_distance(&st), 0.0));
                        }
                    }
                    Evolution::Stepped => {
                        let out = schrodinger::evolve_stepped(&st, cfg.dt, cfg.steps, &scfg)?;
                        let spectral = schrodinger::evolve_spectral(&st, cfg.dt * cfg.steps as f64, &scfg)?;
                        rows.push(Record::bounded(e, "norm_drift", relative(schrodinger::norm_squared(&out), n0), NORM_DRIFT_STEPPED));
                        rows.push(Record::bounded(
                            e,
                            "constraint_residual",
                            schrodinger::constraint_residual(&out) / out.field_sup_norm(),
                            CONSTRAINT_RESIDUAL,
                        ));
                        rows.push(Record::info(e, "stepped_vs_spectral", out.sup_distance(&spectral) / spectral.field_sup_norm()));
                        if cfg.steps == 0 {
                            rows.push(Record::bounded(e, "output_minus_input", out.sup_distance(&st), 0.0));
                        }
                    }
                }
                Ok(rows)
            }),
            Box::new(move |e| {
                // ψ = e^{ikx} picks up the phase e^{−ik²s/2} = −i at s = π/k².
                let scfg = data::schr_config(cfg)?;
                let (c, s, k) = fundamental(&scfg.lattice);
                let st = schrodinger::enforce_constraints(c.clone(), s.clone());
                let out = schrodinger::evolve_spectral(&st, PI / (k * k), &scfg)?;
                let err = (&out.phi_r - &s).sup_norm().max((&out.phi_i + &c).sup_norm());
                Ok(vec![Record::bounded(e, "propagator_phase", err, PROPAGATOR_PHASE)])
            }),
            Box::new(move |e| {
                let scfg = data::schr_config(cfg)?;
                let st = schr_state(cfg, 0)?;
                let psi = schrodinger::to_wavefunction(&st);
                let mut worst = 0.0f64;
                for &t in &cfg.times {
                    let out = schrodinger::evolve_spectral(&st, t, &scfg)?;
                    let bridged = schrodinger::free_propagator(&psi, t);
                    worst = worst.max(schrodinger::to_wavefunction(&out).sup_distance(&bridged) / st.field_sup_norm());
                }
                Ok(vec![Record::bounded(e, "propagator_bridge", worst, PROPAGATOR_BRIDGE)])
            }),
        ],
    }
}

fn omega_check(cfg: &ExperimentConfig) -> Vec<Probe<'_>> {
    vec![Box::new(move |e| {
        let (evolved, frozen) = match cfg.theory {
            TheoryKind::Kg => {
                let kcfg = data::kg_config(cfg)?;
                let u = KgVariation::from_state(&kg_state(cfg, 1)?);
                let v = KgVariation::from_state(&kg_state(cfg, 2)?);
                (
                    brackets::omega_slice_report_kg(&kcfg, &u, &v, &cfg.times, VariationTransport::Evolved)?,
                    brackets::omega_slice_report_kg(&kcfg, &u, &v, &cfg.times, VariationTransport::FrozenSecond)?,
                )
            }
            TheoryKind::Schrodinger => {
                let scfg = data::schr_config(cfg)?;
                let u = SchrVariation::from_state(&schr_state(cfg, 1)?);
                let v = SchrVariation::from_state(&schr_state(cfg, 2)?);
                (
                    brackets::omega_slice_report_schr(&scfg, &u, &v, &cfg.times, VariationTransport::Evolved)?,
                    brackets::omega_slice_report_schr(&scfg, &u, &v, &cfg.times, VariationTransport::FrozenSecond)?,
                )
            }
        };
        Ok(vec![
            Record::bounded(e, "omega_spread", evolved.spread, OMEGA_SPREAD),
            Record::control(e, "frozen_variation_spread", frozen.spread, OMEGA_SPREAD),
        ])
    })]
}

/// Largest relative change of the rectified coordinates along a solution.
fn invariance(cfg: &ExperimentConfig, ledger: SignLedger) -> covlab_core::Result<f64> {
    let mut worst = 0.0f64;
    match cfg.theory {
        TheoryKind::Kg => {
            let kcfg = data::kg_config(cfg)?.with_ledger(ledger);
            let m0 = KgModeState::from_state(&kg_state(cfg, 0)?);
            let d0 = kg_to_darboux(&m0, &kcfg);
            for &s in &cfg.times {
                let d = kg_to_darboux(&m0.evolve(s, &kcfg), &kcfg);
                worst = worst.max(relative_mode_distance((&d0.big_phi, &d0.big_p), (&d.big_phi, &d.big_p)));
            }
        }
        TheoryKind::Schrodinger => {
            let scfg = data::schr_config(cfg)?.with_ledger(ledger);
            let m0 = SchrModeState::from_state(&schr_state(cfg, 0)?);
            let d0 = schr_to_darboux(&m0, &scfg);
            for &s in &cfg.times {
                let d = schr_to_darboux(&m0.evolve(s, &scfg), &scfg);
                worst = worst.max(relative_mode_distance((&d0.big_r, &d0.big_i), (&d.big_r, &d.big_i)));
            }
        }
    }
    Ok(worst)
}

fn chart(cfg: &ExperimentConfig, ledger: SignLedger) -> covlab_core::Result<Chart> {
    Ok(match cfg.theory {
        TheoryKind::Kg => Chart::kg(&data::kg_config(cfg)?.with_ledger(ledger)),
        TheoryKind::Schrodinger => Chart::schr(&data::schr_config(cfg)?.with_ledger(ledger)),
    })
}

fn closedness(chart: &Chart) -> Result<WOracle, f64> {
    match WOracle::new(chart) {
        Ok(oracle) => Ok(oracle),
        Err(Error::NotClosed(r)) => Err(r),
        Err(other) => unreachable!("oracle construction only fails on closedness: {other}"),
    }
}

fn darboux_check(cfg: &ExperimentConfig) -> Vec<Probe<'_>> {
    let ledger = cfg.ledger.ledger();
    let mut probes: Vec<Probe> = vec![Box::new(move |e| {
        Ok(vec![Record::bounded(e, "darboux_invariance", invariance(cfg, ledger)?, DARBOUX_INVARIANCE)])
    })];
    if ledger == SignLedger::Resolved {
        probes.push(Box::new(move |e| {
            let printed = invariance(cfg, SignLedger::PaperPrinted)?;
            let closed = closedness(&chart(cfg, SignLedger::PaperPrinted)?).err().unwrap_or(0.0);
            Ok(vec![
                Record::control(e, "printed_ledger_invariance", printed, DARBOUX_INVARIANCE),
                Record::control(e, "printed_ledger_closedness", closed, covlab_core::darboux::CLOSEDNESS_TOLERANCE),
            ])
        }));
    }
    probes.push(Box::new(move |e| {
        let chart = chart(cfg, ledger)?;
        let oracle = match closedness(&chart) {
            Ok(oracle) => oracle,
            Err(r) => {
                return Ok(vec![Record::bounded(e, "w_oracle_closedness", r, covlab_core::darboux::CLOSEDNESS_TOLERANCE)]);
            }
        };
        let mut rng = data::rng(seed(cfg, 3));
        let (mut printed, mut oracle_residual, mut agreement) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..PULLBACK_POINTS {
            let x: ModePoint = chart.sample_point(&mut rng, data::band(cfg), (0.0, 10.0));
            let r = theta_pullback_residual(&oracle, &x, PULLBACK_TANGENTS, seed(cfg, 1000 + i as u64));
            printed = printed.max(r.printed);
            oracle_residual = oracle_residual.max(r.oracle);
            let w = oracle.value(&x);
            agreement = agreement.max((chart.printed_w(&x) - w).abs() / w.abs().max(1.0));
        }
        let mut rows = vec![
            Record::bounded(e, "w_oracle_closedness", oracle.closedness(), covlab_core::darboux::CLOSEDNESS_TOLERANCE),
            Record::bounded(e, "pullback_residual_oracle_w", oracle_residual, PULLBACK_RESIDUAL),
            Record::info(e, "pullback_residual_printed_w", printed),
        ];
        rows.push(match cfg.theory {
            TheoryKind::Kg => Record::bounded(e, "printed_w_vs_oracle_w", agreement, PRINTED_W_AGREEMENT),
            TheoryKind::Schrodinger => Record::info(e, "printed_w_vs_oracle_w", agreement),
        });
        Ok(rows)
    }));
    probes
}

fn darboux_point(cfg: &ExperimentConfig, rng: &mut rand_chacha::ChaCha20Rng) -> covlab_core::Result<DarbouxPoint> {
    Ok(DarbouxPoint::random(theory(cfg), &data::lattice(cfg)?, rng, data::band(cfg)).with_ledger(cfg.ledger.ledger()))
}

/// Linear, quadratic and product observables with analytic gradients. `w_slope`
/// scales the `W` terms; with zero the triple is W-independent.
fn triple(cfg: &ExperimentConfig, w_slope: f64) -> covlab_core::Result<[Observable; 3]> {
    let t = theory(cfg);
    let l = data::lattice(cfg)?;
    let mut rng = data::rng(seed(cfg, 4));
    let a = band_limited_modes(&l, &mut rng, data::band(cfg));
    let b = band_limited_modes(&l, &mut rng, data::band(cfg));
    let f = Observable::linear(t, &a, &b, w_slope)?;
    let g = Observable::quadratic(t, &l, |_| 0.3, |k2| 1.0 / (1.0 + k2), |_| -0.2)?;
    let h = Observable::quadratic(t, &l, |k2| k2.sqrt(), |_| 0.5, |_| 0.1)?.product(&Observable::linear(t, &b, &a, -1.5 * w_slope)?)?;
    Ok([f, g, h])
}

fn scaled_sum(terms: &[f64]) -> f64 {
    terms.iter().sum::<f64>().abs() / terms.iter().map(|t| t.abs()).sum::<f64>().max(1.0)
}

fn jacobi_residual(obs: &[Observable; 3], pt: &DarbouxPoint) -> covlab_core::Result<f64> {
    let nested = |a: &Observable, b: &Observable, c: &Observable| jacobi_bracket(a, &Observable::jacobi(b, c)?, pt);
    Ok(scaled_sum(&[nested(&obs[0], &obs[1], &obs[2])?, nested(&obs[1], &obs[2], &obs[0])?, nested(&obs[2], &obs[0], &obs[1])?]))
}

/// The four Leibniz terms; the rule says they sum to zero.
fn leibniz_terms(obs: &[Observable; 3], pt: &DarbouxPoint) -> covlab_core::Result<[f64; 4]> {
    let [f, g, h] = obs;
    let (gv, hv) = (g.evaluate(pt)?, h.evaluate(pt)?);
    Ok([
        jacobi_bracket(f, &g.product(h)?, pt)?,
        -jacobi_bracket(f, g, pt)? * hv,
        -gv * jacobi_bracket(f, h, pt)?,
        -gv * hv * reeb_apply(f, pt)?,
    ])
}

fn kg_trajectories(cfg: &ExperimentConfig, kcfg: &KgConfig) -> covlab_core::Result<Vec<Vec<DarbouxPoint>>> {
    (0..3)
        .map(|i| {
            let m0 = KgModeState::from_state(&kg_state(cfg, 10 + i)?);
            Ok(cfg.times.iter().map(|&s| DarbouxPoint::from_kg(&kg_to_darboux(&m0.evolve(s, kcfg), kcfg), kcfg)).collect())
        })
        .collect()
}

fn schr_trajectories(cfg: &ExperimentConfig, scfg: &SchrConfig) -> covlab_core::Result<Vec<Vec<DarbouxPoint>>> {
    (0..3)
        .map(|i| {
            let m0 = SchrModeState::from_state(&schr_state(cfg, 10 + i)?);
            Ok(cfg.times.iter().map(|&s| DarbouxPoint::from_schr(&schr_to_darboux(&m0.evolve(s, scfg), scfg), scfg)).collect())
        })
        .collect()
}

fn bracket_check(cfg: &ExperimentConfig) -> Vec<Probe<'_>> {
    let points = move || -> covlab_core::Result<Vec<DarbouxPoint>> {
        let mut rng = data::rng(seed(cfg, 5));
        (0..ALGEBRA_POINTS).map(|_| darboux_point(cfg, &mut rng)).collect()
    };
    let pair_time = move |i: usize| cfg.times[i % cfg.times.len()];
    let resolved = cfg.ledger.ledger() == SignLedger::Resolved;
    vec![
        Box::new(move |e| {
            let mut rng = data::rng(seed(cfg, 6));
            let point = darboux_point(cfg, &mut rng)?;
            let report = match cfg.theory {
                TheoryKind::Kg => {
                    let kcfg = data::kg_config(cfg)?;
                    let pairs = (0..EQUIVALENCE_PAIRS)
                        .map(|i| {
                            let u = KgVariation::from_state(&kg_state(cfg, 100 + 2 * i as u64)?);
                            let v = KgVariation::from_state(&kg_state(cfg, 101 + 2 * i as u64)?);
                            Ok(KgTangentPair { u, v, time: pair_time(i) })
                        })
                        .collect::<covlab_core::Result<Vec<_>>>()?;
                    bracket_equivalence_kg(&kcfg, &pairs, &point)?
                }
                TheoryKind::Schrodinger => {
                    let pairs = (0..EQUIVALENCE_PAIRS)
                        .map(|i| {
                            let u = SchrVariation::from_state(&schr_state(cfg, 100 + 2 * i as u64)?);
                            let v = SchrVariation::from_state(&schr_state(cfg, 101 + 2 * i as u64)?);
                            Ok(SchrTangentPair { u, v, time: pair_time(i) })
                        })
                        .collect::<covlab_core::Result<Vec<_>>>()?;
                    bracket_equivalence_schr(&pairs, &point)?
                }
            };
            Ok(vec![Record::bounded(e, "bracket_equivalence", report.max_mismatch, BRACKET_EQUIVALENCE)])
        }),
        Box::new(move |e| {
            let obs = triple(cfg, 0.8)?;
            let flat = triple(cfg, 0.0)?;
            let (mut anti, mut restriction, mut translation) = (0.0f64, 0.0f64, 0.0f64);
            for pt in points()? {
                for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                    let (f, g) = (&obs[a], &obs[b]);
                    let j = jacobi_bracket(f, g, &pt)?;
                    let l = lambda_pairing(f, g, &pt)?;
                    anti = anti
                        .max((j + jacobi_bracket(g, f, &pt)?).abs() / j.abs().max(1.0))
                        .max((l + lambda_pairing(g, f, &pt)?).abs() / l.abs().max(1.0));

                    let (f, g) = (&flat[a], &flat[b]);
                    let j = jacobi_bracket(f, g, &pt)?;
                    let p = poisson_bracket(f, g, &pt)?;
                    anti = anti.max((p + poisson_bracket(g, f, &pt)?).abs() / p.abs().max(1.0));
                    restriction = restriction.max((j - p).abs() / j.abs().max(1.0));
                    let shifted = jacobi_bracket(f, g, &pt.clone().with_w(pt.w() + 17.0))?;
                    translation = translation.max((shifted - j).abs());
                }
            }
            Ok(vec![
                Record::bounded(e, "antisymmetry", anti, ANTISYMMETRY),
                Record::bounded(e, "restriction_consistency", restriction, RESTRICTION),
                Record::bounded(e, "w_translation_invariance", translation, 0.0),
            ])
        }),
        Box::new(move |e| {
            let obs = triple(cfg, 0.8)?;
            let (mut worst, mut printed) = (0.0f64, f64::INFINITY);
            for pt in points()? {
                worst = worst.max(jacobi_residual(&obs, &pt)?);
                if resolved {
                    printed = printed.min(jacobi_residual(&obs, &pt.with_ledger(SignLedger::PaperPrinted))?);
                }
            }
            let mut rows = vec![Record::bounded(e, "jacobi_identity", worst, JACOBI_IDENTITY)];
            if resolved {
                rows.push(Record::control(e, "printed_orientation_jacobi", printed, JACOBI_IDENTITY));
            }
            Ok(rows)
        }),
        Box::new(move |e| {
            let obs = triple(cfg, 0.8)?;
            let (mut worst, mut flipped) = (0.0f64, f64::INFINITY);
            for pt in points()? {
                let t = leibniz_terms(&obs, &pt)?;
                worst = worst.max(scaled_sum(&t));
                flipped = flipped.min(scaled_sum(&[t[0], t[1], t[2], -t[3]]));
            }
            Ok(vec![
                Record::bounded(e, "generalized_leibniz", worst, LEIBNIZ),
                Record::control(e, "flipped_reeb_sign_leibniz", flipped, LEIBNIZ),
            ])
        }),
        Box::new(move |e| {
            let t = theory(cfg);
            let l = data::lattice(cfg)?;
            let trajectories = match cfg.theory {
                TheoryKind::Kg => kg_trajectories(cfg, &data::kg_config(cfg)?)?,
                TheoryKind::Schrodinger => schr_trajectories(cfg, &data::schr_config(cfg)?)?,
            };
            let f = Observable::quadratic(t, &l, |_| 1.0, |_| 0.0, |_| 0.0)?;
            let g = Observable::quadratic(t, &l, |_| 0.0, |_| 0.0, |_| 1.0)?;
            let report = subalgebra_closure_check(&f, &g, &trajectories)?;
            Ok(vec![
                Record::bounded(e, "closure_reeb_derivative", report.max_reeb, CLOSURE),
                Record::bounded(e, "closure_spread", report.max_spread, CLOSURE),
            ])
        }),
    ]
}

/// `sin(πt/T)` envelope: zero on the first and last slices.
fn envelope(i: usize, count: usize) -> f64 {
    if i == 0 || i + 1 == count {
        0.0
    } else {
        (PI * i as f64 / (count - 1) as f64).sin()
    }
}

struct ActionMeasurement {
    dedonder_weyl: f64,
    el_raw: f64,
    el_scaled: f64,
}

fn measure_kg(kcfg: &KgConfig, initial: &KgState, u: &[ScalarField; 3], dt: f64, steps: usize) -> covlab_core::Result<ActionMeasurement> {
    let count = steps + 1;
    let section = KgSection::sample_spectral(initial, dt, count, kcfg)?;
    let variations: Vec<KgVariation> = (0..count)
        .map(|i| {
            let b = envelope(i, count);
            Ok(KgVariation { dphi: &u[0] * b, dp: &u[1] * b, dbeta: VectorField::new(vec![&u[2] * b; kcfg.lattice.dim()])? })
        })
        .collect::<covlab_core::Result<_>>()?;
    let el_raw = kg::el_pairing(&section, &variations)?;
    Ok(ActionMeasurement {
        dedonder_weyl: kg::dedonder_weyl_residual(&section)?,
        el_raw,
        el_scaled: el_raw.abs() / (kg::variation_norm(&variations, dt)? * section.norm()?),
    })
}

fn measure_schr(scfg: &SchrConfig, initial: &SchrState, u: &[ScalarField; 3], dt: f64, steps: usize) -> covlab_core::Result<ActionMeasurement> {
    let count = steps + 1;
    let section = SchrSection::sample_spectral(initial, dt, count, scfg)?;
    let dim = scfg.lattice.dim();
    let variations: Vec<SchrVariation> = (0..count)
        .map(|i| {
            let b = envelope(i, count);
            Ok(SchrVariation {
                dphi_r: &u[0] * b,
                dphi_i: &u[1] * b,
                dbeta_r: VectorField::new(vec![&u[2] * b; dim])?,
                dbeta_i: VectorField::new(vec![&u[2] * -b; dim])?,
            })
        })
        .collect::<covlab_core::Result<_>>()?;
    let el_raw = schrodinger::el_pairing(&section, &variations)?;
    Ok(ActionMeasurement {
        dedonder_weyl: schrodinger::dedonder_weyl_residual(&section)?,
        el_raw,
        el_scaled: el_raw.abs() / (schrodinger::variation_norm(&variations, dt)? * section.norm()?),
    })
}

/// Measurements at `dt` and `dt/2` over the same interval.
fn measure_pair(cfg: &ExperimentConfig, single_mode: bool) -> covlab_core::Result<(ActionMeasurement, ActionMeasurement)> {
    if cfg.steps < 2 {
        return Err(Error::TooFewSlices { needed: 3, got: cfg.steps + 1 });
    }
    let l = data::lattice(cfg)?;
    let mut rng = data::rng(seed(cfg, 7));
    let mut field = || idft(&band_limited_modes(&l, &mut rng, data::band(cfg)));
    let u = [field()?, field()?, field()?];
    let (c, s, _) = fundamental(&l);
    let (dt, steps) = (cfg.dt, cfg.steps);
    match cfg.theory {
        TheoryKind::Kg => {
            let kcfg = data::kg_config(cfg)?;
            let initial = if single_mode { kg::enforce_constraints(c, &s * 0.5) } else { kg_state(cfg, 0)? };
            Ok((measure_kg(&kcfg, &initial, &u, dt, steps)?, measure_kg(&kcfg, &initial, &u, dt / 2.0, 2 * steps)?))
        }
        TheoryKind::Schrodinger => {
            let scfg = data::schr_config(cfg)?;
            let initial = if single_mode { schrodinger::enforce_constraints(c.clone(), &c * 0.5) } else { schr_state(cfg, 0)? };
            Ok((measure_schr(&scfg, &initial, &u, dt, steps)?, measure_schr(&scfg, &initial, &u, dt / 2.0, 2 * steps)?))
        }
    }
}

fn order_deviation(coarse: f64, fine: f64) -> f64 {
    (coarse / fine / 4.0 - 1.0).abs()
}

fn action_residual(cfg: &ExperimentConfig) -> Vec<Probe<'_>> {
    vec![
        Box::new(move |e| {
            let (coarse, fine) = measure_pair(cfg, true)?;
            Ok(vec![
                Record::bounded(e, "dedonder_weyl_residual", coarse.dedonder_weyl, DEDONDER_WEYL),
                Record::bounded(e, "dedonder_weyl_order", order_deviation(coarse.dedonder_weyl, fine.dedonder_weyl), ORDER_RATIO),
                Record::bounded(e, "el_pairing_scaled", coarse.el_scaled, EL_PAIRING),
                Record::bounded(e, "el_pairing_order", order_deviation(coarse.el_raw, fine.el_raw), ORDER_RATIO),
            ])
        }),
        Box::new(move |e| {
            let (coarse, fine) = measure_pair(cfg, false)?;
            Ok(vec![
                Record::info(e, "broadband_dedonder_weyl_residual", coarse.dedonder_weyl),
                Record::info(e, "broadband_dedonder_weyl_ratio", coarse.dedonder_weyl / fine.dedonder_weyl),
                Record::info(e, "broadband_el_pairing_scaled", coarse.el_scaled),
                Record::info(e, "broadband_el_pairing_ratio", coarse.el_raw / fine.el_raw),
            ])
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(theory: TheoryKind, experiment: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(theory, experiment);
        cfg.n = 16;
        cfg
    }

    fn metric<'a>(report: &'a Report, name: &str) -> &'a Record {
        report.records.iter().find(|r| r.metric == name).unwrap_or_else(|| panic!("no metric {name} in {report:?}"))
    }

    #[test]
    fn omega_check_on_defaults_passes() {
        let report = run_experiment(&ExperimentConfig::new(TheoryKind::Kg, ExperimentKind::OmegaCheck));
        assert!(metric(&report, "omega_spread").value <= OMEGA_SPREAD);
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn zero_steps_returns_the_input() {
        for theory in [TheoryKind::Kg, TheoryKind::Schrodinger] {
            for evolution in [Evolution::Spectral, Evolution::Stepped] {
                let mut cfg = small(theory, ExperimentKind::Evolve);
                cfg.evolution = evolution;
                cfg.steps = 0;
                let report = run_experiment(&cfg);
                let r = metric(&report, "output_minus_input");
                assert_eq!((r.value, r.pass), (0.0, Some(true)), "{}", cfg.label());
            }
        }
    }

    #[test]
    fn printed_ledger_breaks_darboux_invariance() {
        let mut cfg = small(TheoryKind::Kg, ExperimentKind::DarbouxCheck);
        cfg.ledger = crate::config::LedgerFlag::Paper;
        let report = run_experiment(&cfg);
        assert_eq!(metric(&report, "darboux_invariance").pass, Some(false));
        assert_eq!(metric(&report, "w_oracle_closedness").pass, Some(false));
        assert!(report.records.iter().all(|r| r.experiment.ends_with("/paper-ledger")));
        assert!(!report.all_pass());
    }

    #[test]
    fn errors_become_rows() {
        let mut cfg = small(TheoryKind::Schrodinger, ExperimentKind::ActionResidual);
        cfg.steps = 1;
        let report = run_experiment(&cfg);
        assert!(report.records.iter().all(|r| r.metric.starts_with("error: ") && r.pass == Some(false)));
        assert!(!report.records.is_empty());
    }
}
