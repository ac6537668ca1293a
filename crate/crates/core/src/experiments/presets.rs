//! Built-in studies on `(-16, 16)` with `T = 1`.
//!
//! References use `tau_ref = 1e-5` and `h_ref = 2^-7` (N = 4096), except the
//! spatial study with the `|x|^0.76` potential. Its errors at the finest mesh
//! are small enough that the time error at `tau = 1e-5`, which still depends
//! on N there, shows up in the measured spatial order, so it runs at
//! `tau_ref = 2.5e-6`.

use super::{Band, InitialDatum, Norm, Problem, ReferenceScheme, ReferenceSpec, StudySpec, Sweep};
use crate::error::{Error, Result};
use crate::integrators::{Scheme, DEFAULT_FS_OVERSAMPLE};
use crate::physics::{Nonlinearity, Potential};

pub const PRESET_NAMES: [&str; 7] = ["fig51", "fig52", "fig53", "fig54", "fig55", "fig56", "fig57"];

pub const REFERENCE_TAU: f64 = 1e-5;
pub const REFERENCE_H: f64 = 1.0 / 128.0;
pub const FINE_REFERENCE_TAU: f64 = 2.5e-6;

pub fn tau_sweep() -> Vec<f64> {
    vec![1e-2, 5e-3, 2.5e-3, 1.25e-3]
}

pub fn h_sweep() -> Vec<f64> {
    vec![0.125, 0.0625, 0.03125, 0.015625]
}

fn problem(potential: Potential, nonlinearity: Nonlinearity, datum: InitialDatum) -> Problem {
    Problem {
        potential,
        nonlinearity,
        datum,
        a: -16.0,
        b: 16.0,
        t_final: 1.0,
    }
}

fn study(
    label: &str,
    problem: Problem,
    sweep: Sweep,
    reference: Scheme,
    schemes: Vec<Scheme>,
    bands: Vec<Band>,
) -> StudySpec {
    StudySpec {
        label: label.to_string(),
        problem,
        sweep,
        reference: ReferenceSpec {
            scheme: ReferenceScheme::Fixed(reference),
            tau: REFERENCE_TAU,
            h: REFERENCE_H,
        },
        norms: vec![Norm::L2, Norm::H1],
        schemes,
        fs_oversample: DEFAULT_FS_OVERSAMPLE,
        bands,
    }
}

fn slope(scheme: Scheme, norm: Norm, target: f64, tol: f64) -> Band {
    Band::Slope { scheme, norm, target, tol }
}

/// The studies behind a preset name.
pub fn preset(name: &str) -> Result<Vec<StudySpec>> {
    use Norm::{H1, L2};
    use Scheme::*;
    let studies = match name {
        "fig51" => vec![study(
            "fig51",
            problem(Potential::None, Nonlinearity::focusing(0.1), InitialDatum::Type1H2),
            Sweep::H(h_sweep()),
            EwiEfp,
            vec![EwiEfp],
            vec![slope(EwiEfp, L2, 2.0, 0.3), slope(EwiEfp, H1, 1.0, 0.3)],
        )],
        "fig52" => [0.1, 0.4]
            .iter()
            .map(|&sigma| {
                study(
                    &format!("fig52_sigma{sigma}"),
                    problem(Potential::None, Nonlinearity::focusing(sigma), InitialDatum::Type1H2),
                    Sweep::Tau(tau_sweep()),
                    Strang,
                    vec![EwiEfp],
                    vec![slope(EwiEfp, L2, 1.0, 0.2), slope(EwiEfp, H1, 0.5, 0.15)],
                )
            })
            .collect(),
        "fig53" => {
            // each scheme against its own fine-mesh solution; a pseudospectral
            // reference would cap the spectral scheme's measured order
            let s = study(
                "fig53",
                problem(Potential::None, Nonlinearity::focusing(0.1), InitialDatum::Type2Smooth),
                Sweep::H(h_sweep()),
                EwiEfp,
                vec![EwiFs, EwiEfp],
                vec![Band::SlopeGap { scheme: EwiFs, other: EwiEfp, norm: L2, min_gap: 0.6 }],
            );
            vec![StudySpec {
                reference: ReferenceSpec {
                    scheme: ReferenceScheme::SameAsTested,
                    ..s.reference
                },
                ..s
            }]
        }
        "fig54" => [0.2, 0.8]
            .iter()
            .map(|&sigma| {
                study(
                    &format!("fig54_sigma{sigma}"),
                    problem(Potential::None, Nonlinearity::focusing(sigma), InitialDatum::Type2Smooth),
                    Sweep::Tau(tau_sweep()),
                    Strang,
                    vec![EwiEfp],
                    vec![slope(EwiEfp, L2, 1.0, 0.2), slope(EwiEfp, H1, 1.0, 0.2)],
                )
            })
            .collect(),
        "fig55" => {
            let p = problem(Potential::square_well(), Nonlinearity::cubic(), InitialDatum::Type1H2);
            vec![
                study(
                    "fig55_space",
                    p.clone(),
                    Sweep::H(h_sweep()),
                    EwiEfp,
                    vec![EwiEfp, EwiFp],
                    vec![
                        slope(EwiEfp, L2, 2.0, 0.3),
                        slope(EwiEfp, H1, 1.0, 0.3),
                        Band::SlopeAtMost { scheme: EwiFp, norm: L2, max: 1.4 },
                        Band::FinestErrorRatio { scheme: EwiEfp, other: EwiFp, norm: L2, max_ratio: 0.5 },
                    ],
                ),
                study(
                    "fig55_time",
                    p,
                    Sweep::Tau(tau_sweep()),
                    EwiEfp,
                    vec![EwiEfp],
                    vec![slope(EwiEfp, L2, 1.0, 0.2), slope(EwiEfp, H1, 0.5, 0.15)],
                ),
            ]
        }
        "fig56" => {
            let p = problem(Potential::w14_power(), Nonlinearity::cubic(), InitialDatum::H3Datum);
            let space = study(
                "fig56_space",
                p.clone(),
                Sweep::H(h_sweep()),
                EwiEfp,
                vec![EwiEfp],
                vec![slope(EwiEfp, L2, 3.0, 0.4), slope(EwiEfp, H1, 2.0, 0.3)],
            );
            vec![
                StudySpec {
                    reference: ReferenceSpec {
                        tau: FINE_REFERENCE_TAU,
                        ..space.reference
                    },
                    ..space
                },
                study(
                    "fig56_time",
                    p,
                    Sweep::Tau(tau_sweep()),
                    EwiEfp,
                    vec![EwiEfp],
                    vec![slope(EwiEfp, H1, 1.0, 0.2)],
                ),
            ]
        }
        "fig57" => vec![study(
            "fig57",
            problem(Potential::square_well(), Nonlinearity::cubic(), InitialDatum::Type1H2),
            Sweep::Tau(tau_sweep()),
            EwiEfp,
            vec![EwiEfp, LieTrotter],
            vec![
                slope(EwiEfp, L2, 1.0, 0.2),
                Band::FluctuationRatio { scheme: LieTrotter, other: EwiEfp, norm: L2, min_ratio: 2.0 },
            ],
        )],
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`, expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(studies)
}
