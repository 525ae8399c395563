//! Regenerates the surrogate constants under `data/` from first principles
//! and anchor conditions, together with golden output files used by the
//! regression tests.
//!
//! The surrogates embed `data/*.toml` at compile time, so after running this
//! binary the crate must be rebuilt for the new constants to take effect.
//! Golden outputs are computed in-process from the freshly derived constants,
//! which keeps `data/` and `data/golden/` consistent within one run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anmod::backends::noise::NoiseModel;
use anmod::backends::{
    capacitance, qubit_resonator, two_qubit, CapacitanceMode, CapacitanceSurrogate, Evaluator,
    QubitResonatorSurrogate, TwoQubitSurrogate,
};
use anmod::problem::DesignPoint;

// Physical constants (SI).
const PLANCK: f64 = 6.62607015e-34;
const E_CHARGE: f64 = 1.602176634e-19;

// ---------------------------------------------------------------------------
// Qubit-resonator anchors.
// ---------------------------------------------------------------------------

/// Starting design, matching the shipped example configuration.
const QR_L_RES_0: f64 = 7500.0;
const QR_L_QB_0: f64 = 12.1;
const QR_W_QB_0: f64 = 400.0;
const QR_W_RES_QB_0: f64 = 100.0;
const QR_L_TL_0: f64 = 400.0;

/// Design goals the surrogate is anchored against.
const QR_F_RES_T: f64 = 6.0;
const QR_F_QB_T: f64 = 4.0;
const QR_ALPHA_T: f64 = 0.2;
const QR_CHI_T: f64 = 1.0e-3;
const QR_KAPPA_T: f64 = 1.0e-3;

/// Anharmonicity at the starting pad width; fixes the pad capacitance per µm.
const QR_ALPHA_0: f64 = 0.19;
/// Log offset of the starting dispersive shift below its goal.
const QR_CHI_LOG_GAP: f64 = 0.45;
/// Portion of that offset carried by the detuning pole alpha/(delta(delta-alpha));
/// the remainder sits in the claw and pad widths.
const QR_POLE_LOG_GAP: f64 = 0.247;
/// Claw coupling exponent: g grows sub-linearly with claw width.
const QR_P_G: f64 = 0.75;
const QR_W_REF: f64 = 100.0;
/// Linewidth at the starting tap length. With the tap at the saturation
/// length the correction factor is exactly 1, so this pins k2 directly.
const QR_KAPPA_0: f64 = 0.875e-3;
const QR_L_SAT: f64 = 400.0;
const QR_P_SAT: f64 = -0.75;
const QR_MODE_MARGIN: f64 = 0.25;

// ---------------------------------------------------------------------------
// Two-qubit anchors: the design the optimizer should converge to.
// ---------------------------------------------------------------------------

const TQ_F_RES_T: [f64; 2] = [7.12, 7.07];
const TQ_F_QB_T: [f64; 2] = [4.16, 4.00];
const TQ_ALPHA_T: [f64; 2] = [0.22, 0.21];
const TQ_CHI_T: [f64; 2] = [0.17e-3, 0.14e-3];
const TQ_F_C_T: f64 = 4.00;
const TQ_ALPHA_C_T: f64 = 0.09;
const TQ_CHI_C_T: [f64; 2] = [4.1e-3, 3.5e-3];

/// Converged geometry the anchors are evaluated at. Dressing shifts move the
/// true optimum a fraction of a percent away from these round numbers, well
/// inside the acceptance tolerance.
const TQ_L_RES_STAR: [f64; 2] = [3800.0, 3700.0];
const TQ_W_QB_STAR: [f64; 2] = [150.0, 155.0];
const TQ_W_RES_QB_STAR: [f64; 2] = [55.0, 60.0];
const TQ_L_C_STAR: f64 = 1.72;
const TQ_W_C_STAR: f64 = 230.0;
const TQ_W_C_QB_STAR: [f64; 2] = [9.0, 10.0];

const TQ_W_REF: f64 = 50.0;
const TQ_P_C: f64 = 1.3;
const TQ_POLE_MARGIN: f64 = 0.05;
const TQ_MODE_MARGIN: f64 = 0.25;

// ---------------------------------------------------------------------------
// Capacitance anchors.
// ---------------------------------------------------------------------------

/// Coupling capacitance goal and the gap at which it is met.
const CAP_C_T: f64 = 5.0;
const CAP_D_STAR: f64 = 12.0;
const CAP_EPS: f64 = 0.15;
const CAP_D0: f64 = 20.0;

/// Charge-line T1 anchor: 200 µs at a 45 µm tip distance.
const T1_ANCHOR_US: f64 = 200.0;
const T1_D_REF: f64 = 45.0;
const T1_C_SIGMA: f64 = 65.0;
const T1_F_MODE: f64 = 4.0;
const T1_Z0: f64 = 50.0;

fn main() {
    let data_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let golden_dir = data_dir.join("golden");
    fs::create_dir_all(&golden_dir).expect("create data/golden");

    let qr = calibrate_qubit_resonator();
    let (tq, tq_star) = calibrate_two_qubit();
    let cap = calibrate_capacitance();

    check_qubit_resonator(&qr);
    check_two_qubit(&tq, &tq_star);
    check_capacitance(&cap);

    fs::write(
        data_dir.join("qubit_resonator.toml"),
        render_qubit_resonator(&qr),
    )
    .unwrap();
    fs::write(data_dir.join("two_qubit.toml"), render_two_qubit(&tq)).unwrap();
    fs::write(data_dir.join("capacitance.toml"), render_capacitance(&cap)).unwrap();

    fs::write(
        golden_dir.join("qubit_resonator.toml"),
        golden_qubit_resonator(&qr),
    )
    .unwrap();
    fs::write(golden_dir.join("two_qubit.toml"), golden_two_qubit(&tq)).unwrap();
    fs::write(
        golden_dir.join("capacitance.toml"),
        golden_capacitance(&cap),
    )
    .unwrap();

    println!("wrote {} and {}", data_dir.display(), golden_dir.display());
    println!("rebuild the crate to bake the new constants into the surrogates");
}

/// E_J/h in GHz for a 1 nH junction: Phi0^2 / (4 pi^2 L h).
fn ej_scale_ghz_nh() -> f64 {
    let phi0 = PLANCK / (2.0 * E_CHARGE);
    phi0 * phi0 / (4.0 * std::f64::consts::PI.powi(2) * 1.0e-9 * PLANCK) * 1.0e-9
}

/// E_C/h in GHz for a 1 fF capacitance: e^2 / (2 C h).
fn ec_scale_ghz_ff() -> f64 {
    E_CHARGE * E_CHARGE / (2.0 * 1.0e-15 * PLANCK) * 1.0e-9
}

fn transmon_frequency(e_j: f64, e_c: f64) -> f64 {
    (8.0 * e_j * e_c).sqrt() - e_c
}

fn qr_initial() -> DesignPoint {
    DesignPoint::from([
        ("l_res".into(), QR_L_RES_0),
        ("L_qb".into(), QR_L_QB_0),
        ("w_qb".into(), QR_W_QB_0),
        ("w_res_qb".into(), QR_W_RES_QB_0),
        ("l_res_tl".into(), QR_L_TL_0),
    ])
}

fn tq_initial() -> DesignPoint {
    DesignPoint::from([
        ("l_res_1".into(), 4200.0),
        ("l_res_2".into(), 4200.0),
        ("L_qb_1".into(), 10.0),
        ("L_qb_2".into(), 12.0),
        ("L_c".into(), 2.0),
        ("w_qb_1".into(), 170.0),
        ("w_qb_2".into(), 170.0),
        ("w_c".into(), 250.0),
        ("w_res_qb_1".into(), 50.0),
        ("w_res_qb_2".into(), 50.0),
        ("w_c_qb_1".into(), 13.0),
        ("w_c_qb_2".into(), 15.0),
    ])
}

/// Detuning pole factor alpha / (delta * (delta - alpha)).
fn pole(delta: f64, alpha: f64) -> f64 {
    alpha / (delta * (delta - alpha))
}

fn calibrate_qubit_resonator() -> qubit_resonator::QubitResonatorConstants {
    let ej_scale = ej_scale_ghz_nh();
    let ec_scale = ec_scale_ghz_ff();
    // Pad capacitance per µm so that E_C(starting width) = QR_ALPHA_0.
    let c_w = ec_scale / (QR_ALPHA_0 * QR_W_QB_0);

    // Split the starting chi offset between the detuning pole and the claw:
    // chi = g^2 * A with A = alpha / (delta * (delta - alpha)).
    let chi_0 = QR_CHI_T * (-QR_CHI_LOG_GAP).exp();
    let a_target = pole(QR_F_QB_T - QR_F_RES_T, QR_ALPHA_T);
    let a_0 = a_target * (-QR_POLE_LOG_GAP).exp();
    // Dressed starting detuning: negative root of delta * (delta - alpha_0) = alpha_0 / A_0.
    let q = QR_ALPHA_0 / a_0;
    let delta_0 = (QR_ALPHA_0 - (QR_ALPHA_0 * QR_ALPHA_0 + 4.0 * q).sqrt()) / 2.0;
    let g2 = chi_0 / a_0;
    // At the starting point the claw sits at the reference width, so
    // g = g_0 * w_ref / w_qb regardless of the claw exponent.
    let g_0 = g2.sqrt() * QR_W_QB_0 / QR_W_REF;

    let e_j = ej_scale / QR_L_QB_0;
    let f_qb_bare = transmon_frequency(e_j, QR_ALPHA_0);
    // Bare resonator frequency such that the dressed detuning equals delta_0.
    // Dressing repels the modes by 2 * shift, shift = g^2 / (f_qb - f_res).
    let mut f_res_bare = f_qb_bare - delta_0;
    for _ in 0..64 {
        let shift = g2 / (f_qb_bare - f_res_bare);
        f_res_bare = f_qb_bare + 2.0 * shift - delta_0;
    }
    let v_res = f_res_bare * QR_L_RES_0;

    let k2 = QR_KAPPA_0 / (QR_L_TL_0 * QR_L_TL_0);

    qubit_resonator::QubitResonatorConstants {
        transmon: qubit_resonator::Transmon {
            ej_scale,
            ec_scale,
            c_w,
        },
        resonator: qubit_resonator::Resonator { v_res },
        coupling: qubit_resonator::Coupling {
            g_0,
            w_ref: QR_W_REF,
            p_g: QR_P_G,
        },
        kappa: qubit_resonator::Kappa {
            k2,
            l_sat: QR_L_SAT,
            p_sat: QR_P_SAT,
        },
        mode_order: qubit_resonator::ModeOrder {
            margin: QR_MODE_MARGIN,
        },
        noise: NoiseModel {
            sigma0: BTreeMap::from([
                ("f_res".into(), 0.004),
                ("f_qb".into(), 0.004),
                ("alpha".into(), 0.015),
                ("chi".into(), 0.03),
                ("kappa_res".into(), 0.08),
                ("g_qb_res".into(), 0.02),
            ]),
            rate: 1.6,
            p_min: 3,
        },
    }
}

fn check_qubit_resonator(c: &qubit_resonator::QubitResonatorConstants) {
    let surrogate = QubitResonatorSurrogate::with_constants(c.clone(), true, false);
    let y = surrogate
        .evaluate(&qr_initial(), 8, 0)
        .expect("starting point must evaluate");

    let chi_0 = QR_CHI_T * (-QR_CHI_LOG_GAP).exp();
    assert!(
        (y["chi"] / chi_0 - 1.0).abs() < 1e-9,
        "starting chi {} should sit exp(-{QR_CHI_LOG_GAP}) below {QR_CHI_T}",
        y["chi"]
    );
    assert!((y["alpha"] / QR_ALPHA_0 - 1.0).abs() < 1e-12);
    assert!((y["kappa_res"] / QR_KAPPA_0 - 1.0).abs() < 1e-12);
    let delta = y["f_qb"] - y["f_res"];
    let a_0 = pole(QR_F_QB_T - QR_F_RES_T, QR_ALPHA_T) * (-QR_POLE_LOG_GAP).exp();
    assert!(
        (pole(delta, y["alpha"]) / a_0 - 1.0).abs() < 1e-9,
        "starting pole factor off: delta = {delta}"
    );
    // Tap length that meets the linewidth goal, for reference below.
    let l_tl_star = QR_L_TL_0 * (QR_KAPPA_T / QR_KAPPA_0).powf(1.0 / (2.0 + QR_P_SAT));

    println!("qubit-resonator:");
    println!("  ej_scale   = {} GHz nH", c.transmon.ej_scale);
    println!("  ec_scale   = {} GHz fF", c.transmon.ec_scale);
    println!("  c_w        = {} fF/µm", c.transmon.c_w);
    println!("  v_res      = {} GHz µm", c.resonator.v_res);
    println!("  g_0        = {} GHz", c.coupling.g_0);
    println!("  k2         = {} GHz/µm^2", c.kappa.k2);
    println!(
        "  start: f_res = {:.5}, f_qb = {:.5}, chi = {:.6e}",
        y["f_res"], y["f_qb"], y["chi"]
    );
    println!("  tap length meeting the linewidth goal: {l_tl_star:.2} µm");
}

fn calibrate_two_qubit() -> (two_qubit::TwoQubitConstants, DesignPoint) {
    let ej_scale = ej_scale_ghz_nh();
    let mut x_star = DesignPoint::new();

    let mut arm = |i: usize| {
        // Anharmonicity at the converged pad width pins the pad scale, and
        // the dispersive shift at the dressed goal frequencies pins the claw
        // coupling (chi reads the dressed detuning).
        let ec_w = TQ_ALPHA_T[i] * TQ_W_QB_STAR[i];
        let delta = TQ_F_QB_T[i] - TQ_F_RES_T[i];
        let g2 = TQ_CHI_T[i] / pole(delta, TQ_ALPHA_T[i]);
        let g_0 = g2.sqrt() * TQ_W_QB_STAR[i]
            / (TQ_W_REF * (TQ_W_RES_QB_STAR[i] / TQ_W_REF).powf(QR_P_G));

        // Undo the dressing to place the bare modes: the bare detuning D
        // satisfies delta = D + 2 g^2 / D (take the root near delta).
        let d_bare = (delta - (delta * delta - 8.0 * g2).sqrt()) / 2.0;
        let shift = g2 / d_bare;
        let f_qb_bare = TQ_F_QB_T[i] - shift;
        let f_res_bare = TQ_F_RES_T[i] + shift;
        let v_res = f_res_bare * TQ_L_RES_STAR[i];

        let suffix = i + 1;
        x_star.insert(format!("l_res_{suffix}"), TQ_L_RES_STAR[i]);
        x_star.insert(
            format!("L_qb_{suffix}"),
            solve_inductance(ej_scale, TQ_ALPHA_T[i], f_qb_bare),
        );
        x_star.insert(format!("w_qb_{suffix}"), TQ_W_QB_STAR[i]);
        x_star.insert(format!("w_res_qb_{suffix}"), TQ_W_RES_QB_STAR[i]);
        two_qubit::Arm {
            v_res,
            ej_scale,
            ec_w,
            g_0,
            w_ref: TQ_W_REF,
        }
    };
    let arm1 = arm(0);
    let arm2 = arm(1);

    // Coupler frequency and anharmonicity at the converged geometry.
    let ec_w_c = TQ_ALPHA_C_T * TQ_W_C_STAR;
    let e_j_c = (TQ_F_C_T + TQ_ALPHA_C_T).powi(2) / (8.0 * TQ_ALPHA_C_T);
    let ej_c = e_j_c * TQ_L_C_STAR;
    x_star.insert("L_c".into(), TQ_L_C_STAR);
    x_star.insert("w_c".into(), TQ_W_C_STAR);

    // Coupler-qubit couplings at the converged finger gaps. Both use the
    // qubit-1 pole: qubit 2 and the coupler share a goal frequency, so that
    // detuning vanishes at the converged design and cannot carry the anchor.
    let pole_gap = TQ_F_QB_T[0] - TQ_F_C_T;
    let ac = |i: usize| TQ_CHI_C_T[i] * pole_gap * TQ_W_C_QB_STAR[i].powf(TQ_P_C);
    x_star.insert("w_c_qb_1".into(), TQ_W_C_QB_STAR[0]);
    x_star.insert("w_c_qb_2".into(), TQ_W_C_QB_STAR[1]);

    let constants = two_qubit::TwoQubitConstants {
        arm1,
        arm2,
        coupler: two_qubit::Coupler { ej_c, ec_w_c },
        coupler_qubit: two_qubit::CouplerQubit {
            ac_1: ac(0),
            ac_2: ac(1),
            p_c: TQ_P_C,
            pole_margin: TQ_POLE_MARGIN,
        },
        coupling_shape: two_qubit::CouplingShape { p_g: QR_P_G },
        mode_order: two_qubit::GroupMargin {
            margin: TQ_MODE_MARGIN,
        },
        noise: NoiseModel {
            sigma0: BTreeMap::from([
                ("f_res_1".into(), 0.004),
                ("f_res_2".into(), 0.004),
                ("f_qb_1".into(), 0.004),
                ("f_qb_2".into(), 0.004),
                ("f_c".into(), 0.004),
                ("alpha_1".into(), 0.015),
                ("alpha_2".into(), 0.015),
                ("alpha_c".into(), 0.015),
                ("chi_1".into(), 0.03),
                ("chi_2".into(), 0.03),
                ("chi_c1".into(), 0.03),
                ("chi_c2".into(), 0.03),
            ]),
            rate: 1.6,
            p_min: 3,
        },
    };
    (constants, x_star)
}

fn check_two_qubit(c: &two_qubit::TwoQubitConstants, x_star: &DesignPoint) {
    let surrogate = TwoQubitSurrogate::with_constants(c.clone(), true, false);
    let y0 = surrogate
        .evaluate(&tq_initial(), 8, 0)
        .expect("starting point must evaluate");
    assert_eq!(y0.len(), 12);

    let y_star = surrogate
        .evaluate(x_star, 8, 0)
        .expect("anchor point must evaluate");
    let goals: [(&str, f64); 12] = [
        ("f_res_1", TQ_F_RES_T[0]),
        ("f_res_2", TQ_F_RES_T[1]),
        ("f_qb_1", TQ_F_QB_T[0]),
        ("f_qb_2", TQ_F_QB_T[1]),
        ("f_c", TQ_F_C_T),
        ("alpha_1", TQ_ALPHA_T[0]),
        ("alpha_2", TQ_ALPHA_T[1]),
        ("alpha_c", TQ_ALPHA_C_T),
        ("chi_1", TQ_CHI_T[0]),
        ("chi_2", TQ_CHI_T[1]),
        ("chi_c1", TQ_CHI_C_T[0]),
        ("chi_c2", TQ_CHI_C_T[1]),
    ];
    println!("two-qubit anchor point:");
    for (name, goal) in goals {
        let rel = y_star[name] / goal - 1.0;
        println!(
            "  {name:10} = {:.6e}  (goal {goal:.6e}, rel {rel:+.4e})",
            y_star[name]
        );
        assert!(
            rel.abs() < 1e-6,
            "{name} misses its goal at the anchor: rel {rel}"
        );
    }
    for (name, value) in x_star {
        println!("  anchor {name} = {value:.6}");
    }
}

/// Junction inductance whose bare transmon frequency is `f` at charging
/// energy `e_c`: inverts f = sqrt(8 E_J E_C) - E_C.
fn solve_inductance(ej_scale: f64, e_c: f64, f: f64) -> f64 {
    ej_scale * 8.0 * e_c / (f + e_c).powi(2)
}

fn calibrate_capacitance() -> capacitance::CapacitanceConstants {
    // C(d) = c0 / sqrt(d) * (1 + eps * d / d0), anchored at the goal gap.
    let c0 = CAP_C_T * CAP_D_STAR.sqrt() / (1.0 + CAP_EPS * CAP_D_STAR / CAP_D0);

    // T1 = C_sigma / (omega^2 C_c^2 Z0) with C_c = c_tip * d_ref / d.
    let omega = 2.0 * std::f64::consts::PI * T1_F_MODE * 1.0e9;
    let t1_s = T1_ANCHOR_US * 1.0e-6;
    let c_tip = (T1_C_SIGMA * 1.0e-15 / (omega * omega * T1_Z0 * t1_s)).sqrt() / 1.0e-15;

    capacitance::CapacitanceConstants {
        coupling_capacitance: capacitance::CouplingCapacitance {
            c0,
            eps: CAP_EPS,
            d0: CAP_D0,
        },
        t1_limit: capacitance::T1Limit {
            c_sigma: T1_C_SIGMA,
            c_tip,
            d_ref: T1_D_REF,
            f_mode: T1_F_MODE,
            z0: T1_Z0,
        },
        noise: NoiseModel {
            sigma0: BTreeMap::from([("C_coupling".into(), 0.01), ("T1_limit".into(), 0.02)]),
            rate: 1.6,
            p_min: 3,
        },
    }
}

fn check_capacitance(c: &capacitance::CapacitanceConstants) {
    let coupling =
        CapacitanceSurrogate::with_constants(c.clone(), CapacitanceMode::Coupling, true, false);
    let x_star = DesignPoint::from([("d_gap".into(), CAP_D_STAR)]);
    let y = coupling.evaluate(&x_star, 8, 0).unwrap();
    assert!(
        (y["C_coupling"] / CAP_C_T - 1.0).abs() < 1e-12,
        "C misses goal at anchor gap"
    );

    let t1 = CapacitanceSurrogate::with_constants(c.clone(), CapacitanceMode::T1, true, false);
    let x_ref = DesignPoint::from([("d_tip".into(), T1_D_REF)]);
    let y = t1.evaluate(&x_ref, 8, 0).unwrap();
    assert!(
        (y["T1_limit"] / T1_ANCHOR_US - 1.0).abs() < 1e-9,
        "T1 misses anchor: {}",
        y["T1_limit"]
    );

    println!(
        "capacitance: c0 = {}, c_tip = {} fF",
        c.coupling_capacitance.c0, c.t1_limit.c_tip
    );
}

// ---------------------------------------------------------------------------
// Rendering: TOML with full round-trip float precision.
// ---------------------------------------------------------------------------

fn fmt(x: f64) -> String {
    let s = if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        format!("{x}")
    };
    if s.contains('.') || s.contains('e') || s.contains('E') {
        s
    } else {
        format!("{s}.0")
    }
}

fn render_noise(noise: &NoiseModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[noise]");
    let _ = writeln!(out, "rate = {}", fmt(noise.rate));
    let _ = writeln!(out, "p_min = {}", noise.p_min);
    let _ = writeln!(out, "\n[noise.sigma0]");
    for (name, sigma) in &noise.sigma0 {
        let _ = writeln!(out, "{name} = {}", fmt(*sigma));
    }
    out
}

fn render_qubit_resonator(c: &qubit_resonator::QubitResonatorConstants) -> String {
    format!(
        "# Qubit-resonator surrogate constants. Regenerate with `cargo run --bin calibrate`.\n\
         # Units: GHz, µm, nH, fF.\n\n\
         [transmon]\n\
         # E_J = ej_scale / L_qb, E_C = ec_scale / (c_w * w_qb)\n\
         ej_scale = {}\n\
         ec_scale = {}\n\
         c_w = {}\n\n\
         [resonator]\n\
         # f_res (bare) = v_res / l_res\n\
         v_res = {}\n\n\
         [coupling]\n\
         # g = g_0 * w_ref * (w_res_qb / w_ref)^p_g / w_qb; p_g = 1 with cross-terms disabled\n\
         g_0 = {}\n\
         w_ref = {}\n\
         p_g = {}\n\n\
         [kappa]\n\
         # kappa = k2 * l_res_tl^2 * (l_res_tl / l_sat)^p_sat; saturation only with cross-terms enabled\n\
         k2 = {}\n\
         l_sat = {}\n\
         p_sat = {}\n\n\
         [mode_order]\n\
         # require f_qb (bare) + margin < f_res (bare)\n\
         margin = {}\n\n\
         {}",
        fmt(c.transmon.ej_scale),
        fmt(c.transmon.ec_scale),
        fmt(c.transmon.c_w),
        fmt(c.resonator.v_res),
        fmt(c.coupling.g_0),
        fmt(c.coupling.w_ref),
        fmt(c.coupling.p_g),
        fmt(c.kappa.k2),
        fmt(c.kappa.l_sat),
        fmt(c.kappa.p_sat),
        fmt(c.mode_order.margin),
        render_noise(&c.noise),
    )
}

fn render_arm(name: &str, arm: &two_qubit::Arm) -> String {
    format!(
        "[{name}]\nv_res = {}\nej_scale = {}\nec_w = {}\ng_0 = {}\nw_ref = {}\n",
        fmt(arm.v_res),
        fmt(arm.ej_scale),
        fmt(arm.ec_w),
        fmt(arm.g_0),
        fmt(arm.w_ref),
    )
}

fn render_two_qubit(c: &two_qubit::TwoQubitConstants) -> String {
    format!(
        "# Two-qubit (qubit-coupler-qubit with readout resonators) surrogate constants.\n\
         # Regenerate with `cargo run --bin calibrate`. Units: GHz, µm, nH, fF.\n\n\
         {}\n{}\n\
         [coupler]\n\
         # f_c = sqrt(8 * (ej_c / L_c) * (ec_w_c / w_c)) - ec_w_c / w_c\n\
         ej_c = {}\n\
         ec_w_c = {}\n\n\
         [coupler_qubit]\n\
         # chi_c_i = ac_i * w_c_qb_i^(-p_c) / (f_qb_1 - f_c); p_c = 1 with cross-terms disabled\n\
         ac_1 = {}\n\
         ac_2 = {}\n\
         p_c = {}\n\
         pole_margin = {}\n\n\
         [coupling_shape]\n\
         # claw coupling exponent, g ~ w_res_qb^p_g; p_g = 1 with cross-terms disabled\n\
         p_g = {}\n\n\
         [mode_order]\n\
         margin = {}\n\n\
         {}",
        render_arm("arm1", &c.arm1),
        render_arm("arm2", &c.arm2),
        fmt(c.coupler.ej_c),
        fmt(c.coupler.ec_w_c),
        fmt(c.coupler_qubit.ac_1),
        fmt(c.coupler_qubit.ac_2),
        fmt(c.coupler_qubit.p_c),
        fmt(c.coupler_qubit.pole_margin),
        fmt(c.coupling_shape.p_g),
        fmt(c.mode_order.margin),
        render_noise(&c.noise),
    )
}

fn render_capacitance(c: &capacitance::CapacitanceConstants) -> String {
    format!(
        "# Capacitance-simulation surrogate constants (coupling capacitance and charge-line T1).\n\
         # Regenerate with `cargo run --bin calibrate`. Units: fF, µm, GHz, Ω, µs.\n\n\
         [coupling_capacitance]\n\
         # C(d_gap) = c0 / sqrt(d_gap) * (1 + eps * d_gap / d0)\n\
         c0 = {}\n\
         eps = {}\n\
         d0 = {}\n\n\
         [t1_limit]\n\
         # C_c(d_tip) = c_tip * (d_tip / d_ref)^-1; T1 = C_sigma / (omega^2 * C_c^2 * Z_0)\n\
         c_sigma = {}\n\
         c_tip = {}\n\
         d_ref = {}\n\
         f_mode = {}\n\
         z0 = {}\n\n\
         {}",
        fmt(c.coupling_capacitance.c0),
        fmt(c.coupling_capacitance.eps),
        fmt(c.coupling_capacitance.d0),
        fmt(c.t1_limit.c_sigma),
        fmt(c.t1_limit.c_tip),
        fmt(c.t1_limit.d_ref),
        fmt(c.t1_limit.f_mode),
        fmt(c.t1_limit.z0),
        render_noise(&c.noise),
    )
}

// ---------------------------------------------------------------------------
// Golden files: noise-free outputs at the starting designs, with and without
// cross-terms, frozen for regression tests.
// ---------------------------------------------------------------------------

fn render_point(header: &str, values: &BTreeMap<String, f64>) -> String {
    let mut out = format!("[{header}]\n");
    for (name, value) in values {
        let _ = writeln!(out, "{name} = {}", fmt(*value));
    }
    out
}

const GOLDEN_HEADER: &str = "# Frozen surrogate outputs at the starting design. \
                             Regenerate with `cargo run --bin calibrate`.\n\n";

fn golden_qubit_resonator(c: &qubit_resonator::QubitResonatorConstants) -> String {
    let x0 = qr_initial();
    let full = QubitResonatorSurrogate::with_constants(c.clone(), true, false)
        .evaluate(&x0, 8, 0)
        .unwrap();
    let plain = QubitResonatorSurrogate::with_constants(c.clone(), false, false)
        .evaluate(&x0, 8, 0)
        .unwrap();
    format!(
        "{GOLDEN_HEADER}{}\n{}\n{}",
        render_point("design", &x0),
        render_point("cross_terms", &full),
        render_point("power_law", &plain),
    )
}

fn golden_two_qubit(c: &two_qubit::TwoQubitConstants) -> String {
    let x0 = tq_initial();
    let full = TwoQubitSurrogate::with_constants(c.clone(), true, false)
        .evaluate(&x0, 8, 0)
        .unwrap();
    let plain = TwoQubitSurrogate::with_constants(c.clone(), false, false)
        .evaluate(&x0, 8, 0)
        .unwrap();
    format!(
        "{GOLDEN_HEADER}{}\n{}\n{}",
        render_point("design", &x0),
        render_point("cross_terms", &full),
        render_point("power_law", &plain),
    )
}

fn golden_capacitance(c: &capacitance::CapacitanceConstants) -> String {
    let x_gap = DesignPoint::from([("d_gap".into(), 20.0)]);
    let x_tip = DesignPoint::from([("d_tip".into(), 30.0)]);
    let coupling_full =
        CapacitanceSurrogate::with_constants(c.clone(), CapacitanceMode::Coupling, true, false)
            .evaluate(&x_gap, 8, 0)
            .unwrap();
    let coupling_plain =
        CapacitanceSurrogate::with_constants(c.clone(), CapacitanceMode::Coupling, false, false)
            .evaluate(&x_gap, 8, 0)
            .unwrap();
    let t1 = CapacitanceSurrogate::with_constants(c.clone(), CapacitanceMode::T1, true, false)
        .evaluate(&x_tip, 8, 0)
        .unwrap();
    let mut design = x_gap.clone();
    design.extend(x_tip.clone());
    format!(
        "{GOLDEN_HEADER}{}\n{}\n{}\n{}",
        render_point("design", &design),
        render_point("cross_terms", &coupling_full),
        render_point("power_law", &coupling_plain),
        render_point("t1", &t1),
    )
}
