//! Cross-validation of the closed-form trajectories against direct adaptive
//! integration of the pendulum equation, plus root-finding oracles for the
//! turning point and the period.

mod support;

use core::f64::consts::PI;
use pondero::beatwave::{PhysicalConstants, PotentialParams};
use pondero::classical::{
    build_trajectory, energy_offset, eval_q, eval_qdot, linearized_period, period,
    turning_point, InitialCondition, TrajectoryClass,
};

const CONSTS: PhysicalConstants = PhysicalConstants::DEFAULT;
const EV: f64 = PhysicalConstants::EV;

fn rk_tols(lambda: f64, v_scale: f64) -> (f64, [f64; 2]) {
    (1e-12, [1e-13 * lambda, 1e-13 * v_scale])
}

/// Walks one trajectory with both methods over `n_samples` checkpoints and
/// returns the worst position/velocity discrepancies.
fn max_divergence(
    ic: &InitialCondition,
    pot: &PotentialParams,
    t_end: f64,
    n_samples: usize,
) -> (f64, f64) {
    let traj = build_trajectory(ic, pot).unwrap();
    let rhs = support::pendulum_rhs(pot.a, pot.lambda, CONSTS.m_e);
    let v_scale = (2.0 * pot.a / CONSTS.m_e).sqrt();
    let (rtol, atol) = rk_tols(pot.lambda, v_scale);
    let mut state = [ic.z0, ic.delta_v0];
    let mut t = 0.0;
    let mut worst_q = 0.0_f64;
    let mut worst_v = 0.0_f64;
    for i in 1..=n_samples {
        let t_next = t_end * i as f64 / n_samples as f64;
        state = support::integrate(&rhs, t, state, t_next, rtol, atol);
        t = t_next;
        let dq = (eval_q(&traj, t).unwrap() - state[0]).abs();
        let dv = (eval_qdot(&traj, t).unwrap() - state[1]).abs();
        worst_q = worst_q.max(dq);
        worst_v = worst_v.max(dv);
    }
    (worst_q, worst_v)
}

#[test]
fn closed_forms_match_adaptive_integration_across_regimes() {
    let lambda = 206e-9;
    let v_g = 0.2 * CONSTS.c;
    let amplitudes = [10e-3 * EV, 30e-3 * EV, 100e-3 * EV];
    // Log-spaced κ targets spanning deeply-trapped to fast-drifting orbits;
    // the spacing never lands near the κ = 1 separatrix.
    let n = 100;
    let mut checked_bound = 0;
    let mut checked_unbound = 0;
    for i in 0..n {
        let kappa_target = 0.05 * (400.0_f64).powf(i as f64 / (n - 1) as f64);
        let a = amplitudes[i % 3];
        let pot = PotentialParams::new(a, v_g, lambda).unwrap();
        let v_scale = (2.0 * a / CONSTS.m_e).sqrt();
        // Choose z₀ below the reachable limit, then fix |δv₀| so that the
        // pair lands exactly on the target κ.
        let theta_limit = if kappa_target > 1.0 {
            (1.0 / kappa_target).asin()
        } else {
            0.9 * PI / 2.0
        };
        let fractions = [0.0, 0.35, 0.7, 0.95];
        let theta0 = fractions[i % 4] * theta_limit;
        let dv_sq = (1.0 / (kappa_target * kappa_target) - theta0.sin().powi(2))
            * v_scale
            * v_scale;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let dv0 = sign * dv_sq.max(0.0).sqrt();
        let ic = InitialCondition::new(theta0 * lambda / PI, dv0, lambda).unwrap();

        let traj = build_trajectory(&ic, &pot).unwrap();
        assert!(
            (traj.kappa - kappa_target).abs() < 1e-9 * kappa_target,
            "ic construction drifted off the target kappa"
        );
        match traj.class {
            TrajectoryClass::Bound => checked_bound += 1,
            TrajectoryClass::Unbound => checked_unbound += 1,
            TrajectoryClass::Separatrix => panic!("grid unexpectedly hit the separatrix"),
        }

        let t_lin = linearized_period(&pot);
        let (dq, dv) = max_divergence(&ic, &pot, 5.0 * t_lin, 25);
        assert!(
            dq < 1e-6 * lambda,
            "position diverged: kappa={kappa_target:.4}, dq={dq:.3e}"
        );
        assert!(
            dv < 1e-6 * lambda / t_lin,
            "velocity diverged: kappa={kappa_target:.4}, dv={dv:.3e}"
        );
    }
    assert!(checked_bound >= 40 && checked_unbound >= 40);
}

#[test]
fn separatrix_form_tracks_integration() {
    let lambda = 206e-9;
    let pot = PotentialParams::new(30e-3 * EV, 0.2 * CONSTS.c, lambda).unwrap();
    let v_scale = (2.0 * pot.a / CONSTS.m_e).sqrt();
    // Launch from the potential minimum with exactly the escape velocity.
    let ic = InitialCondition::new(0.0, v_scale, lambda).unwrap();
    let traj = build_trajectory(&ic, &pot).unwrap();
    assert_eq!(traj.class, TrajectoryClass::Separatrix);
    // Homoclinic orbits amplify initial rounding exponentially, so compare
    // over a horizon where that amplification stays far below the tolerance.
    let (dq, dv) = max_divergence(&ic, &pot, 2.5 * linearized_period(&pot), 20);
    assert!(dq < 1e-6 * lambda, "dq={dq:.3e}");
    assert!(dv < 1e-6 * v_scale, "dv={dv:.3e}");
    // And the approach to the hilltop is monotone with decaying speed.
    let t_lin = linearized_period(&pot);
    let q1 = eval_q(&traj, 2.0 * t_lin).unwrap();
    let q2 = eval_q(&traj, 4.0 * t_lin).unwrap();
    assert!(q1 < q2 && q2 < 0.5 * lambda);
    assert!(eval_qdot(&traj, 4.0 * t_lin).unwrap() < 1e-3 * v_scale);
}

#[test]
fn period_matches_velocity_zero_crossings_of_integrated_orbit() {
    let lambda = 206e-9;
    let pot = PotentialParams::new(30e-3 * EV, 0.2 * CONSTS.c, lambda).unwrap();
    let v_scale = (2.0 * pot.a / CONSTS.m_e).sqrt();
    // κ = 1.5 via a pure velocity kick at the potential minimum.
    let ic = InitialCondition::new(0.0, v_scale / 1.5, lambda).unwrap();
    let t_analytic = period(&ic, &pot).unwrap();

    let rhs = support::pendulum_rhs(pot.a, pot.lambda, CONSTS.m_e);
    let (rtol, atol) = rk_tols(lambda, v_scale);
    let qdot_at = |t: f64| -> f64 {
        if t == 0.0 {
            return ic.delta_v0;
        }
        support::integrate(&rhs, 0.0, [ic.z0, ic.delta_v0], t, rtol, atol)[1]
    };
    // Bracket the first two q̇ = 0 crossings on a coarse grid, then bisect.
    let mut crossings = Vec::new();
    let dt = t_analytic / 400.0;
    let mut prev = (0.0, qdot_at(0.0));
    let mut step = 1;
    while crossings.len() < 2 {
        let t = step as f64 * dt;
        let v = qdot_at(t);
        if prev.1 != 0.0 && v != 0.0 && (prev.1 > 0.0) != (v > 0.0) {
            let (mut lo, mut hi) = (prev.0, t);
            let lo_sign = prev.1 > 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (qdot_at(mid) > 0.0) == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(0.5 * (lo + hi));
        }
        prev = (t, v);
        step += 1;
        assert!(step < 1000, "failed to bracket the velocity zero crossings");
    }
    let t_oracle = 2.0 * (crossings[1] - crossings[0]);
    assert!(
        ((t_oracle - t_analytic) / t_analytic).abs() < 1e-8,
        "period mismatch: analytic {t_analytic:.6e}, crossings {t_oracle:.6e}"
    );
}

#[test]
fn turning_point_matches_energy_balance_bisection() {
    let lambda = 206e-9;
    let v_g = 0.2 * CONSTS.c;
    let pot = PotentialParams::new(30e-3 * EV, v_g, lambda).unwrap();
    let u_p = |q: f64| 0.5 * pot.a * (1.0 - (2.0 * PI * q / lambda).cos());

    // The slow-release case: launched at a minimum with a −9 eV lab-frame
    // deficit, the electron is trapped and climbs until the potential has
    // absorbed its rest-frame kinetic energy.
    let dv0 = pondero::classical::delta_v_from_energy_offset(-9.0 * EV, v_g, &CONSTS).unwrap();
    let ic = InitialCondition::new(0.0, dv0, lambda).unwrap();
    let q_analytic = turning_point(&ic, &pot).unwrap();

    let target = u_p(ic.z0) + 0.5 * CONSTS.m_e * dv0 * dv0;
    let (mut lo, mut hi) = (0.0, 0.5 * lambda);
    assert!(u_p(lo) < target && target < u_p(hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if u_p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q_oracle = 0.5 * (lo + hi);
    assert!(
        (q_analytic - q_oracle).abs() < 1e-10 * lambda,
        "turning point mismatch: analytic {q_analytic:.6e}, bisection {q_oracle:.6e}"
    );

    // The same trapped orbit, integrated, actually attains the turning point.
    let rhs = support::pendulum_rhs(pot.a, pot.lambda, CONSTS.m_e);
    let v_scale = (2.0 * pot.a / CONSTS.m_e).sqrt();
    let (rtol, atol) = rk_tols(lambda, v_scale);
    let t_per = period(&ic, &pot).unwrap();
    let mut q_peak = 0.0_f64;
    let mut state = [ic.z0, ic.delta_v0];
    let mut t = 0.0;
    for i in 1..=200 {
        let t_next = t_per * i as f64 / 200.0;
        state = support::integrate(&rhs, t, state, t_next, rtol, atol);
        t = t_next;
        q_peak = q_peak.max(state[0].abs());
    }
    assert!(q_peak <= q_analytic * (1.0 + 1e-9));
    assert!(q_peak >= q_analytic * (1.0 - 1e-3));
}

#[test]
fn lab_frame_energy_excursion_for_the_slow_release_case() {
    // A trapped electron released 9 eV below the frame energy is re-accelerated
    // up to roughly +9 eV above it half an oscillation later; the closed form
    // and the integrated orbit agree on the full excursion.
    let lambda = 206e-9;
    let v_g = 0.2 * CONSTS.c;
    let pot = PotentialParams::new(30e-3 * EV, v_g, lambda).unwrap();
    let dv0 = pondero::classical::delta_v_from_energy_offset(-9.0 * EV, v_g, &CONSTS).unwrap();
    let ic = InitialCondition::new(0.0, dv0, lambda).unwrap();
    let traj = build_trajectory(&ic, &pot).unwrap();
    let t_per = period(&ic, &pot).unwrap();
    let (de_min, de_max) = pondero::classical::energy_bounds(&ic, &pot).unwrap();
    let mut seen_min = f64::INFINITY;
    let mut seen_max = f64::NEG_INFINITY;
    for i in 0..400 {
        let t = t_per * i as f64 / 400.0;
        let de = energy_offset(eval_qdot(&traj, t).unwrap(), v_g, &CONSTS);
        seen_min = seen_min.min(de);
        seen_max = seen_max.max(de);
    }
    let span = de_max - de_min;
    assert!((seen_min - de_min).abs() < 1e-4 * span);
    assert!((seen_max - de_max).abs() < 1e-4 * span);
    assert!((de_min + 9.0 * EV).abs() < 0.01 * EV);
    assert!((de_max - 9.0 * EV).abs() < 0.15 * EV);
}
