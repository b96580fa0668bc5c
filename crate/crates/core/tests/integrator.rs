use std::f64::consts::PI;

use proptest::prelude::*;
use wtbridge_core::bridge::ModalMatrices;
use wtbridge_core::newmark::ModalIntegrator;

fn sdof(m: f64, f_hz: f64, zeta: f64) -> ModalMatrices {
    let w = 2.0 * PI * f_hz;
    ModalMatrices {
        mass: vec![m],
        damping: vec![2.0 * zeta * m * w],
        stiffness: vec![m * w * w],
    }
}

fn free(sys: &ModalIntegrator, q0: f64, v0: f64, steps: usize) -> Vec<f64> {
    let (mut q, mut v, mut a) = ([q0], [v0], [0.0]);
    sys.acceleration(&q, &v, &[0.0], &mut a);
    (0..steps)
        .map(|_| {
            sys.step(&mut q, &mut v, &mut a, &[0.0]);
            q[0]
        })
        .collect()
}

proptest! {
    // Trapezoidal rule on an undamped oscillator rotates the state by a fixed
    // angle per step: tan(w~ dt / 2) = w dt / 2.
    #[test]
    fn undamped_free_vibration_follows_discrete_frequency(
        f in 0.05f64..2.0,
        steps_per_period in 8.0f64..400.0,
    ) {
        let dt = 1.0 / (f * steps_per_period);
        let w = 2.0 * PI * f;
        let wd = 2.0 * (w * dt / 2.0).atan() / dt;
        let sys = ModalIntegrator::new(&sdof(1.0e6, f, 0.0), dt);
        let q = free(&sys, 1.0, 0.0, 2000);
        for (n, qn) in q.iter().enumerate() {
            let t = (n + 1) as f64 * dt;
            prop_assert!((qn - (wd * t).cos()).abs() < 1e-9, "step {n}: {qn}");
        }
    }

    #[test]
    fn damped_free_energy_never_increases(
        f in 0.05f64..2.0,
        zeta in 0.0f64..0.2,
        q0 in -1.0f64..1.0,
        v0 in -1.0f64..1.0,
    ) {
        let dt = 0.02 / f;
        let sys = ModalIntegrator::new(&sdof(2.0, f, zeta), dt);
        let (mut q, mut v, mut a) = ([q0], [v0], [0.0]);
        sys.acceleration(&q, &v, &[0.0], &mut a);
        let mut e = sys.energy(&q, &v);
        for _ in 0..1000 {
            sys.step(&mut q, &mut v, &mut a, &[0.0]);
            let e1 = sys.energy(&q, &v);
            prop_assert!(e1 <= e * (1.0 + 1e-12) + 1e-300);
            e = e1;
        }
    }

    #[test]
    fn response_is_linear_in_force(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let mm = ModalMatrices {
            mass: vec![1.0e7, 4.0e6, 9.0e5],
            damping: vec![6.0e4, 3.0e4, 1.0e4],
            stiffness: vec![4.0e6, 1.0e7, 2.0e6],
        };
        let sys = ModalIntegrator::new(&mm, 0.05);
        let force = |k: usize, j: usize, s: u64| {
            let x = (k as f64 * 0.37 + j as f64 * 1.3 + (s % 1000) as f64).sin();
            1.0e5 * x
        };
        let run = |coef: &dyn Fn(usize, usize) -> f64| {
            let (mut q, mut v, mut acc) = (vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]);
            let mut out = Vec::new();
            for k in 0..400 {
                let f: Vec<f64> = (0..3).map(|j| coef(k, j)).collect();
                sys.step(&mut q, &mut v, &mut acc, &f);
                out.extend_from_slice(&q);
            }
            out
        };
        let x1 = run(&|k, j| force(k, j, seed));
        let x2 = run(&|k, j| force(k, j, seed.wrapping_add(7)));
        let x12 = run(&|k, j| a * force(k, j, seed) + b * force(k, j, seed.wrapping_add(7)));
        let scale = x12.iter().chain(&x1).chain(&x2).fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..x12.len() {
            prop_assert!((x12[i] - (a * x1[i] + b * x2[i])).abs() <= 1e-12 * scale.max(1e-300));
        }
    }
}

#[test]
fn damped_decay_matches_damped_frequency_and_envelope() {
    // Small dt: the discrete solution approaches exp(-zeta w t) cos(w_d t) + ...
    let (f, zeta): (f64, f64) = (0.1, 0.005);
    let w = 2.0 * PI * f;
    let wd = w * (1.0 - zeta * zeta).sqrt();
    let dt = 1.0 / (f * 2000.0);
    let sys = ModalIntegrator::new(&sdof(1.0e7, f, zeta), dt);
    let q = free(&sys, 1.0, 0.0, 40_000);
    let mut worst: f64 = 0.0;
    for (n, qn) in q.iter().enumerate() {
        let t = (n + 1) as f64 * dt;
        let exact = (-zeta * w * t).exp() * ((wd * t).cos() + zeta * w / wd * (wd * t).sin());
        worst = worst.max((qn - exact).abs());
    }
    assert!(worst < 5e-4, "{worst}");
}
