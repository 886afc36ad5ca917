use proptest::prelude::*;

use reactive_islands::datasets::{label_by_escape, Channel, SectionSample};
use reactive_islands::dynamics::{hamiltonian_energy, vector_field};
use reactive_islands::integrator::{flow_map, integrate_variational, symplectic_form, IntegrationSettings};
use reactive_islands::manifolds::{polygon_area, winding_number, SectionConfig};
use reactive_islands::pipelines::mirror_agreement;
use reactive_islands::svc::{rbf_kernel, solve_binary_dual, stratified_folds, RbfKernelParams, Scaler, SmoSettings};
use reactive_islands::{PhaseState, SystemParams};

fn unit() -> SystemParams {
    SystemParams::default()
}

/// A section point at `E = 0.17`, `y = 0` from coordinates in the unit square.
fn section_state(u: f64, v: f64) -> Option<PhaseState> {
    let p = unit();
    let s = SectionConfig::new(0.0, 0.17);
    let (xm, pm) = (s.x_extent(&p).ok()?, s.px_extent(&p).ok()?);
    SectionSample::new(&p, &s, (2.0 * u - 1.0) * xm, (2.0 * v - 1.0) * pm).ok().map(|q| q.state())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection_of_the_vector_field(x in -2.0..2.0f64, y in -2.0..2.0f64, px in -2.0..2.0f64, py in -2.0..2.0f64) {
        let p = unit();
        let f = vector_field(&p, &PhaseState::new(x, y, px, py));
        let g = vector_field(&p, &PhaseState::new(-x, y, -px, py));
        prop_assert_eq!(g, [-f[0], f[1], -f[2], f[3]]);
    }

    #[test]
    fn energy_is_conserved(u in 0.0..1.0f64, v in 0.0..1.0f64, t in 0.1..3.0f64) {
        let Some(s) = section_state(u, v) else { return Ok(()) };
        let p = unit();
        let end = flow_map(&p, &s, t, &IntegrationSettings::default()).unwrap();
        prop_assert!((hamiltonian_energy(&p, &end) - 0.17).abs() < 1e-10);
    }

    #[test]
    fn time_reversal_round_trip(u in 0.0..1.0f64, v in 0.0..1.0f64, t in 0.1..3.0f64) {
        let Some(s) = section_state(u, v) else { return Ok(()) };
        let p = unit();
        let settings = IntegrationSettings::default();
        let back = flow_map(&p, &flow_map(&p, &s, t, &settings).unwrap(), -t, &settings).unwrap();
        prop_assert!(back.distance(&s) < 1e-9);
    }

    #[test]
    fn stm_is_symplectic(u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let Some(s) = section_state(u, v) else { return Ok(()) };
        let settings = IntegrationSettings::default().with_t_max(1.0);
        let run = integrate_variational(&unit(), &s, &settings, &[]).unwrap();
        let j = symplectic_form();
        let phi = run.stm.last().unwrap();
        prop_assert!((phi.transpose() * j * phi - j).amax() < 1e-8);
    }

    #[test]
    fn labels_respect_the_mirror(u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let Some(s) = section_state(u, v) else { return Ok(()) };
        let p = unit();
        let settings = IntegrationSettings::default();
        let a = label_by_escape(&p, &s, 30.0, &settings).unwrap();
        let b = label_by_escape(&p, &s.mirrored(), 30.0, &settings).unwrap();
        prop_assert_eq!(a.value.mirrored(), b.value);
        prop_assert_eq!(a.escape_time, b.escape_time);
    }

    #[test]
    fn mirror_agreement_of_a_mirrored_labeling(labels in prop::collection::vec(0u8..4, 1..50)) {
        let mirrored: Vec<u8> = labels.iter().map(|l| Channel::from_index(*l).unwrap().mirrored().index()).collect();
        prop_assert_eq!(mirror_agreement(&labels, &mirrored), 1.0);
    }

    #[test]
    fn kernel_is_a_symmetric_similarity(a in prop::array::uniform3(-3.0..3.0f64), b in prop::array::uniform3(-3.0..3.0f64), g in 0.01..100.0f64) {
        let kp = RbfKernelParams::new(1.0, g).unwrap();
        let k = rbf_kernel(&kp, &a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&k));
        prop_assert_eq!(k, rbf_kernel(&kp, &b, &a).unwrap());
        prop_assert_eq!(rbf_kernel(&kp, &a, &a).unwrap(), 1.0);
    }

    #[test]
    fn smo_solution_is_feasible(
        pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, any::<bool>()), 2..16),
        c in 0.1..100.0f64,
        g in 0.1..10.0f64,
    ) {
        let points: Vec<Vec<f64>> = pts.iter().map(|(x, y, _)| vec![*x, *y]).collect();
        let mut labels: Vec<f64> = pts.iter().map(|(_, _, l)| if *l { 1.0 } else { -1.0 }).collect();
        labels[0] = 1.0;
        labels[1] = -1.0;
        let kp = RbfKernelParams::new(c, g).unwrap();
        let (alpha, _, converged) = solve_binary_dual(&kp, &points, &labels, &SmoSettings::default()).unwrap();
        prop_assert!(converged);
        prop_assert!(alpha.iter().all(|a| (0.0..=c).contains(a)));
        let balance: f64 = alpha.iter().zip(&labels).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() < 1e-9 * c.max(1.0));
    }

    #[test]
    fn folds_are_stratified(labels in prop::collection::vec(0u8..4, 5..200), k in 2usize..6, seed in any::<u64>()) {
        let folds = stratified_folds(&labels, k, seed);
        prop_assert_eq!(&folds, &stratified_folds(&labels, k, seed));
        for c in 0..4u8 {
            let mut per = vec![0usize; k];
            for (l, f) in labels.iter().zip(&folds) {
                if *l == c {
                    per[*f] += 1;
                }
            }
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
        let mut sizes = vec![0usize; k];
        for f in &folds {
            sizes[*f] += 1;
        }
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn scaler_round_trip(rows in prop::collection::vec(prop::array::uniform3(-50.0..50.0f64), 2..30)) {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.to_vec()).collect();
        let s = Scaler::fit(&rows);
        for r in &rows {
            let back = s.inverse(&s.transform(r));
            for (a, b) in r.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn polygon_area_and_winding(cx in -1.0..1.0f64, cy in -1.0..1.0f64, r in 0.01..2.0f64, n in 3usize..40) {
        let mut curve: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                [cx + r * t.cos(), cy + r * t.sin()]
            })
            .collect();
        curve.push(curve[0]);
        let want = 0.5 * n as f64 * r * r * (std::f64::consts::TAU / n as f64).sin();
        prop_assert!((polygon_area(&curve).abs() - want).abs() < 1e-9 * want.max(1e-12));
        prop_assert_eq!(winding_number(&curve, [cx, cy]).abs(), 1);
        prop_assert_eq!(winding_number(&curve, [cx + 2.5 * r, cy]), 0);
    }
}
