//! Convergence smoke property: every family drives the condition-100
//! quadratic bowl below f = 1e-3 within 20,000 steps at its best grid lr.

use optbench::harness::BASE_LR_GRID;
use optbench::math::Tensor;
use optbench::opt::{create_optimizer, Category, HyperParams, OptFamily, ALL_FAMILIES};
use optbench::zoo::{build_model, Family, ModelSpec};

fn bowl_value(theta: &[f64], diag: &[f64]) -> f64 {
    theta
        .iter()
        .zip(diag)
        .map(|(&t, &a)| 0.5 * a * t * t)
        .sum()
}

/// Minimum bowl value reached within the step budget at one lr.
fn run_at_lr(family: OptFamily, lr: f64, max_steps: usize) -> f64 {
    let mut spec = ModelSpec::new(Family::QuadBowl, 1, 10);
    spec.cond = 100.0;
    spec.init_seed = 12345;
    let model = build_model(&spec, 0, 0).unwrap();
    let diag = model.quad_diagonal();
    let mut theta = model.params()[0].value.clone();

    let hp = HyperParams::for_family(family, lr, 0.0);
    let mut st = create_optimizer(family, hp, &[("theta".into(), vec![10])]).unwrap();
    let mut best = bowl_value(theta.data(), &diag);
    for _ in 0..max_steps {
        if st.wants_hessian() {
            let h = vec![Tensor::from_vec(&[10], diag.clone()).unwrap()];
            st.update_hessian(&h);
        }
        let grad: Vec<f64> = theta
            .data()
            .iter()
            .zip(&diag)
            .map(|(&t, &a)| a * t)
            .collect();
        let g = vec![Tensor::from_vec(&[10], grad).unwrap()];
        if !st.step(&mut [&mut theta], &g, lr) {
            return best; // diverged at this lr; other grid points may work
        }
        let f = bowl_value(theta.data(), &diag);
        if f < best {
            best = f;
        }
        if best < 1e-3 {
            return best;
        }
    }
    best
}

#[test]
fn every_family_solves_the_bowl_at_its_best_grid_lr() {
    for family in ALL_FAMILIES {
        let scale = match family.category() {
            Category::A | Category::D => 10.0,
            _ => 1.0,
        };
        let mut best_over_grid = f64::INFINITY;
        for base in BASE_LR_GRID {
            let reached = run_at_lr(family, base * scale, 20_000);
            if reached < best_over_grid {
                best_over_grid = reached;
            }
            if best_over_grid < 1e-3 {
                break;
            }
        }
        assert!(
            best_over_grid < 1e-3,
            "{} best over grid {best_over_grid}",
            family.as_str()
        );
    }
}
