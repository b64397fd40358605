use ambistop::experiments::{run_minimax_check, CERTIFICATION_SHAPES};
use ambistop::minimax::{dual_value, primal_value, SmallInstance};
use ambistop::{AmbiguityFunction, SimplexPoint};

#[test]
fn binary_tree_has_five_rules() {
    let inst = SmallInstance::random(1, 2, 2, 2).unwrap();
    assert_eq!(inst.rule_count(), 5.0);
}

#[test]
fn constant_payoff_has_no_gap() {
    let inst = SmallInstance::random(2, 3, 2, 2).unwrap().with_constant_payoff(1.5);
    let p = SimplexPoint::make_simplex(&[0.2, 0.3, 0.5]).unwrap();
    let f = AmbiguityFunction::power(-1.0).unwrap();
    let d = dual_value(&inst, &p, &f, 0.01).unwrap();
    assert!((d.value - 1.5).abs() < 1e-9);
    assert!((primal_value(&inst, &p, &f).unwrap().value - 1.5).abs() < 1e-12);
}

#[test]
fn certification_table_has_every_case() {
    let t = run_minimax_check(7, 0.02).unwrap();
    let gaps: Vec<f64> = t.rows.iter().filter(|r| r.quantity.ends_with("_gap")).map(|r| r.value).collect();
    assert_eq!(gaps.len(), CERTIFICATION_SHAPES.len() * 4);
    assert!(gaps.iter().all(|g| *g < 1e-2), "{gaps:?}");
}

#[test]
fn grid_step_is_bounded() {
    let inst = SmallInstance::random(3, 2, 2, 2).unwrap();
    let f = AmbiguityFunction::Log;
    assert!(dual_value(&inst, &SimplexPoint::uniform(2), &f, 0.05).is_err());
}
