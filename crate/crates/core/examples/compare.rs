//! Compare logistic regression with kNN on synthetic labels.

use cvclt::*;

fn main() -> Result<()> {
    let data = TaskSpec::LogisticLabels { p: 4, scale: 1.0 }.sample(500, &mut SeedStream::new(1))?;
    let partition = make_partition(data.len(), 10, 3, true)?;
    let diff = run_comparison(
        &data,
        &partition,
        &AlgorithmSpec::logistic(0.01),
        &AlgorithmSpec::knn(15),
        &LossFunction::ZeroOne,
    )?;
    let test = clt_improvement_test(&diff.losses, EstimatorKind::Out, 0.05)?;
    println!("{:?} (p = {:?})", test.decision, test.p_value);
    Ok(())
}
