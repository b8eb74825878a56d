//! The metric toolkit on small hand-made data.
//!
//! cargo run --example agreement_metrics

use llmcoder::metrics::{
    accuracy, bootstrap_ci, cohens_kappa, confusion, icc, krippendorff_alpha, labels, mae, precision_recall_f1,
    Averaging, PrfTarget, RatingsMatrix, Scale,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Gold vs model on a three-class variable; one model answer missing.
    let gold = labels(&["empirical", "review", "empirical", "conceptual", "empirical", "review", "conceptual", "empirical"].map(Some));
    let pred = labels(&[Some("empirical"), Some("review"), Some("review"), Some("conceptual"), Some("empirical"), None, Some("empirical"), Some("empirical")]);
    let cm = confusion(&gold, &pred)?;
    println!("classes {:?}, counts {:?}, dropped {}", cm.classes, cm.counts, cm.dropped);
    println!("accuracy {:.3}", accuracy(&cm));
    for avg in [Averaging::Macro, Averaging::Micro, Averaging::Weighted] {
        let r = precision_recall_f1(&cm, &PrfTarget::Average(avg));
        println!("{avg:?}: P {:.3} R {:.3} F1 {:.3}", r.precision, r.recall, r.f1);
    }
    let k = cohens_kappa(&gold, &pred)?;
    println!("Cohen's kappa {:.3} (p_o {:.3}, p_e {:.3}, n {})", k.kappa, k.p_o, k.p_e, k.n);

    // Three coders rating five units; NaN marks a missing rating.
    let nan = f64::NAN;
    let ratings = vec![
        vec![1.0, 1.0, 2.0],
        vec![2.0, 2.0, 2.0],
        vec![3.0, 3.0, nan],
        vec![4.0, 3.0, 4.0],
        vec![5.0, 5.0, 5.0],
    ];
    for scale in [Scale::Nominal, Scale::Ordinal, Scale::Interval] {
        let a = krippendorff_alpha(&RatingsMatrix::from_numeric(&ratings, scale)?)?;
        println!("alpha ({scale:?}) {:.3}", a.alpha);
    }
    let complete: Vec<Vec<f64>> = ratings.iter().filter(|r| r.iter().all(|v| !v.is_nan())).cloned().collect();
    let r = icc(&RatingsMatrix::from_numeric(&complete, Scale::Interval)?)?;
    println!("ICC(2,1) {:.3} on {} complete units", r.icc, r.n);

    let truth = [Some(3.0), Some(10.0), Some(7.0)];
    let guess = [Some(4.0), Some(8.0), None];
    println!("MAE {:.3}", mae(&truth, &guess)?);

    // Percentile bootstrap of accuracy over resampled documents.
    let ci = bootstrap_ci(
        gold.len(),
        |idx| {
            let g: Vec<_> = idx.iter().map(|&i| gold[i].clone()).collect();
            let p: Vec<_> = idx.iter().map(|&i| pred[i].clone()).collect();
            Ok(accuracy(&confusion(&g, &p)?))
        },
        2000,
        0.95,
        1,
    )?;
    println!("accuracy 95% CI [{:.3}, {:.3}] from {} replicates", ci.lo, ci.hi, ci.replicates);
    Ok(())
}
