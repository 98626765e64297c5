//! Small-scale study behaviour: degenerate sweeps, closed-form cases and
//! report invariants.

use mwlab::experiments::{run_study, ExperimentConfig, StudyKind, CSV_HEADER};
use mwlab::Error;

const UNIT_AFFINE: &str = r#"
[initial.labels]
kind = "uniform_box"
lower = [0.0]
upper = [1.0]

[initial.opinions]
kind = "monokinetic"
profile = "affine"
intercept = [0.0]
slope = [0.5]
"#;

const TWO_NODES: &str = r#"
[initial.labels]
kind = "discrete"
atoms = [[0.0], [1.0]]
weights = [0.5, 0.5]

[initial.opinions]
kind = "monokinetic"
profile = "affine"
intercept = [0.0]
slope = [2.0]
"#;

fn config(head: &str, kernel: &str, radius: f64, initial: &str) -> ExperimentConfig {
    let text = format!("{head}\n[kernel]\nname = \"{kernel}\"\nradius = {radius}\n{initial}");
    ExperimentConfig::from_toml(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

#[test]
fn sampling_rate_with_two_sizes_reports_rows_but_no_fit() {
    let c = config(
        "study = \"sampling_rate\"\nseeds = 2\nn_list = [16, 32]\nt_final = 0.0",
        "linear_consensus",
        1.0,
        UNIT_AFFINE,
    );
    let report = run_study(&c).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(report.fit.is_none());
    assert!(report.fit_error.as_deref().unwrap().contains("at least 3"));
    assert!(report.rows.iter().all(|r| r.gap >= 0.0));
}

#[test]
fn dobrushin_at_time_zero_reports_the_sampling_gap() {
    let c = config(
        "study = \"dobrushin\"\nseeds = 2\nm_list = [2]\nn_list = [8, 16, 32]\nn_ref = 64\nt_final = 0.0",
        "linear_consensus",
        1.0,
        UNIT_AFFINE,
    );
    let report = run_study(&c).unwrap();
    for row in &report.rows {
        let initial: f64 = row.extra_value("initial_gap").unwrap().parse().unwrap();
        assert_eq!(row.gap, initial);
        assert_eq!(row.extra_value("ceiling_ok"), Some("true"));
    }
}

#[test]
fn multiwise_limit_is_exact_for_affine_responses() {
    let c = config(
        "study = \"multiwise_limit\"\nm_list = [1, 2, 4]\nt_final = 1.0\ndt = 0.01",
        "linear_consensus",
        4.0,
        TWO_NODES,
    );
    let report = run_study(&c).unwrap();
    assert!(report.rows.iter().all(|r| r.gap <= 1e-9), "{:?}", report.rows);
}

#[test]
fn multiwise_single_order_surfaces_fit_error() {
    let c = config(
        "study = \"multiwise_limit\"\nm_list = [1]\nt_final = 0.5\ndt = 0.01",
        "quadratic_statistic",
        4.0,
        TWO_NODES,
    );
    let report = run_study(&c).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.rows[0].gap > 0.0);
    assert!(report.fit_error.is_some());
}

#[test]
fn monokinetic_check_small_cases() {
    let linear = config(
        "study = \"monokinetic_check\"\nm_list = [3]\ndt_list = [0.01, 0.001]\nt_final = 1.0",
        "linear_consensus",
        4.0,
        TWO_NODES,
    );
    assert!(run_study(&linear).unwrap().rows.iter().all(|r| r.gap <= 1e-9));
    let at_zero = config(
        "study = \"monokinetic_check\"\nm_list = [2]\ndt_list = [0.1]\nt_final = 0.0",
        "quadratic_statistic",
        4.0,
        TWO_NODES,
    );
    assert_eq!(run_study(&at_zero).unwrap().rows[0].gap, 0.0);
}

fn joint(phi: &str, kernel: &str) -> ExperimentConfig {
    config(
        &format!(
            "study = \"joint_limit\"\nseeds = 2\nn_list = [16, 32, 64]\nn_ref = 256\nruns = 8\nt_final = 0.25\ndt = 0.125\nrhs_mode = \"mc\"\nsamples = 2\n[test_function]\n{phi}"
        ),
        kernel,
        0.5,
        UNIT_AFFINE,
    )
}

#[test]
fn joint_limit_with_zero_test_function_has_zero_gaps() {
    let report = run_study(&joint("kind = \"constant\"\nvalue = 0.0", "quadratic_statistic")).unwrap();
    assert!(report.rows.iter().all(|r| r.gap == 0.0));
    let ms: Vec<usize> = report.rows.iter().map(|r| r.m.unwrap()).collect();
    assert!(ms.windows(2).all(|w| w[0] <= w[1]));
}

/// With affine responses the mean opinion is conserved, so the pairing with
/// `φ ≡ 1` is the sample mean of `y_0` at every time and the limit keeps the
/// `ν`-mean: the gap is pure label sampling error.
#[test]
fn joint_limit_constant_test_function_is_sampling_error_for_consensus() {
    let c = joint("kind = \"constant\"\nvalue = 1.0", "linear_consensus");
    let report = run_study(&c).unwrap();
    for row in &report.rows {
        assert!(row.gap > 0.0 && row.gap < 0.1, "{row:?}");
    }
}

fn with_slope(slope: f64) -> String {
    UNIT_AFFINE.replace("slope = [0.5]", &format!("slope = [{slope}]"))
}

/// Monokinetic samples lie on the graph of `y_0 = a x`, so under the `ℓ1`
/// phase-space cost every transport distance is `(1 + |a|)` times the
/// distance between the label samples (`a = 0`).
fn assert_label_scaling(head: &str) {
    let flat = run_study(&config(head, "quadratic_statistic", 1.0, &with_slope(0.0))).unwrap();
    let tilted = run_study(&config(head, "quadratic_statistic", 1.0, &with_slope(0.5))).unwrap();
    for (f, t) in flat.rows.iter().zip(&tilted.rows) {
        assert!(f.gap > 0.0);
        assert!((t.gap - 1.5 * f.gap).abs() <= 1e-12 * t.gap, "{} vs {}", t.gap, f.gap);
    }
}

#[test]
fn chaos_at_time_zero_is_label_sampling_distance() {
    assert_label_scaling(
        "study = \"chaos\"\nseeds = 2\nm_list = [2]\nn_list = [4, 8]\nn_ref = 64\nruns = 32\nt_final = 0.0\nreference_coupling = \"independent\"",
    );
    // synchronous coupling at t = 0 compares each tuple with itself
    let sync = config(
        "study = \"chaos\"\nseeds = 1\nm_list = [2]\nn_list = [4, 8]\nn_ref = 64\nruns = 32\nt_final = 0.0",
        "quadratic_statistic",
        1.0,
        UNIT_AFFINE,
    );
    assert!(run_study(&sync).unwrap().rows.iter().all(|r| r.gap == 0.0));
}

#[test]
fn chaos_pairs_with_infinite_q() {
    let c = config(
        "study = \"chaos\"\nseeds = 2\nk = 2\nq = \"inf\"\nm_list = [1]\nn_list = [4, 8, 16]\nn_ref = 64\nruns = 16\nt_final = 0.2\ndt = 0.1",
        "quadratic_statistic",
        1.0,
        UNIT_AFFINE,
    );
    let report = run_study(&c).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.rows.iter().all(|r| r.q.is_infinite() && r.gap.is_finite()));
    assert!(report.to_csv().lines().nth(1).unwrap().contains(",inf,"));
}

#[test]
fn csv_is_reproducible_and_well_formed() {
    let c = config(
        "study = \"dobrushin\"\nseeds = 2\nm_list = [1]\nn_list = [8, 16, 32]\nn_ref = 64\nt_final = 0.5\ndt = 0.1",
        "quadratic_statistic",
        1.0,
        UNIT_AFFINE,
    );
    let a = run_study(&c).unwrap().to_csv();
    let b = run_study(&c).unwrap().to_csv();
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    for line in lines {
        assert_eq!(line.split(',').count(), 12, "{line}");
    }
    assert_eq!(c.study, StudyKind::Dobrushin);
}

#[test]
fn blow_up_is_reported_as_an_error() {
    let c = config(
        "study = \"multiwise_limit\"\nm_list = [1, 2, 4]\nt_final = 5.0\ndt = 0.05",
        "saturated_quadratic",
        2.0,
        "[initial.labels]\nkind = \"discrete\"\natoms = [[0.0]]\nweights = [1.0]\n[initial.opinions]\nkind = \"monokinetic\"\nprofile = \"constant\"\nvalue = [1.9]",
    );
    let err = run_study(&c).unwrap_err();
    assert!(matches!(err, Error::BlowUp(_)), "{err:?}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn sampling_gap_is_label_sampling_distance() {
    assert_label_scaling("study = \"sampling_rate\"\nseeds = 2\nn_list = [8, 16, 32]\nt_final = 0.0");
}
