//! Full acceptance run on the default model. Prints one line per criterion.

use granspec::config::RunConfig;
use granspec::scenario::Model;
use granspec::verify::run_verification;

#[test]
fn acceptance_criteria() {
    let model = Model::new(RunConfig::default()).expect("default config is valid");
    let report = run_verification(&model);
    for c in &report.criteria {
        println!("{}", c.line());
    }
    println!("total {:.1} s", report.seconds);
    let failed: Vec<&str> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    assert!(report.passed(), "failed criteria: {failed:?}");
}
