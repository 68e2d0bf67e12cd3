//! Run a few registered claims and print both report formats.

use cfwalker::claims::{claim_ids, run_claims, RunOptions};
use cfwalker::config::Config;

fn main() -> cfwalker::Result<()> {
    println!("registered: {}", claim_ids().join(", "));

    let cfg = Config::parse("n = 2, 3\nsamples = 20\nclaims = weyl_zero, scalar_f34, killing_algebra\nfamily = hyp_f4\n")?;
    let report = run_claims(&cfg, RunOptions::default())?;
    print!("{}", report.table());
    print!("{}", report.to_json_lines());

    let all = run_claims(
        &Config {
            samples: 10,
            ns: vec![2],
            claims: Some(vec!["killing_fields".into(), "nordstrom".into()]),
            ..Config::default()
        },
        RunOptions::default(),
    )?;
    println!("exit code would be {}", all.exit_code());
    Ok(())
}
