//! Acceptance gate: the default claim suite, grouped into criteria 1 to 11.

use cfwalker::claims::{run_claims, ClaimReport, ClaimResult, RunOptions};
use cfwalker::config::Config;

struct Criterion {
    number: usize,
    title: &'static str,
    /// `(claim_id, family prefix or "", required tolerance)`; tolerance 1.0 marks normalized claims.
    parts: &'static [(&'static str, &'static str, f64)],
}

const THEOREM_FAMILIES: [&str; 4] = ["ppwave_f1", "sim_f2", "sphere_f3", "hyp_f4"];

const CRITERIA: [Criterion; 11] = [
    Criterion {
        number: 1,
        title: "families 1-4 are conformally flat",
        parts: &[
            ("weyl_zero", "ppwave_f1", 1e-9),
            ("weyl_zero", "sim_f2", 1e-9),
            ("weyl_zero", "sphere_f3", 1e-9),
            ("weyl_zero", "hyp_f4", 1e-9),
        ],
    },
    Criterion {
        number: 2,
        title: "Walker conditions hold, and fail on a perturbed pp-wave",
        parts: &[("lemma1", "", 1e-8), ("lemma1_perturbed", "", 1.0)],
    },
    Criterion {
        number: 3,
        title: "Ricci structure of families 1 and 2",
        parts: &[("ricci_f1", "", 1.0), ("ricci_f2", "", 1.0)],
    },
    Criterion {
        number: 4,
        title: "scalar curvature of families 2-4",
        parts: &[("scalar_f2", "", 1e-9), ("scalar_f34", "", 1e-8)],
    },
    Criterion {
        number: 5,
        title: "holonomy spans",
        parts: &[
            ("holonomy_f1", "", 1.0),
            ("holonomy_sim", "", 1.0),
            ("holonomy_deterministic", "", 0.0),
        ],
    },
    Criterion {
        number: 6,
        title: "dimension-4 GT package",
        parts: &[
            ("weyl_zero", "gt_original", 1.0),
            ("weyl_zero", "gt_corrected", 1e-9),
            ("gt_holonomy", "", 1.0),
            ("gt_decomposition", "", 1e-9),
        ],
    },
    Criterion {
        number: 7,
        title: "decomposable Walker metrics",
        parts: &[
            ("weyl_zero", "thc3_", 1e-9),
            ("thc3_flat_riemann", "", 1e-10),
        ],
    },
    Criterion {
        number: 8,
        title: "products of space forms",
        parts: &[
            ("weyl_zero", "product", 1e-9),
            ("cotton_surface_line", "", 1e-9),
        ],
    },
    Criterion {
        number: 9,
        title: "Killing fields on sphere and Lobachevskian charts",
        parts: &[("killing_fields", "", 1e-9), ("killing_algebra", "", 0.0)],
    },
    Criterion {
        number: 10,
        title: "cross-validation of closed forms, frame formulas and jets",
        parts: &[
            ("closed_forms", "", 1e-8),
            ("frame_formulas", "", 1e-8),
            ("jets_fd", "", 1e-6),
        ],
    },
    Criterion {
        number: 11,
        title: "families 1 and 2 have W = 0 and s = 0 at n = 2",
        parts: &[("nordstrom", "", 1e-9)],
    },
];

fn select<'a>(report: &'a ClaimReport, claim: &str, family: &str) -> Vec<&'a ClaimResult> {
    report
        .results
        .iter()
        .filter(|r| r.claim_id == claim && r.family.starts_with(family))
        .collect()
}

/// Checks one criterion; returns the problems found.
fn check(report: &ClaimReport, c: &Criterion) -> Vec<String> {
    let mut problems = Vec::new();
    for &(claim, family, tol) in c.parts {
        let rows = select(report, claim, family);
        if rows.is_empty() {
            problems.push(format!("{claim} [{family}] produced no results"));
        }
        for r in rows {
            if r.tolerance != tol {
                problems.push(format!(
                    "{claim} [{}] ran at tolerance {:e}, expected {tol:e}",
                    r.family, r.tolerance
                ));
            }
            if !r.pass {
                problems.push(format!(
                    "{claim} [{} n={}] residual {:.3e} > {:.1e}",
                    r.family, r.n, r.max_residual, r.tolerance
                ));
            }
        }
    }
    problems
}

fn coverage(report: &ClaimReport) -> Vec<String> {
    let mut problems = Vec::new();
    for (claim, families) in [
        ("weyl_zero", &THEOREM_FAMILIES[..]),
        ("lemma1", &THEOREM_FAMILIES[..]),
        ("frame_formulas", &THEOREM_FAMILIES[..]),
        ("holonomy_sim", &THEOREM_FAMILIES[1..]),
    ] {
        for family in families {
            for n in [2, 3, 4] {
                if !report
                    .results
                    .iter()
                    .any(|r| r.claim_id == claim && r.family == *family && r.n == n)
                {
                    problems.push(format!("{claim} missing {family} n={n}"));
                }
            }
        }
    }
    for d in [4, 5, 6] {
        if !select(report, "weyl_zero", "product")
            .iter()
            .any(|r| r.n == d)
        {
            problems.push(format!("weyl_zero missing product d={d}"));
        }
    }
    problems
}

fn main() {
    let cfg = Config::default();
    assert_eq!(
        (cfg.seed, cfg.samples, cfg.ns.clone()),
        (42, 100, vec![2, 3, 4])
    );
    let report = run_claims(&cfg, RunOptions::default()).expect("default suite runs");

    let mut failed = Vec::new();
    for c in &CRITERIA {
        let problems = check(&report, c);
        let status = if problems.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {:>2}: {status}  {}", c.number, c.title);
        for p in &problems {
            println!("    {p}");
        }
        if !problems.is_empty() {
            failed.push(c.number);
        }
    }
    let mut other = coverage(&report);
    other.extend(
        report
            .skipped
            .iter()
            .map(|s| format!("skipped {} [{}]: {}", s.claim_id, s.family, s.reason)),
    );
    for p in &other {
        println!("    {p}");
    }
    println!(
        "acceptance: {} of {} criteria pass ({} claim instances)",
        CRITERIA.len() - failed.len(),
        CRITERIA.len(),
        report.results.len()
    );
    if !failed.is_empty() || !other.is_empty() || report.exit_code() != 0 {
        std::process::exit(1);
    }
}
