// Acceptance gate: every headline numerical guarantee of the library, one
// pass/fail line per criterion.  Each criterion maps to a named scenario so
// the same checks are reproducible from the CLI (`dirac-lattice report`).

use dirac_lattice::scenario::{run_scenario, ScenarioParams};

struct Criterion {
    index: usize,
    scenario: &'static str,
    headline: &'static str,
    time_budget: Option<f64>,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        index: 1,
        scenario: "linear-reduction",
        headline: "1000 random coisotropic reductions of Lagrangians stay Lagrangian",
        time_budget: Some(10.0),
    },
    Criterion {
        index: 2,
        scenario: "morphism-composition",
        headline: "strong morphism composition and backward-image complements",
        time_budget: None,
    },
    Criterion {
        index: 3,
        scenario: "pairing-identity",
        headline: "lattice fiber pairing identity, machine exact up to N=256",
        time_budget: None,
    },
    Criterion {
        index: 4,
        scenario: "orthogonality",
        headline: "boundary-subspace fibers pair orthogonally: (E^s)-perp = E^(s-perp)",
        time_budget: None,
    },
    Criterion {
        index: 5,
        scenario: "lattice-reduction",
        headline: "lattice reduction dims, labeling isometry, gauge equivariance",
        time_budget: Some(30.0),
    },
    Criterion {
        index: 6,
        scenario: "beta-splitting",
        headline: "reduced splitting matches the group model (abelian closed form)",
        time_budget: None,
    },
    Criterion {
        index: 7,
        scenario: "cartan-three-form",
        headline: "3-form bracket oracle vs structure constants, second order",
        time_budget: None,
    },
    Criterion {
        index: 8,
        scenario: "qham-axioms",
        headline: "group-valued moment axioms on classes and fusions, controls fail",
        time_budget: None,
    },
    Criterion {
        index: 9,
        scenario: "ham-correspondence",
        headline: "reduce-after-lift round trip and the lattice moment condition",
        time_budget: None,
    },
    Criterion {
        index: 10,
        scenario: "multiplicative",
        headline: "multiplication/inversion relations, anchor composition, fusion defect",
        time_budget: None,
    },
    Criterion {
        index: 11,
        scenario: "generator-derivation",
        headline: "generator sections derive the ambient bracket at second order",
        time_budget: None,
    },
    Criterion {
        index: 12,
        scenario: "circle-model",
        headline: "periodic model: exact pairing, second-order bracket anomaly",
        time_budget: None,
    },
];

#[test]
fn acceptance() {
    let params = ScenarioParams::default();
    let mut failures = Vec::new();
    for c in CRITERIA {
        let rec = match run_scenario(c.scenario, &params) {
            Ok(r) => r,
            Err(e) => {
                println!("criterion {:2}: FAIL  {} [{e}]", c.index, c.headline);
                failures.push(c.index);
                continue;
            }
        };
        let mut ok = rec.pass;
        let mut note = format!(
            "max_error {:.2e} vs tol {:.0e}",
            rec.max_error, rec.tolerance
        );
        if let Some(order) = rec.order_estimate {
            note.push_str(&format!(", order ratio {order:.2}"));
        }
        if let Some(budget) = c.time_budget {
            note.push_str(&format!(", {:.2}s of {budget}s", rec.wall_time));
            ok &= rec.wall_time < budget;
        }
        println!(
            "criterion {:2}: {}  {} ({note})",
            c.index,
            if ok { "pass" } else { "FAIL" },
            c.headline
        );
        if !ok {
            failures.push(c.index);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
