use proptest::prelude::*;
use xbatch_core::criteria::{criteria_slug, parse_number, CriterionSpec};
use xbatch_core::{expand_grid, ParserRegistry};

fn reg() -> ParserRegistry {
    ParserRegistry::builtin()
}

fn parse(token: &str) -> xbatch_core::CriterionDef {
    reg().parse(&CriterionSpec::new(token).unwrap()).unwrap()
}

/// `<int>p<frac>` with the in-token decimal point.
fn token_number(int: u32, frac: u32) -> String {
    format!("{int}p{frac:02}")
}

fn builtin_tokens() -> impl Strategy<Value = String> {
    prop_oneof![
        (1u64..600).prop_map(|n| format!("population_size.Log{n}")),
        (1u64..40).prop_map(|n| format!("population_size.Linear{n}")),
        (1u64..40).prop_map(|n| format!("n_agents.{n}")),
        (0u32..20, 0u32..100, 1u32..20, 2u64..30).prop_map(|(a, f, d, k)| format!(
            "vel.min={}.max={}.C{k}",
            token_number(a, f),
            token_number(a + d, f)
        )),
        (1u64..12).prop_map(|k| format!("saa_noise.C{k}")),
        (1u64..12).prop_map(|k| format!("saa_noise.all.min=0p0.max=1p0.C{k}")),
        Just("ta_policy_set.all".to_string()),
        (1u64..50).prop_map(|z| format!("ta_policy_set.alpha+gamma.Z{z}")),
    ]
}

proptest! {
    #[test]
    fn log_cardinality(n in 1u64..1_000_000) {
        let def = parse(&format!("population_size.Log{n}"));
        prop_assert_eq!(def.len() as u32, n.ilog2() + 1);
        let sizes: Vec<String> = def.labels();
        prop_assert_eq!(&sizes[0], "size=1");
        for (p, l) in sizes.iter().enumerate() {
            prop_assert_eq!(l, &format!("size={}", 1u64 << p));
        }
    }

    #[test]
    fn range_has_k_equally_spaced_values(a in 0u32..50, fa in 0u32..100, d in 1u32..50, fd in 0u32..100, k in 2u64..64) {
        let min_t = token_number(a, fa);
        let max_t = token_number(a + d, (fa + fd) % 100);
        let (min, max) = (parse_number(&min_t).unwrap(), parse_number(&max_t).unwrap());
        prop_assume!(min != max);
        let def = parse(&format!("vel.min={min_t}.max={max_t}.C{k}"));
        let vals: Vec<f64> = def.values.iter().map(|v| v.numeric().unwrap()).collect();
        prop_assert_eq!(vals.len() as u64, k);
        prop_assert_eq!(vals[0], min);
        prop_assert_eq!(vals[vals.len() - 1], max);
        let step = (max - min) / (k - 1) as f64;
        for w in vals.windows(2) {
            prop_assert!(((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
        }
    }

    #[test]
    fn parse_is_pure(token in builtin_tokens()) {
        prop_assert_eq!(parse(&token), parse(&token));
    }

    #[test]
    fn labels_round_trip(token in builtin_tokens()) {
        let reg = reg();
        let spec = CriterionSpec::new(&token).unwrap();
        let (parser, spec) = reg.lookup(&spec).unwrap();
        let def = parser.parse(&spec).unwrap();
        for v in &def.values {
            let t = parser.format_value(v).expect("built-in parsers format every value");
            let again = reg.parse(&CriterionSpec::new(&t).unwrap()).unwrap();
            prop_assert_eq!(again.values.len(), 1, "{} -> {}", v.label, t);
            prop_assert_eq!(&again.values[0], v);
        }
    }

    #[test]
    fn bivariate_row_major(a in 1u64..9, b in 1u64..9) {
        let tokens = vec![format!("population_size.Linear{a}"), format!("saa_noise.C{b}")];
        let crit = reg().parse_raw(&tokens).unwrap();
        prop_assert_eq!(crit.cardinality() as u64, a * b);
        let grid = expand_grid(&crit).unwrap();
        prop_assert_eq!(grid.len() as u64, a * b);
        for (i, p) in grid.iter().enumerate() {
            prop_assert_eq!(p.index, i);
            prop_assert_eq!((p.row, p.col), (i / b as usize, i % b as usize));
            prop_assert_eq!(&p.labels[0], &crit.axis_a.values[p.row].label);
            prop_assert_eq!(&p.labels[1], &crit.axis_b.as_ref().unwrap().values[p.col].label);
        }
    }

    #[test]
    fn slug_is_path_safe(token in builtin_tokens()) {
        let slug = criteria_slug(std::slice::from_ref(&token));
        prop_assert!(!slug.contains('/'));
        prop_assert!(!slug.is_empty());
    }
}
