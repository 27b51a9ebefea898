use std::f64::consts::PI;

use isospec_core::{Error, Grid, OperatorSpec, PerturbationSeq, Potential, RobinAngles, SpectralDatum, SpectrumTable};
use proptest::prelude::*;

fn operator_strategy() -> impl Strategy<Value = OperatorSpec> {
    (16usize..80, 0.01..PI - 0.01, 0.01..PI - 0.01).prop_flat_map(|(m, alpha, beta)| {
        prop::collection::vec(-1e3..1e3f64, m + 1).prop_map(move |q| {
            OperatorSpec::new(
                Potential::new(Grid::new(m).unwrap(), q).unwrap(),
                RobinAngles::new(alpha, beta).unwrap(),
            )
        })
    })
}

fn spectrum_strategy() -> impl Strategy<Value = SpectrumTable> {
    prop::collection::vec((0.01..50.0f64, 0.1..10.0f64, prop::option::of(0.1..10.0f64), -5.0..5.0f64), 1..12).prop_map(
        |rows| {
            let mut mu = -3.0;
            let data = rows
                .into_iter()
                .enumerate()
                .map(|(n, (gap, a, b, end))| {
                    mu += gap;
                    let phi_end = if end.abs() < 0.1 { 1.0 } else { end };
                    SpectralDatum {
                        n,
                        mu,
                        a,
                        b,
                        phi_end,
                        kappa: phi_end,
                    }
                })
                .collect();
            SpectrumTable::new(data).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn operator_json_round_trip(op in operator_strategy()) {
        let back = OperatorSpec::from_json(&op.to_json()).unwrap();
        prop_assert_eq!(back.potential.values(), op.potential.values());
        prop_assert_eq!(back.alpha(), op.alpha());
        prop_assert_eq!(back.beta(), op.beta());
    }

    #[test]
    fn spectrum_json_round_trip(spec in spectrum_strategy()) {
        let back = SpectrumTable::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(back.data(), spec.data());
    }

    #[test]
    fn coefficient_json_round_trip(c in prop::collection::vec(-10.0..10.0f64, 0..20)) {
        let seq = PerturbationSeq::new(c).unwrap();
        let back = PerturbationSeq::from_json(&seq.to_json()).unwrap();
        prop_assert_eq!(back.coeffs(), seq.coeffs());
    }

    #[test]
    fn potential_csv_round_trip(op in operator_strategy()) {
        let mut buf = Vec::new();
        op.write_potential_csv(&mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let q: Vec<f64> = rdr
            .records()
            .map(|r| r.unwrap()[1].parse::<f64>().unwrap())
            .collect();
        prop_assert_eq!(q.as_slice(), op.potential.values());
    }
}

#[test]
fn spectrum_csv_leaves_missing_b_empty() {
    let spec = SpectrumTable::new(vec![
        SpectralDatum { n: 0, mu: 0.5, a: 1.5, b: Some(2.0), phi_end: 1.0, kappa: 1.0 },
        SpectralDatum { n: 1, mu: 1.5, a: 1.6, b: None, phi_end: -1.0, kappa: -1.0 },
    ])
    .unwrap();
    let mut buf = Vec::new();
    spec.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,mu,a,b,kappa");
    assert_eq!(lines[1], "0,0.5,1.5,2.0,1.0");
    assert_eq!(lines[2], "1,1.5,1.6,,-1.0");
}

#[test]
fn schema_errors_name_the_field() {
    let field_of = |text: &str| match OperatorSpec::from_json(text).unwrap_err() {
        Error::Schema { field, .. } => field,
        other => panic!("unexpected {other}"),
    };
    let q = vec!["0.0"; 17].join(",");
    assert_eq!(field_of(&format!(r#"{{"grid_nodes":16,"potential":[{q}],"alpha":"x","beta":1.0}}"#)), "alpha");
    assert_eq!(field_of(&format!(r#"{{"grid_nodes":16,"potential":[{q}],"alpha":1.0,"beta":4.0}}"#)), "beta");
    assert_eq!(field_of(&format!(r#"{{"grid_nodes":8,"potential":[{q}],"alpha":1.0,"beta":1.0}}"#)), "grid_nodes");
    assert!(matches!(
        OperatorSpec::from_json(&format!(r#"{{"grid_nodes":16,"potential":[{q}],"alpha":1.0,"beta":1.0,"extra":0}}"#)),
        Err(Error::Schema { .. })
    ));
    assert!(matches!(
        PerturbationSeq::from_json(r#"[{"n":1,"c":0.5},{"n":1,"c":0.25}]"#),
        Err(Error::Schema { .. })
    ));
    assert!(SpectrumTable::from_json(r#"[{"n":1,"mu":0.0,"a":1.0,"phi_end":1.0,"kappa":1.0}]"#).is_err());
}
