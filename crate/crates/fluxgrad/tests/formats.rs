mod common;

use std::fs;

use common::{fixture, random_mlp, write_dataset};
use fluxgrad::io::{self, IoError};
use fluxgrad_core::gradfield::datasets::planted_linear;
use fluxgrad_core::gradfield::{Field, GaussComponent, GaussMixtureParams};
use fluxgrad_core::{Activation, AttributionMap, Head, Method, Model, Param};
use tempfile::TempDir;

fn zoo() -> Vec<Model> {
    vec![
        Model::linear(vec![0.5, -1.0], 0.25).unwrap(),
        Model::quadratic(vec![1.0, 2.0], vec![0.1, -0.3]).unwrap(),
        Model::gauss_bump(3).unwrap(),
        Model::new(
            2,
            Field::GaussMixture(GaussMixtureParams {
                components: vec![
                    GaussComponent {
                        weight: 1.0,
                        center: vec![0.0, 0.0],
                        width: 1.0,
                    },
                    GaussComponent {
                        weight: -0.5,
                        center: vec![1.0, 0.5],
                        width: 0.3,
                    },
                ],
            }),
            Head::Sigmoid,
        )
        .unwrap(),
        random_mlp(&[3, 5, 1], Activation::Tanh, Head::Sigmoid, 1),
        random_mlp(&[3, 5, 4], Activation::Relu, Head::Softmax { target: 3 }, 2),
        random_mlp(
            &[3, 4, 3],
            Activation::Softplus,
            Head::Logit { target: 0 },
            3,
        ),
    ]
}

#[test]
fn models_round_trip_through_json() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("m.json");
    for model in zoo() {
        io::write_model(&p, &model).unwrap();
        let back = io::read_model(&p).unwrap();
        assert_eq!(back, model);
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        for key in ["kind", "dim", "head", "params"] {
            assert!(doc.get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn fixtures_parse() {
    let lin = io::read_model(&fixture("linear.json")).unwrap();
    assert_eq!(lin.evaluate(&[1.0, 1.0]).unwrap(), 7.0);
    let quad = io::read_model(&fixture("quadratic.json")).unwrap();
    assert!(quad.is_smooth());
    assert!(!io::read_model(&fixture("relu_mlp.json"))
        .unwrap()
        .is_smooth());
}

#[test]
fn model_json_is_validated() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("m.json");
    for bad in [
        r#"{"kind":"linear","dim":3,"head":{"type":"identity"},"params":{"a":[1,2],"b":0}}"#,
        r#"{"kind":"linear","dim":2,"head":{"type":"softmax","target":0},"params":{"a":[1,2],"b":0}}"#,
        r#"{"kind":"cubic","dim":1,"head":{"type":"identity"},"params":{}}"#,
        r#"{"kind":"linear","dim":2"#,
    ] {
        fs::write(&p, bad).unwrap();
        assert!(
            matches!(io::read_model(&p), Err(IoError::Json { .. })),
            "{bad}"
        );
    }
}

#[test]
fn attribution_maps_round_trip() {
    let map = AttributionMap::new(Method::Neflag, vec![0.1, -2.5, 1e-300])
        .with_param("seed", u64::MAX)
        .with_param("epsilon", 0.1)
        .with_param("step_rule", "sign")
        .with_param("reject_nonnegative", true)
        .with_samples(20);
    let text = serde_json::to_string(&map).unwrap();
    let back: AttributionMap = serde_json::from_str(&text).unwrap();
    assert_eq!(back, map);
    assert_eq!(back.params["seed"], Param::Integer(u64::MAX));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["method", "params", "values", "samples_used"] {
        assert!(doc.get(key).is_some(), "{key}");
    }

    let csv = io::attribution_csv(&map);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x0,x1,x2"));
    let values: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values, map.values);
}

#[test]
fn datasets_round_trip_with_or_without_header() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("d.csv");
    let data = planted_linear(30, &[1.0, -1.0, 0.5], 0.1, 4);
    write_dataset(&p, &data);
    assert_eq!(io::read_dataset(&p).unwrap(), data);

    let body = fs::read_to_string(&p).unwrap();
    fs::write(&p, format!("a,b,c,label\n{body}")).unwrap();
    assert_eq!(io::read_dataset(&p).unwrap(), data);

    // inputs: the label column is dropped, and plain feature rows are kept
    assert_eq!(io::read_inputs(&p, 3).unwrap(), data.features);
    assert!(matches!(
        io::read_inputs(&p, 5),
        Err(IoError::Parse { line: 2, .. })
    ));
}

#[test]
fn malformed_datasets_are_rejected() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("d.csv");
    for (text, line) in [
        ("1,2,0\n3,4\n", Some(2)),
        ("1,2,0\n3,4,-1\n", Some(2)),
        ("1,2,0\n3,4,0.5\n", Some(2)),
        ("1,2,0\n1,nan?,1\n", Some(2)),
        ("", None),
        ("x,y,label\n", None),
    ] {
        fs::write(&p, text).unwrap();
        let err = io::read_dataset(&p).unwrap_err();
        match line {
            Some(l) => assert!(
                matches!(err, IoError::Parse { line, .. } if line == l)
                    || matches!(err, IoError::Csv { .. }),
                "{text:?}: {err}"
            ),
            None => assert!(matches!(err, IoError::Invalid { .. }), "{text:?}: {err}"),
        }
    }
}
