use mifs::data::{friedman_generate, friedman_response, load_csv, FriedmanVariant, TargetColumn};
use mifs::rng::seeded;

// ChaCha8 seeded from 42: ten uniforms then one standard normal per row.
// Any change of generator or draw order shows up here.
#[test]
fn friedman_golden_row() {
    let d = friedman_generate(10, FriedmanVariant::Plain, &mut seeded(42)).unwrap();
    let expected = [
        0.6818961923066714,
        0.950275407672484,
        0.4275164028565197,
        0.6273605211973403,
        0.2885938791411826,
        0.14995887029032495,
        0.30804055959790966,
        0.8038727671756268,
        0.7712487808028571,
        0.2385852643813393,
    ];
    assert_eq!(d.row(0), expected);
    assert_eq!(d.target()[0], 13.888874944394974);
    assert_eq!(d.target()[9], 2.720461900743537);
    let noise = d.target()[0] - friedman_response(&expected, FriedmanVariant::Plain);
    assert!(noise.abs() < 4.0);
}

#[test]
fn housing_table_loads() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/housing.csv");
    let h = load_csv(path, &TargetColumn::Name("MEDV".into()), true).unwrap();
    assert_eq!((h.n_rows(), h.n_features()), (506, 13));
    assert_eq!(h.names()[5], "RM");
    assert_eq!(h.names()[12], "LSTAT");
    assert_eq!(h.target()[0], 24.0);
    let by_index = load_csv(path, &TargetColumn::Index(13), true).unwrap();
    assert_eq!(by_index, h);
}
