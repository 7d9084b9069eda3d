//! Table transcription audit, blends against brute-force sums, and scaling.

use emotemesh::table::{ExpressionTable, BASIC_LABELS};
use emotemesh::{Feature, Zxy};
use proptest::prelude::*;

/// The reference displacement table, one string per feature row, columns surprise, happy,
/// sad, angry, disgust, fear. Parsed independently of the builtin constants.
const PRINTED: &str = "\
Jaw	-0.005, 0, 0.01	0, 0, 0	0, 0, 0	0, 0, 0	-0.001, 0, 0.001	-0.002, 0, 0.003
Nostrils	0, 0, 0	0, 0, 0	0, 0, 0	0, 0, 0	0, 0, -0.008	0, 0, 0
LipLowerLeft	0, -0.001, -0.001	-0.002, 0.001, 0.001	0, 0.001, 0.001	0, -0.002, 0	-0.004, 0.002, 0.002	0, 0, 0.002
LipLowerRight	0, 0.001, -0.001	-0.002, -0.001, 0.001	0, -0.001, 0.001	0, 0.002, 0	-0.004, -0.002, 0.0025	0, 0, 0.002
LipUpperLeft	0, -0.002, -0.001	-0.001, 0.001, -0.001	0, 0.001, 0.001	0, -0.002, -0.002	-0.002, 0.002, -0.0045	0, 0, -0.002
LipUpperRight	0, 0.002, -0.001	-0.001, -0.001, -0.001	0, -0.001, 0.001	0, 0.002, -0.002	-0.002, -0.002, -0.0045	0, 0, -0.002
LipCornerLeft	0, -0.001, 0	-0.005, 0.009, -0.007	0, 0.002, 0.007	0, -0.004, 0	0, -0.001, 0	0, 0.002, 0.003
LipCornerRight	0, 0.001, 0	-0.005, -0.009, -0.007	0, -0.002, 0.007	0, 0.004, 0	0, 0.001, 0	0, -0.002, 0.003
CheekLeft	0, 0, 0.004	0, 0, -0.011	0, 0, 0	0, 0, 0	0, 0, -0.003	0, 0, 0
CheekRight	0, 0, 0.004	0, 0, -0.011	0, 0, 0	0, 0, 0	0, 0, -0.003	0, 0, 0
LidLowerLeft	0, 0, 0.001	0, 0, -0.0017	0, 0, 0	0, 0, 0.001	0, 0, -0.0025	0, 0, 0.002
LidLowerRight	0, 0, 0.001	0, 0, -0.0017	0, 0, 0	0, 0, 0.001	0, 0, -0.0025	0, 0, 0.002
LidUpperLeft	0, 0, -0.003	0, 0, 0.0015	0, 0, 0.001	0, 0, 0	0, 0, 0.002	0, 0, -0.003
LidUpperRight	0, 0, -0.003	0, 0, 0.0015	0, 0, 0.001	0, 0, 0	0, 0, 0.002	0, 0, -0.003
BrowInnerLeft	0, 0, -0.005	0, 0, 0, 0	0, 0, -0.005	0, -0.013, 0.012	0, -0.013, 0.004	0, -0.008, -0.006
BrowInnerRight	0, 0, -0.005	0, 0, 0, 0	0, 0, -0.005	0, 0.013, 0.012	0, 0.013, 0.004	0, 0.008, -0.006
BrowOuterLeft	0, 0, -0.005	0, 0, 0, 0	0, 0, 0.006	0, 0, 0.003	0, -0.002, 0	0, 0, 0.004
BrowOuterRight	0, 0, -0.005	0, 0, 0, 0	0, 0, 0.006	0, 0, 0.003	0, 0.002, 0	0, 0, 0.004
";

/// `(feature, column) -> [z, x, y]`; a four-zero cell reads as the zero vector.
fn printed_cells() -> Vec<(Feature, usize, Zxy)> {
    let mut out = Vec::new();
    for line in PRINTED.lines() {
        let mut cols = line.split('\t');
        let feature: Feature = cols.next().unwrap().parse().unwrap();
        for (c, cell) in cols.enumerate() {
            let nums: Vec<f64> = cell.split(',').map(|s| s.trim().parse().unwrap()).collect();
            let v = if nums.len() == 4 {
                assert!(nums.iter().all(|n| *n == 0.0));
                Zxy::ZERO
            } else {
                Zxy::new(nums[0], nums[1], nums[2])
            };
            out.push((feature, c, v));
        }
    }
    out
}

#[test]
fn builtin_matches_every_printed_value() {
    let table = ExpressionTable::builtin();
    let cells = printed_cells();
    assert_eq!(cells.len(), 18 * 6);
    for (feature, col, v) in cells {
        let label = BASIC_LABELS[col];
        assert_eq!(table.vectors(label).unwrap()[feature], v, "{label}/{feature}");
    }
}

#[test]
fn symmetry_audit_flags_only_disgust_lower_lip() {
    let table = ExpressionTable::builtin();
    let flagged = table.symmetry_audit();
    assert_eq!(flagged.len(), 1, "{flagged:?}");
    let a = &flagged[0];
    assert_eq!(a.expression, "disgust");
    assert_eq!((a.left, a.right), (Feature::LipLowerLeft, Feature::LipLowerRight));
    assert_eq!((a.left_value.y, a.right_value.y), (0.002, 0.0025));
}

#[test]
fn symmetry_audit_catches_injected_asymmetry() {
    let mut table = ExpressionTable::builtin();
    let mut sad = table.vectors("sad").unwrap();
    sad[Feature::BrowOuterRight].y += 0.001;
    table.set_basic("sad", sad).unwrap();
    let flagged: Vec<_> = table
        .symmetry_audit()
        .into_iter()
        .map(|a| (a.expression, a.left))
        .collect();
    assert_eq!(
        flagged,
        vec![("disgust".to_string(), Feature::LipLowerLeft), ("sad".to_string(), Feature::BrowOuterLeft)]
    );
}

/// Weighted sum of printed rows, computed from the printed text.
fn brute_force(components: &[(&str, f64)]) -> Vec<(Feature, Zxy)> {
    let cells = printed_cells();
    Feature::ALL
        .iter()
        .map(|&f| {
            let mut acc = [0.0f64; 3];
            for (label, w) in components {
                let col = BASIC_LABELS.iter().position(|l| l == label).unwrap();
                let v = cells.iter().find(|(cf, cc, _)| *cf == f && *cc == col).unwrap().2;
                acc[0] += w * v.z;
                acc[1] += w * v.x;
                acc[2] += w * v.y;
            }
            (f, Zxy::from(acc))
        })
        .collect()
}

fn assert_close(a: Zxy, b: Zxy, tol: f64, what: &str) {
    assert!(
        (a.z - b.z).abs() <= tol && (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol,
        "{what}: {a:?} vs {b:?}"
    );
}

#[test]
fn builtin_blends_equal_brute_force() {
    let table = ExpressionTable::builtin();
    let defs: [(&str, &[(&str, f64)]); 4] = [
        ("evil", &[("angry", 0.5), ("happy", 0.5)]),
        ("frustrated", &[("sad", 0.5), ("angry", 0.5)]),
        ("enthusiastic", &[("happy", 0.5), ("surprise", 0.5)]),
        ("furious", &[("angry", 0.5), ("surprise", 0.5)]),
    ];
    let blends = table.builtin_blends();
    assert_eq!(blends.len(), 4);
    for (label, comps) in defs {
        let got = table.vectors(label).unwrap();
        for (f, want) in brute_force(comps) {
            assert_close(got[f], want, 1e-12, &format!("{label}/{f}"));
        }
    }
    assert_close(
        table.vectors("evil").unwrap()[Feature::LipCornerLeft],
        Zxy::new(-0.0025, 0.0025, -0.0035),
        1e-15,
        "evil corner",
    );
    assert_close(
        table.vectors("frustrated").unwrap()[Feature::BrowInnerLeft],
        Zxy::new(0.0, -0.0065, 0.0035),
        1e-15,
        "frustrated brow",
    );
}

#[test]
fn registered_blends() {
    let mut table = ExpressionTable::builtin();
    let x = table.blend("x", &[("happy", 1.0)]).unwrap();
    assert_eq!(x.vectors, table.vectors("happy").unwrap());
    let x = table.blend("single", &[("fear", 1.0), ("sad", 0.0)]).unwrap();
    assert_eq!(x.vectors, table.vectors("fear").unwrap());
    let y = table.blend("y", &[("happy", 0.5), ("angry", 0.5)]).unwrap();
    assert_close(y.vectors[Feature::CheekLeft], Zxy::new(0.0, 0.0, -0.0055), 1e-15, "y cheek");
    assert!(table.get("y").is_some());
}

#[test]
fn scale_examples() {
    let table = ExpressionTable::builtin();
    let happy = table.get("happy").unwrap();
    assert_close(happy.scale(2.4).unwrap()[Feature::CheekLeft], Zxy::new(0.0, 0.0, -0.0264), 1e-15, "2.4x");
}

#[test]
fn table_document_round_trip() {
    let table = ExpressionTable::builtin();
    let back = ExpressionTable::from_json(&table.to_json()).unwrap();
    assert_eq!(back, table);

    let mut custom = ExpressionTable::builtin();
    custom.blend("enthusiastic", &[("happy", 0.7), ("surprise", 0.3)]).unwrap();
    let back = ExpressionTable::from_json(&custom.to_json()).unwrap();
    assert_eq!(back.blend_components("enthusiastic").unwrap()[0], ("happy".to_string(), 0.7));
}

proptest! {
    #[test]
    fn scaling_is_homogeneous(i in 0.0f64..3.0, k in 0.0f64..4.0, col in 0usize..6) {
        let table = ExpressionTable::builtin();
        let set = table.get(BASIC_LABELS[col]).unwrap();
        let a = set.scale(k * i).unwrap();
        let b = set.scale(i).unwrap().scaled(k);
        for f in Feature::ALL {
            prop_assert!((a[f].z - b[f].z).abs() <= 1e-12);
            prop_assert!((a[f].x - b[f].x).abs() <= 1e-12);
            prop_assert!((a[f].y - b[f].y).abs() <= 1e-12);
        }
    }

    #[test]
    fn blends_match_brute_force(ws in prop::collection::vec(0.0f64..2.0, 6)) {
        prop_assume!(ws.iter().any(|w| *w > 0.0));
        let mut table = ExpressionTable::builtin();
        let comps: Vec<(&str, f64)> = BASIC_LABELS.iter().copied().zip(ws.iter().copied()).collect();
        let got = table.blend("mix", &comps).unwrap().vectors;
        for (f, want) in brute_force(&comps) {
            prop_assert!((got[f].z - want.z).abs() <= 1e-12);
            prop_assert!((got[f].x - want.x).abs() <= 1e-12);
            prop_assert!((got[f].y - want.y).abs() <= 1e-12);
        }
    }
}
