//! A procedurally generated low-poly face with a complete rig, so every tool
//! works without external assets.

use std::collections::BTreeMap;

use crate::feature::Feature;
use crate::mesh::{Face, Mesh};
use crate::rig::{generate_weights, Anchor, Axes, Falloff, Rig};

pub const SAMPLE_MESH_ID: &str = "builtin:sample-face";

const COLS: usize = 31;
const ROWS: usize = 43;
const STEP: f64 = 0.005;
const X0: f64 = -0.075;
const Y0: f64 = -0.11;

fn surface(x: f64, y: f64) -> f64 {
    let shell = (1.0 - (x / 0.09).powi(2) - (y / 0.14).powi(2)).max(0.0).sqrt() * 0.06;
    let nose = 0.018 * (-(x * x + (y - 0.005).powi(2)) / (2.0 * 0.012f64.powi(2))).exp();
    let brow = 0.004 * (-((y - 0.055).powi(2)) / (2.0 * 0.008f64.powi(2))).exp();
    shell + nose + brow
}

/// Anchor centers in the face plane (meters). The character's left is +x.
fn anchor_layout(f: Feature) -> ([f64; 2], f64) {
    use Feature::*;
    let (x, y, r) = match f {
        Jaw => (0.0, -0.09, 0.035),
        Nostrils => (0.0, -0.015, 0.014),
        LipLowerLeft => (0.011, -0.052, 0.011),
        LipUpperLeft => (0.011, -0.036, 0.011),
        LipCornerLeft => (0.026, -0.044, 0.014),
        CheekLeft => (0.042, -0.012, 0.025),
        LidLowerLeft => (0.032, 0.021, 0.009),
        LidUpperLeft => (0.032, 0.037, 0.009),
        BrowInnerLeft => (0.015, 0.056, 0.016),
        BrowOuterLeft => (0.047, 0.054, 0.016),
        other => {
            let (p, r) = anchor_layout(other.mirror().expect("right features mirror a left one"));
            return ([-p[0], p[1]], r);
        }
    };
    ([x, y], r)
}

pub fn sample_mesh() -> Mesh {
    let mut vertices = Vec::with_capacity(COLS * ROWS);
    for row in 0..ROWS {
        for col in 0..COLS {
            let x = X0 + col as f64 * STEP;
            let y = Y0 + row as f64 * STEP;
            vertices.push([x, y, surface(x, y)]);
        }
    }
    let mut faces = Vec::with_capacity(2 * (COLS - 1) * (ROWS - 1));
    for row in 0..ROWS - 1 {
        for col in 0..COLS - 1 {
            let a = row * COLS + col;
            let b = a + 1;
            let c = a + COLS + 1;
            let d = a + COLS;
            faces.push(Face::new([a, b, c]));
            faces.push(Face::new([a, c, d]));
        }
    }
    Mesh::new(vertices, faces).expect("generated mesh is valid")
}

pub fn sample_rig(mesh: &Mesh) -> Rig {
    let anchors = Feature::ALL.map(|feature| {
        let ([x, y], radius) = anchor_layout(feature);
        let rest = [x, y, surface(x, y)];
        let weights = generate_weights(mesh, rest, radius, Falloff::Smoothstep).expect("positive radius");
        Anchor { feature, rest, weights }
    });
    let metadata = BTreeMap::from([
        ("name".to_string(), "sample face".to_string()),
        ("author".to_string(), "emotemesh".to_string()),
    ]);
    Rig::new(SAMPLE_MESH_ID, Axes::y_up(), anchors, metadata).expect("sample rig is valid")
}

/// The bundled mesh and its rig.
pub fn sample_face() -> (Mesh, Rig) {
    let mesh = sample_mesh();
    let rig = sample_rig(&mesh);
    (mesh, rig)
}
