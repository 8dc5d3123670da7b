#![allow(dead_code)]

use polyak_core::problems::{library, ConvexComponent};
use polyak_core::projections::ConvexSet;

pub const KINDS: &[&str] = &["halfspace", "hyperplane", "ball", "box", "polyhedron"];
/// Uniform parameters consumed by [`random_set`].
pub const SET_PARAMS: usize = 9;

pub fn library_components() -> Vec<(String, ConvexComponent)> {
    let mut out = Vec::new();
    for name in library::NAMES {
        let p = library::instance(name).unwrap();
        for (i, c) in p.components().iter().enumerate() {
            out.push((format!("{name}[{i}]"), c.clone()));
        }
    }
    out
}

fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    [
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ]
}

fn column(r: &[[f64; 3]; 3], j: usize) -> Vec<f64> {
    (0..3).map(|i| r[i][j]).collect()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub type Violation = Box<dyn Fn(&[f64]) -> f64>;

/// A set in R³ together with an independent membership test.
pub struct TestSet {
    pub set: ConvexSet,
    /// Largest constraint violation at `x`; `<= 0` means inside.
    pub violation: Violation,
}

/// Builds a set of the given kind from `p`, entries in `[0, 1)`.
pub fn random_set(kind: &str, p: &[f64]) -> TestSet {
    assert!(p.len() >= SET_PARAMS);
    let u = |i: usize| 2.0 * p[i] - 1.0;
    match kind {
        "halfspace" | "hyperplane" => {
            let a = vec![u(0) + 1.5, u(1), 2.0 * u(2)];
            let beta = 2.0 * u(3);
            let set = if kind == "halfspace" {
                ConvexSet::halfspace(a.clone(), beta).unwrap()
            } else {
                ConvexSet::hyperplane(a.clone(), beta).unwrap()
            };
            let n = dot(&a, &a).sqrt();
            let eq = kind == "hyperplane";
            TestSet {
                set,
                violation: Box::new(move |x| {
                    let e = (dot(&a, x) - beta) / n;
                    if eq {
                        e.abs()
                    } else {
                        e
                    }
                }),
            }
        }
        "ball" => {
            let c = vec![u(0), u(1), u(2)];
            let r = 0.1 + 2.0 * p[3];
            TestSet {
                set: ConvexSet::ball(c.clone(), r).unwrap(),
                violation: Box::new(move |x| {
                    x.iter()
                        .zip(&c)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                        - r
                }),
            }
        }
        "box" => {
            let lo = vec![u(0) - 0.5, u(1) - 1.0, u(2) - 0.1];
            let hi = vec![lo[0] + 2.0 * p[3], lo[1] + p[4], lo[2] + 3.0 * p[5]];
            let (l2, h2) = (lo.clone(), hi.clone());
            TestSet {
                set: ConvexSet::boxed(lo, hi).unwrap(),
                violation: Box::new(move |x| {
                    (0..3)
                        .map(|i| (l2[i] - x[i]).max(x[i] - h2[i]))
                        .fold(f64::NEG_INFINITY, f64::max)
                }),
            }
        }
        "polyhedron" => {
            let r = rotation(3.0 * u(0), 3.0 * u(1), 3.0 * u(2));
            let (e1, e2) = (column(&r, 0), column(&r, 1));
            let lo = u(3) - 0.5;
            let hi = lo + 0.2 + 2.0 * p[4];
            let top = 2.0 * u(5);
            let scale = 0.5 + p[6];
            let neg: Vec<f64> = e1.iter().map(|v| -v * scale).collect();
            let set = ConvexSet::polyhedron(&[
                (e1.clone(), hi),
                (neg, -lo * scale),
                (e2.iter().map(|v| 3.0 * v).collect(), 3.0 * top),
            ])
            .unwrap();
            TestSet {
                set,
                violation: Box::new(move |x| {
                    let t = dot(&e1, x);
                    (lo - t).max(t - hi).max(dot(&e2, x) - top)
                }),
            }
        }
        other => panic!("unknown kind {other}"),
    }
}
