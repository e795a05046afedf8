//! Symmetric quadrature rules on the reference tetrahedron and triangle, in
//! barycentric coordinates with weights summing to one.

use std::sync::LazyLock;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: u32,
}

pub type TetRule = QuadratureRule<4>;
pub type TriRule = QuadratureRule<3>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn s31(a: f64) -> [[f64; 4]; 4] {
    let b = 1.0 - 3.0 * a;
    [[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]]
}

fn s22(b: f64) -> [[f64; 4]; 6] {
    let c = 0.5 - b;
    [
        [b, b, c, c],
        [b, c, b, c],
        [b, c, c, b],
        [c, b, b, c],
        [c, b, c, b],
        [c, c, b, b],
    ]
}

static TET_CENTROID: LazyLock<TetRule> = LazyLock::new(|| QuadratureRule {
    points: vec![[0.25; 4]],
    weights: vec![1.0],
    degree: 1,
});

static TET_DEGREE2: LazyLock<TetRule> = LazyLock::new(|| {
    let a = (5.0 - 5f64.sqrt()) / 20.0;
    QuadratureRule {
        points: s31(a).to_vec(),
        weights: vec![0.25; 4],
        degree: 2,
    }
});

static TET_DEGREE5: LazyLock<TetRule> = LazyLock::new(|| {
    let mut points = Vec::with_capacity(14);
    let mut weights = Vec::with_capacity(14);
    for (a, w) in [
        (0.092_735_250_310_891_22, 0.073_493_043_116_361_96),
        (0.310_885_919_263_300_6, 0.112_687_925_718_015_85),
    ] {
        points.extend(s31(a));
        weights.extend([w; 4]);
    }
    points.extend(s22(0.045_503_704_125_649_65));
    weights.extend([0.042_546_020_777_081_466; 6]);
    QuadratureRule {
        points,
        weights,
        degree: 5,
    }
});

static TRI_DEGREE2: LazyLock<TriRule> = LazyLock::new(|| QuadratureRule {
    points: vec![
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ],
    weights: vec![1.0 / 3.0; 3],
    degree: 2,
});

static TRI_DEGREE5: LazyLock<TriRule> = LazyLock::new(|| {
    let r = 15f64.sqrt();
    let mut points = vec![[1.0 / 3.0; 3]];
    let mut weights = vec![9.0 / 40.0];
    for (a, w) in [((6.0 - r) / 21.0, (155.0 - r) / 1200.0), ((6.0 + r) / 21.0, (155.0 + r) / 1200.0)] {
        let b = 1.0 - 2.0 * a;
        points.extend([[b, a, a], [a, b, a], [a, a, b]]);
        weights.extend([w; 3]);
    }
    QuadratureRule {
        points,
        weights,
        degree: 5,
    }
});

/// Cheapest tetrahedral rule exact to at least `degree` (at most 5).
pub fn tet_rule(degree: u32) -> &'static TetRule {
    match degree {
        0 | 1 => &TET_CENTROID,
        2 => &TET_DEGREE2,
        3..=5 => &TET_DEGREE5,
        _ => panic!("no tetrahedral rule of degree {degree}"),
    }
}

/// Cheapest triangle rule exact to at least `degree` (at most 5).
pub fn tri_rule(degree: u32) -> &'static TriRule {
    match degree {
        0..=2 => &TRI_DEGREE2,
        3..=5 => &TRI_DEGREE5,
        _ => panic!("no triangle rule of degree {degree}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn weights_positive_and_normalised() {
        for d in [1, 2, 5] {
            let r = tet_rule(d);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for p in &r.points {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
        for d in [2, 5] {
            let r = tri_rule(d);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tet_monomials_exact() {
        for d in [1u32, 2, 5] {
            let r = tet_rule(d);
            for a in 0..=d {
                for b in 0..=d - a {
                    for c in 0..=d - a - b {
                        let e = d - a - b - c;
                        let q: f64 = r
                            .iter()
                            .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32) * p[3].powi(e as i32))
                            .sum();
                        let exact = fact(a) * fact(b) * fact(c) * fact(e) * 6.0 / fact(d + 3);
                        assert!((q - exact).abs() < 1e-15, "degree {d} monomial {a}{b}{c}{e}");
                    }
                }
            }
        }
    }

    #[test]
    fn tri_monomials_exact() {
        for d in [2u32, 5] {
            let r = tri_rule(d);
            for k in 0..=d {
                for a in 0..=k {
                    for b in 0..=k - a {
                        let c = k - a - b;
                        let q: f64 = r
                            .iter()
                            .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                            .sum();
                        let exact = fact(a) * fact(b) * fact(c) * 2.0 / fact(k + 2);
                        assert!((q - exact).abs() < 1e-15);
                    }
                }
            }
        }
    }
}
