//! Symmetric quadrature rules on the reference triangle, in barycentric form.
//!
//! Weights sum to one; multiply by the physical triangle area.

use crate::scalar::{from_barycentric, signed_area, Point, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule<T> {
    pub bary: Vec<[T; 3]>,
    pub weights: Vec<T>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl<T: Real> TriangleRule<T> {
    /// Smallest built-in rule exact for polynomials of total degree `degree`.
    /// Rules exist up to degree 6.
    #[allow(clippy::excessive_precision)]
    pub fn with_degree(degree: usize) -> Option<Self> {
        let rule = match degree {
            0 | 1 => Self::build(1, &[], &[(1.0, 0.0)], &[]),
            2 => Self::build(2, &[(1.0 / 6.0, 1.0 / 3.0)], &[], &[]),
            3 | 4 => Self::build(
                4,
                &[
                    (0.445_948_490_915_964_886_318_329_253_883_264, 0.223_381_589_678_011_465_944_640_202_967_147),
                    (0.091_576_213_509_770_743_459_571_463_402_202, 0.109_951_743_655_321_867_388_693_130_366_187),
                ],
                &[],
                &[],
            ),
            5 => {
                let s = 15f64.sqrt();
                Self::build(
                    5,
                    &[((6.0 - s) / 21.0, (155.0 - s) / 1200.0), ((6.0 + s) / 21.0, (155.0 + s) / 1200.0)],
                    &[(9.0 / 40.0, 0.0)],
                    &[],
                )
            }
            6 => Self::build(
                6,
                &[
                    (0.249_286_745_170_910_421_291_638_553_107_019, 0.116_786_275_726_379_366_030_690_538_687_898),
                    (0.063_089_014_491_502_228_340_331_602_870_819, 0.050_844_906_370_206_816_920_936_809_106_869),
                ],
                &[],
                &[(
                    0.053_145_049_844_816_947_353_249_671_631_398,
                    0.310_352_451_033_784_405_416_607_733_956_552,
                    0.082_851_075_618_373_575_193_553_456_420_442,
                )],
            ),
            _ => return None,
        };
        Some(rule)
    }

    /// Assembles a rule from symmetry orbits: `s21` entries `(a, w)` expand to
    /// the three permutations of `(a, a, 1 - 2a)`, `centroid` entries carry the
    /// weight of the centroid point, `s111` entries `(a, b, w)` expand to the six
    /// permutations of `(a, b, 1 - a - b)`.
    fn build(degree: usize, s21: &[(f64, f64)], centroid: &[(f64, f64)], s111: &[(f64, f64, f64)]) -> Self {
        let mut bary = Vec::new();
        let mut weights = Vec::new();
        for &(w, _) in centroid {
            bary.push([T::lit(1.0 / 3.0); 3]);
            weights.push(T::lit(w));
        }
        for &(a, w) in s21 {
            let b = 1.0 - 2.0 * a;
            for p in [[a, a, b], [a, b, a], [b, a, a]] {
                bary.push(p.map(T::lit));
                weights.push(T::lit(w));
            }
        }
        for &(a, b, w) in s111 {
            let c = 1.0 - a - b;
            for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                bary.push(p.map(T::lit));
                weights.push(T::lit(w));
            }
        }
        Self { bary, weights, degree }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points and area-scaled weights on `tri`.
    pub fn map_to(&self, tri: &[Point<T>; 3]) -> impl Iterator<Item = (Point<T>, T)> + '_ {
        let area = signed_area(tri).abs();
        let tri = *tri;
        self.bary.iter().zip(&self.weights).map(move |(b, &w)| (from_barycentric(&tri, *b), w * area))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Integral of l1^a l2^b l3^c over the reference triangle of area 1.
    fn monomial_exact(a: u32, b: u32, c: u32) -> f64 {
        2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    #[test]
    fn rules_are_exact_to_their_degree() {
        for degree in [1usize, 2, 4, 5, 6] {
            let rule = TriangleRule::<f64>::with_degree(degree).unwrap();
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14, "degree {degree} weight sum {wsum}");
            for total in 0..=degree as u32 {
                for a in 0..=total {
                    for b in 0..=(total - a) {
                        let c = total - a - b;
                        let approx: f64 = rule
                            .bary
                            .iter()
                            .zip(&rule.weights)
                            .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                            .sum();
                        let exact = monomial_exact(a, b, c);
                        assert!((approx - exact).abs() < 1e-14, "degree {degree}: ({a},{b},{c}) {approx} vs {exact}");
                    }
                }
            }
            for l in &rule.bary {
                assert!(l.iter().all(|&x| x > 0.0));
            }
        }
    }

    #[test]
    fn degree_five_not_exact_for_seven() {
        let rule = TriangleRule::<f64>::with_degree(5).unwrap();
        let approx: f64 = rule.bary.iter().zip(&rule.weights).map(|(l, w)| w * l[0].powi(7)).sum();
        assert!((approx - monomial_exact(7, 0, 0)).abs() > 1e-8);
    }

    #[test]
    fn unsupported_degree() {
        assert!(TriangleRule::<f64>::with_degree(9).is_none());
    }

    #[test]
    fn mapped_weights_sum_to_area() {
        let rule = TriangleRule::<f32>::with_degree(4).unwrap();
        let tri = [[0.0f32, 0.0], [0.0, 2.0], [3.0, 0.0]];
        let s: f32 = rule.map_to(&tri).map(|(_, w)| w).sum();
        assert!((s - 3.0).abs() < 1e-5);
    }
}
