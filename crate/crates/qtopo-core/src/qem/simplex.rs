//! Euclidean projection onto the probability simplex.

/// Projects `v` onto the probability simplex (nonnegative entries summing to
/// one) in Euclidean norm, using the sort-and-threshold construction.
///
/// The projection is the identity on vectors that already lie on the simplex,
/// so applying it to a valid distribution is harmless.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    // Find the largest k such that the top-k entries stay positive after the
    // common shift that restores a unit sum.
    let mut cumulative = 0.0;
    let mut shift = sorted[0] - 1.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }

    v.iter().map(|&x| (x - shift).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quasi_vector_projects_to_expected_point() {
        let p = project_to_simplex(&[0.6, 0.5, -0.1, 0.0]);
        assert_abs_diff_eq!(p[0], 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn valid_distribution_is_fixed_point() {
        let v = [0.25, 0.5, 0.125, 0.125];
        let p = project_to_simplex(&v);
        for (a, b) in v.iter().zip(&p) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn output_always_sums_to_one() {
        let p = project_to_simplex(&[3.0, -2.0, 0.5]);
        let sum: f64 = p.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }
}
