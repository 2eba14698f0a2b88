use nalgebra::DMatrix;
use num_complex::Complex;

use super::state::{CMat, C};

pub fn identity2() -> CMat {
    CMat::identity(2, 2)
}

pub fn pauli_x() -> CMat {
    DMatrix::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0)])
}

pub fn pauli_y() -> CMat {
    DMatrix::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(0.0, -1.0), C::new(0.0, 1.0), C::new(0.0, 0.0)])
}

pub fn pauli_z() -> CMat {
    DMatrix::from_row_slice(2, 2, &[C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(-1.0, 0.0)])
}

pub fn hadamard() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[C::new(s, 0.0), C::new(s, 0.0), C::new(s, 0.0), C::new(-s, 0.0)])
}

/// Rotation about Z: diag(e^{-i theta/2}, e^{i theta/2}).
pub fn rz(theta: f64) -> CMat {
    let half = theta / 2.0;
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex::from_polar(1.0, -half),
            C::new(0.0, 0.0),
            C::new(0.0, 0.0),
            Complex::from_polar(1.0, half),
        ],
    )
}

/// Rotation about Y: [[cos, -sin], [sin, cos]] at theta/2.
pub fn ry(theta: f64) -> CMat {
    let (s, c) = (theta / 2.0).sin_cos();
    DMatrix::from_row_slice(2, 2, &[C::new(c, 0.0), C::new(-s, 0.0), C::new(s, 0.0), C::new(c, 0.0)])
}

/// The per-qubit frame unitary U(theta) = Rz(theta[2]) Ry(theta[1]) Rz(theta[0]);
/// theta[0] is applied first. All-zero angles give the identity.
pub fn measurement_unitary(theta: [f64; 3]) -> CMat {
    rz(theta[2]) * ry(theta[1]) * rz(theta[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_angles_give_identity() {
        let u = measurement_unitary([0.0, 0.0, 0.0]);
        assert_abs_diff_eq!((u - identity2()).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn frame_unitary_is_unitary() {
        let u = measurement_unitary([0.3, -1.2, 2.5]);
        let delta = (u.adjoint() * &u - identity2()).norm();
        assert_abs_diff_eq!(delta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ry_half_pi_maps_z_to_x_eigenbasis() {
        // Ry(pi/2)|0> = |+>
        let u = ry(std::f64::consts::FRAC_PI_2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(u[(0, 0)].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(u[(1, 0)].re, s, epsilon = 1e-12);
    }

    #[test]
    fn paulis_square_to_identity() {
        for p in [pauli_x(), pauli_y(), pauli_z(), hadamard()] {
            assert_abs_diff_eq!((&p * &p - identity2()).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
