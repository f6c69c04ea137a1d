//! Explicit Runge–Kutta integrators of the coupled-mode system in its
//! original frame: dormand–prince 5(4) with adaptive steps and the classic
//! fixed-step RK4 used as a cross-check.

use num_complex::Complex64;

use super::{Amplitudes, Problem, StepControl};
use crate::error::{Error, Result};

type State = [Complex64; 2];

fn rhs(problem: &Problem<'_>, z: f64, y: &State) -> State {
    let m = problem.generator(z);
    [m * y[1], m.conj() * y[0]]
}

#[inline]
fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += k[0] * (c * h);
        out[1] += k[1] * (c * h);
    }
    out
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub(super) fn dormand_prince(
    problem: &Problem<'_>,
    control: &StepControl,
    observer: &mut dyn FnMut(f64, Amplitudes),
) -> Result<Amplitudes> {
    let length = problem.length;
    let mut y: State = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    observer(0.0, Amplitudes::from_state(y[0], y[1]));
    let mut z = 0.0;
    let mut h = control.initial_step(length);
    let mut k1 = rhs(problem, z, &y);
    while z < length {
        let last = z + h >= length;
        if last {
            h = length - z;
        }
        let k2 = rhs(problem, z + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = rhs(problem, z + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = rhs(
            problem,
            z + C4 * h,
            &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h),
        );
        let k5 = rhs(
            problem,
            z + C5 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = rhs(
            problem,
            z + h,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            ),
        );
        let next = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            h,
        );
        let z_next = if last { length } else { z + h };
        let k7 = rhs(problem, z_next, &next);
        let err_vec = axpy(
            &[Complex64::new(0.0, 0.0); 2],
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
            h,
        );
        let err = control.error_norm(&err_vec, &y, &next);
        if err <= 1.0 {
            y = next;
            z = z_next;
            k1 = k7;
            observer(z, Amplitudes::from_state(y[0], y[1]));
        }
        h = control.next_step(h, err, 4, z, problem)?;
    }
    Ok(Amplitudes::from_state(y[0], y[1]))
}

pub(super) fn fixed_rk4(
    problem: &Problem<'_>,
    steps: usize,
    observer: &mut dyn FnMut(f64, Amplitudes),
) -> Result<Amplitudes> {
    if steps == 0 {
        return Err(Error::invalid("integrator.steps", "must be positive"));
    }
    let h = problem.length / steps as f64;
    let mut y: State = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    observer(0.0, Amplitudes::from_state(y[0], y[1]));
    for i in 0..steps {
        let z = h * i as f64;
        let k1 = rhs(problem, z, &y);
        let k2 = rhs(problem, z + 0.5 * h, &axpy(&y, &[(0.5, &k1)], h));
        let k3 = rhs(problem, z + 0.5 * h, &axpy(&y, &[(0.5, &k2)], h));
        let k4 = rhs(problem, z + h, &axpy(&y, &[(1.0, &k3)], h));
        y = axpy(
            &y,
            &[
                (1.0 / 6.0, &k1),
                (1.0 / 3.0, &k2),
                (1.0 / 3.0, &k3),
                (1.0 / 6.0, &k4),
            ],
            h,
        );
        observer(h * (i + 1) as f64, Amplitudes::from_state(y[0], y[1]));
    }
    Ok(Amplitudes::from_state(y[0], y[1]))
}
