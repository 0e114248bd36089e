use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Scalar storage type for tensors. Implemented for `f32` (default storage)
/// and `f64` (gradient checks, curvature tests, bit-exact determinism runs).
pub trait Real: Float + Sum + Default + Debug + Display + Send + Sync + 'static {
    const BITS: u32;

    fn of(x: f64) -> Self;
    fn f64(self) -> f64;

    /// `c = alpha * a * b + beta * c` on strided row/column layouts.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
        rsc: usize,
    );
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) * rs + (cols - 1) * cs;
        assert!(last < len, "gemm operand out of bounds: {last} >= {len}");
    }
}

macro_rules! impl_real {
    ($t:ty, $bits:expr, $gemm:path) => {
        impl Real for $t {
            const BITS: u32 = $bits;

            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                (rsa, csa): (usize, usize),
                b: &[Self],
                (rsb, csb): (usize, usize),
                beta: Self,
                c: &mut [Self],
                rsc: usize,
            ) {
                check_extent(a.len(), m, k, rsa, csa);
                check_extent(b.len(), k, n, rsb, csb);
                check_extent(c.len(), m, n, rsc, 1);
                // SAFETY: every operand extent was bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa as isize,
                        csa as isize,
                        b.as_ptr(),
                        rsb as isize,
                        csb as isize,
                        beta,
                        c.as_mut_ptr(),
                        rsc as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_real!(f32, 32, matrixmultiply::sgemm);
impl_real!(f64, 64, matrixmultiply::dgemm);
