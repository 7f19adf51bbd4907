use crate::tensor::Real;

/// Row-major matrix operand. `Transposed` means the slice stores the
/// transpose of the logical operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Normal,
    Transposed,
}

fn strides(op: Op, rows: usize, cols: usize) -> (isize, isize) {
    match op {
        Op::Normal => (cols as isize, 1),
        Op::Transposed => (1, rows as isize),
    }
}

/// `c (m x n) = a (m x k) * b (k x n) + beta * c`, with `beta` either 0 or 1.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_op: Op,
    b: &[T],
    b_op: Op,
    c: &mut [T],
    accumulate: bool,
) {
    assert!(a.len() >= m * k, "gemm: lhs too short");
    assert!(b.len() >= k * n, "gemm: rhs too short");
    assert!(c.len() >= m * n, "gemm: output too short");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = strides(a_op, m, k);
    let (rsb, csb) = strides(b_op, k, n);
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: the asserts above bound every access of the strided views.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
