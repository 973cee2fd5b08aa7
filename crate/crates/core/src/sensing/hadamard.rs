//! Orthonormal Hadamard matrices built by the block recursion
//! `H_2n = [[H_n, H_n], [H_n, -H_n]] / sqrt(2)`, `H_1 = 1`.

use crate::error::{Error, Result};

fn check_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::config(format!(
            "Hadamard length must be a power of two, got {n}"
        )));
    }
    Ok(())
}

/// In-place orthonormal fast Walsh-Hadamard transform, `n log n` flops.
pub fn hadamard_in_place(x: &mut [f64]) -> Result<()> {
    check_len(x.len())?;
    let n = x.len();
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    let norm = (n as f64).sqrt().recip();
    x.iter_mut().for_each(|v| *v *= norm);
    Ok(())
}

/// `H_n x` for `n = x.len()` a power of two.
pub fn hadamard_apply(x: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    hadamard_in_place(&mut out)?;
    Ok(out)
}

/// Dense `H_n`, row-major, assembled directly from the block recursion.
pub fn dense_hadamard(n: usize) -> Result<Vec<f64>> {
    check_len(n)?;
    let mut h = vec![1.0];
    let mut size = 1;
    let c = std::f64::consts::FRAC_1_SQRT_2;
    while size < n {
        let next = 2 * size;
        let mut g = vec![0.0; next * next];
        for r in 0..size {
            for col in 0..size {
                let v = c * h[r * size + col];
                g[r * next + col] = v;
                g[r * next + col + size] = v;
                g[(r + size) * next + col] = v;
                g[(r + size) * next + col + size] = -v;
            }
        }
        h = g;
        size = next;
    }
    Ok(h)
}
