//! Off-grid deposition stencil.
//!
//! Per axis the weights are a blend of the two quadratic Lagrange stencils
//! around the bracketing cell, so constants, linear and quadratic functions
//! are reproduced exactly. Edge cells fall back to the single stencil that
//! stays on the grid. The multi-dimensional stencil is the tensor product.

use crate::velocity_grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisStencil {
    pub start: usize,
    pub len: usize,
    pub w: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub axes: [AxisStencil; 3],
    pub d: usize,
}

/// Tolerance, in grid units, for snapping onto the outermost nodes.
pub const EDGE_TOL: f64 = 1e-9;

/// Stencil for fractional grid coordinate `s` (node `i` sits at `s = i`).
/// Returns `None` outside `[0, n-1]`.
pub fn axis_stencil(s: f64, n: usize) -> Option<AxisStencil> {
    let top = (n - 1) as f64;
    // Points on the outer nodes must not be lost to rounding.
    let s = if s < 0.0 && s > -EDGE_TOL { 0.0 } else if s > top && s < top + EDGE_TOL { top } else { s };
    if !(s >= 0.0 && s <= top) {
        return None;
    }
    let mut lo = s.floor() as usize;
    let mut t = s - lo as f64;
    if lo >= n - 1 {
        lo = n - 2;
        t = 1.0;
    }
    let b = t * (1.0 - t);
    let st = if lo == 0 {
        AxisStencil { start: 0, len: 3, w: [(1.0 - t) - 0.5 * b, t + b, -0.5 * b, 0.0] }
    } else if lo == n - 2 {
        AxisStencil { start: n - 3, len: 3, w: [-0.5 * b, (1.0 - t) + b, t - 0.5 * b, 0.0] }
    } else {
        AxisStencil {
            start: lo - 1,
            len: 4,
            w: [
                -0.5 * (1.0 - t) * b,
                (1.0 - t) + (1.0 - t) * b - 0.5 * t * b,
                t + t * b - 0.5 * (1.0 - t) * b,
                -0.5 * t * b,
            ],
        }
    };
    Some(st)
}

impl Stencil {
    pub fn at(grid: &GridSpec, v: &[f64; 3]) -> Option<Stencil> {
        let empty = AxisStencil { start: 0, len: 1, w: [1.0, 0.0, 0.0, 0.0] };
        let mut axes = [empty; 3];
        for a in 0..grid.d {
            let s = (v[a] + grid.l) / grid.h - 0.5;
            axes[a] = axis_stencil(s, grid.n)?;
        }
        Some(Stencil { axes, d: grid.d })
    }

    #[inline]
    pub fn for_each(&self, n: usize, mut f: impl FnMut(usize, f64)) {
        let [a, b, c] = &self.axes;
        if self.d == 2 {
            for i in 0..a.len {
                let row = (a.start + i) * n;
                let wi = a.w[i];
                for j in 0..b.len {
                    f(row + b.start + j, wi * b.w[j]);
                }
            }
        } else {
            for i in 0..a.len {
                for j in 0..b.len {
                    let base = ((a.start + i) * n + b.start + j) * n;
                    let wij = a.w[i] * b.w[j];
                    for k in 0..c.len {
                        f(base + c.start + k, wij * c.w[k]);
                    }
                }
            }
        }
    }

    #[inline]
    pub fn deposit(&self, n: usize, amount: f64, out: &mut [f64]) {
        self.for_each(n, |idx, w| out[idx] += amount * w);
    }

    #[inline]
    pub fn gather(&self, n: usize, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each(n, |idx, w| acc += w * values[idx]);
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(st: &AxisStencil, s: f64) -> [f64; 3] {
        let mut m = [0.0; 3];
        for i in 0..st.len {
            let x = (st.start + i) as f64 - s;
            m[0] += st.w[i];
            m[1] += st.w[i] * x;
            m[2] += st.w[i] * x * x;
        }
        m
    }

    #[test]
    fn reproduces_quadratics_everywhere() {
        let n = 10;
        for i in 0..=900 {
            let s = i as f64 * 0.01;
            let st = axis_stencil(s, n).unwrap();
            let m = moments(&st, s);
            assert!((m[0] - 1.0).abs() < 1e-14, "s={s}");
            assert!(m[1].abs() < 1e-13, "s={s}");
            assert!(m[2].abs() < 1e-13, "s={s}");
        }
        assert!(axis_stencil(-1e-9, n).is_none());
        assert!(axis_stencil(9.0 + 1e-9, n).is_none());
    }

    #[test]
    fn weights_are_continuous_across_cells() {
        let n = 10;
        let dense = |s: f64| {
            let st = axis_stencil(s, n).unwrap();
            let mut w = vec![0.0; n];
            for i in 0..st.len {
                w[st.start + i] += st.w[i];
            }
            w
        };
        for c in 1..9 {
            let a = dense(c as f64 - 1e-12);
            let b = dense(c as f64 + 1e-12);
            for i in 0..n {
                assert!((a[i] - b[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn node_positions_deposit_on_single_node() {
        for i in 0..10 {
            let st = axis_stencil(i as f64, 10).unwrap();
            for j in 0..st.len {
                let expect = if st.start + j == i { 1.0 } else { 0.0 };
                assert!((st.w[j] - expect).abs() < 1e-15);
            }
        }
    }
}
