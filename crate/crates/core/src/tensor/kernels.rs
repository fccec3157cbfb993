//! Inner loops for dense layers and valid convolutions.
//!
//! Convolution and transposed convolution share one geometry: a "large" grid
//! and a "small" grid linked by kernel offsets, `large = small * stride + k`.
//! For `conv2d` the input is the large grid; for `transposed_conv2d` the
//! input is the small grid. In both cases the filter bank is laid out as
//! `[small_channels][large_channels][kh][kw]`, so three routines cover the
//! forward and backward passes of both operations.

/// Geometry shared by a convolution and its transpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub small_ch: usize,
    pub large_ch: usize,
    pub small_h: usize,
    pub small_w: usize,
    pub large_h: usize,
    pub large_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
}

impl ConvGeom {
    fn small_pos(&self) -> usize {
        self.small_h * self.small_w
    }

    fn large_pos(&self) -> usize {
        self.large_h * self.large_w
    }

    fn taps(&self) -> usize {
        self.kh * self.kw
    }

    pub fn small_len(&self) -> usize {
        self.batch * self.small_ch * self.small_pos()
    }

    pub fn large_len(&self) -> usize {
        self.batch * self.large_ch * self.large_pos()
    }

    pub fn weight_len(&self) -> usize {
        self.small_ch * self.large_ch * self.taps()
    }

    /// Calls `f(small_pos, tap, large_pos)` for every linked pair.
    #[inline]
    fn for_each_link(&self, mut f: impl FnMut(usize, usize, usize)) {
        for sy in 0..self.small_h {
            for sx in 0..self.small_w {
                let sp = sy * self.small_w + sx;
                for i in 0..self.kh {
                    let ly = sy * self.sh + i;
                    for j in 0..self.kw {
                        let lx = sx * self.sw + j;
                        f(sp, i * self.kw + j, ly * self.large_w + lx);
                    }
                }
            }
        }
    }
}

#[inline]
pub(crate) fn axpy(y: &mut [f32], a: f32, x: &[f32]) {
    debug_assert_eq!(y.len(), x.len());
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    let mut tail = 0.0;
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    acc.iter().sum::<f32>() + tail
}

/// `[ch][pos]` to `[pos][ch]`.
fn to_pos_major(src: &[f32], ch: usize, pos: usize) -> Vec<f32> {
    let mut out = vec![0.0; ch * pos];
    for c in 0..ch {
        for p in 0..pos {
            out[p * ch + c] = src[c * pos + p];
        }
    }
    out
}

fn from_pos_major(src: &[f32], ch: usize, pos: usize, dst: &mut [f32]) {
    for p in 0..pos {
        for c in 0..ch {
            dst[c * pos + p] = src[p * ch + c];
        }
    }
}

/// Reorder `[sc][lc][tap]` into `[tap][sc][lc]` (large innermost) or
/// `[tap][lc][sc]` (small innermost).
fn permute_weight(w: &[f32], g: &ConvGeom, large_inner: bool) -> Vec<f32> {
    let (sc, lc, taps) = (g.small_ch, g.large_ch, g.taps());
    let mut out = vec![0.0; w.len()];
    for s in 0..sc {
        for l in 0..lc {
            for t in 0..taps {
                let v = w[(s * lc + l) * taps + t];
                let idx = if large_inner {
                    (t * sc + s) * lc + l
                } else {
                    (t * lc + l) * sc + s
                };
                out[idx] = v;
            }
        }
    }
    out
}

/// small[b][sc][sp] = Σ large[b][lc][lp] · w[sc][lc][tap]
pub(crate) fn to_small(large: &[f32], w: &[f32], g: &ConvGeom) -> Vec<f32> {
    let (sc, lc) = (g.small_ch, g.large_ch);
    let (sp_n, lp_n) = (g.small_pos(), g.large_pos());
    let mut out = vec![0.0; g.small_len()];
    let small_inner = sc >= lc;
    let wt = permute_weight(w, g, !small_inner);
    let mut acc = vec![0.0; sp_n * sc];
    for b in 0..g.batch {
        let lt = to_pos_major(&large[b * lc * lp_n..(b + 1) * lc * lp_n], lc, lp_n);
        acc.iter_mut().for_each(|v| *v = 0.0);
        if small_inner {
            g.for_each_link(|sp, t, lp| {
                let dst = &mut acc[sp * sc..(sp + 1) * sc];
                for l in 0..lc {
                    let a = lt[lp * lc + l];
                    if a != 0.0 {
                        axpy(dst, a, &wt[(t * lc + l) * sc..(t * lc + l + 1) * sc]);
                    }
                }
            });
        } else {
            g.for_each_link(|sp, t, lp| {
                let src = &lt[lp * lc..(lp + 1) * lc];
                for s in 0..sc {
                    acc[sp * sc + s] += dot(src, &wt[(t * sc + s) * lc..(t * sc + s + 1) * lc]);
                }
            });
        }
        from_pos_major(&acc, sc, sp_n, &mut out[b * sc * sp_n..(b + 1) * sc * sp_n]);
    }
    out
}

/// large[b][lc][lp] = Σ small[b][sc][sp] · w[sc][lc][tap]
pub(crate) fn to_large(small: &[f32], w: &[f32], g: &ConvGeom) -> Vec<f32> {
    let (sc, lc) = (g.small_ch, g.large_ch);
    let (sp_n, lp_n) = (g.small_pos(), g.large_pos());
    let mut out = vec![0.0; g.large_len()];
    let large_inner = lc >= sc;
    let wt = permute_weight(w, g, large_inner);
    let mut acc = vec![0.0; lp_n * lc];
    for b in 0..g.batch {
        let st = to_pos_major(&small[b * sc * sp_n..(b + 1) * sc * sp_n], sc, sp_n);
        acc.iter_mut().for_each(|v| *v = 0.0);
        if large_inner {
            g.for_each_link(|sp, t, lp| {
                let dst = &mut acc[lp * lc..(lp + 1) * lc];
                for s in 0..sc {
                    let a = st[sp * sc + s];
                    if a != 0.0 {
                        axpy(dst, a, &wt[(t * sc + s) * lc..(t * sc + s + 1) * lc]);
                    }
                }
            });
        } else {
            g.for_each_link(|sp, t, lp| {
                let src = &st[sp * sc..(sp + 1) * sc];
                for l in 0..lc {
                    acc[lp * lc + l] += dot(src, &wt[(t * lc + l) * sc..(t * lc + l + 1) * sc]);
                }
            });
        }
        from_pos_major(&acc, lc, lp_n, &mut out[b * lc * lp_n..(b + 1) * lc * lp_n]);
    }
    out
}

/// dw[sc][lc][tap] = Σ_b Σ small[b][sc][sp] · large[b][lc][lp]
pub(crate) fn weight_grad(small: &[f32], large: &[f32], g: &ConvGeom) -> Vec<f32> {
    let (sc, lc, taps) = (g.small_ch, g.large_ch, g.taps());
    let (sp_n, lp_n) = (g.small_pos(), g.large_pos());
    let large_inner = lc >= sc;
    let mut acc = vec![0.0; g.weight_len()];
    for b in 0..g.batch {
        let st = to_pos_major(&small[b * sc * sp_n..(b + 1) * sc * sp_n], sc, sp_n);
        let lt = to_pos_major(&large[b * lc * lp_n..(b + 1) * lc * lp_n], lc, lp_n);
        if large_inner {
            g.for_each_link(|sp, t, lp| {
                let src = &lt[lp * lc..(lp + 1) * lc];
                for s in 0..sc {
                    let a = st[sp * sc + s];
                    if a != 0.0 {
                        axpy(&mut acc[(t * sc + s) * lc..(t * sc + s + 1) * lc], a, src);
                    }
                }
            });
        } else {
            g.for_each_link(|sp, t, lp| {
                let src = &st[sp * sc..(sp + 1) * sc];
                for l in 0..lc {
                    let a = lt[lp * lc + l];
                    if a != 0.0 {
                        axpy(&mut acc[(t * lc + l) * sc..(t * lc + l + 1) * sc], a, src);
                    }
                }
            });
        }
    }
    let mut out = vec![0.0; acc.len()];
    for s in 0..sc {
        for l in 0..lc {
            for t in 0..taps {
                let idx = if large_inner {
                    (t * sc + s) * lc + l
                } else {
                    (t * lc + l) * sc + s
                };
                out[(s * lc + l) * taps + t] = acc[idx];
            }
        }
    }
    out
}

/// out[b][j] = bias[j] + Σ_i x[b][i] · w[i][j]
pub(crate) fn dense_forward(x: &[f32], w: &[f32], bias: &[f32], batch: usize, n: usize, m: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(batch * m);
    for b in 0..batch {
        out.extend_from_slice(bias);
        let row = &mut out[b * m..(b + 1) * m];
        for i in 0..n {
            let a = x[b * n + i];
            if a != 0.0 {
                axpy(row, a, &w[i * m..(i + 1) * m]);
            }
        }
    }
    out
}

pub(crate) fn dense_input_grad(go: &[f32], w: &[f32], batch: usize, n: usize, m: usize) -> Vec<f32> {
    let mut dx = vec![0.0; batch * n];
    for b in 0..batch {
        let g = &go[b * m..(b + 1) * m];
        for i in 0..n {
            dx[b * n + i] = dot(g, &w[i * m..(i + 1) * m]);
        }
    }
    dx
}

pub(crate) fn dense_weight_grad(x: &[f32], go: &[f32], batch: usize, n: usize, m: usize) -> Vec<f32> {
    let mut dw = vec![0.0; n * m];
    for b in 0..batch {
        let g = &go[b * m..(b + 1) * m];
        for i in 0..n {
            let a = x[b * n + i];
            if a != 0.0 {
                axpy(&mut dw[i * m..(i + 1) * m], a, g);
            }
        }
    }
    dw
}
