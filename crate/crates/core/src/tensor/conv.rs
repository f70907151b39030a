//! Channel-last 2D/3D cross-correlation with zero padding.
//!
//! `conv2d` is the `kt = 1` case of `conv3d`, applied to each leading frame
//! independently. All kernels parallelize over frames and keep a fixed
//! reduction order, so results do not depend on the thread count.

use rayon::prelude::*;

use super::gemm::{gemm_acc, transpose_into};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    /// Output extent `ceil(in / stride)`; total padding
    /// `max((out - 1) * stride + k - in, 0)`, smaller half in front.
    Same,
    /// No padding; output extent `(in - k) / stride + 1`.
    Valid,
}

/// Resolved sizes for one convolution, axes ordered (time, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad_front: [usize; 3],
    pub output: [usize; 3],
    pub cin: usize,
    pub cout: usize,
}

fn axis_out(op: &'static str, n: usize, k: usize, s: usize, padding: Padding) -> Result<(usize, usize)> {
    if s == 0 {
        return Err(Error::shape(op, "stride must be at least 1"));
    }
    match padding {
        Padding::Same => {
            let out = n.div_ceil(s);
            let total = ((out - 1) * s + k).saturating_sub(n);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if k > n {
                return Err(Error::shape(
                    op,
                    format!("kernel extent {k} exceeds input extent {n}: empty output"),
                ));
            }
            Ok(((n - k) / s + 1, 0))
        }
    }
}

impl ConvGeometry {
    pub fn new(
        op: &'static str,
        input: [usize; 3],
        cin: usize,
        kernel: [usize; 3],
        cout: usize,
        stride: [usize; 3],
        padding: [Padding; 3],
    ) -> Result<Self> {
        let mut output = [0; 3];
        let mut pad_front = [0; 3];
        for a in 0..3 {
            if kernel[a] == 0 {
                return Err(Error::shape(op, "kernel extent must be at least 1"));
            }
            let (o, p) = axis_out(op, input[a], kernel[a], stride[a], padding[a])?;
            output[a] = o;
            pad_front[a] = p;
        }
        Ok(Self {
            input,
            kernel,
            stride,
            pad_front,
            output,
            cin,
            cout,
        })
    }

    fn kernel_len(&self) -> usize {
        self.kernel.iter().product::<usize>() * self.cin * self.cout
    }

    /// Input index along `axis` for output position `o` and kernel tap `d`.
    #[inline]
    fn src(&self, axis: usize, o: usize, d: usize) -> Option<usize> {
        let i = (o * self.stride[axis] + d).checked_sub(self.pad_front[axis])?;
        (i < self.input[axis]).then_some(i)
    }
}

fn bias_len_check<T: Scalar>(op: &'static str, bias: &Tensor<T>, cout: usize) -> Result<()> {
    if bias.shape() != [cout] {
        return Err(Error::shape(
            op,
            format!("bias shape {:?}, expected [{cout}]", bias.shape()),
        ));
    }
    Ok(())
}

/// 2D cross-correlation of every frame of `input [N,H,W,Cin]` with
/// `kernel [kh,kw,Cin,Cout]`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    stride: (usize, usize),
    padding: Padding,
) -> Result<Tensor<T>> {
    let geom = conv2d_geometry(input.shape(), kernel.shape(), stride, padding)?;
    bias_len_check("conv2d", bias, geom.cout)?;
    Ok(run_forward(input, kernel, bias, &geom))
}

pub(crate) fn conv2d_geometry(
    input: &[usize],
    kernel: &[usize],
    stride: (usize, usize),
    padding: Padding,
) -> Result<ConvGeometry> {
    if input.len() != 4 || kernel.len() != 4 {
        return Err(Error::shape(
            "conv2d",
            format!("expected input [N,H,W,C] and kernel [kh,kw,Cin,Cout], got {input:?} and {kernel:?}"),
        ));
    }
    if input[3] != kernel[2] {
        return Err(Error::shape(
            "conv2d",
            format!("input has {} channels, kernel expects {}", input[3], kernel[2]),
        ));
    }
    ConvGeometry::new(
        "conv2d",
        [input[0], input[1], input[2]],
        input[3],
        [1, kernel[0], kernel[1]],
        kernel[3],
        [1, stride.0, stride.1],
        [Padding::Valid, padding, padding],
    )
}

/// 3D cross-correlation of `input [N,H,W,Cin]` (time leading) with
/// `kernel [kt,kh,kw,Cin,Cout]`.
pub fn conv3d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    stride: (usize, usize, usize),
    padding: Padding,
) -> Result<Tensor<T>> {
    let geom = conv3d_geometry(input.shape(), kernel.shape(), stride, padding)?;
    bias_len_check("conv3d", bias, geom.cout)?;
    Ok(run_forward(input, kernel, bias, &geom))
}

pub(crate) fn conv3d_geometry(
    input: &[usize],
    kernel: &[usize],
    stride: (usize, usize, usize),
    padding: Padding,
) -> Result<ConvGeometry> {
    if input.len() != 4 || kernel.len() != 5 {
        return Err(Error::shape(
            "conv3d",
            format!("expected input [N,H,W,C] and kernel [kt,kh,kw,Cin,Cout], got {input:?} and {kernel:?}"),
        ));
    }
    if input[3] != kernel[3] {
        return Err(Error::shape(
            "conv3d",
            format!("input has {} channels, kernel expects {}", input[3], kernel[3]),
        ));
    }
    ConvGeometry::new(
        "conv3d",
        [input[0], input[1], input[2]],
        input[3],
        [kernel[0], kernel[1], kernel[2]],
        kernel[4],
        [stride.0, stride.1, stride.2],
        [padding; 3],
    )
}

/// Patch matrix `[oh·ow, kt·kh·kw·cin]` for output frame `ot`, zero where
/// the window hangs over the padding. With `taps`, only temporal tap `dt`
/// is gathered (`[oh·ow, kh·kw·cin]`).
fn im2col<T: Scalar>(x: &[T], g: &ConvGeometry, ot: usize, taps: Option<usize>, patches: &mut [T]) {
    let [_, ih, iw] = g.input;
    let [kt, kh, kw] = g.kernel;
    let [_, oh, ow] = g.output;
    let cin = g.cin;
    let dts = match taps {
        Some(dt) => dt..dt + 1,
        None => 0..kt,
    };
    let row_len = dts.len() * kh * kw * cin;
    patches.fill(T::zero());
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut patches[(oy * ow + ox) * row_len..][..row_len];
            for (ti, dt) in dts.clone().enumerate() {
                let Some(it) = g.src(0, ot, dt) else { continue };
                for dy in 0..kh {
                    let Some(iy) = g.src(1, oy, dy) else { continue };
                    for dx in 0..kw {
                        let Some(ix) = g.src(2, ox, dx) else { continue };
                        let px = &x[((it * ih + iy) * iw + ix) * cin..][..cin];
                        row[((ti * kh + dy) * kw + dx) * cin..][..cin].copy_from_slice(px);
                    }
                }
            }
        }
    }
}

fn run_forward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    g: &ConvGeometry,
) -> Tensor<T> {
    let [ot_n, oh, ow] = g.output;
    let cout = g.cout;
    let positions = oh * ow;
    let k_len = g.kernel_len() / cout;
    let frame_len = positions * cout;
    let mut out = vec![T::zero(); ot_n * frame_len];

    out.par_chunks_mut(frame_len)
        .enumerate()
        .for_each_init(
            || vec![T::zero(); positions * k_len],
            |patches, (ot, frame)| {
                im2col(input.data(), g, ot, None, patches);
                for px in frame.chunks_exact_mut(cout) {
                    px.copy_from_slice(bias.data());
                }
                gemm_acc(positions, k_len, cout, patches, kernel.data(), frame);
            },
        );

    Tensor::from_parts(vec![ot_n, oh, ow, cout], out)
}

/// Gradient with respect to the input, gathered per input frame.
pub(crate) fn conv3d_backward_input<T: Scalar>(
    grad_out: &Tensor<T>,
    kernel: &Tensor<T>,
    g: &ConvGeometry,
) -> Tensor<T> {
    let [it_n, ih, iw] = g.input;
    let [kt, kh, kw] = g.kernel;
    let [ot_n, oh, ow] = g.output;
    let [st, _, _] = g.stride;
    let (cin, cout) = (g.cin, g.cout);
    let positions = oh * ow;
    let tap_len = kh * kw * cin;
    let go = grad_out.data();

    // Per temporal tap, the kernel slice transposed to [cout, kh·kw·cin].
    let taps_t: Vec<Vec<T>> = (0..kt)
        .map(|dt| {
            let mut t = vec![T::zero(); tap_len * cout];
            transpose_into(tap_len, cout, &kernel.data()[dt * tap_len * cout..][..tap_len * cout], &mut t);
            t
        })
        .collect();

    let frame_len = ih * iw * cin;
    let mut grad = vec![T::zero(); it_n * frame_len];
    grad.par_chunks_mut(frame_len)
        .enumerate()
        .for_each_init(
            || vec![T::zero(); positions * tap_len],
            |gpatch, (it, frame)| {
                for (dt, wt) in taps_t.iter().enumerate() {
                    let Some(num) = (it + g.pad_front[0]).checked_sub(dt) else {
                        continue;
                    };
                    if num % st != 0 || num / st >= ot_n {
                        continue;
                    }
                    let ot = num / st;
                    gpatch.fill(T::zero());
                    gemm_acc(positions, cout, tap_len, &go[ot * positions * cout..], wt, gpatch);
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let row = &gpatch[(oy * ow + ox) * tap_len..][..tap_len];
                            for dy in 0..kh {
                                let Some(iy) = g.src(1, oy, dy) else { continue };
                                for dx in 0..kw {
                                    let Some(ix) = g.src(2, ox, dx) else { continue };
                                    let dst = &mut frame[(iy * iw + ix) * cin..][..cin];
                                    let src = &row[(dy * kw + dx) * cin..][..cin];
                                    for (a, &b) in dst.iter_mut().zip(src) {
                                        *a += b;
                                    }
                                }
                            }
                        }
                    }
                }
            },
        );

    Tensor::from_parts(vec![it_n, ih, iw, cin], grad)
}

pub(crate) fn conv3d_backward_kernel<T: Scalar>(
    input: &Tensor<T>,
    grad_out: &Tensor<T>,
    g: &ConvGeometry,
) -> (Vec<T>, Vec<T>) {
    let [ot_n, oh, ow] = g.output;
    let cout = g.cout;
    let positions = oh * ow;
    let nk = g.kernel_len();
    let k_len = nk / cout;
    let go = grad_out.data();

    let partials: Vec<Vec<T>> = (0..ot_n)
        .into_par_iter()
        .map_init(
            || (vec![T::zero(); positions * k_len], vec![T::zero(); positions * k_len]),
            |(patches, patches_t), ot| {
                im2col(input.data(), g, ot, None, patches);
                transpose_into(positions, k_len, patches, patches_t);
                let mut buf = vec![T::zero(); nk];
                gemm_acc(k_len, positions, cout, patches_t, &go[ot * positions * cout..], &mut buf);
                buf
            },
        )
        .collect();

    let mut gk = vec![T::zero(); nk];
    for p in &partials {
        for (a, &b) in gk.iter_mut().zip(p) {
            *a += b;
        }
    }
    let mut gb = vec![T::zero(); cout];
    for row in go.chunks_exact(cout) {
        for (a, &b) in gb.iter_mut().zip(row) {
            *a += b;
        }
    }
    (gk, gb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_t(shape: &[usize], seed: u64) -> Tensor {
        Tensor::uniform(shape, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn full_resolution_branch_shape() {
        let geom = conv2d_geometry(&[75, 224, 224, 3], &[3, 3, 3, 64], (2, 2), Padding::Same).unwrap();
        assert_eq!(geom.output, [75, 112, 112]);
        assert_eq!(geom.pad_front, [0, 0, 0]);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let x = rand_t(&[2, 5, 5, 3], 1);
        let k = Tensor::zeros(&[3, 3, 3, 4]).unwrap();
        let b = Tensor::new(vec![4], vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        let y = conv2d(&x, &k, &b, (2, 2), Padding::Same).unwrap();
        for (i, &v) in y.data().iter().enumerate() {
            assert_eq!(v, b.data()[i % 4]);
        }
    }

    #[test]
    fn ascending_valid_window_sums() {
        let x = Tensor::from_fn(&[1, 4, 4, 1], |i| i as f32).unwrap();
        let k = Tensor::ones(&[3, 3, 1, 1]).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        let y = conv2d(&x, &k, &b, (1, 1), Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2, 1]);
        assert_eq!(y.data(), &[45.0, 54.0, 81.0, 90.0]);
    }

    #[test]
    fn conv3d_full_resolution_shapes() {
        let x = Tensor::<f32>::zeros(&[75, 14, 14, 8]).unwrap();
        let k1 = Tensor::zeros(&[3, 3, 3, 8, 3]).unwrap();
        let k2 = Tensor::zeros(&[3, 3, 3, 3, 3]).unwrap();
        let b = Tensor::zeros(&[3]).unwrap();
        let y = conv3d(&x, &k1, &b, (5, 2, 2), Padding::Same).unwrap();
        assert_eq!(y.shape(), &[15, 7, 7, 3]);
        let z = conv3d(&y, &k2, &b, (5, 1, 1), Padding::Same).unwrap();
        assert_eq!(z.shape(), &[3, 7, 7, 3]);
    }

    #[test]
    fn dirac_kernel_is_identity() {
        let x = rand_t(&[5, 4, 4, 1], 2);
        let mut k = Tensor::zeros(&[3, 3, 3, 1, 1]).unwrap();
        k.data_mut()[13] = 1.0;
        let y = conv3d(&x, &k, &Tensor::zeros(&[1]).unwrap(), (1, 1, 1), Padding::Same).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn shape_errors() {
        let x = rand_t(&[1, 4, 4, 2], 3);
        let b = Tensor::zeros(&[1]).unwrap();
        assert!(conv2d(&x, &rand_t(&[3, 3, 3, 1], 4), &b, (1, 1), Padding::Same).is_err());
        assert!(conv2d(&x, &rand_t(&[5, 5, 2, 1], 4), &b, (1, 1), Padding::Valid).is_err());
        assert!(conv2d(&x, &rand_t(&[3, 3, 2, 1], 4), &b, (0, 1), Padding::Same).is_err());
        assert!(conv2d(&x, &rand_t(&[3, 3, 2, 2], 4), &b, (1, 1), Padding::Same).is_err());
    }

    #[test]
    fn same_padding_output_law() {
        for n in 1..=16 {
            for k in 1..=5 {
                for s in 1..=4 {
                    let (out, front) = axis_out("t", n, k, s, Padding::Same).unwrap();
                    assert_eq!(out, n.div_ceil(s));
                    let total = ((out - 1) * s + k).saturating_sub(n);
                    assert_eq!(front, total / 2);
                    assert!(front <= total - front);
                }
            }
        }
    }

    #[test]
    fn result_independent_of_thread_count() {
        let x = rand_t(&[6, 6, 6, 3], 5);
        let k = rand_t(&[3, 3, 3, 3, 4], 6);
        let b = rand_t(&[4], 7);
        let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let run = || {
            let geom = conv3d_geometry(x.shape(), k.shape(), (1, 2, 2), Padding::Same).unwrap();
            let y = run_forward(&x, &k, &b, &geom);
            let gi = conv3d_backward_input(&y, &k, &geom);
            let (gk, gb) = conv3d_backward_kernel(&x, &y, &geom);
            (y, gi, gk, gb)
        };
        let one = pool(1).install(run);
        let four = pool(4).install(run);
        assert!(one == four);
    }
}
