//! One-class, alignment and total losses.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Result, RhoError};

/// Norm floor used by cosine similarity.
pub const COSINE_EPS: f64 = 1e-12;

/// Unweighted loss terms of one evaluation. `total = 0.5 (l_ccr + l_cwr) + alpha l_gna`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub l_ccr: f64,
    pub l_cwr: f64,
    pub l_gna: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.l_ccr.is_finite() && self.l_cwr.is_finite() && self.l_gna.is_finite() && self.total.is_finite()
    }
}

pub fn total_loss(l_ccr: f64, l_cwr: f64, l_gna: f64, alpha: f64) -> LossBreakdown {
    LossBreakdown {
        l_ccr,
        l_cwr,
        l_gna,
        total: 0.5 * (l_ccr + l_cwr) + alpha * l_gna,
    }
}

/// Mean squared distance of labeled rows to `center` plus a Frobenius penalty
/// on `weights`.
pub fn loss_one_class(
    h: ArrayView2<'_, f64>,
    center: &Array1<f64>,
    labeled: &[usize],
    weights: &[Array2<f64>],
    penalty: f64,
) -> Result<f64> {
    if labeled.is_empty() {
        return Err(RhoError::InvalidInput("one-class loss needs labeled nodes".into()));
    }
    if center.len() != h.ncols() {
        return Err(RhoError::DimensionMismatch {
            context: "one-class center",
            expected: h.ncols(),
            actual: center.len(),
        });
    }
    let mut sum = 0.0;
    for &i in labeled {
        let row = h.row(i);
        sum += row.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>();
    }
    let frob: f64 = weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum();
    Ok(sum / labeled.len() as f64 + penalty * frob)
}

/// Rows scaled to unit length, with the norm floored at [`COSINE_EPS`].
pub(crate) fn normalize_rows(z: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = z
        .map_axis(Axis(1), |r| r.dot(&r).sqrt())
        .mapv(|n| n.max(COSINE_EPS));
    let unit = z / &norms.view().insert_axis(Axis(1));
    (unit, norms)
}

type GradPair = (Array2<f64>, Array2<f64>);

/// Value and logit gradients of one anchor direction of the alignment loss.
///
/// `pos` holds the anchor-vs-other-view similarities and `same` the
/// anchor-vs-same-view similarities; both are `b x b`. Returns the summed
/// per-anchor losses and `d/d(pos)`, `d/d(same)` of that sum.
fn anchor_direction(
    pos: &Array2<f64>,
    same: &Array2<f64>,
    tau: f64,
    include_positive: bool,
    want_grad: bool,
) -> (f64, Option<GradPair>) {
    let b = pos.nrows();
    let inv_tau = 1.0 / tau;
    let mut total = 0.0;
    let mut ep = Array2::<f64>::zeros((b, b));
    let mut es = Array2::<f64>::zeros((b, b));
    for i in 0..b {
        let p = pos.row(i);
        let s = same.row(i);
        let mut max = f64::NEG_INFINITY;
        for j in 0..b {
            if j != i || include_positive {
                max = max.max(p[j] * inv_tau);
            }
            if j != i {
                max = max.max(s[j] * inv_tau);
            }
        }
        let mut rp = ep.row_mut(i);
        let mut rs = es.row_mut(i);
        let mut denom = 0.0;
        for j in 0..b {
            if j != i || include_positive {
                rp[j] = (p[j] * inv_tau - max).exp();
                denom += rp[j];
            }
            if j != i {
                rs[j] = (s[j] * inv_tau - max).exp();
                denom += rs[j];
            }
        }
        total += max + denom.ln() - p[i] * inv_tau;
        if want_grad {
            let w = inv_tau / denom;
            rp *= w;
            rs *= w;
            rp[i] -= inv_tau;
        }
    }
    (total, want_grad.then_some((ep, es)))
}

/// Alignment loss over the rows in a batch, plus its gradients with respect to
/// the batch rows of both projections when `want_grad` is set.
pub(crate) fn gna_value_and_grad(
    z_ccr: &Array2<f64>,
    z_cwr: &Array2<f64>,
    tau: f64,
    include_positive: bool,
    want_grad: bool,
) -> Result<(f64, Option<GradPair>)> {
    let b = z_ccr.nrows();
    if b < 2 {
        return Err(RhoError::InvalidInput(format!(
            "alignment batch needs at least 2 nodes, got {b}"
        )));
    }
    if z_cwr.dim() != z_ccr.dim() {
        return Err(RhoError::DimensionMismatch {
            context: "alignment views",
            expected: b,
            actual: z_cwr.nrows(),
        });
    }
    let (uc, nc) = normalize_rows(z_ccr);
    let (uv, nv) = normalize_rows(z_cwr);
    let s_cv = uc.dot(&uv.t());
    let s_cc = uc.dot(&uc.t());
    let s_vv = uv.dot(&uv.t());
    let s_vc = s_cv.t().to_owned();

    let (l_c, g_c) = anchor_direction(&s_cv, &s_cc, tau, include_positive, want_grad);
    let (l_v, g_v) = anchor_direction(&s_vc, &s_vv, tau, include_positive, want_grad);
    let scale = 1.0 / (2.0 * b as f64);
    let loss = (l_c + l_v) * scale;

    let grads = match (g_c, g_v) {
        (Some((g_cv, g_cc)), Some((g_vc, g_vv))) => {
            let mut d_uc = g_cv.dot(&uv) + (&g_cc + &g_cc.t()).dot(&uc) + g_vc.t().dot(&uv);
            let mut d_uv = g_cv.t().dot(&uc) + g_vc.dot(&uc) + (&g_vv + &g_vv.t()).dot(&uv);
            d_uc *= scale;
            d_uv *= scale;
            Some((
                unnormalize_grad(&uc, &nc, z_ccr, d_uc),
                unnormalize_grad(&uv, &nv, z_cwr, d_uv),
            ))
        }
        _ => None,
    };
    Ok((loss, grads))
}

/// Pulls a gradient on unit rows back to the raw rows.
fn unnormalize_grad(unit: &Array2<f64>, norms: &Array1<f64>, raw: &Array2<f64>, d_unit: Array2<f64>) -> Array2<f64> {
    let mut out = d_unit;
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let raw_norm = raw.row(i).dot(&raw.row(i)).sqrt();
        if raw_norm > COSINE_EPS {
            let u = unit.row(i);
            let radial = u.dot(&row);
            row.scaled_add(-radial, &u);
        }
        row /= norms[i];
    }
    out
}

/// Graph normality alignment loss over the `batch` rows of both projections.
pub fn loss_gna(
    z_ccr: ArrayView2<'_, f64>,
    z_cwr: ArrayView2<'_, f64>,
    batch: &[usize],
    tau: f64,
    include_positive: bool,
) -> Result<f64> {
    let zc = z_ccr.select(Axis(0), batch);
    let zv = z_cwr.select(Axis(0), batch);
    gna_value_and_grad(&zc, &zv, tau, include_positive, false).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct transcription of the per-anchor alignment terms, no stabilization.
    fn naive_gna(zc: &Array2<f64>, zv: &Array2<f64>, tau: f64) -> f64 {
        let b = zc.nrows();
        let cos = |a: ndarray::ArrayView1<f64>, c: ndarray::ArrayView1<f64>| {
            a.dot(&c) / (a.dot(&a).sqrt() * c.dot(&c).sqrt())
        };
        let term = |a: &Array2<f64>, o: &Array2<f64>, i: usize| {
            let num = (cos(a.row(i), o.row(i)) / tau).exp();
            let mut den = 0.0;
            for j in 0..b {
                if j != i {
                    den += (cos(a.row(i), o.row(j)) / tau).exp();
                    den += (cos(a.row(i), a.row(j)) / tau).exp();
                }
            }
            -(num / den).ln()
        };
        (0..b).map(|i| term(zc, zv, i) + term(zv, zc, i)).sum::<f64>() / (2.0 * b as f64)
    }

    #[test]
    fn one_class_zero_at_center() {
        let h = array![[1.0, 2.0], [1.0, 2.0], [5.0, 5.0]];
        let c = array![1.0, 2.0];
        assert_eq!(loss_one_class(h.view(), &c, &[0, 1], &[], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn one_class_squared_norm() {
        let h = array![[3.0, 1.0]];
        let c = array![1.0, 1.0];
        assert_eq!(loss_one_class(h.view(), &c, &[0], &[], 0.0).unwrap(), 4.0);
    }

    #[test]
    fn one_class_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = Array2::from_shape_fn((9, 3), |_| rng.random_range(-2.0..2.0));
        let c = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
        let w = vec![Array2::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0)); 2];
        let labeled = [0, 3, 4, 8];
        let mut expected = 0.0;
        for &i in &labeled {
            for j in 0..3 {
                expected += (h[[i, j]] - c[j]) * (h[[i, j]] - c[j]);
            }
        }
        expected /= labeled.len() as f64;
        for m in &w {
            for a in 0..3 {
                for b in 0..3 {
                    expected += 0.01 * m[[a, b]] * m[[a, b]];
                }
            }
        }
        let got = loss_one_class(h.view(), &c, &labeled, &w, 0.01).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn one_class_rejects_empty() {
        let h = array![[0.0]];
        assert!(loss_one_class(h.view(), &array![0.0], &[], &[], 0.0).is_err());
    }

    #[test]
    fn gna_two_orthogonal_rows() {
        // -log(e^{1} / (e^0 + e^0)) = -(1 - ln 2).
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        let l = loss_gna(z.view(), z.view(), &[0, 1], 1.0, false).unwrap();
        assert!((l + (1.0 - 2f64.ln())).abs() < 1e-12);
        assert!((l + 0.3069).abs() < 1e-4);
    }

    #[test]
    fn gna_high_temperature_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for b in [2usize, 5, 9] {
            let zc = Array2::from_shape_fn((b, 4), |_| rng.random_range(-1.0..1.0));
            let zv = Array2::from_shape_fn((b, 4), |_| rng.random_range(-1.0..1.0));
            let batch: Vec<usize> = (0..b).collect();
            let l = loss_gna(zc.view(), zv.view(), &batch, 1e9, false).unwrap();
            assert!((l - (2.0 * (b as f64 - 1.0)).ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn gna_symmetric_in_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zc = Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
        let zv = Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
        let batch = [0, 1, 2, 3, 4, 5];
        let a = loss_gna(zc.view(), zv.view(), &batch, 0.5, false).unwrap();
        let b = loss_gna(zv.view(), zc.view(), &batch, 0.5, false).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gna_matches_naive_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let zc = Array2::from_shape_fn((7, 3), |_| rng.random_range(-1.0..1.0));
        let zv = Array2::from_shape_fn((7, 3), |_| rng.random_range(-1.0..1.0));
        let batch: Vec<usize> = (0..7).collect();
        let l = loss_gna(zc.view(), zv.view(), &batch, 0.7, false).unwrap();
        assert!((l - naive_gna(&zc, &zv, 0.7)).abs() < 1e-12);
    }

    #[test]
    fn gna_subset_batch_selects_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zc = Array2::from_shape_fn((8, 3), |_| rng.random_range(-1.0..1.0));
        let zv = Array2::from_shape_fn((8, 3), |_| rng.random_range(-1.0..1.0));
        let batch = [6, 1, 3];
        let l = loss_gna(zc.view(), zv.view(), &batch, 0.5, false).unwrap();
        let expected = naive_gna(&zc.select(Axis(0), &batch), &zv.select(Axis(0), &batch), 0.5);
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn gna_rejects_tiny_batch() {
        let z = array![[1.0, 0.0]];
        assert!(loss_gna(z.view(), z.view(), &[0], 0.5, false).is_err());
    }

    #[test]
    fn gna_stable_for_large_norms_and_low_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let zc = Array2::from_shape_fn((16, 4), |_| rng.random_range(-1e3..1e3));
        let zv = Array2::from_shape_fn((16, 4), |_| rng.random_range(-1e3..1e3));
        let batch: Vec<usize> = (0..16).collect();
        for include in [false, true] {
            let (l, g) = gna_value_and_grad(&zc, &zv, 0.05, include, true).unwrap();
            assert!(l.is_finite());
            let (gc, gv) = g.unwrap();
            assert!(gc.iter().chain(gv.iter()).all(|v| v.is_finite()));
            let l2 = loss_gna(zc.view(), zv.view(), &batch, 0.05, include).unwrap();
            assert_eq!(l, l2);
        }
    }

    #[test]
    fn gna_zero_rows_are_finite() {
        let zc = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        let zv = array![[1.0, 1.0], [0.0, 0.0], [0.5, 0.0]];
        let (l, g) = gna_value_and_grad(&zc, &zv, 0.5, false, true).unwrap();
        assert!(l.is_finite());
        let (gc, gv) = g.unwrap();
        assert!(gc.iter().chain(gv.iter()).all(|v| v.is_finite()));
    }

    #[test]
    fn gna_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for include in [false, true] {
            let zc = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
            let zv = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
            let (_, g) = gna_value_and_grad(&zc, &zv, 0.5, include, true).unwrap();
            let (gc, gv) = g.unwrap();
            let h = 1e-6;
            let eval = |zc: &Array2<f64>, zv: &Array2<f64>| {
                gna_value_and_grad(zc, zv, 0.5, include, false).unwrap().0
            };
            for idx in 0..15 {
                let (r, c) = (idx / 3, idx % 3);
                for (which, grad) in [(0, &gc), (1, &gv)] {
                    let (mut p, mut m) = (zc.clone(), zc.clone());
                    let (mut pv, mut mv) = (zv.clone(), zv.clone());
                    if which == 0 {
                        p[[r, c]] += h;
                        m[[r, c]] -= h;
                    } else {
                        pv[[r, c]] += h;
                        mv[[r, c]] -= h;
                    }
                    let fd = (eval(&p, &pv) - eval(&m, &mv)) / (2.0 * h);
                    assert!((fd - grad[[r, c]]).abs() < 1e-7, "{fd} vs {}", grad[[r, c]]);
                }
            }
        }
    }

    #[test]
    fn total_loss_arithmetic() {
        let b = total_loss(2.0, 4.0, 1.0, 0.5);
        assert_eq!(b.total, 3.5);
        assert_eq!(total_loss(2.0, 4.0, 7.0, 0.0).total, 3.0);
        assert!(total_loss(2.0, 4.0, 1.0, 0.6).total > b.total);
    }
}
