use fdsmc_core::frac_ops::{
    caputo_gl, frac_integral, gl_weights, FracOrder, GlStream, SampledSignal, DEFAULT_MEMORY_LEN,
};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

/// Closed-form Caputo derivative of `t^k`.
fn power_caputo(k: i32, q: f64, t: f64) -> f64 {
    gamma(k as f64 + 1.0) / gamma(k as f64 + 1.0 - q) * t.powf(k as f64 - q)
}

fn max_rel_err(k: i32, q: f64, h: f64) -> f64 {
    let n = (1.0 / h).round() as usize + 1;
    let f = SampledSignal::from_fn(0.0, h, n, |t| t.powi(k)).unwrap();
    let d = caputo_gl(&f, FracOrder::caputo(q).unwrap(), n).unwrap();
    (0..n)
        .filter(|&j| f.time(j) >= 0.1 - 1e-12)
        .map(|j| {
            let exact = power_caputo(k, q, f.time(j));
            ((d.values()[j] - exact) / exact).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn square_at_order_point_seven() {
    let err = max_rel_err(2, 0.7, 1e-3);
    assert!(err <= 1e-2, "max relative error {err}");
}

#[test]
fn power_law_error_is_first_order() {
    for k in [1, 2, 3] {
        for q in [0.3, 0.5, 0.7] {
            let coarse = max_rel_err(k, q, 2e-3);
            let fine = max_rel_err(k, q, 1e-3);
            let ratio = coarse / fine;
            assert!((1.7..=2.3).contains(&ratio), "k={k} q={q} ratio {ratio}");
        }
    }
}

#[test]
fn weights_by_hand() {
    let w = gl_weights(FracOrder::new(0.7).unwrap(), 3);
    assert_eq!(w[0], 1.0);
    assert_eq!(w[1], -0.7);
    assert!((w[2] + 0.105).abs() < 1e-15);
    assert_eq!(gl_weights(FracOrder::new(-1.0).unwrap(), 4), vec![1.0; 4]);
}

#[test]
fn integral_of_ramp() {
    let h = 1e-3;
    let f = SampledSignal::from_fn(0.0, h, 1001, |t| t).unwrap();
    let g = frac_integral(&f, 1.0, DEFAULT_MEMORY_LEN).unwrap();
    for j in 0..f.len() {
        let t = f.time(j);
        assert!((g.values()[j] - t * t / 2.0).abs() <= 1e-3);
    }
}

#[test]
fn integral_undoes_derivative() {
    // f(t) = sin(t) - t² has f(0) = 0.
    let h = 1e-3;
    let q = 0.6;
    let f = SampledSignal::from_fn(0.0, h, 2001, |t| t.sin() + t * t).unwrap();
    let d = caputo_gl(&f, FracOrder::caputo(q).unwrap(), DEFAULT_MEMORY_LEN).unwrap();
    let back = frac_integral(&d, q, DEFAULT_MEMORY_LEN).unwrap();
    for j in (200..f.len()).step_by(50) {
        let want = f.values()[j] - f.values()[0];
        assert!(((back.values()[j] - want) / want).abs() < 1e-2, "t={} got {} want {want}", f.time(j), back.values()[j]);
    }
}

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..120)
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

proptest! {
    #[test]
    fn operators_are_linear(x in signal(), y0 in signal(), a in -3.0..3.0f64, b in -3.0..3.0f64,
                            q in 0.05..0.95f64, mem in 1usize..150) {
        let n = x.len().min(y0.len());
        let (x, y) = (&x[..n], &y0[..n]);
        let h = 1e-2;
        let combo: Vec<f64> = x.iter().zip(y).map(|(u, v)| a * u + b * v).collect();
        let sx = SampledSignal::scalar(0.0, h, x.to_vec()).unwrap();
        let sy = SampledSignal::scalar(0.0, h, y.to_vec()).unwrap();
        let sc = SampledSignal::scalar(0.0, h, combo).unwrap();
        let ord = FracOrder::caputo(q).unwrap();
        type Op = Box<dyn Fn(&SampledSignal) -> SampledSignal>;
        let ops: Vec<Op> = vec![
            Box::new(move |s| caputo_gl(s, ord, mem).unwrap()),
            Box::new(move |s| frac_integral(s, q, mem).unwrap()),
            Box::new(move |s| frac_integral(s, 1.0 + q, mem).unwrap()),
        ];
        for op in &ops {
            let (fx, fy, fc) = (op(&sx), op(&sy), op(&sc));
            let scale: f64 = fx.values().iter().chain(fy.values()).map(|v| v.abs()).sum::<f64>() * 10.0;
            for j in 0..n {
                let want = a * fx.values()[j] + b * fy.values()[j];
                prop_assert!(close(fc.values()[j], want, scale), "j={} {} vs {}", j, fc.values()[j], want);
            }
        }
    }

    #[test]
    fn caputo_of_constant_vanishes(c in -1e6..1e6f64, n in 1usize..300, q in 0.01..0.99f64, mem in 1usize..400) {
        let f = SampledSignal::scalar(0.0, 1e-3, vec![c; n]).unwrap();
        let d = caputo_gl(&f, FracOrder::caputo(q).unwrap(), mem).unwrap();
        prop_assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stream_is_bit_identical_to_batch(x in signal(), q in 0.05..0.95f64, mem in 1usize..150) {
        let h = 5e-4;
        let f = SampledSignal::scalar(0.0, h, x.clone()).unwrap();
        let batch = caputo_gl(&f, FracOrder::caputo(q).unwrap(), mem).unwrap();
        let mut s = GlStream::caputo(q, h, mem).unwrap();
        for (j, v) in x.iter().enumerate() {
            let got = s.push(j as f64 * h, *v).unwrap();
            prop_assert_eq!(got.to_bits(), batch.values()[j].to_bits());
        }
        let ibatch = frac_integral(&f, q, mem).unwrap();
        let mut si = GlStream::integral(q, h, mem).unwrap();
        for (j, v) in x.iter().enumerate() {
            prop_assert_eq!(si.push(j as f64 * h, *v).unwrap().to_bits(), ibatch.values()[j].to_bits());
        }
    }

    #[test]
    fn output_depends_only_on_sample_offsets(x in signal(), t0 in -50.0..50.0f64, q in 0.1..0.9f64) {
        // Shifting the time origin leaves grid-indexed values unchanged.
        let h = 1e-2;
        let a = caputo_gl(&SampledSignal::scalar(0.0, h, x.clone()).unwrap(), FracOrder::caputo(q).unwrap(), 64).unwrap();
        let b = caputo_gl(&SampledSignal::scalar(t0, h, x).unwrap(), FracOrder::caputo(q).unwrap(), 64).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }
}
