use super::*;
use crate::dsp::{periodogram, welch_psd, Window};
use crate::rf::PatchGridSpec;

fn quiet(mut m: MachineProfile) -> MachineProfile {
    m.noise_std = 0.0;
    m
}

fn flat_phantom() -> PhantomProfile {
    let mut p = PhantomProfile::class_a();
    p.attenuation_db_per_cm_per_mhz = 0.0;
    p
}

fn narrow_grid(n_lateral: usize) -> PatchGridSpec {
    PatchGridSpec {
        n_lateral,
        ..PatchGridSpec::default()
    }
}

fn small_cfg(n_frames: usize, lateral: usize) -> SimConfig {
    SimConfig {
        frame_lateral: lateral,
        n_frames,
        seed: 17,
        ..SimConfig::default()
    }
}

#[test]
fn pulse_peak_and_bandwidth() {
    let m = MachineProfile::train_machine();
    let p = pulse_waveform(&m);
    assert_eq!(p.len() % 2, 1);
    let n = 8192;
    let spec = periodogram(&p, n, Window::Rect).unwrap();
    let df = m.native_rate_hz / n as f64;
    let (k_peak, peak) = spec
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    assert!((k_peak as f64 * df - 9e6).abs() <= df);
    // -6 dB in amplitude is a quarter in power
    let above: Vec<usize> = (0..spec.len()).filter(|&k| spec[k] >= peak / 4.0).collect();
    let width = (above[above.len() - 1] - above[0]) as f64 * df;
    let fbw = width / m.center_freq_hz;
    assert!((fbw - m.fractional_bandwidth).abs() / m.fractional_bandwidth < 0.05, "fbw {fbw}");
}

#[test]
fn pulse_is_even() {
    for m in [MachineProfile::train_machine(), MachineProfile::test_machine()] {
        let p = pulse_waveform(&m);
        let n = p.len();
        for i in 0..n / 2 {
            assert_eq!(p[i], p[n - 1 - i]);
        }
    }
}

#[test]
fn reflectivity_deterministic() {
    let p = PhantomProfile::class_b();
    assert_eq!(gen_reflectivity(&p, 300, 4, 9), gen_reflectivity(&p, 300, 4, 9));
    assert_ne!(gen_reflectivity(&p, 300, 4, 9), gen_reflectivity(&p, 300, 4, 10));
}

#[test]
fn zero_echogenicity_field() {
    let mut p = PhantomProfile::class_a();
    p.echogenicity = 0.0;
    let r = gen_reflectivity(&p, 50, 3, 1);
    assert!(r.values.iter().all(|&v| v == 0.0));
}

#[test]
fn untilted_reflectivity_std() {
    let mut p = PhantomProfile::class_a();
    p.echogenicity = 2.5;
    let r = gen_reflectivity(&p, 2080, 256, 3);
    let n = r.values.len() as f64;
    let mean = r.values.iter().sum::<f64>() / n;
    let std = (r.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((std - 2.5).abs() / 2.5 < 0.02, "std {std}");
}

#[test]
fn zero_reflectivity_zero_frame() {
    let r = Reflectivity {
        axial_len: 2080,
        lateral_len: 3,
        values: vec![0.0; 2080 * 3],
    };
    for m in [MachineProfile::train_machine(), MachineProfile::test_machine()] {
        let f = scan(&quiet(m), &PhantomProfile::class_a(), &r, 5).unwrap();
        assert!(f.samples().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn test_machine_frame_length() {
    let p = PhantomProfile::class_a();
    let r = gen_reflectivity(&p, 2080, 2, 1);
    let f = scan(&MachineProfile::test_machine(), &p, &r, 2).unwrap();
    assert_eq!(f.axial_len(), 2080);
    assert_eq!(f.lateral_len(), 2);
    assert_eq!(f.sample_rate_hz, 40e6);
}

/// Vertex of a least-squares parabola through `(x, y)`.
fn parabola_vertex(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mut s = [[0.0; 3]; 3];
    let mut t = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let u = xi - mx;
        let p = [1.0, u, u * u];
        for r in 0..3 {
            t[r] += p[r] * yi;
            for c in 0..3 {
                s[r][c] += p[r] * p[c];
            }
        }
    }
    // Cramer's rule on the 3x3 normal equations
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(s);
    let col = |k: usize| {
        let mut m = s;
        for r in 0..3 {
            m[r][k] = t[r];
        }
        det(m) / d
    };
    mx - col(1) / (2.0 * col(2))
}

#[test]
fn welch_peak_at_center_frequency() {
    let p = flat_phantom();
    let grid = PatchGridSpec::default();
    for m in [MachineProfile::train_machine(), MachineProfile::test_machine()] {
        let r = gen_reflectivity(&p, 2080, 256, 11);
        let f = scan(&quiet(m.clone()), &p, &r, 0).unwrap();
        let psd = welch_psd(&[f], &grid, 256).unwrap();
        let nb = psd.n_bins();
        let avg: Vec<f64> = (0..nb).map(|k| psd.psd.iter().map(|s| s[k]).sum::<f64>()).collect();
        let max = avg.iter().cloned().fold(0.0, f64::max);
        // a Gaussian pulse has a parabolic log-spectrum; fit it over the half-power band
        let band: Vec<usize> = (0..nb).filter(|&k| avg[k] >= 0.5 * max).collect();
        let x: Vec<f64> = band.iter().map(|&k| k as f64).collect();
        let y: Vec<f64> = band.iter().map(|&k| avg[k].ln()).collect();
        let peak = parabola_vertex(&x, &y);
        let expect = m.center_freq_hz / psd.bin_frequency(1);
        assert!((peak - expect).abs() <= 1.0, "peak bin {peak}, expected {expect}");
    }
}

#[test]
fn identical_machines_give_identical_psd() {
    let p = PhantomProfile::calib_1();
    let q = quiet(MachineProfile::test_machine());
    let grid = narrow_grid(1);
    let (a, b) = acquire_stable(&small_cfg(1, 26), &q, &q.clone(), &p).unwrap();
    let pa = welch_psd(&a, &grid, 256).unwrap();
    let pb = welch_psd(&b, &grid, 256).unwrap();
    for (sa, sb) in pa.psd.iter().zip(&pb.psd) {
        for (x, y) in sa.iter().zip(sb) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-300));
        }
    }
}

#[test]
fn echogenicity_scales_noise_free_frames_exactly() {
    // powers of two keep every floating-point step exact
    let m = quiet(MachineProfile::test_machine());
    let p = PhantomProfile::class_b();
    let refl = gen_reflectivity(&p, 2080, 3, 5);
    let base = scan(&m, &p, &refl, 1).unwrap();
    for c in [2.0, 0.5, 4.0] {
        let mut pc = p.clone();
        pc.echogenicity *= c;
        let scaled = scan(&m, &pc, &gen_reflectivity(&pc, 2080, 3, 5), 1).unwrap();
        for (a, b) in scaled.samples().iter().zip(base.samples()) {
            assert_eq!(*a, (f64::from(*b) * c) as f32);
        }
    }
}

#[test]
fn stable_without_noise_repeats_frames() {
    let cfg = small_cfg(10, 4);
    let a = quiet(MachineProfile::train_machine());
    let b = quiet(MachineProfile::test_machine());
    let (fa, fb) = acquire_stable(&cfg, &a, &b, &PhantomProfile::calib_2()).unwrap();
    assert_eq!(fa.len(), 10);
    assert_eq!(fb.len(), 10);
    for f in &fa[1..] {
        assert_eq!(f.samples(), fa[0].samples());
    }
    for (i, f) in fa.iter().enumerate() {
        assert_eq!(f.frame_index, i as u32);
        assert_eq!(f.acquisition, Acquisition::Stable);
    }
}

#[test]
fn stable_identical_profiles_identical_pairs() {
    let cfg = small_cfg(3, 4);
    let m = quiet(MachineProfile::train_machine());
    let (fa, fb) = acquire_stable(&cfg, &m, &m.clone(), &PhantomProfile::class_a()).unwrap();
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.samples(), y.samples());
    }
}

fn abs_correlation(a: &RfFrame, b: &RfFrame) -> f64 {
    let x: Vec<f64> = a.samples().iter().map(|v| v.abs() as f64).collect();
    let y: Vec<f64> = b.samples().iter().map(|v| v.abs() as f64).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (u, v) in x.iter().zip(&y) {
        sxy += (u - mx) * (v - my);
        sxx += (u - mx) * (u - mx);
        syy += (v - my) * (v - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn stable_pairs_share_the_view() {
    let cfg = small_cfg(1, 16);
    let a = MachineProfile::train_machine();
    let b = MachineProfile::test_machine();
    let p = PhantomProfile::calib_1();
    let (sa, sb) = acquire_stable(&cfg, &a, &b, &p).unwrap();
    let fa = acquire_freehand(&cfg, &a, &p).unwrap();
    let fb = acquire_freehand(&SimConfig { seed: 99, ..cfg.clone() }, &b, &p).unwrap();
    let stable = abs_correlation(&sa[0], &sb[0]);
    let free = abs_correlation(&fa[0], &fb[0]);
    assert!(stable > free + 0.1, "stable {stable} free {free}");
}

#[test]
fn freehand_views_independent_and_reproducible() {
    let cfg = small_cfg(3, 4);
    let m = quiet(MachineProfile::train_machine());
    let p = PhantomProfile::class_b();
    let f = acquire_freehand(&cfg, &m, &p).unwrap();
    assert_ne!(f[0].samples(), f[1].samples());
    assert_eq!(f, acquire_freehand(&cfg, &m, &p).unwrap());
    let batched: Vec<RfFrame> = freehand_batches(&cfg, &m, &p, 2)
        .collect::<Result<Vec<_>>>()
        .unwrap()
        .into_iter()
        .flatten()
        .collect();
    assert_eq!(batched, f);
    assert!(f.iter().all(|x| x.acquisition == Acquisition::FreeHand));
}

#[test]
fn invalid_machine_rejected() {
    let mut m = MachineProfile::train_machine();
    m.center_freq_hz = 25e6;
    let p = PhantomProfile::class_a();
    let r = gen_reflectivity(&p, 10, 1, 0);
    assert!(matches!(scan(&m, &p, &r, 0), Err(Error::BadConfig(_))));
}
