use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use sdremu_core::cluster::{ClusterConfig, RunOptions};
use sdremu_core::emu::LatencyTable;
use sdremu_core::kernel::golden::{cholesky, gram_and_matched_filter};
use sdremu_core::kernel::*;
use sdremu_core::lowprec::{encode_fp, FpFormat};
use sdremu_oracle::linalg::mmse_direct;

type C = Complex64;

fn gauss(r: &mut ChaCha12Rng) -> C {
    // sum of uniforms is enough for test channels
    let mut g = || (0..6).map(|_| r.random::<f64>()).sum::<f64>() - 3.0;
    C::new(g(), g()) * (0.5f64).sqrt()
}

fn random_problem(r: &mut ChaCha12Rng, n_tx: usize, n_rx: usize, sigma2: f64) -> DetectionProblem {
    let h: Vec<C> = (0..n_rx * n_tx).map(|_| gauss(r)).collect();
    let y = (0..n_rx).map(|_| gauss(r)).collect();
    DetectionProblem { n_tx, n_rx, h, y, sigma2 }
}

fn rel_err(a: &[C], b: &[C]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn golden_matches_direct_inverse() {
    let mut r = ChaCha12Rng::seed_from_u64(1);
    for n in [2, 4, 8, 16, 32] {
        for _ in 0..50 {
            let s2 = 0.1 + r.random::<f64>();
            let p = random_problem(&mut r, n, n, s2);
            let x = golden_mmse(&p).unwrap();
            let want = mmse_direct(&p.h, &p.y, p.sigma2, n, n);
            assert!(rel_err(&x, &want) < 1e-12, "n={n}");
        }
    }
}

#[test]
fn cholesky_reconstructs_gram() {
    let mut r = ChaCha12Rng::seed_from_u64(2);
    for n in [3, 8, 16] {
        let p = random_problem(&mut r, n, n + 2, 1.0);
        let (g, _) = gram_and_matched_filter(&p);
        let l = cholesky(&g, n).unwrap();
        let mut res = 0.0;
        let mut norm = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: C = (0..n).map(|k| l[i * n + k] * l[j * n + k].conj()).sum();
                res += (s - g[i * n + j]).norm_sqr();
                norm += g[i * n + j].norm_sqr();
            }
            assert_eq!(l[i * n + i].im, 0.0);
            assert!(l[i * n + i].re > 0.0);
        }
        assert!((res / norm).sqrt() < 1e-14);
    }
}

#[test]
fn identity_channel_halves_y() {
    for v in Variant::EMULATED {
        // y = 0.75 - 1.5i and its half are exact in fp8 and fp16
        let p = DetectionProblem {
            n_tx: 1,
            n_rx: 1,
            h: vec![C::new(1.0, 0.0)],
            y: vec![C::new(0.75, -1.5)],
            sigma2: 1.0,
        };
        let q = QuantizedProblem::new(&p, v);
        let x = functional_mmse(&q).unwrap();
        let want = encode_fp(0.375, FpFormat::FP16) | (encode_fp(-0.75, FpFormat::FP16) << 16);
        assert_eq!(x, vec![want], "{v}");
    }
}

#[test]
fn variant_names_round_trip() {
    for v in Variant::ALL {
        assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        assert_eq!(v.name().to_uppercase().parse::<Variant>().unwrap(), v);
    }
    assert!("half".parse::<Variant>().is_err());
}

#[test]
fn half16_close_to_golden() {
    let mut r = ChaCha12Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = random_problem(&mut r, 4, 4, 0.5);
        let x = decode_xhat(&functional_mmse(&QuantizedProblem::new(&p, Variant::Half16)).unwrap());
        worst = worst.max(rel_err(&x, &golden_mmse(&p).unwrap()));
    }
    assert!(worst < 0.05, "worst relative error {worst}");
}

#[test]
fn precision_ordering_on_corpus() {
    let mut r = ChaCha12Rng::seed_from_u64(4);
    let corpus: Vec<_> = (0..300).map(|_| random_problem(&mut r, 4, 4, 0.3)).collect();
    let mean = |v: Variant| {
        let mut s = 0.0;
        let mut n = 0.0;
        for p in &corpus {
            if let Ok(x) = functional_mmse(&QuantizedProblem::new(p, v)) {
                s += rel_err(&decode_xhat(&x), &golden_mmse(p).unwrap());
                n += 1.0;
            }
        }
        s / n
    };
    assert!(mean(Variant::Half16) <= mean(Variant::Quarter8));
}

#[test]
fn wdotp8_equals_quarter8_on_exact_inputs() {
    // powers of two with a diagonal channel: every product and partial sum
    // is exact in fp8, so both Gram paths round identically
    let p = DetectionProblem {
        n_tx: 2,
        n_rx: 2,
        h: vec![C::new(2.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.5, 0.0)],
        y: vec![C::new(1.0, -2.0), C::new(0.25, 0.5)],
        sigma2: 1.0,
    };
    let a = functional_mmse(&QuantizedProblem::new(&p, Variant::Quarter8)).unwrap();
    let b = functional_mmse(&QuantizedProblem::new(&p, Variant::WDotp8)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn host_only_variant_is_rejected() {
    let cfg = ClusterConfig::default();
    assert!(matches!(
        generate_kernel(Variant::Double64, 4, 4, 1, 1, &cfg),
        Err(KernelError::HostOnly(_))
    ));
}

#[test]
fn capacity_error_reports_sizes() {
    let cfg = ClusterConfig::default();
    // eight harts share one 32 KiB tile
    match generate_kernel(Variant::Half16, 32, 32, 1, 8, &cfg) {
        Err(KernelError::Capacity(e)) => {
            assert_eq!(e.available, 4096);
            assert!(e.required > e.available);
        }
        other => panic!("{other:?}"),
    }
    let k = generate_kernel(Variant::Half16, 32, 32, 1, 1, &cfg).unwrap();
    // Hc, Hb, G and three copies of L, plus z, d, u and two solve operands
    let l = &k.layout;
    assert_eq!(l.record_bytes, 32 * 4 + 4 + 32 * 4 + 32 * 32 * 4 + 4);
    assert_eq!(l.scratch_bytes, 6 * 32 * 32 * 4 + 5 * 32 * 4);
}

fn problems(seed: u64, v: Variant, n_tx: usize, n_rx: usize, count: usize) -> Vec<QuantizedProblem> {
    let mut r = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            // small σ² makes the 8-bit pivots fail now and then
            let s2 = 10f64.powf(-3.0 * r.random::<f64>());
            QuantizedProblem::new(&random_problem(&mut r, n_tx, n_rx, s2), v)
        })
        .collect()
}

fn emulated(v: Variant, qs: &[QuantizedProblem], n_harts: u32) -> Vec<ProblemResult> {
    let cfg = ClusterConfig::default();
    let batch = qs.len() as u32 / n_harts;
    let k = generate_kernel(v, qs[0].n_tx as u32, qs[0].n_rx as u32, batch, n_harts, &cfg).unwrap();
    run_kernel(&k, qs, &cfg, &LatencyTable::default(), RunOptions::default())
        .unwrap()
        .results
}

fn check_equivalence(v: Variant, n_tx: usize, n_rx: usize, seed: u64) -> (usize, usize) {
    let qs = problems(seed, v, n_tx, n_rx, 120);
    let got = emulated(v, &qs, 4);
    let mut failures = 0;
    for (i, (q, r)) in qs.iter().zip(&got).enumerate() {
        assert!(r.completed(), "{v} {n_tx}x{n_rx} problem {i} never ran");
        let want = functional_mmse(q);
        let have = r.outcome().map(<[u32]>::to_vec);
        assert_eq!(have, want, "{v} {n_tx}x{n_rx} problem {i}");
        failures += want.is_err() as usize;
    }
    (qs.len(), failures)
}

#[test]
fn emulated_kernels_match_functional_models() {
    for v in Variant::EMULATED {
        for (n_tx, n_rx) in [(2, 2), (4, 4), (2, 3), (4, 5)] {
            let (n, _) = check_equivalence(v, n_tx, n_rx, 100 + n_tx as u64 * 10 + n_rx as u64);
            assert!(n >= 100);
        }
    }
}

#[test]
fn pivot_failures_are_reported_identically() {
    let (_, failures) = check_equivalence(Variant::Quarter8, 4, 4, 7);
    assert!(failures > 0, "corpus should exercise the failure path");
}

#[test]
fn canaries_survive_failed_pivots() {
    // σ² = 0 and a zero channel column: the second pivot is exactly zero
    let p = DetectionProblem {
        n_tx: 2,
        n_rx: 2,
        h: vec![C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0)],
        y: vec![C::new(1.0, 0.0), C::new(1.0, 0.0)],
        sigma2: 0.0,
    };
    let q = QuantizedProblem::new(&p, Variant::Half16);
    assert_eq!(functional_mmse(&q), Err(NonPositiveDiagonal { index: 1 }));
    let r = emulated(Variant::Half16, &[q], 1);
    assert_eq!(r[0].status, 2);
    assert_eq!(r[0].xhat, vec![CANARY; 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn loaded_inputs_read_back(seed in any::<u64>(), vi in 0usize..5) {
        let v = Variant::EMULATED[vi];
        let cfg = ClusterConfig::default();
        let qs = problems(seed, v, 3, 4, 6);
        let k = generate_kernel(v, 3, 4, 3, 2, &cfg).unwrap();
        let mem = sdremu_core::cluster::ClusterMemory::new(cfg);
        load_problems(&mem, &k.layout, &qs).unwrap();
        let eb = v.element_bytes() as usize;
        for (p, q) in qs.iter().enumerate() {
            let (hart, idx) = k.layout.place(p);
            let base = k.layout.record_base(hart, idx);
            let mut buf = vec![0u8; k.layout.record_bytes as usize];
            mem.read_bytes(base, &mut buf).unwrap();
            let elem = |off: usize| {
                let mut w = [0u8; 4];
                w[..eb].copy_from_slice(&buf[off..off + eb]);
                u32::from_le_bytes(w)
            };
            for (i, &w) in q.y.iter().enumerate() {
                prop_assert_eq!(elem(k.layout.y as usize + i * eb), w);
            }
            for (i, &w) in q.h.iter().enumerate() {
                prop_assert_eq!(elem(k.layout.h as usize + i * eb), w);
            }
        }
        let res = extract_results(&mem, &k.layout).unwrap();
        prop_assert!(res.iter().all(|r| !r.completed() && r.xhat.iter().all(|&w| w == CANARY)));
    }
}
