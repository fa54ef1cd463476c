use num_complex::Complex64 as C;
use proptest::prelude::*;

use sdremu_core::phy::*;

const SCHEMES: [Modulation; 2] = [Modulation::Qam16, Modulation::Qam64];

/// Table built straight from the rule: per axis, binary-reflected Gray
/// labels in amplitude order, MSBs on I.
fn reference_table(m: Modulation) -> Vec<C> {
    let side = 1u32 << (m.bits_per_symbol() / 2);
    let mut levels = vec![0.0; side as usize];
    for idx in 0..side {
        let gray = idx ^ (idx >> 1);
        levels[gray as usize] = (2 * idx) as f64 - (side - 1) as f64;
    }
    let energy: f64 = (0..side * side)
        .map(|l| levels[(l / side) as usize].powi(2) + levels[(l % side) as usize].powi(2))
        .sum::<f64>()
        / (side * side) as f64;
    let s = 1.0 / energy.sqrt();
    (0..side * side)
        .map(|l| C::new(levels[(l / side) as usize] * s, levels[(l % side) as usize] * s))
        .collect()
}

fn label_bits(label: u32, k: usize) -> Vec<u8> {
    (0..k).rev().map(|i| ((label >> i) & 1) as u8).collect()
}

#[test]
fn table_matches_rule() {
    for m in SCHEMES {
        let want = reference_table(m);
        for (l, p) in m.constellation() {
            let w = want[l as usize];
            assert!((p - w).norm() < 1e-15, "{m:?} label {l}");
        }
    }
    let s = 10f64.sqrt();
    let p = Modulation::Qam16.modulate(&[0, 0, 0, 0]).unwrap()[0];
    assert!((p - C::new(-3.0 / s, -3.0 / s)).norm() < 1e-15);
    assert!((Modulation::Qam64.scale() - 1.0 / 42f64.sqrt()).abs() < 1e-16);
}

#[test]
fn unit_average_energy() {
    for m in SCHEMES {
        let pts = m.constellation();
        let e: f64 = pts.iter().map(|(_, p)| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
        assert!((e - 1.0).abs() < 1e-14, "{m:?} {e}");
    }
}

#[test]
fn gray_neighbours_differ_in_one_bit() {
    for m in SCHEMES {
        let pts = m.constellation();
        let step = 2.0 * m.scale();
        for (a, pa) in &pts {
            for (b, pb) in &pts {
                let d = pa - pb;
                let adjacent = ((d.re.abs() - step).abs() < 1e-9 && d.im.abs() < 1e-9)
                    || ((d.im.abs() - step).abs() < 1e-9 && d.re.abs() < 1e-9);
                if adjacent {
                    assert_eq!((a ^ b).count_ones(), 1, "{m:?} {a:b} {b:b}");
                }
            }
        }
    }
}

#[test]
fn points_demodulate_to_their_labels() {
    for m in SCHEMES {
        let k = m.bits_per_symbol();
        for (l, p) in m.constellation() {
            let (bits, erased) = m.demodulate(&[p]);
            assert_eq!(erased, 0);
            assert_eq!(bits, label_bits(l, k));
            let back = m.modulate(&bits).unwrap();
            assert_eq!(back, vec![p]);
        }
    }
    let top = Modulation::Qam64.modulate(&[1; 6]).unwrap();
    assert_eq!(Modulation::Qam64.demodulate(&top).0, vec![1; 6]);
}

#[test]
fn midpoint_goes_to_smaller_label() {
    let m = Modulation::Qam16;
    let a = m.point(0b0000);
    let b = m.point(0b0001);
    let (bits, _) = m.demodulate(&[(a + b) / 2.0]);
    assert_eq!(bits, vec![0, 0, 0, 0]);
    // midpoint between labels 0011 (I level 0) and 0111 (I level 1): 0011
    let c = (m.point(0b0011) + m.point(0b0111)) / 2.0;
    assert_eq!(m.demodulate(&[c]).0, vec![0, 0, 1, 1]);
}

#[test]
fn non_finite_symbols_are_erased() {
    let m = Modulation::Qam16;
    let (bits, erased) = m.demodulate(&[C::new(f64::NAN, 0.1), m.point(5), C::new(0.0, f64::INFINITY)]);
    assert_eq!(erased, 2);
    assert_eq!(&bits[..4], &[0, 0, 0, 0]);
    assert_eq!(&bits[4..8], &label_bits(5, 4)[..]);
    assert_eq!(&bits[8..], &[0, 0, 0, 0]);
}

#[test]
fn modulate_rejects_partial_symbols() {
    assert_eq!(
        Modulation::Qam64.modulate(&[1, 0, 1]),
        Err(PhyError::Length { len: 3, per_symbol: 6 })
    );
}

#[test]
fn random_bits_are_seeded() {
    assert_eq!(random_bits(9, 1000), random_bits(9, 1000));
    assert_ne!(random_bits(9, 64), random_bits(10, 64));
    assert!(random_bits(9, 0).is_empty());
    assert!(random_bits(3, 777).iter().all(|&b| b <= 1));
    // a longer request extends the shorter one
    assert_eq!(random_bits(4, 100)[..70], random_bits(4, 70)[..]);
}

#[test]
fn noise_variance_conventions() {
    assert_eq!(noise_variance(0.0, SnrConvention::EsN0, Modulation::Qam16), 1.0);
    assert_eq!(noise_variance(f64::INFINITY, SnrConvention::EsN0, Modulation::Qam16), 0.0);
    assert!((noise_variance(10.0, SnrConvention::EsN0, Modulation::Qam16) - 0.1).abs() < 1e-16);
    assert!((noise_variance(0.0, SnrConvention::EbN0, Modulation::Qam64) - 1.0 / 6.0).abs() < 1e-16);
}

#[test]
fn noiseless_awgn_is_transparent() {
    let m = Modulation::Qam16;
    let x = m.modulate(&random_bits(1, 16)).unwrap();
    let ch = ChannelModel {
        kind: ChannelKind::AwgnIdentity,
        n_tx: 4,
        n_rx: 4,
        snr_db: f64::INFINITY,
        convention: SnrConvention::EsN0,
    };
    let out = apply_channel(&x, &ch, noise_variance(ch.snr_db, ch.convention, m), 2);
    assert_eq!(out.y, x);
    assert_eq!(out.sigma2, 0.0);
    for r in 0..4 {
        for c in 0..4 {
            assert_eq!(out.h[r * 4 + c], C::new((r == c) as u8 as f64, 0.0));
        }
    }
}

/// Sample mean and its standard error.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn rayleigh_entries_have_unit_variance() {
    let ch = ChannelModel {
        kind: ChannelKind::FlatRayleigh,
        n_tx: 4,
        n_rx: 5,
        snr_db: 10.0,
        convention: SnrConvention::EsN0,
    };
    let x = vec![C::new(0.0, 0.0); 4];
    let mut re = Vec::new();
    let mut pw = Vec::new();
    let mut seed = 0;
    while pw.len() < 100_000 {
        let out = apply_channel(&x, &ch, 0.1, seed);
        seed += 1;
        for h in out.h {
            re.push(h.re * h.re);
            pw.push(h.norm_sqr());
        }
    }
    let (m, se) = mean_se(&pw);
    assert!((m - 1.0).abs() <= 3.0 * se, "E|h|² = {m} ± {se}");
    let (m, se) = mean_se(&re);
    assert!((m - 0.5).abs() <= 3.0 * se, "E[re²] = {m} ± {se}");
}

#[test]
fn measured_snr_matches_request() {
    let m = Modulation::Qam16;
    for snr_db in [0.0, 7.5, 20.0] {
        let ch = ChannelModel {
            kind: ChannelKind::AwgnIdentity,
            n_tx: 4,
            n_rx: 4,
            snr_db,
            convention: SnrConvention::EsN0,
        };
        let s2 = noise_variance(snr_db, ch.convention, m);
        let (mut es, mut en) = (0.0, 0.0);
        for it in 0..25_000u64 {
            let x = m.modulate(&random_bits(2 * it, 16)).unwrap();
            let out = apply_channel(&x, &ch, s2, 2 * it + 1);
            for (xi, yi) in x.iter().zip(&out.y) {
                es += xi.norm_sqr();
                en += (yi - xi).norm_sqr();
            }
        }
        let measured = 10.0 * (es / en).log10();
        assert!((measured - snr_db).abs() < 0.1, "{snr_db} dB measured {measured}");
    }
}

proptest! {
    #[test]
    fn bits_survive_a_noiseless_link(seed in any::<u64>(), symbols in 1usize..40, wide in any::<bool>()) {
        let m = if wide { Modulation::Qam64 } else { Modulation::Qam16 };
        let bits = random_bits(seed, symbols * m.bits_per_symbol());
        let (back, erased) = m.demodulate(&m.modulate(&bits).unwrap());
        prop_assert_eq!(erased, 0);
        prop_assert_eq!(back, bits);
    }

    #[test]
    fn decisions_are_nearest_points(re in -1.5f64..1.5, im in -1.5f64..1.5) {
        let m = Modulation::Qam16;
        let (bits, _) = m.demodulate(&[C::new(re, im)]);
        let label = bits.iter().fold(0u32, |a, &b| (a << 1) | b as u32);
        let d = (m.point(label) - C::new(re, im)).norm_sqr();
        for (_, p) in m.constellation() {
            prop_assert!(d <= (p - C::new(re, im)).norm_sqr() + 1e-12);
        }
    }
}
