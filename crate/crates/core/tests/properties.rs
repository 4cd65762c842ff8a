use eventdistill::events::{
    activation_mask, density_map, sample_window, voxelize, voxelize_with, ActivationMask, EventRecord, EventStream,
    EventVolume, Window,
};
use eventdistill::features::{student_backward_batch, student_forward_batch, FeatureGrid, StudentParams};
use eventdistill::losses::{combined_loss_with, LossWeights, MaskedPair};
use eventdistill::par::Execution;
use eventdistill::synth::{esim_events, synthesize_scene, Frame, SynthConfig};
use proptest::prelude::*;

fn events_strategy(w: u16, h: u16, max: usize) -> impl Strategy<Value = Vec<EventRecord>> {
    prop::collection::vec(
        (0..w, 0..h, prop::bool::ANY, 0u64..50_000).prop_map(|(x, y, on, t)| EventRecord::new(x, y, if on { 1 } else { -1 }, t)),
        0..max,
    )
}

fn grid(rows: usize, cols: usize, dim: usize, data: &[f64]) -> FeatureGrid {
    FeatureGrid::from_data(rows, cols, dim, data.to_vec()).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voxel_sum_equals_polarity_sum(events in events_strategy(16, 12, 400), bins in 1usize..7) {
        let stream = EventStream::from_unsorted(16, 12, events).unwrap();
        let v = voxelize(&stream, bins).unwrap();
        prop_assert!((v.sum() - stream.polarity_sum() as f64).abs() <= 1e-9);
    }

    #[test]
    fn voxelize_is_schedule_independent(events in events_strategy(16, 16, 600), bins in 1usize..5) {
        let stream = EventStream::from_unsorted(16, 16, events).unwrap();
        let a = voxelize_with(&stream, bins, Execution::Sequential).unwrap();
        let b = voxelize_with(&stream, bins, Execution::Parallel).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn mask_shrinks_as_tau_grows(
        data in prop::collection::vec(-4.0f64..4.0, 32 * 32 * 2),
        t1 in 0.0f64..200.0,
        dt in 0.0f64..200.0,
    ) {
        let vol = EventVolume::from_data(32, 32, 2, data).unwrap();
        let d = density_map(&vol, 8).unwrap();
        let lo = activation_mask(&d, t1).unwrap();
        let hi = activation_mask(&d, t1 + dt).unwrap();
        for (h, l) in hi.bits().iter().zip(lo.bits()) {
            prop_assert!(!h || *l);
        }
        for (i, &on) in lo.bits().iter().enumerate() {
            prop_assert_eq!(on, d.data()[i] >= t1);
        }
    }

    #[test]
    fn duration_window_selects_half_open_interval(
        events in events_strategy(8, 8, 200),
        anchor in 0u64..50_000,
        dt in 1u64..20_000,
    ) {
        let stream = EventStream::from_unsorted(8, 8, events).unwrap();
        let w = sample_window(&stream, Window::Duration(dt), anchor).unwrap();
        let expected = stream.events().iter().filter(|e| e.t >= anchor && e.t < anchor + dt).count();
        prop_assert_eq!(w.len(), expected);
        prop_assert!(w.events().iter().all(|e| e.t >= anchor && e.t < anchor + dt));
    }

    #[test]
    fn count_window_takes_latest_events(
        events in events_strategy(8, 8, 200),
        anchor in 0u64..50_000,
        n in 1usize..50,
    ) {
        let stream = EventStream::from_unsorted(8, 8, events).unwrap();
        let w = sample_window(&stream, Window::Count(n), anchor).unwrap();
        let eligible: Vec<&EventRecord> = stream.events().iter().filter(|e| e.t <= anchor).collect();
        prop_assert_eq!(w.len(), n.min(eligible.len()));
        let tail = &eligible[eligible.len() - w.len()..];
        prop_assert!(w.events().iter().zip(tail).all(|(a, b)| a == *b));
    }

    #[test]
    fn losses_ignore_token_order(
        k in prop::collection::vec(-2.0f64..2.0, 6 * 3),
        q in prop::collection::vec(-2.0f64..2.0, 6 * 3),
        bits in prop::collection::vec(prop::bool::ANY, 6),
        perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let permute = |v: &[f64]| -> Vec<f64> { perm.iter().flat_map(|&t| v[t * 3..t * 3 + 3].to_vec()).collect() };
        let pbits: Vec<bool> = perm.iter().map(|&t| bits[t]).collect();
        let a = MaskedPair::new(grid(2, 3, 3, &k), grid(2, 3, 3, &q), ActivationMask::from_bits(2, 3, 1.0, bits).unwrap()).unwrap();
        let b = MaskedPair::new(
            grid(2, 3, 3, &permute(&k)),
            grid(2, 3, 3, &permute(&q)),
            ActivationMask::from_bits(2, 3, 1.0, pbits).unwrap(),
        ).unwrap();
        let w = LossWeights::default();
        let ra = combined_loss_with(&[a], w, Execution::Sequential).unwrap();
        let rb = combined_loss_with(&[b], w, Execution::Sequential).unwrap();
        prop_assert!(close(ra.l1, rb.l1));
        prop_assert!(close(ra.intra, rb.intra));
        prop_assert!(close(ra.cross, rb.cross));
        // gradients permute along with the tokens
        prop_assert!(permute(ra.grads[0].data()).iter().zip(rb.grads[0].data()).all(|(x, y)| close(*x, *y)));
    }

    #[test]
    fn inactive_tokens_get_zero_gradient(
        k in prop::collection::vec(-2.0f64..2.0, 8 * 4),
        q in prop::collection::vec(-2.0f64..2.0, 8 * 4),
        bits in prop::collection::vec(prop::bool::ANY, 8),
    ) {
        let mask = ActivationMask::from_bits(2, 4, 1.0, bits.clone()).unwrap();
        let pair = MaskedPair::new(grid(2, 4, 4, &k), grid(2, 4, 4, &q), mask).unwrap();
        let r = combined_loss_with(&[pair], LossWeights::default(), Execution::Sequential).unwrap();
        for (t, &on) in bits.iter().enumerate() {
            if !on {
                prop_assert!(r.grads[0].token(t).iter().all(|&g| g == 0.0));
            }
        }
    }

    #[test]
    fn batched_loss_and_student_are_schedule_independent(seed in 0u64..1_000, n in 1usize..6) {
        let params = StudentParams::init(4, 2, 5, 3, seed).unwrap();
        let vols: Vec<EventVolume> = (0..n)
            .map(|i| {
                let data = (0..16 * 16 * 2).map(|j| (((j * 31 + i * 7) as u64 + seed) % 11) as f64 - 5.0).collect();
                EventVolume::from_data(16, 16, 2, data).unwrap()
            })
            .collect();
        let mut reports = Vec::new();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let ks = student_forward_batch(&params, &vols, exec).unwrap();
            let pairs: Vec<MaskedPair> = ks
                .iter()
                .map(|k| {
                    let half: Vec<f64> = k.data().iter().map(|v| v * 0.5 - 0.1).collect();
                    MaskedPair::new(k.clone(), grid(4, 4, 3, &half), ActivationMask::full(4, 4)).unwrap()
                })
                .collect();
            let r = combined_loss_with(&pairs, LossWeights::default(), exec).unwrap();
            let g = student_backward_batch(&params, &vols, &r.grads, exec).unwrap();
            reports.push((r.total, r.grads, g));
        }
        prop_assert_eq!(reports[0].0.to_bits(), reports[1].0.to_bits());
        prop_assert_eq!(&reports[0].1, &reports[1].1);
        prop_assert_eq!(&reports[0].2, &reports[1].2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn esim_counts_match_log_change(
        a in prop::collection::vec(0.0f64..=1.0, 6 * 5 * 3),
        b in prop::collection::vec(0.0f64..=1.0, 6 * 5 * 3),
        contrast in 0.05f64..0.8,
    ) {
        let eps = 1e-3;
        let f0 = Frame::new(6, 5, 100, a.clone()).unwrap();
        let f1 = Frame::new(6, 5, 5_100, b.clone()).unwrap();
        let s = esim_events(&f0, &f1, contrast, eps).unwrap();
        let mut counts = [0u64; 30];
        let mut sign = [0i8; 30];
        for e in s.events() {
            let i = e.y as usize * 6 + e.x as usize;
            counts[i] += 1;
            sign[i] = e.p;
            prop_assert!(e.t > 100 && e.t <= 5_100);
        }
        for i in 0..30 {
            let l0 = (a[i * 3] + a[i * 3 + 1] + a[i * 3 + 2]) / 3.0;
            let l1 = (b[i * 3] + b[i * 3 + 1] + b[i * 3 + 2]) / 3.0;
            let dl = (l1 + eps).ln() - (l0 + eps).ln();
            prop_assert_eq!(counts[i], (dl.abs() / contrast).floor() as u64);
            if counts[i] > 0 {
                prop_assert_eq!(sign[i], if dl > 0.0 { 1 } else { -1 });
            }
        }
        prop_assert!(s.events().windows(2).all(|p| p[0].t <= p[1].t));
    }

    #[test]
    fn evt1_round_trip_is_byte_exact(events in events_strategy(40, 30, 300)) {
        let stream = EventStream::from_unsorted(40, 30, events).unwrap();
        let bytes = stream.to_evt1_bytes();
        let back = EventStream::from_evt1_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &stream);
        prop_assert_eq!(back.to_evt1_bytes(), bytes);
    }
}

#[test]
fn scenes_are_reproducible() {
    let cfg = SynthConfig {
        width: 48,
        height: 32,
        ..SynthConfig::default()
    };
    let a = synthesize_scene(4, 2, &cfg).unwrap();
    let b = synthesize_scene(4, 2, &cfg).unwrap();
    assert_eq!(a.events, b.events);
    assert_eq!(a.frame1, b.frame1);
    assert_ne!(synthesize_scene(4, 3, &cfg).unwrap().events, a.events);
}
