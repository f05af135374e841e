use bitstream_lab::hard_instance::{is_frame_string, sample_u, HardInstanceL2};

const N: usize = 1 << 20;
const SAMPLES: u64 = 1000;

/// Frames are fair coins: across samples, both the total share of `1010`
/// frames and the share at fixed positions stay within three standard
/// deviations of one half.
#[test]
fn frames_are_fair_and_independent_of_position() {
    let positions: Vec<usize> = (0..16).map(|i| i * (N / 4 / 16) + i).collect();
    let mut at_position = vec![0u64; positions.len()];
    let mut total_ones = 0u64;
    let mut adjacent_equal = 0u64;
    for seed in 0..SAMPLES {
        let u = sample_u(N, seed).unwrap();
        assert_eq!(u.len(), N);
        assert_eq!(u.count_ones() as usize, N / 2);
        let lead: Vec<bool> = (0..N / 4).map(|f| u.get(4 * f)).collect();
        total_ones += lead.iter().filter(|&&b| b).count() as u64;
        adjacent_equal += lead.windows(2).filter(|w| w[0] == w[1]).count() as u64;
        for (slot, &p) in at_position.iter_mut().zip(&positions) {
            *slot += u64::from(lead[p]);
        }
    }

    let within = |count: u64, trials: u64| {
        let mean = trials as f64 / 2.0;
        let sigma = (trials as f64 / 4.0).sqrt();
        (count as f64 - mean).abs() <= 3.0 * sigma
    };
    let frames = SAMPLES * (N as u64 / 4);
    assert!(within(total_ones, frames), "{total_ones} of {frames}");
    let pairs = SAMPLES * (N as u64 / 4 - 1);
    assert!(within(adjacent_equal, pairs), "{adjacent_equal} of {pairs}");
    for (p, &c) in positions.iter().zip(&at_position) {
        assert!(within(c, SAMPLES), "frame {p}: {c} of {SAMPLES}");
    }
}

#[test]
fn samples_are_frame_strings_and_seeded() {
    let a = sample_u(1 << 16, 9).unwrap();
    assert!(is_frame_string(&a));
    assert_eq!(a, sample_u(1 << 16, 9).unwrap());
    assert_ne!(a, sample_u(1 << 16, 10).unwrap());
}

#[test]
fn warmup_differs_from_update() {
    let inst = HardInstanceL2::generate(1 << 16, 4).unwrap();
    let warm = inst.warmup_prefix();
    assert!(is_frame_string(&warm));
    assert_eq!(warm.len(), inst.u.len());
    assert_ne!(warm, inst.u);
}
