use memnet::crossbar::{sneak_path_audit, Crossbar, CrossbarSpec, PhaseKind, PhaseTrace};
use memnet::device::{characterize, DeviceCharacterization, MemristorParams, ModelId};
use memnet::network::{Mode, Network, NetworkConfig};
use memnet::waveform::Timing;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn silver() -> (MemristorParams, DeviceCharacterization) {
    let m = ModelId::Silver;
    (m.params(), characterize(&m.params(), &m.calibration_pulse()).unwrap())
}

fn crossbar(rows: usize, cols: usize, seed: u64) -> Crossbar {
    let (p, ch) = silver();
    let d = ModelId::Silver.datasheet();
    let spec = CrossbarSpec {
        rows,
        cols,
        g_ref: d.g_ref(),
        r0: 1000.0,
        a: 0.6,
        g_clip: d.g_lin,
    };
    let mut cb = Crossbar::new(spec, p, ch).unwrap();
    cb.initialize_uniform(d.g_lin.0, d.g_lin.1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    cb
}

fn blank_trace() -> PhaseTrace {
    PhaseTrace {
        kind: PhaseKind::Write,
        rows: 0,
        cols: 0,
        physical: true,
        cells: Vec::new(),
        windows: Vec::new(),
        max_node_voltage: 0.0,
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulated_reads_match_dense_products(rows in 1usize..=12, cols in 1usize..=12, seed in any::<u64>()) {
        let mut cb = crossbar(rows, cols, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let u: Vec<f64> = (0..rows).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let y: Vec<f64> = (0..cols).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let t = Timing::default();
        let f = cb.forward_read(&u, &t, None).unwrap();
        prop_assert!(rel(&f, &cb.forward_ideal(&u).unwrap()) < 1e-3);
        let b = cb.backward_read(&y, &t, None).unwrap();
        prop_assert!(rel(&b, &cb.backward_ideal(&y).unwrap()) < 1e-3);
    }
}

#[test]
fn reads_leave_conductances_alone() {
    let mut cb = crossbar(6, 5, 3);
    let before = cb.conductances();
    let t = Timing::default();
    let mut tr = blank_trace();
    cb.forward_read(&[0.2, -0.2, 0.2, -0.2, 0.2, 0.1], &t, Some(&mut tr)).unwrap();
    assert!(sneak_path_audit(&tr).pass);
    cb.backward_read(&[0.2, -0.2, 0.1, 0.0, -0.1], &t, Some(&mut tr)).unwrap();
    assert!(sneak_path_audit(&tr).pass);
    assert_eq!(cb.conductances(), before);
}

#[test]
fn update_sign_follows_input_and_error_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = NetworkConfig::new(vec![4, 4], ModelId::Silver, Mode::Device);
    let net = Network::new(cfg).unwrap();
    let enc = *net.encoding();
    let t = Timing::default();
    let mut seen = [false; 4];
    for trial in 0..20 {
        let mut cb = crossbar(5, 4, trial);
        let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let y: Vec<f64> = (0..4).map(|j| if j == 3 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let before = cb.conductances();
        cb.write_phase(&u, &y, &t, &enc, None).unwrap();
        let after = cb.conductances();
        for i in 0..5 {
            for j in 0..4 {
                let k = i * 4 + j;
                let dg = after[k] - before[k];
                if y[j] == 0.0 {
                    assert_eq!(dg, 0.0, "OFF column moved");
                    continue;
                }
                let expect = -(u[i] * y[j]).signum();
                assert_eq!(dg.signum(), expect, "cell ({i},{j}) u={} y={} dG={dg}", u[i], y[j]);
                seen[usize::from(u[i] > 0.0) * 2 + usize::from(y[j] > 0.0)] = true;
            }
        }
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn audit_flags_a_conducting_off_switch() {
    let cfg = NetworkConfig::new(vec![4, 4], ModelId::Silver, Mode::Device);
    let net = Network::new(cfg).unwrap();
    let t = Timing::default();
    let u = [0.2, 0.15, -0.1, 0.05, -0.2];
    let y = [0.8, -0.5, 0.0, 0.3];

    let mut cb = crossbar(5, 4, 1);
    let mut tr = blank_trace();
    cb.write_phase(&u, &y, &t, net.encoding(), Some(&mut tr)).unwrap();
    assert!(sneak_path_audit(&tr).pass);

    let mut bad = crossbar(5, 4, 1);
    let on = bad.switch_conductances().0;
    bad.force_switch_conductances(on, on);
    let mut tr = blank_trace();
    bad.write_phase(&u, &y, &t, net.encoding(), Some(&mut tr)).unwrap();
    assert!(!sneak_path_audit(&tr).pass);
}

#[test]
fn stuck_cells_ignore_writes() {
    let net = Network::new(NetworkConfig::new(vec![4, 4], ModelId::Silver, Mode::Device)).unwrap();
    let mut cb = crossbar(5, 4, 2);
    cb.inject_faults_with(1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let before = cb.conductances();
    cb.write_phase(&[0.2; 5], &[1.0, -1.0, 0.5, -0.5], &Timing::default(), net.encoding(), None)
        .unwrap();
    assert_eq!(cb.conductances(), before);
}
