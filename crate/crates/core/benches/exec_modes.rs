use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use conelab::barrier::{auto_beta, compute_b0, BarrierEvaluator, BarrierParams};
use conelab::exec::{set_mode, ExecMode};
use conelab::gap::{build_h, SingularSetSpec};
use conelab::profile::{solve_profile, ProfileParams};
use conelab::solver::{Problem, SolverConfig};

fn modes(c: &mut Criterion) {
    let phi = solve_profile(ProfileParams::new(3, 0.0)).unwrap();
    let phi_t = solve_profile(ProfileParams::new(3, 0.02)).unwrap();
    let (b0, _) = compute_b0(&phi_t).unwrap();
    let beta = auto_beta(0.02, b0);
    let h = build_h(SingularSetSpec { half_period: 4.0, intervals: vec![[0.0, 0.0], [1.0, 2.0]] }, beta).unwrap();
    let params = BarrierParams { m: 3, beta, eta: 0.02, eps: 1e-4, b0, sigma: 0.1, alpha: 1.1 };
    let ev = BarrierEvaluator::new(params, &h, &phi_t);
    let cfg = SolverConfig { n_sigma: 129, n_y: 128, ..Default::default() };
    let pb = Problem::new(&ev, &phi, &cfg).unwrap();
    let disc = pb.disc();
    let mut w = pb.lower.clone();
    pb.set_boundary(&mut w, 0.5);

    for (label, mode) in [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)] {
        let mut g = c.benchmark_group(label);
        g.sample_size(20);
        set_mode(mode);
        g.bench_function("jacobian_129x128", |b| b.iter(|| black_box(disc.linearize(black_box(&w)).unwrap())));
        g.bench_function("supersolution_sweep_128x128", |b| b.iter(|| black_box(ev.certify_supersolution(1e-4, 128, 128, 0).unwrap().report.pass())));
        g.finish();
    }
    set_mode(ExecMode::Parallel);
}

criterion_group!(benches, modes);
criterion_main!(benches);
