use criterion::{criterion_group, criterion_main, Criterion};
use guidelab::clockred::{
    build_block_instance, build_clock, toy::random_verifier, verify_fidelity_chain,
};
use guidelab::exactsim::{diagonalize, run_circuit};
use guidelab::qcpcp::{learn_statistics, omega_size, reduction_parameters, toy};
use guidelab_bench::{random_hamiltonian, rng};

fn clock(c: &mut Criterion) {
    let mut r = rng(5);
    let v = random_verifier(1, 1, 2, 5, &mut r).unwrap();
    c.bench_function("clock_build_t5", |b| {
        b.iter(|| build_clock(&v, &[true], 1e-3).unwrap())
    });
    let inst = build_clock(&v, &[true], 1e-3).unwrap();
    let mut group = c.benchmark_group("clock");
    group.sample_size(10);
    group.bench_function("fidelity_chain_t5", |b| {
        b.iter(|| verify_fidelity_chain(&build_block_instance(&inst, 1e-6, 2).unwrap()).unwrap())
    });
    group.finish();
}

fn learning(c: &mut Criterion) {
    let v = toy::pair_check().unwrap();
    let omega = omega_size(v.proof_length, v.num_queries()).unwrap();
    let (gamma, eps0, eps1) = reduction_parameters(0.1, omega);
    let mut seed = 0;
    c.bench_function("qcpcp_learn_pair_check", |b| {
        b.iter(|| {
            seed += 1;
            learn_statistics(&v, gamma, eps0, eps1, 0.05, seed).unwrap()
        })
    });
}

fn dense(c: &mut Criterion) {
    let mut r = rng(6);
    let h = random_hamiltonian(8, 6, 2, &mut r).to_dense().unwrap();
    let mut group = c.benchmark_group("dense");
    group.sample_size(10);
    group.bench_function("diagonalize_8q", |b| b.iter(|| diagonalize(&h).unwrap()));
    let stab = guidelab::states::StabilizerState::random(12, 10, &mut r).unwrap();
    group.bench_function("statevector_12q_clifford", |b| {
        b.iter(|| run_circuit(stab.circuit(), None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, clock, learning, dense);
criterion_main!(benches);
