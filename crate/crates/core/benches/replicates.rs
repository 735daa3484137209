use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oapsim_core::codec::{DecoderState, DegreeDistribution, Encoder, Page};
use oapsim_core::experiment::{run_scenario, Execution, Scenario};
use oapsim_core::galois::Field;
use oapsim_core::protocols::ProtocolKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sweep() -> Scenario {
    Scenario {
        name: "bench".into(),
        erasures: vec![0.3],
        protocols: vec![
            ProtocolKind::RatelessDeluge,
            ProtocolKind::Synapse,
            ProtocolKind::Coop,
        ],
        k: vec![16, 48],
        replicates: 20,
        ..Scenario::default()
    }
}

fn replicates(c: &mut Criterion) {
    let s = sweep();
    let mut group = c.benchmark_group("replicates");
    group.sample_size(10);
    for (label, exec) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        group.bench_function(label, |b| {
            b.iter(|| run_scenario(black_box(&s), None, exec, None).unwrap())
        });
    }
    group.finish();
}

fn decode(c: &mut Criterion) {
    let mut group = c.benchmark_group("decode");
    for (name, field, dist) in [
        ("gf2_lt", Field::gf2(), DegreeDistribution::default_lt()),
        ("gf2_dense", Field::gf2(), DegreeDistribution::UniformRlc),
        (
            "gf256_dense",
            Field::gf256(),
            DegreeDistribution::UniformRlc,
        ),
    ] {
        let k = 48;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let page = Page::random(0, k, 20, &mut rng);
        let enc = Encoder::new(field.clone(), dist, k).unwrap();
        let stream: Vec<_> = (0..4 * k).map(|_| enc.encode(&page, &mut rng)).collect();
        group.bench_with_input(BenchmarkId::new(name, k), &stream, |b, stream| {
            b.iter(|| {
                let mut dec = DecoderState::new(field.clone(), 0, k, 20);
                for cw in stream {
                    if dec.is_complete() {
                        break;
                    }
                    dec.absorb(cw).unwrap();
                }
                dec.decode().ok()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, replicates, decode);
criterion_main!(benches);
